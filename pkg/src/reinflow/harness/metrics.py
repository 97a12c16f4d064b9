"""Append-only CSV metrics log."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import ConfigurationError
from ..rlcore.trainer import METRICS_COLUMNS


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


class MetricsLog:
    """CSV writer whose header is pinned to the fine-tuning metrics schema;
    rows are flushed as they arrive and must be monotone in `iter`."""

    def __init__(self, path: str | Path, columns: list[str] | None = None):
        self.path = Path(path)
        self.columns = list(columns) if columns is not None else list(METRICS_COLUMNS)
        self._last_iter = None
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if not self.path.exists() or self.path.stat().st_size == 0:
            self.path.write_text(",".join(self.columns) + "\n", encoding="utf-8")
        else:
            header = self.path.read_text(encoding="utf-8").splitlines()[0]
            if header != ",".join(self.columns):
                raise ConfigurationError(f"metrics file {self.path} has a different schema")

    def append(self, row: dict) -> None:
        missing = [c for c in self.columns if c not in row]
        if missing:
            raise ConfigurationError(f"metrics row missing columns: {missing}")
        if "iter" in row and self._last_iter is not None and row["iter"] <= self._last_iter:
            raise ConfigurationError("metrics rows must be monotone in iter")
        self._last_iter = row.get("iter", self._last_iter)
        line = ",".join(_fmt_value(row[c]) for c in self.columns)
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(line + "\n")
            fh.flush()


def read_metrics(path: str | Path) -> tuple[list[str], list[list[float]]]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        return [], []
    columns = lines[0].split(",")
    rows = [[float(v) for v in line.split(",")] for line in lines[1:] if line.strip()]
    return columns, rows
