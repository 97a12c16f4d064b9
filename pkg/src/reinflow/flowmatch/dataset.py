"""Pretraining dataset of (target chunk, condition) records.

Text format: a header line `chunk_dim,cond_dim,count`, then one record per
line of comma-separated float64 decimals, target chunk first, condition
after. Values are written with shortest round-trip precision so a save/load
cycle is bit-exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ConfigurationError


@dataclass
class FlowDataset:
    x1: np.ndarray    # (N, chunk_dim) target chunks
    cond: np.ndarray  # (N, cond_dim) observations

    def __post_init__(self):
        self.x1 = np.atleast_2d(np.asarray(self.x1, dtype=np.float64))
        self.cond = np.atleast_2d(np.asarray(self.cond, dtype=np.float64))
        if self.x1.shape[0] != self.cond.shape[0]:
            raise ConfigurationError("chunk/condition record counts differ")

    def __len__(self) -> int:
        return self.x1.shape[0]

    @property
    def chunk_dim(self) -> int:
        return self.x1.shape[1]

    @property
    def cond_dim(self) -> int:
        return self.cond.shape[1]


def save_dataset(ds: FlowDataset, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(f"{ds.chunk_dim},{ds.cond_dim},{len(ds)}\n")
        for row_x, row_c in zip(ds.x1, ds.cond):
            values = [repr(float(v)) for v in row_x] + [repr(float(v)) for v in row_c]
            fh.write(",".join(values) + "\n")


def load_dataset(path: str | Path) -> FlowDataset:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        try:
            chunk_dim, cond_dim, count = (int(v) for v in header.split(","))
        except ValueError as exc:
            raise ConfigurationError(f"bad dataset header {header!r} in {path}") from exc
        x1 = np.empty((count, chunk_dim))
        cond = np.empty((count, cond_dim))
        for i in range(count):
            line = fh.readline()
            if not line:
                raise ConfigurationError(f"dataset {path} truncated at record {i}")
            values = np.array(line.strip().split(","), dtype=np.float64)
            if values.size != chunk_dim + cond_dim:
                raise ConfigurationError(f"dataset {path}: record {i} has {values.size} fields")
            x1[i] = values[:chunk_dim]
            cond[i] = values[chunk_dim:]
    return FlowDataset(x1=x1, cond=cond)
