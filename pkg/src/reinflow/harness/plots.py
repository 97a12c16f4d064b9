"""Static vector-graphics plots of metric curves."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "reinflow"  # deterministic element ids
import matplotlib.pyplot as plt

from ..errors import ConfigurationError
from .metrics import read_metrics


def emit_plot(metrics_path: str | Path, columns: list[str], out_path: str | Path,
              baseline: float | None = None, baseline_label: str = "pretrained") -> None:
    """Line chart of the requested columns against iteration, written as SVG.

    `baseline` draws a horizontal dashed reference (the pretrained evaluation
    score). An empty metrics file yields an empty-axes chart.
    """
    header, rows = read_metrics(metrics_path)
    if header:
        for col in columns:
            if col not in header:
                raise ConfigurationError(f"column {col!r} not in metrics file {metrics_path}")

    fig, ax = plt.subplots(figsize=(7, 4.5))
    if rows:
        iters = [r[header.index("iter")] for r in rows] if "iter" in header else list(range(len(rows)))
        for col in columns:
            values = [r[header.index(col)] for r in rows]
            marker = "o" if len(rows) == 1 else None
            ax.plot(iters, values, label=col, marker=marker)
    if baseline is not None:
        ax.axhline(baseline, linestyle="--", color="gray", label=baseline_label)
    ax.set_xlabel("iteration")
    ax.legend(loc="best") if (rows or baseline is not None) else None
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    # Strip the date so identical runs produce identical bytes.
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)
