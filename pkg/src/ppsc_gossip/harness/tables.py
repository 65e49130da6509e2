"""Result tables with a fixed CSV layout."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

HEADER = ("experiment", "cell", "metric", "value", "std_err", "forced")


def fmt(value) -> str:
    """Deterministic text for numbers: 12 significant digits, integers verbatim."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".12g")
    try:
        return format(float(value), ".12g")
    except (TypeError, ValueError):
        return str(value)


def cell_key(**params) -> str:
    return ";".join(f"{k}={fmt(v)}" for k, v in params.items())


@dataclass
class ResultTable:
    experiment: str
    rows: list = field(default_factory=list)

    def add(self, cell: str, metric: str, value, std_err=None, forced: bool = False) -> None:
        self.rows.append((self.experiment, cell, metric, value, std_err, forced))

    def find(self, metric: str, cell: str = None):
        return [r[3] for r in self.rows if r[2] == metric and (cell is None or r[1] == cell)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(HEADER)
        for exp, cell, metric, value, se, forced in self.rows:
            w.writerow((exp, cell, metric, fmt(value), fmt(se), fmt(bool(forced))))
        return buf.getvalue()

    def write(self, path) -> None:
        Path(path).write_text(self.to_csv())
