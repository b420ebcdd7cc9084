"""Per-iteration trace records and their CSV form.

One row per iteration; columns that an algorithm does not produce stay
``None`` and are written as empty CSV fields, never fabricated.  Floats
are printed with 17 significant digits so traces round-trip exactly.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

COLUMNS = (
    "iter",
    "consensus_error",
    "optimality_gap",
    "max_node_error",
    "lyapunov",
    "innovation_max",
    "scale_s",
    "bits_cumulative",
    "seed",
)


@dataclass
class TraceRow:
    iter: int
    consensus_error: float = None
    optimality_gap: float = None
    max_node_error: float = None
    lyapunov: float = None
    innovation_max: float = None
    scale_s: float = None
    bits_cumulative: float = None
    seed: int = None


@dataclass
class Trace:
    """Rows plus run metadata; ``meta`` lines become ``#`` header comments."""

    algorithm: str
    rows: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    final_state: object = None

    def append(self, **kw):
        self.rows.append(TraceRow(**kw))

    def column(self, name: str) -> np.ndarray:
        vals = [getattr(r, name) for r in self.rows]
        return np.array([np.nan if v is None else float(v) for v in vals])

    def __len__(self):
        return len(self.rows)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def write_csv(trace: Trace, fp) -> None:
    close = False
    if isinstance(fp, (str, bytes)) or hasattr(fp, "__fspath__"):
        fp = open(fp, "w", encoding="utf-8")
        close = True
    try:
        fp.write(f"# algorithm={trace.algorithm}\n")
        for k, v in trace.meta.items():
            fp.write(f"# {k}={v}\n")
        fp.write(",".join(COLUMNS) + "\n")
        for row in trace.rows:
            fp.write(",".join(_fmt(getattr(row, c)) for c in COLUMNS) + "\n")
    finally:
        if close:
            fp.close()


def to_csv_text(trace: Trace) -> str:
    buf = io.StringIO()
    write_csv(trace, buf)
    return buf.getvalue()


def read_csv(fp) -> Trace:
    close = False
    if isinstance(fp, (str, bytes)) or hasattr(fp, "__fspath__"):
        fp = open(fp, "r", encoding="utf-8")
        close = True
    try:
        meta = {}
        algorithm = "unknown"
        header = None
        rows = []
        for line in fp:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                k, _, v = body.partition("=")
                if _ == "":
                    continue
                if k == "algorithm":
                    algorithm = v
                else:
                    meta[k] = v
                continue
            if header is None:
                header = line.split(",")
                if tuple(header) != COLUMNS:
                    raise ValueError(f"unexpected trace header {header}")
                continue
            cells = line.split(",")
            kw = {}
            for name, cell in zip(header, cells):
                if cell == "":
                    kw[name] = None
                elif name in ("iter", "seed"):
                    kw[name] = int(cell)
                else:
                    kw[name] = float(cell)
            rows.append(TraceRow(**kw))
        return Trace(algorithm=algorithm, rows=rows, meta=meta)
    finally:
        if close:
            fp.close()


__all__ = ["COLUMNS", "Trace", "TraceRow", "write_csv", "read_csv", "to_csv_text"]
