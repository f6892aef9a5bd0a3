"""Per-iteration records and their CSV / JSON serialization.

The CSV schema is fixed; reordering or renaming columns is a breaking change
guarded by a golden-file test.  Floats are serialized with ``repr`` (shortest
round-trip form), booleans as ``true`` / ``false``, so identical runs produce
byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

__all__ = ["IterationRecord", "TRACE_COLUMNS", "write_trace", "write_summary"]

TRACE_COLUMNS = (
    "iter", "J", "grad_norm", "gtilde_norm", "perturbation_norm",
    "deltaG", "deltaL", "rho_tilde", "alpha", "decrease_ok", "accepted",
)


@dataclass
class IterationRecord:
    """One outer iteration of either solver.

    The first eleven fields make up the trace CSV.  The plain trust-region
    solver fills the preconditioning columns with their degenerate values
    (gtilde_norm = grad_norm, perturbation_norm = 0, deltaL = 0, alpha = 0,
    decrease_ok = true).  The remaining fields are diagnostics carried in
    memory only: actual/predicted decreases, the Cauchy decreases of both
    models, per-subdomain local iteration counts, and cumulative operator
    application totals.
    """

    iter: int
    J: float
    grad_norm: float
    gtilde_norm: float
    perturbation_norm: float
    deltaG: float
    deltaL: float
    rho_tilde: float
    alpha: float
    decrease_ok: bool
    accepted: bool
    n_local_iters: tuple = ()
    ared: float = math.nan
    pred_tilde: float = math.nan
    cauchy_decrease_tilde: float = math.nan
    cauchy_decrease_plain: float = math.nan
    global_applications: int = 0
    local_applications: int = 0
    local_solves: int = 0


def _cell(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def write_trace(path, records) -> None:
    """Write iteration records as the fixed-schema trace CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(TRACE_COLUMNS)
        for rec in records:
            writer.writerow([_cell(getattr(rec, col)) for col in TRACE_COLUMNS])


def write_summary(path, summary: dict) -> None:
    """Write a run summary as deterministic, sorted, indented JSON."""
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
