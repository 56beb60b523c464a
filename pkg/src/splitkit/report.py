"""Run reports and their CSV/JSON serialization."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import CSV_HEADER, TraceRecord

__all__ = ["RunReport"]


@dataclass
class RunReport:
    """Outcome of one solver run, sufficient to reproduce it."""

    algo: str
    problem: str
    seed: int | None
    iterations: int
    wall_seconds: float
    residual: float
    converged: bool
    objective: float | None = None
    x: np.ndarray | None = None
    trace: list[TraceRecord] = field(default_factory=list)
    component_evals: int | None = None
    full_evals: int | None = None
    snapshot_refreshes: int | None = None
    config: dict = field(default_factory=dict)

    def trace_csv(self):
        lines = [CSV_HEADER]
        lines.extend(rec.to_csv_row() for rec in self.trace)
        return "\n".join(lines) + "\n"

    def write_trace_csv(self, path):
        with open(path, "w") as fh:
            fh.write(self.trace_csv())

    def summary_dict(self):
        out = {
            "algo": self.algo,
            "problem": self.problem,
            "seed": self.seed,
            "iterations": self.iterations,
            "wall_seconds": self.wall_seconds,
            "residual": self.residual,
            "converged": self.converged,
            "objective": self.objective,
            "config": self.config,
        }
        if self.component_evals is not None:
            out["component_evals"] = self.component_evals
            out["full_evals"] = self.full_evals
            out["snapshot_refreshes"] = self.snapshot_refreshes
        return out

    def to_json(self, **kwargs):
        return json.dumps(self.summary_dict(), **kwargs)
