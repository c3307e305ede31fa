"""Residual reports: the common currency of every numerical check.

A check never asserts by itself; it returns a :class:`ResidualReport` carrying
the measured sup-norm residual, the tolerance it was held to, and enough
parameters (grid, dt, seed, window) to reproduce the number bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional


@dataclass
class ResidualReport:
    name: str
    residual: float
    tolerance: float
    params: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.tolerance)

    def line(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (
            f"[{status}] {self.name}: residual={self.residual:.6e} "
            f"tol={self.tolerance:.6e}"
        )

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "residual": self.residual,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "params": _plain(self.params),
            "details": _plain(self.details),
        }


@dataclass
class DominationReport:
    """Worst violation of the pairwise domination inequality over a sample."""

    samples: int
    worst_violation: float
    tolerance: float
    seed: int
    witness: Optional[dict] = None

    @property
    def passed(self) -> bool:
        return bool(self.worst_violation <= self.tolerance)

    def line(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (
            f"[{status}] domination: worst={self.worst_violation:.6e} "
            f"tol={self.tolerance:.6e} over {self.samples} samples (seed={self.seed})"
        )

    def as_dict(self) -> dict:
        return {
            "name": "domination",
            "samples": self.samples,
            "worst_violation": self.worst_violation,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "seed": self.seed,
            "witness": _plain(self.witness) if self.witness else None,
        }


def combine_reports(name: str, parts) -> ResidualReport:
    """Summary report: residual is the worst excess over each part's tolerance.

    The combined report passes (excess <= 0) exactly when every part passes
    its own tolerance; the parts stay readable in ``details``.
    """
    parts = list(parts)
    excess = max((p.residual - p.tolerance for p in parts), default=0.0)
    return ResidualReport(
        name=name,
        residual=excess,
        tolerance=0.0,
        params={"parts": len(parts)},
        details={p.name: {"residual": p.residual, "tolerance": p.tolerance,
                          "passed": p.passed} for p in parts},
    )


def _plain(obj: Any):
    """Recursively convert numpy scalars/arrays for stable serialisation."""
    import numpy as np

    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj
