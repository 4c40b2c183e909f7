"""Result records shared by the checking modules and the CLI."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

# Tolerance rungs. A report records which one applied.
TOL_ALGEBRAIC = 1e-10
TOL_FD = 1e-5


def _finite(x: float) -> float:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"non-finite value in report: {x!r}")
    return x


def serialize_witness(obj: Any) -> Any:
    """Turn numpy/complex inputs into JSON-friendly nested lists."""
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return {"re": np.real(obj).tolist(), "im": np.imag(obj).tolist()}
        return obj.tolist()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {str(k): serialize_witness(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [serialize_witness(v) for v in obj]
    return obj


@dataclass(frozen=True)
class GapReport:
    """Outcome of one inequality or identity check.

    ``gap`` is bound minus attained value, so the check holds when
    ``gap >= -tol``.  Checks whose hypotheses fail at runtime carry
    ``status == "skipped"`` and count as passing.
    """

    name: str
    gap: float
    lhs: float
    rhs: float
    tol: float
    rung: str = "algebraic"
    witness: Any = None
    status: str = ""
    message: str = ""

    def __post_init__(self):
        for attr in ("gap", "lhs", "rhs", "tol"):
            object.__setattr__(self, attr, _finite(getattr(self, attr)))
        if not self.status:
            object.__setattr__(self, "status", "pass" if self.gap >= -self.tol else "fail")

    @property
    def passed(self) -> bool:
        if self.status in ("skipped", "vacuous"):
            return True
        return self.gap >= -self.tol

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "gap": self.gap,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "tol": self.tol,
            "rung": self.rung,
            "status": self.status,
            "pass": self.passed,
            "message": self.message,
            "witness": serialize_witness(self.witness),
        }


def skipped(name: str, reason: str, rung: str = "fd") -> GapReport:
    return GapReport(name, 0.0, 0.0, 0.0, TOL_FD if rung == "fd" else TOL_ALGEBRAIC,
                     rung=rung, status="skipped", message=reason)


@dataclass
class FuzzSummary:
    """Aggregate of a seeded fuzz run over one inequality."""

    name: str
    m: int
    samples: int
    seed: int
    tol: float
    min_gap: float
    min_ratio: float
    worst_witness: Any = None
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.min_gap >= -self.tol

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "m": self.m,
            "samples": self.samples,
            "seed": self.seed,
            "tol": self.tol,
            "min_gap": _finite(self.min_gap),
            "min_ratio": _finite(self.min_ratio),
            "pass": self.passed,
            "worst_witness": serialize_witness(self.worst_witness),
            "extra": serialize_witness(self.extra),
        }
