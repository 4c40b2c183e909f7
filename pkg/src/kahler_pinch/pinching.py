"""Pinching thresholds and theorem verdicts on model geometries.

Each theorem is identified by a stable string (``"T3.1"`` ... ``"T4.8"``).
A verdict compares a measured curvature quantity with the theorem's
threshold, then cross-checks the outcome against what is known about the
model: a model that satisfies the hypothesis but not the conclusion would
contradict the theorem.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .quadrature import (
    CHUNK,
    QuadratureGrid,
    build_grid,
    density_torus_invariant,
    measure_density,
    torus_invariant,
)

SQRT2 = math.sqrt(2.0)
DEFAULT_NODES = 16
# perturbed_fs has curvature concentrated around |z| ~ 2-4; 64 nodes put
# enough of them there for L^p norms to settle below 1e-6 relative
DEFAULT_NODES_BY_MODEL = {"perturbed_fs": 64}
SUP_RTOL = 1e-6
SUP_POINT_CAP = 300_000
DEFAULT_TRUNC_RADIUS = {"flat": 1.0, "complex_hyperbolic": 0.85}
HYPOTHESIS_TOL = 1e-8


class PinchError(ValueError):
    pass


def radical(m: int) -> float:
    """``sqrt(2(m+1)(m+2) / (2m^2+4m+3))``, shared by the E-and-B theorems."""
    return math.sqrt(2.0 * (m + 1) * (m + 2) / (2 * m * m + 4 * m + 3))


def P(m: int) -> float:
    return 1.5 if m == 2 else 2.0 * (2 * m - 1) / (m * m - 1)


def Q(m: int) -> float:
    return m * (m + 3) / (m + 1) if m in (2, 3) else 2.0 * (2 * m - 1) / (m - 1)


def _c31(m):
    return 4.0 * (m * m - m + 1) / m ** 3 * radical(m)


def _c32(m):
    return (m + 1) / m * radical(m)


def _c33(m):
    return P(m) * radical(m)


def _c34(m):
    return 2.0 / (m + 1) * radical(m)


def _c41(m):
    return 4.0 * (m * m + 1) * math.sqrt(m * m - 1) / (3.0 * m * (m + 1) * (m * m - 2))


def _c42(m):
    return (m + 3) * math.sqrt(m * m * (m * m - 1)) / (3.0 * (m + 1) * (m * m - 2))


def _c43(m):
    return Q(m) * math.sqrt(m * m - 1) / (3.0 * (m * m - 2))


def _c44(m):
    return 2.0 * math.sqrt(m * m - 1) / (3.0 * (m * m - 2))


@dataclass(frozen=True)
class Theorem:
    """Hypotheses, threshold constant and conclusion of one pinching theorem.

    ``constant(m)`` multiplies ``Lambda`` (``scale == "Lambda"``) or the
    scalar curvature ``R`` (``scale == "R"``).
    """

    tid: str
    kind: str                 # "Lm" integral norm or "sup" pointwise
    quantity: str             # "E+B" for sqrt(2)|E| + |B|, "B" for |B|
    compact: bool
    scalar_sign: str          # required sign of R: "+", "0" or "-"
    einstein: bool            # Einstein metric required
    m_min: int
    constant: callable
    scale: str
    conclusion: str
    conclusion_flag: str      # model flag that the conclusion asserts
    strict: bool = True
    decay_assumption: str = ""


THEOREMS = {
    "T3.1": Theorem("T3.1", "Lm", "E+B", False, "0", False, 2, _c31, "Lambda",
                    "Ricci-flat Kähler manifold", "einstein"),
    "T3.2": Theorem("T3.2", "Lm", "E+B", False, "-", False, 3, _c32, "Lambda",
                    "Kähler-Einstein", "einstein",
                    decay_assumption="integral of |E|^2 over geodesic balls B_r is o(r^2)"),
    "T3.3": Theorem("T3.3", "Lm", "E+B", True, "+", False, 2, _c33, "Lambda",
                    "Kähler-Einstein", "einstein"),
    "T3.4": Theorem("T3.4", "sup", "E+B", True, "+", False, 2, _c34, "R",
                    "Kähler-Einstein", "einstein", strict=False),
    "T4.1": Theorem("T4.1", "Lm", "B", False, "0", True, 2, _c41, "Lambda",
                    "constant holomorphic sectional curvature 0 (C^m if simply connected)",
                    "space_form"),
    "T4.2": Theorem("T4.2", "Lm", "B", False, "-", True, 4, _c42, "Lambda",
                    "constant holomorphic sectional curvature 2R/(m(m+1))", "space_form",
                    decay_assumption="integral of |B|^2 over geodesic balls B_r is o(r^2)"),
    "T4.3": Theorem("T4.3", "Lm", "B", True, "+", True, 2, _c43, "Lambda",
                    "biholomorphically homothetic to CP^m", "space_form"),
    "T4.4": Theorem("T4.4", "sup", "B", True, "+", True, 2, _c44, "R",
                    "biholomorphically homothetic to CP^m", "space_form"),
    "T4.5": Theorem("T4.5", "Lm", "E+B", False, "0", False, 2, _c41, "Lambda",
                    "constant holomorphic sectional curvature 0 (C^m if simply connected)",
                    "space_form"),
    "T4.6": Theorem("T4.6", "Lm", "E+B", False, "-", False, 4, _c42, "Lambda",
                    "constant holomorphic sectional curvature 2R/(m(m+1))", "space_form",
                    decay_assumption="integral of |E|^2 + |B|^2 over geodesic balls B_r is o(r^2)"),
    "T4.7": Theorem("T4.7", "Lm", "E+B", True, "+", False, 2, _c43, "Lambda",
                    "biholomorphically homothetic to CP^m", "space_form"),
    "T4.8": Theorem("T4.8", "sup", "E+B", True, "+", False, 2, _c44, "R",
                    "biholomorphically homothetic to CP^m", "space_form"),
}


def get_theorem(tid: str) -> Theorem:
    try:
        return THEOREMS[tid]
    except KeyError:
        raise PinchError(f"unknown theorem {tid!r}; choose from {sorted(THEOREMS)}") from None


def check_dimension(tid: str, m: int):
    th = get_theorem(tid)
    if m < th.m_min:
        raise PinchError(f"{tid}: theorem requires m >= {th.m_min}, got m={m}")


def yamabe_einstein_positive(Rscalar: float, volume: float, m: int) -> float:
    """Yamabe constant of a compact Einstein metric with ``R > 0``.

    ``Lambda = (m-1) R Vol^(1/m) / (2m-1)``.

    >>> yamabe_einstein_positive(1.0, 16.0, 2)  # doctest: +ELLIPSIS
    1.333333...
    """
    if not Rscalar > 0:
        raise PinchError(f"scalar curvature must be positive, got {Rscalar}")
    if not volume > 0:
        raise PinchError(f"volume must be positive, got {volume}")
    if m < 2:
        raise PinchError("Yamabe identity needs m >= 2")
    return (m - 1) * Rscalar * volume ** (1.0 / m) / (2 * m - 1)


def pinch_threshold(tid: str, m: int, Lambda: Optional[float] = None,
                    R: Optional[float] = None) -> float:
    """Right-hand side of the theorem's pinching condition."""
    th = get_theorem(tid)
    check_dimension(tid, m)
    if th.scale == "Lambda":
        if Lambda is None or not Lambda > 0:
            raise PinchError(f"{tid}: needs a positive Yamabe constant")
        value = th.constant(m) * Lambda
    else:
        if R is None or not R > 0:
            raise PinchError(f"{tid}: needs positive scalar curvature R")
        value = th.constant(m) * R
    return float(value)


# ---------------------------------------------------------------------------
# field summaries on grids


@dataclass
class GridSummary:
    """Per-node volume density and curvature norms on a quadrature grid."""

    grid: QuadratureGrid
    density: np.ndarray
    scalar: np.ndarray
    E: np.ndarray
    B: np.ndarray

    def field(self, quantity: str) -> np.ndarray:
        if quantity == "B":
            return self.B
        if quantity == "E":
            return self.E
        if quantity == "E+B":
            return SQRT2 * self.E + self.B
        raise PinchError(f"unknown quantity {quantity!r}")

    def integral(self, values) -> float:
        return math.fsum(self.grid.weights * self.density * values)

    def volume(self) -> float:
        return self.integral(np.ones_like(self.density))

    def lp(self, values, p: float) -> float:
        return max(self.integral(np.asarray(values) ** p), 0.0) ** (1.0 / p)

    def combined_norm(self, quantity: str, p: float) -> float:
        """``sqrt(2) ||E||_p + ||B||_p`` or ``||B||_p`` (norms of separate fields)."""
        if quantity == "E+B":
            return SQRT2 * self.lp(self.E, p) + self.lp(self.B, p)
        return self.lp(self.field(quantity), p)


def curvature_norm_fields(model, pts) -> dict:
    """Scalar curvature, |E| and |B| at points, evaluated at isometric images."""
    out = {"scalar": [], "E": [], "B": []}
    for i in range(0, len(pts), CHUNK):
        vals = model.invariant_norms(pts[i:i + CHUNK])
        for k in out:
            out[k].append(vals[k])
    return {k: np.concatenate(v) if v else np.empty(0) for k, v in out.items()}


def default_nodes(model) -> int:
    return DEFAULT_NODES_BY_MODEL.get(model.name, DEFAULT_NODES)


def model_grid(model, nodes: Optional[int] = None,
               trunc_radius: Optional[float] = None) -> QuadratureGrid:
    if nodes is None:
        nodes = default_nodes(model)
    if model.compact:
        return build_grid(model.blocks, nodes, compact=True)
    radius = trunc_radius if trunc_radius is not None else DEFAULT_TRUNC_RADIUS.get(model.name, 1.0)
    return build_grid(model.blocks, nodes, compact=False, trunc_radius=radius)


def summarize_grid(model, grid: QuadratureGrid) -> GridSummary:
    """Density and curvature norms at every node, with the torus collapse verified."""
    inside = model.chart.domain.contains(grid.points)
    if not np.all(inside):
        raise PinchError(f"grid node outside chart domain: {grid.points[np.argmin(inside)]}")
    if grid.phases_collapsed:
        dens_ok = density_torus_invariant(model.chart, grid)
        fields_ok = all(torus_invariant(lambda p, k=k: curvature_norm_fields(model, p)[k], grid)
                        for k in ("E", "B"))
        if not (dens_ok and fields_ok):
            grid = grid.with_phases()
    density = np.concatenate([measure_density(model.chart, grid.points[i:i + CHUNK])
                              for i in range(0, len(grid), CHUNK)])
    fields = curvature_norm_fields(model, grid.points)
    return GridSummary(grid, density, fields["scalar"], fields["E"], fields["B"])


# ---------------------------------------------------------------------------
# verdicts


@dataclass
class PinchVerdict:
    theorem_id: str
    m: int
    model: str
    lhs: Optional[float]
    threshold: Optional[float]
    margin: Optional[float]
    satisfied: bool
    expected_conclusion: str
    consistency: str
    reason: str = ""
    diagnostics: dict = field(default_factory=dict)

    @property
    def boundary(self) -> bool:
        return self.margin is not None and self.margin == 0.0

    @property
    def passed(self) -> bool:
        return self.consistency != "paper-contradiction"

    def to_dict(self) -> dict:
        return {
            "theorem_id": self.theorem_id, "m": self.m, "model": self.model,
            "lhs": self.lhs, "threshold": self.threshold, "margin": self.margin,
            "satisfied": self.satisfied, "boundary": self.boundary,
            "expected_conclusion": self.expected_conclusion,
            "consistency": self.consistency, "reason": self.reason,
            "diagnostics": self.diagnostics,
        }


def _sign(r: float, scale: float) -> str:
    if abs(r) <= HYPOTHESIS_TOL * scale:
        return "0"
    return "+" if r > 0 else "-"


def _standing_hypotheses(th: Theorem, model, summary: GridSummary) -> list:
    """Reasons the theorem's checkable hypotheses fail (empty when they hold)."""
    reasons = []
    r = summary.scalar
    scale = 1.0 + float(np.max(np.abs(r)))
    if th.compact and not model.compact:
        reasons.append("theorem is for compact manifolds")
    if not th.compact and model.compact:
        reasons.append("theorem is for complete noncompact manifolds")
    if float(np.max(r) - np.min(r)) > HYPOTHESIS_TOL * scale:
        reasons.append("scalar curvature is not constant")
    elif _sign(float(np.mean(r)), scale) != th.scalar_sign:
        reasons.append(f"scalar curvature sign is not {th.scalar_sign}")
    if th.einstein and float(np.max(summary.E)) > HYPOTHESIS_TOL * scale:
        reasons.append("metric is not Einstein")
    return reasons


def _sup_field(model, grid: QuadratureGrid, quantity: str, summary: GridSummary) -> tuple:
    """Sup over grid nodes, doubling the grid until it settles or the cap is hit."""
    values = summary.field(quantity)
    current = float(np.max(values))
    nodes = grid.nodes
    history = [(nodes, current)]
    capped = False
    while True:
        nxt = build_grid(grid.blocks, nodes * 2, grid.compact, grid.trunc_radius,
                         grid.phases_collapsed)
        if len(nxt) > SUP_POINT_CAP:
            capped = True
            break
        f = curvature_norm_fields(model, nxt.points)
        vals = SQRT2 * f["E"] + f["B"] if quantity == "E+B" else f[quantity]
        new = float(np.max(vals))
        nodes *= 2
        history.append((nodes, new))
        if abs(new - current) <= SUP_RTOL * max(abs(new), 1e-300) or abs(new - current) < 1e-12:
            current = max(current, new)
            break
        current = max(current, new)
    return current, {"sup_refinement": history, "sup_capped": capped}


def evaluate_theorem(tid: str, model, grid: Optional[QuadratureGrid] = None,
                     Lambda: Optional[float] = None, summary: Optional[GridSummary] = None,
                     nodes: Optional[int] = None, trunc_radius: Optional[float] = None) -> PinchVerdict:
    """Evaluate one theorem's pinching condition on a model and classify the outcome.

    Parameters
    ----------
    Lambda : float, optional
        User-supplied Yamabe constant.  Without it, only compact Einstein
        models with ``R > 0`` get one (from the Einstein identity); other
        integral-norm theorems come back inconclusive.
    summary : GridSummary, optional
        Precomputed node data, reused across theorems on the same model.
    """
    th = get_theorem(tid)
    m = model.m
    check_dimension(tid, m)
    if grid is None:
        grid = summary.grid if summary is not None else model_grid(model, nodes, trunc_radius)
    if summary is None:
        summary = summarize_grid(model, grid)
    conclusion_holds = bool(model.flags[th.conclusion_flag])
    if tid == "T3.1":
        conclusion_holds = conclusion_holds and model.flags["scalar_sign"] == "0"
    diag = {"grid": summary.grid.describe(), "conclusion_holds_for_model": conclusion_holds}
    if th.decay_assumption:
        diag["assumed_not_verified"] = th.decay_assumption
    truncated = not model.compact
    if truncated:
        diag["truncated"] = "truncated domain; diagnostic only"

    def verdict(lhs, threshold, consistency, reason, satisfied=False):
        margin = None if lhs is None or threshold is None else threshold - lhs
        return PinchVerdict(tid, m, model.name, lhs, threshold, margin, satisfied,
                            th.conclusion, consistency, reason, diag)

    reasons = _standing_hypotheses(th, model, summary)
    if reasons:
        return verdict(None, None, "inconclusive", "hypothesis not met: " + "; ".join(reasons))

    r_mean = float(np.mean(summary.scalar))
    if th.kind == "sup":
        lhs, info = _sup_field(model, summary.grid, th.quantity, summary)
        diag.update(info)
        threshold = pinch_threshold(tid, m, R=r_mean)
    else:
        lam = Lambda
        if lam is None:
            if model.compact and model.flags["einstein"] and r_mean > 0:
                vol = summary.volume()
                lam = yamabe_einstein_positive(r_mean, vol, m)
                diag["volume"] = vol
                diag["yamabe_source"] = "Einstein identity"
            else:
                return verdict(None, None, "inconclusive",
                               "Yamabe constant unavailable; supply one to evaluate")
        else:
            diag["yamabe_source"] = "user-supplied"
        diag["yamabe"] = lam
        lhs = summary.combined_norm(th.quantity, m)
        threshold = pinch_threshold(tid, m, Lambda=lam)
    margin = threshold - lhs
    satisfied = margin > 0
    if margin == 0.0:
        return verdict(lhs, threshold, "inconclusive", "boundary case", False)
    if satisfied and conclusion_holds:
        return verdict(lhs, threshold, "confirmed", "hypothesis holds and so does the conclusion",
                       True)
    if satisfied:
        if truncated:
            return verdict(lhs, threshold, "inconclusive",
                           "truncated norm below threshold; full norm not known", True)
        return verdict(lhs, threshold, "paper-contradiction",
                       "hypothesis holds but the model violates the conclusion", True)
    if not conclusion_holds:
        return verdict(lhs, threshold, "violated-as-expected",
                       "model violates the conclusion and the pinching bound fails")
    return verdict(lhs, threshold, "inconclusive",
                   "pinching bound fails although the conclusion holds")


def constant_orderings(m: int) -> dict:
    """The three comparisons between pinching constants, as ``(smaller, larger)`` pairs."""
    return {
        "T4.1_below_T3.1": (_c41(m), _c31(m)),
        "T4.2_below_T3.2": (_c42(m), _c32(m)),
        "radical_dominance": ((m - 2) / (m + 2) * math.sqrt(m / (m - 1)), 1.0 / radical(m)),
        "T4.3_below_T3.3": (_c43(m), _c33(m)),
    }
