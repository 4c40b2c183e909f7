"""Closed-form Kähler models with sampled, validated ground-truth flags."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
import sympy as sp

from .chart import (
    ChartError,
    Domain,
    MetricChart,
    SymbolicMetric,
    bochner_field,
    chart_from_symbolic,
    covariant_derivative,
    curvature_batch,
    curvature_field_step,
    traceless_ricci_field,
)
from .expressions import coordinate_symbols

FLAG_NAMES = ("einstein", "constant_scalar", "space_form", "parallel_E", "parallel_B", "compact")
VALIDATION_POINTS = 10
PARALLEL_POINTS = 3
POSITIVITY_POINTS = 400
FLAG_TOL = 1e-8
PERTURBED_FAR_RADIUS = 8.0
PARALLEL_TOL = 1e-7


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    """A named model geometry with its chart and flags.

    ``blocks`` lists the sizes of the groups of complex coordinates the
    metric is built from (the factors of a product); quadrature treats
    each block in its own polar coordinates.  ``sample_radius`` bounds the
    points used for pointwise checks.
    """

    name: str
    m: int
    params: dict
    chart: MetricChart
    flags: dict
    blocks: tuple
    sample_radius: float
    exact_volume: float | None = None
    validation: dict = field(default_factory=dict)
    fold: Optional[Callable] = None
    far_chart: Optional[MetricChart] = None
    far_radius: float = math.inf

    def invariant_points(self, pts) -> np.ndarray:
        """Isometric images of ``pts`` that stay near the chart origin.

        Scalar curvature invariants may be evaluated at these points
        instead of the originals.  Far from the origin the coordinate
        expressions lose roughly ``eps |z|^6`` to cancellation, so this keeps
        sup and L^p evaluations accurate on compactified grids.
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=complex))
        return pts if self.fold is None else self.fold(pts)

    def invariant_norms(self, pts) -> dict:
        """Scalar curvature, ``|E|`` and ``|B|`` at ``pts``, accurate far from the origin.

        Points beyond ``far_radius`` are handed to ``far_chart`` at their
        folded images; this is for models that agree with a foldable
        reference metric to double precision outside that radius.
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=complex))
        if self.far_chart is None:
            b = curvature_batch(self.chart, self.invariant_points(pts))
            return {"scalar": b.scalar, "E": b.E_norm, "B": b.B_norm}
        out = {k: np.empty(len(pts)) for k in ("scalar", "E", "B")}
        far = np.linalg.norm(pts, axis=1) > self.far_radius
        for mask, chart, sel in ((~far, self.chart, pts[~far]),
                                 (far, self.far_chart, self.fold(pts[far]))):
            if not np.any(mask):
                continue
            b = curvature_batch(chart, sel)
            out["scalar"][mask] = b.scalar
            out["E"][mask] = b.E_norm
            out["B"][mask] = b.B_norm
        return out

    @property
    def compact(self) -> bool:
        return bool(self.flags["compact"])

    def sample_points(self, n: int, seed: int = 0) -> np.ndarray:
        """Seeded random points, uniform in the ball of radius ``sample_radius``."""
        rng = np.random.default_rng([seed, self.m, n])
        x = rng.normal(size=(n, 2 * self.m))
        x /= np.linalg.norm(x, axis=1, keepdims=True)
        r = self.sample_radius * rng.random(n) ** (1.0 / (2 * self.m))
        x *= r[:, None]
        return x[:, :self.m] + 1j * x[:, self.m:]

    def with_mode(self, mode: str) -> "ModelSpec":
        return replace(self, chart=self.chart.with_mode(mode))

    def describe(self) -> dict:
        return {"name": self.name, "m": self.m, "params": dict(self.params),
                "flags": dict(self.flags), "blocks": list(self.blocks)}


def _sq(z, zb, idx) -> sp.Expr:
    return sum((z[i] * zb[i] for i in idx), sp.Integer(0))


def _cpm_volume(k: int, scale: float) -> float:
    # volume of (CP^k, scale * g_FS) with dV = omega^k / k!
    return (2.0 * math.pi * scale) ** k / math.factorial(k)


def _measure_flags(chart: MetricChart, pts: np.ndarray) -> dict:
    batch = curvature_batch(chart, pts)
    r = batch.scalar
    scale = 1.0 + float(np.max(np.abs(r)))
    e_max = float(np.max(batch.E_norm))
    b_max = float(np.max(batch.B_norm))
    spread = float(np.max(r) - np.min(r))
    grad_e = grad_b = 0.0
    step = curvature_field_step(chart)
    for p in pts[:PARALLEL_POINTS]:
        de = covariant_derivative(chart, p, traceless_ricci_field(chart), step=step)
        db = covariant_derivative(chart, p, bochner_field(chart), slots=("h", "a", "h", "a"),
                                  step=step)
        grad_e = max(grad_e, float(np.max(np.abs(de.components))))
        grad_b = max(grad_b, float(np.max(np.abs(db.components))))
    if np.all(r > FLAG_TOL * scale):
        sign = "+"
    elif np.all(np.abs(r) <= FLAG_TOL * scale):
        sign = "0"
    elif np.all(r < -FLAG_TOL * scale):
        sign = "-"
    else:
        sign = "mixed"
    measured = {
        "einstein": e_max < FLAG_TOL * scale,
        "constant_scalar": spread < FLAG_TOL * scale,
        "space_form": e_max < FLAG_TOL * scale and b_max < FLAG_TOL * scale,
        "parallel_E": grad_e < PARALLEL_TOL * scale,
        "parallel_B": grad_b < PARALLEL_TOL * scale,
        "scalar_sign": sign,
    }
    stats = {"max_E": e_max, "max_B": b_max, "scalar_spread": spread,
             "max_grad_E": grad_e, "max_grad_B": grad_b,
             "scalar_mean": float(np.mean(r))}
    return measured, stats


def projective_fold(blocks) -> Callable:
    """Per-block chart swap of CP^k, an isometry of every multiple of Fubini–Study.

    In a block whose largest coordinate ``z_j`` has ``|z_j| > 1`` the point
    ``[1 : z]`` is sent to the image of the unitary swap of homogeneous
    coordinates ``0`` and ``j``, namely ``w_i = z_i / z_j`` for ``i != j``
    and ``w_j = 1 / z_j``; then ``|w|^2 <= k``.
    """
    bounds = np.cumsum((0,) + tuple(blocks))

    def fold(pts):
        out = np.array(pts, dtype=complex)
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            blk = out[:, lo:hi]
            j = np.argmax(np.abs(blk), axis=1)
            zj = blk[np.arange(len(blk)), j]
            far = np.abs(zj) > 1.0
            if not np.any(far):
                continue
            sub = blk[far] / zj[far, None]
            sub[np.arange(sub.shape[0]), j[far]] = 1.0 / zj[far]
            blk[far] = sub
            out[:, lo:hi] = blk
        return out

    return fold


def _finish(name, m, params, phi, z, zb, domain, flags, blocks, sample_radius,
            exact_volume=None, derivative_mode="exact", validate=True, fold=None,
            far=None) -> ModelSpec:
    sym = SymbolicMetric.from_potential(phi, m, z, zb, source=str(phi))
    chart = chart_from_symbolic(sym, domain, derivative_mode, name=name)
    far_chart, far_radius = far if far is not None else (None, math.inf)
    spec = ModelSpec(name, m, dict(params), chart, dict(flags), tuple(blocks), sample_radius,
                     exact_volume, fold=fold, far_chart=far_chart, far_radius=far_radius)
    if validate:
        spec = validate_model(spec)
    return spec


def validate_model(spec: ModelSpec) -> ModelSpec:
    """Check every declared flag against sampled curvature; raise on mismatch."""
    pts = spec.sample_points(VALIDATION_POINTS, seed=12345)
    exact = spec.chart.with_mode("exact") if spec.chart.jet_fn is not None else spec.chart
    try:
        # positivity scan over a wider cloud than the curvature probes
        probe = spec.sample_points(POSITIVITY_POINTS, seed=54321) * 2.0
        probe = probe[spec.chart.domain.contains(probe)]
        spec.chart.metric(probe)
        measured, stats = _measure_flags(exact, pts)
        if spec.far_chart is not None:
            _check_far_field(spec, exact)
        elif spec.fold is not None:
            _check_fold(spec, exact)
    except ChartError as exc:
        raise ModelError(f"{spec.name}: {exc}") from None
    wrong = [k for k, v in measured.items() if spec.flags.get(k) != v]
    if wrong:
        detail = ", ".join(f"{k}: declared {spec.flags.get(k)!r}, measured {measured[k]!r}"
                           for k in wrong)
        raise ModelError(f"{spec.name}: flag validation failed ({detail})")
    return replace(spec, validation=stats)


def _check_fold(spec: ModelSpec, chart: MetricChart):
    pts = spec.sample_points(VALIDATION_POINTS, seed=777) * 2.0
    a = curvature_batch(chart, pts)
    b = curvature_batch(chart, spec.fold(pts))
    for label, x, y in (("scalar", a.scalar, b.scalar), ("|E|", a.E_norm, b.E_norm),
                        ("|B|", a.B_norm, b.B_norm)):
        if np.max(np.abs(x - y)) > FLAG_TOL * (1.0 + np.max(np.abs(x))):
            raise ModelError(f"{spec.name}: declared isometry changes {label}")


def _check_far_field(spec: ModelSpec, chart: MetricChart):
    # just outside the hand-off radius both evaluations must agree
    pts = spec.sample_points(VALIDATION_POINTS, seed=778)
    pts = pts / np.linalg.norm(pts, axis=1, keepdims=True) * (spec.far_radius * 1.01)
    a = curvature_batch(chart, pts)
    b = spec.invariant_norms(pts)
    for label, x, y in (("scalar", a.scalar, b["scalar"]), ("|E|", a.E_norm, b["E"]),
                        ("|B|", a.B_norm, b["B"])):
        if np.max(np.abs(x - y)) > FLAG_TOL * (1.0 + np.max(np.abs(x))):
            raise ModelError(f"{spec.name}: far-field reference disagrees in {label}")


def _positive(**kwargs):
    for k, v in kwargs.items():
        if not v > 0:
            raise ModelError(f"parameter {k} must be positive, got {v}")


WHOLE = math.inf


def flat(m: int = 2, derivative_mode: str = "exact", validate: bool = True) -> ModelSpec:
    z, zb = coordinate_symbols(m)
    flags = dict(einstein=True, constant_scalar=True, space_form=True, parallel_E=True,
                 parallel_B=True, compact=False, scalar_sign="0")
    return _finish("flat", m, {"m": m}, _sq(z, zb, range(m)), z, zb, Domain.cube(m, WHOLE),
                   flags, (m,), 1.5, None, derivative_mode, validate)


def fubini_study(m: int = 2, scale: float = 1.0, derivative_mode: str = "exact",
                 validate: bool = True) -> ModelSpec:
    _positive(scale=scale)
    z, zb = coordinate_symbols(m)
    phi = sp.nsimplify(scale) * sp.log(1 + _sq(z, zb, range(m)))
    flags = dict(einstein=True, constant_scalar=True, space_form=True, parallel_E=True,
                 parallel_B=True, compact=True, scalar_sign="+")
    return _finish("fubini_study", m, {"m": m, "scale": scale}, phi, z, zb,
                   Domain.cube(m, WHOLE), flags, (m,), 1.5, _cpm_volume(m, scale),
                   derivative_mode, validate, fold=projective_fold((m,)))


def complex_hyperbolic(m: int = 2, scale: float = 1.0, derivative_mode: str = "exact",
                       validate: bool = True) -> ModelSpec:
    _positive(scale=scale)
    z, zb = coordinate_symbols(m)
    phi = -sp.nsimplify(scale) * sp.log(1 - _sq(z, zb, range(m)))
    flags = dict(einstein=True, constant_scalar=True, space_form=True, parallel_E=True,
                 parallel_B=True, compact=False, scalar_sign="-")
    return _finish("complex_hyperbolic", m, {"m": m, "scale": scale}, phi, z, zb,
                   Domain.cube(m, 0.9, radius=0.9), flags, (m,), 0.8, None,
                   derivative_mode, validate)


def product_cpm(m1: int = 1, m2: int = 1, a: float = 1.0, b: float = 1.0,
                derivative_mode: str = "exact", validate: bool = True,
                name: str = "product_cpm") -> ModelSpec:
    """``(CP^m1, a g_FS) x (CP^m2, b g_FS)``; Einstein iff ``(m1+1)/a == (m2+1)/b``."""
    _positive(a=a, b=b)
    if m1 < 1 or m2 < 1:
        raise ModelError("factor dimensions must be >= 1")
    m = m1 + m2
    z, zb = coordinate_symbols(m)
    phi = (sp.nsimplify(a) * sp.log(1 + _sq(z, zb, range(m1)))
           + sp.nsimplify(b) * sp.log(1 + _sq(z, zb, range(m1, m))))
    einstein = math.isclose((m1 + 1) / a, (m2 + 1) / b, rel_tol=1e-12)
    flags = dict(einstein=einstein, constant_scalar=True, space_form=False, parallel_E=True,
                 parallel_B=True, compact=True, scalar_sign="+")
    params = {"m1": m1, "m2": m2, "a": a, "b": b}
    if name == "product_cp1":
        params = {"a": a, "b": b}
    return _finish(name, m, params, phi, z, zb, Domain.cube(m, WHOLE), flags, (m1, m2), 1.5,
                   _cpm_volume(m1, a) * _cpm_volume(m2, b), derivative_mode, validate,
                   fold=projective_fold((m1, m2)))


def product_cp1(a: float = 1.0, b: float = 1.0, derivative_mode: str = "exact",
                validate: bool = True) -> ModelSpec:
    return product_cpm(1, 1, a, b, derivative_mode, validate, name="product_cp1")


def perturbed_fs(m: int = 2, eps: float = 0.1, derivative_mode: str = "exact",
                 validate: bool = True) -> ModelSpec:
    """Fubini–Study potential plus ``eps |z_1|^2 exp(-|z|^2)``.

    Generically neither Einstein nor of constant scalar curvature; it
    exercises the code paths those hypotheses would otherwise hide.
    """
    if not abs(eps) < 0.5:
        raise ModelError("perturbation eps must satisfy |eps| < 0.5")
    z, zb = coordinate_symbols(m)
    r2 = _sq(z, zb, range(m))
    phi = sp.log(1 + r2) + sp.nsimplify(eps) * z[0] * zb[0] * sp.exp(-r2)
    if eps == 0:
        flags = dict(einstein=True, constant_scalar=True, space_form=True, parallel_E=True,
                     parallel_B=True, compact=True, scalar_sign="+")
    else:
        flags = dict(einstein=False, constant_scalar=False, space_form=False, parallel_E=False,
                     parallel_B=False, compact=True, scalar_sign="+")
    # beyond PERTURBED_FAR_RADIUS the perturbation and its derivatives are
    # below double-precision resolution of the Fubini–Study terms
    reference = fubini_study(m, 1.0, derivative_mode, validate=False).chart
    return _finish("perturbed_fs", m, {"m": m, "eps": eps}, phi, z, zb, Domain.cube(m, WHOLE),
                   flags, (m,), 1.5, _cpm_volume(m, 1.0) if eps == 0 else None,
                   derivative_mode, validate, fold=projective_fold((m,)),
                   far=(reference, PERTURBED_FAR_RADIUS))


BUILDERS = {
    "flat": flat,
    "fubini_study": fubini_study,
    "complex_hyperbolic": complex_hyperbolic,
    "product_cp1": product_cp1,
    "product_cpm": product_cpm,
    "perturbed_fs": perturbed_fs,
}


def make_model(name: str, **params) -> ModelSpec:
    """Build a zoo model by name; keyword parameters go to its builder."""
    try:
        builder = BUILDERS[name]
    except KeyError:
        raise ModelError(f"unknown model {name!r}; choose from {sorted(BUILDERS)}") from None
    try:
        return builder(**params)
    except TypeError as exc:
        raise ModelError(f"bad parameters for {name}: {exc}") from None
