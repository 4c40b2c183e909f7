"""Kähler metrics on coordinate charts and their pointwise curvature.

A :class:`MetricChart` evaluates ``g_{a bbar}(z)`` on batches of points and
supplies its first and mixed second derivatives, either from symbolic
differentiation (``"exact"``) or from finite differences (``"fd"``).
Curvature follows the convention

    R_{a bbar c dbar} = d_c d_dbar g_{a bbar}
                        - g^{l mbar} (d_c g_{a mbar}) (d_dbar g_{l bbar}),
    R_{a bbar} = -d_a d_bbar log det g,

so that contracting the first pair of the curvature tensor gives minus the
Ricci form.  Array layout: ``dg[c, a, b] = d_c g_{a bbar}`` and
``ddg[c, d, a, b] = d_c d_dbar g_{a bbar}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import sympy as sp

from . import derivatives as fd
from .curvature_analysis import bochner_components, matrix_norm_sq, tensor_norm_sq
from .expressions import ExpressionError, coordinate_symbols, parse_expression
from .reports import TOL_ALGEBRAIC, TOL_FD, GapReport
from .tensor_core import (
    ANTI,
    HOLO,
    KAHLER_PATTERN,
    ComplexTensor,
    HermitianMatrix,
    IndexSignature,
    TensorError,
    apply_frame,
    inverse_cholesky,
    inverse_metric,
)


class ChartError(ValueError):
    pass


# ---------------------------------------------------------------------------
# domains


@dataclass(frozen=True)
class Domain:
    """Box in C^m, optionally intersected with the ball ``|z| < radius``.

    ``re`` and ``im`` hold one ``(lo, hi)`` interval per complex coordinate.
    """

    re: tuple
    im: tuple
    radius: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "re", tuple(tuple(map(float, r)) for r in self.re))
        object.__setattr__(self, "im", tuple(tuple(map(float, r)) for r in self.im))
        if len(self.re) != len(self.im) or not self.re:
            raise ChartError("domain needs one re and one im interval per coordinate")
        for lo, hi in self.re + self.im:
            if not lo < hi:
                raise ChartError(f"empty interval ({lo}, {hi})")

    @classmethod
    def cube(cls, m: int, half: float, radius: Optional[float] = None) -> "Domain":
        return cls(((-half, half),) * m, ((-half, half),) * m, radius)

    @property
    def m(self) -> int:
        return len(self.re)

    def bounds(self) -> tuple:
        lo = np.array([r[0] for r in self.re] + [r[0] for r in self.im])
        hi = np.array([r[1] for r in self.re] + [r[1] for r in self.im])
        return lo, hi

    def contains(self, z, margin: float = 0.0) -> np.ndarray:
        """Boolean mask of points lying inside with at least ``margin`` to spare."""
        z = np.atleast_2d(np.asarray(z, dtype=complex))
        lo, hi = self.bounds()
        x = np.concatenate([z.real, z.imag], axis=1)
        ok = np.all((x - lo >= margin) & (hi - x >= margin), axis=1)
        if self.radius is not None:
            ok &= np.linalg.norm(z, axis=1) <= self.radius - margin
        return ok

    def to_dict(self) -> dict:
        out = {"re": [list(r) for r in self.re], "im": [list(r) for r in self.im]}
        if self.radius is not None:
            out["radius"] = self.radius
        return out


# ---------------------------------------------------------------------------
# symbolic compilation


def _compile(exprs: list, z, zb):
    """Vectorised evaluator for a flat list of sympy expressions."""
    fn = sp.lambdify(list(z) + list(zb), exprs, modules="numpy", cse=True)
    count = len(exprs)

    def evaluate(pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=complex))
        n = pts.shape[0]
        with np.errstate(all="ignore"):
            vals = fn(*pts.T, *np.conj(pts).T)
        out = np.empty((count, n), dtype=complex)
        for k, v in enumerate(vals):
            out[k] = np.broadcast_to(v, (n,))
        return out.T

    return evaluate


@dataclass(frozen=True)
class SymbolicMetric:
    """Closed-form metric components with derivatives, compiled for numpy."""

    m: int
    metric: Callable
    jet: Callable
    source: str = ""

    @classmethod
    def from_components(cls, comps, m: int, z=None, zb=None, source: str = "") -> "SymbolicMetric":
        if z is None:
            z, zb = coordinate_symbols(m)
        g = [[sp.sympify(comps[a][b]) for b in range(m)] for a in range(m)]
        flat_g = [g[a][b] for a in range(m) for b in range(m)]
        dg = [sp.diff(g[a][b], z[c]) for c in range(m) for a in range(m) for b in range(m)]
        ddg = [sp.diff(g[a][b], z[c], zb[d])
               for c in range(m) for d in range(m) for a in range(m) for b in range(m)]
        metric_eval = _compile(flat_g, z, zb)
        jet_eval = _compile(flat_g + dg + ddg, z, zb)
        mm = m * m

        def metric(pts):
            return metric_eval(pts).reshape(-1, m, m)

        def jet(pts):
            flat = jet_eval(pts)
            n = flat.shape[0]
            return (flat[:, :mm].reshape(n, m, m),
                    flat[:, mm:mm + m * mm].reshape(n, m, m, m),
                    flat[:, mm + m * mm:].reshape(n, m, m, m, m))

        return cls(m, metric, jet, source)

    @classmethod
    def from_potential(cls, phi, m: int, z=None, zb=None, source: str = "") -> "SymbolicMetric":
        if z is None:
            z, zb = coordinate_symbols(m)
        comps = [[sp.diff(phi, z[a], zb[b]) for b in range(m)] for a in range(m)]
        return cls.from_components(comps, m, z, zb, source)


# ---------------------------------------------------------------------------
# charts


@dataclass(frozen=True)
class MetricChart:
    """A Kähler metric on a coordinate domain.

    Parameters
    ----------
    m : int
        Complex dimension.
    domain : Domain
        Where the chart may be evaluated.
    metric_fn : callable
        Batch of points ``(N, m)`` to metric matrices ``(N, m, m)``.
    derivative_mode : {"exact", "fd"}
    jet_fn : callable, optional
        Required in exact mode: points to ``(g, dg, ddg)``.
    fd : FDConfig
        Steps used in FD mode and for covariant derivatives of fields.
    """

    m: int
    domain: Domain
    metric_fn: Callable
    derivative_mode: str = "exact"
    jet_fn: Optional[Callable] = None
    fd: fd.FDConfig = field(default_factory=fd.FDConfig)
    name: str = "chart"

    def __post_init__(self):
        if self.m < 1:
            raise ChartError("complex dimension must be >= 1")
        if self.domain.m != self.m:
            raise ChartError(f"domain has {self.domain.m} coordinates, chart has m={self.m}")
        if self.derivative_mode not in ("exact", "fd"):
            raise ChartError(f"unknown derivative mode {self.derivative_mode!r}")
        if self.derivative_mode == "exact" and self.jet_fn is None:
            raise ChartError("exact mode needs derivative callbacks")

    @property
    def tol(self) -> float:
        return TOL_ALGEBRAIC if self.derivative_mode == "exact" else TOL_FD

    def with_mode(self, mode: str) -> "MetricChart":
        return MetricChart(self.m, self.domain, self.metric_fn, mode, self.jet_fn, self.fd, self.name)

    def stencil_margin(self) -> float:
        return 0.0 if self.derivative_mode == "exact" else self.fd.stencil_radius()

    def _points(self, pts, margin: float) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=complex))
        if pts.shape[1] != self.m:
            raise ChartError(f"points must have {self.m} complex coordinates")
        inside = self.domain.contains(pts, margin)
        if not np.all(inside):
            bad = pts[np.argmin(inside)]
            raise ChartError(f"stencil exits domain at point {np.round(bad, 6).tolist()}")
        return pts

    def metric(self, pts) -> np.ndarray:
        """Metric matrices at points, Cholesky-checked for positivity."""
        pts = self._points(pts, 0.0)
        g = self.metric_fn(pts)
        _check_positive(g, pts)
        return g


def _check_positive(g: np.ndarray, pts: np.ndarray):
    herm = np.max(np.abs(g - np.conj(np.swapaxes(g, -1, -2))), axis=(-2, -1))
    scale = np.maximum(1.0, np.max(np.abs(g), axis=(-2, -1)))
    finite = np.all(np.isfinite(g), axis=(-2, -1))
    bad = ~finite | (herm > 1e-8 * scale)
    if not np.any(bad):
        eig_min = np.linalg.eigvalsh(0.5 * (g + np.conj(np.swapaxes(g, -1, -2))))[..., 0]
        bad = eig_min <= 0
    if np.any(bad):
        p = pts[np.argmax(bad)]
        raise ChartError(f"metric not positive definite at point {np.round(p, 6).tolist()}")


def metric_jet(chart: MetricChart, pts):
    """``(g, dg, ddg)`` at a batch of points."""
    pts = chart._points(pts, chart.stencil_margin())
    if chart.derivative_mode == "exact":
        g, dg, ddg = chart.jet_fn(pts)
        _check_positive(g, pts)
        return g, dg, ddg
    cfg = chart.fd
    g = chart.metric_fn(pts)
    _check_positive(g, pts)
    stencil = fd.stencil_points(pts, cfg.h_second, cfg.levels, second=True)
    _check_positive(chart.metric_fn(stencil), stencil)
    dg, _ = fd.wirtinger_gradient(chart.metric_fn, pts, cfg.h_first, cfg.levels)
    ddg = fd.wirtinger_mixed(chart.metric_fn, pts, cfg.h_second, cfg.levels)
    return g, dg, ddg


# ---------------------------------------------------------------------------
# curvature


def coordinate_curvature(g, dg, ddg) -> dict:
    """Coordinate curvature data from a metric jet (batched).

    Ricci is computed from the expansion of ``-d d-bar log det g`` rather
    than by tracing the curvature tensor, so the trace identity is a real
    cross-check between two formulas.
    """
    ginv = inverse_metric(g)
    gi = np.linalg.inv(g)
    dbar = np.conj(np.swapaxes(dg, -1, -2))          # dbar[d, a, b] = d_dbar g_{a bbar}
    rm = np.einsum("...cdab->...abcd", ddg) - np.einsum(
        "...lm,...cam,...dbl->...abcd", ginv, dg, np.conj(dg))
    term1 = np.einsum("...ij,...cdji->...cd", gi, ddg)
    gi_dbar = np.einsum("...ij,...djk->...dik", gi, dbar)
    gi_d = np.einsum("...ij,...cjk->...cik", gi, dg)
    term2 = np.einsum("...dik,...cki->...cd", gi_dbar, gi_d)
    ric = -(term1 - term2)
    scalar = np.real(np.einsum("...ab,...ab->...", ginv, ric))
    chris = np.einsum("...lm,...abm->...lab", ginv, dg)
    return {"ginv": ginv, "riemann": rm, "ricci": ric, "scalar": scalar, "christoffel": chris}


@dataclass(frozen=True)
class CurvaturePackage:
    """Pointwise curvature data.

    ``g``, ``g_inv`` and ``christoffel`` are coordinate components;
    ``riemann``, ``ricci``, ``E`` and ``B`` are components in the unitary
    frame ``frame`` (``frame @ g @ frame^* = I``), where the metric is the
    identity and traces are plain sums.  ``riemann_coord`` and
    ``ricci_coord`` keep the coordinate versions for cross-checks.
    """

    point: np.ndarray
    g: HermitianMatrix
    g_inv: np.ndarray
    frame: np.ndarray
    christoffel: np.ndarray
    riemann: ComplexTensor
    ricci: HermitianMatrix
    scalar: float
    E: HermitianMatrix
    B: ComplexTensor
    riemann_coord: np.ndarray
    ricci_coord: np.ndarray
    mode: str = "exact"

    @property
    def m(self) -> int:
        return self.g.dim

    @property
    def tol(self) -> float:
        return TOL_ALGEBRAIC if self.mode == "exact" else TOL_FD

    @property
    def E_norm(self) -> float:
        return float(np.sqrt(matrix_norm_sq(self.E.entries)))

    @property
    def B_norm(self) -> float:
        return float(np.sqrt(tensor_norm_sq(self.B.components)))


@dataclass(frozen=True)
class CurvatureBatch:
    """Curvature data for many points, as stacked arrays with a leading axis."""

    points: np.ndarray
    g: np.ndarray
    g_inv: np.ndarray
    frame: np.ndarray
    christoffel: np.ndarray
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: np.ndarray
    E: np.ndarray
    B: np.ndarray
    riemann_coord: np.ndarray
    ricci_coord: np.ndarray
    mode: str = "exact"

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def E_norm(self) -> np.ndarray:
        return np.sqrt(matrix_norm_sq(self.E))

    @property
    def B_norm(self) -> np.ndarray:
        return np.sqrt(tensor_norm_sq(self.B))

    def package(self, i: int) -> CurvaturePackage:
        m = self.g.shape[-1]
        sig = IndexSignature(KAHLER_PATTERN, m)
        return CurvaturePackage(
            point=self.points[i],
            g=HermitianMatrix(self.g[i], tol=1e-8 * max(1.0, float(np.max(np.abs(self.g[i]))))),
            g_inv=self.g_inv[i],
            frame=self.frame[i],
            christoffel=self.christoffel[i],
            riemann=ComplexTensor(sig, self.riemann[i]),
            ricci=_hermitian(self.ricci[i]),
            scalar=float(self.scalar[i]),
            E=_hermitian(self.E[i]),
            B=ComplexTensor(sig, self.B[i]),
            riemann_coord=self.riemann_coord[i],
            ricci_coord=self.ricci_coord[i],
            mode=self.mode,
        )


def _hermitian(mat: np.ndarray) -> HermitianMatrix:
    # frame components inherit round-off asymmetry; symmetrise after a loose check
    return HermitianMatrix(0.5 * (mat + np.conj(mat.T)))


def curvature_batch(chart: MetricChart, pts) -> CurvatureBatch:
    """Curvature at every point of a batch, in one vectorised pass."""
    pts = np.atleast_2d(np.asarray(pts, dtype=complex))
    g, dg, ddg = metric_jet(chart, pts)
    data = coordinate_curvature(g, dg, ddg)
    frame = inverse_cholesky(g)
    rm_f = apply_frame(frame, data["riemann"], KAHLER_PATTERN, batch=True)
    ric_f = frame @ data["ricci"] @ np.conj(np.swapaxes(frame, -1, -2))
    m = chart.m
    scalar = data["scalar"]
    e_f = ric_f - (scalar[:, None, None] / m) * np.eye(m)
    b_f = bochner_components(rm_f, ric_f, scalar, route="E")
    return CurvatureBatch(pts, g, data["ginv"], frame, data["christoffel"], rm_f, ric_f, scalar,
                          e_f, b_f, data["riemann"], data["ricci"], chart.derivative_mode)


def curvature_at(chart: MetricChart, p) -> CurvaturePackage:
    """Full curvature package at a single chart point."""
    p = np.asarray(p, dtype=complex).reshape(chart.m)
    return curvature_batch(chart, p[None]).package(0)


def traceless_ricci(pkg) -> HermitianMatrix:
    """``E = Ric - (R/m) g`` in the unitary frame.

    Accepts a :class:`CurvaturePackage` or a bare frame Ricci matrix, whose
    scalar curvature is then its trace.

    >>> traceless_ricci(np.diag([2.0, 0.0])).entries.real
    array([[ 1.,  0.],
           [ 0., -1.]])
    """
    if isinstance(pkg, CurvaturePackage):
        ric, r = pkg.ricci.entries, pkg.scalar
    else:
        ric = np.asarray(pkg.entries if isinstance(pkg, HermitianMatrix) else pkg, dtype=complex)
        r = float(np.real(np.trace(ric)))
    m = ric.shape[0]
    return _hermitian(ric - (r / m) * np.eye(m))


def package_invariants(pkg: CurvaturePackage, tol: Optional[float] = None) -> list:
    """Trace-freeness of E and B and the Ricci trace identity, as gap reports.

    Residuals are scaled by ``1 + max |Rm|`` so the tolerance is relative.
    """
    tol = pkg.tol if tol is None else tol
    rung = "algebraic" if pkg.mode == "exact" else "fd"
    scale = 1.0 + float(np.max(np.abs(pkg.riemann.components)))
    tr_e = abs(np.trace(pkg.E.entries)) / scale
    tr_b = float(np.max(np.abs(np.einsum("aacd->cd", pkg.B.components)))) / scale
    ident = float(np.max(np.abs(np.einsum("aacd->cd", pkg.riemann.components)
                                + pkg.ricci.entries))) / scale
    return [GapReport(name, -v, v, 0.0, tol, rung=rung)
            for name, v in (("trace_E", tr_e), ("trace_B", tr_b), ("trace_identity", ident))]


# ---------------------------------------------------------------------------
# fields and their derivatives


def ricci_field(chart: MetricChart) -> Callable:
    """Coordinate Ricci form as a batch field."""
    def fieldfn(pts):
        g, dg, ddg = metric_jet(chart, pts)
        return coordinate_curvature(g, dg, ddg)["ricci"]
    return fieldfn


def traceless_ricci_field(chart: MetricChart) -> Callable:
    """Coordinate components ``E_{a bbar}`` as a batch field."""
    def fieldfn(pts):
        g, dg, ddg = metric_jet(chart, pts)
        d = coordinate_curvature(g, dg, ddg)
        return d["ricci"] - (d["scalar"][:, None, None] / chart.m) * g
    return fieldfn


def bochner_field(chart: MetricChart) -> Callable:
    """Coordinate components of the Bochner tensor as a batch field."""
    def fieldfn(pts):
        g, dg, ddg = metric_jet(chart, pts)
        d = coordinate_curvature(g, dg, ddg)
        return bochner_components(d["riemann"], d["ricci"], d["scalar"], g=g, route="E")
    return fieldfn


def metric_field(chart: MetricChart) -> Callable:
    return lambda pts: chart.metric(pts)


def covariant_derivative(chart: MetricChart, p, fieldfn: Callable, slots: Sequence[str] = None,
                         barred: bool = False, step: Optional[fd.FDConfig] = None) -> ComplexTensor:
    """Covariant derivative of a covariant tensor field at ``p``.

    Parameters
    ----------
    fieldfn : callable
        Batch of points ``(N, m)`` to coordinate components ``(N, m, ..., m)``.
    slots : sequence of {"h", "a"}, optional
        Slot kinds of the field; alternating h/a by default.
    barred : bool
        Differentiate along ``dbar_l`` instead of ``d_l``.
    step : FDConfig, optional
        Step for differentiating ``fieldfn``; defaults to the chart's.

    Returns
    -------
    ComplexTensor
        Coordinate components ``T_{..., l}`` with the new slot last, of kind
        ``"h"`` (or ``"a"`` when ``barred``).  On a Kähler manifold only the
        unbarred Christoffel symbols are nonzero, so ``nabla_l`` corrects the
        holomorphic slots and ``nabla_lbar`` corrects the antiholomorphic
        ones with the conjugate symbols.
    """
    p = np.asarray(p, dtype=complex).reshape(chart.m)
    cfg = step or chart.fd
    radius = cfg.stencil_radius() + chart.stencil_margin()
    chart._points(p[None], radius)
    t0 = np.asarray(fieldfn(p[None]))[0]
    if slots is None:
        slots = tuple(HOLO if i % 2 == 0 else ANTI for i in range(t0.ndim))
    slots = tuple(slots)
    if len(slots) != t0.ndim:
        raise TensorError("slot signature does not match field rank")
    d_z, d_zbar = fd.wirtinger_gradient(fieldfn, p, cfg.h_first, cfg.levels)
    deriv = d_zbar if barred else d_z                     # deriv[l, ...]
    deriv = np.moveaxis(deriv, 0, -1)                     # [..., l]
    g, dg, _ = metric_jet(chart, p[None]) if chart.derivative_mode == "exact" else (
        chart.metric(p[None]), fd.wirtinger_gradient(chart.metric_fn, p[None], chart.fd.h_first,
                                                     chart.fd.levels)[0], None)
    chris = coordinate_curvature_christoffel(g[0], dg[0])  # chris[s, l, a]
    out = deriv.astype(complex)
    corr_kind = ANTI if barred else HOLO
    gam = np.conj(chris) if barred else chris
    for k, kind in enumerate(slots):
        if kind != corr_kind:
            continue
        # sum_s Gamma^s_{l a_k} T_{.. s ..}
        moved = np.moveaxis(t0, k, -1)                    # [..., s]
        corr = np.einsum("...s,sla->...la", moved, gam)  # [..., l, a_k]
        corr = np.moveaxis(corr, -1, k)                   # a_k back at k, l last
        out = out - corr
    new_kind = ANTI if barred else HOLO
    return ComplexTensor(IndexSignature(slots + (new_kind,), chart.m), out)


def coordinate_curvature_christoffel(g, dg) -> np.ndarray:
    """``Gamma^l_{a b} = g^{l mbar} d_a g_{b mbar}`` as ``chris[l, a, b]``."""
    return np.einsum("...lm,...abm->...lab", inverse_metric(g), dg)


def frame_norm_sq(g, tensor: ComplexTensor) -> float:
    """Plain sum of squared frame components of a coordinate tensor."""
    frame = inverse_cholesky(np.asarray(g, dtype=complex))
    comps = apply_frame(frame, tensor.components, tensor.slots)
    return float(np.sum(np.abs(comps) ** 2))


# Curvature on an FD chart already carries round-off of order eps / h^2;
# differentiating it again needs a coarser outer step to keep that noise down.
CURVATURE_FIELD_FD = fd.FDConfig(h_first=3e-2, h_second=3e-2, levels=2)


def curvature_field_step(chart: MetricChart) -> Optional[fd.FDConfig]:
    """Outer step for derivatives of curvature fields (``None`` means the chart's own)."""
    return CURVATURE_FIELD_FD if chart.derivative_mode == "fd" else None


def scalar_field_gradient_norm(chart: MetricChart, p, f: Callable,
                               step: Optional[fd.FDConfig] = None) -> float:
    """Squared gradient norm ``|grad f|^2 = 2 g^{a bbar} d_a f d_bbar f`` of a real field.

    ``f`` maps a batch of points to real values; derivatives are central
    differences with ``step`` (the chart's first-derivative step by default).
    """
    p = np.asarray(p, dtype=complex).reshape(chart.m)
    cfg = step or chart.fd
    chart._points(p[None], cfg.stencil_radius() + chart.stencil_margin())
    dz, _ = fd.wirtinger_gradient(lambda q: np.real(np.asarray(f(q), dtype=complex)), p,
                                  cfg.h_first, cfg.levels)
    g = chart.metric(p[None])[0]
    v = np.asarray(dz, dtype=complex)
    val = 2.0 * np.real(np.conj(v) @ np.linalg.solve(g, v))
    return max(float(val), 0.0)


def metric_compatibility_residual(chart: MetricChart, p) -> float:
    """Largest coordinate component of ``nabla g`` and ``nabla-bar g`` at ``p``."""
    gfield = metric_field(chart)
    d = covariant_derivative(chart, p, gfield).components
    db = covariant_derivative(chart, p, gfield, barred=True).components
    return float(max(np.max(np.abs(d)), np.max(np.abs(db))))


def codazzi_residual(chart: MetricChart, p) -> float:
    """Largest ``|E_{c dbar, l} - E_{l dbar, c}|`` at ``p`` (coordinate components).

    Vanishes when the scalar curvature is constant; on other charts the
    value measures how far E is from being a Codazzi tensor.
    """
    de = covariant_derivative(chart, p, traceless_ricci_field(chart),
                              step=curvature_field_step(chart)).components
    return float(np.max(np.abs(de - np.swapaxes(de, 0, 2))))


# ---------------------------------------------------------------------------
# chart construction


def chart_from_symbolic(sym: SymbolicMetric, domain: Domain, derivative_mode: str = "exact",
                        fd_config: Optional[fd.FDConfig] = None, name: str = "chart") -> MetricChart:
    return MetricChart(sym.m, domain, sym.metric, derivative_mode, sym.jet,
                       fd_config or fd.FDConfig(), name)


# Steps for metrics that are themselves finite differences of a potential:
# the outer differences see the inner round-off, so they must be coarser.
POTENTIAL_METRIC_FD = fd.FDConfig(h_first=1e-2, h_second=1e-2, levels=2)
POTENTIAL_OUTER_FD = fd.FDConfig(h_first=2e-2, h_second=5e-2, levels=2)


def potential_fd_chart(phi: Callable, m: int, domain: Domain, name: str = "chart") -> MetricChart:
    """Chart whose metric is the finite-difference complex Hessian of ``phi``.

    Derivatives of that metric are again finite differences (nested), so
    accuracy is roughly 1e-7; use exact mode where possible.
    """
    inner = POTENTIAL_METRIC_FD

    def metric(pts):
        h = fd.wirtinger_mixed(phi, np.atleast_2d(pts), inner.h_second, inner.levels)
        return 0.5 * (h + np.conj(np.swapaxes(h, -1, -2)))

    return MetricChart(m, domain, metric, "fd", None, POTENTIAL_OUTER_FD, name)


def load_metric_json(source, name: Optional[str] = None) -> MetricChart:
    """Build a chart from the JSON metric-specification format.

    Accepted keys: ``m``, ``kind`` ("potential" or "components"),
    ``expression`` (a string, or an m x m list of strings for components),
    ``domain`` (``{"re": [[lo, hi], ...], "im": [...], "radius": r}`` or
    ``{"box": half_width}``) and ``derivative_mode`` ("exact" or "fd").
    """
    if isinstance(source, dict):
        spec = source
        label = name or "metric"
    else:
        with open(source, "r", encoding="utf-8") as fh:
            text = fh.read()
        try:
            spec = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ExpressionError(f"invalid JSON: {exc.msg}", exc.lineno, exc.colno) from None
        label = name or str(source)
    if not isinstance(spec, dict):
        raise ChartError("metric file must hold a JSON object")
    missing = [k for k in ("m", "kind", "expression", "domain") if k not in spec]
    if missing:
        raise ChartError(f"metric file missing keys: {missing}")
    m = spec["m"]
    if not isinstance(m, int) or m < 1:
        raise ChartError("'m' must be a positive integer")
    kind = spec["kind"]
    mode = spec.get("derivative_mode", "exact")
    if mode not in ("exact", "fd"):
        raise ChartError(f"unknown derivative_mode {mode!r}")
    dom = spec["domain"]
    if isinstance(dom, dict) and "box" in dom:
        domain = Domain.cube(m, float(dom["box"]), dom.get("radius"))
    elif isinstance(dom, dict):
        try:
            domain = Domain(tuple(dom["re"]), tuple(dom["im"]), dom.get("radius"))
        except (KeyError, TypeError) as exc:
            raise ChartError(f"malformed domain: {exc}") from None
    else:
        raise ChartError("domain must be an object")
    expr = spec["expression"]
    z, zb = coordinate_symbols(m)
    if kind == "potential":
        if not isinstance(expr, str):
            raise ChartError("potential expression must be a string")
        phi = parse_expression(expr, m)
        if mode == "exact":
            sym = SymbolicMetric.from_potential(phi, m, z, zb, source=expr)
            return chart_from_symbolic(sym, domain, "exact", name=label)
        phi_fn = _compile([phi], z, zb)
        return potential_fd_chart(lambda q: phi_fn(q)[:, 0], m, domain, name=label)
    if kind == "components":
        if not (isinstance(expr, list) and len(expr) == m
                and all(isinstance(r, list) and len(r) == m for r in expr)):
            raise ChartError(f"components expression must be a {m}x{m} list of strings")
        comps = []
        for a, row in enumerate(expr):
            parsed = []
            for b, entry in enumerate(row):
                try:
                    parsed.append(parse_expression(str(entry), m))
                except ExpressionError as exc:
                    raise ExpressionError(f"component [{a}][{b}]: {exc.message}", exc.line, exc.col) from None
            comps.append(parsed)
        sym = SymbolicMetric.from_components(comps, m, z, zb, source=json.dumps(expr))
        return chart_from_symbolic(sym, domain, mode, name=label)
    raise ChartError(f"unknown metric kind {kind!r}")
