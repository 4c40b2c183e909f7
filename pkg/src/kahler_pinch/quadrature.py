"""Tensor Gauss–Legendre quadrature over model charts.

Coordinates are grouped into blocks (the factors of a product model).
Within a block of ``k`` complex coordinates we write
``z_j = rho * w_j * exp(i theta_j)`` with ``w`` on the positive orthant of
the unit sphere in R^k, so the Lebesgue element becomes
``rho^(2k-1) prod(w_j) d rho d sigma(w) prod d theta_j``.

Compact models are integrated over the whole chart via ``rho = tan(s)``,
``s`` in ``[0, pi/2)``; the chart misses only a measure-zero set, so there
is no truncation error.  Noncompact models are cut off at a radius.
When the integrand is invariant under the coordinate torus action the phase
integrals collapse to a factor ``(2 pi)^k``; that invariance is checked on
sampled rotations before it is relied on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss

from .chart import ChartError, MetricChart

MIN_NODES = 8
CHUNK = 4096
TORUS_CHECK_NODES = 16
TORUS_RTOL = 1e-8
MAX_EXPANDED_POINTS = 4_000_000


class QuadratureError(ValueError):
    pass


def _gl(n: int, lo: float, hi: float):
    x, w = leggauss(n)
    half = 0.5 * (hi - lo)
    return lo + half * (x + 1.0), half * w


def _sphere_orthant(k: int, n: int):
    """Nodes ``w`` on the positive orthant of S^(k-1) with weights for d sigma."""
    if k == 1:
        return np.ones((1, 1)), np.ones(1)
    psi, wpsi = _gl(n, 0.0, 0.5 * math.pi)
    grids = np.meshgrid(*([psi] * (k - 1)), indexing="ij")
    wgrids = np.meshgrid(*([wpsi] * (k - 1)), indexing="ij")
    angles = np.stack([g.ravel() for g in grids], axis=1)
    weight = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    npts = angles.shape[0]
    omega = np.empty((npts, k))
    sin_prod = np.ones(npts)
    for i in range(k - 1):
        omega[:, i] = sin_prod * np.cos(angles[:, i])
        weight = weight * np.sin(angles[:, i]) ** (k - 2 - i)
        sin_prod = sin_prod * np.sin(angles[:, i])
    omega[:, k - 1] = sin_prod
    return omega, weight


def _block_nodes(k: int, n: int, compact: bool, radius: float, phases: bool):
    if compact:
        s, ws = _gl(n, 0.0, 0.5 * math.pi)
        rho = np.tan(s)
        wr = ws / np.cos(s) ** 2
    else:
        rho, wr = _gl(n, 0.0, radius)
    wr = wr * rho ** (2 * k - 1)
    omega, wsig = _sphere_orthant(k, n)
    wsig = wsig * np.prod(omega, axis=1)
    mod = (rho[:, None, None] * omega[None, :, :]).reshape(-1, k)
    w = (wr[:, None] * wsig[None, :]).ravel()
    if not phases:
        return mod.astype(complex), w * (2.0 * math.pi) ** k
    th, wth = _gl(n, 0.0, 2.0 * math.pi)
    grids = np.meshgrid(*([th] * k), indexing="ij")
    wgrids = np.meshgrid(*([wth] * k), indexing="ij")
    theta = np.stack([g.ravel() for g in grids], axis=1)
    wtheta = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    pts = (mod[:, None, :] * np.exp(1j * theta)[None, :, :]).reshape(-1, k)
    return pts, (w[:, None] * wtheta[None, :]).ravel()


@dataclass(frozen=True)
class QuadratureGrid:
    """Nodes and weights for integrals against ``prod dx dy`` on a chart.

    ``truncation_error`` is 0 for compactified charts and ``None`` (not
    estimated) for grids cut off at ``trunc_radius``.
    """

    points: np.ndarray
    weights: np.ndarray
    blocks: tuple
    nodes: int
    compact: bool
    trunc_radius: Optional[float]
    phases_collapsed: bool
    rule: str = "gauss-legendre"
    truncation_error: Optional[float] = 0.0

    def __len__(self) -> int:
        return self.points.shape[0]

    def refined(self, factor: int = 2) -> "QuadratureGrid":
        return build_grid(self.blocks, self.nodes * factor, self.compact, self.trunc_radius,
                          self.phases_collapsed)

    def with_phases(self) -> "QuadratureGrid":
        count = len(self) * self.nodes ** sum(self.blocks)
        if count > MAX_EXPANDED_POINTS:
            raise QuadratureError(f"integrand is not torus invariant and expanding the phases "
                                  f"would need {count} nodes (cap {MAX_EXPANDED_POINTS})")
        return build_grid(self.blocks, self.nodes, self.compact, self.trunc_radius, False)

    def describe(self) -> dict:
        return {"rule": self.rule, "nodes_per_coordinate": self.nodes,
                "blocks": list(self.blocks), "compactified": self.compact,
                "trunc_radius": self.trunc_radius, "phases_collapsed": self.phases_collapsed,
                "points": len(self), "truncation_error": self.truncation_error}


def build_grid(blocks: Sequence[int], nodes: int = 16, compact: bool = True,
               trunc_radius: Optional[float] = None, collapse_phases: bool = True) -> QuadratureGrid:
    """Tensor-product grid over the given coordinate blocks.

    Parameters
    ----------
    blocks : sequence of int
        Sizes of the coordinate groups, summing to m.
    nodes : int
        Gauss–Legendre nodes per real coordinate (at least 8).
    compact : bool
        Integrate the whole chart through ``rho = tan(s)``; otherwise cut
        off at ``trunc_radius`` in every block.
    """
    if nodes < MIN_NODES:
        raise QuadratureError(f"need at least {MIN_NODES} nodes per coordinate, got {nodes}")
    if not compact and (trunc_radius is None or trunc_radius <= 0):
        raise QuadratureError("noncompact grids need a positive truncation radius")
    pts = np.ones((1, 0), dtype=complex)
    wts = np.ones(1)
    for k in blocks:
        bp, bw = _block_nodes(int(k), nodes, compact, trunc_radius or 0.0, not collapse_phases)
        pts = np.concatenate([np.repeat(pts, len(bw), axis=0), np.tile(bp, (len(wts), 1))], axis=1)
        wts = np.outer(wts, bw).ravel()
    return QuadratureGrid(pts, wts, tuple(int(k) for k in blocks), nodes, compact,
                          None if compact else float(trunc_radius), collapse_phases,
                          truncation_error=0.0 if compact else None)


def _chunked(fn: Callable, pts: np.ndarray) -> np.ndarray:
    return np.concatenate([np.asarray(fn(pts[i:i + CHUNK])) for i in range(0, len(pts), CHUNK)])


def measure_density(chart: MetricChart, pts: np.ndarray) -> np.ndarray:
    """``2^m det g``, the volume density against ``prod dx dy``."""
    g = chart.metric(pts)
    return (2.0 ** chart.m) * np.real(np.linalg.det(g))


def _torus_rotate(grid: QuadratureGrid, seed: int = 0) -> tuple:
    rng = np.random.default_rng([seed, len(grid)])
    idx = rng.choice(len(grid), size=min(TORUS_CHECK_NODES, len(grid)), replace=False)
    idx.sort()
    phases = np.exp(2j * math.pi * rng.random((idx.size, grid.points.shape[1])))
    return idx, grid.points[idx] * phases


def torus_invariant(fn: Callable, grid: QuadratureGrid, relative: bool = False) -> bool:
    """Whether ``fn`` is unchanged by random coordinate phase rotations of sample nodes.

    With ``relative`` the comparison is relative per node (for strictly
    positive densities); otherwise the tolerance is scaled by the largest
    value, which keeps round-off in fields that vanish from tripping it.
    """
    idx, rotated = _torus_rotate(grid)
    base = np.asarray(fn(grid.points[idx]), dtype=float)
    rot = np.asarray(fn(rotated), dtype=float)
    if relative:
        tol = TORUS_RTOL * np.abs(base)
    else:
        tol = TORUS_RTOL * (1.0 + np.max(np.abs(base), initial=0.0))
    return bool(np.all(np.abs(rot - base) <= tol))


def density_torus_invariant(chart: MetricChart, grid: QuadratureGrid) -> bool:
    """Torus check for the volume density, allowing for its conditioning.

    ``det g`` computed from an ill-conditioned metric (far out on a
    compactified chart) carries relative round-off of order
    ``eps * cond(g)``, so the per-node tolerance is the larger of that and
    ``TORUS_RTOL``.
    """
    idx, rotated = _torus_rotate(grid)
    pts = grid.points[idx]
    base = measure_density(chart, pts)
    rot = measure_density(chart, rotated)
    cond = np.linalg.cond(chart.metric(pts))
    rtol = np.maximum(TORUS_RTOL, 100.0 * np.finfo(float).eps * cond)
    return bool(np.all(np.abs(rot - base) <= rtol * np.abs(base)))


def _check_domain(chart: MetricChart, grid: QuadratureGrid):
    inside = chart.domain.contains(grid.points)
    if not np.all(inside):
        bad = grid.points[np.argmin(inside)]
        raise ChartError(f"grid node outside chart domain: {np.round(bad, 6).tolist()}")


def integrate(chart: MetricChart, grid: QuadratureGrid, fn: Callable) -> float:
    """``int fn dV`` for a batch integrand ``fn(points) -> values``."""
    _check_domain(chart, grid)

    def dens(p):
        return measure_density(chart, p) * np.asarray(fn(p), dtype=float)

    if grid.phases_collapsed and not (density_torus_invariant(chart, grid)
                                      and torus_invariant(fn, grid)):
        grid = grid.with_phases()
        _check_domain(chart, grid)
    vals = _chunked(dens, grid.points)
    # math.fsum keeps the reduction order-independent and reproducible
    return math.fsum(grid.weights * vals)


def volume(chart: MetricChart, grid: QuadratureGrid) -> float:
    return integrate(chart, grid, lambda p: np.ones(len(p)))


def lp_norm(chart: MetricChart, grid: QuadratureGrid, field: Callable, p: float) -> float:
    """``(int field^p dV)^(1/p)`` for a nonnegative batch field."""
    if p < 1:
        raise QuadratureError("L^p norms need p >= 1")

    def fp(pts):
        vals = np.asarray(field(pts), dtype=float)
        if np.any(vals < 0):
            raise QuadratureError("L^p field must be nonnegative")
        return vals ** p

    total = integrate(chart, grid, fp)
    return max(total, 0.0) ** (1.0 / p)
