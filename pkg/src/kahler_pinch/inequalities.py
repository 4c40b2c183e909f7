"""Gap functions for the curvature inequalities, seeded generators and fuzz drivers.

Every gap is "bound minus attained value", so an inequality holds exactly
when its gap is nonnegative.  All inequalities here are homogeneous, so
fuzz inputs are normalised to unit norm before evaluation.

Fuzzing is split into fixed-size chunks, each drawing from
``numpy.random.default_rng([seed, chunk_index])``; results are therefore
identical whatever the number of worker threads (``KAHLER_PINCH_WORKERS``).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

from .chart import (
    MetricChart,
    bochner_field,
    covariant_derivative,
    curvature_at,
    curvature_batch,
    curvature_field_step,
    frame_norm_sq,
    scalar_field_gradient_norm,
    traceless_ricci_field,
)
from .curvature_analysis import (
    HKPair,
    bochner_components,
    eeb_components,
    eeb_contraction,
    hk_components,
    matrix_norm_sq,
    tensor_norm_sq,
    v_components,
    v_norm_formulas,
    inner,
)
from .reports import TOL_ALGEBRAIC, TOL_FD, FuzzSummary, GapReport, skipped
from .tensor_core import HermitianMatrix, TensorError, hermitian_eigenvalues

CHUNK = 10_000
WORKERS_ENV = "KAHLER_PINCH_WORKERS"
FUZZ_TOL = TOL_ALGEBRAIC
KATO_MIN_E = 1e-8


class InequalityError(ValueError):
    pass


# ---------------------------------------------------------------------------
# constants


def okumura_constant(m: int) -> float:
    return (m - 2) / math.sqrt(m * (m - 1))


def eeb_constant(m: int) -> float:
    """``(1/4) sqrt((2m^2+4m+3) / (2(m+1)(m+2)))``."""
    return 0.25 * math.sqrt((2 * m * m + 4 * m + 3) / (2.0 * (m + 1) * (m + 2)))


def trace_cube_constant(m: int) -> float:
    return (m * m - 2) / (8.0 * math.sqrt(m * m * (m * m - 1)))


# ---------------------------------------------------------------------------
# batched gap kernels (leading axis = sample)


def okumura_gaps(lam: np.ndarray):
    lam = np.asarray(lam, dtype=float)
    m = lam.shape[-1]
    rhs = okumura_constant(m) * np.sum(lam ** 2, axis=-1) ** 1.5
    lhs = np.abs(np.sum(lam ** 3, axis=-1))
    return rhs - lhs, lhs, rhs


def kato_pointwise_gaps(lam: np.ndarray, mu: np.ndarray):
    """``mu[..., alpha, gamma]``; each column (fixed gamma) sums to zero."""
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=complex)
    m = lam.shape[-1]
    c2 = 2.0 * np.sum(lam ** 2, axis=-1)
    a2 = np.abs(mu) ** 2
    diag = np.diagonal(a2, axis1=-2, axis2=-1)
    col = np.sum(a2, axis=-2)
    weighted = np.sum(diag + 2.0 * (col - diag), axis=-1)
    rhs = m / (2.0 * (m + 1)) * c2 * weighted
    lhs = np.sum(np.einsum("...a,...ag->...g", np.abs(lam), np.abs(mu)) ** 2, axis=-1)
    return rhs - lhs, lhs, rhs


def kato_chain_gaps(mu: np.ndarray):
    """Min over gamma of ``|mu_g|^2 + 2 sum_{a != g} |mu_a|^2 - ((m+1)/m) sum |mu_a|^2``."""
    mu = np.asarray(mu, dtype=complex)
    m = mu.shape[-1]
    a2 = np.abs(mu) ** 2
    total = np.sum(a2, axis=-1, keepdims=True)
    lhs_all = a2 + 2.0 * (total - a2)
    rhs = (m + 1) / m * total[..., 0]
    lhs = np.min(lhs_all, axis=-1)
    return lhs - rhs, lhs, rhs


def eeb_bound_gaps(e: np.ndarray, b: np.ndarray):
    m = e.shape[-1]
    attained = np.abs(eeb_components(e, b))
    bound = eeb_constant(m) * np.sqrt(tensor_norm_sq(b)) * matrix_norm_sq(e)
    return bound - attained, attained, bound


def trace_cube_gaps(b: np.ndarray, which: str):
    m = b.shape[-1]
    h, k = hk_components(b)
    mat = h if which == "H" else k
    eig = np.linalg.eigvalsh(0.5 * (mat + np.conj(np.swapaxes(mat, -1, -2))))
    attained = np.abs(np.sum(eig ** 3, axis=-1))
    bound = trace_cube_constant(m) * tensor_norm_sq(b) ** 1.5
    return bound - attained, attained, bound


# ---------------------------------------------------------------------------
# single-input gap reports


def _trace_free_check(lam: np.ndarray, tol: float = 1e-12):
    scale = max(float(np.sum(np.abs(lam))), np.finfo(float).tiny)
    if abs(float(np.sum(lam))) > tol * scale:
        raise InequalityError("input not trace-free")


def okumura_gap(lam, tol: float = FUZZ_TOL) -> GapReport:
    """Okumura's bound ``|sum l^3| <= (m-2)/sqrt(m(m-1)) (sum l^2)^(3/2)`` for trace-free ``l``.

    >>> r = okumura_gap([1.0, 1.0, -2.0])
    >>> abs(r.gap) < 1e-12
    True
    """
    lam = np.asarray(lam, dtype=float).ravel()
    if lam.size < 2:
        raise InequalityError("need at least two values")
    _trace_free_check(lam)
    gap, lhs, rhs = okumura_gaps(lam)
    return GapReport("okumura", gap, lhs, rhs, tol, witness=lam)


def kato_pointwise_gap(lam, mu, tol: float = FUZZ_TOL) -> GapReport:
    """Reduced Kato inequality for a trace-free ``lam`` and column-zero-sum ``mu``.

    Parameters
    ----------
    lam : array_like, shape (m,)
        Eigenvalues of the Codazzi tensor at the point.
    mu : array_like, shape (m, m)
        ``mu[alpha, gamma]``; for each ``gamma`` the column sums to zero.
    """
    lam = np.asarray(lam, dtype=float).ravel()
    mu = np.asarray(mu, dtype=complex)
    m = lam.size
    if mu.shape != (m, m):
        raise InequalityError(f"mu must be {m}x{m}, got {mu.shape}")
    _trace_free_check(lam)
    colsum = np.abs(np.sum(mu, axis=0))
    if np.any(colsum > 1e-12 * max(1.0, float(np.sum(np.abs(mu))))):
        raise InequalityError("mu columns must sum to zero")
    gap, lhs, rhs = kato_pointwise_gaps(lam, mu)
    return GapReport("kato_pointwise", gap, lhs, rhs, tol, witness={"lambda": lam, "mu": mu})


def kato_chain_gap(mu, gamma: int = 0, tol: float = FUZZ_TOL) -> GapReport:
    """``|mu_g|^2 + 2 sum_{a != g}|mu_a|^2 >= ((m+1)/m) sum |mu_a|^2`` for zero-sum ``mu``."""
    mu = np.asarray(mu, dtype=complex).ravel()
    m = mu.size
    if abs(np.sum(mu)) > 1e-12 * max(1.0, float(np.sum(np.abs(mu)))):
        raise InequalityError("mu must sum to zero")
    a2 = np.abs(mu) ** 2
    lhs = a2[gamma] + 2.0 * (np.sum(a2) - a2[gamma])
    rhs = (m + 1) / m * np.sum(a2)
    return GapReport("kato_chain", lhs - rhs, lhs, rhs, tol, witness={"mu": mu, "gamma": gamma})


def eeb_bound_gap(E, B, m: int | None = None, tol: float = FUZZ_TOL) -> GapReport:
    e = np.asarray(E.entries if isinstance(E, HermitianMatrix) else E, dtype=complex)
    b = np.asarray(getattr(B, "components", B), dtype=complex)
    m = e.shape[0] if m is None else m
    value = eeb_contraction(e, b)
    bound = eeb_constant(m) * float(np.sqrt(tensor_norm_sq(b)) * matrix_norm_sq(e))
    return GapReport("eeb_bound", bound - abs(value), abs(value), bound, tol,
                     witness={"E": e, "B": b})


def trace_cube_gap(hk: HKPair, which: str, m: int | None = None,
                   tol: float = FUZZ_TOL) -> GapReport:
    """``|tr M^3| <= (m^2-2)/(8 sqrt(m^2(m^2-1))) |B|^3`` for ``M`` = H or K.

    ``|B|^2 = 4 tr(M^2)``; the cube trace comes from the eigenvalues.
    """
    if which not in ("H", "K"):
        raise InequalityError("which must be 'H' or 'K'")
    mat = hk.H if which == "H" else hk.K
    m = hk.m if m is None else m
    eig = hermitian_eigenvalues(mat, tol=1e-10)
    attained = abs(float(np.sum(eig ** 3)))
    bnorm = math.sqrt(max(4.0 * float(np.sum(eig ** 2)), 0.0))
    bound = trace_cube_constant(m) * bnorm ** 3
    return GapReport(f"trace_cube_{which}", bound - attained, attained, bound, tol)


# ---------------------------------------------------------------------------
# chart-based gaps


def _norm_field(chart: MetricChart, which: str) -> Callable:
    def f(pts):
        b = curvature_batch(chart, pts)
        return b.E_norm if which == "E" else b.B_norm
    return f


def _scalar_field(chart: MetricChart) -> Callable:
    return lambda pts: curvature_batch(chart, pts).scalar


def kato_field_gap(chart: MetricChart, p, tol: float = TOL_FD) -> GapReport:
    """``|grad |E||^2 <= (m/(m+1)) |grad E|^2`` at a chart point.

    Reported as skipped where the scalar curvature is not constant, since
    the inequality needs E to be a Codazzi tensor.
    """
    p = np.asarray(p, dtype=complex)
    m = chart.m
    pkg = curvature_at(chart, p)
    step = curvature_field_step(chart)
    grad_r = scalar_field_gradient_norm(chart, p, _scalar_field(chart), step=step)
    if math.sqrt(grad_r) > 1e-6 * (1.0 + abs(pkg.scalar)):
        return skipped("kato_field", "hypothesis not met (scalar curvature not constant) -- skipped")
    if pkg.E_norm <= KATO_MIN_E:
        raise InequalityError("Kato undefined where |C| = 0")
    de = covariant_derivative(chart, p, traceless_ricci_field(chart), step=step)
    grad_e = 4.0 * frame_norm_sq(pkg.g.entries, de)
    grad_abs = scalar_field_gradient_norm(chart, p, _norm_field(chart, "E"), step=step)
    rhs = m / (m + 1.0) * grad_e
    return GapReport("kato_field", rhs - grad_abs, grad_abs, rhs, tol, rung="fd",
                     witness={"point": p})


def bkn_gap(chart: MetricChart, p, tol: float = TOL_FD) -> GapReport:
    """``|grad B|^2 >= ((m+3)/(m+1)) |grad |B||^2`` on an Einstein chart."""
    p = np.asarray(p, dtype=complex)
    m = chart.m
    pkg = curvature_at(chart, p)
    if pkg.E_norm > 1e-8 * (1.0 + abs(pkg.scalar)):
        raise InequalityError("refined Kato inequality for B needs an Einstein chart")
    if pkg.B_norm <= 1e-8:
        return GapReport("bkn", 0.0, 0.0, 0.0, tol, rung="fd", status="vacuous",
                         message="|B| = 0 at the point", witness={"point": p})
    step = curvature_field_step(chart)
    db = covariant_derivative(chart, p, bochner_field(chart), slots=("h", "a", "h", "a"),
                              step=step)
    grad_b = 8.0 * frame_norm_sq(pkg.g.entries, db)
    grad_abs = scalar_field_gradient_norm(chart, p, _norm_field(chart, "B"), step=step)
    rhs = (m + 3) / (m + 1.0) * grad_abs
    return GapReport("bkn", grad_b - rhs, rhs, grad_b, tol, rung="fd", witness={"point": p})


# ---------------------------------------------------------------------------
# generators


def _complex_normal(rng, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def traceless_hermitian_batch(m: int, n: int, rng) -> np.ndarray:
    """``n`` trace-free Hermitian matrices with ``|E| = 1``."""
    a = _complex_normal(rng, (n, m, m))
    h = 0.5 * (a + np.conj(np.swapaxes(a, -1, -2)))
    h -= (np.trace(h, axis1=-2, axis2=-1).real / m)[:, None, None] * np.eye(m)
    h /= np.sqrt(matrix_norm_sq(h))[:, None, None]
    # normalising a nearly-scalar matrix magnifies the trace residue; project again
    h -= (np.trace(h, axis1=-2, axis2=-1).real / m)[:, None, None] * np.eye(m)
    return h


def kahler_symmetrize(t: np.ndarray) -> np.ndarray:
    """Average over the order-8 group generated by the curvature symmetries."""
    t = 0.5 * (t + np.swapaxes(t, -4, -2))
    t = 0.5 * (t + np.swapaxes(t, -3, -1))
    return 0.5 * (t + np.conj(np.swapaxes(np.swapaxes(t, -4, -3), -2, -1)))


def bochner_like_batch(m: int, n: int, rng) -> np.ndarray:
    """``n`` random unit-norm tensors with the Bochner symmetries and zero traces."""
    t = kahler_symmetrize(_complex_normal(rng, (n, m, m, m, m)))
    ric = -np.einsum("...aacd->...cd", t)
    scalar = np.real(np.trace(ric, axis1=-2, axis2=-1))
    b = bochner_components(t, ric, scalar, route="E")
    return b / np.sqrt(tensor_norm_sq(b))[:, None, None, None, None]


def random_traceless_hermitian(m: int, seed: int) -> HermitianMatrix:
    if m < 2:
        raise InequalityError("m must be >= 2")
    e = traceless_hermitian_batch(m, 1, np.random.default_rng(seed))[0]
    return HermitianMatrix(e)


def random_bochner_like(m: int, seed: int):
    from .tensor_core import KAHLER_PATTERN, ComplexTensor, IndexSignature

    if m < 2:
        raise InequalityError("m must be >= 2")
    b = bochner_like_batch(m, 1, np.random.default_rng(seed))[0]
    return ComplexTensor(IndexSignature(KAHLER_PATTERN, m), b)


def _zero_sum_columns(rng, n, m) -> np.ndarray:
    mu = _complex_normal(rng, (n, m, m))
    mu -= np.mean(mu, axis=1, keepdims=True)
    mu /= np.sqrt(np.sum(np.abs(mu) ** 2, axis=(1, 2)))[:, None, None]
    return mu - np.mean(mu, axis=1, keepdims=True)


def _traceless_real(rng, n, m) -> np.ndarray:
    lam = rng.standard_normal((n, m))
    return _project_unit(lam)


def _project_unit(lam: np.ndarray) -> np.ndarray:
    """Zero mean and unit norm per row; the second projection removes the
    residue that normalisation magnifies when the row was nearly constant."""
    lam = lam - lam.mean(axis=1, keepdims=True)
    lam /= np.linalg.norm(lam, axis=1, keepdims=True)
    return lam - lam.mean(axis=1, keepdims=True)


def _okumura_extremal(rng, n, m) -> np.ndarray:
    """Perturbations of ``(a, ..., a, -(m-1)a)`` at scales from 1e-1 down to 1e-9."""
    base = np.ones((n, m))
    base[:, -1] = -(m - 1)
    base = rng.permuted(base, axis=1)
    scale = 10.0 ** rng.uniform(-9, -1, size=(n, 1))
    lam = base + scale * rng.standard_normal((n, m))
    lam *= rng.choice([-1.0, 1.0], size=(n, 1))
    return _project_unit(lam)


# ---------------------------------------------------------------------------
# fuzz drivers


def _workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _run_chunks(kernel: Callable, samples: int, seed: int) -> list:
    sizes = [min(CHUNK, samples - s) for s in range(0, samples, CHUNK)]

    def job(i):
        return kernel(np.random.default_rng([seed, i]), sizes[i])

    workers = _workers()
    if workers == 1 or len(sizes) == 1:
        return [job(i) for i in range(len(sizes))]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(job, range(len(sizes))))


def _summarize(name, m, samples, seed, tol, results, extra=None) -> FuzzSummary:
    gaps = np.concatenate([r[0] for r in results])
    bounds = np.concatenate([r[2] for r in results])
    witnesses = [w for r in results for w in r[3]]
    worst = int(np.argmin(gaps))
    # relative slack gap/bound, over samples whose bound is not degenerate
    live = np.abs(bounds) > 1e-12
    ratio = float(np.min(gaps[live] / np.abs(bounds[live]))) if np.any(live) else 0.0
    return FuzzSummary(name, m, samples, seed, tol, float(gaps[worst]), ratio,
                       witnesses[worst], dict(extra or {}))


def _pack(gap, lhs, rhs, witness_rows):
    return gap, lhs, rhs, witness_rows


def fuzz_okumura(m: int, samples: int, seed: int, tol: float = FUZZ_TOL) -> FuzzSummary:
    """Random trace-free vectors, about a tenth of them near the equality pattern."""
    def kernel(rng, n):
        n_ext = n // 10
        lam = np.concatenate([_traceless_real(rng, n - n_ext, m), _okumura_extremal(rng, n_ext, m)])
        gap, lhs, rhs = okumura_gaps(lam)
        return _pack(gap, lhs, rhs, list(lam))
    res = _run_chunks(kernel, samples, seed)
    near = min(float(np.min(r[0][len(r[0]) - len(r[0]) // 10:])) if len(r[0]) >= 10 else math.inf
               for r in res)
    return _summarize("okumura", m, samples, seed, tol, res, {"min_gap_near_extremal": near})


def fuzz_kato_pointwise(m: int, samples: int, seed: int, tol: float = FUZZ_TOL) -> FuzzSummary:
    def kernel(rng, n):
        lam = _traceless_real(rng, n, m)
        mu = _zero_sum_columns(rng, n, m)
        gap, lhs, rhs = kato_pointwise_gaps(lam, mu)
        return _pack(gap, lhs, rhs, [{"lambda": l, "mu": u} for l, u in zip(lam, mu)])
    return _summarize("kato_pointwise", m, samples, seed, tol, _run_chunks(kernel, samples, seed))


def fuzz_kato_chain(m: int, samples: int, seed: int, tol: float = FUZZ_TOL) -> FuzzSummary:
    def kernel(rng, n):
        mu = _project_unit(_complex_normal(rng, (n, m)))
        gap, lhs, rhs = kato_chain_gaps(mu)
        return _pack(gap, lhs, rhs, list(mu))
    return _summarize("kato_chain", m, samples, seed, tol, _run_chunks(kernel, samples, seed))


def fuzz_eeb_bound(m: int, samples: int, seed: int, tol: float = FUZZ_TOL) -> FuzzSummary:
    def kernel(rng, n):
        e = traceless_hermitian_batch(m, n, rng)
        b = bochner_like_batch(m, n, rng)
        vals = eeb_components(e, b)
        if np.max(np.abs(vals.imag)) > 1e-10:
            raise TensorError("contraction not real; input symmetries violated")
        gap, lhs, rhs = eeb_bound_gaps(e, b)
        return _pack(gap, lhs, rhs, [{"E": x, "B": y} for x, y in zip(e, b)])
    return _summarize("eeb_bound", m, samples, seed, tol, _run_chunks(kernel, samples, seed))


def fuzz_trace_cube(m: int, samples: int, seed: int, which: str = "H",
                    tol: float = FUZZ_TOL) -> FuzzSummary:
    def kernel(rng, n):
        b = bochner_like_batch(m, n, rng)
        gap, lhs, rhs = trace_cube_gaps(b, which)
        return _pack(gap, lhs, rhs, list(b))
    return _summarize(f"trace_cube_{which}", m, samples, seed, tol,
                      _run_chunks(kernel, samples, seed))


def fuzz_v_decomposition(m: int, samples: int, seed: int, tol: float = FUZZ_TOL) -> FuzzSummary:
    """Relative defects of the V-tensor identities; the gap is ``-max defect``.

    Also folds in the ``|V1|^2`` upper bound (as a gap) and the inner-product
    identities with a random Bochner-like tensor.
    """
    def kernel(rng, n):
        e = traceless_hermitian_batch(m, n, rng)
        b = bochner_like_batch(m, n, rng)
        parts = v_components(e)
        formulas = v_norm_formulas(e)
        norms = {k: tensor_norm_sq(parts[k]) for k in ("V", "V1", "V2", "V3")}
        scale = np.maximum(norms["V"], np.finfo(float).tiny)
        defects = np.stack([
            np.max(np.abs(parts["V"] - parts["V1"] - parts["V2"] - parts["V3"]),
                   axis=(1, 2, 3, 4)) / np.sqrt(scale),
            np.abs(inner(parts["V1"], parts["V2"])) / scale,
            np.abs(inner(parts["V1"], parts["V3"])) / scale,
            np.abs(inner(parts["V2"], parts["V3"])) / scale,
            np.abs(norms["V"] - norms["V1"] - norms["V2"] - norms["V3"]) / scale,
            np.abs(norms["V"] - formulas["V"]) / scale,
            np.abs(norms["V2"] - formulas["V2"]) / scale,
            np.abs(norms["V3"] - formulas["V3"]) / scale,
            np.abs(inner(b, parts["V"]) - inner(b, parts["V1"])) / np.sqrt(scale),
            np.abs(inner(b, parts["V"]) + 8.0 * eeb_components(e, b)) / np.sqrt(scale),
        ])
        worst_defect = np.max(defects, axis=0)
        bound_gap = (formulas["V1_bound"] - norms["V1"]) / formulas["V1_bound"]
        gap = np.minimum(-worst_defect, bound_gap)
        return _pack(gap, worst_defect, np.ones(n), list(e))
    res = _run_chunks(kernel, samples, seed)
    return _summarize("v_decomposition", m, samples, seed, tol, res)


FUZZERS = {
    "okumura": fuzz_okumura,
    "kato_pointwise": fuzz_kato_pointwise,
    "kato_chain": fuzz_kato_chain,
    "eeb_bound": fuzz_eeb_bound,
    "trace_cube_H": lambda m, n, s, tol=FUZZ_TOL: fuzz_trace_cube(m, n, s, "H", tol),
    "trace_cube_K": lambda m, n, s, tol=FUZZ_TOL: fuzz_trace_cube(m, n, s, "K", tol),
    "v_decomposition": fuzz_v_decomposition,
}
