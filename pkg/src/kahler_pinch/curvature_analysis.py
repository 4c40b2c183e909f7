"""Bochner tensor, the V-tensor decomposition, H/K matrices and Weitzenböck residuals.

Every function works on unitary-frame components, where the metric is the
identity and index contractions are plain sums.  Norm conventions:

* ``|E|^2 = 2 sum |E_ab|^2`` for (1,1) tensors,
* ``<T, S> = 4 sum T_abcd conj(S_abcd)`` and ``|T|^2 = <T, T>`` for
  curvature-type tensors.

The array kernels (``*_components``) accept leading batch axes so fuzzers
can push thousands of samples through one call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .reports import TOL_ALGEBRAIC
from .tensor_core import (
    KAHLER_PATTERN,
    ComplexTensor,
    HermitianMatrix,
    IndexSignature,
    TensorError,
    kahler_symmetry_violation,
    metric_square,
    odot,
)


def _arr(x) -> np.ndarray:
    if isinstance(x, ComplexTensor):
        return x.components
    if isinstance(x, HermitianMatrix):
        return x.entries
    return np.asarray(x, dtype=complex)


def _identity_like(mat: np.ndarray) -> np.ndarray:
    m = mat.shape[-1]
    return np.broadcast_to(np.eye(m), mat.shape)


def _tensor(arr) -> ComplexTensor:
    return ComplexTensor(IndexSignature(KAHLER_PATTERN, arr.shape[0]), arr)


# ---------------------------------------------------------------------------
# norms and inner products


def matrix_norm_sq(e) -> np.ndarray:
    """``|E|^2 = 2 sum |E_ab|^2``."""
    e = _arr(e)
    return 2.0 * np.sum(np.abs(e) ** 2, axis=(-2, -1))


def inner(t, s) -> np.ndarray:
    """Hermitian inner product ``4 sum T conj(S)`` of curvature-type tensors."""
    t, s = _arr(t), _arr(s)
    return 4.0 * np.sum(t * np.conj(s), axis=(-4, -3, -2, -1))


def tensor_norm_sq(t) -> np.ndarray:
    return np.real(inner(t, t))


# ---------------------------------------------------------------------------
# Bochner tensor


def bochner_components(rm, ric, scalar, g=None, route: str = "E") -> np.ndarray:
    """Bochner tensor from curvature data.

    Parameters
    ----------
    rm, ric : array_like
        Curvature tensor ``(..., m, m, m, m)`` and Ricci form ``(..., m, m)``.
    scalar : array_like
        Complex scalar curvature, shape ``(...)``.
    g : array_like, optional
        Metric in the same components; identity (a unitary frame) if omitted.
    route : {"E", "ricci"}
        Build from the traceless Ricci tensor or from Ricci directly.  The two
        are algebraically equal and serve as cross-checks of each other.
    """
    rm, ric = _arr(rm), _arr(ric)
    g = _identity_like(ric) if g is None else _arr(g)
    m = ric.shape[-1]
    r = np.asarray(scalar)[..., None, None, None, None]
    if route == "E":
        e = ric - (np.asarray(scalar)[..., None, None] / m) * g
        return rm + odot(e, g) / (m + 2) + r / (m * (m + 1)) * metric_square(g)
    if route == "ricci":
        return rm + odot(ric, g) / (m + 2) - r / ((m + 1) * (m + 2)) * metric_square(g)
    raise ValueError(f"unknown Bochner route {route!r}")


def bochner_from_ricci(pkg) -> ComplexTensor:
    """Bochner tensor assembled from the Ricci form of a curvature package."""
    return _tensor(bochner_components(pkg.riemann, pkg.ricci, pkg.scalar, route="ricci"))


def bochner_from_E(pkg) -> ComplexTensor:
    """Bochner tensor assembled from the traceless Ricci tensor of a package."""
    return _tensor(bochner_components(pkg.riemann, pkg.ricci, pkg.scalar, route="E"))


# ---------------------------------------------------------------------------
# V-tensor


def _check_traceless(e: np.ndarray, tol: float):
    tr = np.abs(np.trace(e, axis1=-2, axis2=-1))
    scale = np.maximum(1.0, np.max(np.abs(e), axis=(-2, -1)))
    if np.any(tr > tol * scale):
        raise TensorError(f"input not trace-free: |tr E| = {float(np.max(tr)):.3e}")


def v_components(e) -> dict:
    """Arrays of the V-tensor and its three orthogonal parts for (batched) E.

    Returns a dict with keys ``V, V1, V2, V3, VE, K``.
    """
    e = _arr(e)
    m = e.shape[-1]
    ee = np.einsum("...ab,...cd->...abcd", e, e)
    v = -(ee + np.swapaxes(ee, -3, -1))
    e2 = e @ e
    k = np.real(np.trace(e2, axis1=-2, axis2=-1))
    g = _identity_like(e)
    ve = e2 - (k[..., None, None] / m) * g
    v2 = -odot(ve, g) / (m + 2)
    v3 = -(k[..., None, None, None, None] / (m * (m + 1))) * metric_square(g)
    v1 = v - v2 - v3
    return {"V": v, "V1": v1, "V2": v2, "V3": v3, "VE": ve, "K": k}


def v_norm_formulas(e) -> dict:
    """Closed-form squared norms of ``V, V2, V3`` and an upper bound on ``|V1|^2``.

    Uses ``Z = tr(E^4)`` and ``|E|^2 = 2 tr(E^2)``.
    """
    e = _arr(e)
    m = e.shape[-1]
    e2 = e @ e
    z = np.real(np.trace(e2 @ e2, axis1=-2, axis2=-1))
    n2 = 2.0 * np.real(np.trace(e2, axis1=-2, axis2=-1))
    n4 = n2 ** 2
    return {
        "V": 4.0 * (n4 / 2.0 + 2.0 * z),
        "V2": 4.0 * (4.0 * z / (m + 2) - n4 / (m * (m + 2))),
        "V3": 4.0 * n4 / (2.0 * m * (m + 1)),
        "V1_bound": (4 * m * m + 8 * m + 6) / ((m + 1) * (m + 2)) * n4,
        "Z": z,
        "E_norm_sq": n2,
    }


@dataclass(frozen=True)
class VDecomposition:
    V: ComplexTensor
    V1: ComplexTensor
    V2: ComplexTensor
    V3: ComplexTensor
    norms: dict
    VE: HermitianMatrix
    Kscalar: float

    def residuals(self) -> dict:
        """Absolute defects of the sum, orthogonality and Pythagoras relations."""
        v, v1, v2, v3 = (t.components for t in (self.V, self.V1, self.V2, self.V3))
        return {
            "sum": float(np.max(np.abs(v - v1 - v2 - v3), initial=0.0)),
            "ip12": float(abs(inner(v1, v2))),
            "ip13": float(abs(inner(v1, v3))),
            "ip23": float(abs(inner(v2, v3))),
            "pythagoras": float(abs(self.norms["V"] - self.norms["V1"]
                                    - self.norms["V2"] - self.norms["V3"])),
        }


def build_V_and_decompose(E, m: int | None = None, tol: float = TOL_ALGEBRAIC) -> VDecomposition:
    """V-tensor of a trace-free Hermitian ``E`` split into three orthogonal parts.

    Examples
    --------
    >>> d = build_V_and_decompose(np.diag([1.0, -1.0]))
    >>> round(d.norms["V3"], 12)
    5.333333333333
    """
    e = _arr(E)
    if m is not None and e.shape != (m, m):
        raise TensorError(f"expected an {m}x{m} matrix, got {e.shape}")
    HermitianMatrix(e)
    _check_traceless(e, tol)
    parts = v_components(e)
    tensors = {k: _tensor(parts[k]) for k in ("V", "V1", "V2", "V3")}
    norms = {k: float(tensor_norm_sq(t.components)) for k, t in tensors.items()}
    ve = parts["VE"]
    return VDecomposition(VE=HermitianMatrix(0.5 * (ve + ve.conj().T)), Kscalar=float(parts["K"]),
                          norms=norms, **tensors)


# ---------------------------------------------------------------------------
# E.E.B contraction


def eeb_components(e, b) -> np.ndarray:
    """Complex value of ``sum E_ab E_lc B_{c a b l}`` (batched)."""
    return np.einsum("...ab,...lc,...cabl->...", _arr(e), _arr(e), _arr(b))


def eeb_contraction(E, B, tol: float = TOL_ALGEBRAIC) -> float:
    """Real contraction ``E_{a bbar} E_{l cbar} B_{c abar b lbar}``.

    Raises if the imaginary part exceeds ``tol`` relative to ``|B| |E|^2``.
    """
    e, b = _arr(E), _arr(B)
    val = complex(eeb_components(e, b))
    scale = max(1.0, float(np.sqrt(tensor_norm_sq(b)) * matrix_norm_sq(e)))
    if abs(val.imag) > tol * scale:
        raise TensorError("contraction not real; input symmetries violated")
    return val.real


# ---------------------------------------------------------------------------
# H and K matrices


def hk_components(b):
    """Flattened ``m^2 x m^2`` matrices H and K (batched)."""
    b = _arr(b)
    m = b.shape[-1]
    lead = b.shape[:-4]
    h = -np.swapaxes(b, -3, -2).reshape(lead + (m * m, m * m))
    k = -np.swapaxes(b, -2, -1).reshape(lead + (m * m, m * m))
    return h, k


def _power_traces(mat: np.ndarray) -> tuple:
    sq = mat @ mat
    return tuple(float(np.real(np.trace(p))) for p in (mat, sq, sq @ mat))


@dataclass(frozen=True)
class HKPair:
    H: HermitianMatrix
    K: HermitianMatrix
    traces: dict

    @property
    def m(self) -> int:
        return int(round(np.sqrt(self.H.dim)))


def build_HK(B, tol: float = TOL_ALGEBRAIC) -> HKPair:
    """The Hermitian pair ``H[(a,b),(c,d)] = B_{cbar a b dbar}``, ``K[(a,b),(c,d)] = B_{a bbar cbar d}``."""
    b = _arr(B)
    if b.ndim != 4:
        raise TensorError("expected a 4-slot curvature-type tensor")
    scale = max(1.0, float(np.max(np.abs(b), initial=0.0)))
    viol = kahler_symmetry_violation(b)
    if viol > tol * scale:
        raise TensorError(f"Kähler symmetries violated by {viol:.3e}")
    h, k = hk_components(b)
    hm = HermitianMatrix(h, tol=tol * scale)
    km = HermitianMatrix(k, tol=tol * scale)
    th, tk = _power_traces(hm.entries), _power_traces(km.entries)
    traces = {"trH": th[0], "trH2": th[1], "trH3": th[2],
              "trK": tk[0], "trK2": tk[1], "trK3": tk[2]}
    return HKPair(hm, km, traces)


# ---------------------------------------------------------------------------
# Weitzenböck residuals in the parallel regimes


def weitzenbock_residual_E(pkg, parallel_E: bool) -> float:
    """Curvature side of the |E|^2 Weitzenböck identity where E is parallel.

    With ``nabla E = 0`` the Laplacian and gradient terms drop out, leaving
    ``(4m/(m+2)) tr E^3 + 4 EEB + (2R/(m+1)) |E|^2``, which must vanish.

    Parameters
    ----------
    parallel_E : bool
        The caller's assertion (normally a validated model flag) that E is
        parallel.  The general Laplacian is not evaluated, so anything else
        is refused.
    """
    if not parallel_E:
        raise TensorError("Weitzenböck E residual needs a model with parallel E")
    e = _arr(pkg.E)
    m = e.shape[0]
    tr3 = float(np.real(np.trace(e @ e @ e)))
    return (4.0 * m / (m + 2) * tr3 + 4.0 * eeb_contraction(e, pkg.B)
            + 2.0 * pkg.scalar / (m + 1) * float(matrix_norm_sq(e)))


def weitzenbock_residual_B(pkg, tol: float = 1e-8) -> float:
    """``8 tr H^3 - 16 tr K^3 + (2R/m) |B|^2`` for an Einstein package with parallel B."""
    e = _arr(pkg.E)
    if np.sqrt(matrix_norm_sq(e)) > tol * max(1.0, abs(pkg.scalar)):
        raise TensorError("Weitzenböck B residual needs an Einstein package (E = 0)")
    b = _arr(pkg.B)
    m = b.shape[0]
    hk = build_HK(b, tol=max(TOL_ALGEBRAIC, tol))
    return (8.0 * hk.traces["trH3"] - 16.0 * hk.traces["trK3"]
            + 2.0 * pkg.scalar / m * float(tensor_norm_sq(b)))
