"""Dense complex tensors with holomorphic/antiholomorphic slot bookkeeping.

All tensors here carry lower (covariant) indices only.  Slot kinds are
``"h"`` (holomorphic, index alpha) and ``"a"`` (antiholomorphic, index
alpha-bar).  A Kähler curvature-type tensor is stored with the pattern
``("h", "a", "h", "a")`` so that ``T[a, b, c, d]`` is the component
``T_{a bbar c dbar}``.

Contractions are plain sums over a paired (h, a) index.  That is only the
metric contraction once the tensor has been brought to a unitary frame with
:func:`frame_normalize`; every pointwise computation in this package works in
such a frame.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .reports import GapReport, TOL_ALGEBRAIC

HOLO = "h"
ANTI = "a"
KAHLER_PATTERN = (HOLO, ANTI, HOLO, ANTI)

HERMITIAN_TOL = 1e-12


class TensorError(ValueError):
    pass


@dataclass(frozen=True)
class IndexSignature:
    slots: tuple
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "slots", tuple(self.slots))
        if self.dim < 1:
            raise TensorError(f"dimension must be >= 1, got {self.dim}")
        bad = [s for s in self.slots if s not in (HOLO, ANTI)]
        if bad:
            raise TensorError(f"unknown slot kinds {bad}; use 'h' or 'a'")

    @property
    def rank(self) -> int:
        return len(self.slots)

    @property
    def shape(self) -> tuple:
        return (self.dim,) * self.rank


@dataclass(frozen=True)
class ComplexTensor:
    signature: IndexSignature
    components: np.ndarray

    def __post_init__(self):
        comps = np.array(self.components, dtype=complex)
        if comps.shape != self.signature.shape:
            raise TensorError(
                f"component extent {comps.shape} does not match signature {self.signature.shape}")
        comps.setflags(write=False)
        object.__setattr__(self, "components", comps)

    @classmethod
    def from_array(cls, arr, slots: Sequence[str]) -> "ComplexTensor":
        arr = np.asarray(arr, dtype=complex)
        dim = arr.shape[0] if arr.ndim else 1
        return cls(IndexSignature(tuple(slots), dim), arr)

    @property
    def dim(self) -> int:
        return self.signature.dim

    @property
    def slots(self) -> tuple:
        return self.signature.slots

    def __add__(self, other: "ComplexTensor") -> "ComplexTensor":
        if other.signature != self.signature:
            raise TensorError("signature mismatch in tensor sum")
        return ComplexTensor(self.signature, self.components + other.components)

    def __rmul__(self, scalar) -> "ComplexTensor":
        return ComplexTensor(self.signature, scalar * self.components)

    def norm_sq(self) -> float:
        """Plain component sum of squared moduli (no convention factor)."""
        return float(np.sum(np.abs(self.components) ** 2))


@dataclass(frozen=True)
class HermitianMatrix:
    entries: np.ndarray
    tol: float = HERMITIAN_TOL

    def __post_init__(self):
        h = np.array(self.entries, dtype=complex)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise TensorError(f"expected a square matrix, got shape {h.shape}")
        viol = hermitian_violation(h)
        if viol > self.tol:
            raise TensorError(f"matrix not Hermitian: max |H - H^*| = {viol:.3e}")
        h.setflags(write=False)
        object.__setattr__(self, "entries", h)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


TensorLike = Union[ComplexTensor, np.ndarray]


def _components(t: TensorLike) -> np.ndarray:
    if isinstance(t, ComplexTensor):
        return t.components
    if isinstance(t, HermitianMatrix):
        return t.entries
    return np.asarray(t, dtype=complex)


def _signature(t: TensorLike, default=None) -> tuple:
    if isinstance(t, ComplexTensor):
        return t.slots
    if default is not None:
        return tuple(default)
    arr = np.asarray(t)
    # bare arrays default to alternating h, a, h, a, ...
    return tuple(HOLO if i % 2 == 0 else ANTI for i in range(arr.ndim))


def hermitian_violation(h) -> float:
    h = _components(h)
    return float(np.max(np.abs(h - np.conj(np.swapaxes(h, -1, -2))), initial=0.0))


def contract(t: TensorLike, slot_a: int, slot_b: int) -> ComplexTensor:
    """Sum over a paired holomorphic/antiholomorphic index.

    Only meaningful as a metric contraction in a unitary frame.
    """
    comps = _components(t)
    slots = _signature(t)
    rank = len(slots)
    for s in (slot_a, slot_b):
        if not 0 <= s < rank:
            raise TensorError(f"slot {s} out of range for rank-{rank} tensor")
    if slot_a == slot_b:
        raise TensorError("cannot contract a slot with itself")
    if slots[slot_a] == slots[slot_b]:
        raise TensorError("cannot contract like-kind slots")
    out = np.trace(comps, axis1=slot_a, axis2=slot_b)
    rest = tuple(s for i, s in enumerate(slots) if i not in (slot_a, slot_b))
    dim = comps.shape[0]
    return ComplexTensor(IndexSignature(rest, dim), out)


def kahler_symmetry_violation(b) -> float:
    """Largest violation of the curvature-type symmetries.

    Checks ``B_{a b c d} = B_{c b a d}``, ``B_{a b c d} = B_{a d c b}`` and
    ``conj(B_{a b c d}) = B_{b a d c}`` for an (h, a, h, a) array.
    Works on a leading batch axis too.
    """
    b = _components(b)
    swap_h = np.swapaxes(b, -4, -2)
    swap_a = np.swapaxes(b, -3, -1)
    # B_{b a d c}: transpose of the two index pairs
    herm = np.conj(b).swapaxes(-4, -3).swapaxes(-2, -1)
    return float(max(np.max(np.abs(b - swap_h), initial=0.0),
                     np.max(np.abs(b - swap_a), initial=0.0),
                     np.max(np.abs(b - herm), initial=0.0)))


def check_kahler_symmetries(t: TensorLike, tol: float = TOL_ALGEBRAIC,
                            name: str = "kahler_symmetries") -> GapReport:
    comps = _components(t)
    if comps.ndim != 4 or (isinstance(t, ComplexTensor) and t.slots != KAHLER_PATTERN):
        raise TensorError("expected a 4-slot tensor with pattern (h, a, h, a)")
    viol = kahler_symmetry_violation(comps)
    return GapReport(name, gap=-viol, lhs=viol, rhs=0.0, tol=tol)


def hermitian_eigenvalues(h, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Ascending real eigenvalues of a Hermitian matrix.

    Raises if the input is not Hermitian to ``tol`` or if the
    eigendecomposition does not reconstruct the input to 1e-10 relative.
    """
    h = _components(h)
    viol = hermitian_violation(h)
    scale = max(1.0, float(np.max(np.abs(h), initial=0.0)))
    if viol > tol * scale:
        raise TensorError(f"matrix not Hermitian: max |H - H^*| = {viol:.3e}")
    h = 0.5 * (h + np.conj(h.T))
    w, v = np.linalg.eigh(h)
    resid = np.linalg.norm(v @ np.diag(w) @ np.conj(v.T) - h)
    if resid > 1e-10 * max(1.0, np.linalg.norm(h)):
        raise TensorError(f"eigendecomposition residual {resid:.3e} too large")
    return w


def inverse_cholesky(g) -> np.ndarray:
    """Frame matrix ``A = L^{-1}`` with ``g = L L^*``; ``A g A^* = I``.

    Accepts a batch of matrices on the leading axes.
    """
    g = np.asarray(g, dtype=complex)
    try:
        low = np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise TensorError("metric not positive definite at point") from exc
    eye = np.broadcast_to(np.eye(g.shape[-1], dtype=complex), g.shape)
    return np.linalg.solve(low, eye)


def apply_frame(frame: np.ndarray, comps: np.ndarray, slots: Sequence[str],
                batch: bool = False) -> np.ndarray:
    """Transform covariant components with a frame matrix on every slot.

    Holomorphic slots transform with ``frame``, antiholomorphic slots with
    its complex conjugate.  With ``batch=True`` both arrays carry a leading
    batch axis.
    """
    out = np.asarray(comps, dtype=complex)
    off = 1 if batch else 0
    conj = np.conj(frame)
    for k, kind in enumerate(slots):
        mat = frame if kind == HOLO else conj
        ax = k + off
        moved = np.moveaxis(out, ax, -1)
        if batch:
            # moved: (N, ..., j) ; mat: (N, i, j)
            expand = mat.reshape(mat.shape[:1] + (1,) * (moved.ndim - 2) + mat.shape[1:])
            moved = np.einsum("...ij,...j->...i", expand, moved)
        else:
            moved = moved @ mat.T
        out = np.moveaxis(moved, -1, ax)
    return out


def frame_normalize(g, t: TensorLike) -> ComplexTensor:
    """Components of ``t`` in a unitary frame for the metric ``g``."""
    g = _components(g)
    frame = inverse_cholesky(g)
    slots = _signature(t)
    comps = apply_frame(frame, _components(t), slots)
    return ComplexTensor(IndexSignature(slots, g.shape[0]), comps)


def inverse_metric(g) -> np.ndarray:
    """``ginv[a, b] = g^{a bbar}``, so that ``sum_a ginv[a, b] g[a, c] = delta_bc``."""
    g = np.asarray(g, dtype=complex)
    return np.swapaxes(np.linalg.inv(g), -1, -2)


def metric_invariants(g, t: TensorLike) -> np.ndarray:
    """Full-contraction scalars of ``t`` computed with the inverse metric.

    Returns ``[|t|^2, full trace]``; the trace pairs the k-th holomorphic
    slot with the k-th antiholomorphic slot and is 0 when the slot counts
    differ.  Works in coordinates, independently of any frame change.
    """
    g = _components(g)
    comps = _components(t)
    slots = _signature(t)
    ginv = inverse_metric(g)
    raised = comps
    for k, kind in enumerate(slots):
        mat = ginv.T if kind == HOLO else ginv
        raised = np.moveaxis(np.moveaxis(raised, k, -1) @ mat.T, -1, k)
    norm = np.sum(raised * np.conj(comps))
    trace = 0.0
    holo = [k for k, s in enumerate(slots) if s == HOLO]
    anti = [k for k, s in enumerate(slots) if s == ANTI]
    if len(holo) == len(anti):
        letters = "abcdefghijklmnopqrstuvwxyz"
        idx = [""] * len(slots)
        operands, specs = [], []
        for n, (i, j) in enumerate(zip(holo, anti)):
            idx[i], idx[j] = letters[2 * n], letters[2 * n + 1]
            operands.append(ginv)
            specs.append(idx[i] + idx[j])
        trace = np.einsum(",".join(["".join(idx)] + specs) + "->", comps, *operands)
    return np.array([norm, trace], dtype=complex)


def odot(x, g) -> np.ndarray:
    """Curvature-type product of two (h, a) matrices.

    ``(x . g)_{a b c d} = x_ab g_cd + x_cb g_ad + g_ab x_cd + g_cb x_ad``;
    both inputs may carry matching leading batch axes.
    """
    x = np.asarray(x)
    g = np.asarray(g)
    xg = np.einsum("...ab,...cd->...abcd", x, g)
    gx = np.einsum("...ab,...cd->...abcd", g, x)
    return xg + np.swapaxes(xg, -4, -2) + gx + np.swapaxes(gx, -4, -2)


def metric_square(g) -> np.ndarray:
    """``g_ab g_cd + g_ad g_cb``, the curvature tensor of constant holomorphic sectional curvature up to scale."""
    g = np.asarray(g)
    gg = np.einsum("...ab,...cd->...abcd", g, g)
    return gg + np.swapaxes(gg, -3, -1)
