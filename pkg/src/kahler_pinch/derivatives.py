"""Central finite differences with Richardson extrapolation in Wirtinger form.

Points are complex vectors ``z`` of length ``m``; the underlying real
coordinates are ``(x_1..x_m, y_1..y_m)``.  Functions passed in must accept
a batch of points of shape ``(N, m)`` and return arrays of shape
``(N, ...)``.  Base points may be a single ``(m,)`` vector or a batch
``(N, m)``; every stencil point of every base point goes through ``fn`` in
one call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FDConfig:
    """Step sizes per real coordinate and number of Richardson levels."""

    h_first: float = 1e-4
    h_second: float = 1e-3
    levels: int = 1

    def __post_init__(self):
        if self.h_first <= 0 or self.h_second <= 0:
            raise ValueError("finite-difference steps must be positive")
        if self.levels < 0:
            raise ValueError("Richardson levels must be >= 0")

    def stencil_radius(self) -> float:
        # diagonal moves of the mixed stencil reach sqrt(2) h
        return max(self.h_first, self.h_second) * np.sqrt(2.0)


def richardson(estimates: list) -> np.ndarray:
    """Extrapolate estimates taken at h, h/2, h/4, ... with an O(h^2) error series."""
    table = list(estimates)
    k = 1
    while len(table) > 1:
        fac = 4.0 ** k
        table = [(fac * table[i + 1] - table[i]) / (fac - 1.0) for i in range(len(table) - 1)]
        k += 1
    return table[0]


def _real_directions(m: int) -> np.ndarray:
    eye = np.eye(m, dtype=complex)
    return np.concatenate([eye, 1j * eye])


def _offsets(m: int, h: float, levels: int, second: bool):
    """Displacement list and bookkeeping for the stencil."""
    dirs = _real_directions(m)
    n = dirs.shape[0]
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)] if second else []
    offs = [np.zeros((1, m), dtype=complex)]
    for k in range(levels + 1):
        s = h / 2 ** k
        offs += [s * dirs, -s * dirs]
        if pairs:
            di = dirs[[i for i, _ in pairs]]
            dj = dirs[[j for _, j in pairs]]
            offs += [s * (di + dj), s * (di - dj), -s * (di - dj), -s * (di + dj)]
    return np.concatenate(offs), n, pairs


def _evaluate(fn, z, offs):
    """Evaluate fn on z + offs for every base point; returns (N, K, ...)."""
    zb = np.atleast_2d(np.asarray(z, dtype=complex))
    nb, m = zb.shape
    pts = (zb[:, None, :] + offs[None, :, :]).reshape(-1, m)
    vals = np.asarray(fn(pts))
    return vals.reshape((nb, offs.shape[0]) + vals.shape[1:])


def real_gradient(fn, z, h: float, levels: int = 1) -> np.ndarray:
    """Gradient along the 2m real directions.

    Shape ``(2m,) + out`` for a single point, ``(N, 2m) + out`` for a batch.
    """
    z = np.asarray(z, dtype=complex)
    m = z.shape[-1]
    offs, n, _ = _offsets(m, h, levels, second=False)
    vals = _evaluate(fn, z, offs)
    ests = []
    cur = 1
    for k in range(levels + 1):
        s = h / 2 ** k
        plus, minus = vals[:, cur:cur + n], vals[:, cur + n:cur + 2 * n]
        cur += 2 * n
        ests.append((plus - minus) / (2 * s))
    out = richardson(ests)
    return out[0] if z.ndim == 1 else out


def real_hessian(fn, z, h: float, levels: int = 1) -> np.ndarray:
    """Second derivatives along real directions, shape ``([N,] 2m, 2m) + out``."""
    z = np.asarray(z, dtype=complex)
    m = z.shape[-1]
    offs, n, pairs = _offsets(m, h, levels, second=True)
    vals = _evaluate(fn, z, offs)
    f0 = vals[:, 0]
    npair = len(pairs)
    cur = 1
    ests = []
    for k in range(levels + 1):
        s = h / 2 ** k
        fp = vals[:, cur:cur + n]; cur += n
        fm = vals[:, cur:cur + n]; cur += n
        hess = np.empty((vals.shape[0], n, n) + f0.shape[1:], dtype=vals.dtype)
        diag = (fp - 2 * f0[:, None] + fm) / s ** 2
        idx = np.arange(n)
        hess[:, idx, idx] = diag
        if npair:
            fpp = vals[:, cur:cur + npair]; cur += npair
            fpm = vals[:, cur:cur + npair]; cur += npair
            fmp = vals[:, cur:cur + npair]; cur += npair
            fmm = vals[:, cur:cur + npair]; cur += npair
            mixed = (fpp - fpm - fmp + fmm) / (4 * s ** 2)
            ii = np.array([i for i, _ in pairs])
            jj = np.array([j for _, j in pairs])
            hess[:, ii, jj] = mixed
            hess[:, jj, ii] = mixed
        ests.append(hess)
    out = richardson(ests)
    return out[0] if z.ndim == 1 else out


def wirtinger_gradient(fn, z, h: float, levels: int = 1):
    """``(d f/dz_c, d f/dzbar_c)``, each of shape ``([N,] m) + out``."""
    z = np.asarray(z, dtype=complex)
    m = z.shape[-1]
    grad = real_gradient(fn, z, h, levels)
    ax = 0 if z.ndim == 1 else 1
    dx = np.take(grad, np.arange(m), axis=ax)
    dy = np.take(grad, np.arange(m, 2 * m), axis=ax)
    return 0.5 * (dx - 1j * dy), 0.5 * (dx + 1j * dy)


def wirtinger_mixed(fn, z, h: float, levels: int = 1) -> np.ndarray:
    """``d^2 f / dz_c dzbar_d`` with shape ``([N,] m, m) + out``."""
    z = np.asarray(z, dtype=complex)
    m = z.shape[-1]
    hess = real_hessian(fn, z, h, levels)
    if z.ndim == 1:
        hess = hess[None]
    hxx = hess[:, :m, :m]
    hyy = hess[:, m:, m:]
    hxy = hess[:, :m, m:]   # d/dx_c d/dy_d
    hyx = hess[:, m:, :m]   # d/dy_c d/dx_d
    out = 0.25 * (hxx + hyy + 1j * (hxy - hyx))
    return out[0] if z.ndim == 1 else out


def stencil_points(z, h: float, levels: int = 1, second: bool = False) -> np.ndarray:
    """Every point a first- or second-derivative stencil around ``z`` touches."""
    z = np.asarray(z, dtype=complex)
    offs, _, _ = _offsets(z.shape[-1], h, levels, second)
    return (np.atleast_2d(z)[:, None, :] + offs[None]).reshape(-1, z.shape[-1])
