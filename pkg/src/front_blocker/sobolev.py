"""Numerical lower bounds for the two embedding constants.

C1: sup ||w||_{L^q} / ||w||_{H^1} on a box [-length, 0] x Omega, by the
nonlinear power iteration w <- A^{-1} M |w|^{q-2} w (A the H1 Gram matrix).

C2: sup ||w||_{L^m} / ||w||_{W^{1,p}} on [-x0, 0] x Omega, by L-BFGS on the
log-ratio with a smoothed |grad w|^p.

Both are maximised over a finite-dimensional subspace, so they are lower
bounds for the true constants.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize
from scipy.sparse.linalg import splu

from .drift import CrossSection, DriftField
from .grid import CylinderGrid, _difference, _trapezoid, build_operators


@dataclass(frozen=True)
class SobolevEstimate:
    value: float
    iterations: int
    history: list


def _box(cs: CrossSection, length: float, h1: float, n_cross: int) -> CylinderGrid:
    return CylinderGrid.build(cs, -length, 0.0, h1, n_cross, anchor=0.0)


def _bump(grid: CylinderGrid, width: float) -> np.ndarray:
    x1, ys = grid.coords()
    mid = 0.5 * (grid.x1[0] + grid.x1[-1])
    r2 = ((x1 - mid) / width) ** 2 + np.sum(((ys - grid.cs.center) / width) ** 2, axis=-1)
    return np.exp(-r2)


def estimate_c1(cs: CrossSection, q: float, *, length: float = 2.0, h1: float = 0.125, n_cross: int = 8,
                iters: int = 200, rtol: float = 1e-10) -> SobolevEstimate:
    grid = _box(cs, length, h1, n_cross)
    ops = build_operators(grid, DriftField(None))
    M = ops.mass
    lu = splu(ops.metric().tocsc())
    w = _bump(grid, 0.25 * min(cs.lengths)).ravel()

    def ratio(v):
        lq = np.sum(M * np.abs(v) ** q) ** (1.0 / q)
        return lq / np.sqrt(v @ (ops.K @ v) + np.sum(M * v * v))

    hist = [ratio(w)]
    it = 0
    for it in range(1, iters + 1):
        w = lu.solve(M * np.abs(w) ** (q - 2.0) * w)
        w /= np.max(np.abs(w))
        hist.append(ratio(w))
        if abs(hist[-1] - hist[-2]) <= rtol * hist[-1]:
            break
    return SobolevEstimate(float(max(hist)), it, [float(v) for v in hist])


def estimate_c2(cs: CrossSection, p: float, m: float, x0: float, *, h1: float = 0.0625, n_cross: int = 8,
                smoothing: float = 1e-6, maxiter: int = 500) -> SobolevEstimate:
    grid = _box(cs, x0, min(h1, x0 / 4.0), n_cross)
    tw = grid.trapezoid_weights().ravel()
    shape = grid.shape
    diffs, vols = [], []
    one_d = [_trapezoid(s, h) for s, h in zip(shape, grid.spacings)]
    for d, (nd, hd) in enumerate(zip(shape, grid.spacings)):
        ops = [sp.identity(s, format="csr") for s in shape]
        ops[d] = _difference(nd) / hd
        D = ops[0]
        for o in ops[1:]:
            D = sp.kron(D, o, format="csr")
        parts = [w if e != d else np.full(nd - 1, hd) for e, w in enumerate(one_d)]
        vol = parts[0]
        for part in parts[1:]:
            vol = np.multiply.outer(vol, part)
        diffs.append(D)
        vols.append(vol.ravel())
    hist: list[float] = []

    def objective(v):
        # -log ||v||_m + log ||v||_{1,p}; edge-wise |dv|^p approximates |grad v|^p
        am = np.abs(v)
        lm = np.sum(tw * am**m)
        g_lm = m * tw * am ** (m - 1.0) * np.sign(v)
        sp_ = (v * v + smoothing) ** (p / 2.0)
        wp = np.sum(tw * sp_)
        g_wp = tw * p * (v * v + smoothing) ** (p / 2.0 - 1.0) * v
        for D, vol in zip(diffs, vols):
            e = D @ v
            s = (e * e + smoothing) ** (p / 2.0)
            wp += np.sum(vol * s)
            g_wp += D.T @ (vol * p * (e * e + smoothing) ** (p / 2.0 - 1.0) * e)
        val = -np.log(lm) / m + np.log(wp) / p
        hist.append(float(np.exp(-val)))
        return val, -g_lm / (m * lm) + g_wp / (p * wp)

    w = _bump(grid, 0.25 * min(min(cs.lengths), x0)).ravel()
    res = minimize(objective, w, jac=True, method="L-BFGS-B", options={"maxiter": maxiter})
    return SobolevEstimate(float(np.exp(-res.fun)), int(res.nit), hist[:: max(1, len(hist) // 50)])
