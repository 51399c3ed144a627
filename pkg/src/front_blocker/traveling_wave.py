"""Planar traveling wave phi'' - c phi' + f(phi) = 0 connecting 0 to 1.

The speed is found by phase-plane shooting on p(phi) = phi'(z): the
branches leaving (0, 0) and entering (1, 0) are integrated to the unstable
zero theta and c is adjusted until they meet.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .nonlinearity import ExtendedNonlinearity


class ShootingError(RuntimeError):
    pass


class WaveConvergenceError(RuntimeError):
    pass


_EDGE = 1e-7
_RTOL = 1e-12
_ATOL = 1e-15


@dataclass(frozen=True)
class WaveProfile:
    c: float
    z: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    lam_left: float
    lam_right: float
    mismatch: float
    _interp: PchipInterpolator = field(repr=False, compare=False)

    @property
    def width(self) -> float:
        """Decay length of the leading edge, 1/lam_left."""
        return 1.0 / self.lam_left


def _eigen(c: float, nl: ExtendedNonlinearity) -> tuple[float, float]:
    lam = 0.5 * (c + math.sqrt(c * c - 4.0 * nl.df0))
    kap = 0.5 * (-c + math.sqrt(c * c - 4.0 * nl.df1))
    return lam, kap


def _branches(c: float, nl: ExtendedNonlinearity, dense: bool = False):
    """Integrate p dp/dphi = c p - f(phi) from both stationary points to theta."""
    th = nl.theta
    lam, kap = _eigen(c, nl)

    def rhs(phi, p):
        return c - nl.f(phi) / p

    def hit_zero(phi, p):
        return p[0] - 1e-300

    hit_zero.terminal = True

    left = solve_ivp(rhs, (_EDGE, th), [lam * _EDGE], method="DOP853", rtol=_RTOL, atol=_ATOL,
                     events=hit_zero, dense_output=dense)
    right = solve_ivp(rhs, (1.0 - _EDGE, th), [kap * _EDGE], method="DOP853", rtol=_RTOL, atol=_ATOL,
                      events=hit_zero, dense_output=dense)
    return left, right, lam, kap


def _mismatch(c: float, nl: ExtendedNonlinearity) -> float:
    left, right, _, _ = _branches(c, nl)
    if left.status == 1 or left.y[0, -1] <= 0:
        return -1.0
    if right.status == 1 or right.y[0, -1] <= 0:
        return 1.0
    return float(left.y[0, -1] - right.y[0, -1])


def _bracket(nl: ExtendedNonlinearity) -> tuple[float, float]:
    hi = 0.25
    for _ in range(12):
        if _mismatch(hi, nl) > 0 and _mismatch(-hi, nl) < 0:
            return -hi, hi
        hi *= 2.0
    raise ShootingError("no sign change in shooting functional")


def solve_wave(nl: ExtendedNonlinearity, tol: float = 1e-12, *, anchor: float | None = None,
               spacing: float = 0.005, tail: float = 1e-5, max_iter: int = 200) -> WaveProfile:
    """Speed c and profile phi with phi(0) = anchor (theta by default).

    The profile is sampled on a uniform grid of the given spacing, extended
    until phi drops below ``tail`` on the left and exceeds 1 - ``tail`` on
    the right.
    """
    lo, hi = _bracket(nl)
    c, info = brentq(_mismatch, lo, hi, args=(nl,), xtol=tol, rtol=4 * np.finfo(float).eps,
                     maxiter=max_iter, full_output=True)
    if not info.converged:
        raise WaveConvergenceError(f"speed not converged; last mismatch {_mismatch(c, nl):.3e}")
    left, right, lam, kap = _branches(c, nl, dense=True)
    mismatch = float(left.y[0, -1] - right.y[0, -1])
    th = nl.theta
    pl, pr = left.sol, right.sol

    def p_of(phi):
        if phi <= _EDGE:
            return lam * max(phi, 0.0)
        if phi >= 1.0 - _EDGE:
            return kap * max(1.0 - phi, 0.0)
        if phi < th:
            return float(pl(phi)[0])
        return float(pr(phi)[0])

    def dphi(z, y):
        return [p_of(y[0])]

    if anchor is None:
        anchor = th
    if not 0.0 < anchor < 1.0:
        raise ValueError("anchor must lie in (0, 1)")

    def low(z, y):
        return y[0] - tail

    def high(z, y):
        return y[0] - (1.0 - tail)

    low.terminal = True
    high.terminal = True
    back = solve_ivp(dphi, (0.0, -1e4), [anchor], method="DOP853", rtol=_RTOL, atol=_ATOL,
                     events=low, dense_output=True)
    fwd = solve_ivp(dphi, (0.0, 1e4), [anchor], method="DOP853", rtol=_RTOL, atol=_ATOL,
                    events=high, dense_output=True)
    z_lo = spacing * math.floor(back.t[-1] / spacing)
    z_hi = spacing * math.ceil(fwd.t[-1] / spacing)
    z = np.arange(round(z_lo / spacing), round(z_hi / spacing) + 1) * spacing
    phi = np.empty_like(z)
    neg = z < 0
    # beyond the event points the linearised tails are exact to O(tail^2)
    zb, zf = back.t[-1], fwd.t[-1]
    phib, phif = back.y[0, -1], fwd.y[0, -1]
    zn = z[neg]
    phi[neg] = np.where(zn >= zb, back.sol(np.maximum(zn, zb))[0], phib * np.exp(lam * (zn - zb)))
    zp = z[~neg]
    phi[~neg] = np.where(zp <= zf, fwd.sol(np.minimum(zp, zf))[0],
                         1.0 - (1.0 - phif) * np.exp(-kap * (zp - zf)))
    if np.any(np.diff(phi) <= 0.0):
        raise WaveConvergenceError("sampled profile is not strictly increasing")
    interp = PchipInterpolator(z, phi, extrapolate=False)
    return WaveProfile(float(c), z, phi, lam, kap, mismatch, interp)


def wave_at(w: WaveProfile, z):
    """phi(z) with exponential tails continued beyond the sampled grid."""
    z = np.asarray(z, dtype=float)
    inside = np.clip(z, w.z[0], w.z[-1])
    out = w._interp(inside)
    with np.errstate(under="ignore", over="ignore"):
        left = w.phi[0] * np.exp(w.lam_left * np.minimum(z - w.z[0], 0.0))
        right = 1.0 - (1.0 - w.phi[-1]) * np.exp(-w.lam_right * np.maximum(z - w.z[-1], 0.0))
    out = np.where(z < w.z[0], left, out)
    return np.where(z > w.z[-1], right, out)


def ode_residual(w: WaveProfile, nl: ExtendedNonlinearity) -> np.ndarray:
    """phi'' - c phi' + f(phi) by central differences on the sample grid."""
    h = w.z[1] - w.z[0]
    phi = w.phi
    d2 = (phi[2:] - 2.0 * phi[1:-1] + phi[:-2]) / h**2
    d1 = (phi[2:] - phi[:-2]) / (2.0 * h)
    return d2 - w.c * d1 + nl.f(phi[1:-1])
