"""Bistable reaction terms, their linear extension and derived constants."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq, minimize_scalar


class NonlinearityError(ValueError):
    """Raised when a reaction term violates one of the bistability assumptions."""


@dataclass(frozen=True)
class Cubic:
    theta: float


@dataclass(frozen=True)
class Tabulated:
    u: tuple[float, ...]
    f: tuple[float, ...]


@dataclass(frozen=True)
class BistableNonlinearity:
    """A bistable f on [0, 1] with stable zeros 0, 1 and unstable zero theta.

    ``f_eval``, ``f_prime`` and ``f_second`` are only meaningful on [0, 1];
    use :class:`ExtendedNonlinearity` for evaluation on the whole line.
    """

    theta: float
    f_eval: Callable[[np.ndarray], np.ndarray]
    f_prime: Callable[[np.ndarray], np.ndarray]
    f_second: Callable[[np.ndarray], np.ndarray]
    descriptor: Cubic | Tabulated
    # F restricted to [0, 1], with F(1) = 0 and F' = -f
    antiderivative: Callable[[np.ndarray], np.ndarray] = field(repr=False)

    @property
    def integral(self) -> float:
        return float(self.antiderivative(np.array(0.0)))


def _cubic_parts(theta: float):
    th = theta

    def f(u):
        u = np.asarray(u, dtype=float)
        return u * (1.0 - u) * (u - th)

    def fp(u):
        u = np.asarray(u, dtype=float)
        return -3.0 * u**2 + 2.0 * (1.0 + th) * u - th

    def fpp(u):
        u = np.asarray(u, dtype=float)
        return -6.0 * u + 2.0 * (1.0 + th)

    # primitive of f vanishing at 0, then F(s) = P(1) - P(s)
    def prim(u):
        return -(u**4) / 4.0 + (1.0 + th) * u**3 / 3.0 - th * u**2 / 2.0

    p1 = prim(1.0)

    def F(s):
        s = np.asarray(s, dtype=float)
        return p1 - prim(s)

    return f, fp, fpp, F


def _validate(nl: BistableNonlinearity, tol: float, *, allow_unbalanced: bool = False) -> None:
    f0 = float(nl.f_eval(np.array(0.0)))
    f1 = float(nl.f_eval(np.array(1.0)))
    if abs(f0) > tol or abs(f1) > tol:
        raise NonlinearityError(f"F2 violated: f(0)={f0:.3e}, f(1)={f1:.3e}")
    d0 = float(nl.f_prime(np.array(0.0)))
    d1 = float(nl.f_prime(np.array(1.0)))
    if not (d0 < 0.0 and d1 < 0.0):
        raise NonlinearityError(f"F3 violated: f'(0)={d0:.3e}, f'(1)={d1:.3e}")
    th = nl.theta
    if not 0.0 < th < 1.0:
        raise NonlinearityError(f"F4 violated: theta={th} not in (0, 1)")
    u = np.linspace(0.0, 1.0, 4001)[1:-1]
    u = u[np.abs(u - th) > 2e-3]
    vals = nl.f_eval(u)
    below = u < th
    if np.any(vals[below] >= 0.0) or np.any(vals[~below] <= 0.0):
        raise NonlinearityError("F4 violated: f must be negative on (0, theta) and positive on (theta, 1)")
    if not allow_unbalanced and nl.integral <= 0.0:
        raise NonlinearityError(f"F8 violated: integral of f over [0, 1] is {nl.integral:.3e} <= 0")


def make_cubic(theta: float, *, allow_unbalanced: bool = False) -> BistableNonlinearity:
    """The cubic f(u) = u(1-u)(u-theta).

    ``allow_unbalanced`` admits theta in [1/2, 1) for experiments where the
    wave speed changes sign; such an f does not satisfy F8.
    """
    upper = 1.0 if allow_unbalanced else 0.5
    if not 0.0 < theta < upper:
        if theta >= 0.5 and theta < 1.0:
            raise NonlinearityError(f"F8 violated: theta={theta} gives integral (1-2*theta)/12 <= 0")
        raise NonlinearityError(f"F4 violated: theta={theta} not in (0, 1/2)")
    f, fp, fpp, F = _cubic_parts(theta)
    nl = BistableNonlinearity(theta, f, fp, fpp, Cubic(theta), F)
    _validate(nl, 1e-12, allow_unbalanced=allow_unbalanced)
    return nl


def make_tabulated(u, values, *, tol: float = 1e-8) -> BistableNonlinearity:
    """Monotone cubic (PCHIP) interpolant of sampled f on [0, 1]."""
    u = np.asarray(u, dtype=float)
    values = np.asarray(values, dtype=float)
    order = np.argsort(u)
    u, values = u[order], values[order]
    if abs(u[0]) > tol or abs(u[-1] - 1.0) > tol:
        raise NonlinearityError("tabulated f must be sampled on [0, 1] including both endpoints")
    interp = PchipInterpolator(u, values, extrapolate=True)
    d1 = interp.derivative(1)
    d2 = interp.derivative(2)
    prim = interp.antiderivative()
    p1 = float(prim(1.0))

    # interior sign change of the samples locates theta (exact zero samples are skipped)
    inner = values[1:-1]
    nz = np.flatnonzero(inner != 0.0)
    flips = np.flatnonzero(np.diff(np.sign(inner[nz])) != 0)
    if flips.size != 1 or inner[nz[flips[0]]] > 0.0:
        raise NonlinearityError("F4 violated: tabulated f needs exactly one interior sign change")
    lo, hi = u[1 + nz[flips[0]]], u[1 + nz[flips[0] + 1]]
    theta = brentq(lambda s: float(interp(s)), lo, hi, xtol=1e-14)

    def F(s):
        return p1 - prim(np.asarray(s, dtype=float))

    nl = BistableNonlinearity(
        float(theta),
        lambda s: interp(np.asarray(s, dtype=float)),
        lambda s: d1(np.asarray(s, dtype=float)),
        lambda s: d2(np.asarray(s, dtype=float)),
        Tabulated(tuple(u.tolist()), tuple(values.tolist())),
        F,
    )
    _validate(nl, tol)
    return nl


def load_tabulated(path: str | Path) -> BistableNonlinearity:
    """Two-column CSV (u, f(u)); a non-numeric first row is treated as a header."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row:
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except ValueError:
                if lineno > 1:
                    raise ValueError(f"{path}:{lineno}: non-numeric row {row!r}") from None
    arr = np.array(rows)
    return make_tabulated(arr[:, 0], arr[:, 1])


@dataclass(frozen=True)
class ExtendedNonlinearity:
    """f continued linearly outside [0, 1]: f'(0) s below 0, f'(1)(s - 1) above 1."""

    base: BistableNonlinearity
    df0: float = field(init=False)
    df1: float = field(init=False)
    F0: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "df0", float(self.base.f_prime(np.array(0.0))))
        object.__setattr__(self, "df1", float(self.base.f_prime(np.array(1.0))))
        object.__setattr__(self, "F0", self.base.integral)

    @property
    def theta(self) -> float:
        return self.base.theta

    def f(self, s):
        s = np.asarray(s, dtype=float)
        inner = self.base.f_eval(np.clip(s, 0.0, 1.0))
        out = np.where(s < 0.0, self.df0 * s, inner)
        return np.where(s > 1.0, self.df1 * (s - 1.0), out)

    def f_prime(self, s):
        s = np.asarray(s, dtype=float)
        inner = self.base.f_prime(np.clip(s, 0.0, 1.0))
        out = np.where(s < 0.0, self.df0, inner)
        return np.where(s > 1.0, self.df1, out)

    def F(self, s):
        """F(s) = integral of f from s to 1."""
        s = np.asarray(s, dtype=float)
        inner = self.base.antiderivative(np.clip(s, 0.0, 1.0))
        out = np.where(s < 0.0, self.F0 - 0.5 * self.df0 * s**2, inner)
        return np.where(s > 1.0, -0.5 * self.df1 * (s - 1.0) ** 2, out)

    def taylor_remainder(self, s):
        """F(s) - F(0) - F'(0) s - F''(0) s^2 / 2, with F'(0) = 0 and F''(0) = -f'(0)."""
        s = np.asarray(s, dtype=float)
        return self.F(s) - self.F0 + 0.5 * self.df0 * s**2


def extend(nl: BistableNonlinearity) -> ExtendedNonlinearity:
    return ExtendedNonlinearity(nl)


def eval_F(nl: ExtendedNonlinearity, s):
    return nl.F(s)


@dataclass(frozen=True)
class NonlinearityConstants:
    alpha: float
    mu: float
    f2_inf: float
    K: float
    F0: float
    Fmax: float
    df0: float
    df1: float


def _quadratic_floor(nl: ExtendedNonlinearity) -> float:
    """inf over s != 1 of F(s)/(s-1)^2."""

    def ratio(s):
        s = np.asarray(s, dtype=float)
        return nl.F(s) / (s - 1.0) ** 2

    # tails: s -> -inf gives -f'(0)/2, s -> +inf gives -f'(1)/2 exactly beyond 1
    candidates = [-0.5 * nl.df0, -0.5 * nl.df1]
    for lo, hi in ((-5.0, 1.0), (1.0, 5.0)):
        s = np.linspace(lo, hi, 20001)[1:-1]
        s = s[np.abs(s - 1.0) > 1e-6]
        r = ratio(s)
        k = int(np.argmin(r))
        a = s[max(k - 1, 0)]
        b = s[min(k + 1, s.size - 1)]
        if b > a:
            res = minimize_scalar(lambda t: float(ratio(t)), bounds=(a, b), method="bounded",
                                  options={"xatol": 1e-12})
            candidates.append(min(float(res.fun), float(r[k])))
        else:
            candidates.append(float(r[k]))
    return min(candidates)


def compute_constants(nl: ExtendedNonlinearity) -> NonlinearityConstants:
    alpha = min(0.25, -nl.df0 / 4.0)
    mu = nl.F0 - 0.5 * (nl.df0 + nl.df1)
    u = np.linspace(0.0, 1.0, 20001)
    base = nl.base
    if isinstance(base.descriptor, Cubic):
        th = base.descriptor.theta
        f2 = max(abs(2.0 + 2.0 * th), abs(4.0 - 2.0 * th))
    else:
        f2 = float(np.max(np.abs(base.f_second(u))))
    K = _quadratic_floor(nl)
    if K <= 0.0:
        raise ArithmeticError(f"quadratic floor constant K={K} is not positive; broken nonlinearity")
    Fvals = nl.F(u)
    k = int(np.argmax(Fvals))
    res = minimize_scalar(lambda t: -float(nl.F(t)), bounds=(u[max(k - 1, 0)], u[min(k + 1, u.size - 1)]),
                          method="bounded", options={"xatol": 1e-12})
    Fmax = max(float(Fvals[k]), -float(res.fun))
    return NonlinearityConstants(alpha, mu, f2, K, nl.F0, Fmax, nl.df0, nl.df1)


def gamma_tilde(constants: NonlinearityConstants, gamma: float, exponent_q: float) -> float:
    """Coefficient of |s|^q that, together with gamma s^2, dominates the Taylor remainder of F."""
    if gamma <= 0.0 or exponent_q <= 2.0:
        raise ValueError("need gamma > 0 and exponent q > 2")
    f2 = constants.f2_inf
    if 3.0 - exponent_q >= 0.0:
        return max(f2, constants.mu)
    return max(f2 * (gamma / f2) ** (3.0 - exponent_q), constants.mu)


def eta_remainder_bound(constants: NonlinearityConstants, s):
    """Envelope ||f''|| s^3 on (0, 1) and mu s^2 on [1, inf); zero for s <= 0."""
    s = np.asarray(s, dtype=float)
    out = np.where((s > 0.0) & (s < 1.0), constants.f2_inf * s**3, 0.0)
    return np.where(s >= 1.0, constants.mu * s**2, out)


def integral_of_f(nl: BistableNonlinearity) -> float:
    """Quadrature of f over [0, 1]; independent of the stored antiderivative."""
    return quad(lambda t: float(nl.f_eval(np.array(t))), 0.0, 1.0, epsabs=1e-14)[0]


def first_moment_of_F(nl: ExtendedNonlinearity) -> float:
    """Integral of F over [0, 1]."""
    return quad(lambda t: float(nl.F(t)), 0.0, 1.0, epsabs=1e-14)[0]

