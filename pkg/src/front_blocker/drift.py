"""Cylinder cross-sections, potential drifts k = grad H and the weight psi = exp(-H)."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.optimize import minimize_scalar


class DriftError(ValueError):
    pass


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class CrossSection:
    """Rectangle (0, L_2) x ... x (0, L_n); the ambient dimension is n = dim + 1."""

    lengths: tuple[float, ...]
    lipschitz_norm: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(float(v) for v in self.lengths))
        if len(self.lengths) < 2:
            raise DriftError("cross-section needs dimension >= 2 (ambient n >= 3)")
        if any(v <= 0.0 for v in self.lengths):
            raise DriftError(f"cross-section side lengths must be positive, got {self.lengths}")

    @property
    def dim(self) -> int:
        return len(self.lengths)

    @property
    def n(self) -> int:
        return self.dim + 1

    @property
    def measure(self) -> float:
        return math.prod(self.lengths)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * np.asarray(self.lengths)


@dataclass(frozen=True)
class Concentrated:
    """k = (C/eps) on [-eps, 0] in the axial direction; H ramps linearly from 0 to C."""

    eps: float
    C: float

    def __post_init__(self):
        if self.eps <= 0.0:
            raise DriftError("Concentrated drift needs eps > 0")


@dataclass(frozen=True)
class AxialBump:
    """Axial drift g(x1) on [-x0, 0], sampled; g is linear between samples."""

    x0: float
    nodes: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        x = np.asarray(self.nodes, dtype=float)
        if self.x0 <= 0.0:
            raise DriftError("AxialBump needs x0 > 0")
        if x.size < 2 or np.any(np.diff(x) <= 0.0):
            raise DriftError("AxialBump nodes must be strictly increasing")
        if abs(x[0] + self.x0) > 1e-12 or abs(x[-1]) > 1e-12:
            raise DriftError("AxialBump nodes must span [-x0, 0] exactly")

    @classmethod
    def from_function(cls, g, x0: float, samples: int = 2001) -> "AxialBump":
        x = np.linspace(-x0, 0.0, samples)
        return cls(x0, tuple(x.tolist()), tuple(np.asarray(g(x), dtype=float).tolist()))

    @classmethod
    def constant(cls, value: float, x0: float) -> "AxialBump":
        return cls(x0, (-x0, 0.0), (value, value))


@dataclass(frozen=True)
class GridPotential:
    """H sampled on a tensor grid over [-x0, 0] x Omega (multilinear in between)."""

    x1: tuple[float, ...]
    axes: tuple[tuple[float, ...], ...]
    values: np.ndarray = field(repr=False, compare=False)


@dataclass(frozen=True)
class DriftField:
    """A drift k = grad H supported in [-x0, 0] x Omega.

    ``gauge`` adds a constant to H (so psi(-x0) = exp(-gauge)); every
    quantity entering the blocking criterion is invariant under it.
    """

    family: Concentrated | AxialBump | GridPotential | None
    gauge: float = 0.0
    zero_x0: float = 1.0
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        fam = self.family
        if isinstance(fam, GridPotential):
            self._init_grid(fam)
        elif isinstance(fam, AxialBump):
            x = np.asarray(fam.nodes)
            g = np.asarray(fam.values)
            dx = np.diff(x)
            cum = np.concatenate([[0.0], np.cumsum(0.5 * dx * (g[1:] + g[:-1]))])
            self._cache["bump"] = (x, g, cum)
        elif fam is None and self.zero_x0 <= 0.0:
            raise DriftError("zero drift still needs a positive nominal x0")

    def _init_grid(self, fam: GridPotential) -> None:
        x1 = np.asarray(fam.x1, dtype=float)
        axes = [np.asarray(a, dtype=float) for a in fam.axes]
        vals = np.asarray(fam.values, dtype=float)
        if vals.shape != (x1.size, *[a.size for a in axes]):
            raise DriftError("grid potential values do not match axis sizes")
        if x1[-1] != 0.0 or x1[0] >= 0.0:
            raise DriftError("grid potential x1 axis must run from -x0 to 0")
        left, right = vals[0], vals[-1]
        if np.ptp(left) > 1e-10 or np.ptp(right) > 1e-10:
            raise DriftError("H must be constant across the cross-section at x1 = -x0 and x1 = 0 "
                             "(k vanishes outside its support)")
        vals = vals - left.flat[0]
        interp = RegularGridInterpolator((x1, *axes), vals, method="linear")
        coords = (x1, *axes)
        grads = [np.gradient(vals, c, axis=i, edge_order=2 if c.size >= 3 else 1)
                 for i, c in enumerate(coords)]
        ginterp = [RegularGridInterpolator((x1, *axes), gr, method="linear") for gr in grads]
        self._cache["grid"] = (x1, axes, interp, ginterp)

    # -- geometry ---------------------------------------------------------
    @property
    def x0(self) -> float:
        fam = self.family
        if fam is None:
            return self.zero_x0
        if isinstance(fam, Concentrated):
            return fam.eps
        if isinstance(fam, AxialBump):
            return fam.x0
        return -float(fam.x1[0])

    @property
    def axial(self) -> bool:
        """True when H depends on x1 only."""
        return not isinstance(self.family, GridPotential)

    # -- potential and drift ------------------------------------------------
    def _relative_potential(self, x1, y=None):
        """H - H(-x0), clamped to the constant continuation outside [-x0, 0]."""
        x1 = np.asarray(x1, dtype=float)
        fam = self.family
        if fam is None:
            return np.zeros_like(x1)
        x0 = self.x0
        xc = np.clip(x1, -x0, 0.0)
        if isinstance(fam, Concentrated):
            return fam.C * (xc + fam.eps) / fam.eps
        if isinstance(fam, AxialBump):
            x, g, cum = self._cache["bump"]
            i = np.clip(np.searchsorted(x, xc, side="right") - 1, 0, x.size - 2)
            t = xc - x[i]
            dx = x[i + 1] - x[i]
            return cum[i] + g[i] * t + 0.5 * (g[i + 1] - g[i]) * t**2 / dx
        x1g, axes, interp, _ = self._cache["grid"]
        if y is None:
            raise DriftError("grid potential needs cross-section coordinates")
        y = np.asarray(y, dtype=float)
        pts = np.concatenate([xc[..., None], np.broadcast_to(y, xc.shape + (len(axes),))], axis=-1)
        for d, ax in enumerate(axes):
            pts[..., d + 1] = np.clip(pts[..., d + 1], ax[0], ax[-1])
        return interp(pts)

    def potential(self, x1, y=None):
        return self._relative_potential(x1, y) + self.gauge

    def weight(self, x1, y=None):
        """psi = exp(-H)."""
        return np.exp(-self.potential(x1, y))

    def drift(self, x1, y=None, n: int = 3):
        """k(x) as an array with trailing axis of length n."""
        x1 = np.asarray(x1, dtype=float)
        fam = self.family
        x0 = self.x0
        inside = (x1 >= -x0) & (x1 <= 0.0)
        out = np.zeros(x1.shape + (n,))
        if fam is None:
            return out
        if isinstance(fam, Concentrated):
            # interior value on the closed support; H is only Lipschitz at the ends
            out[..., 0] = np.where(inside, fam.C / fam.eps, 0.0)
            return out
        if isinstance(fam, AxialBump):
            x, g, _ = self._cache["bump"]
            out[..., 0] = np.where(inside, np.interp(x1, x, g), 0.0)
            return out
        x1g, axes, _, ginterp = self._cache["grid"]
        y = np.asarray(y, dtype=float)
        pts = np.concatenate([np.clip(x1, -x0, 0.0)[..., None],
                              np.broadcast_to(y, x1.shape + (len(axes),))], axis=-1)
        for d, ax in enumerate(axes):
            pts[..., d + 1] = np.clip(pts[..., d + 1], ax[0], ax[-1])
        for d, gi in enumerate(ginterp):
            out[..., d] = np.where(inside, gi(pts), 0.0)
        return out

    def max_drift(self) -> float:
        fam = self.family
        if fam is None:
            return 0.0
        if isinstance(fam, Concentrated):
            return abs(fam.C / fam.eps)
        if isinstance(fam, AxialBump):
            return float(np.max(np.abs(fam.values)))
        _, _, _, ginterp = self._cache["grid"]
        return float(np.sqrt(sum(np.max(gi.values**2) for gi in ginterp)))

    def with_gauge(self, gauge: float) -> "DriftField":
        return DriftField(self.family, gauge, self.zero_x0)

    def scaled(self, factor: float) -> "DriftField":
        """The drift factor * k (potential factor * H)."""
        fam = self.family
        if fam is None:
            return self
        if isinstance(fam, Concentrated):
            return DriftField(Concentrated(fam.eps, factor * fam.C), self.gauge, self.zero_x0)
        if isinstance(fam, AxialBump):
            return DriftField(AxialBump(fam.x0, fam.nodes, tuple(factor * v for v in fam.values)),
                              self.gauge, self.zero_x0)
        return DriftField(GridPotential(fam.x1, fam.axes, factor * np.asarray(fam.values)),
                          self.gauge, self.zero_x0)


def zero_drift(x0: float = 1.0) -> DriftField:
    return DriftField(None, zero_x0=x0)


def concentrated(eps: float, C: float) -> DriftField:
    return DriftField(Concentrated(eps, C))


def line_integral_k1(d: DriftField, x1, y=None):
    """Integral of k1 along the axis from -x0 to x1 (clamped to [-x0, 0])."""
    return d._relative_potential(x1, y)


def load_grid_potential(path: str | Path) -> DriftField:
    """CSV rows (x1, y_2, ..., y_n, H) on a full tensor grid; optional header."""
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), 1):
            if not row:
                continue
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                if lineno > 1:
                    raise ValueError(f"{path}:{lineno}: non-numeric row {row!r}") from None
    arr = np.array(rows)
    coords = arr[:, :-1]
    axes = [np.unique(coords[:, d]) for d in range(coords.shape[1])]
    shape = tuple(a.size for a in axes)
    if math.prod(shape) != arr.shape[0]:
        raise DriftError(f"{path}: rows do not form a full tensor grid")
    vals = np.empty(shape)
    idx = tuple(np.searchsorted(a, coords[:, d]) for d, a in enumerate(axes))
    vals[idx] = arr[:, -1]
    return DriftField(GridPotential(tuple(axes[0].tolist()), tuple(tuple(a.tolist()) for a in axes[1:]), vals))


def load_axial_profile(path: str | Path, x0: float) -> DriftField:
    """CSV rows (x1, g) sampling the axial drift on [-x0, 0]."""
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
    arr = np.array(sorted(rows))
    return DriftField(AxialBump(x0, tuple(arr[:, 0].tolist()), tuple(arr[:, 1].tolist())))


# -- summaries ----------------------------------------------------------------

@dataclass(frozen=True)
class DriftSummary:
    net_drift: float
    sup_exp_neg: float
    exp_integral: dict[float, float]
    psi_ratio: float
    x0: float
    measure: float

    def exp_integral_at(self, r: float) -> float:
        for key, val in self.exp_integral.items():
            if abs(key - r) <= 1e-12 * max(1.0, abs(r)):
                return val
        raise KeyError(f"exponent {r} was not requested in the summary")


def _midpoints(lo: float, hi: float, n: int) -> np.ndarray:
    h = (hi - lo) / n
    return lo + h * (np.arange(n) + 0.5)


def _cross_points(cs: CrossSection, n: int) -> tuple[np.ndarray, float]:
    axes = [_midpoints(0.0, L, n) for L in cs.lengths]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, cs.dim)
    return mesh, cs.measure / mesh.shape[0]


def _exp_integral(d: DriftField, cs: CrossSection, r: float, n1: int, ny: int) -> float:
    x0 = d.x0
    x1 = _midpoints(-x0, 0.0, n1)
    h1 = x0 / n1
    if d.axial:
        L = line_integral_k1(d, x1)
        return float(np.sum(np.exp(r * L)) * h1 * cs.measure)
    ys, wy = _cross_points(cs, ny)
    total = 0.0
    for y in ys:
        L = line_integral_k1(d, x1, np.broadcast_to(y, x1.shape + (cs.dim,)))
        total += float(np.sum(np.exp(r * L)))
    return total * h1 * wy


def summarize(d: DriftField, cs: CrossSection, exponents: Iterable[float], quad_resolution: int = 8,
              rtol: float = 1e-8, max_points: int = 2**22) -> DriftSummary:
    """Net drift, sup of exp(-int k1), and integrals of exp(r int k1) over [-x0, 0] x Omega."""
    if quad_resolution < 8:
        raise ValueError("quad_resolution must be at least 8 points per axis")
    x0 = d.x0
    ny0 = 1 if d.axial else quad_resolution

    # net drift: cross-section mean of H(0, y) - H(-x0, y)
    if d.axial:
        net = float(line_integral_k1(d, np.array(0.0)))
    else:
        ys, _ = _cross_points(cs, 4 * quad_resolution)
        net = float(np.mean(line_integral_k1(d, np.zeros(ys.shape[0]), ys)))

    # sup over the closed slab, node grid including endpoints, then a 1-D polish
    nodes = np.linspace(-x0, 0.0, 64 * quad_resolution + 1)
    if d.axial:
        vals = -line_integral_k1(d, nodes)
        k = int(np.argmax(vals))
        ybest = None
    else:
        ys = np.stack(np.meshgrid(*[np.linspace(0.0, L, 2 * quad_resolution + 1) for L in cs.lengths],
                                  indexing="ij"), axis=-1).reshape(-1, cs.dim)
        grid = np.stack([-line_integral_k1(d, nodes, np.broadcast_to(y, nodes.shape + (cs.dim,)))
                         for y in ys])
        j, k = np.unravel_index(int(np.argmax(grid)), grid.shape)
        vals = grid[j]
        ybest = ys[j]
    best = float(vals[k])
    lo, hi = nodes[max(k - 1, 0)], nodes[min(k + 1, nodes.size - 1)]
    if hi > lo:
        def neg(t):
            return float(line_integral_k1(d, np.array(t), ybest))
        res = minimize_scalar(neg, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        best = max(best, -float(res.fun))
    sup = math.exp(best)

    integrals = {}
    for r in exponents:
        r = float(r)
        n1, ny = quad_resolution, ny0
        prev = cur = _exp_integral(d, cs, r, n1, ny)
        while True:
            n1 *= 2
            if not d.axial:
                ny *= 2
            if n1 * ny ** cs.dim > max_points:
                raise QuadratureError(f"exp_integral({r}) did not converge: last estimates {prev!r}, {cur!r}")
            cur = _exp_integral(d, cs, r, n1, ny)
            if abs(cur - prev) <= rtol * abs(cur):
                break
            prev = cur
        # one Richardson step removes the leading h^2 midpoint error
        integrals[r] = cur + (cur - prev) / 3.0

    yc = cs.center
    # gauge-free form: the constant in H cancels exactly
    psi_ratio = float(np.exp(d._relative_potential(np.array(-x0), yc) - d._relative_potential(np.array(0.0), yc)))
    return DriftSummary(net, sup, integrals, psi_ratio, x0, cs.measure)
