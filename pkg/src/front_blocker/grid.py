"""Tensor grids on truncated cylinders and the psi-weighted finite-difference operators.

Nodes include the lateral boundary; lateral Neumann conditions are
imposed through half trapezoid weights, which is the same as ghost-node
reflection.  Edge weights use the exponential (Scharfetter-Gummel) mean
of psi along each edge, so for a potential that is linear on an edge the
discrete flux psi_e * (w_b - w_a) / h is exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .drift import CrossSection, DriftField


def _trapezoid(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


def _bernoulli(x: np.ndarray) -> np.ndarray:
    """x / (exp(x) - 1), equal to 1 at x = 0."""
    small = np.abs(x) < 1e-10
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 - 0.5 * x, safe / np.expm1(safe))


@dataclass(frozen=True)
class CylinderGrid:
    """Nodes x1[0] < ... < x1[-1] (uniform) times a uniform node grid on the rectangle."""

    x1: np.ndarray = field(repr=False)
    cs: CrossSection
    n_cross: int

    @classmethod
    def build(cls, cs: CrossSection, left: float, right: float, h1: float, n_cross: int = 8,
              anchor: float | None = None) -> "CylinderGrid":
        """Uniform axial nodes of spacing h1 aligned with ``anchor`` (default: ``right``).

        The span is widened, never shrunk, to land on the lattice.
        """
        anchor = right if anchor is None else anchor
        k_lo = int(np.floor((left - anchor) / h1 + 1e-9))
        k_hi = int(np.ceil((right - anchor) / h1 - 1e-9))
        x1 = anchor + h1 * np.arange(k_lo, k_hi + 1)
        return cls(x1, cs, int(n_cross))

    @property
    def h1(self) -> float:
        return float(self.x1[1] - self.x1[0])

    @property
    def axes(self) -> list[np.ndarray]:
        return [np.linspace(0.0, L, self.n_cross + 1) for L in self.cs.lengths]

    @property
    def spacings(self) -> list[float]:
        return [self.h1] + [L / self.n_cross for L in self.cs.lengths]

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.x1.size,) + (self.n_cross + 1,) * self.cs.dim

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Axial coordinate and cross-section coordinates at every node."""
        mesh = np.meshgrid(self.x1, *self.axes, indexing="ij")
        return mesh[0], np.stack(mesh[1:], axis=-1)

    def trapezoid_weights(self) -> np.ndarray:
        parts = [_trapezoid(self.x1.size, self.h1)] + [
            _trapezoid(self.n_cross + 1, L / self.n_cross) for L in self.cs.lengths]
        w = parts[0]
        for p in parts[1:]:
            w = np.multiply.outer(w, p)
        return w

    def index_of(self, x: float) -> int:
        i = int(round((x - self.x1[0]) / self.h1))
        if not (0 <= i < self.x1.size) or abs(self.x1[i] - x) > 1e-9 * max(1.0, abs(x)):
            raise ValueError(f"x1={x} is not a grid node")
        return i

    def center_line(self, u: np.ndarray) -> np.ndarray:
        c = self.n_cross // 2
        return u[(slice(None),) + (c,) * self.cs.dim]

    def interpolator(self, values: np.ndarray, fill_left: float = 0.0, fill_right: float = 1.0):
        """Callable (x1, y) -> multilinear interpolant, constant continuation in x1."""
        from scipy.interpolate import RegularGridInterpolator

        interp = RegularGridInterpolator((self.x1, *self.axes), values, method="linear")
        lo, hi = self.x1[0], self.x1[-1]

        def ev(x1, y):
            x1 = np.asarray(x1, dtype=float)
            y = np.asarray(y, dtype=float)
            pts = np.concatenate([np.clip(x1, lo, hi)[..., None], y], axis=-1)
            out = interp(pts)
            out = np.where(x1 < lo - 1e-12, fill_left, out)
            return np.where(x1 > hi + 1e-12, fill_right, out)

        return ev


@dataclass(frozen=True)
class WeightedOperators:
    """Stiffness K, lumped weights and psi samples for one grid and drift.

    Energy of a nodal field w:  0.5 w^T K w + sum(tw * psi * F(w)).
    """

    grid: CylinderGrid
    K: sp.csr_matrix = field(repr=False)
    tw: np.ndarray = field(repr=False)
    psi: np.ndarray = field(repr=False)
    H: np.ndarray = field(repr=False)

    @property
    def mass(self) -> np.ndarray:
        return (self.tw * self.psi).ravel()

    def metric(self) -> sp.csr_matrix:
        """Gram matrix of the weighted H1 inner product."""
        return (self.K + sp.diags(self.mass)).tocsr()

    def norm2(self, v: np.ndarray) -> float:
        v = v.ravel()
        return float(v @ (self.K @ v) + np.sum(self.mass * v * v))

    def norm(self, v: np.ndarray) -> float:
        return float(np.sqrt(max(self.norm2(v), 0.0)))

    def gradient_part(self, v: np.ndarray) -> float:
        v = v.ravel()
        return float(v @ (self.K @ v))

    def value_part(self, v: np.ndarray) -> float:
        v = v.ravel()
        return float(np.sum(self.mass * v * v))

    def apply_operator(self, u: np.ndarray) -> np.ndarray:
        """Discrete (1/psi) div(psi grad u) = Laplacian(u) - k . grad(u)."""
        return -(self.K @ u.ravel()).reshape(u.shape) / (self.tw * self.psi)


def _difference(n: int) -> sp.csr_matrix:
    return sp.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n), format="csr")


def build_operators(grid: CylinderGrid, drift: DriftField) -> WeightedOperators:
    shape = grid.shape
    x1, ys = grid.coords()
    if drift.axial:
        H = np.broadcast_to(drift.potential(grid.x1)[(slice(None),) + (None,) * grid.cs.dim], shape).copy()
    else:
        H = drift.potential(x1, ys)
    psi = np.exp(-H)
    tw = grid.trapezoid_weights()
    hs = grid.spacings
    one_d = [_trapezoid(s, h) for s, h in zip(shape, hs)]
    K = sp.csr_matrix((grid.size, grid.size))
    for d, (nd, hd) in enumerate(zip(shape, hs)):
        ops = [sp.identity(s, format="csr") for s in shape]
        ops[d] = _difference(nd)
        D = ops[0]
        for o in ops[1:]:
            D = sp.kron(D, o, format="csr")
        lo = [slice(None)] * len(shape)
        hi = [slice(None)] * len(shape)
        lo[d] = slice(0, nd - 1)
        hi[d] = slice(1, nd)
        Ha, Hb = H[tuple(lo)], H[tuple(hi)]
        psi_e = np.exp(-Ha) * _bernoulli(Hb - Ha)
        # edge volume: h_d times trapezoid weights of the other axes
        parts = [w if e != d else np.full(nd - 1, hd) for e, w in enumerate(one_d)]
        vol = parts[0]
        for p in parts[1:]:
            vol = np.multiply.outer(vol, p)
        coef = (psi_e * vol / hd**2).ravel()
        K = K + D.T @ sp.diags(coef) @ D
    return WeightedOperators(grid, K.tocsr(), tw, psi, H)
