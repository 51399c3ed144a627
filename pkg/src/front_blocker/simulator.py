"""Explicit time integration of u_t = Laplacian(u) - k.grad(u) + f(u) on a truncated cylinder.

Lateral walls are Neumann (ghost reflection, via half trapezoid weights);
the axial ends are clamped to u = 0 on the left and u = 1 on the right.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .drift import CrossSection, DriftField
from .grid import CylinderGrid, build_operators
from .nonlinearity import ExtendedNonlinearity
from .supersolution import DiscreteField
from .traveling_wave import WaveProfile, wave_at

log = logging.getLogger(__name__)

ADVECTION = ("sg", "upwind", "centered")
SCHEMES = ("euler", "rk2")


class SimulationConfigError(ValueError):
    pass


class BlowUpError(RuntimeError):
    pass


class InconclusiveError(RuntimeError):
    pass


@dataclass(frozen=True)
class SimConfig:
    """Truncation [x_minus, x_plus], grid, time stepping and classification thresholds.

    ``dt=None`` uses ``safety * dt_max``.  The front starts at x1 = -c * t0.
    """

    x_minus: float = -30.0
    x_plus: float = 30.0
    h1: float = 0.125
    n_cross: int = 8
    t0: float = -20.0
    t_end: float = 60.0
    dt: float | None = None
    safety: float = 0.9
    scheme: str = "euler"
    advection: str = "sg"
    stride: int = 200
    anchor: float | None = None
    stall_fraction: float = 0.05
    speed_band: float = 0.25
    window: float = 0.25
    margin: float = 3.0
    pass_widths: float = 3.0
    tail_tol: float = 1e-4
    comparison_tol: float = 1e-3
    keep_frames: bool = False

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise SimulationConfigError(f"scheme must be one of {SCHEMES}")
        if self.advection not in ADVECTION:
            raise SimulationConfigError(f"advection must be one of {ADVECTION}")
        if not self.x_minus < self.x_plus:
            raise SimulationConfigError("x_minus must be below x_plus")
        if self.t_end <= self.t0:
            raise SimulationConfigError("t_end must exceed t0")


def dt_max(cfg: SimConfig, cs: CrossSection, max_drift: float) -> float:
    """h^2 / (2 n (1 + h max|k| / 2)) with h the smallest grid spacing."""
    h = min([cfg.h1] + [L / cfg.n_cross for L in cs.lengths])
    return h * h / (2.0 * cs.n * (1.0 + 0.5 * h * max_drift))


@dataclass
class SimState:
    t: float
    u: np.ndarray
    steps: int = 0


@dataclass
class Simulation:
    """Everything fixed for one run: grid, discrete operator, time step."""

    cfg: SimConfig
    grid: CylinderGrid = field(repr=False)
    L: sp.csr_matrix = field(repr=False)
    dt: float
    nl: ExtendedNonlinearity = field(repr=False)
    drift: DriftField = field(repr=False)


def _plain_operator(grid: CylinderGrid, drift: DriftField, advection: str) -> sp.csr_matrix:
    """Neumann Laplacian minus k.grad with upwind or centred differences."""
    zero = build_operators(grid, DriftField(None, zero_x0=max(drift.x0, 1e-12)))
    tw = grid.trapezoid_weights().ravel()
    lap = -sp.diags(1.0 / tw) @ zero.K
    shape = grid.shape
    x1, ys = grid.coords()
    k = drift.drift(x1, ys, n=len(shape)).reshape(-1, len(shape))
    adv = sp.csr_matrix((grid.size, grid.size))
    for d, (nd, hd) in enumerate(zip(shape, grid.spacings)):
        kd = k[:, d]
        if not np.any(kd):
            continue
        ops = [sp.identity(s, format="csr") for s in shape]
        if advection == "centered":
            core = sp.diags([-np.ones(nd - 1), np.ones(nd - 1)], [-1, 1], shape=(nd, nd), format="lil")
            core[0, :] = 0.0
            core[-1, :] = 0.0
            ops[d] = core.tocsr() / (2.0 * hd)
            G = ops[0]
            for o in ops[1:]:
                G = sp.kron(G, o, format="csr")
            adv = adv + sp.diags(kd) @ G
            continue
        back = sp.diags([-np.ones(nd - 1), np.ones(nd - 1)], [-1, 0], shape=(nd, nd), format="lil")
        back[0, :] = 0.0
        fwd = sp.diags([-np.ones(nd), np.ones(nd - 1)], [0, 1], shape=(nd, nd), format="lil")
        fwd[-1, :] = 0.0
        for mat, sign in ((back, np.maximum(kd, 0.0)), (fwd, np.minimum(kd, 0.0))):
            ops[d] = mat.tocsr() / hd
            G = ops[0]
            for o in ops[1:]:
                G = sp.kron(G, o, format="csr")
            adv = adv + sp.diags(sign) @ G
    return (lap - adv).tocsr()


def build_simulation(cfg: SimConfig, cs: CrossSection, nl: ExtendedNonlinearity, drift: DriftField) -> Simulation:
    anchor = cfg.x_plus if cfg.anchor is None else cfg.anchor
    grid = CylinderGrid.build(cs, cfg.x_minus, cfg.x_plus, cfg.h1, cfg.n_cross, anchor=anchor)
    if cfg.advection == "sg":
        ops = build_operators(grid, drift)
        L = (-sp.diags(1.0 / ops.mass) @ ops.K).tocsr()
    else:
        L = _plain_operator(grid, drift, cfg.advection)
    bound = dt_max(cfg, cs, drift.max_drift())
    dt = cfg.safety * bound if cfg.dt is None else float(cfg.dt)
    if dt > bound * (1.0 + 1e-12):
        raise SimulationConfigError(f"dt={dt:.3e} exceeds the stability bound {bound:.3e}")
    return Simulation(cfg, grid, L, dt, nl, drift)


def initialize(sim: Simulation, wave: WaveProfile, shift: float = 0.0) -> SimState:
    """u(t0, x) = phi(x1 + c t0 - shift), planar; ends clamped."""
    cfg = sim.cfg
    front = -wave.c * cfg.t0 + shift
    x0 = sim.drift.x0 if sim.drift.family is not None else 0.0
    if front <= 0.0 or (x0 > 0.0 and -x0 <= front <= 0.0):
        raise SimulationConfigError(f"initial front x1={front:.3f} must lie right of the drift support")
    if front > cfg.x_plus - cfg.margin:
        raise SimulationConfigError(f"initial front x1={front:.3f} too close to x_plus={cfg.x_plus}")
    prof = wave_at(wave, sim.grid.x1 - front)
    if prof[0] > cfg.tail_tol or prof[-1] < 1.0 - cfg.tail_tol:
        raise SimulationConfigError(
            f"truncation too short for the wave tails: u(x_minus)={prof[0]:.2e}, u(x_plus)={prof[-1]:.2e}")
    u = np.broadcast_to(prof[(slice(None),) + (None,) * sim.grid.cs.dim], sim.grid.shape).copy()
    u[0] = 0.0
    u[-1] = 1.0
    return SimState(cfg.t0, u)


def _rate(sim: Simulation, v: np.ndarray) -> np.ndarray:
    return sim.L @ v + sim.nl.f(v)


def step(state: SimState, sim: Simulation) -> SimState:
    """One explicit Euler or Heun (RK2) step with clamped axial ends."""
    dt = sim.dt
    shape = state.u.shape
    v = state.u.ravel()
    k1 = _rate(sim, v)
    if sim.cfg.scheme == "euler":
        new = v + dt * k1
    else:
        mid = v + dt * k1
        mid = mid.reshape(shape)
        mid[0], mid[-1] = 0.0, 1.0
        new = v + 0.5 * dt * (k1 + _rate(sim, mid.ravel()))
    new = new.reshape(shape)
    new[0] = 0.0
    new[-1] = 1.0
    if not np.all(np.isfinite(new)):
        raise BlowUpError(f"non-finite values at t={state.t + dt:.4f}; dt={dt:.3e} is too large")
    return SimState(state.t + dt, new, state.steps + 1)


def front_position(x1: np.ndarray, line: np.ndarray, level: float = 0.5) -> float:
    """Leftmost-upcrossing-from-the-right: x1 where the centreline passes ``level``."""
    below = np.flatnonzero(line < level)
    if below.size == 0 or below[-1] == line.size - 1:
        return math.nan
    i = below[-1]
    a, b = line[i], line[i + 1]
    return float(x1[i] + (level - a) / (b - a) * (x1[i + 1] - x1[i]))


@dataclass
class FrontTrace:
    times: np.ndarray
    positions: np.ndarray
    classification: str
    velocity: float
    speed_ratio: float
    comparison_max: float | None
    comparison_initial: float | None
    u_min: float
    u_max: float
    steps: int
    dt: float
    stopped_early: bool
    final: np.ndarray = field(repr=False)
    x1: np.ndarray = field(repr=False)
    frames: list = field(default_factory=list, repr=False)
    thresholds: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "classification": self.classification, "velocity": self.velocity,
            "speed_ratio": self.speed_ratio, "comparison_max": self.comparison_max,
            "comparison_initial": self.comparison_initial, "u_min": self.u_min, "u_max": self.u_max,
            "steps": self.steps, "dt": self.dt, "stopped_early": self.stopped_early,
            "thresholds": dict(self.thresholds),
        }


def _fit_velocity(t: np.ndarray, x: np.ndarray) -> float:
    if t.size < 3:
        return math.nan
    return float(np.polyfit(t, x, 1)[0])


def comparison_target(sim: Simulation, w_tilde: DiscreteField) -> np.ndarray:
    """Supersolution sampled on the simulation grid (1 right of its support, 0 left)."""
    ev = w_tilde.grid.interpolator(w_tilde.values, fill_left=0.0, fill_right=1.0)
    x1, ys = sim.grid.coords()
    return ev(x1, ys)


def classify(times: np.ndarray, pos: np.ndarray, c: float, drift_x0: float, width: float,
             cfg: SimConfig) -> tuple[str, float]:
    ok = np.isfinite(pos)
    times, pos = times[ok], pos[ok]
    if times.size < 3:
        return "undetermined", math.nan
    t_late = times[-1] - cfg.window * (times[-1] - times[0])
    late = times >= t_late
    v_late = _fit_velocity(times[late], pos[late])
    passed = pos < -drift_x0 - cfg.pass_widths * width
    if np.count_nonzero(passed) >= 3:
        v_pass = _fit_velocity(times[passed], pos[passed])
        if abs(v_pass + c) <= cfg.speed_band * c:
            return "propagating", v_pass
    if abs(v_late) < cfg.stall_fraction * c and pos[-1] > cfg.x_minus + cfg.margin:
        return "blocked", v_late
    return "undetermined", v_late


def run_and_classify(cfg: SimConfig, cs: CrossSection, nl: ExtendedNonlinearity, drift: DriftField,
                     wave: WaveProfile, w_tilde: DiscreteField | None = None, *,
                     sim: Simulation | None = None, shift: float = 0.0) -> FrontTrace:
    """Integrate from t0 to t_end, track the front and classify it.

    Integration stops early once the front comes within ``margin`` of
    x_minus; if that happens before a classification is possible an
    InconclusiveError asks for a longer domain.
    """
    sim = build_simulation(cfg, cs, nl, drift) if sim is None else sim
    state = initialize(sim, wave, shift)
    grid = sim.grid
    target = None if w_tilde is None else comparison_target(sim, w_tilde)
    comp_init = None if target is None else float(np.max(state.u - target))
    comp = comp_init
    n_steps = int(math.ceil((cfg.t_end - cfg.t0) / sim.dt))
    times, pos = [state.t], [front_position(grid.x1, grid.center_line(state.u))]
    umin, umax = float(state.u.min()), float(state.u.max())
    frames = [(state.t, state.u.copy())] if cfg.keep_frames else []
    stopped = False
    for i in range(1, n_steps + 1):
        state = step(state, sim)
        if i % cfg.stride == 0 or i == n_steps:
            u = state.u
            umin, umax = min(umin, float(u.min())), max(umax, float(u.max()))
            times.append(state.t)
            xf = front_position(grid.x1, grid.center_line(u))
            pos.append(xf)
            if target is not None:
                comp = max(comp, float(np.max(u - target)))
            if cfg.keep_frames:
                frames.append((state.t, u.copy()))
            if not math.isnan(xf) and xf < cfg.x_minus + cfg.margin:
                stopped = True
                break
    times_a, pos_a = np.asarray(times), np.asarray(pos)
    x0 = drift.x0
    label, vel = classify(times_a, pos_a, wave.c, x0, wave.width, cfg)
    if stopped and label != "propagating":
        raise InconclusiveError(f"front reached x_minus + margin at t={state.t:.2f} before it could be "
                                "classified; enlarge the domain")
    if target is not None and comp > cfg.comparison_tol:
        log.warning("u exceeds the supersolution by %.3e (tolerance %.1e)", comp, cfg.comparison_tol)
    thresholds = {"stall_fraction": cfg.stall_fraction, "speed_band": cfg.speed_band,
                  "window": cfg.window, "margin": cfg.margin, "pass_widths": cfg.pass_widths}
    return FrontTrace(times_a, pos_a, label, vel, -vel / wave.c if math.isfinite(vel) else math.nan,
                      comp, comp_init, umin, umax, state.steps, sim.dt, stopped, state.u, grid.x1, frames,
                      thresholds)
