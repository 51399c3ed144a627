import math

import numpy as np
import pytest

from front_blocker.drift import CrossSection, concentrated, zero_drift
from front_blocker.grid import build_operators
from front_blocker.supersolution import (
    EnergyGapViolation, MinimizerConfig, NotASupersolution, TruncatedGrid, energy, energy_change, energy_gradient,
    extend_and_certify, first_axial_mode, left_grid, lemma_gap_check, minimize_constrained, pde_residual,
    random_admissible, reference_profile, stabilize_in_R, weighted_norm_identity,
)

from conftest import BLOCK_SOBOLEV, H1, N_CROSS


@pytest.fixture(scope="module")
def small(square):
    """Coarse zero-drift grid on D_{-4}^{2}."""
    return TruncatedGrid.build(zero_drift(), square, -4.0, 2.0, 0.25, 2)


def test_reference_profile(small):
    w0 = reference_profile(small)
    x1 = small.grid.x1
    line = w0.values[:, 0, 0]
    assert np.all(line[x1 <= 0] == 0.0)
    assert line[-1] == 1.0
    inner = (x1 > 0) & (x1 < 2.0)
    assert np.allclose(line[inner], x1[inner] / 2.0, rtol=0, atol=1e-15)
    assert w0.check_tags()
    assert np.all(w0.values == w0.values[:, :1, :1])


def test_truncated_grid_rejects(square):
    d = concentrated(0.5, 2.0)
    with pytest.raises(ValueError):
        TruncatedGrid.build(d, square, -1.0, 2.0, 0.25)
    with pytest.raises(ValueError):
        TruncatedGrid.build(d, square, -4.0, 0.0, 0.25)


def test_weighted_norm_identity_second_order(square):
    d = concentrated(0.5, 8.0)
    errs = []
    for h in (0.25, 0.125, 0.0625):
        disc, closed = weighted_norm_identity(TruncatedGrid.build(d, square, -6.0, 3.0, h, 4))
        errs.append(abs(disc - closed))
    assert errs[-1] / closed < 2e-4
    for e1, e2 in zip(errs, errs[1:]):
        assert e1 / e2 == pytest.approx(4.0, rel=0.05)


def test_energy_examples(small, cubic, consts, square):
    ones = np.ones(small.grid.shape)
    assert energy(small.ops, ones, cubic) == pytest.approx(0.0, abs=1e-14)
    zeros = np.zeros(small.grid.shape)
    assert energy(small.ops, zeros, cubic) == pytest.approx(consts.F0 * 6.0 * square.measure, rel=1e-12)


def test_reference_energy_on_right_piece(cubic, consts, square):
    d = concentrated(0.5, 2.0)
    a = 3.0
    tg = TruncatedGrid.build(d, square, -4.0, a, 0.125, 2)
    i0 = tg.grid.index_of(0.0)
    from front_blocker.grid import CylinderGrid
    sub = CylinderGrid(tg.grid.x1[i0:], square, 2)
    ops = build_operators(sub, d)
    J = energy(ops, reference_profile(tg).values[i0:], cubic)
    beta = (1 / (2 * a) + a * consts.Fmax) * square.measure
    assert J <= beta * math.exp(-2.0)


def test_energy_change_matches_difference(small, cubic):
    rng = np.random.default_rng(0)
    w = rng.uniform(-0.5, 1.5, small.grid.shape)
    t = w + 1e-3 * rng.normal(size=w.shape)
    direct = energy(small.ops, t, cubic) - energy(small.ops, w, cubic)
    assert energy_change(small.ops, w, t, cubic) == pytest.approx(direct, rel=1e-8, abs=1e-14)


def test_gradient_componentwise(cubic, square):
    tg = TruncatedGrid.build(concentrated(0.5, 3.0), square, -3.0, 1.0, 0.25, 2)
    rng = np.random.default_rng(1)
    w = rng.uniform(-0.2, 1.2, tg.grid.shape)
    g = energy_gradient(tg.ops, w, cubic)
    h = 1e-6
    for idx in [tuple(rng.integers(0, s) for s in tg.grid.shape) for _ in range(30)]:
        e = np.zeros_like(w)
        e[idx] = h
        fd = (energy(tg.ops, w + e, cubic) - energy(tg.ops, w - e, cubic)) / (2 * h)
        assert fd == pytest.approx(g[idx], rel=1e-5, abs=1e-9)


def test_tiny_delta_returns_reference(small, cubic):
    res = minimize_constrained(small, cubic, 1e-12)
    w0 = reference_profile(small).values
    assert small.ops.norm(res.w.values - w0) <= 1e-12 * (1 + 1e-9)
    assert np.max(np.abs(res.w.values - w0)) < 1e-10


def test_minimizer_rejects_bad_delta(small, cubic):
    with pytest.raises(ValueError):
        minimize_constrained(small, cubic, 0.0)


def test_sphere_energy_gap(blocking, cubic, square):
    """On the sphere ||w - w0|| = delta every sample has higher energy than w0."""
    tg = blocking["stab"].grids[0]
    delta = blocking["report"].delta
    w0 = reference_profile(tg).values
    J0 = energy(tg.ops, w0, cubic)
    rng = np.random.default_rng(11)
    for _ in range(20):
        v = random_admissible(tg.grid, rng)
        v[-1] = 0.0
        v /= tg.ops.norm(v)
        assert energy(tg.ops, w0 + delta * v, cubic) > J0


def test_energy_gap_zero_drift(cubic, consts, square):
    d = zero_drift()
    grid = left_grid(d, square, -4.0, 0.25, 2)
    ops = build_operators(grid, d)
    delta = 0.05
    rng = np.random.default_rng(5)
    samples = []
    for _ in range(10):
        v = random_admissible(grid, rng)
        samples.append(v * delta * rng.uniform(0.1, 1.0) / ops.norm(v))
    mode = first_axial_mode(grid)
    samples.append(mode * delta / ops.norm(mode))
    rep = lemma_gap_check(grid, d, cubic, consts.alpha, delta, samples)
    assert rep.passed and len(rep.slacks) == 11
    with pytest.raises(EnergyGapViolation):
        lemma_gap_check(grid, d, cubic, 10.0, delta, samples)
    assert not lemma_gap_check(grid, d, cubic, 10.0, delta, samples, raise_on_failure=False).passed


def test_energy_gap_rejects_bad_samples(cubic, consts, square):
    d = zero_drift()
    grid = left_grid(d, square, -4.0, 0.25, 2)
    bad = np.ones(grid.shape)
    with pytest.raises(ValueError, match="vanish"):
        lemma_gap_check(grid, d, cubic, consts.alpha, 1.0, [bad])
    mode = first_axial_mode(grid)
    with pytest.raises(ValueError, match="norm"):
        lemma_gap_check(grid, d, cubic, consts.alpha, 1e-6, [mode])


def test_first_axial_mode(square):
    grid = left_grid(zero_drift(), square, -4.0, 0.125, 2)
    m = first_axial_mode(grid)
    assert np.all(m[0] == 0.0)
    assert m[-1, 0, 0] == pytest.approx(1.0)
    assert (m[-1, 0, 0] - m[-2, 0, 0]) / 0.125 < 0.01


def test_stabilize_rejects_unsorted(cubic, square):
    with pytest.raises(ValueError):
        stabilize_in_R(zero_drift(), square, cubic, 0.1, [-6.0, -4.0], 2.0, 0.25, 2)


def test_blocking_minimiser(blocking):
    st = blocking["stab"]
    for r in st.results:
        assert r.converged and not r.constraint_active
        assert r.el_residual < 1e-5
        assert r.energy <= r.energy_w0
        assert r.w_min >= 0.0 and r.w_max <= 1.0
        assert r.distance_to_w0 < blocking["report"].delta
    assert st.decreasing
    assert len(st.cauchy_gaps) == 2 and st.cauchy_gaps[1] < st.cauchy_gaps[0]
    w = st.w_inf
    assert w.check_tags()
    # far field: the minimiser decays toward 0 at the left end
    assert np.max(w.values[1]) < 1e-3


def test_certificate(blocking, cubic):
    cert = blocking["cert"]
    assert cert.passed, cert.failures
    assert cert.interior_residual < 1e-5
    assert cert.junction_slope_min >= 0.0
    assert 0.0 <= cert.w_min and cert.w_max <= 1.0
    ext = cert.extended.values
    n = blocking["stab"].w_inf.values.shape[0]
    assert np.all(ext[n:] == 1.0)


def test_certificate_detects_damage(blocking, cubic):
    w = blocking["stab"].w_inf
    from front_blocker.supersolution import DiscreteField
    bad = w.values.copy()
    mid = bad.shape[0] // 2
    bad[mid] += 0.05
    with pytest.raises(NotASupersolution):
        extend_and_certify(DiscreteField(bad, w.grid), blocking["drift"], cubic)


def test_pde_residual_agrees_off_support(blocking, cubic):
    """Central differences with the exact drift reproduce the discrete EL equation away from the drift slab."""
    w = blocking["stab"].w_inf
    res = pde_residual(w.grid, blocking["drift"], w.values, cubic)
    x1 = w.grid.x1
    off = (x1 < -blocking["drift"].x0 - 0.1) | (x1 > 0.1)
    assert np.max(np.abs(res[off])) < 1e-3
