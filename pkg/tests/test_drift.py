import math

import numpy as np
import pytest

from front_blocker.drift import (
    AxialBump, CrossSection, DriftError, DriftField, GridPotential, concentrated, line_integral_k1,
    load_axial_profile, load_grid_potential, summarize, zero_drift,
)


def _scalar(v):
    """Value of a size-one array or scalar."""
    return np.asarray(v).item()


def test_cross_section():
    cs = CrossSection((2.0, 0.5))
    assert cs.n == 3 and cs.measure == 1.0
    with pytest.raises(DriftError):
        CrossSection((1.0,))
    with pytest.raises(DriftError):
        CrossSection((1.0, 0.0))


def test_line_integral_examples():
    assert float(line_integral_k1(zero_drift(), -0.3)) == 0.0
    d = concentrated(0.2, 3.0)
    assert float(line_integral_k1(d, 0.0)) == pytest.approx(3.0)
    assert float(line_integral_k1(d, -0.1)) == pytest.approx(1.5)
    assert float(line_integral_k1(d, -5.0)) == 0.0
    assert float(line_integral_k1(d, 4.0)) == pytest.approx(3.0)


def _grid_drift():
    x1 = np.linspace(-1.0, 0.0, 401)
    y2 = np.linspace(0.0, 1.0, 21)
    y3 = np.linspace(0.0, 1.0, 21)
    X, Y, Z = np.meshgrid(x1, y2, y3, indexing="ij")
    s = (X + 1.0)
    # constant in y at both ends, varies across the section in between
    H = 2.0 * s**2 * (3 - 2 * s) + 0.3 * np.sin(np.pi * s) ** 2 * np.cos(np.pi * Y) * np.cos(np.pi * Z)
    return DriftField(GridPotential(tuple(x1), (tuple(y2), tuple(y3)), H))


@pytest.mark.parametrize("maker", [lambda: concentrated(0.3, 2.0),
                                   lambda: DriftField(AxialBump.from_function(lambda x: np.sin(3 * x) ** 2, 1.0)),
                                   _grid_drift])
def test_potential_reproduces_drift(maker):
    d = maker()
    rng = np.random.default_rng(0)
    x0 = d.x0
    h = 1e-5
    for _ in range(20):
        x = rng.uniform(-0.9 * x0, -0.1 * x0)
        y = rng.uniform(0.1, 0.9, 2)
        fd = (d.potential(x + h, y) - d.potential(x - h, y)) / (2 * h)
        k = d.drift(np.array(x), y, 3)[0]
        # multilinear potential vs interpolated nodal gradient: O(h) apart on the grid
        tol = 1e-6 if d.axial else 5e-2
        assert _scalar(fd) == pytest.approx(k, abs=tol)


@pytest.mark.parametrize("maker", [lambda: concentrated(0.3, 2.0), _grid_drift])
def test_drift_vanishes_outside_support(maker):
    d = maker()
    y = np.array([0.3, 0.6])
    for x in (-d.x0 - 0.5, -d.x0 - 1e-3, 1e-3, 2.0):
        h = 1e-6
        fd = (d.potential(x + h, y) - d.potential(x - h, y)) / (2 * h)
        assert abs(_scalar(fd)) < 1e-10
        assert np.all(d.drift(np.array(x), y, 3) == 0.0)


def test_weight_normalisation_and_factorisation():
    d = _grid_drift()
    y = np.array([0.2, 0.7])
    assert _scalar(d.weight(-1.0, y)) == pytest.approx(1.0, abs=1e-12)
    assert _scalar(d.weight(-7.0, y)) == pytest.approx(1.0, abs=1e-12)
    for x in np.linspace(-1, 0, 11):
        assert _scalar(d.weight(x, y)) == pytest.approx(math.exp(-_scalar(line_integral_k1(d, x, y))), rel=1e-14)
    assert _scalar(d.weight(0.0, y)) == _scalar(d.weight(3.0, y))


def test_summary_zero_drift():
    cs = CrossSection((1.0, 2.0))
    s = summarize(zero_drift(0.7), cs, [2.0, 4.0])
    assert s.net_drift == 0.0 and s.sup_exp_neg == 1.0
    assert s.exp_integral_at(4.0) == pytest.approx(0.7 * 2.0, rel=1e-14)
    assert s.exp_integral_at(2.0) == pytest.approx(0.7 * 2.0, rel=1e-14)


def test_summary_concentrated_closed_form():
    cs = CrossSection((1.0, 1.0))
    eps, C = 0.05, 3.0
    s = summarize(concentrated(eps, C), cs, [4.0])
    assert s.net_drift == pytest.approx(C, rel=1e-14)
    assert s.exp_integral_at(4.0) == pytest.approx(cs.measure / (4 * C) * math.expm1(4 * C) * eps, rel=1e-6)
    assert s.psi_ratio == pytest.approx(math.exp(-C), rel=1e-12)


def test_summary_constant_bump():
    cs = CrossSection((1.0, 1.5))
    s = summarize(DriftField(AxialBump.constant(1.0, 1.0)), cs, [2.0])
    assert s.net_drift == pytest.approx(1.0, rel=1e-14)
    assert s.sup_exp_neg == pytest.approx(1.0, rel=1e-14)
    assert s.exp_integral_at(2.0) == pytest.approx(cs.measure * math.expm1(2.0) / 2.0, rel=1e-8)


def test_summary_psi_ratio_identity():
    cs = CrossSection((1.0, 1.0))
    d = DriftField(AxialBump.from_function(lambda x: 1 + np.cos(4 * x), 0.8))
    s = summarize(d, cs, [4.0])
    assert s.psi_ratio == pytest.approx(math.exp(-s.net_drift), rel=1e-8)


def test_sign_flip():
    cs = CrossSection((1.0, 1.0))
    g = DriftField(AxialBump.from_function(lambda x: np.sin(5 * x) + 0.3, 1.0))
    pos, neg = summarize(g, cs, [4.0]), summarize(g.scaled(-1.0), cs, [4.0])
    assert neg.net_drift == pytest.approx(-pos.net_drift, rel=1e-12)
    # sup of exp(+int k1) for g is the sup of exp(-int k1) for -g
    x = np.linspace(-1, 0, 20001)
    assert neg.sup_exp_neg == pytest.approx(np.exp(line_integral_k1(g, x)).max(), rel=1e-6)


def test_small_C_limit():
    cs = CrossSection((1.0, 1.0))
    z = summarize(zero_drift(0.1), cs, [4.0])
    prev = None
    for C in (1e-1, 1e-3, 1e-6):
        s = summarize(concentrated(0.1, C), cs, [4.0])
        gap = abs(s.exp_integral_at(4.0) - z.exp_integral_at(4.0)) + abs(s.net_drift)
        assert prev is None or gap < prev
        prev = gap
    assert prev < 1e-5


def test_gauge_leaves_summary():
    cs = CrossSection((1.0, 1.0))
    d = concentrated(0.4, 2.0)
    assert summarize(d, cs, [4.0]) == summarize(d.with_gauge(7.3), cs, [4.0])


def test_loaders(tmp_path):
    p = tmp_path / "g.csv"
    x = np.linspace(-1, 0, 11)
    p.write_text("x1,g\n" + "\n".join(f"{a!r},1.0" for a in x.tolist()))
    d = load_axial_profile(p, 1.0)
    assert float(line_integral_k1(d, 0.0)) == pytest.approx(1.0)
    q = tmp_path / "H.csv"
    rows = ["x1,y2,y3,H"]
    for a in np.linspace(-1, 0, 5).tolist():
        for b in (0.0, 1.0):
            for c in (0.0, 1.0):
                rows.append(f"{a!r},{b!r},{c!r},{2 * (a + 1)!r}")
    q.write_text("\n".join(rows))
    g = load_grid_potential(q)
    assert _scalar(line_integral_k1(g, -0.5, np.array([0.5, 0.5]))) == pytest.approx(1.0)
    bad = tmp_path / "bad.csv"
    bad.write_text("x1,g\n0,1\nfoo,bar\n")
    with pytest.raises(ValueError, match="bad.csv:3"):
        load_axial_profile(bad, 1.0)


def test_grid_potential_must_be_flat_at_ends():
    x1 = (-1.0, 0.0)
    axes = ((0.0, 1.0), (0.0, 1.0))
    vals = np.zeros((2, 2, 2))
    vals[1, 0, 0] = 1.0
    with pytest.raises(DriftError):
        DriftField(GridPotential(x1, axes, vals))
