import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from front_blocker.nonlinearity import extend, make_cubic
from front_blocker.traveling_wave import WaveProfile, ode_residual, solve_wave, wave_at


def exact_profile(theta, z):
    """Closed-form cubic wave 1/(1+exp(-(z - z*)/sqrt 2)) shifted so that phi(0) = theta."""
    zs = math.sqrt(2.0) * math.log((1.0 - theta) / theta)
    return 1.0 / (1.0 + np.exp(-(np.asarray(z) - zs) / math.sqrt(2.0)))


@pytest.mark.parametrize("theta", [0.25, 0.4])
def test_speed_examples(theta):
    w = solve_wave(extend(make_cubic(theta)))
    assert w.c == pytest.approx(math.sqrt(2.0) * (0.5 - theta), abs=1e-4)


def test_normalisation(wave):
    assert float(wave_at(wave, 0.0)) == pytest.approx(0.25, abs=1e-10)


def test_profile_matches_closed_form(wave):
    z = np.linspace(-20, 20, 801)
    assert np.max(np.abs(wave_at(wave, z) - exact_profile(0.25, z))) < 1e-6


def test_tails(wave):
    assert abs(float(wave_at(wave, -1e6))) <= 1e-12
    assert abs(float(wave_at(wave, 1e6)) - 1.0) <= 1e-12
    assert wave.phi[0] < 1e-4 and wave.phi[-1] > 1 - 1e-4


def test_profile_invariants(wave, cubic):
    assert np.all(np.diff(wave.phi) > 0)
    assert np.all((wave.phi > 0) & (wave.phi < 1))
    assert np.max(np.abs(ode_residual(wave, cubic))) < 1e-6


@settings(max_examples=100, deadline=None)
@given(z1=st.floats(-60, 60), z2=st.floats(-60, 60))
def test_monotone_pairs(wave, z1, z2):
    lo, hi = sorted((z1, z2))
    # monotone up to interpolation round-off
    assert float(wave_at(wave, lo)) <= float(wave_at(wave, hi)) + 4e-16


def test_translation_leaves_speed(cubic, wave):
    other = solve_wave(cubic, anchor=0.7)
    assert other.c == wave.c
    shifted = WaveProfile(wave.c, wave.z + 3.0, wave.phi, wave.lam_left, wave.lam_right, wave.mismatch,
                          wave._interp)
    assert np.max(np.abs(ode_residual(shifted, cubic) - ode_residual(wave, cubic))) == 0.0


@pytest.mark.parametrize("theta,sign", [(0.45, 1), (0.55, -1)])
def test_speed_sign_follows_integral(theta, sign):
    w = solve_wave(extend(make_cubic(theta, allow_unbalanced=True)))
    assert np.sign(w.c) == sign
    assert w.c == pytest.approx(math.sqrt(2.0) * (0.5 - theta), abs=1e-4)
