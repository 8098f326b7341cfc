import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cryospin import fixtures as fx
from cryospin.cavity import ResonatorParams, background, dip_metrics, s21_bare


def test_far_off_resonance_is_background():
    res = fx.RESONATOR_AFTER.replace(amp_A=0.7, alpha=0.3, tau_delay=0.01)
    w = res.omega_c + 1e6 * res.kappa
    assert abs(s21_bare(res, w)) == pytest.approx(0.7, rel=1e-6)


def test_on_resonance_value():
    res = ResonatorParams(3713.7, 0.118, 0.163)
    s = s21_bare(res, res.omega_c)
    assert s.imag == 0.0
    assert s.real == pytest.approx(1 - 0.163 / 0.281, abs=1e-15)


def test_fixture_values():
    assert (fx.RESONATOR_BEFORE.omega_c, fx.RESONATOR_BEFORE.kappa_e, fx.RESONATOR_BEFORE.kappa_i) == (3750.0, 0.195, 0.070)
    assert (fx.RESONATOR_AFTER.omega_c, fx.RESONATOR_AFTER.kappa_e, fx.RESONATOR_AFTER.kappa_i) == (3713.7, 0.163, 0.118)
    assert fx.RESONATOR_COUPLED.kappa == pytest.approx(0.265)


@pytest.mark.parametrize("kw", [dict(omega_c=0.0), dict(kappa_i=-1e-3), dict(kappa_e=0.0), dict(amp_A=0.0)])
def test_invalid_params(kw):
    base = dict(omega_c=3713.7, kappa_i=0.1, kappa_e=0.2)
    base.update(kw)
    with pytest.raises(ValueError):
        ResonatorParams(**base)


def _dense_oracle(res, n=400001, span=20):
    w = np.linspace(res.omega_c - span * res.kappa, res.omega_c + span * res.kappa, n)
    p = np.abs(s21_bare(res, w)) ** 2 / res.amp_A**2
    k = np.argmin(p)
    level = 1 - (1 - p[k]) / 2
    inside = np.flatnonzero(p < level)
    return w[k], w[inside[-1]] - w[inside[0]], w[1] - w[0]


@pytest.mark.parametrize("res", [fx.RESONATOR_BEFORE, fx.RESONATOR_AFTER])
def test_dip_symmetric_notch(res):
    m = dip_metrics(res)
    assert m.omega_min == pytest.approx(res.omega_c, abs=1e-9 * res.omega_c)
    w_min, width, step = _dense_oracle(res)
    assert m.fwhm == pytest.approx(width, abs=3 * step)
    assert m.fwhm == pytest.approx(res.kappa, rel=1e-2)
    assert m.depth == pytest.approx(1 - (res.kappa_i / res.kappa) ** 2, rel=1e-9)


def test_mismatch_phase_shifts_minimum():
    up = dip_metrics(fx.RESONATOR_AFTER.replace(psi=0.3))
    down = dip_metrics(fx.RESONATOR_AFTER.replace(psi=-0.3))
    oracle_up = _dense_oracle(fx.RESONATOR_AFTER.replace(psi=0.3))[0]
    shift_up = up.omega_min - fx.RESONATOR_AFTER.omega_c
    shift_down = down.omega_min - fx.RESONATOR_AFTER.omega_c
    assert abs(shift_up) > 1e-4
    assert np.sign(shift_up) == -np.sign(shift_down)
    assert up.omega_min == pytest.approx(oracle_up, abs=1e-4)


def test_vanishing_external_coupling_is_background():
    res = fx.RESONATOR_AFTER.replace(kappa_e=1e-300, alpha=0.2, tau_delay=0.05)
    w = np.linspace(3710, 3717, 101)
    assert np.allclose(s21_bare(res, w), background(res, w), rtol=0, atol=1e-15)


rates = st.floats(min_value=1e-3, max_value=1.0)


@given(rates, rates, st.floats(min_value=-1.5, max_value=1.5), st.floats(min_value=0.1, max_value=2.0))
def test_bounded_fano_excursion(ki, ke, psi, amp):
    res = ResonatorParams(3713.7, ki, ke, amp_A=amp, psi=psi)
    w = np.linspace(3713.7 - 5, 3713.7 + 5, 2001)
    assert np.all(np.abs(s21_bare(res, w)) <= amp * (1 + ke / (ki + ke)) * (1 + 1e-12))


@given(rates, rates, st.floats(min_value=0.0, max_value=3.0))
def test_symmetric_notch_mirror(ki, ke, d):
    res = ResonatorParams(3713.7, ki, ke)
    lo, hi = s21_bare(res, 3713.7 - d), s21_bare(res, 3713.7 + d)
    assert abs(lo) == pytest.approx(abs(hi), rel=1e-12)
    # the resonant term returns to the background on both sides
    assert np.angle(lo) == pytest.approx(-np.angle(hi), abs=1e-12)
