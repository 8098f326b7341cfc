import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from cryospin import atomkit
from cryospin import dynamics as dy
from cryospin import ensemble as en
from cryospin import fixtures as fx
from cryospin.cavity import locate_dip
from cryospin.fitkit import fit_decay


def small_ensemble(sigma=0.3, n=401, omega_a=fx.CAVITY_MHZ, g=0.95):
    return en.discretize(en.SpinDistribution(omega_a, sigma), n, g_coll=g, gamma_perp=0.05)


# -- echoes --------------------------------------------------------------------

def test_hahn_refocuses_fully_without_decay():
    ens = fx.ensemble()
    for tau in (10.0, 100.0, 437.0):
        amp = dy.run_sequence(ens, dy.hahn_sequence(tau), record=False).echoes["echo"]
        assert amp == pytest.approx(1.0, abs=1e-12)


def test_hahn_decay_recovers_t2():
    taus_us = np.arange(50.0, 650.0, 50.0)
    train = dy.hahn_decay(fx.ensemble(), taus_us, dy.DecayParams(T2_hom=fx.T2_HAHN_MS))
    assert np.allclose(train.amplitudes, np.exp(-2 * taus_us * 1e-3 / fx.T2_HAHN_MS), rtol=1e-10)
    fit = fit_decay(taus_us * 1e-3, train.amplitudes, "hahn-2tau")
    assert fit.converged
    assert fit.estimates["T"] == pytest.approx(fx.T2_HAHN_MS, rel=0.02)


def test_fid_matches_gaussian_decay():
    sigma = 0.42
    ens = en.discretize(en.SpinDistribution(0.0, sigma), 2001)
    res = dy.run_sequence(ens, dy.fid_sequence(3.0), sample_step=0.01)
    t = res.times[1:]
    oracle = np.exp(-0.5 * (2 * math.pi * sigma * t) ** 2)
    assert np.max(np.abs(np.abs(res.signal[1:]) - oracle)) < 1e-6


def test_cpmg_recovers_t2_and_count():
    train = dy.cpmg(fx.ensemble(), fx.CPMG_N, fx.CPMG_TAU_US, dy.DecayParams(T2_hom=fx.T2_CPMG_MS))
    assert train.amplitudes.size == 25
    assert np.allclose(train.times, 2 * fx.CPMG_TAU_US * np.arange(1, 26))
    fit = fit_decay(train.times * 1e-3, train.amplitudes, "exp")
    assert fit.estimates["T"] == pytest.approx(fx.T2_CPMG_MS, rel=0.02)


def test_cpmg_without_decay_is_flat():
    train = dy.cpmg(fx.ensemble(), 25, 100.0)
    assert np.allclose(train.amplitudes, 1.0, atol=1e-10)


def _oracle_cpmg(detunings, weights, N, tau, flip_error, refocus):
    """Independent 3x3-matrix propagation of the same sequence."""
    axis = {"x": [1.0, 0, 0], "y": [0, 1.0, 0]}[refocus]
    R90 = Rotation.from_rotvec([math.pi / 2, 0, 0]).as_matrix()
    Rpi = Rotation.from_rotvec(np.array(axis) * math.pi * (1 + flip_error)).as_matrix()
    out = np.zeros(N, dtype=complex)
    for d, q in zip(detunings, weights):
        # free precession m -> m exp(2 pi i d t) is a rotation about +z by 2 pi d t
        Rz = Rotation.from_rotvec([0, 0, 2 * math.pi * d * tau]).as_matrix()
        r = R90 @ np.array([0.0, 0.0, -1.0])
        for k in range(N):
            r = Rz @ Rpi @ Rz @ r
            out[k] += q * (r[0] + 1j * r[1])
    return np.abs(out)


@pytest.mark.parametrize("refocus", ["x", "y"])
def test_flip_error_against_matrix_oracle(refocus):
    ens = small_ensemble(sigma=0.3, n=61)
    train = dy.cpmg(ens, 8, 20.0, flip_error=0.05, refocus_axis=refocus)
    oracle = _oracle_cpmg(ens.detunings, ens.weights, 8, 20.0, 0.05, refocus)
    assert np.allclose(train.amplitudes, oracle, atol=1e-10)


def test_cpmg_phase_is_robust_to_flip_errors():
    ens = small_ensemble(sigma=0.3, n=201)
    y = dy.cpmg(ens, 20, 20.0, flip_error=0.05, refocus_axis="y").amplitudes
    x = dy.cpmg(ens, 20, 20.0, flip_error=0.05, refocus_axis="x").amplitudes
    assert y[-1] > 0.95
    assert x[-1] < y[-1] - 0.1


def test_echo_peak_at_twice_tau():
    ens = en.discretize(en.SpinDistribution(0.0, 0.5), 801)
    tau = 5.0
    res = dy.run_sequence(ens, dy.hahn_sequence(tau), sample_step=0.01)
    amp = np.abs(res.signal)
    mask = res.times > tau + 1e-9
    k = np.argmax(np.where(mask, amp, 0.0))
    assert abs(res.times[k] - 2 * tau) <= 0.01 + 1e-12


@given(st.floats(min_value=0.01, max_value=0.3), st.floats(min_value=0.5, max_value=2.0))
def test_cpmg_independent_of_inhomogeneity(err, sigma):
    ens = en.discretize(en.SpinDistribution(0.0, sigma), 101)
    ref = en.discretize(en.SpinDistribution(0.0, 1e-6), 101)
    a = dy.cpmg(ens, 6, 10.0).amplitudes
    b = dy.cpmg(ref, 6, 10.0).amplitudes
    assert np.allclose(a, b, atol=1e-9)


angles = st.floats(min_value=-10.0, max_value=10.0)


@given(st.lists(st.tuples(st.sampled_from(sorted(dy.AXES)), angles, st.floats(min_value=0, max_value=5.0)),
                min_size=1, max_size=8))
def test_norm_conserved_without_relaxation(events):
    ens = en.discretize(en.SpinDistribution(0.0, 0.7), 51)
    seq = []
    for axis, angle, delay in events:
        seq += [dy.Pulse(axis, angle), dy.Delay(delay)]
    res = dy.run_sequence(ens, dy.PulseSequence(seq), record=False)
    assert np.allclose(res.final_state.norms(), 1.0, atol=1e-12)


@given(angles)
def test_rotation_matches_scipy(angle):
    st_ = dy.BlochState([0.0], [1.0], m=[0.3 + 0.4j], w=[-math.sqrt(0.75)])
    st_.rotate(dy.AXES["y"], angle)
    r = Rotation.from_rotvec([0, angle, 0]).apply([0.3, 0.4, -math.sqrt(0.75)])
    assert np.allclose([st_.m[0].real, st_.m[0].imag, st_.w[0]], r, atol=1e-12)


def test_t2_gamma_conversion():
    assert dy.t2_from_gamma_perp(dy.gamma_perp_from_t2(0.92)) == pytest.approx(0.92)
    assert dy.t2_from_gamma_perp(0.0) == math.inf


def test_sequence_json_round_trip():
    seq = dy.cpmg_sequence(3, 12.5, flip_error=0.02)
    again = dy.PulseSequence.from_json(seq.to_json())
    for a, b in zip(seq.events, again.events):
        assert type(a) is type(b)
        if isinstance(a, dy.Pulse):
            assert a.axis == b.axis and a.angle == pytest.approx(b.angle, rel=1e-15)
        else:
            assert a == b
    assert again.tags == ["echo1", "echo2", "echo3"]
    with pytest.raises(ValueError):
        dy.PulseSequence.from_json([{"pulse": {"axis": "z", "angle_pi": 1}}])
    with pytest.raises(ValueError):
        dy.PulseSequence.from_json([{"wait": 3}])


def test_invalid_sequences():
    with pytest.raises(ValueError):
        dy.cpmg_sequence(0, 10.0)
    with pytest.raises(ValueError):
        dy.Delay(-1.0)


# -- dispersive shift ---------------------------------------------------------

def test_unpolarised_ensemble_does_not_pull():
    ens = fx.ensemble(omega_a=fx.CAVITY_MHZ - 28.0)
    assert dy.dispersive_shift(fx.RESONATOR_COUPLED, ens, 0.0) == 0.0


def test_shift_scales_with_coupling_squared():
    a = small_ensemble(omega_a=fx.CAVITY_MHZ - 28.0, g=0.5)
    b = small_ensemble(omega_a=fx.CAVITY_MHZ - 28.0, g=1.0)
    ratio = dy.dispersive_shift(fx.RESONATOR_COUPLED, b) / dy.dispersive_shift(fx.RESONATOR_COUPLED, a)
    assert ratio == pytest.approx(4.0, rel=1e-12)


def test_shift_matches_full_transmission():
    res = fx.RESONATOR_COUPLED
    ens = fx.ensemble(omega_a=res.omega_c - fx.DISPERSIVE_DETUNING)
    shift = dy.dispersive_shift(res, ens)
    assert shift == pytest.approx(0.95**2 / 28.0, rel=0.02)
    dip = locate_dip(lambda w: np.abs(en.s21_coupled(res, ens, w)) ** 2, res.omega_c, 0.5, 1.0)
    # the cavity moves away from the spins; the sign depends on the detuning convention
    assert abs(dip.omega_min - res.omega_c) == pytest.approx(abs(shift), rel=0.05)


def test_resonant_dispersive_model_rejected():
    with pytest.raises(ValueError):
        dy.dispersive_shift(fx.RESONATOR_COUPLED, fx.ensemble())


# -- hole burning ---------------------------------------------------------------

def _hb_ensemble():
    return fx.ensemble(omega_a=fx.CAVITY_MHZ - fx.HOLEBURN_DETUNING)


def test_hole_far_from_line_is_zero():
    ens = _hb_ensemble()
    scan = dy.hole_burning_scan(fx.RESONATOR_COUPLED, ens, 0.05, [ens.omega_a + 8.0, ens.omega_a - 8.0])
    assert np.all(np.abs(scan.shift) < 1e-12)


def test_hole_profile_tracks_inhomogeneous_line():
    ens = _hb_ensemble()
    x = ens.omega_a + np.linspace(-2.5, 2.5, 201)
    scan = dy.hole_burning_scan(fx.RESONATOR_COUPLED, ens, 0.05, x)
    # analytic: the saturated weight is the line convolved with the pulse profile
    s_line = fx.spin_distribution().sigma
    s_pulse = 0.05 / (2 * math.sqrt(2 * math.log(2)))
    s_tot = math.hypot(s_line, s_pulse)
    profile = np.exp(-0.5 * ((x - ens.omega_a) / s_tot) ** 2)
    r = np.corrcoef(-scan.shift, profile)[0, 1]
    assert r > 0.999


def test_hole_burning_fit_recovers_width():
    ens = _hb_ensemble()
    x = ens.omega_a + np.linspace(-2.5, 2.5, 251)
    scan = dy.hole_burning_scan(fx.RESONATOR_COUPLED, ens, 0.05, x)
    rep = dy.hole_burning_report(scan, gamma_perp=fx.gamma_perp())
    assert rep["gamma_q"] == pytest.approx(fx.SPIN_FWHM, rel=0.01)
    assert rep["effective_linewidth"] == pytest.approx(fx.EFFECTIVE_LINEWIDTH, rel=0.01)


def test_hole_area_grid_independent():
    ens = _hb_ensemble()
    coarse = dy.hole_burning_scan(fx.RESONATOR_COUPLED, ens, 0.05, ens.omega_a + np.linspace(-4, 4, 201))
    fine = dy.hole_burning_scan(fx.RESONATOR_COUPLED, ens, 0.05, ens.omega_a + np.linspace(-4, 4, 801))
    assert coarse.area() == pytest.approx(fine.area(), rel=1e-6)


def test_resonant_hole_burning_rejected():
    with pytest.raises(ValueError):
        dy.hole_burning_scan(fx.RESONATOR_COUPLED, fx.ensemble(), 0.05, [fx.CAVITY_MHZ])


# -- T1 repolarisation ----------------------------------------------------------

def _t1_kwargs():
    res = fx.RESONATOR_COUPLED
    return dict(res=res, ens=fx.ensemble(omega_a=res.omega_c + fx.DISPERSIVE_DETUNING))


def test_constant_temperature_stays_put():
    out = dy.t1_repolarization(fx.atom(), fx.CROSSING_FIELD_G, [(0.0, 0.05), (30.0, 0.05)], 8.23,
                               times=np.linspace(0, 30, 31))
    assert np.allclose(out.polarization, 1.0, atol=1e-12)
    assert np.allclose(out.populations, out.populations[0], atol=1e-14)
    spec = atomkit.zeeman_spectrum(fx.atom(), fx.CROSSING_FIELD_G)
    assert out.p_F1[0] == pytest.approx(atomkit.branch_population(spec, out.populations[0], -0.5), abs=1e-14)


def test_t1_recovered_from_ramp():
    sched = dy.ramp_schedule(fx.T_HOT, fx.T_COLD, fx.RAMP_MK_PER_MIN * 1e-3, hold_before=0.0, hold_after=120.0)
    times = np.linspace(0.0, sched[-1][0], 481)
    out = dy.t1_repolarization(fx.atom(), fx.CROSSING_FIELD_G, sched, fx.T1_MIN, "stretched-sqrt",
                               times=times, **_t1_kwargs())
    t_since = times - out.t_quench
    window = t_since >= 4.5
    fit = fit_decay(t_since[window], out.delta_omega[window], "stretched-sqrt")
    assert fit.estimates["T"] == pytest.approx(fx.T1_MIN, rel=0.03)


def test_step_schedule_forms():
    sched = [(0.0, 0.5), (0.0, 0.05), (200.0, 0.05)]
    times = np.linspace(0.0, 200.0, 401)
    simple = dy.t1_repolarization(fx.atom(), fx.CROSSING_FIELD_G, sched, 8.0, "simple", times=times)
    stretched = dy.t1_repolarization(fx.atom(), fx.CROSSING_FIELD_G, sched, 8.0, "stretched-sqrt", times=times)
    a = 1 - simple.polarization
    b = 1 - stretched.polarization
    assert np.allclose(a / a[0], np.exp(-times / 8.0), atol=1e-9)
    assert np.allclose(b / b[0], np.exp(-np.sqrt(times / 8.0)), atol=1e-9)
    # stretched at t equals simple at t' = sqrt(t T1)
    t_prime = np.sqrt(times * 8.0)
    assert np.allclose(b / b[0], np.interp(t_prime, times, a / a[0]), atol=2e-3)


def test_t1_validation():
    with pytest.raises(ValueError):
        dy.t1_repolarization(fx.atom(), 777.0, [(0.0, 0.05), (1.0, 0.05)], 0.0)
    with pytest.raises(ValueError):
        dy.t1_repolarization(fx.atom(), 777.0, [(1.0, 0.05), (0.0, 0.05)], 8.0)
    with pytest.raises(ValueError):
        dy.t1_repolarization(fx.atom(), 777.0, [(0.0, 0.05), (1.0, 0.05)], 8.0, "weird")
