"""Dispersive readout: hole burning maps the spin line, and repolarisation after cooling gives T1."""

import numpy as np

from cryospin import dynamics, fitkit, fixtures

res = fixtures.RESONATOR_COUPLED

ens = fixtures.ensemble(omega_a=res.omega_c - fixtures.HOLEBURN_DETUNING)
scan = dynamics.hole_burning_scan(res, ens, 0.05, ens.omega_a + np.linspace(-3, 3, 301))
rep = dynamics.hole_burning_report(scan, fixtures.gamma_perp())
print(f"hole-burning fit: FWHM {rep['gamma_q'] * 1e3:.1f} kHz, effective linewidth {rep['effective_linewidth'] * 1e3:.1f} kHz")

far = fixtures.ensemble(omega_a=res.omega_c + fixtures.DISPERSIVE_DETUNING)
print(f"full-polarisation cavity pull at 28 MHz detuning: {dynamics.dispersive_shift(res, far) * 1e3:.2f} kHz")

sched = dynamics.ramp_schedule(fixtures.T_HOT, fixtures.T_COLD, fixtures.RAMP_MK_PER_MIN * 1e-3, 0.0, 120.0)
times = np.linspace(0.0, sched[-1][0], 481)
out = dynamics.t1_repolarization(fixtures.atom(), fixtures.CROSSING_FIELD_G, sched, fixtures.T1_MIN,
                                 res=res, ens=far, times=times)
t = times - out.t_quench
keep = t >= 4.5  # the ramp reaches base temperature after 4.5 min
fit = fitkit.fit_decay(t[keep], out.delta_omega[keep], "stretched-sqrt")
print(f"stretched-exponential T1 = {fit.estimates['T']:.3f} min")
for k in (0, 45, 60, 120, 240, 480):
    print(f"  t = {times[k]:6.1f} min  T = {out.temperature[k] * 1e3:5.1f} mK  shift = {out.delta_omega[k] * 1e3:7.3f} kHz")
