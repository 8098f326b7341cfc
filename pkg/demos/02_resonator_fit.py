"""Fit a noisy synthetic notch trace and recover the resonator parameters."""

import numpy as np

from cryospin import fitkit, fixtures
from cryospin.cavity import dip_metrics, s21_bare

res = fixtures.RESONATOR_AFTER.replace(amp_A=0.8, alpha=1.1, tau_delay=0.25, psi=0.05)
x = np.linspace(res.omega_c - 2.5, res.omega_c + 2.5, 2001)
rng = np.random.default_rng(1)
y = s21_bare(res, x) + 0.004 * (rng.standard_normal(x.size) + 1j * rng.standard_normal(x.size))

m = dip_metrics(res)
print(f"true dip: minimum {m.omega_min:.4f} MHz, FWHM {m.fwhm * 1e3:.1f} kHz, depth {m.depth:.3f}")

fit = fitkit.fit_resonator(x, y)
print("converged:", fit.converged, "in", fit.iterations, "iterations")
for k in ("omega_c", "kappa_i", "kappa_e", "amp_A", "tau_delay", "psi"):
    print(f"  {k:9s} {fit.estimates[k]:12.6f} +- {fit.uncertainties[k]:.2e}   (true {getattr(res, k)})")

# magnitude-only data cannot see the carrier phase or delay; those are fixed
power = fitkit.fit_resonator(x, np.abs(y) ** 2)
print("power-only fit fixed:", sorted(power.fixed), "kappa =", round(power.estimates["kappa"], 5))
