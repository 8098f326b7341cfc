"""Baseline-normalise a synthetic absorption spectrum and estimate the Na density."""

import numpy as np

from cryospin import fixtures, optics

wl = np.arange(400.0, 850.5, 0.5)
s = 20.0 / 2.3548
rng = np.random.default_rng(3)
raw = 0.25 + 3e-4 * (wl - 400) + 1.5 * np.exp(-0.5 * ((wl - 586.0) / s) ** 2) + 0.01 * rng.standard_normal(wl.size)

spec = optics.normalize_od(optics.OdSpectrum(wl, raw))
print("OD at the anchors after normalisation:", optics.local_od(spec, 450), optics.local_od(spec, 800))
print("peak at", wl[np.argmax(spec.od)], "nm")

area = optics.integrate_od(spec, 550.0, 620.0)
n = optics.estimate_density(area, 0.98, 17.0)
print(f"integrated OD {area:.2f} nm, density {n:.2e} cm^-3 ({n / fixtures.NA_DENSITY_CM3:.1f} x the quoted 3e16)")
