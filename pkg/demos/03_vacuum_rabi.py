"""Vacuum Rabi splitting of the Na ensemble and the avoided crossing versus field."""

import numpy as np

from cryospin import ensemble, fitkit, fixtures

res = fixtures.RESONATOR_COUPLED
w = np.linspace(res.omega_c - 4, res.omega_c + 4, 1601)

for name, g in fixtures.COUPLINGS.items():
    ens = fixtures.ensemble(name)
    p = np.abs(ensemble.s21_coupled(res, ens, w)) ** 2
    k = np.flatnonzero((p[1:-1] < p[:-2]) & (p[1:-1] <= p[2:])) + 1
    dips = np.sort(w[k[np.argsort(p[k])[:2]]])
    C = ensemble.cooperativity(g, res.kappa, fixtures.EFFECTIVE_LINEWIDTH)
    print(f"{name:10s} g = {g} MHz  dips at {np.round(dips - res.omega_c, 3)} MHz  C = {C:.2f}")

print("participating spins for g = 0.95 MHz:", f"{ensemble.participating_spins(0.95, fixtures.G_SINGLE):.2e}")

# fit the as-grown spectrum with the resonator fixed
ens = fixtures.ensemble("asgrown")
y = np.abs(ensemble.s21_coupled(res, ens, w)) ** 2
y = y + 1e-3 * np.random.default_rng(2).standard_normal(w.size)
fit = fitkit.fit_rabi(w, y, res, {"g_coll": 0.7, "gamma_perp": 0.6, "gamma_q": 1.2, "omega_a": res.omega_c},
                      N_rho=401)
print({k: round(fit.estimates[k], 4) for k in ("g_coll", "gamma_perp", "gamma_q", "omega_a")})

# avoided crossing over a field sweep
B = np.linspace(766.95, 786.95, 21)
cmap = ensemble.avoided_crossing_map(res, fixtures.spin_distribution(), fixtures.atom(), B, w,
                                     g_coll=0.95, gamma_perp=fixtures.gamma_perp(), N_rho=401, threads=4)
print(f"minimum splitting {np.nanmin(cmap.splittings()):.3f} MHz at {cmap.crossing_field():.2f} G")
