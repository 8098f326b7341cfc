"""Ground-state hyperfine levels of Na and the field that tunes |1,1> -> |2,2> to the cavity."""

import numpy as np

from cryospin import atomkit, fixtures

atom = fixtures.atom()

# zero field: two manifolds split by 2 A
spec = atomkit.zeeman_spectrum(atom, 0.0)
print("zero-field splitting (MHz):", spec.level((2, 2)).energy - spec.level((1, 1)).energy)

# the working transition against field
for B in (0.0, 200.0, 500.0, 776.95, 1000.0):
    print(f"B = {B:7.2f} G  f(|1,1> -> |2,2>) = {atomkit.transition_frequency(atom, B, (1, 1), (2, 2)):9.3f} MHz")

B = atomkit.field_for_transition(atom, (1, 1), (2, 2), fixtures.CAVITY_MHZ)
print(f"resonance with the {fixtures.CAVITY_MHZ} MHz cavity at {B:.3f} G")

# thermal populations at the working point
for T in (0.05, 0.5):
    p = atomkit.thermal_populations(atom, B, T)
    s = atomkit.zeeman_spectrum(atom, B)
    print(f"T = {T * 1e3:.0f} mK: p(|1,1>) = {p[s.index((1, 1))]:.3f}, "
          f"lower branch = {atomkit.branch_population(s, p, -0.5):.3f}")

levels = np.array([[lev.energy for lev in atomkit.zeeman_spectrum(atom, b).levels] for b in np.linspace(0, 2000, 5)])
print("level energies (MHz) at 0, 500, ..., 2000 G:\n", np.round(levels, 1))
