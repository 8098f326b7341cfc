"""Physical constants and species data used throughout the package.

All spectroscopic quantities are ordinary frequencies (E/h, omega/2pi) in MHz.
Fields are in gauss, temperatures in kelvin unless a name says otherwise.
"""

import math

from scipy import constants as _c

#: Bumped whenever a tabulated value below changes.
TABLE_VERSION = "2025.1"

H = _c.h
K_B = _c.k
MU_0 = _c.mu_0
C_LIGHT = _c.c
R_E = _c.physical_constants["classical electron radius"][0]

#: Bohr magneton over h, MHz per gauss.
MU_B_MHZ_PER_G = _c.physical_constants["Bohr magneton in Hz/T"][0] * 1e-4 * 1e-6

#: k_B / h in MHz per kelvin.
K_B_MHZ_PER_K = K_B / H * 1e-6

# 23Na 3S1/2 ground state (Steck, "Sodium D Line Data").
NA_I = 1.5
NA_J = 0.5
NA_A_HFS_MHZ = 885.8130644
NA_G_J = 2.00229600
NA_G_I = -0.00080461080

#: Electron and 21Ne gyromagnetic ratios, gamma/2pi in Hz/T.
GAMMA_ELECTRON_HZ_PER_T = abs(_c.physical_constants["electron gyromag. ratio in MHz/T"][0]) * 1e6
GAMMA_NE21_HZ_PER_T = 3.3631e6
NE21_ABUNDANCE = 0.0027
#: Number density of solid neon near 4 K, cm^-3 (1.444 g/cm^3, 20.18 g/mol).
NE_SOLID_DENSITY_CM3 = 1.444 / 20.1797 * _c.N_A

# Statistical (Lorentzian) half width of the dipolar line of dilute spins,
# in units of (mu0/4pi) h gamma1 gamma2 n with gamma in Hz/T.
DIPOLAR_PREFACTOR_LIKE = 2 * math.pi**2 / (3 * math.sqrt(3))
DIPOLAR_PREFACTOR_UNLIKE = 4 * math.pi**2 / (9 * math.sqrt(3))

FWHM_PER_SIGMA = 2 * math.sqrt(2 * math.log(2))
