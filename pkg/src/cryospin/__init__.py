"""Spin ensembles in cryogenic crystals coupled to superconducting resonators.

Level structure, resonator and coupled-ensemble transmission, pulsed
coherence experiments, least-squares fitting and optical-depth arithmetic.
"""

__version__ = "0.1.0"

from .atomkit import SODIUM, AtomSpec, NoSolutionError, field_for_transition, thermal_populations, \
    transition_frequency, transition_matrix_element, zeeman_spectrum
from .cavity import ResonatorParams, dip_metrics, s21_bare
from .dynamics import DecayParams, PulseSequence, cpmg, dispersive_shift, hole_burning_scan, run_sequence, \
    t1_repolarization
from .ensemble import SpinDistribution, avoided_crossing_map, cooperativity, discretize, effective_linewidth, \
    s21_coupled
from .fitkit import FitProblem, FitResult, Parameter, fit_decay, fit_gaussian_scan, fit_rabi, fit_resonator, \
    levenberg_marquardt
from .optics import OdSpectrum, estimate_density, integrate_od, normalize_od
