"""Inhomogeneously broadened spin ensemble coupled to a notch resonator.

The spin line is cut into ``N_rho`` equally spaced packets of weight rho_j
(sum rho_j = 1).  Packet j couples with g_j = g_coll sqrt(rho_j), so that
sum_j g_j^2 = g_coll^2 regardless of the discretisation.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from . import atomkit
from . import constants as const
from .cavity import ResonatorParams, background

DEFAULT_N_RHO = 2001
DEFAULT_SPAN = 6.0

# complex elements evaluated per chunk in s21_coupled
_CHUNK_ELEMENTS = 1 << 21


@dataclass(frozen=True)
class SpinDistribution:
    """Spin frequency distribution centred on ``omega_a`` (MHz).

    ``shape="lorentzian"`` reinterprets ``sigma`` as a half width at half
    maximum.  It exists for sensitivity studies only; the measured lines are
    Gaussian.
    """

    omega_a: float
    sigma: float
    amp_a: float = 1.0
    offset_b: float = 0.0
    shape: str = "gaussian"

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.shape not in ("gaussian", "lorentzian"):
            raise ValueError(f"unknown distribution shape {self.shape!r}")

    @classmethod
    def from_fwhm(cls, omega_a: float, gamma_q: float, **kw) -> "SpinDistribution":
        return cls(omega_a, gamma_q / const.FWHM_PER_SIGMA, **kw)

    @property
    def gamma_q(self) -> float:
        if self.shape == "lorentzian":
            return 2 * self.sigma
        return const.FWHM_PER_SIGMA * self.sigma

    def density(self, omega) -> np.ndarray:
        """Normalised probability density per MHz."""
        x = np.asarray(omega, dtype=float) - self.omega_a
        if self.shape == "lorentzian":
            return self.sigma / math.pi / (x**2 + self.sigma**2)
        return np.exp(-0.5 * (x / self.sigma) ** 2) / (self.sigma * math.sqrt(2 * math.pi))

    def profile(self, omega) -> np.ndarray:
        """The unnormalised ``b - a exp(-(w - w_a)^2 / 2 sigma^2)`` form used for scans."""
        x = np.asarray(omega, dtype=float) - self.omega_a
        return self.offset_b - self.amp_a * np.exp(-0.5 * (x / self.sigma) ** 2)

    def with_center(self, omega_a: float) -> "SpinDistribution":
        return replace(self, omega_a=omega_a)


@dataclass(frozen=True, eq=False)
class DiscretizedEnsemble:
    omega_a: float
    detunings: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    g_coll: float = 0.0
    gamma_perp: float = 0.0

    def __post_init__(self):
        d = np.asarray(self.detunings, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if d.shape != w.shape or d.ndim != 1 or d.size == 0:
            raise ValueError("detunings and weights must be equal-length non-empty vectors")
        if np.any(w < 0):
            raise ValueError("packet weights must be non-negative")
        if self.gamma_perp < 0 or self.g_coll < 0:
            raise ValueError("g_coll and gamma_perp must be non-negative")
        object.__setattr__(self, "detunings", d)
        object.__setattr__(self, "weights", w)

    @property
    def N_rho(self) -> int:
        return int(self.detunings.size)

    @property
    def spacing(self) -> float:
        return float(self.detunings[1] - self.detunings[0]) if self.N_rho > 1 else 0.0

    @property
    def omega_s(self) -> np.ndarray:
        return self.omega_a + self.detunings

    @property
    def couplings(self) -> np.ndarray:
        """Per-packet coupling g_j (MHz)."""
        return self.g_coll * np.sqrt(self.weights)

    def replace(self, **changes) -> "DiscretizedEnsemble":
        return replace(self, **changes)

    def packets(self):
        return list(zip(self.detunings.tolist(), self.weights.tolist()))


def discretize(dist: SpinDistribution, N_rho: int = DEFAULT_N_RHO, span: float = DEFAULT_SPAN,
               g_coll: float = 0.0, gamma_perp: float = 0.0) -> DiscretizedEnsemble:
    """Equally spaced packets over ``omega_a +- span * sigma``.

    ``N_rho`` must be odd so one packet sits on the line centre; ``N_rho = 1``
    gives the homogeneous (single packet) limit.
    """
    if N_rho < 1 or N_rho % 2 == 0:
        raise ValueError(f"N_rho must be a positive odd integer, got {N_rho}")
    if N_rho == 1:
        return DiscretizedEnsemble(dist.omega_a, np.zeros(1), np.ones(1), g_coll, gamma_perp)
    if span < 4:
        raise ValueError("span must be at least 4 sigma")
    x = np.linspace(-span * dist.sigma, span * dist.sigma, N_rho)
    w = dist.density(dist.omega_a + x)
    w = 0.5 * (w + w[::-1])
    w /= w.sum()
    return DiscretizedEnsemble(dist.omega_a, x, w, g_coll, gamma_perp)


def coupling_sum(ens: DiscretizedEnsemble, omega) -> np.ndarray:
    """sum_j g_j^2 / (gamma_perp + i (omega - omega_s^j)) for each probe frequency."""
    omega = np.atleast_1d(np.asarray(omega, dtype=float))
    g2 = ens.g_coll**2 * ens.weights
    out = np.empty(omega.shape, dtype=complex)
    flat = omega.ravel()
    res = out.ravel()
    rows = max(1, _CHUNK_ELEMENTS // ens.N_rho)
    ws = ens.omega_s
    for start in range(0, flat.size, rows):
        w = flat[start:start + rows, None]
        terms = g2 / (ens.gamma_perp + 1j * (w - ws))
        # reduction along the contiguous axis: identical per row for any chunking
        res[start:start + rows] = terms.sum(axis=1)
    return out


def s21_coupled(res: ResonatorParams, ens: DiscretizedEnsemble, omega) -> np.ndarray:
    """Steady-state transmission of the resonator loaded by the ensemble."""
    omega = np.asarray(omega, dtype=float)
    scalar = omega.ndim == 0
    sums = coupling_sum(ens, omega).reshape(omega.shape)
    denom = (res.kappa_i + res.kappa_e) / 2 + 1j * (omega - res.omega_c) + sums
    out = background(res, omega) * (1 - (res.kappa_e / 2) * np.exp(1j * res.psi) / denom)
    return out[()] if scalar else out


def effective_linewidth(ens: DiscretizedEnsemble) -> float:
    """Gamma = [sum_j rho_j / (gamma_perp + Delta_j^2 / gamma_perp)]^-1 in MHz.

    For gamma_perp = 0 the discrete sum degenerates; the continuum limit
    1 / (pi rho(omega_a)) is used instead, with rho taken from the centre
    packet density.
    """
    g = ens.gamma_perp
    if g == 0:
        if ens.N_rho == 1:
            return 0.0
        centre = ens.N_rho // 2
        rho0 = ens.weights[centre] / ens.spacing
        return float(1.0 / (math.pi * rho0))
    total = np.sum(ens.weights * g / (g * g + ens.detunings**2))
    return float(1.0 / total)


def gamma_perp_for_linewidth(dist: SpinDistribution, Gamma: float, N_rho: int = DEFAULT_N_RHO,
                             span: float = DEFAULT_SPAN) -> float:
    """Homogeneous rate that gives effective linewidth ``Gamma`` for ``dist``."""
    base = discretize(dist, N_rho, span)
    floor = effective_linewidth(base)
    if Gamma <= floor:
        raise ValueError(f"Gamma={Gamma} is below the inhomogeneous floor {floor:.6g} MHz")
    return brentq(lambda g: effective_linewidth(base.replace(gamma_perp=g)) - Gamma,
                  1e-9, 2 * Gamma, xtol=1e-14)


def cooperativity(g: float, kappa: float, Gamma: float) -> float:
    """C = g^2 / (kappa Gamma)."""
    if kappa <= 0 or Gamma <= 0 or g < 0:
        raise ValueError("cooperativity needs g >= 0 and kappa, Gamma > 0")
    return g * g / (kappa * Gamma)


def collective_coupling(g0: float, N: float) -> float:
    if N < 0:
        raise ValueError("N must be non-negative")
    return math.sqrt(N) * g0


def participating_spins(g_eff: float, g0: float) -> float:
    """Inverse of ``collective_coupling``: N = (g_eff / g0)^2."""
    if g0 <= 0:
        raise ValueError("g0 must be positive")
    return (g_eff / g0) ** 2


def purcell_rate(g0: float, kappa: float, Delta: float) -> float:
    """Cavity-enhanced emission rate kappa g0^2 / (Delta^2 + (kappa/2)^2)."""
    if kappa <= 0:
        raise ValueError("kappa must be positive")
    return kappa * g0 * g0 / (Delta * Delta + 0.25 * kappa * kappa)


def dipolar_broadening(density: float, gamma_product: float, kind: str = "like") -> float:
    """Statistical dipolar FWHM (MHz) of dilute spins.

    ``density`` in cm^-3 is the number density of the perturbing spins and
    ``gamma_product`` the product gamma_1 gamma_2 of gyromagnetic ratios in
    (Hz/T)^2.  ``kind="unlike"`` drops the flip-flop contribution.
    """
    if not density > 0:
        raise ValueError("density must be positive")
    prefactor = {"like": const.DIPOLAR_PREFACTOR_LIKE,
                 "unlike": const.DIPOLAR_PREFACTOR_UNLIKE}[kind]
    n_m3 = density * 1e6
    hwhm_hz = prefactor * const.MU_0 / (4 * math.pi) * const.H * gamma_product * n_m3
    return 2 * hwhm_hz * 1e-6


@dataclass(frozen=True, eq=False)
class CrossingMap:
    B: np.ndarray
    omega: np.ndarray
    power: np.ndarray  # shape (len(B), len(omega)), |S21|^2
    omega_a: np.ndarray  # transition frequency per field

    def splittings(self) -> np.ndarray:
        """Separation of the two deepest local minima in each field row."""
        out = np.full(self.B.size, np.inf)
        for i, row in enumerate(self.power):
            k = np.flatnonzero((row[1:-1] < row[:-2]) & (row[1:-1] <= row[2:])) + 1
            if k.size >= 2:
                best = k[np.argsort(row[k])[:2]]
                out[i] = abs(self.omega[best[1]] - self.omega[best[0]])
        return out

    def crossing_field(self) -> float:
        return float(self.B[int(np.argmin(self.splittings()))])


def avoided_crossing_map(res: ResonatorParams, dist: SpinDistribution, atom: atomkit.AtomSpec,
                         B_values: Sequence[float], omega_values: Sequence[float], *,
                         g_coll: float, gamma_perp: float, lower=(1, 1), upper=(2, 2),
                         N_rho: int = DEFAULT_N_RHO, span: float = DEFAULT_SPAN,
                         threads: int = 1) -> CrossingMap:
    """|S21|^2 over (B, omega), the ensemble centre following the atomic transition."""
    B = np.asarray(B_values, dtype=float)
    omega = np.asarray(omega_values, dtype=float)
    template = discretize(dist, N_rho, span, g_coll, gamma_perp)
    centres = np.array([atomkit.transition_frequency(atom, b, lower, upper) for b in B])

    def row(wa):
        return np.abs(s21_coupled(res, template.replace(omega_a=float(wa)), omega)) ** 2

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(row, centres))
    else:
        rows = [row(wa) for wa in centres]
    return CrossingMap(B, omega, np.vstack(rows), centres)
