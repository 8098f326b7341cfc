"""Notch-type (hanger) resonator transmission.

All rates are omega/2pi values in MHz.  The delay ``tau_delay`` multiplies the
absolute probe frequency, so it is expressed in rad/MHz (2 pi x delay in us).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar


@dataclass(frozen=True)
class ResonatorParams:
    omega_c: float
    kappa_i: float
    kappa_e: float
    amp_A: float = 1.0
    alpha: float = 0.0
    tau_delay: float = 0.0
    psi: float = 0.0

    def __post_init__(self):
        if not self.omega_c > 0:
            raise ValueError("omega_c must be positive")
        if self.kappa_i < 0:
            raise ValueError("kappa_i must be non-negative")
        if not self.kappa_e > 0:
            raise ValueError("kappa_e must be positive")
        if not self.amp_A > 0:
            raise ValueError("amp_A must be positive")

    @property
    def kappa(self) -> float:
        return self.kappa_i + self.kappa_e

    def replace(self, **changes) -> "ResonatorParams":
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def background(params: ResonatorParams, omega) -> np.ndarray:
    """A exp(i(alpha - omega tau)), the off-resonant line response."""
    omega = np.asarray(omega, dtype=float)
    return params.amp_A * np.exp(1j * (params.alpha - omega * params.tau_delay))


def s21_bare(params: ResonatorParams, omega) -> np.ndarray:
    omega = np.asarray(omega, dtype=float)
    resonant = params.kappa_e * np.exp(1j * params.psi) / (
        params.kappa_e + params.kappa_i + 2j * (omega - params.omega_c))
    return background(params, omega) * (1 - resonant)


class DipMetrics(NamedTuple):
    omega_min: float
    depth: float
    fwhm: float


def locate_dip(power: Callable, center: float, halfwidth: float, background_power: float,
               points: int = 20001) -> DipMetrics:
    """Minimum and half-depth width of a dip in ``power(omega)``.

    ``power`` returns |S21|^2; depth is ``1 - min/background_power`` and the
    width is taken where the normalised power crosses ``1 - depth/2``.
    """
    grid = np.linspace(center - halfwidth, center + halfwidth, points)
    p = power(grid)
    k = int(np.argmin(p))
    lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, points - 1)]
    if hi > lo:
        res = minimize_scalar(lambda w: float(power(np.array([w]))[0]), bounds=(lo, hi),
                              method="bounded", options={"xatol": 1e-12 * max(1.0, abs(center))})
        w_min = float(res.x) if res.fun <= p[k] else float(grid[k])
    else:
        w_min = float(grid[k])
    p_min = float(power(np.array([w_min]))[0])
    depth = 1.0 - p_min / background_power
    level = background_power * (1.0 - depth / 2)

    def cross(w):
        return float(power(np.array([w]))[0]) - level

    above = p >= level

    def find_edge(direction):
        idx = np.arange(k + 1, points) if direction > 0 else np.arange(k - 1, -1, -1)
        hits = idx[above[idx]]
        if hits.size == 0:
            return np.nan
        j = int(hits[0])
        inner = grid[j - direction]
        if (inner - w_min) * direction < 0:
            inner = w_min
        return brentq(cross, *sorted((inner, grid[j])), xtol=1e-13 * max(1.0, abs(center)))

    fwhm = find_edge(+1) - find_edge(-1)
    return DipMetrics(w_min, depth, float(fwhm))


def dip_metrics(params: ResonatorParams, span: float = 20.0) -> DipMetrics:
    """Dip position, fractional power depth and FWHM of the bare resonator.

    The search window is ``omega_c +- span * kappa``.
    """
    return locate_dip(lambda w: np.abs(s21_bare(params, w)) ** 2, params.omega_c,
                      span * params.kappa, params.amp_A**2)
