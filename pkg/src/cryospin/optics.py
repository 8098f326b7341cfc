"""Optical-depth arithmetic for absorption spectra (T = exp(-OD))."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import constants as const

ANCHOR_SAMPLES = 5
DEFAULT_ANCHORS = (450.0, 800.0)
NA_D_CENTER_NM = 589.0


@dataclass(frozen=True, eq=False)
class OdSpectrum:
    wavelength: np.ndarray
    od: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        wl = np.asarray(self.wavelength, dtype=float)
        od = np.asarray(self.od, dtype=float)
        if wl.ndim != 1 or wl.shape != od.shape or wl.size < 2:
            raise ValueError("wavelength and od must be equal-length vectors with at least 2 samples")
        if np.any(np.diff(wl) <= 0):
            raise ValueError("wavelengths must be strictly increasing")
        if not np.all(np.isfinite(od)):
            raise ValueError("OD values must be finite")
        object.__setattr__(self, "wavelength", wl)
        object.__setattr__(self, "od", od)
        object.__setattr__(self, "meta", dict(self.meta))

    @classmethod
    def from_transmission(cls, wavelength, transmission, **meta) -> "OdSpectrum":
        return cls(wavelength, -np.log(np.asarray(transmission, dtype=float)), meta)

    def transmission(self) -> np.ndarray:
        return np.exp(-self.od)

    def with_od(self, od) -> "OdSpectrum":
        return OdSpectrum(self.wavelength, od, self.meta)


def _check_inside(spec: OdSpectrum, *wls):
    lo, hi = spec.wavelength[0], spec.wavelength[-1]
    for w in wls:
        if not lo <= w <= hi:
            raise ValueError(f"wavelength {w} nm outside the spectrum range [{lo}, {hi}] nm")


def _nearest(spec: OdSpectrum, wl: float, n: int = ANCHOR_SAMPLES) -> np.ndarray:
    n = min(n, spec.wavelength.size)
    # stable sort keeps the choice deterministic when two samples tie
    return np.sort(np.argsort(np.abs(spec.wavelength - wl), kind="stable")[:n])


def local_od(spec: OdSpectrum, wl: float, n: int = ANCHOR_SAMPLES) -> float:
    """Median OD of the ``n`` samples nearest ``wl``."""
    _check_inside(spec, wl)
    return float(np.median(spec.od[_nearest(spec, wl, n)]))


def normalize_od(raw: OdSpectrum, anchor_lo: float = DEFAULT_ANCHORS[0],
                 anchor_hi: float = DEFAULT_ANCHORS[1]) -> OdSpectrum:
    """Subtract the straight baseline through the two off-resonant anchors.

    The anchor values are local medians, so the subtraction is repeated until
    the medians of the result vanish; that makes the operation idempotent.
    """
    if not anchor_lo < anchor_hi:
        raise ValueError("anchor_lo must be below anchor_hi")
    _check_inside(raw, anchor_lo, anchor_hi)
    i_lo, i_hi = _nearest(raw, anchor_lo), _nearest(raw, anchor_hi)
    wl = raw.wavelength
    od = raw.od.copy()
    scale = max(float(np.max(np.abs(od))), 1e-300)
    for _ in range(100):
        y_lo, y_hi = float(np.median(od[i_lo])), float(np.median(od[i_hi]))
        if max(abs(y_lo), abs(y_hi)) <= 1e-15 * scale:
            break
        slope = (y_hi - y_lo) / (anchor_hi - anchor_lo)
        od = od - (y_lo + slope * (wl - anchor_lo))
    meta = dict(raw.meta, anchors_nm=[float(anchor_lo), float(anchor_hi)])
    return OdSpectrum(wl, od, meta)


def integrate_od(spec: OdSpectrum, band_lo: float, band_hi: float) -> float:
    """Integral of the piecewise-linear OD over [band_lo, band_hi], in nm OD."""
    if not band_lo < band_hi:
        raise ValueError("empty band: band_lo must be below band_hi")
    _check_inside(spec, band_lo, band_hi)
    wl, od = spec.wavelength, spec.od
    inner = (wl > band_lo) & (wl < band_hi)
    x = np.concatenate([[band_lo], wl[inner], [band_hi]])
    y = np.interp(x, wl, od)
    return float(np.trapezoid(y, x))


def integrated_cross_section(oscillator_strength: float) -> float:
    """pi r_e c f, the frequency-integrated absorption cross-section in m^2 Hz."""
    return math.pi * const.R_E * const.C_LIGHT * oscillator_strength


def estimate_density(integrated_od: float, oscillator_strength: float, path_length_um: float,
                     center_nm: float = NA_D_CENTER_NM) -> float:
    """Absorber number density (cm^-3) from a band-integrated OD in nm OD.

    The wavelength integral is converted to frequency with
    d(nu) = c d(lambda) / lambda_0^2 about ``center_nm``.
    """
    if not (integrated_od > 0 and oscillator_strength > 0 and path_length_um > 0 and center_nm > 0):
        raise ValueError("integrated OD, oscillator strength, path length and centre must be positive")
    lam0 = center_nm * 1e-9
    od_hz = integrated_od * 1e-9 * const.C_LIGHT / lam0**2
    n_m3 = od_hz / (path_length_um * 1e-6 * integrated_cross_section(oscillator_strength))
    return n_m3 * 1e-6
