"""Ground-state hyperfine and Zeeman structure of alkali atoms.

The Hamiltonian (in frequency units, MHz)

    H/h = A_hfs * A_scale * (I.J) + mu_B/h * B * (g_J J_z + g_I I_z)

conserves m_F = m_J + m_I, so it is diagonalised block by block.  For J = 1/2
every block is at most 2x2 and is solved in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from . import constants as const

Label = tuple  # (F, m_F)


class NoSolutionError(ValueError):
    """Raised when a root search has no bracketed solution."""


@dataclass(frozen=True)
class AtomSpec:
    """Ground manifold of a single alkali species.

    ``g_I`` follows the convention where the nuclear Zeeman term is
    ``+mu_B g_I B I_z`` (negative for 23Na).  ``A_scale`` multiplies ``A_hfs``
    only; it carries host-matrix corrections to the hyperfine constant.
    """

    name: str
    I: float
    J: float
    A_hfs: float
    g_J: float
    g_I: float
    A_scale: float = 1.0

    def __post_init__(self):
        for label, value in (("I", self.I), ("J", self.J)):
            twice = 2 * value
            if value < 0 or abs(twice - round(twice)) > 1e-12:
                raise ValueError(f"{label}={value} is not a non-negative half-integer")
        if self.A_hfs < 0:
            raise ValueError("A_hfs must be non-negative")
        if not self.A_scale > 0:
            raise ValueError("A_scale must be positive")

    @property
    def dim(self) -> int:
        return int(round((2 * self.I + 1) * (2 * self.J + 1)))

    @property
    def A_eff(self) -> float:
        return self.A_hfs * self.A_scale

    @property
    def zero_field_splitting(self) -> float:
        """A_eff (I + 1/2) for J = 1/2, in MHz."""
        return self.A_eff * (self.I + 0.5)

    def with_scale(self, A_scale: float) -> "AtomSpec":
        return replace(self, A_scale=A_scale)


SODIUM = AtomSpec("Na23", const.NA_I, const.NA_J, const.NA_A_HFS_MHZ, const.NA_G_J, const.NA_G_I)


@dataclass(frozen=True)
class ZeemanLevel:
    energy: float
    F: float
    m_F: float
    #: electron projection the level connects to as B -> infinity
    m_J_high: float
    vector: np.ndarray = field(repr=False, compare=False)

    @property
    def adiabatic_label(self) -> Label:
        return (_nice(self.F), _nice(self.m_F))


@dataclass(frozen=True)
class ZeemanSpectrum:
    B: float
    atom: AtomSpec
    levels: tuple

    @property
    def energies(self) -> np.ndarray:
        return np.array([lev.energy for lev in self.levels])

    @property
    def labels(self) -> list:
        return [lev.adiabatic_label for lev in self.levels]

    def index(self, label: Sequence[float]) -> int:
        key = (_nice(label[0]), _nice(label[1]))
        for i, lev in enumerate(self.levels):
            if lev.adiabatic_label == key:
                return i
        raise ValueError(f"unknown level label {tuple(label)} for {self.atom.name}")

    def level(self, label: Sequence[float]) -> ZeemanLevel:
        return self.levels[self.index(label)]

    def eigenvectors(self) -> np.ndarray:
        """Columns are level eigenvectors in the product basis."""
        return np.column_stack([lev.vector for lev in self.levels])


def _nice(x: float):
    """Render half-integers as ints where possible so labels compare cleanly."""
    r = round(2 * x)
    return r // 2 if r % 2 == 0 else r / 2


def _projections(j: float) -> np.ndarray:
    n = int(round(2 * j + 1))
    return j - np.arange(n)


def product_basis(atom: AtomSpec) -> list:
    """(m_J, m_I) pairs, m_J outer and descending, m_I inner and descending."""
    return [(mj, mi) for mj in _projections(atom.J) for mi in _projections(atom.I)]


def _ladder(j: float):
    m = _projections(j)
    n = len(m)
    jp = np.zeros((n, n))
    for k in range(1, n):
        # <m+1|J+|m> with rows ordered by descending m
        jp[k - 1, k] = math.sqrt(j * (j + 1) - m[k] * (m[k] + 1))
    return np.diag(m), jp


def spin_operators(atom: AtomSpec) -> dict:
    """Full-space angular momentum matrices in the product basis."""
    jz, jp = _ladder(atom.J)
    iz, ip = _ladder(atom.I)
    one_j = np.eye(jz.shape[0])
    one_i = np.eye(iz.shape[0])
    ops = {
        "Jz": np.kron(jz, one_i),
        "Jx": np.kron(0.5 * (jp + jp.T), one_i),
        "Jy": np.kron(-0.5j * (jp - jp.T), one_i),
        "Iz": np.kron(one_j, iz),
        "Ix": np.kron(one_j, 0.5 * (ip + ip.T)),
        "Iy": np.kron(one_j, -0.5j * (ip - ip.T)),
    }
    return ops


def hamiltonian(atom: AtomSpec, B: float) -> np.ndarray:
    """Dense H/h in MHz, product basis.  Used for checks and non-1/2 J."""
    ops = spin_operators(atom)
    idotj = (ops["Ix"] @ ops["Jx"] + ops["Iy"] @ ops["Jy"] + ops["Iz"] @ ops["Jz"]).real
    zeeman = const.MU_B_MHZ_PER_G * B * (atom.g_J * ops["Jz"] + atom.g_I * ops["Iz"])
    return atom.A_eff * idotj + zeeman


def _solve_block(h: np.ndarray):
    if h.shape[0] == 1:
        return np.array([h[0, 0]]), np.ones((1, 1))
    if h.shape[0] == 2:
        a, c, d = h[0, 0], h[0, 1], h[1, 1]
        mean = 0.5 * (a + d)
        half = 0.5 * (a - d)
        r = math.hypot(half, c)
        theta = 0.5 * math.atan2(c, half)
        ct, st = math.cos(theta), math.sin(theta)
        vals = np.array([mean - r, mean + r])
        vecs = np.array([[-st, ct], [ct, st]])
        return vals, vecs
    return np.linalg.eigh(h)


def zeeman_spectrum(atom: AtomSpec, B: float) -> ZeemanSpectrum:
    """All (2I+1)(2J+1) levels at field ``B`` (gauss), sorted by energy."""
    if B < 0 or not math.isfinite(B):
        raise ValueError(f"field must be finite and >= 0, got {B}")
    basis = product_basis(atom)
    h = hamiltonian(atom, B)
    mf = np.array([mj + mi for mj, mi in basis])
    f_values = np.arange(abs(atom.I - atom.J), atom.I + atom.J + 0.5)
    levels = []
    for m in np.unique(mf):
        idx = np.flatnonzero(np.isclose(mf, m))
        vals, vecs = _solve_block(h[np.ix_(idx, idx)])
        fs = [f for f in f_values if f >= abs(m) - 1e-9]
        if atom.A_hfs * atom.A_scale < 0:
            fs = fs[::-1]
        # high-field electron projection: order by g_J m_J within the block
        mjs = sorted({basis[k][0] for k in idx}, key=lambda mj: atom.g_J * mj)
        for k in range(len(idx)):
            full = np.zeros(len(basis))
            full[idx] = vecs[:, k]
            levels.append(ZeemanLevel(float(vals[k]), fs[k], float(m), mjs[k], full))
    levels.sort(key=lambda lev: (lev.energy, lev.F, lev.m_F))
    return ZeemanSpectrum(float(B), atom, tuple(levels))


def transition_frequency(atom: AtomSpec, B: float, lower: Sequence[float], upper: Sequence[float]) -> float:
    """E(upper) - E(lower) in MHz at field ``B``."""
    spec = zeeman_spectrum(atom, B)
    return spec.level(upper).energy - spec.level(lower).energy


def field_for_transition(atom: AtomSpec, lower: Sequence[float], upper: Sequence[float], target: float,
                         bracket: tuple = (0.0, 1.0e4)) -> float:
    """Field (gauss) at which the transition frequency equals ``target`` MHz.

    The transition must be monotone on ``bracket``.
    """
    lo, hi = bracket

    def resid(b):
        return transition_frequency(atom, b, lower, upper) - target

    f_lo, f_hi = resid(lo), resid(hi)
    if f_lo == 0.0:
        return float(lo)
    if f_lo * f_hi > 0:
        raise NoSolutionError(
            f"target {target} MHz outside [{f_lo + target:.6f}, {f_hi + target:.6f}] MHz "
            f"reachable on {bracket} G")
    b = brentq(resid, lo, hi, xtol=1e-10, rtol=4 * np.finfo(float).eps, maxiter=200)
    if abs(resid(b)) >= 1e-3:
        raise NoSolutionError(f"root search did not reach 1 kHz accuracy (residual {resid(b)} MHz)")
    return float(b)


def thermal_populations(atom: AtomSpec, B: float, T: float) -> np.ndarray:
    """Boltzmann weights of the levels of ``zeeman_spectrum(atom, B)``."""
    if not T > 0:
        raise ValueError(f"temperature must be > 0 K, got {T}")
    e = zeeman_spectrum(atom, B).energies
    return boltzmann(e, T)


def boltzmann(energies: np.ndarray, T: float) -> np.ndarray:
    x = -(energies - energies.min()) / (const.K_B_MHZ_PER_K * T)
    p = np.exp(x)
    return p / p.sum()


def manifold_population(spectrum: ZeemanSpectrum, populations: np.ndarray, F: float) -> float:
    """Total population of levels with adiabatic label F."""
    return float(sum(p for lev, p in zip(spectrum.levels, populations) if abs(lev.F - F) < 1e-9))


def branch_population(spectrum: ZeemanSpectrum, populations: np.ndarray, m_J: float) -> float:
    """Total population of levels that become m_J at high field.

    At strong fields the lower electron branch (m_J = -1/2 for g_J > 0) holds
    the three F = I - 1/2 levels plus |F = I + 1/2, m_F = -(I + 1/2)>.
    """
    return float(sum(p for lev, p in zip(spectrum.levels, populations) if abs(lev.m_J_high - m_J) < 1e-9))


def transition_matrix_element(atom: AtomSpec, B: float, lower: Sequence[float], upper: Sequence[float]) -> float:
    """|<upper| S_x |lower>| in the field-dressed eigenbasis."""
    spec = zeeman_spectrum(atom, B)
    sx = spin_operators(atom)["Jx"].real
    u = spec.level(upper).vector
    l = spec.level(lower).vector
    return float(abs(u @ sx @ l))
