"""Pulsed and slow dynamics of the inhomogeneous ensemble.

Packets are classical Bloch vectors (u, v, w) starting polarised at
w = -1.  Pulses are instantaneous rotations about an axis in the xy plane;
their duration only advances the clock.  Between pulses each packet precesses
at its detuning and its transverse part decays as exp(-t / T2_hom).

Time units: microseconds inside sequences (detunings in MHz, so the phase
is 2 pi Delta t), milliseconds for T2 and minutes for T1.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence, Union

import numpy as np

from . import atomkit
from .cavity import ResonatorParams
from .ensemble import DiscretizedEnsemble, SpinDistribution, effective_linewidth

AXES = {"x": (1.0, 0.0), "y": (0.0, 1.0), "-x": (-1.0, 0.0), "-y": (0.0, -1.0)}


# -- sequences ---------------------------------------------------------------

@dataclass(frozen=True)
class Pulse:
    axis: str
    angle: float
    duration: float = 0.0

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"pulse axis must be one of {sorted(AXES)}, got {self.axis!r}")
        if not math.isfinite(self.angle):
            raise ValueError("pulse angle must be finite")
        if self.duration < 0:
            raise ValueError("pulse duration must be >= 0")


@dataclass(frozen=True)
class Delay:
    duration: float

    def __post_init__(self):
        if not self.duration >= 0:
            raise ValueError("delay must be >= 0")


@dataclass(frozen=True)
class Acquire:
    tag: str


Event = Union[Pulse, Delay, Acquire]


@dataclass(frozen=True)
class PulseSequence:
    events: tuple

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))

    @property
    def total_duration(self) -> float:
        return float(sum(getattr(e, "duration", 0.0) for e in self.events))

    @property
    def tags(self) -> list:
        return [e.tag for e in self.events if isinstance(e, Acquire)]

    def to_json(self) -> list:
        out = []
        for e in self.events:
            if isinstance(e, Pulse):
                body = {"axis": e.axis, "angle_pi": e.angle / math.pi}
                if e.duration:
                    body["duration_us"] = e.duration
                out.append({"pulse": body})
            elif isinstance(e, Delay):
                out.append({"delay_us": e.duration})
            else:
                out.append({"acquire": e.tag})
        return out

    @classmethod
    def from_json(cls, items: Sequence[dict]) -> "PulseSequence":
        events = []
        for k, item in enumerate(items):
            if not isinstance(item, dict) or len(item) != 1:
                raise ValueError(f"event {k}: expected an object with exactly one key")
            (key, value), = item.items()
            if key == "pulse":
                extra = set(value) - {"axis", "angle_pi", "duration_us"}
                if extra:
                    raise ValueError(f"event {k}: unknown pulse keys {sorted(extra)}")
                events.append(Pulse(value.get("axis", "x"), math.pi * float(value["angle_pi"]),
                                    float(value.get("duration_us", 0.0))))
            elif key == "delay_us":
                events.append(Delay(float(value)))
            elif key == "acquire":
                events.append(Acquire(str(value)))
            else:
                raise ValueError(f"event {k}: unknown event type {key!r}")
        return cls(tuple(events))

    @classmethod
    def loads(cls, text: str) -> "PulseSequence":
        return cls.from_json(json.loads(text))


def hahn_sequence(tau: float, refocus_axis: str = "y") -> PulseSequence:
    """pi/2_x - tau - pi_y - tau - acquire."""
    return PulseSequence((Pulse("x", math.pi / 2), Delay(tau), Pulse(refocus_axis, math.pi),
                          Delay(tau), Acquire("echo")))


def fid_sequence(duration: float) -> PulseSequence:
    return PulseSequence((Pulse("x", math.pi / 2), Acquire("start"), Delay(duration), Acquire("end")))


def cpmg_sequence(N: int, tau: float, flip_error: float = 0.0, refocus_axis: str = "y") -> PulseSequence:
    """pi/2_x then N refocusing pulses at tau, 3 tau, ...; echoes at 2 tau, 4 tau, ..."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if not tau > 0:
        raise ValueError("tau must be positive")
    events = [Pulse("x", math.pi / 2)]
    for k in range(1, N + 1):
        events += [Delay(tau), Pulse(refocus_axis, math.pi * (1 + flip_error)), Delay(tau),
                   Acquire(f"echo{k}")]
    return PulseSequence(tuple(events))


# -- state and evolution -----------------------------------------------------

class BlochPacket(NamedTuple):
    detuning: float
    weight: float
    u: float
    v: float
    w: float


@dataclass(frozen=True)
class DecayParams:
    """Relaxation constants.

    T2_hom (ms) damps the transverse components; it relates to the
    homogeneous rate by T2_hom = 1 / (2 pi gamma_perp).  T1_long (minutes) pulls
    w back to -1 during sequences.  ``stretch`` selects the longitudinal
    clock used by :func:`t1_repolarization`.
    """

    T2_hom: float = math.inf
    T1_long: float = math.inf
    stretch: str = "simple"

    def __post_init__(self):
        if not (self.T2_hom > 0 and self.T1_long > 0):
            raise ValueError("relaxation times must be positive")
        if self.stretch not in ("simple", "stretched-sqrt"):
            raise ValueError(f"unknown stretch form {self.stretch!r}")


def t2_from_gamma_perp(gamma_perp: float) -> float:
    """T2 in ms for a homogeneous rate in MHz (omega/2pi units)."""
    return math.inf if gamma_perp == 0 else 1.0 / (2 * math.pi * gamma_perp) * 1e-3


def gamma_perp_from_t2(T2_ms: float) -> float:
    return 0.0 if math.isinf(T2_ms) else 1.0 / (2 * math.pi * T2_ms * 1e3)


class BlochState:
    """Vectorised packet state: transverse m = u + i v and longitudinal w."""

    def __init__(self, detunings, weights, m=None, w=None):
        self.detunings = np.asarray(detunings, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        n = self.detunings.size
        if n == 0:
            raise ValueError("ensemble has no packets")
        self.m = np.zeros(n, dtype=complex) if m is None else np.array(m, dtype=complex)
        self.w = -np.ones(n) if w is None else np.array(w, dtype=float)

    @classmethod
    def from_ensemble(cls, ens: DiscretizedEnsemble) -> "BlochState":
        return cls(ens.detunings, ens.weights)

    def signal(self) -> complex:
        return complex(np.dot(self.weights, self.m.real) + 1j * np.dot(self.weights, self.m.imag))

    def norms(self) -> np.ndarray:
        return np.sqrt(np.abs(self.m) ** 2 + self.w**2)

    def packets(self) -> list:
        return [BlochPacket(d, q, z.real, z.imag, w)
                for d, q, z, w in zip(self.detunings, self.weights, self.m, self.w)]

    def rotate(self, axis: tuple, angle: float) -> None:
        """Rotate every packet by ``angle`` about the unit vector (ax, ay, 0)."""
        n = axis
        c, s = math.cos(angle), math.sin(angle)
        u, v, w = self.m.real, self.m.imag, self.w
        dot = n[0] * u + n[1] * v
        # Rodrigues: r c + (n x r) s + n (n.r)(1 - c)
        cu = n[1] * w
        cv = -n[0] * w
        cw = n[0] * v - n[1] * u
        u2 = u * c + cu * s + n[0] * dot * (1 - c)
        v2 = v * c + cv * s + n[1] * dot * (1 - c)
        w2 = w * c + cw * s
        self.m = u2 + 1j * v2
        self.w = w2

    def evolve(self, t: float, decay: DecayParams) -> None:
        """Free precession for ``t`` microseconds."""
        self.m = self.m * _precession(self.detunings, t, decay)
        if not math.isinf(decay.T1_long):
            relax = math.exp(-t / (decay.T1_long * 60e6))
            self.w = -1.0 + (self.w + 1.0) * relax


def _precession(detunings, t, decay):
    damp = 1.0 if math.isinf(decay.T2_hom) else math.exp(-t / (decay.T2_hom * 1e3))
    return np.exp(2j * math.pi * detunings * t) * damp


@dataclass(frozen=True, eq=False)
class SequenceResult:
    times: np.ndarray  # us
    signal: np.ndarray  # complex ensemble transverse magnetisation
    echoes: dict  # tag -> |signal|
    echo_times: dict  # tag -> us
    final_state: BlochState = field(repr=False)

    def echo_array(self) -> np.ndarray:
        return np.array([self.echoes[t] for t in self.echoes])


def run_sequence(ens: DiscretizedEnsemble, seq: PulseSequence, decay: DecayParams = DecayParams(),
                 sample_step: float = None, record: bool = True,
                 state: BlochState = None) -> SequenceResult:
    """Apply ``seq`` to the packets of ``ens``.

    With ``record`` the transverse signal is sampled through every delay at
    ``sample_step`` (default: shortest non-zero delay / 200).
    """
    st = BlochState.from_ensemble(ens) if state is None else state
    if st.detunings.size == 0:
        raise ValueError("ensemble has no packets")
    delays = [e.duration for e in seq.events if isinstance(e, Delay) and e.duration > 0]
    if sample_step is None:
        sample_step = min(delays) / 200 if delays else 1.0
    t = 0.0
    times, signal = [], []
    echoes, echo_times = {}, {}
    if record:
        times.append(t)
        signal.append(st.signal())
    for e in seq.events:
        if isinstance(e, Pulse):
            st.rotate(AXES[e.axis], e.angle)
            t += e.duration
            if record:
                times.append(t)
                signal.append(st.signal())
        elif isinstance(e, Delay):
            if record and e.duration > 0:
                n = max(1, math.ceil(e.duration / sample_step - 1e-9))
                ts = np.linspace(0.0, e.duration, n + 1)[1:]
                for chunk in np.array_split(ts, max(1, ts.size * st.detunings.size // (1 << 21) + 1)):
                    if chunk.size == 0:
                        continue
                    ph = np.exp(2j * math.pi * np.outer(chunk, st.detunings))
                    if not math.isinf(decay.T2_hom):
                        ph *= np.exp(-chunk / (decay.T2_hom * 1e3))[:, None]
                    z = ph * st.m
                    signal.extend((z.real @ st.weights) + 1j * (z.imag @ st.weights))
                    times.extend((t + chunk).tolist())
            st.evolve(e.duration, decay)
            t += e.duration
        else:
            echoes[e.tag] = abs(st.signal())
            echo_times[e.tag] = t
    return SequenceResult(np.array(times), np.array(signal, dtype=complex), echoes, echo_times, st)


@dataclass(frozen=True, eq=False)
class EchoTrain:
    times: np.ndarray
    amplitudes: np.ndarray


def cpmg(ens: DiscretizedEnsemble, N: int, tau: float, decay: DecayParams = DecayParams(),
         flip_error: float = 0.0, refocus_axis: str = "y") -> EchoTrain:
    """Echo amplitudes of an N-pulse CPMG train (``refocus_axis="x"`` gives Carr-Purcell)."""
    res = run_sequence(ens, cpmg_sequence(N, tau, flip_error, refocus_axis), decay, record=False)
    tags = [f"echo{k}" for k in range(1, N + 1)]
    return EchoTrain(np.array([res.echo_times[t] for t in tags]), np.array([res.echoes[t] for t in tags]))


def hahn_decay(ens: DiscretizedEnsemble, taus: Sequence[float], decay: DecayParams = DecayParams()) -> EchoTrain:
    """Hahn echo amplitude for each delay tau (echo at 2 tau)."""
    taus = np.asarray(taus, dtype=float)
    amps = [run_sequence(ens, hahn_sequence(t), decay, record=False).echoes["echo"] for t in taus]
    return EchoTrain(taus, np.array(amps))


# -- dispersive readout --------------------------------------------------------

def dispersive_shift(res: ResonatorParams, ens: DiscretizedEnsemble, polarization=1.0) -> float:
    """Cavity pull sum_j p_j g_j^2 Delta_j / (Delta_j^2 + gamma_perp^2), Delta_j = omega_c - omega_s^j.

    ``polarization`` is a scalar or per-packet array in [-1, 1]; +1 is the
    polarisation at which ``g_coll`` was defined.
    """
    delta = res.omega_c - ens.omega_s
    p = np.broadcast_to(np.asarray(polarization, dtype=float), delta.shape)
    if np.any(np.abs(p) > 1 + 1e-12):
        raise ValueError("packet polarisation must lie in [-1, 1]")
    if np.any(np.abs(delta) <= ens.gamma_perp) or np.any(delta == 0):
        raise ValueError("a spin packet is resonant with the cavity; dispersive model invalid")
    g2 = ens.g_coll**2 * ens.weights
    return float(np.sum(p * g2 * delta / (delta**2 + ens.gamma_perp**2)))


@dataclass(frozen=True, eq=False)
class HoleBurningScan:
    omega_s: np.ndarray
    shift: np.ndarray
    pulse_fwhm: float

    def area(self) -> float:
        return float(np.trapezoid(self.shift, self.omega_s))


def hole_burning_scan(res: ResonatorParams, ens: DiscretizedEnsemble, pulse_fwhm: float,
                      scan: Sequence[float], depth: float = 1.0) -> HoleBurningScan:
    """Cavity shift when a narrow tone at each omega_s saturates part of the line.

    Packet j keeps polarisation 1 - depth * exp(-(omega_j - omega_s)^2 / 2 s^2)
    with s the pulse sigma.
    """
    if ens.g_coll > 0 and abs(ens.omega_a - res.omega_c) < 5 * ens.g_coll:
        raise ValueError(
            f"ensemble at {ens.omega_a} MHz is within 5 g_coll of the cavity at {res.omega_c} MHz; "
            "hole burning needs the dispersive regime")
    if not pulse_fwhm > 0:
        raise ValueError("pulse_fwhm must be positive")
    scan = np.asarray(scan, dtype=float)
    s = pulse_fwhm / (2 * math.sqrt(2 * math.log(2)))
    base = dispersive_shift(res, ens, 1.0)
    delta = res.omega_c - ens.omega_s
    g2 = ens.g_coll**2 * ens.weights
    per_packet = g2 * delta / (delta**2 + ens.gamma_perp**2)
    sat = np.exp(-0.5 * ((ens.omega_s[None, :] - scan[:, None]) / s) ** 2)
    shifted = ((1.0 - depth * sat) * per_packet).sum(axis=1)
    return HoleBurningScan(scan, shifted - base, pulse_fwhm)


def hole_burning_report(scan: HoleBurningScan, gamma_perp: float = 0.0) -> dict:
    """Gaussian fit of a scan: FWHM of the fitted line and the matching effective linewidth."""
    from .fitkit import fit_gaussian_scan
    from .ensemble import discretize

    fit = fit_gaussian_scan(scan.omega_s, scan.shift)
    sigma = abs(fit.estimates["sigma"])
    dist = SpinDistribution(fit.estimates["omega_a"], sigma)
    return {
        "gamma_q": fit.estimates["gamma_q"],
        "omega_a": fit.estimates["omega_a"],
        "effective_linewidth": effective_linewidth(discretize(dist, gamma_perp=gamma_perp)),
        "fit": fit,
    }


# -- longitudinal relaxation ------------------------------------------------

@dataclass(frozen=True, eq=False)
class RepolarizationResult:
    times: np.ndarray  # minutes
    temperature: np.ndarray  # K
    populations: np.ndarray  # (n_t, n_levels)
    p_F1: np.ndarray
    polarization: np.ndarray  # transition polarisation normalised to final equilibrium
    delta_omega: np.ndarray  # MHz, relative to the final equilibrium shift
    t_quench: float


def _schedule_temperature(schedule):
    ts = np.array([s[0] for s in schedule], dtype=float)
    temps = np.array([s[1] for s in schedule], dtype=float)
    if ts.size < 1 or np.any(np.diff(ts) < 0):
        raise ValueError("schedule times must be non-decreasing")
    if np.any(temps <= 0):
        raise ValueError("schedule temperatures must be positive")
    return ts, temps


def ramp_schedule(T_start: float, T_end: float, rate: float, hold_before: float = 0.0,
                  hold_after: float = 60.0) -> list:
    """Piecewise-linear schedule (minutes, K): hold, linear ramp at ``rate`` K/min, hold."""
    ramp = abs(T_start - T_end) / rate
    return [(0.0, T_start), (hold_before, T_start), (hold_before + ramp, T_end),
            (hold_before + ramp + hold_after, T_end)]


def _clock(t, T1, form):
    t = np.maximum(t, 0.0)
    if form == "stretched-sqrt":
        return np.sqrt(t / T1)
    if form == "simple":
        return t / T1
    raise ValueError(f"unknown relaxation form {form!r}")


def t1_repolarization(atom: atomkit.AtomSpec, B: float, schedule: Sequence[tuple], T1: float,
                      form: str = "stretched-sqrt", *, res: ResonatorParams = None,
                      ens: DiscretizedEnsemble = None, lower=(1, 1), upper=(2, 2),
                      times: Sequence[float] = None, substep: float = 0.005,
                      t_quench: float = None) -> RepolarizationResult:
    """Populations relaxing toward the instantaneous thermal state of T(t).

    The relaxation clock phi(t) is t / T1 (simple) or sqrt(t / T1) (stretched),
    with t counted from ``t_quench`` (default: the first schedule point where
    the temperature changes).  Over a step dphi the populations move to
    p_eq + (p - p_eq) exp(-dphi), so a temperature step relaxes as
    exp(-phi(t)).  Times in minutes, temperatures in kelvin.

    ``delta_omega`` uses ``dispersive_shift`` of ``ens`` against ``res`` scaled
    by the transition polarisation relative to the final equilibrium.
    """
    if not T1 > 0:
        raise ValueError("T1 must be positive")
    ts, temps = _schedule_temperature(schedule)
    spec = atomkit.zeeman_spectrum(atom, B)
    energies = spec.energies
    i_lo, i_up = spec.index(lower), spec.index(upper)
    # p_F1 counts the lower electron branch, the F = I - 1/2 population at strong field
    m_low = -atom.J if atom.g_J > 0 else atom.J
    f1 = np.array([abs(lev.m_J_high - m_low) < 1e-9 for lev in spec.levels])
    if t_quench is None:
        moved = np.flatnonzero(np.abs(temps - temps[0]) > 0)
        t_quench = float(ts[max(moved[0] - 1, 0)]) if moved.size else float(ts[0])
    if times is None:
        times = np.linspace(ts[0], ts[-1], 1001)
    times = np.asarray(times, dtype=float)

    def temp_at(t):
        return float(np.interp(t, ts, temps))

    p = atomkit.boltzmann(energies, float(temps[0]))
    t_now = float(ts[0])
    out = np.empty((times.size, energies.size))
    for k, t_target in enumerate(times):
        while t_now < t_target - 1e-12:
            t_next = min(t_now + substep, t_target)
            bounds = _clock(np.array([t_now, t_next]) - t_quench, T1, form)
            p_eq = atomkit.boltzmann(energies, temp_at(0.5 * (t_now + t_next)))
            p = p_eq + (p - p_eq) * math.exp(-(bounds[1] - bounds[0]))
            t_now = t_next
        out[k] = p
    p_final = atomkit.boltzmann(energies, temps[-1])
    pol_ref = p_final[i_lo] - p_final[i_up]
    pol = (out[:, i_lo] - out[:, i_up]) / pol_ref
    if res is not None and ens is not None:
        unit = dispersive_shift(res, ens, 1.0)
        shift = unit * (pol - 1.0)
    else:
        shift = pol - 1.0
    return RepolarizationResult(times, np.interp(times, ts, temps), out, out[:, f1].sum(axis=1),
                                pol, shift, t_quench)
