"""Damped least squares (Levenberg-Marquardt) and the package's fit models.

Complex data are fitted on both quadratures (real and imaginary parts are
stacked into one residual vector).  Bounds are enforced by projecting every
trial point onto the box.  Frequency-like parameters are shifted to the trace
centre internally so that GHz carriers with kHz linewidths stay well
conditioned; results are always reported in the user's parameterisation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Mapping, Sequence

import numpy as np

from . import constants as const
from .cavity import ResonatorParams, s21_bare
from .ensemble import DEFAULT_N_RHO, DEFAULT_SPAN, SpinDistribution, discretize, s21_coupled


class FitError(RuntimeError):
    """The model could not be evaluated, or the problem is malformed."""


class GuessError(ValueError):
    """Automatic initial guesses could not be formed from the data."""


class FitWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Parameter:
    name: str
    value: float
    lower: float = -math.inf
    upper: float = math.inf
    fixed: bool = False


# -- model registry ----------------------------------------------------------

def _shift(names):
    """to/from-internal maps subtracting the reference frequency from ``names``."""
    def to_internal(p, x_ref):
        q = dict(p)
        for n in names:
            q[n] = p[n] - x_ref
        if "alpha" in q:
            q["alpha"] = p["alpha"] - x_ref * p["tau_delay"]
        return q

    def from_internal(q, x_ref):
        p = dict(q)
        for n in names:
            p[n] = q[n] + x_ref
        if "alpha" in p:
            p["alpha"] = q["alpha"] + x_ref * q["tau_delay"]
        return p

    return to_internal, from_internal


def _identity(p, x_ref):
    return dict(p)


@dataclass(frozen=True)
class Model:
    name: str
    param_names: tuple
    func: Callable
    to_internal: Callable = _identity
    from_internal: Callable = _identity
    shifted: tuple = ()


RESONATOR_PARAMS = ("omega_c", "kappa_i", "kappa_e", "amp_A", "alpha", "tau_delay", "psi")
RABI_PARAMS = RESONATOR_PARAMS + ("g_coll", "gamma_perp", "gamma_q", "omega_a")


def _resonator(x, p, opts):
    s = s21_bare(ResonatorParams(**{k: p[k] for k in RESONATOR_PARAMS}), x)
    return np.abs(s) ** 2 if opts.get("power") else s


def _rabi(x, p, opts):
    res = ResonatorParams(**{k: p[k] for k in RESONATOR_PARAMS})
    dist = SpinDistribution.from_fwhm(p["omega_a"], p["gamma_q"])
    ens = discretize(dist, opts.get("N_rho", DEFAULT_N_RHO), opts.get("span", DEFAULT_SPAN),
                     g_coll=p["g_coll"], gamma_perp=p["gamma_perp"])
    s = s21_coupled(res, ens, x)
    return np.abs(s) ** 2 if opts.get("power") else s


def _gaussian(x, p, opts):
    return p["b"] - p["a"] * np.exp(-0.5 * ((x - p["omega_a"]) / p["sigma"]) ** 2)


def _exp(x, p, opts):
    return p["A0"] * np.exp(-x / p["T"])


def _stretched(x, p, opts):
    return p["A0"] * np.exp(-np.sqrt(np.maximum(x, 0.0) / p["T"]))


def _hahn(x, p, opts):
    return p["A0"] * np.exp(-2 * x / p["T"])


MODELS = {
    "resonator": Model("resonator", RESONATOR_PARAMS, _resonator, *_shift(("omega_c",)), ("omega_c",)),
    "rabi": Model("rabi", RABI_PARAMS, _rabi, *_shift(("omega_c", "omega_a")), ("omega_c", "omega_a")),
    "gaussian": Model("gaussian", ("a", "b", "omega_a", "sigma"), _gaussian, *_shift(("omega_a",)),
                      ("omega_a",)),
    "exp_decay": Model("exp_decay", ("A0", "T"), _exp),
    "stretched_decay": Model("stretched_decay", ("A0", "T"), _stretched),
    "hahn_decay": Model("hahn_decay", ("A0", "T"), _hahn),
}


# -- problem and result ------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FitProblem:
    """An immutable least-squares problem.

    ``model_id`` names an entry of :data:`MODELS`, or is ``"custom"`` with
    ``model`` a callable ``f(x, params_dict) -> array``.
    """

    model_id: str
    params: tuple
    x: np.ndarray
    y: np.ndarray
    weights: np.ndarray = None
    options: Mapping = field(default_factory=dict)
    model: Callable = None

    def __post_init__(self):
        object.__setattr__(self, "params", tuple(self.params))
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y)
        y = y.astype(complex) if np.iscomplexobj(y) else y.astype(float)
        if x.shape != y.shape or x.ndim != 1:
            raise FitError("x and y must be 1-D arrays of equal length")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if w.shape != x.shape or np.any(w < 0):
                raise FitError("weights must be non-negative and match the data length")
            object.__setattr__(self, "weights", w)
        object.__setattr__(self, "options", MappingProxyType(dict(self.options)))
        if self.model_id == "custom":
            if self.model is None:
                raise FitError("custom problems need a model callable")
        elif self.model_id not in MODELS:
            raise FitError(f"unknown model {self.model_id!r}")
        else:
            expected = set(MODELS[self.model_id].param_names)
            got = [p.name for p in self.params]
            if set(got) != expected or len(got) != len(expected):
                raise FitError(f"{self.model_id} needs parameters {sorted(expected)}, got {got}")
        free = [p for p in self.params if not p.fixed]
        if not free:
            raise FitError("at least one parameter must be free")
        n_data = y.size * (2 if np.iscomplexobj(y) else 1)
        if n_data <= len(free):
            raise FitError("more free parameters than data points")
        for p in self.params:
            if not (p.lower <= p.value <= p.upper):
                raise FitError(f"initial {p.name}={p.value} outside [{p.lower}, {p.upper}]")

    @property
    def free_names(self) -> tuple:
        return tuple(p.name for p in self.params if not p.fixed)

    def initial(self) -> dict:
        return {p.name: float(p.value) for p in self.params}

    def evaluate(self, values: Mapping) -> np.ndarray:
        if self.model_id == "custom":
            return np.asarray(self.model(self.x, dict(values)))
        return np.asarray(MODELS[self.model_id].func(self.x, values, self.options))


@dataclass(frozen=True, eq=False)
class FitResult:
    model_id: str
    estimates: dict
    uncertainties: dict
    covariance: np.ndarray
    free: tuple
    residual_norm: float
    iterations: int
    converged: bool
    condition_warning: bool
    message: str
    fixed: dict = field(default_factory=dict)
    at_bounds: tuple = ()
    cost_history: tuple = ()

    def to_json(self) -> dict:
        return {
            "model_id": self.model_id,
            "estimates": {k: float(v) for k, v in self.estimates.items()},
            "uncertainties": {k: float(v) for k, v in self.uncertainties.items()},
            "fixed": {k: float(v) for k, v in self.fixed.items()},
            "free": list(self.free),
            "residual_norm": float(self.residual_norm),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "condition_warning": bool(self.condition_warning),
            "at_bounds": list(self.at_bounds),
            "message": self.message,
        }


# -- solver ----------------------------------------------------------------

class _Space:
    """Maps between the free internal vector and full user parameter dicts."""

    def __init__(self, problem: FitProblem, x_ref: float):
        self.problem = problem
        self.x_ref = x_ref
        model = MODELS.get(problem.model_id)
        self.to_int = model.to_internal if model else _identity
        self.from_int = model.from_internal if model else _identity
        self.shifted = set(model.shifted) if model else set()
        self.names = [p.name for p in problem.params]
        self.free = list(problem.free_names)
        self.base = self.to_int(problem.initial(), x_ref)
        by_name = {p.name: p for p in problem.params}
        self.lower = {n: by_name[n].lower for n in self.names}
        self.upper = {n: by_name[n].upper for n in self.names}
        self.bounded = any(math.isfinite(self.lower[n]) or math.isfinite(self.upper[n]) for n in self.free)

    def vector(self, internal: dict) -> np.ndarray:
        return np.array([internal[n] for n in self.free], dtype=float)

    def internal(self, theta) -> dict:
        q = dict(self.base)
        q.update(zip(self.free, (float(t) for t in theta)))
        return q

    def user(self, theta) -> dict:
        return self.from_int(self.internal(theta), self.x_ref)

    def project(self, theta) -> np.ndarray:
        if not self.bounded:
            return theta
        p = self.user(theta)
        for n in self.free:
            p[n] = min(max(p[n], self.lower[n]), self.upper[n])
        return self.vector(self.to_int(p, self.x_ref))


def levenberg_marquardt(problem: FitProblem, *, max_iter: int = 500, ftol: float = 1e-12,
                        gtol: float = 1e-10, xtol: float = 1e-15, lambda0: float = 1e-3,
                        rel_step: float = 1e-6, x_ref: float = None) -> FitResult:
    """Minimise sum_i w_i |y_i - model(x_i)|^2 over the free parameters.

    Marquardt-scaled damping starts at ``lambda0`` and moves by 10x on each
    rejected or accepted step.  The Jacobian uses central differences with a
    relative step ``rel_step`` per parameter.  Covariance is estimated from
    J^T J at the optimum, scaled by the reduced chi-square unless weights
    were given.
    """
    if x_ref is None:
        x_ref = 0.5 * (problem.x.min() + problem.x.max()) if MODELS.get(problem.model_id, None) and \
            MODELS[problem.model_id].shifted else 0.0
    space = _Space(problem, x_ref)
    sqrt_w = None if problem.weights is None else np.sqrt(problem.weights)
    y = problem.y

    def residual(theta):
        values = space.user(theta)
        f = problem.evaluate(values)
        if f.shape != y.shape or not np.all(np.isfinite(f)):
            raise FitError(f"non-finite model output at {values}")
        r = y - f
        if sqrt_w is not None:
            r = r * sqrt_w
        if np.iscomplexobj(r):
            return np.concatenate([r.real, r.imag])
        return r.astype(float)

    free = space.free
    lo_int = np.array([space.lower[n] - (x_ref if n in space.shifted else 0.0) for n in free])
    hi_int = np.array([space.upper[n] - (x_ref if n in space.shifted else 0.0) for n in free])

    def jacobian(theta, r0):
        J = np.empty((r0.size, theta.size))
        for k in range(theta.size):
            h = rel_step * max(abs(theta[k]), 1e-3)
            up, dn = theta.copy(), theta.copy()
            up[k] += h
            dn[k] -= h
            # one-sided at an active bound; "alpha" has no fixed internal box
            if free[k] != "alpha" and dn[k] < lo_int[k]:
                J[:, k] = (residual(up) - r0) / h
            elif free[k] != "alpha" and up[k] > hi_int[k]:
                J[:, k] = (r0 - residual(dn)) / h
            else:
                J[:, k] = (residual(up) - residual(dn)) / (2 * h)
        # residual = y - f, so the model Jacobian is -dr/dtheta
        return -J

    theta = space.vector(space.base)
    r = residual(theta)
    cost = float(r @ r)
    lam = lambda0
    history = [cost]
    converged = False
    cond_flag = False
    message = "maximum iterations reached"
    it = 0
    for it in range(1, max_iter + 1):
        if cost == 0.0:
            converged, message = True, "zero residual"
            it -= 1
            break
        J = jacobian(theta, r)
        g = J.T @ r
        if np.max(np.abs(g)) < gtol:
            converged, message = True, "gradient tolerance"
            it -= 1
            break
        A = J.T @ J
        d = np.diag(A).copy()
        d[d <= 0] = max(float(d.max()), 1.0) * 1e-15
        accepted = False
        while lam < 1e20:
            try:
                step = np.linalg.solve(A + lam * np.diag(d), g)
            except np.linalg.LinAlgError:
                cond_flag = True
                lam *= 10
                continue
            trial = space.project(theta + step)
            r_new = residual(trial)
            cost_new = float(r_new @ r_new)
            if cost_new < cost:
                accepted = True
                break
            lam *= 10
        if not accepted:
            converged, message = True, "no further decrease (damping limit)"
            break
        lam = max(lam / 10, 1e-300)
        dx = np.linalg.norm(trial - theta)
        rel = (cost - cost_new) / cost
        theta, r, cost = trial, r_new, cost_new
        history.append(cost)
        if cost == 0.0 or rel < ftol:
            converged, message = True, "relative cost change" if cost else "zero residual"
            break
        if dx <= xtol * (np.linalg.norm(theta) + xtol):
            converged, message = True, "step tolerance"
            break

    J = jacobian(theta, r)
    A = J.T @ J
    try:
        scale = np.sqrt(np.diag(A))
        scale[scale == 0] = 1.0
        cond = np.linalg.cond(A / np.outer(scale, scale))
    except np.linalg.LinAlgError:
        cond = math.inf
    if not np.isfinite(cond) or cond > 1e12:
        cond_flag = True
        cov_int = np.linalg.pinv(A)
    else:
        cov_int = np.linalg.inv(A)
    dof = r.size - theta.size
    if problem.weights is None:
        cov_int = cov_int * (cost / dof if dof > 0 else math.nan)
    # affine map internal -> user for the free block
    user0 = space.user(theta)
    T = np.empty((len(free), len(free)))
    for k in range(len(free)):
        e = theta.copy()
        e[k] += 1.0
        u1 = space.user(e)
        T[:, k] = [u1[n] - user0[n] for n in free]
    cov = T @ cov_int @ T.T
    cov = 0.5 * (cov + cov.T)
    est = {n: float(user0[n]) for n in space.names}
    unc = {n: float(math.sqrt(cov[i, i])) if cov[i, i] >= 0 else math.nan for i, n in enumerate(free)}
    at_bounds = tuple(n for n in free
                      if np.isclose(est[n], space.lower[n], rtol=1e-9, atol=0)
                      or np.isclose(est[n], space.upper[n], rtol=1e-9, atol=0))
    fixed = {p.name: float(p.value) for p in problem.params if p.fixed}
    return FitResult(problem.model_id, est, unc, cov, tuple(free), math.sqrt(cost), it, converged,
                     bool(cond_flag), message, fixed, at_bounds, tuple(history))


# -- model-specific front ends ---------------------------------------------

def _params(values: Mapping, fixed=(), bounds: Mapping = None) -> list:
    bounds = bounds or {}
    out = []
    for name, v in values.items():
        lo, hi = bounds.get(name, (-math.inf, math.inf))
        out.append(Parameter(name, float(v), lo, hi, name in fixed))
    return out


RESONATOR_BOUNDS = {"kappa_i": (0.0, math.inf), "kappa_e": (1e-12, math.inf), "amp_A": (1e-12, math.inf),
                    "omega_c": (1e-12, math.inf)}


def guess_resonator(x, y) -> dict:
    """Initial values for the notch model from a trace spanning several linewidths."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y)
    power = not np.iscomplexobj(y)
    mag = np.sqrt(np.abs(y)) if power else np.abs(y)
    n = x.size
    edge = max(3, n // 10)
    edges = np.r_[np.arange(edge), np.arange(n - edge, n)]
    A = float(np.median(mag[edges]))
    noise = float(np.std(np.diff(mag[edges])) / math.sqrt(2))
    k = int(np.argmin(mag))
    depth = A - mag[k]
    if not depth > 3 * noise or depth <= 0:
        raise GuessError(f"no visible dip: depth {depth:.3g} vs noise floor {noise:.3g}")
    omega_c = float(x[k])
    p_norm = (mag / A) ** 2
    half = 1 - 0.5 * (1 - p_norm[k])
    left = k
    while left > 0 and p_norm[left] < half:
        left -= 1
    right = k
    while right < n - 1 and p_norm[right] < half:
        right += 1
    kappa = max(float(x[right] - x[left]), 2 * float(x[1] - x[0]))
    kappa_e = min(max(kappa * (1 - mag[k] / A), 1e-3 * kappa), 0.999 * kappa)
    guess = {"omega_c": omega_c, "kappa_i": kappa - kappa_e, "kappa_e": kappa_e, "amp_A": A,
             "alpha": 0.0, "tau_delay": 0.0, "psi": 0.0}
    if not power:
        phase = np.unwrap(np.angle(y))
        slope, _ = np.polyfit(x[edges], phase[edges], 1)
        tau = -float(slope)
        x_ref = 0.5 * (x.min() + x.max())
        alpha_c = float(np.angle(np.mean(y[edges] * np.exp(1j * tau * (x[edges] - x_ref)))))
        guess["tau_delay"] = tau
        guess["alpha"] = alpha_c + x_ref * tau
    return guess


def fit_resonator(x, y, *, initial: Mapping = None, fixed: Sequence[str] = (), weights=None,
                  **lm_options) -> FitResult:
    """Fit the notch model to a complex trace, or to |S21|^2 when ``y`` is real.

    Power-only data cannot identify the phase offset or the delay, so
    ``alpha`` and ``tau_delay`` are fixed at 0 for real input.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y)
    power = not np.iscomplexobj(y)
    values = guess_resonator(x, y)
    if initial:
        values.update(initial)
    fixed = set(fixed)
    if power:
        values["alpha"] = 0.0
        values["tau_delay"] = 0.0
        fixed |= {"alpha", "tau_delay"}
    problem = FitProblem("resonator", _params(values, fixed, RESONATOR_BOUNDS), x, y, weights,
                         {"power": power})
    result = levenberg_marquardt(problem, **lm_options)
    est = result.estimates
    # the carrier phase is only defined modulo 2 pi once the delay is resolved
    est["alpha"] = float(math.remainder(est["alpha"], 2 * math.pi))
    est["kappa"] = est["kappa_i"] + est["kappa_e"]
    return result


def resonator_from_fit(result: FitResult) -> ResonatorParams:
    return ResonatorParams(**{k: result.estimates[k] for k in RESONATOR_PARAMS})


def normalize_trace(y, res: ResonatorParams):
    """Divide out the fitted background amplitude (complex data) or its square (power)."""
    y = np.asarray(y)
    return y / res.amp_A if np.iscomplexobj(y) else y / res.amp_A**2


def fit_rabi(x, y, resonator: ResonatorParams, initial: Mapping, *,
             free: Sequence[str] = ("g_coll", "gamma_perp", "gamma_q", "omega_a"),
             N_rho: int = DEFAULT_N_RHO, span: float = DEFAULT_SPAN, weights=None,
             **lm_options) -> FitResult:
    """Coupled-spectrum fit with all parameters outside ``free`` held fixed.

    Real ``y`` is treated as |S21|^2; complex ``y`` fits both quadratures.
    """
    y = np.asarray(y)
    values = resonator.as_dict()
    values.update({"g_coll": 0.0, "gamma_perp": 0.0, "gamma_q": 1.0, "omega_a": resonator.omega_c})
    values.update(initial)
    fixed = set(RABI_PARAMS) - set(free)
    bounds = dict(RESONATOR_BOUNDS)
    bounds.update({"g_coll": (0.0, math.inf), "gamma_perp": (0.0, math.inf), "gamma_q": (1e-9, math.inf)})
    problem = FitProblem("rabi", _params(values, fixed, bounds), x, y, weights,
                         {"power": not np.iscomplexobj(y), "N_rho": N_rho, "span": span})
    return levenberg_marquardt(problem, **lm_options)


DECAY_FORMS = {"exp": "exp_decay", "stretched-sqrt": "stretched_decay", "stretched": "stretched_decay",
               "hahn-2tau": "hahn_decay", "hahn": "hahn_decay"}


def fit_decay(t, y, form: str = "exp", *, T_upper: float = None, weights=None, **lm_options) -> FitResult:
    """Fit A0 exp(-t/T), A0 exp(-sqrt(t/T)) or A0 exp(-2 tau/T).

    A constant series has no decay to fit: T is pinned to ``T_upper``
    (default 1e4 times the time span) and the result is flagged unconverged.
    """
    if form not in DECAY_FORMS:
        raise ValueError(f"unknown decay form {form!r}; choose from {sorted(DECAY_FORMS)}")
    model_id = DECAY_FORMS[form]
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    span = float(t.max() - t.min()) or 1.0
    T_upper = 1e4 * max(span, float(t.max())) if T_upper is None else T_upper
    if np.ptp(y) <= 1e-12 * max(abs(float(np.mean(y))), 1e-300):
        warnings.warn("constant series: decay time unconstrained", FitWarning, stacklevel=2)
        est = {"A0": float(np.mean(y)), "T": T_upper}
        return FitResult(model_id, est, {"A0": math.nan, "T": math.nan}, np.full((2, 2), math.nan),
                         ("A0", "T"), 0.0, 0, False, True, "degenerate input: constant series",
                         {}, ("T",), ())
    if np.corrcoef(t, y)[0, 1] > 0:
        warnings.warn("series grows with time; a decay model is a poor description", FitWarning,
                      stacklevel=2)
    pos = y > 0
    if pos.sum() < 2:
        raise ValueError("decay fits need positive amplitudes")
    arg = {"exp_decay": t, "stretched_decay": np.sqrt(np.maximum(t, 0)), "hahn_decay": 2 * t}[model_id]
    slope, icpt = np.polyfit(arg[pos], np.log(y[pos]), 1)
    rate = max(-slope, 1.0 / T_upper)
    T0 = 1.0 / rate**2 if model_id == "stretched_decay" else 1.0 / rate
    T0 = min(T0, 0.5 * T_upper)
    values = {"A0": float(math.exp(icpt)), "T": float(T0)}
    problem = FitProblem(model_id, _params(values, (), {"T": (1e-300, T_upper)}), t, y, weights)
    result = levenberg_marquardt(problem, **lm_options)
    if "T" in result.at_bounds:
        return FitResult(result.model_id, result.estimates, result.uncertainties, result.covariance,
                         result.free, result.residual_norm, result.iterations, False,
                         result.condition_warning, "decay time at its upper bound", result.fixed,
                         result.at_bounds, result.cost_history)
    return result


def fit_gaussian_scan(x, y, *, weights=None, **lm_options) -> FitResult:
    """Fit b - a exp(-(x - omega_a)^2 / 2 sigma^2); ``gamma_q`` is added to the estimates."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = x.size
    edge = max(2, n // 10)
    b = float(np.median(np.r_[y[:edge], y[-edge:]]))
    dev = y - b
    k = int(np.argmax(np.abs(dev)))
    a = -float(dev[k])
    if a == 0.0:
        warnings.warn("flat scan: line width is unconstrained", FitWarning, stacklevel=2)
        sigma0 = 0.1 * float(np.ptp(x)) or 1.0
    else:
        area = float(np.trapezoid(-dev, x))
        sigma0 = abs(area / (a * math.sqrt(2 * math.pi)))
        if not (0 < sigma0 < np.ptp(x)):
            sigma0 = 0.1 * float(np.ptp(x))
    values = {"a": a, "b": b, "omega_a": float(x[k]), "sigma": sigma0}
    problem = FitProblem("gaussian", _params(values, ()), x, y, weights)
    result = levenberg_marquardt(problem, **lm_options)
    est = result.estimates
    est["sigma"] = abs(est["sigma"])
    est["gamma_q"] = const.FWHM_PER_SIGMA * est["sigma"]
    if "sigma" in result.uncertainties:
        result.uncertainties["gamma_q"] = const.FWHM_PER_SIGMA * result.uncertainties["sigma"]
    if abs(est["a"]) <= 1e-12 * max(1.0, abs(est["b"])):
        warnings.warn("fitted amplitude is zero: line width is unconstrained", FitWarning, stacklevel=2)
    return result
