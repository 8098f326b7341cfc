"""Command-line front end: ``cryospin {atom,sim,fit,od,fixtures} ...``.

Every command starts from the matching fixture configuration, overlays the
blocks of ``--config`` (strictly validated) and then any explicit flags.
The resolved configuration is written next to each output file as a JSON
sidecar.  Exit codes: 0 success, 1 fit did not converge, 2 input error.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from . import atomkit, dynamics, ensemble, fitkit, fixtures, optics
from . import io as cio
from .cavity import ResonatorParams, s21_bare

EXIT_OK, EXIT_FIT, EXIT_INPUT = 0, 1, 2


class InputError(ValueError):
    pass


# -- configuration resolution --------------------------------------------------

def _fixture(name: str) -> dict:
    return copy.deepcopy(fixtures.configs()[name])


def resolve(args, defaults: dict, required: tuple, flags: dict) -> dict:
    """defaults <- --config blocks <- explicit flags (``None`` means not given)."""
    cfg = copy.deepcopy(defaults)
    if args.config:
        user = cio.load_config(args.config)
        missing = [b for b in required if b not in user]
        if missing:
            raise cio.ConfigError(f"{args.config}: missing block(s) {', '.join(missing)} "
                                  f"required by '{args.command} {args.action}'")
        cfg = cio.merge(cfg, user)
    for (block, key), value in flags.items():
        if value is not None:
            cfg.setdefault(block, {})[key] = value
    cio.validate_config(cfg, source="resolved configuration")
    return cfg


def atom_from(block: dict) -> atomkit.AtomSpec:
    base = atomkit.SODIUM
    return atomkit.AtomSpec(block.get("name", base.name), block.get("I", base.I), block.get("J", base.J),
                            block.get("A_hfs", base.A_hfs), block.get("g_J", base.g_J),
                            block.get("g_I", base.g_I), block.get("A_scale", 1.0))


def resonator_from(block: dict) -> ResonatorParams:
    return ResonatorParams(**block)


def ensemble_from(block: dict, omega_a: float) -> tuple:
    """(DiscretizedEnsemble, resolved gamma_perp)."""
    N_rho = block.get("N_rho", ensemble.DEFAULT_N_RHO)
    span = block.get("span", ensemble.DEFAULT_SPAN)
    dist = ensemble.SpinDistribution.from_fwhm(block.get("omega_a", omega_a), block["gamma_q"])
    gp = block.get("gamma_perp")
    if gp is None:
        gp = ensemble.gamma_perp_for_linewidth(dist, block["Gamma"], N_rho, span)
    return ensemble.discretize(dist, N_rho, span, block.get("g_coll", 0.0), gp), gp


def _out(args, name: str) -> Path:
    return Path(args.out) / name


def _emit(args, name, header, columns, command, cfg, results=None):
    path = cio.write_csv(_out(args, name), header, columns)
    cio.write_sidecar(path, command, cfg, results)
    print(f"wrote {path}")
    return path


def _pair(text: str, what: str) -> tuple:
    try:
        a, b = (float(v) for v in text.split(","))
    except ValueError:
        raise InputError(f"{what} must be two comma-separated numbers, got {text!r}") from None
    return a, b


def _floats(text: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"expected comma-separated numbers, got {text!r}") from None


def _svg(args, name, x, ys, xlabel, ylabel, labels=None):
    if not args.svg:
        return
    try:
        import matplotlib
    except ImportError:
        raise InputError("--svg needs matplotlib (pip install matplotlib)") from None
    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "cryospin"
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    for k, y in enumerate(ys):
        ax.plot(x, y, label=labels[k] if labels else None)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if labels:
        ax.legend(fontsize="small")
    path = _out(args, name)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    print(f"wrote {path}")


def _label_name(label) -> str:
    return f"E_{atomkit._nice(label[0])}_{atomkit._nice(label[1])}_mhz"


# -- atom ------------------------------------------------------------------

def _atom_defaults() -> dict:
    a = atomkit.SODIUM
    return {"atom": {"name": a.name, "I": a.I, "J": a.J, "A_hfs": a.A_hfs, "g_J": a.g_J, "g_I": a.g_I,
                     "A_scale": 1.0}}


def cmd_atom_levels(args):
    cfg = resolve(args, dict(_atom_defaults(), sweep={"b_max": 2000.0, "b_points": 400}), ("atom",),
                  {("atom", "A_scale"): args.ascale, ("sweep", "b_max"): args.bmax,
                   ("sweep", "b_points"): args.points})
    atom = atom_from(cfg["atom"])
    b_max, n = cfg["sweep"]["b_max"], cfg["sweep"]["b_points"]
    if b_max < 0 or n < 1:
        raise InputError("--bmax must be >= 0 and --points >= 1")
    fields = np.linspace(0.0, b_max, n) if b_max > 0 else np.zeros(1)
    specs = [atomkit.zeeman_spectrum(atom, b) for b in fields]
    labels = sorted(specs[0].labels)
    cols = [fields] + [np.array([s.level(lab).energy for s in specs]) for lab in labels]
    _emit(args, "atom_levels.csv", ["B_gauss"] + [_label_name(l) for l in labels], cols, "atom levels", cfg)
    last = specs[-1]
    print(f"levels at B = {cio.fmt(last.B)} G")
    print("energy_mhz,degeneracy,labels")
    e = last.energies
    groups = []
    for k in np.argsort(e, kind="stable"):
        if groups and abs(e[k] - groups[-1][0]) <= 1e-9 * max(1.0, abs(e[k])):
            groups[-1][1].append(last.levels[k].adiabatic_label)
        else:
            groups.append([e[k], [last.levels[k].adiabatic_label]])
    for energy, labs in groups:
        print(f"{cio.fmt(energy)},{len(labs)},{' '.join(f'|{f},{m}>' for f, m in sorted(labs))}")
    if len(groups) == 2:
        print(f"splitting_mhz,{cio.fmt(groups[1][0] - groups[0][0])}")
    _svg(args, "atom_levels.svg", fields, cols[1:], "B (G)", "E/h (MHz)", [_label_name(l) for l in labels])
    return EXIT_OK


def _label(text: str) -> tuple:
    f, m = _pair(text, "level label")
    return (f, m)


def cmd_atom_field(args):
    cfg = resolve(args, _atom_defaults(), ("atom",), {("atom", "A_scale"): args.ascale})
    atom = atom_from(cfg["atom"])
    b = atomkit.field_for_transition(atom, _label(args.lower), _label(args.upper), args.target_mhz,
                                     (0.0, args.bmax_search))
    print(f"B_gauss,{b:.6f}")
    return EXIT_OK


def cmd_atom_populations(args):
    cfg = resolve(args, _atom_defaults(), ("atom",), {("atom", "A_scale"): args.ascale})
    atom = atom_from(cfg["atom"])
    T = args.temp_mk * 1e-3
    spec = atomkit.zeeman_spectrum(atom, args.field_g)
    p = atomkit.thermal_populations(atom, args.field_g, T)
    print("F,m_F,energy_mhz,population")
    for lev, pk in zip(spec.levels, p):
        f, m = lev.adiabatic_label
        print(f"{f},{m},{cio.fmt(lev.energy)},{cio.fmt(pk)}")
    F_low = atom.I - atom.J
    print(f"p_F{atomkit._nice(F_low)}_adiabatic,{cio.fmt(atomkit.manifold_population(spec, p, F_low))}")
    m_low = -0.5 if atom.g_J > 0 else 0.5
    print(f"p_lower_branch,{cio.fmt(atomkit.branch_population(spec, p, m_low))}")
    return EXIT_OK


# -- sim -------------------------------------------------------------------

RES_FIXTURES = {"before": "resonator-before", "after": "resonator-after"}


def cmd_sim_s21(args):
    base = _fixture(RES_FIXTURES.get(args.fixture, "resonator-after"))
    if args.fixture == "coupled":
        base["resonator"] = fixtures.RESONATOR_COUPLED.as_dict()
    flags = {("sweep", "points"): args.points, ("sweep", "span_kappa"): args.span_kappa,
             ("ensemble", "g_coll"): args.gcoll}
    cfg = resolve(args, base, ("resonator",), flags)
    res = resonator_from(cfg["resonator"])
    sw = cfg["sweep"]
    half = sw.get("span_kappa", 20.0) * res.kappa
    w = np.linspace(res.omega_c - half, res.omega_c + half, sw.get("points", 2001))
    results = {}
    if "ensemble" in cfg and cfg["ensemble"].get("g_coll") is not None:
        block = {"gamma_q": fixtures.SPIN_FWHM, "Gamma": fixtures.EFFECTIVE_LINEWIDTH}
        block.update(cfg["ensemble"])
        block.setdefault("omega_a", res.omega_c + (args.delta_mhz or 0.0))
        cfg["ensemble"] = block
        ens, gp = ensemble_from(block, res.omega_c)
        y = ensemble.s21_coupled(res, ens, w)
        results["gamma_perp"] = gp
    else:
        y = s21_bare(res, w)
    _emit(args, "s21.csv", ["freq_mhz", "re", "im"], [w, y.real, y.imag], "sim s21", cfg, results)
    _svg(args, "s21.svg", w, [np.abs(y) ** 2], "frequency (MHz)", "|S21|^2")
    return EXIT_OK


def cmd_sim_rabi_map(args):
    name = f"rabi-{args.fixture}"
    if name not in fixtures.configs():
        raise InputError(f"unknown coupling fixture {args.fixture!r}")
    flags = {("atom", "A_scale"): args.ascale, ("sweep", "b_min"): args.bmin, ("sweep", "b_max"): args.bmax,
             ("sweep", "b_points"): args.bpoints, ("sweep", "omega_min"): args.wmin,
             ("sweep", "omega_max"): args.wmax, ("sweep", "omega_points"): args.wpoints,
             ("ensemble", "g_coll"): args.gcoll}
    cfg = resolve(args, _fixture(name), ("atom", "resonator", "ensemble"), flags)
    atom = atom_from(cfg["atom"])
    res = resonator_from(cfg["resonator"])
    sw = cfg["sweep"]
    B = np.linspace(sw["b_min"], sw["b_max"], sw["b_points"])
    w = np.linspace(sw["omega_min"], sw["omega_max"], sw["omega_points"])
    ens, gp = ensemble_from(cfg["ensemble"], res.omega_c)
    dist = ensemble.SpinDistribution.from_fwhm(res.omega_c, cfg["ensemble"]["gamma_q"])
    cmap = ensemble.avoided_crossing_map(res, dist, atom, B, w, g_coll=ens.g_coll, gamma_perp=gp,
                                         N_rho=ens.N_rho, span=cfg["ensemble"].get("span", 6.0),
                                         threads=args.threads)
    splits = cmap.splittings()
    b_cross = cmap.crossing_field()
    results = {"gamma_perp": gp, "crossing_field_g": b_cross,
               "min_splitting_mhz": float(np.min(splits)),
               "omega_a_mhz": cmap.omega_a}
    BB, WW = np.meshgrid(B, w, indexing="ij")
    _emit(args, "rabi_map.csv", ["B_gauss", "freq_mhz", "s21_sq"], [BB.ravel(), WW.ravel(), cmap.power.ravel()],
          "sim rabi-map", cfg, results)
    print(f"crossing_field_g,{b_cross:.6f}")
    print(f"min_splitting_mhz,{cio.fmt(np.min(splits))}")
    if args.svg:
        k = int(np.argmin(splits))
        _svg(args, "rabi_map.svg", w, [cmap.power[k]], "frequency (MHz)", f"|S21|^2 at {B[k]:.2f} G")
    return EXIT_OK


def _echo_ensemble(cfg) -> ensemble.DiscretizedEnsemble:
    block = dict(cfg["ensemble"])
    block.setdefault("gamma_perp", 0.0)
    ens, _ = ensemble_from(block, 0.0)
    return ens


def cmd_sim_echo(args):
    flags = {("dynamics", "t2_ms"): args.t2_ms,
             ("dynamics", "tau_us"): _floats(args.tau_us) if args.tau_us else None}
    cfg = resolve(args, _fixture("echo"), ("ensemble", "dynamics"), flags)
    if args.sequence:
        seq_text = Path(args.sequence).read_text(encoding="utf-8")
        cfg["dynamics"]["sequence"] = json.loads(seq_text)
    dyn = cfg["dynamics"]
    ens = _echo_ensemble(cfg)
    decay = dynamics.DecayParams(T2_hom=dyn.get("t2_ms", math.inf))
    taus = dyn["tau_us"] if isinstance(dyn["tau_us"], list) else [dyn["tau_us"]]
    if "sequence" in dyn or len(taus) == 1:
        seq = (dynamics.PulseSequence.from_json(dyn["sequence"]) if "sequence" in dyn
               else dynamics.hahn_sequence(float(taus[0])))
        out = dynamics.run_sequence(ens, seq, decay)
        s = out.signal
        _emit(args, "echo_trace.csv", ["t_us", "re", "im", "abs"], [out.times, s.real, s.imag, np.abs(s)],
              "sim echo", cfg, {"echoes": out.echoes, "echo_times_us": out.echo_times})
        for tag, amp in out.echoes.items():
            print(f"{tag},{cio.fmt(out.echo_times[tag])},{cio.fmt(amp)}")
        _svg(args, "echo_trace.svg", out.times, [np.abs(s)], "t (us)", "|signal|")
        return EXIT_OK
    train = dynamics.hahn_decay(ens, taus, decay)
    fit = fitkit.fit_decay(train.times * 1e-3, train.amplitudes, "hahn-2tau")
    results = {"t2_hahn_ms": fit.estimates["T"]}
    _emit(args, "hahn_decay.csv", ["tau_us", "echo_abs"], [train.times, train.amplitudes], "sim echo", cfg,
          results)
    print(f"t2_hahn_ms,{cio.fmt(fit.estimates['T'])}")
    _svg(args, "hahn_decay.svg", train.times, [train.amplitudes], "tau (us)", "echo amplitude")
    return EXIT_OK


def cmd_sim_cpmg(args):
    flags = {("dynamics", "n"): args.n, ("dynamics", "tau_us"): args.tau_us, ("dynamics", "t2_ms"): args.t2_ms,
             ("dynamics", "flip_error"): args.flip_error, ("dynamics", "refocus_axis"): args.axis}
    cfg = resolve(args, _fixture("cpmg"), ("ensemble", "dynamics"), flags)
    dyn = cfg["dynamics"]
    ens = _echo_ensemble(cfg)
    decay = dynamics.DecayParams(T2_hom=dyn.get("t2_ms", math.inf))
    train = dynamics.cpmg(ens, dyn["n"], float(dyn["tau_us"]), decay, dyn.get("flip_error", 0.0),
                          dyn.get("refocus_axis", "y"))
    results = {}
    if math.isfinite(decay.T2_hom):
        fit = fitkit.fit_decay(train.times * 1e-3, train.amplitudes, "exp")
        results["t2_cpmg_ms"] = fit.estimates["T"]
    idx = np.arange(1, train.times.size + 1)
    _emit(args, "cpmg.csv", ["echo", "t_us", "amplitude"], [idx, train.times, train.amplitudes], "sim cpmg",
          cfg, results)
    if "t2_cpmg_ms" in results:
        print(f"t2_cpmg_ms,{cio.fmt(results['t2_cpmg_ms'])}")
    _svg(args, "cpmg.svg", train.times, [train.amplitudes], "t (us)", "echo amplitude")
    return EXIT_OK


def cmd_sim_holeburn(args):
    flags = {("dynamics", "detuning_mhz"): args.detuning_mhz, ("dynamics", "pulse_fwhm_mhz"): args.pulse_fwhm,
             ("dynamics", "points"): args.points}
    cfg = resolve(args, _fixture("holeburn"), ("resonator", "ensemble", "dynamics"), flags)
    dyn = cfg["dynamics"]
    res = resonator_from(cfg["resonator"])
    wa = res.omega_c + dyn["detuning_mhz"]
    ens, gp = ensemble_from(cfg["ensemble"], wa)
    gq = cfg["ensemble"]["gamma_q"]
    scan = np.linspace(ens.omega_a - 3 * gq, ens.omega_a + 3 * gq, dyn.get("points", 301))
    hb = dynamics.hole_burning_scan(res, ens, dyn["pulse_fwhm_mhz"], scan)
    rep = dynamics.hole_burning_report(hb, gp)
    results = {"gamma_q_fit_mhz": rep["gamma_q"], "omega_a_fit_mhz": rep["omega_a"],
               "effective_linewidth_mhz": rep["effective_linewidth"], "gamma_perp": gp}
    _emit(args, "holeburn.csv", ["omega_s_mhz", "shift_mhz"], [hb.omega_s, hb.shift], "sim holeburn", cfg,
          results)
    print(f"gamma_q_fit_mhz,{cio.fmt(rep['gamma_q'])}")
    print(f"effective_linewidth_mhz,{cio.fmt(rep['effective_linewidth'])}")
    _svg(args, "holeburn.svg", hb.omega_s, [hb.shift], "spectroscopy tone (MHz)", "cavity shift (MHz)")
    return EXIT_OK


def cmd_sim_t1(args):
    flags = {("dynamics", "t1_min"): args.t1_min, ("dynamics", "form"): args.form,
             ("dynamics", "t_hot_k"): None if args.t_hot_mk is None else args.t_hot_mk * 1e-3,
             ("dynamics", "t_cold_k"): None if args.t_cold_mk is None else args.t_cold_mk * 1e-3,
             ("dynamics", "ramp_mk_per_min"): args.rate, ("dynamics", "duration_min"): args.duration,
             ("dynamics", "points"): args.points}
    cfg = resolve(args, _fixture("t1"), ("atom", "resonator", "ensemble", "dynamics"), flags)
    dyn = cfg["dynamics"]
    atom = atom_from(cfg["atom"])
    res = resonator_from(cfg["resonator"])
    ens, _ = ensemble_from(cfg["ensemble"], res.omega_c + dyn.get("detuning_mhz", fixtures.DISPERSIVE_DETUNING))
    hold = 5.0
    ramp = abs(dyn["t_hot_k"] - dyn["t_cold_k"]) / (dyn["ramp_mk_per_min"] * 1e-3)
    after = max(dyn["duration_min"] - hold - ramp, 0.0)
    sched = dynamics.ramp_schedule(dyn["t_hot_k"], dyn["t_cold_k"], dyn["ramp_mk_per_min"] * 1e-3, hold, after)
    times = np.linspace(0.0, sched[-1][0], dyn.get("points", 241))
    field = dyn.get("field_g", fixtures.CROSSING_FIELD_G)
    out = dynamics.t1_repolarization(atom, field, sched, dyn["t1_min"], dyn.get("form", "stretched-sqrt"),
                                     res=res, ens=ens, times=times)
    results = {"t_quench_min": out.t_quench, "ramp_end_min": hold + ramp}
    _emit(args, "t1.csv",
          ["t_min", "t_since_quench_min", "temperature_k", "p_f1", "polarization", "delta_omega_mhz"],
          [out.times, out.times - out.t_quench, out.temperature, out.p_F1, out.polarization, out.delta_omega],
          "sim t1", cfg, results)
    _svg(args, "t1.svg", out.times, [out.delta_omega], "t (min)", "cavity shift (MHz)")
    return EXIT_OK


# -- fit -------------------------------------------------------------------

def _finish_fit(args, name, result, x, resid_cols, resid_header, cfg):
    report = result.to_json()
    report["config"] = cfg
    report["version"] = __version__
    cio.write_json(_out(args, f"fit_{name}.json"), report)
    print(f"wrote {_out(args, f'fit_{name}.json')}")
    _emit(args, f"fit_{name}_residuals.csv", resid_header, [x] + resid_cols, f"fit {name}", cfg)
    for k in sorted(result.estimates):
        u = result.uncertainties.get(k)
        print(f"{k},{cio.fmt(result.estimates[k])}" + (f",{cio.fmt(u)}" if u is not None else ""))
    if not result.converged:
        print(f"fit did not converge: {result.message}", file=sys.stderr)
        return EXIT_FIT
    return EXIT_OK


def _residual_columns(y, f):
    r = y - f
    if np.iscomplexobj(r):
        return [r.real, r.imag], ["re", "im"]
    return [r], ["residual"]


def cmd_fit_resonator(args):
    x, y = cio.read_trace(args.trace)
    cfg = {"input": str(args.trace)}
    result = fitkit.fit_resonator(x, y)
    res = fitkit.resonator_from_fit(result)
    f = s21_bare(res, x)
    if not np.iscomplexobj(y):
        f = np.abs(f) ** 2
    cols, names = _residual_columns(y, f)
    return _finish_fit(args, "resonator", result, x, cols, ["freq_mhz"] + names, cfg)


def cmd_fit_rabi(args):
    x, y = cio.read_trace(args.trace)
    cfg = resolve(args, _fixture(f"rabi-{args.fixture}"), ("resonator", "ensemble"), {})
    cfg = {"resonator": cfg["resonator"], "ensemble": cfg["ensemble"], "input": str(args.trace)}
    res = resonator_from(cfg["resonator"])
    y = fitkit.normalize_trace(y, res)
    res = res.replace(amp_A=1.0)
    eb = cfg["ensemble"]
    gp0 = eb.get("gamma_perp")
    if gp0 is None:
        gp0 = ensemble.gamma_perp_for_linewidth(
            ensemble.SpinDistribution.from_fwhm(res.omega_c, eb["gamma_q"]), eb["Gamma"])
    initial = {"g_coll": eb.get("g_coll", 0.5), "gamma_perp": gp0, "gamma_q": eb["gamma_q"],
               "omega_a": eb.get("omega_a", res.omega_c)}
    result = fitkit.fit_rabi(x, y, res, initial, N_rho=eb.get("N_rho", ensemble.DEFAULT_N_RHO))
    f = fitkit.MODELS["rabi"].func(x, result.estimates, {"power": not np.iscomplexobj(y)})
    cols, names = _residual_columns(y, f)
    return _finish_fit(args, "rabi", result, x, cols, ["freq_mhz"] + names, cfg)


def cmd_fit_gaussian(args):
    header, data = cio.read_table(args.trace)
    x, y = data[header[0]], data[args.y or header[1]]
    result = fitkit.fit_gaussian_scan(x, y)
    f = fitkit.MODELS["gaussian"].func(x, result.estimates, {})
    return _finish_fit(args, "gaussian", result, x, [y - f], [header[0], "residual"], {"input": str(args.trace)})


def cmd_fit_decay(args):
    header, data = cio.read_table(args.trace)
    xname = args.x or header[0]
    yname = args.y or header[1]
    for n in (xname, yname):
        if n not in data:
            raise InputError(f"column {n!r} not in {args.trace} (columns: {', '.join(header)})")
    x, y = data[xname], data[yname]
    keep = np.ones(x.size, dtype=bool)
    if args.x_min is not None:
        keep &= x >= args.x_min
    if args.x_max is not None:
        keep &= x <= args.x_max
    x, y = x[keep], y[keep]
    if x.size < 3:
        raise InputError("fewer than three samples in the fit window")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = fitkit.fit_decay(x, y, args.form)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    model = fitkit.MODELS[fitkit.DECAY_FORMS[args.form]]
    f = model.func(x, result.estimates, {})
    cfg = {"input": str(args.trace), "form": args.form, "x": xname, "y": yname,
           "x_min": args.x_min, "x_max": args.x_max}
    return _finish_fit(args, "decay", result, x, [y - f], [xname, "residual"], cfg)


# -- od ----------------------------------------------------------------------

def _read_spectrum(path) -> optics.OdSpectrum:
    header, data = cio.read_table(path)
    if "wavelength_nm" not in data or "od" not in data:
        raise cio.ParseError(f"{path}: expected columns wavelength_nm,od (got {', '.join(header)})")
    return optics.OdSpectrum(data["wavelength_nm"], data["od"])


def cmd_od_normalize(args):
    flags = {("optics", "anchors_nm"): list(_pair(args.anchors, "--anchors")) if args.anchors else None}
    cfg = resolve(args, _fixture("optics"), ("optics",), flags)
    lo, hi = cfg["optics"]["anchors_nm"]
    spec = optics.normalize_od(_read_spectrum(args.spectrum), lo, hi)
    cfg["input"] = str(args.spectrum)
    _emit(args, "od_normalized.csv", ["wavelength_nm", "od"], [spec.wavelength, spec.od], "od normalize", cfg,
          {"anchors_nm": [lo, hi]})
    _svg(args, "od_normalized.svg", spec.wavelength, [spec.od], "wavelength (nm)", "OD")
    return EXIT_OK


def cmd_od_density(args):
    flags = {("optics", "anchors_nm"): list(_pair(args.anchors, "--anchors")) if args.anchors else None,
             ("optics", "band_nm"): list(_pair(args.band, "--band")) if args.band else None,
             ("optics", "oscillator_strength"): args.f, ("optics", "path_um"): args.path_um}
    cfg = resolve(args, _fixture("optics"), ("optics",), flags)
    o = cfg["optics"]
    spec = _read_spectrum(args.spectrum)
    if not args.raw:
        spec = optics.normalize_od(spec, *o["anchors_nm"])
    lo, hi = o["band_nm"]
    integral = optics.integrate_od(spec, lo, hi)
    n = optics.estimate_density(integral, o["oscillator_strength"], o["path_um"], 0.5 * (lo + hi))
    ratio = n / fixtures.NA_DENSITY_CM3
    print(f"integrated_od_nm,{cio.fmt(integral)}")
    print(f"density_cm3,{cio.fmt(n)}")
    verdict = "within" if 0.1 <= ratio <= 10 else "outside"
    print(f"reference 3e16 cm^-3: ratio {ratio:.3g}, {verdict} one order of magnitude")
    return EXIT_OK


def cmd_fixtures(args):
    for name, cfg in sorted(fixtures.configs().items()):
        path = cio.write_json(_out(args, f"fixture_{name}.json"), cfg)
        print(f"wrote {path}")
    return EXIT_OK


# -- parser ----------------------------------------------------------------

def _globals(parser, suppress: bool):
    d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--config", default=d(None), help="JSON run configuration")
    parser.add_argument("--out", default=d("."), help="output directory")
    parser.add_argument("--threads", type=int, default=d(1), help="worker threads for sweeps")
    parser.add_argument("--svg", action="store_true", default=d(False), help="write a quick-look SVG plot")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cryospin", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    _globals(p, suppress=False)
    top = p.add_subparsers(dest="command", required=True)

    def leaf(group, name, func, help_):
        sp = group.add_parser(name, help=help_)
        _globals(sp, suppress=True)
        sp.set_defaults(func=func, action=name)
        return sp

    atom = top.add_parser("atom", help="hyperfine and Zeeman structure").add_subparsers(dest="action",
                                                                                     required=True)
    sp = leaf(atom, "levels", cmd_atom_levels, "level energies versus field")
    sp.add_argument("--bmax", type=float, default=None)
    sp.add_argument("--points", type=int, default=None)
    sp.add_argument("--ascale", type=float, default=None)
    sp = leaf(atom, "field", cmd_atom_field, "field that tunes a transition to a target frequency")
    sp.add_argument("--target-mhz", type=float, required=True)
    sp.add_argument("--ascale", type=float, default=None)
    sp.add_argument("--lower", default="1,1")
    sp.add_argument("--upper", default="2,2")
    sp.add_argument("--bmax-search", type=float, default=1e4)
    sp = leaf(atom, "populations", cmd_atom_populations, "thermal level populations")
    sp.add_argument("--temp-mk", type=float, required=True)
    sp.add_argument("--field-g", type=float, default=0.0)
    sp.add_argument("--ascale", type=float, default=None)

    sim = top.add_parser("sim", help="simulations").add_subparsers(dest="action", required=True)
    sp = leaf(sim, "s21", cmd_sim_s21, "resonator transmission, bare or loaded")
    sp.add_argument("--fixture", choices=["before", "after", "coupled"], default="after")
    sp.add_argument("--gcoll", type=float, default=None)
    sp.add_argument("--delta-mhz", type=float, default=None, help="spin centre minus cavity frequency")
    sp.add_argument("--points", type=int, default=None)
    sp.add_argument("--span-kappa", type=float, default=None)
    sp = leaf(sim, "rabi-map", cmd_sim_rabi_map, "|S21|^2 over field and frequency")
    sp.add_argument("--fixture", choices=sorted(fixtures.COUPLINGS), default="asgrown")
    sp.add_argument("--ascale", type=float, default=None)
    sp.add_argument("--gcoll", type=float, default=None)
    for flag, kind in (("--bmin", float), ("--bmax", float), ("--bpoints", int), ("--wmin", float),
                       ("--wmax", float), ("--wpoints", int)):
        sp.add_argument(flag, type=kind, default=None)
    sp = leaf(sim, "echo", cmd_sim_echo, "Hahn echo trace or decay")
    sp.add_argument("--t2-ms", type=float, default=None)
    sp.add_argument("--tau-us", default=None, help="one delay for a trace, a comma list for a decay")
    sp.add_argument("--sequence", default=None, help="JSON pulse-sequence file")
    sp = leaf(sim, "cpmg", cmd_sim_cpmg, "CPMG echo train")
    sp.add_argument("--n", type=int, default=None)
    sp.add_argument("--tau-us", type=float, default=None)
    sp.add_argument("--t2-ms", type=float, default=None)
    sp.add_argument("--flip-error", type=float, default=None)
    sp.add_argument("--axis", choices=["x", "y", "-x", "-y"], default=None)
    sp = leaf(sim, "holeburn", cmd_sim_holeburn, "dispersive hole-burning scan")
    sp.add_argument("--detuning-mhz", type=float, default=None)
    sp.add_argument("--pulse-fwhm", type=float, default=None)
    sp.add_argument("--points", type=int, default=None)
    sp = leaf(sim, "t1", cmd_sim_t1, "repolarisation after a temperature ramp")
    sp.add_argument("--t1-min", type=float, default=None)
    sp.add_argument("--form", choices=["stretched-sqrt", "simple"], default=None)
    sp.add_argument("--t-hot-mk", type=float, default=None)
    sp.add_argument("--t-cold-mk", type=float, default=None)
    sp.add_argument("--rate", type=float, default=None, help="ramp rate in mK/min")
    sp.add_argument("--duration", type=float, default=None, help="minutes")
    sp.add_argument("--points", type=int, default=None)

    fit = top.add_parser("fit", help="least-squares fits of trace files").add_subparsers(dest="action",
                                                                                      required=True)
    sp = leaf(fit, "resonator", cmd_fit_resonator, "bare notch resonator")
    sp.add_argument("trace")
    sp = leaf(fit, "rabi", cmd_fit_rabi, "coupled spectrum with resonator fixed")
    sp.add_argument("trace")
    sp.add_argument("--fixture", choices=sorted(fixtures.COUPLINGS), default="asgrown")
    sp = leaf(fit, "gaussian", cmd_fit_gaussian, "Gaussian line scan")
    sp.add_argument("trace")
    sp.add_argument("--y", default=None)
    sp = leaf(fit, "decay", cmd_fit_decay, "exponential, stretched or Hahn decay")
    sp.add_argument("trace")
    sp.add_argument("--form", choices=sorted(fitkit.DECAY_FORMS), default="exp")
    sp.add_argument("--x", default=None)
    sp.add_argument("--y", default=None)
    sp.add_argument("--x-min", type=float, default=None)
    sp.add_argument("--x-max", type=float, default=None)

    od = top.add_parser("od", help="optical-depth spectra").add_subparsers(dest="action", required=True)
    sp = leaf(od, "normalize", cmd_od_normalize, "subtract the two-anchor baseline")
    sp.add_argument("spectrum")
    sp.add_argument("--anchors", default=None, help="lo,hi in nm (default 450,800)")
    sp = leaf(od, "density", cmd_od_density, "density from the band-integrated OD")
    sp.add_argument("spectrum")
    sp.add_argument("--anchors", default=None)
    sp.add_argument("--band", default=None, help="lo,hi in nm")
    sp.add_argument("--f", type=float, default=None, help="oscillator strength")
    sp.add_argument("--path-um", type=float, default=None)
    sp.add_argument("--raw", action="store_true", help="skip baseline normalisation")

    sp = top.add_parser("fixtures", help="write every fixture configuration")
    _globals(sp, suppress=True)
    sp.set_defaults(func=cmd_fixtures, action="")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (cio.ConfigError, cio.ParseError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except KeyError as exc:
        print(f"error: missing configuration key {exc}", file=sys.stderr)
        return EXIT_INPUT
    except fitkit.FitError as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return EXIT_FIT
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
