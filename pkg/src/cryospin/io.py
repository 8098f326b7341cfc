"""Trace CSV files, JSON sidecars and strict run configurations.

CSV dialect: comma separated, ``#`` comment lines, the first non-comment
row is the header.  Floats are written with 12 significant digits in
scientific notation so repeated runs are byte-identical.
"""

from __future__ import annotations

import copy
import json
import math
import re
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import __version__
from . import constants as const


class ParseError(ValueError):
    pass


class ConfigError(ValueError):
    pass


def fmt(x) -> str:
    x = float(x)
    if x == 0.0:
        x = 0.0  # drop the sign of negative zero
    return f"{x:.11e}"


def write_csv(path, header: Sequence[str], columns: Sequence, comments: Sequence[str] = ()) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    cols = [np.asarray(c) for c in columns]
    n = {c.size for c in cols}
    if len(n) != 1 or len(cols) != len(header):
        raise ValueError("columns must match the header and share one length")
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(header))
    for row in zip(*cols):
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path


def read_table(path) -> tuple:
    """(header, {name: float array}) from a CSV file, with row-numbered errors."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from exc
    header = None
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cells = [c.strip() for c in line.split(",")]
        if header is None:
            header = cells
            if len(set(header)) != len(header):
                raise ParseError(f"{path}:{lineno}: duplicate column names in header")
            continue
        if len(cells) != len(header):
            raise ParseError(f"{path}: row {lineno}: expected {len(header)} fields, got {len(cells)}")
        try:
            values = [float(c) for c in cells]
        except ValueError:
            raise ParseError(f"{path}: row {lineno}: non-numeric value in {line!r}") from None
        if not all(math.isfinite(v) for v in values):
            raise ParseError(f"{path}: row {lineno}: non-finite value")
        rows.append(values)
    if header is None or not rows:
        raise ParseError(f"{path}: no data rows")
    data = np.array(rows)
    return header, {name: data[:, k] for k, name in enumerate(header)}


def read_trace(path) -> tuple:
    """(freq_mhz, y) where y is complex for re/im or mag_db/phase_deg files.

    A ``freq_mhz,power`` file (|S21|^2) gives a real y; any other two-column
    file is returned as (first, second).
    """
    header, cols = read_table(path)
    names = set(header)
    if {"freq_mhz", "re", "im"} <= names:
        return cols["freq_mhz"], cols["re"] + 1j * cols["im"]
    if {"freq_mhz", "mag_db", "phase_deg"} <= names:
        mag = 10 ** (cols["mag_db"] / 20)
        return cols["freq_mhz"], mag * np.exp(1j * np.deg2rad(cols["phase_deg"]))
    if {"freq_mhz", "power"} <= names:
        return cols["freq_mhz"], cols["power"]
    if len(header) >= 2:
        return cols[header[0]], cols[header[1]]
    raise ParseError(f"{path}: need at least two columns, header is {header}")


def _jsonable(obj):
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj), encoding="utf-8", newline="\n")
    return path


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_sidecar(path, command: str, config: Mapping, results: Mapping = None) -> Path:
    body = {"toolkit": "cryospin", "version": __version__, "constants_table": const.TABLE_VERSION,
            "command": command, "config": config}
    if results:
        body["results"] = results
    return write_json(sidecar_path(path), body)


# -- run configuration ---------------------------------------------------------

NUM = (int, float)
SCHEMA = {
    "atom": {"name": str, "I": NUM, "J": NUM, "A_hfs": NUM, "g_J": NUM, "g_I": NUM, "A_scale": NUM},
    "resonator": {"omega_c": NUM, "kappa_i": NUM, "kappa_e": NUM, "amp_A": NUM, "alpha": NUM,
                  "tau_delay": NUM, "psi": NUM},
    "ensemble": {"omega_a": NUM, "gamma_q": NUM, "Gamma": NUM, "gamma_perp": NUM, "g_coll": NUM,
                 "N_rho": int, "span": NUM},
    "sweep": {"b_min": NUM, "b_max": NUM, "b_points": int, "omega_min": NUM, "omega_max": NUM,
              "omega_points": int, "span_kappa": NUM, "points": int},
    "dynamics": {"t2_ms": NUM, "tau_us": (int, float, list), "n": int, "flip_error": NUM,
                 "refocus_axis": str, "detuning_mhz": NUM, "pulse_fwhm_mhz": NUM, "points": int,
                 "t1_min": NUM, "form": str, "t_hot_k": NUM, "t_cold_k": NUM, "ramp_mk_per_min": NUM,
                 "duration_min": NUM, "field_g": NUM, "sequence": list},
    "optics": {"anchors_nm": list, "band_nm": list, "oscillator_strength": NUM, "path_um": NUM},
    "output": {"dir": str, "prefix": str, "svg": bool},
}


def _line_of(text: str, path: Sequence[str]) -> int:
    """Best-effort line number of the key at ``path`` in the JSON source."""
    pos = 0
    for key in path:
        m = re.compile(r'"%s"\s*:' % re.escape(key)).search(text, pos)
        if m is None:
            break
        pos = m.start()
    return text.count("\n", 0, pos) + 1


def validate_config(cfg, text: str = "", source: str = "<config>") -> dict:
    """Reject unknown blocks and keys and wrongly typed values."""
    if not isinstance(cfg, dict):
        raise ConfigError(f"{source}: top level must be a JSON object")
    for block, body in cfg.items():
        if block not in SCHEMA:
            raise ConfigError(f"{source}:{_line_of(text, [block])}: unknown block '{block}'")
        if not isinstance(body, dict):
            raise ConfigError(f"{source}:{_line_of(text, [block])}: block '{block}' must be an object")
        for key, value in body.items():
            where = f"{source}:{_line_of(text, [block, key])}"
            if key not in SCHEMA[block]:
                raise ConfigError(f"{where}: unknown key '{block}.{key}'")
            kind = SCHEMA[block][key]
            bad = isinstance(value, bool) and kind is not bool
            if bad or not isinstance(value, kind):
                raise ConfigError(f"{where}: '{block}.{key}' has the wrong type ({type(value).__name__})")
    return cfg


def load_config(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from None
    return validate_config(cfg, text, str(path))


def merge(base: Mapping, override: Mapping) -> dict:
    out = copy.deepcopy(dict(base))
    for block, body in override.items():
        out.setdefault(block, {}).update(copy.deepcopy(body))
    return out
