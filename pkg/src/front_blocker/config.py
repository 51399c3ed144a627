"""Scenario files (TOML) with centralised defaults.

Every section is optional; missing keys take the values in ``DEFAULTS``
and the fully resolved scenario is echoed into each report.
"""

from __future__ import annotations

import copy
import re
import sys
from dataclasses import dataclass
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .criterion import Form, SobolevConstants
from .drift import CrossSection, DriftField, concentrated, load_axial_profile, load_grid_potential, zero_drift
from .nonlinearity import ExtendedNonlinearity, extend, load_tabulated, make_cubic
from .simulator import SimConfig
from .supersolution import MinimizerConfig

DEFAULTS: dict = {
    "seed": 0,
    "nonlinearity": {"kind": "cubic", "theta": 0.25, "path": ""},
    "cross_section": {"lengths": [1.0, 1.0], "lipschitz_norm": 0.0},
    "drift": {"kind": "zero", "x0": 1.0, "eps": 0.5, "C": 8.0, "gauge": 0.0, "profile": "", "path": ""},
    "criterion": {
        "form": "prop", "a": 0.0, "optimize_a": False, "a_range": [0.25, 20.0],
        "sobolev_c1": 1.0, "sobolev_c2": 1.0, "sobolev_mode": "configured", "quad_resolution": 8,
    },
    "minimizer": {
        "h1": 0.125, "n_cross": 8, "R": [-6.0, -10.0, -14.0], "tol": 1e-10, "max_iter": 20000,
        "certify_tol": 1e-5, "extension": 2.0,
    },
    "simulator": {
        "x_minus": -30.0, "x_plus": 30.0, "front_start": 10.0, "t_end": 60.0, "dt": 0.0, "safety": 0.9,
        "scheme": "euler", "advection": "sg", "stride": 200, "stall_fraction": 0.05, "speed_band": 0.25,
        "window": 0.25, "margin": 3.0, "pass_widths": 3.0, "comparison_tol": 1e-3,
    },
    "output": {"dir": "out"},
}

_CHOICES = {
    ("nonlinearity", "kind"): ("cubic", "tabulated"),
    ("drift", "kind"): ("zero", "concentrated", "axial_bump", "grid"),
    ("criterion", "form"): tuple(f.value for f in Form),
    ("criterion", "sobolev_mode"): ("configured", "estimated"),
    ("simulator", "scheme"): ("euler", "rk2"),
    ("simulator", "advection"): ("sg", "upwind", "centered"),
}


class ConfigError(ValueError):
    pass


def _line_of(text: str, section: str | None, key: str) -> int | None:
    """Line number of ``key`` inside ``[section]`` (1-based), if it can be found."""
    current = None
    for i, line in enumerate(text.splitlines(), 1):
        head = re.match(r"\s*\[([^\]]+)\]", line)
        if head:
            current = head.group(1).strip()
            continue
        if current == section and re.match(rf"\s*{re.escape(key)}\s*=", line):
            return i
    return None


def _where(path: str, text: str, section: str | None, key: str) -> str:
    line = _line_of(text, section, key)
    return f"{path}:{line}" if line else path


def _coerce(value, default, where: str, name: str):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: {name} must be true or false")
        return value
    if isinstance(default, (int, float)):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: {name} must be a number, got {value!r}")
        if isinstance(default, float):
            return float(value)
        if not float(value).is_integer():
            raise ConfigError(f"{where}: {name} must be an integer, got {value!r}")
        return int(value)
    if isinstance(default, list):
        if not isinstance(value, list) or not all(isinstance(v, (int, float)) for v in value):
            raise ConfigError(f"{where}: {name} must be a list of numbers")
        return [float(v) for v in value]
    if isinstance(default, str) and not isinstance(value, str):
        raise ConfigError(f"{where}: {name} must be a string")
    return value


def resolve(raw: dict, *, path: str = "<scenario>", text: str = "") -> dict:
    """Merge ``raw`` over the defaults, rejecting unknown sections and keys."""
    out = copy.deepcopy(DEFAULTS)
    for sec, body in raw.items():
        if sec not in out:
            raise ConfigError(f"{_where(path, text, None, sec)}: unknown section or key '{sec}'")
        if not isinstance(out[sec], dict):
            out[sec] = _coerce(body, out[sec], _where(path, text, None, sec), sec)
            continue
        if not isinstance(body, dict):
            raise ConfigError(f"{path}: '{sec}' must be a table")
        for key, value in body.items():
            where = _where(path, text, sec, key)
            if key not in out[sec]:
                raise ConfigError(f"{where}: unknown key '{key}' in [{sec}]")
            value = _coerce(value, out[sec][key], where, f"{sec}.{key}")
            choices = _CHOICES.get((sec, key))
            if choices and value not in choices:
                raise ConfigError(f"{where}: {sec}.{key} must be one of {list(choices)}, got {value!r}")
            out[sec][key] = value
    base = Path(path).parent if path != "<scenario>" else Path(".")
    for sec, key in (("nonlinearity", "path"), ("drift", "profile"), ("drift", "path")):
        if out[sec][key] and not Path(out[sec][key]).is_absolute():
            out[sec][key] = str(base / out[sec][key])
    return out


def load(path: str | Path | None) -> dict:
    if path is None:
        return copy.deepcopy(DEFAULTS)
    path = str(path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file: {exc}") from exc
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return resolve(raw, path=path, text=text)


# -- builders -------------------------------------------------------------------

def build_nonlinearity(cfg: dict) -> ExtendedNonlinearity:
    sec = cfg["nonlinearity"]
    if sec["kind"] == "cubic":
        return extend(make_cubic(sec["theta"]))
    if not sec["path"]:
        raise ConfigError("nonlinearity.kind = 'tabulated' needs nonlinearity.path")
    return extend(load_tabulated(sec["path"]))


def build_cross_section(cfg: dict, n: int | None = None) -> CrossSection:
    sec = cfg["cross_section"]
    lengths = list(sec["lengths"])
    if n is not None and n - 1 != len(lengths):
        # pad with the last side length, or drop trailing sides
        lengths = (lengths + [lengths[-1]] * n)[: n - 1]
    return CrossSection(tuple(lengths), sec["lipschitz_norm"])


def build_drift(cfg: dict) -> DriftField:
    sec = cfg["drift"]
    kind = sec["kind"]
    if kind == "zero":
        d = zero_drift(sec["x0"])
    elif kind == "concentrated":
        d = concentrated(sec["eps"], sec["C"])
    elif kind == "axial_bump":
        if not sec["profile"]:
            raise ConfigError("drift.kind = 'axial_bump' needs drift.profile")
        d = load_axial_profile(sec["profile"], sec["x0"])
    else:
        if not sec["path"]:
            raise ConfigError("drift.kind = 'grid' needs drift.path")
        d = load_grid_potential(sec["path"])
    return d.with_gauge(sec["gauge"]) if sec["gauge"] else d


def sobolev_constants(cfg: dict) -> SobolevConstants:
    sec = cfg["criterion"]
    return SobolevConstants(sec["sobolev_c1"], sec["sobolev_c2"], sec["sobolev_mode"])


def minimizer_config(cfg: dict) -> MinimizerConfig:
    sec = cfg["minimizer"]
    return MinimizerConfig(tol=sec["tol"], max_iter=int(sec["max_iter"]))


@dataclass(frozen=True)
class SimPlan:
    cfg: SimConfig
    front_start: float


def sim_config(cfg: dict, c: float, anchor: float | None = None, x_minus: float | None = None) -> SimPlan:
    sec = cfg["simulator"]
    t0 = -sec["front_start"] / c
    return SimPlan(SimConfig(
        x_minus=sec["x_minus"] if x_minus is None else x_minus, x_plus=sec["x_plus"],
        h1=cfg["minimizer"]["h1"], n_cross=int(cfg["minimizer"]["n_cross"]), t0=t0, t_end=sec["t_end"],
        dt=sec["dt"] or None, safety=sec["safety"], scheme=sec["scheme"], advection=sec["advection"],
        stride=int(sec["stride"]), anchor=anchor, stall_fraction=sec["stall_fraction"],
        speed_band=sec["speed_band"], window=sec["window"], margin=sec["margin"],
        pass_widths=sec["pass_widths"], comparison_tol=sec["comparison_tol"],
    ), sec["front_start"])
