"""Run configuration: TOML file + flag overrides, schema-validated.

Rational parameters may be written as "p/q" strings and are kept exact all
the way into the conjugate-flow layer.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .errors import ConfigError
from .presets import preset

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

APPLICATIONS = ("elasticity", "fkpp", "waterwave", "conjugate", "spectrum")

TOP_KEYS = {"application", "eps", "grid", "out", "format", "preset",
            "parameters", "tolerances", "fault_injection"}

PARAM_KEYS = {
    "elasticity": {"b1", "lam2", "w1", "b2"},
    "fkpp": {"beta", "lam1", "rho2"},
    "waterwave": {"rho", "omega", "h0", "c0"},
    "conjugate": {"rho", "omega", "h0", "c0"},
    "spectrum": {"family", "beta", "rho"},
}

RATIONAL_PARAMS = {"rho", "omega", "h0", "c0"}

TOLERANCE_KEYS = {"newton", "eigen_residual", "root_bracket", "integrate_rtol",
                  "integrate_atol"}

DEFAULT_TOLERANCES = {"newton": 1e-13, "eigen_residual": 1e-10,
                      "root_bracket": 1e-12, "integrate_rtol": 1e-11,
                      "integrate_atol": 1e-13}

FORMATS = {"csv", "json", "svg"}


def parse_number(value):
    """Accept int, float, or an exact 'p/q' string."""
    if isinstance(value, bool):
        raise ConfigError(f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return value
    if isinstance(value, str):
        try:
            if "/" in value:
                return Fraction(value)
            if "." in value or "e" in value or "E" in value:
                return float(value)
            return int(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"cannot parse number {value!r}: {exc}") from exc
    raise ConfigError(f"expected a number, got {type(value).__name__}")


@dataclass
class RunConfig:
    application: str
    parameters: dict = field(default_factory=dict)
    eps: list = field(default_factory=list)
    grid: int = 512
    out: Path = Path("out")
    formats: tuple = ("json", "csv", "svg")
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    fault_injection: float = 0.0

    def to_dict(self) -> dict:
        return {"application": self.application,
                "parameters": dict(self.parameters),
                "eps": list(self.eps), "grid": self.grid,
                "out": str(self.out), "formats": sorted(self.formats),
                "tolerances": dict(self.tolerances),
                "fault_injection": self.fault_injection}


def _validate_keys(mapping, allowed, where):
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {', '.join(sorted(unknown))}")


def load_config(path=None, application=None, preset_name=None, overrides=None,
                eps=None, grid=None, out=None, formats=None,
                fault_injection=None) -> RunConfig:
    """Merge (in increasing precedence): preset, config file, flag overrides."""
    data = {}
    if path is not None:
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"malformed config {path}: {exc}") from exc
    _validate_keys(data, TOP_KEYS, "config file")

    name = preset_name or data.get("preset")
    base = {}
    if name:
        try:
            base = preset(name)
        except KeyError as exc:
            raise ConfigError(str(exc)) from exc

    app = application or data.get("application") or base.get("application")
    if app not in APPLICATIONS:
        raise ConfigError(f"application must be one of {APPLICATIONS}, got {app!r}")

    params = dict(base.get("parameters", {}))
    params.update(data.get("parameters", {}))
    params.update(overrides or {})
    allowed = PARAM_KEYS[app]
    _validate_keys(params, allowed, f"[parameters] for {app}")
    parsed = {}
    for key, val in params.items():
        if key == "family":
            parsed[key] = str(val)
            continue
        num = parse_number(val)
        if key not in RATIONAL_PARAMS and isinstance(num, Fraction):
            num = float(num)
        parsed[key] = num

    tolerances = dict(DEFAULT_TOLERANCES)
    tol_in = data.get("tolerances", {})
    _validate_keys(tol_in, TOLERANCE_KEYS, "[tolerances]")
    for key, val in tol_in.items():
        tolerances[key] = float(parse_number(val))

    eps_list = eps if eps is not None else data.get("eps", [])
    if isinstance(eps_list, str):
        eps_list = [s for s in eps_list.split(",") if s.strip()]
    try:
        eps_list = [float(parse_number(e)) for e in eps_list]
    except ConfigError as exc:
        raise ConfigError(f"bad eps list: {exc}") from exc

    grid_val = grid if grid is not None else data.get("grid", 512)
    if not isinstance(grid_val, int) or grid_val < 16:
        raise ConfigError("grid must be an integer >= 16")

    fmts = formats if formats is not None else data.get("format", sorted(FORMATS))
    if isinstance(fmts, str):
        fmts = [fmts]
    fmts = tuple(sorted(set(fmts)))
    if not set(fmts) <= FORMATS:
        raise ConfigError(f"format entries must be among {sorted(FORMATS)}")

    fault = fault_injection if fault_injection is not None \
        else data.get("fault_injection", 0.0)

    return RunConfig(application=app, parameters=parsed, eps=eps_list,
                     grid=grid_val,
                     out=Path(out if out is not None else data.get("out", "out")),
                     formats=fmts, tolerances=tolerances,
                     fault_injection=float(fault))
