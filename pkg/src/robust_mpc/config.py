"""Scenario files: INI-style, one section per scenario, flat keys.

Example::

    [DEFAULT]
    duration = 200
    hp = 10
    hu = 3
    q = 0.1
    r = 0.1
    controllers = S-MPC:kf, R-MPC1:0.1, R-MPC2:1

    [sim2]
    plant = nonlinear-perturbed

``controllers`` lists ``label:c`` pairs; ``kf`` selects the standard Kalman
filter. Setting ``c`` replaces the roster by a single robust controller.
Servo parameters are overridden with ``plant_<field>`` / ``model_<field>``
keys (``plant_alpha_l = 0.5, 10, 0.5``).
"""

from __future__ import annotations

import configparser
import math
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, RobustMPCError
from .mpc import MpcConfig
from .servo import NoiseSpec, ServoParams, nominal_params, perturbed_params
from .sim import PLANT_KINDS, ConstantReference, Scenario, SquareWave

_SERVO_FIELDS = tuple(f.name for f in fields(ServoParams))

KNOWN_KEYS = frozenset(
    {
        "plant", "duration", "sample_time", "seed", "substeps", "settle_window",
        "reference", "period", "duty", "low", "high", "value",
        "hp", "hu", "q", "r", "penalize", "input_scale",
        "process_std", "measurement_std",
        "plant_params", "perturb_seed",
        "controllers", "c", "inject_noise",
    }
    | {f"plant_{name.lower()}" for name in _SERVO_FIELDS}
    | {f"model_{name.lower()}" for name in _SERVO_FIELDS}
)

DEFAULT_CONTROLLERS = "S-MPC:kf, R-MPC1:0.1, R-MPC2:1"


def _float(key, text):
    t = text.strip().lower()
    try:
        if t in ("pi", "+pi"):
            return math.pi
        if t == "-pi":
            return -math.pi
        return float(t)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}") from None


def _int(key, text):
    try:
        return int(text.strip())
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from None


def _bool(key, text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected true/false, got {text!r}")


def _floats(key, text):
    return tuple(_float(key, part) for part in text.split(",") if part.strip())


def parse_controllers(text: str) -> list[tuple[str, bool, float]]:
    roster = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        label, sep, val = item.rpartition(":")
        if not sep or not label.strip():
            raise ConfigError(f"controllers: expected 'label:c' or 'label:kf', got {item!r}")
        val = val.strip().lower()
        if val in ("kf", "standard"):
            roster.append((label.strip(), False, 0.0))
        else:
            c = _float("controllers", val)
            if c < 0:
                raise ConfigError(f"controllers: c must be nonnegative for {label.strip()}")
            roster.append((label.strip(), True, c))
    if not roster:
        raise ConfigError("controllers: empty roster")
    labels = [r[0] for r in roster]
    if len(set(labels)) != len(labels):
        raise ConfigError("controllers: duplicate labels")
    return roster


def _servo(prefix: str, base: ServoParams, sect) -> ServoParams:
    changes = {}
    for name in _SERVO_FIELDS:
        key = f"{prefix}_{name.lower()}"
        if key in sect:
            if name in ("alpha_l", "alpha_m"):
                changes[name] = _floats(key, sect[key])
            else:
                changes[name] = _float(key, sect[key])
    return replace(base, **changes) if changes else base


def scenarios_from_section(name: str, sect) -> list[Scenario]:
    unknown = sorted(set(sect) - KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"[{name}] unknown key(s): {', '.join(unknown)}")
    get = sect.get

    plant = get("plant", "linear-nominal").strip()
    if plant not in PLANT_KINDS:
        raise ConfigError(f"[{name}] plant must be one of {', '.join(PLANT_KINDS)}, got {plant!r}")

    ref_kind = get("reference", "square").strip().lower()
    if ref_kind == "square":
        reference = SquareWave(
            period=_float("period", get("period", "50")),
            duty=_float("duty", get("duty", "0.5")),
            low=_float("low", get("low", "0")),
            high=_float("high", get("high", "pi")),
        )
        if not (reference.period > 0 and 0 < reference.duty < 1):
            raise ConfigError(f"[{name}] square reference needs period > 0 and 0 < duty < 1")
    elif ref_kind == "constant":
        reference = ConstantReference(_float("value", get("value", "0")))
    else:
        raise ConfigError(f"[{name}] reference must be 'square' or 'constant', got {ref_kind!r}")

    mode = get("plant_params", "table").strip().lower()
    if mode == "table":
        plant_base = perturbed_params()
    elif mode == "random":
        plant_base = perturbed_params(np.random.default_rng(_int("perturb_seed", get("perturb_seed", "0"))))
    elif mode == "nominal":
        plant_base = nominal_params()
    else:
        raise ConfigError(f"[{name}] plant_params must be table, random or nominal, got {mode!r}")

    if "c" in sect and sect["c"].strip():
        c = _float("c", sect["c"])
        roster = [(f"R-MPC(c={c:g})", True, c)]
    else:
        roster = parse_controllers(get("controllers", DEFAULT_CONTROLLERS))

    try:
        mpc = MpcConfig(
            Hp=_int("hp", get("hp", "10")),
            Hu=_int("hu", get("hu", "3")),
            Qk=_float("q", get("q", "0.1")),
            Rk=_float("r", get("r", "0.1")),
            penalize=get("penalize", "delta_u").strip(),
            input_scale=_float("input_scale", get("input_scale", "220")),
        )
        noise = NoiseSpec(
            process_std=_floats("process_std", get("process_std", "0, 0.01, 0, 0.1")),
            measurement_std=_float("measurement_std", get("measurement_std", "0.01")),
        )
        base = Scenario(
            name=name,
            plant_kind=plant,
            duration=_float("duration", get("duration", "200")),
            sample_time=_float("sample_time", get("sample_time", "0.1")),
            reference=reference,
            seed=_int("seed", get("seed", "0")),
            mpc=mpc,
            noise=noise,
            model_params=_servo("model", nominal_params(), sect),
            plant_params=_servo("plant", plant_base, sect),
            substeps=_int("substeps", get("substeps", "100")),
            settle_window=_float("settle_window", get("settle_window", "10")),
            inject_noise=_bool("inject_noise", get("inject_noise", "true")),
        )
        return [replace(base, controller=label, robust=robust, c=c) for label, robust, c in roster]
    except ConfigError:
        raise
    except RobustMPCError as exc:
        raise ConfigError(f"[{name}] {exc}") from exc


def parse_override(text: str) -> tuple[str | None, str, str]:
    key, sep, value = text.partition("=")
    if not sep:
        raise ConfigError(f"override {text!r} is not of the form key=value")
    key = key.strip()
    section, dot, bare = key.rpartition(".")
    if not dot:
        section, bare = None, key
    bare = bare.lower()
    if bare not in KNOWN_KEYS:
        raise ConfigError(f"unknown override key: {bare!r}")
    return section, bare, value.strip()


def load_config(text: str, overrides=(), seed: int | None = None) -> dict[str, list[Scenario]]:
    """Parse scenario text into ``{section: [Scenario per controller]}``."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str.lower
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse scenario file: {exc}") from exc
    if not cp.sections():
        raise ConfigError("scenario file defines no scenario sections")

    parsed = [parse_override(o) for o in overrides]
    for section, _, _ in parsed:
        if section is not None and section not in cp:
            raise ConfigError(f"override names unknown scenario section {section!r}")
    for section, key, value in parsed:
        targets = [section] if section is not None else cp.sections()
        for s in targets:
            cp[s][key] = value
    if seed is not None:
        for s in cp.sections():
            cp[s]["seed"] = str(seed)

    return {s: scenarios_from_section(s, cp[s]) for s in cp.sections()}


def load_config_file(path, overrides=(), seed: int | None = None) -> dict[str, list[Scenario]]:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigError(f"scenario file not found: {path}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc}") from exc
    return load_config(text, overrides, seed)


def builtin_config_text() -> str:
    from importlib.resources import files

    return files("robust_mpc").joinpath("scenarios/servo.cfg").read_text()
