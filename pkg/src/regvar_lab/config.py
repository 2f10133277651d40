"""INI run configuration: one section per subcommand plus an optional [run] section.

Every key is typed and defaulted; unknown sections or keys are errors that
name the offending line.
"""
from __future__ import annotations

import configparser
import re
from pathlib import Path

from .errors import ConfigError


def _floats(text):
    return tuple(float(v) for v in _split(text))


def _ints(text):
    return tuple(int(float(v)) for v in _split(text))


def _split(text):
    return [p.strip() for p in str(text).split(",") if p.strip()]


def _interval(text):
    parts = str(text).split(":")
    if len(parts) != 2:
        raise ValueError(f"expected 'a:b', got {text!r}")
    return float(parts[0]), float(parts[1])


def _intervals(text):
    return tuple(_interval(p) for p in _split(text))


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _words(text):
    return tuple(_split(text))


def _opt_str(text):
    t = str(text).strip()
    return t or None


SCHEMA = {
    "run": {
        "seed": (int, 0),
    },
    "analyze": {
        "function": (str, "pow_slowvar(1.7, log2)"),
        "function_csv": (_opt_str, None),
        "sequence": (str, "identity"),
        "sequence_kind": (str, "multiplicative"),
        "mode": (str, "karamata"),
        "phi": (_opt_str, None),
        "h": (_opt_str, None),
        "a_policy": (str, "reciprocal"),
        "a_expr": (_opt_str, None),
        "b_lo": (float, 1.0),
        "b_hi": (float, 2.0),
        "holes": (_intervals, ((1.2, 1.23), (1.45, 1.48), (1.7, 1.74))),
        "n": (int, 1_000_000),
        "lattice_points": (int, 201),
        "tol": (float, 1e-2),
        "budget": (float, 0.02),
        "limit_rule": (str, "extrapolate"),
        "n_ladder": (_ints, ()),
        "s_values": (_floats, ()),
        "t_points": (int, 31),
        "ell": (_opt_str, None),
        "corollary_tol": (float, 0.02),
    },
    "verify-fe": {
        "r_values": (_words, ("0", "1", "inf")),
        "s_values": (_words, ("0", "1", "inf")),
        "kappas": (_floats, (-2.0, -0.5, 0.0, 1.0, 3.0)),
        "trials": (int, 1000),
        "spread": (float, 1.0),
        "threshold": (float, 1e-9),
        "cell": (_opt_str, None),
        "t": (float, 3.0),
        "broken_kernel": (_bool, False),
        "table_kappa": (float, 2.0),
        "table_t": (float, 3.0),
    },
    "esslim": {
        "function": (str, "spiked(2+1/x, 0.001, 100)"),
        "function_csv": (_opt_str, None),
        "x_min": (float, 1.0),
        "x_max": (float, 1e5),
        "samples": (int, 100_000),
        "spacing": (str, "linear"),
        "epsilons": (_floats, (0.1, 0.03, 0.01)),
        "delta": (float, 0.005),
        "combine_with": (_opt_str, None),
        "combine_delta": (float, 0.005),
        "export_csv": (_opt_str, None),
    },
    "sequences": {
        "sequence": (str, "log_ramp(1)"),
        "sequence_kind": (str, "additive"),
        "prefix_length": (int, 10_000),
        "n0": (int, 100),
        "tol": (float, 0.02),
        "croft": (_bool, True),
        "pattern": (_intervals, ((0.0, 0.5),)),
        "period": (float, 1.0),
        "probe_interval": (_interval, (0.0, 1.0)),
        "checkpoints": (_ints, (10_000, 100_000, 1_000_000)),
        "probe_grid": (int, 101),
        "dilation_phi": (_opt_str, None),
        "dilation_lambda": (float, 1.0),
        "dilation_a": (float, 1.0),
        "dilation_b": (float, 40.0),
        "dilation_q_tol": (float, 1e-9),
    },
    "phi": {
        "phi": (str, "affine_phi(3, 0.5)"),
        "x_grid": (_floats, tuple(10.0**k for k in range(1, 9))),
        "t_max": (float, 3.0),
        "t_points": (int, 31),
        "tol": (float, 1e-2),
    },
    "table": {
        "kappa": (float, 2.0),
        "t": (float, 3.0),
        "r": (float, 1.0),
        "s": (float, 1.0),
    },
}

POSITIVE_TOLERANCES = {"tol", "threshold", "corollary_tol", "dilation_q_tol", "spread"}


def _line_of(text: str, section: str, key: str | None):
    current = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return lineno
            continue
        if current == section and key is not None:
            m = re.match(r"\s*([^=:#;\s]+)\s*[=:]", line)
            if m and m.group(1).strip().lower() == key:
                return lineno
    return None


def defaults(command: str) -> dict:
    return {k: v[1] for k, v in SCHEMA[command].items()}


def load(command: str, path=None, text: str | None = None) -> dict:
    """Typed settings for ``command`` (plus ``seed``), defaults filled in."""
    if command not in SCHEMA:
        raise ConfigError(f"unknown command {command!r}")
    settings = defaults(command)
    settings["seed"] = SCHEMA["run"]["seed"][1]
    if path is None and text is None:
        return settings
    source = str(path) if path is not None else "<config>"
    if text is None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"{source}: cannot read config: {exc.strerror}") from None
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None

    for section in parser.sections():
        if section not in SCHEMA:
            line = _line_of(text, section, None)
            raise ConfigError(f"{source}:{line}: unknown section [{section}]")
        schema = SCHEMA[section]
        for key, raw in parser.items(section):
            line = _line_of(text, section, key)
            if key not in schema:
                raise ConfigError(f"{source}:{line}: unknown key {key!r} in [{section}]")
            conv = schema[key][0]
            try:
                value = conv(raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{source}:{line}: bad value for {section}.{key}: {exc}") from None
            if key in POSITIVE_TOLERANCES and not value > 0:
                raise ConfigError(f"{source}:{line}: {section}.{key} must be > 0")
            if section == command:
                settings[key] = value
            elif section == "run":
                settings[key] = value
    return settings
