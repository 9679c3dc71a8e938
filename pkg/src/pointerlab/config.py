"""Run configuration: sectioned key = value files plus command-line overrides.

A config file is INI-style with four shared sections (run, physics, grid,
sampling) and one experiment-specific section (experiment). Every key has a
typed default, so an empty file or no file at all is a valid configuration
once an experiment name is known. Unknown sections or keys are rejected
rather than ignored; silent typos in a reproducibility manifest are worse
than a hard error.

Defaults live here as strings and pass through the same converters as file
values, which keeps validation in one place.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass
from types import MappingProxyType

from .errors import ConfigError

EXPERIMENTS = (
    "dephasing",
    "soliton-formation",
    "tail-fit",
    "width-sweep",
    "potential-dynamics",
    "basin-map",
    "weights-n2",
    "weights-nN",
    "oracle-compare",
)

FORMATS = ("csv", "json")


def _fail(section: str, key: str, message: str):
    raise ConfigError(f"[{section}] {key}: {message}")


def _as_str(text: str) -> str:
    return text.strip()


def _as_int(text: str) -> int:
    try:
        return int(text.strip(), 10)
    except ValueError:
        raise ConfigError(f"expected an integer, got {text!r}") from None


def _as_float(text: str) -> float:
    try:
        value = float(text.strip())
    except ValueError:
        raise ConfigError(f"expected a number, got {text!r}") from None
    if not math.isfinite(value):
        raise ConfigError(f"expected a finite number, got {text!r}")
    return value


def _as_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _as_floats(text: str) -> tuple[float, ...]:
    parts = text.replace(",", " ").split()
    if not parts:
        raise ConfigError("expected at least one number")
    return tuple(_as_float(p) for p in parts)


# section -> key -> converter
_SCHEMA = {
    "run": {
        "experiment": _as_str,
        "seed": _as_int,
        "out_dir": _as_str,
        "format": _as_str,
        "threads": _as_int,
    },
    "physics": {
        "kappa": _as_float,
        "gamma": _as_float,
    },
    "grid": {
        "n_points": _as_int,
        "length": _as_float,
        "dt": _as_float,
    },
    "sampling": {
        "n_trajectories": _as_int,
    },
}

# experiment -> allowed keys of the [experiment] section
_EXPERIMENT_SCHEMA = {
    "dephasing": {
        "theta0": _as_float,
        "t_max": _as_float,
        "n_times": _as_int,
    },
    "soliton-formation": {
        "weight": _as_float,
        "separation": _as_float,
        "t_max": _as_float,
    },
    "tail-fit": {
        "kappas": _as_floats,
    },
    "width-sweep": {
        "kappas": _as_floats,
        "t_max": _as_float,
    },
    "potential-dynamics": {
        "quartic_a": _as_float,
        "quartic_b": _as_float,
        "x0": _as_float,
        "periods": _as_float,
        "control_periods": _as_float,
    },
    "basin-map": {
        "resolution": _as_int,
        "saturated": _as_bool,
        "positions": _as_floats,
        "t_max": _as_float,
        "step": _as_float,
    },
    "weights-n2": {
        "c1sq": _as_floats,
    },
    "weights-nN": {
        "n_states": _as_int,
        "n_min": _as_int,
        "n_max": _as_int,
        "calibration_n": _as_int,
    },
    "oracle-compare": {
        "times": _as_floats,
        "packet_separation": _as_float,
        "packet_width": _as_float,
        "n_bootstrap": _as_int,
    },
}

_COMMON_DEFAULTS = {
    ("run", "seed"): "1",
    ("run", "out_dir"): "out",
    ("run", "format"): "csv",
    ("run", "threads"): "1",
    ("physics", "kappa"): "1e-3",
    ("physics", "gamma"): "1.0",
    ("sampling", "n_trajectories"): "10000",
}

# per-experiment overrides of common defaults plus [experiment] defaults;
# grid keys left unset mean the experiment derives its own discretization
_DEFAULTS = {
    "dephasing": {
        ("experiment", "theta0"): "0.0",
        ("experiment", "t_max"): "5.0",
        ("experiment", "n_times"): "51",
    },
    "soliton-formation": {
        ("physics", "kappa"): "1e-2",
        ("experiment", "weight"): "0.7",
        ("experiment", "separation"): "6.0",
        ("experiment", "t_max"): "80.0",
    },
    "tail-fit": {
        ("experiment", "kappas"): "1e-3 1e-2 1e-1",
    },
    "width-sweep": {
        ("experiment", "kappas"):
            "1e-3 3.1622776601683794e-3 1e-2 3.1622776601683791e-2 "
            "1e-1 3.1622776601683794e-1 1.0",
        ("experiment", "t_max"): "400.0",
    },
    "potential-dynamics": {
        ("grid", "n_points"): "2048",
        ("grid", "length"): "12.0",
        ("grid", "dt"): "1.5e-3",
        ("experiment", "quartic_a"): "0.05",
        ("experiment", "quartic_b"): "0.4",
        ("experiment", "x0"): "1.0",
        ("experiment", "periods"): "1.0",
        ("experiment", "control_periods"): "3.0",
    },
    "basin-map": {
        ("experiment", "resolution"): "100",
        ("experiment", "saturated"): "true",
        ("experiment", "positions"): "1.4 1.3 0.8",
        ("experiment", "t_max"): "4000.0",
        ("experiment", "step"): "0.05",
    },
    "weights-n2": {
        ("experiment", "c1sq"): "0.1 0.3 0.45",
    },
    "weights-nN": {
        ("experiment", "n_states"): "100",
        ("experiment", "n_min"): "3",
        ("experiment", "n_max"): "10",
        ("experiment", "calibration_n"): "100",
    },
    "oracle-compare": {
        ("physics", "kappa"): "0.5",
        ("grid", "n_points"): "128",
        ("grid", "length"): "24.0",
        ("grid", "dt"): "2e-3",
        ("sampling", "n_trajectories"): "600",
        ("experiment", "times"): "1.0 3.0",
        ("experiment", "packet_separation"): "6.0",
        ("experiment", "packet_width"): "0.8",
        ("experiment", "n_bootstrap"): "200",
    },
}

# dephasing starts on the Bloch sphere at pi/4 by default
_DEFAULTS["dephasing"][("experiment", "theta0")] = repr(math.pi / 4)


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully resolved, validated parameters of one experiment run."""

    experiment: str
    seed: int
    out_dir: str
    format: str
    threads: int
    kappa: float
    gamma: float
    n_trajectories: int
    n_points: int | None
    length: float | None
    dt: float | None
    options: MappingProxyType

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            _fail("run", "experiment",
                  f"unknown experiment {self.experiment!r}; "
                  f"choose one of {', '.join(EXPERIMENTS)}")
        if not (0 <= self.seed < 2**64):
            _fail("run", "seed", f"must be a 64-bit unsigned integer, got {self.seed}")
        if self.format not in FORMATS:
            _fail("run", "format", f"must be one of {', '.join(FORMATS)}, got {self.format!r}")
        if self.threads < 1:
            _fail("run", "threads", f"must be >= 1, got {self.threads}")
        if not (self.kappa > 0.0):
            _fail("physics", "kappa", f"must be positive, got {self.kappa}")
        if not (self.gamma >= 0.0):
            _fail("physics", "gamma", f"must be non-negative, got {self.gamma}")
        if self.n_trajectories < 1:
            _fail("sampling", "n_trajectories", f"must be >= 1, got {self.n_trajectories}")
        if self.n_points is not None and self.n_points < 8:
            _fail("grid", "n_points", f"must be >= 8, got {self.n_points}")
        if self.length is not None and not (self.length > 0.0):
            _fail("grid", "length", f"must be positive, got {self.length}")
        if self.dt is not None and not (self.dt > 0.0):
            _fail("grid", "dt", f"must be positive, got {self.dt}")

    def option(self, name: str):
        return self.options[name]

    def as_sections(self) -> dict:
        """Echo of the resolved configuration, suitable for the manifest."""
        run = {
            "experiment": self.experiment,
            "seed": self.seed,
            "out_dir": self.out_dir,
            "format": self.format,
            "threads": self.threads,
        }
        grid = {}
        if self.n_points is not None:
            grid["n_points"] = self.n_points
        if self.length is not None:
            grid["length"] = self.length
        if self.dt is not None:
            grid["dt"] = self.dt
        sections = {
            "run": run,
            "physics": {"kappa": self.kappa, "gamma": self.gamma},
            "grid": grid,
            "sampling": {"n_trajectories": self.n_trajectories},
            "experiment": {k: list(v) if isinstance(v, tuple) else v
                           for k, v in self.options.items()},
        }
        return sections


def read_config_file(path: str) -> dict[str, dict[str, str]]:
    """Parse a sectioned key = value file into raw strings.

    Raises ConfigError with the parser's line diagnostics on malformed
    syntax and on any section not in the schema.
    """
    parser = configparser.ConfigParser(
        interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        with open(path, "r", encoding="utf-8") as handle:
            parser.read_file(handle, source=path)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file: {exc}") from None
    raw = {}
    for section in parser.sections():
        if section not in (*_SCHEMA, "experiment"):
            raise ConfigError(
                f"[{section}]: unknown section; expected one of "
                f"{', '.join((*_SCHEMA, 'experiment'))}")
        raw[section] = dict(parser.items(section))
    return raw


def build_config(
    raw: dict[str, dict[str, str]] | None = None,
    experiment: str | None = None,
    seed: int | None = None,
    out_dir: str | None = None,
    format: str | None = None,
    threads: int | None = None,
) -> ExperimentConfig:
    """Merge file values over defaults, apply overrides, validate everything.

    `experiment` (from the command line) wins over the file's [run] entry;
    one of the two must be present.
    """
    raw = raw or {}
    name = experiment or raw.get("run", {}).get("experiment")
    if name is None:
        raise ConfigError("no experiment selected: set [run] experiment "
                          "in the config file or pass --experiment")
    name = name.strip()
    if name not in EXPERIMENTS:
        _fail("run", "experiment",
              f"unknown experiment {name!r}; choose one of {', '.join(EXPERIMENTS)}")

    merged: dict[tuple[str, str], str] = dict(_COMMON_DEFAULTS)
    merged.update(_DEFAULTS[name])
    allowed_extra = _EXPERIMENT_SCHEMA[name]
    for section, entries in raw.items():
        table = allowed_extra if section == "experiment" else _SCHEMA[section]
        for key, value in entries.items():
            if key == "experiment" and section == "run":
                continue  # consumed above
            if key not in table:
                _fail(section, key, "unknown key")
            merged[(section, key)] = value

    values: dict[tuple[str, str], object] = {}
    for (section, key), text in merged.items():
        table = allowed_extra if section == "experiment" else _SCHEMA[section]
        try:
            values[(section, key)] = table[key](text)
        except ConfigError as exc:
            _fail(section, key, str(exc))

    if seed is not None:
        values[("run", "seed")] = int(seed)
    if out_dir is not None:
        values[("run", "out_dir")] = out_dir
    if format is not None:
        values[("run", "format")] = format
    if threads is not None:
        values[("run", "threads")] = int(threads)

    options = {key: values[(section, key)]
               for (section, key) in values if section == "experiment"}
    return ExperimentConfig(
        experiment=name,
        seed=values[("run", "seed")],
        out_dir=values[("run", "out_dir")],
        format=values[("run", "format")],
        threads=values[("run", "threads")],
        kappa=values[("physics", "kappa")],
        gamma=values[("physics", "gamma")],
        n_trajectories=values[("sampling", "n_trajectories")],
        n_points=values.get(("grid", "n_points")),
        length=values.get(("grid", "length")),
        dt=values.get(("grid", "dt")),
        options=MappingProxyType(options),
    )
