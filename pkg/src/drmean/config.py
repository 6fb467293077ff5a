"""Run-configuration files: INI sections with strict key validation.

Sections: [data] (file path and column roles), [outcome] and [propensity]
(model bases), [estimators] (names and options), [simulate] (DGP overrides
and study size), [output].  Unknown sections, unknown keys, unregistered
estimator names, and malformed values are all configuration errors.
"""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
from dataclasses import dataclass

from .errors import ConfigError
from .recipes import CORE_ESTIMATORS, EstimatorOptions, registered_names
from .simulation import QUADRANTS, DgpSpec

_SECTION_KEYS = {
    "data": {"path", "t", "y", "pi", "m"},
    "outcome": {"columns", "mode"},
    "propensity": {"columns", "floor"},
    "estimators": {
        "names", "hybrid_delta", "gen_pi_mode", "gen_pi_lambda",
        "pi_cov_degree", "small_pi_threshold",
    },
    "simulate": {
        "preset", "quadrant", "n", "replicates", "seed", "ci_level",
        "beta0", "sigma", "alpha0", "alpha", "beta",
    },
    "output": {"path", "format"},
}


@dataclass(frozen=True)
class DataSection:
    path: str
    t: str = "t"
    y: str = "y"
    pi: str | None = None
    m: str | None = None


@dataclass(frozen=True)
class ModelSection:
    columns: tuple[str, ...]
    mode: str = "ols"
    floor: float | None = None


@dataclass(frozen=True)
class SimulateSection:
    spec: DgpSpec
    quadrant: str = "CC"
    n: int = 1000
    replicates: int = 1000
    seed: int = 20260810
    ci_level: float = 0.95


@dataclass(frozen=True)
class OutputSection:
    path: str | None = None
    format: str = "csv"


@dataclass(frozen=True)
class RunConfig:
    data: DataSection | None
    outcome: ModelSection | None
    propensity: ModelSection | None
    estimators: tuple[str, ...]
    options: EstimatorOptions
    simulate: SimulateSection | None
    output: OutputSection
    sha256: str


def _split_names(raw: str) -> tuple[str, ...]:
    return tuple(s.strip() for s in raw.split(",") if s.strip())


def _get_float(sec, key, default=None):
    if key not in sec:
        return default
    try:
        return float(sec[key])
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {sec[key]!r}") from None


def _get_int(sec, key, default=None):
    if key not in sec:
        return default
    try:
        return int(sec[key])
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {sec[key]!r}") from None


def _get_floats(sec, key):
    if key not in sec:
        return None
    try:
        return tuple(float(s) for s in sec[key].split(","))
    except ValueError:
        raise ConfigError(f"{key} must be comma-separated numbers") from None


def load_config(path) -> RunConfig:
    parser = configparser.ConfigParser(
        inline_comment_prefixes=(";", "#"), interpolation=None
    )
    try:
        with open(path) as fh:
            text = fh.read()
        parser.read_string(text, source=str(path))
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    except configparser.Error as e:
        raise ConfigError(f"malformed config {path}: {e}") from None

    for section in parser.sections():
        if section not in _SECTION_KEYS:
            raise ConfigError(f"unknown section [{section}]")
        extra = set(parser[section]) - _SECTION_KEYS[section]
        if extra:
            raise ConfigError(
                f"unknown keys in [{section}]: {sorted(extra)}"
            )

    data = None
    if parser.has_section("data"):
        sec = parser["data"]
        if "path" not in sec:
            raise ConfigError("[data] needs a path")
        data = DataSection(
            path=sec["path"],
            t=sec.get("t", "t"),
            y=sec.get("y", "y"),
            pi=sec.get("pi") or None,
            m=sec.get("m") or None,
        )

    outcome = None
    if parser.has_section("outcome"):
        sec = parser["outcome"]
        if "columns" not in sec:
            raise ConfigError("[outcome] needs columns")
        mode = sec.get("mode", "ols").lower()
        if mode not in ("ols", "wls", "srr"):
            raise ConfigError(f"[outcome] mode must be ols|wls|srr, got {mode!r}")
        outcome = ModelSection(columns=_split_names(sec["columns"]), mode=mode)

    propensity = None
    if parser.has_section("propensity"):
        sec = parser["propensity"]
        if "columns" not in sec:
            raise ConfigError("[propensity] needs columns")
        floor = _get_float(sec, "floor")
        if floor is not None and not (0.0 < floor < 0.5):
            raise ConfigError("[propensity] floor must lie in (0, 0.5)")
        propensity = ModelSection(
            columns=_split_names(sec["columns"]), floor=floor
        )

    estimators = CORE_ESTIMATORS
    defaults = EstimatorOptions()
    opt_kwargs = {}
    if parser.has_section("estimators"):
        sec = parser["estimators"]
        if "names" in sec:
            estimators = _split_names(sec["names"])
            unknown = [e for e in estimators if e not in registered_names()]
            if unknown:
                raise ConfigError(f"unknown estimators: {unknown}")
            if not estimators:
                raise ConfigError("[estimators] names is empty")
        opt_kwargs["hybrid_delta"] = _get_float(
            sec, "hybrid_delta", defaults.hybrid_delta
        )
        mode = sec.get("gen_pi_mode", defaults.gen_pi_mode).lower()
        if mode not in ("fitted", "one", "infinity", "shrunk"):
            raise ConfigError(f"unknown gen_pi_mode {mode!r}")
        opt_kwargs["gen_pi_mode"] = mode
        opt_kwargs["gen_pi_lambda"] = _get_float(
            sec, "gen_pi_lambda", defaults.gen_pi_lambda
        )
        opt_kwargs["pi_cov_degree"] = _get_int(
            sec, "pi_cov_degree", defaults.pi_cov_degree
        )
        opt_kwargs["small_pi_threshold"] = _get_float(
            sec, "small_pi_threshold", defaults.small_pi_threshold
        )
    if propensity is not None and propensity.floor is not None:
        opt_kwargs["propensity_floor"] = propensity.floor
    options = EstimatorOptions(**opt_kwargs)

    simulate = None
    if parser.has_section("simulate"):
        sec = parser["simulate"]
        preset = sec.get("preset", "default").lower()
        if preset == "default":
            spec = DgpSpec.default()
        elif preset == "mirror":
            spec = DgpSpec.mirror()
        else:
            raise ConfigError(f"unknown preset {preset!r}")
        overrides = {}
        for key in ("beta0", "sigma", "alpha0"):
            v = _get_float(sec, key)
            if v is not None:
                overrides[key] = v
        for key in ("alpha", "beta"):
            v = _get_floats(sec, key)
            if v is not None:
                if len(v) != spec.q:
                    raise ConfigError(f"{key} must have {spec.q} entries")
                overrides[key] = v
        if overrides:
            spec = dataclasses.replace(spec, **overrides)
        quadrant = sec.get("quadrant", "CC").upper()
        if quadrant not in QUADRANTS:
            raise ConfigError(f"quadrant must be one of {QUADRANTS}")
        ci_level = _get_float(sec, "ci_level", 0.95)
        if not 0.0 < ci_level < 1.0:
            raise ConfigError("ci_level must lie in (0, 1)")
        simulate = SimulateSection(
            spec=spec,
            quadrant=quadrant,
            n=_get_int(sec, "n", 1000),
            replicates=_get_int(sec, "replicates", 1000),
            seed=_get_int(sec, "seed", 20260810),
            ci_level=ci_level,
        )

    output = OutputSection()
    if parser.has_section("output"):
        sec = parser["output"]
        fmt = sec.get("format", "csv").lower()
        if fmt not in ("csv", "markdown"):
            raise ConfigError(f"format must be csv or markdown, got {fmt!r}")
        output = OutputSection(path=sec.get("path") or None, format=fmt)

    return RunConfig(
        data=data,
        outcome=outcome,
        propensity=propensity,
        estimators=estimators,
        options=options,
        simulate=simulate,
        output=output,
        sha256=hashlib.sha256(text.encode()).hexdigest(),
    )
