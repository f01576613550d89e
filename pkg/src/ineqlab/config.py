"""Flat experiment configuration read from YAML or JSON."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional, Union

import yaml

from .errors import ConfigError

SUBCOMMANDS = ("deficit-scan", "flow-run", "improved-curve", "be-quotient", "lsi-quotient",
               "competing", "lift")


@dataclass
class ExperimentConfig:
    experiment: str
    d: int = 3
    p: Union[float, str] = 3.0
    N: int = 1
    # resolution
    n_grid: int = 64
    axial_degree: int = 40
    gauss_nodes: int = 64
    n_rays: int = 48
    # sweeps and families
    eps: list = field(default_factory=lambda: [1e-2, 5e-3, 2.5e-3, 1.25e-3])
    degrees: list = field(default_factory=lambda: [2])
    families: list = field(default_factory=list)
    n_random: int = 10
    amplitude: float = 0.3
    initial: str = "cosine"
    input: Optional[str] = None
    # flow
    dt: float = 1e-3
    t_end: float = 3.0
    scheme: str = "explicit-adaptive"
    monitor_stride: int = 20
    flow_tolerance: float = 1e-10
    beta: Optional[float] = None
    m: Optional[float] = None
    allow_m_outside: bool = False
    # improvement curve
    s_max: Optional[float] = None
    n_points: int = 101
    # iterations
    mode: str = "euclidean"
    n_max: int = 50
    stop_tol: float = 1e-3
    # dimensional lift
    lift_dims: list = field(default_factory=lambda: [100, 1000, 10000])
    monomial: list = field(default_factory=lambda: [2])
    # user-supplied constants
    eps0: Optional[float] = None
    kappa_pos: Optional[float] = None
    # run
    seed: int = 0
    out_dir: str = "out"

    def resolved(self) -> dict:
        return asdict(self)


_INT = {"d", "N", "n_grid", "axial_degree", "gauss_nodes", "n_rays", "n_random",
        "monitor_stride", "n_points", "n_max", "seed"}
_FLOAT = {"amplitude", "dt", "t_end", "flow_tolerance", "stop_tol"}
_OPT_FLOAT = {"beta", "m", "s_max", "eps0", "kappa_pos"}
_STR = {"experiment", "initial", "scheme", "mode", "out_dir"}
_FLOAT_LIST = {"eps"}
_INT_LIST = {"degrees", "lift_dims", "monomial"}
_STR_LIST = {"families"}


def _is_int(v) -> bool:
    return isinstance(v, int) and not isinstance(v, bool)


def _coerce(key, v):
    if key in _INT:
        if not _is_int(v):
            raise ConfigError(f"{key}: expected an integer, got {v!r}")
        return v
    if key in _FLOAT or (key in _OPT_FLOAT and v is not None):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ConfigError(f"{key}: expected a finite number, got {v!r}")
        return float(v)
    if key in _OPT_FLOAT or (key == "input" and v is None):
        return None
    if key in _STR or key == "input":
        if not isinstance(v, str):
            raise ConfigError(f"{key}: expected a string, got {v!r}")
        return v
    if key == "p":
        if isinstance(v, str):
            if v.strip().lower() != "log":
                raise ConfigError(f"p: expected a number or 'log', got {v!r}")
            return "log"
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"p: expected a number or 'log', got {v!r}")
        return float(v)
    if key == "allow_m_outside":
        if not isinstance(v, bool):
            raise ConfigError(f"{key}: expected true/false, got {v!r}")
        return v
    if key in _FLOAT_LIST | _INT_LIST | _STR_LIST:
        if not isinstance(v, list):
            raise ConfigError(f"{key}: expected a list, got {v!r}")
        check = (_is_int if key in _INT_LIST else
                 (lambda x: isinstance(x, str)) if key in _STR_LIST else
                 (lambda x: isinstance(x, (int, float)) and not isinstance(x, bool)))
        bad = [x for x in v if not check(x)]
        if bad:
            raise ConfigError(f"{key}: invalid entries {bad!r}")
        return [float(x) for x in v] if key in _FLOAT_LIST else list(v)
    raise ConfigError(f"unknown key {key!r}")


def _validate(cfg: ExperimentConfig):
    if cfg.d < 3:
        raise ConfigError("d must be >= 3")
    if cfg.N not in (1, 2, 3):
        raise ConfigError("N must be 1, 2 or 3")
    for key in ("n_grid", "gauss_nodes"):
        if getattr(cfg, key) < 8:
            raise ConfigError(f"{key} must be >= 8")
    if cfg.axial_degree < 2 or cfg.n_rays < 2:
        raise ConfigError("axial_degree and n_rays must be >= 2")
    for key in ("dt", "t_end", "flow_tolerance", "stop_tol", "amplitude"):
        if not getattr(cfg, key) > 0:
            raise ConfigError(f"{key} must be positive")
    for key in ("monitor_stride", "n_points", "n_max"):
        if getattr(cfg, key) < 1:
            raise ConfigError(f"{key} must be >= 1")
    if cfg.n_random < 0:
        raise ConfigError("n_random must be >= 0")
    if any(not e > 0 for e in cfg.eps):
        raise ConfigError("eps entries must be positive")
    if any(k < 0 for k in cfg.degrees):
        raise ConfigError("degrees must be >= 0")
    if not 0 <= cfg.seed < 2 ** 64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    if cfg.mode not in ("euclidean", "gaussian"):
        raise ConfigError("mode must be 'euclidean' or 'gaussian'")
    if cfg.initial not in ("cosine", "random", "file"):
        raise ConfigError("initial must be 'cosine', 'random' or 'file'")
    if cfg.initial == "file" and cfg.input is None:
        raise ConfigError("initial = 'file' needs input")
    if any(n <= 1 for n in cfg.lift_dims):
        raise ConfigError("lift_dims entries must exceed 1")
    if any(k < 0 for k in cfg.monomial) or sum(cfg.monomial) > 4 or not cfg.monomial:
        raise ConfigError("monomial: nonnegative exponents with total degree <= 4")


def from_dict(doc: dict, base: Path | None = None) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("configuration must be a mapping")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(unknown)}")
    if "experiment" not in doc:
        raise ConfigError("missing key 'experiment'")
    cfg = ExperimentConfig(**{k: _coerce(k, v) for k, v in doc.items()})
    if base is not None:
        cfg.out_dir = str((base / cfg.out_dir).resolve())
        if cfg.input is not None:
            cfg.input = str((base / cfg.input).resolve())
    _validate(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return from_dict(doc if doc is not None else {}, base=path.resolve().parent)
