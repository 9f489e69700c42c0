"""Pipeline configuration: one JSON document, every hyperparameter named.

Example (all keys optional; shown with their defaults)::

    {
      "mode": "group",
      "seed": 0,
      "threads": 1,
      "dictionary_size": 32,
      "interval_seconds": {"space": 1.0, "time": 2.0, "cluster": 1.0},
      "features": {"eta": 0.08, "spatial_extent": 15, "temporal_extent": 7,
                   "dilation_radius": 5, "n_max": 15000,
                   "threshold_mode": "fixed", "percentile": 10.0},
      "solver": {"lam": 0.15, "max_outer_iter": 60, "max_inner_iter": 200,
                 "tol": 1e-05, "kkt_tol": 1e-06},
      "grouping": {"r": 0.9, "low_confidence_ratio": 1.5},
      "clustering": {"K": 7, "C_max": 10, "slack": 0.01, "min_eigenvalue": 0.5},
      "input": {"frames": null, "fps": 30.0, "temporal_subsample": 1,
                "masks": null, "persons": null, "scenario": null},
      "oracle": {"instances": 200, "m_max": 10, "k_max": 6,
                 "lams": [0.01, 0.1, 0.5], "rel_tol": 0.0001}
    }

``input.scenario`` (a path or an inline scenario object) replaces
frames and masks with synthetic patch sets; each scenario interval is one
analysis interval.  Relative paths resolve against the config file.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional, Union

from .errors import ConfigurationError
from .features import FeatureConfig
from .grouping import GroupingConfig
from .sparse_model import SolverConfig

__all__ = [
    "MODES",
    "ClusterConfig",
    "InputConfig",
    "OracleConfig",
    "PipelineConfig",
    "load_config",
]

MODES = ("group", "change", "cluster", "synth", "oracle-check")


@dataclass(frozen=True)
class ClusterConfig:
    K: int = 7
    C_max: int = 10
    slack: float = 0.01
    min_eigenvalue: float = 0.5

    def __post_init__(self):
        if self.K < 1 or self.C_max < 1:
            raise ConfigurationError("K and C_max must be >= 1")
        if self.slack < 0:
            raise ConfigurationError("slack must be >= 0")


@dataclass(frozen=True)
class InputConfig:
    frames: Optional[str] = None
    fps: float = 30.0
    temporal_subsample: int = 1
    masks: Optional[str] = None
    persons: Optional[int] = None
    scenario: Union[None, str, dict] = None

    def __post_init__(self):
        if self.fps <= 0:
            raise ConfigurationError("fps must be positive")
        if self.temporal_subsample < 1:
            raise ConfigurationError("temporal_subsample must be >= 1")
        if self.persons is not None and self.persons < 1:
            raise ConfigurationError("persons must be >= 1")


@dataclass(frozen=True)
class OracleConfig:
    instances: int = 200
    m_max: int = 10
    k_max: int = 6
    lams: tuple = (0.01, 0.1, 0.5)
    rel_tol: float = 1e-4

    def __post_init__(self):
        object.__setattr__(self, "lams", tuple(float(v) for v in self.lams))
        if self.instances < 1 or self.m_max < 1 or not 1 <= self.k_max <= 12:
            raise ConfigurationError("oracle needs instances >= 1, m_max >= 1, 1 <= k_max <= 12")


def _interval_defaults():
    return {"space": 1.0, "time": 2.0, "cluster": 1.0}


@dataclass(frozen=True)
class PipelineConfig:
    mode: str = "group"
    seed: int = 0
    threads: int = 1
    dictionary_size: int = 32
    interval_seconds: dict = field(default_factory=_interval_defaults)
    features: FeatureConfig = field(default_factory=FeatureConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    grouping: GroupingConfig = field(default_factory=GroupingConfig)
    clustering: ClusterConfig = field(default_factory=ClusterConfig)
    input: InputConfig = field(default_factory=InputConfig)
    oracle: OracleConfig = field(default_factory=OracleConfig)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigurationError("seed must be an unsigned 64-bit integer")
        if self.threads < 1:
            raise ConfigurationError("threads must be >= 1")
        if self.dictionary_size < 1:
            raise ConfigurationError("dictionary_size must be >= 1")
        secs = {**_interval_defaults(), **self.interval_seconds}
        unknown = set(secs) - set(_interval_defaults())
        if unknown:
            raise ConfigurationError(f"unknown interval_seconds keys: {sorted(unknown)}")
        if any(v <= 0 for v in secs.values()):
            raise ConfigurationError("interval lengths must be positive")
        object.__setattr__(self, "interval_seconds", {k: float(v) for k, v in secs.items()})
        # the master seed drives every stochastic stage
        object.__setattr__(self, "features", replace(self.features, seed=int(self.seed)))
        object.__setattr__(self, "solver", replace(self.solver, seed=int(self.seed)))

    @classmethod
    def from_dict(cls, doc: dict, base_dir: Optional[Path] = None) -> "PipelineConfig":
        if not isinstance(doc, dict):
            raise ConfigurationError("config must be a JSON object")
        nested = {"features": FeatureConfig, "solver": SolverConfig, "grouping": GroupingConfig,
                  "clustering": ClusterConfig, "input": InputConfig, "oracle": OracleConfig}
        _check_keys(doc, {f.name for f in fields(cls)}, "config")
        kwargs = {}
        for key, value in doc.items():
            if key in nested:
                sub = dict(value or {})
                allowed = {f.name for f in fields(nested[key])} - {"seed"}
                _check_keys(sub, allowed, key)
                if key == "input" and base_dir is not None:
                    sub = _resolve_paths(sub, base_dir)
                try:
                    kwargs[key] = nested[key](**sub)
                except TypeError as exc:
                    raise ConfigurationError(f"{key}: {exc}") from exc
            else:
                kwargs[key] = value
        return cls(**kwargs)

    def with_overrides(self, **changes) -> "PipelineConfig":
        """Copy with top-level fields replaced; ``None`` values are ignored."""
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, **changes)

    def resolved(self) -> dict:
        """Plain-data view of the full configuration, as embedded in outputs."""
        out = asdict(self)
        out["oracle"]["lams"] = list(out["oracle"]["lams"])
        return out


def _check_keys(doc: dict, allowed: set, where: str):
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigurationError(f"{where}: unknown keys {sorted(unknown)}")


def _resolve_paths(sub: dict, base_dir: Path) -> dict:
    sub = dict(sub)
    for key in ("frames", "masks", "scenario"):
        value = sub.get(key)
        if isinstance(value, str) and not Path(value).is_absolute():
            sub[key] = str(base_dir / value)
    return sub


def load_config(path=None, **overrides) -> PipelineConfig:
    """Read a config file (or start from defaults) and apply overrides."""
    if path is None:
        cfg = PipelineConfig()
    else:
        p = Path(path)
        try:
            doc = json.loads(p.read_text())
        except OSError as exc:
            raise ConfigurationError(f"cannot read config {p}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config {p} is not valid JSON: {exc}") from exc
        cfg = PipelineConfig.from_dict(doc, base_dir=p.parent)
    return cfg.with_overrides(**overrides)
