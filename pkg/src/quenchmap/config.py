"""Experiment configuration: nested dataclasses read from / written to YAML."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path

import yaml

from .quench import QuenchConfig
from .schedule import TWO_PI, parse_schedule_spec

DEFAULT_TAUS = [5.0, 10.0, 20.0, 30.0, 40.0, 100.0]


@dataclass
class DatasetConfig:
    path: str = ""
    label_column: str = "label"
    name: str = ""


@dataclass
class PreprocessConfig:
    top_k: int | None = None
    mi_threshold: float = 0.005
    n_bins: int = 10


@dataclass
class EncodingConfig:
    corr_threshold: float = 0.1
    max_degree: int | None = None
    h_max: float = 4.0
    coupling_scale: float = 1.0
    j_max: float = 1.0


@dataclass
class QuenchSection:
    schedule: str = "linear"
    gamma0: float = TWO_PI
    beta0: float = TWO_PI
    energy_unit: str = "GHz"
    tau_list: list = field(default_factory=lambda: list(DEFAULT_TAUS))
    dt_ns: float = 0.01
    shots: int | None = None
    seed: int = 0
    include_zz: bool = False
    standardize_mapped: bool = False


def _default_models() -> dict:
    return {
        "svm": {"C": [0.1, 1.0, 10.0, 100.0]},
        "gbt": {"n_trees": [100, 300], "max_depth": [2, 3], "learning_rate": [0.05, 0.1]},
    }


@dataclass
class CvConfig:
    n_splits: int = 10
    n_repeats: int = 5
    seed: int = 0
    inner: str = "holdout"
    inner_test_fraction: float = 0.2
    inner_splits: int = 3


@dataclass
class OutputConfig:
    out_dir: str = "results"
    cache_dir: str | None = None
    jobs: int = 1


@dataclass
class ExperimentConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    encoding: EncodingConfig = field(default_factory=EncodingConfig)
    quench: QuenchSection = field(default_factory=QuenchSection)
    models: dict = field(default_factory=_default_models)
    cv: CvConfig = field(default_factory=CvConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def validate(self) -> "ExperimentConfig":
        taus = self.quench.tau_list
        if not taus or any(not float(t) > 0 for t in taus):
            raise ValueError("quench.tau_list must be non-empty with positive entries")
        self.quench.tau_list = [float(t) for t in taus]
        unknown = set(self.models) - {"svm", "gbt"}
        if unknown:
            raise ValueError(f"unknown model families {sorted(unknown)}; use svm and/or gbt")
        if not self.models:
            raise ValueError("at least one model family is required")
        if self.cv.inner not in ("holdout", "kfold"):
            raise ValueError("cv.inner must be 'holdout' or 'kfold'")
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        """Hash of everything that affects results (output location excluded)."""
        d = self.to_dict()
        d.pop("output")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    def quench_config(self, tau_ns: float) -> QuenchConfig:
        q = self.quench
        schedule = parse_schedule_spec(q.schedule, tau_ns, q.gamma0, q.beta0, q.energy_unit)
        return QuenchConfig(dt_ns=q.dt_ns, schedule=schedule, shots=q.shots, seed=q.seed)

    def dump(self, path) -> None:
        Path(path).write_text(yaml.safe_dump(self.to_dict(), sort_keys=False), encoding="utf-8")


def _build(cls, data, where=""):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ValueError(f"config section {where or '<root>'} must be a mapping")
    known = {f.name: f for f in fields(cls)}
    extra = set(data) - set(known)
    if extra:
        raise ValueError(f"unknown config keys in {where or '<root>'}: {sorted(extra)}")
    kwargs = {}
    for name, value in data.items():
        default = getattr(cls(), name)
        if is_dataclass(default):
            kwargs[name] = _build(type(default), value, f"{where}.{name}".lstrip("."))
        else:
            kwargs[name] = copy.deepcopy(value)
    return cls(**kwargs)


def config_from_dict(data: dict) -> ExperimentConfig:
    return _build(ExperimentConfig, data).validate()


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as err:
        raise ValueError(f"{path}: malformed config: {err}") from None
    config = config_from_dict(data)
    ds = config.dataset
    if ds.path and not Path(ds.path).is_absolute():
        ds.path = str((path.parent / ds.path).resolve())
    return config


def set_value(config: ExperimentConfig, dotted: str, value) -> None:
    """Assign ``value`` to a dotted key such as ``quench.dt_ns``."""
    *parents, leaf = dotted.split(".")
    target = config
    for part in parents:
        target = getattr(target, part)
    if not hasattr(target, leaf):
        raise KeyError(f"unknown config key {dotted!r}")
    setattr(target, leaf, value)
