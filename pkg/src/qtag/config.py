"""Experiment configuration: JSON in, validated dataclasses out.

Example (every section optional except ``data``)::

    {
      "data": {"synthetic": {"feature_count": 30, "informative_count": 4,
                             "class_separation": 0.8, "seed": 1, "count": 4000}},
      "preprocessing": {"standardize": true, "pca_k": null},
      "backend": {"kind": "qubit", "n_qubits": 6, "depth": 20,
                  "shared_angles": false, "feature_scale": 1.0},
      "ensemble": {"N": 25, "n_train_per_member": 500, "G": 8,
                   "C_reg": 1.0, "master_seed": 0},
      "evaluation": {"test_size": 2000, "binning": "static"},
      "sweep": {"axis": "generation", "values": [1, 2, 4, 8]},
      "output": "results",
      "threads": 1
    }

``data`` may instead be ``{"path": "events.csv"}``.  A CV backend reads
``{"kind": "cv", "layers": 1, "beta": 0.1, "gamma": 0.1, "truncation": 8}``.
"""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .backends import backend_from_dict
from .data import SyntheticSpec
from .errors import ConfigError

SWEEP_AXES = ("generation", "N", "n_train", "pca_k", "depth", "C_reg")
BINNING_MODES = ("static", "equal-population")

DEFAULTS = {
    "preprocessing": {"standardize": True, "pca_k": None},
    "backend": {"kind": "qubit", "n_qubits": 10, "depth": 52},
    "ensemble": {"N": 1, "n_train_per_member": 1000, "G": 1, "C_reg": 1.0, "master_seed": 0},
    "evaluation": {"test_size": 1000, "binning": "static"},
    "sweep": None,
    "output": "results",
    "threads": 1,
}


def _join(path, key):
    return f"{path}.{key}" if path else key


def _need(d, key, path, kind):
    if key not in d:
        raise ConfigError("missing required field", path=_join(path, key))
    v = d[key]
    if not isinstance(v, kind) or (isinstance(v, bool) and kind is not bool):
        name = kind.__name__ if isinstance(kind, type) else "number"
        raise ConfigError(f"expected {name}, got {type(v).__name__}", path=_join(path, key))
    return v


def _int(d, key, path, lo=None):
    v = _need(d, key, path, int)
    if lo is not None and v < lo:
        raise ConfigError(f"must be >= {lo}", path=_join(path, key))
    return v


def _num(d, key, path, positive=False):
    v = _need(d, key, path, (int, float))
    if positive and not v > 0:
        raise ConfigError("must be > 0", path=_join(path, key))
    return float(v)


@dataclass(frozen=True)
class EnsembleSettings:
    N: int
    n_train_per_member: int
    G: int
    C_reg: float
    master_seed: int


@dataclass(frozen=True)
class ExperimentConfig:
    data_path: str | None
    synthetic: SyntheticSpec | None
    standardize: bool
    pca_k: int | None
    backend: object
    ensemble: EnsembleSettings
    test_size: int
    binning: str
    sweep_axis: str | None
    sweep_values: tuple
    output: str
    threads: int = 1
    raw: dict = field(default=None, compare=False, repr=False)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.raw)

    def with_value(self, axis: str, value) -> "ExperimentConfig":
        """Copy of this config with one sweep-axis field replaced."""
        raw = copy.deepcopy(self.raw)
        target = {
            "generation": ("ensemble", "G"),
            "N": ("ensemble", "N"),
            "n_train": ("ensemble", "n_train_per_member"),
            "pca_k": ("preprocessing", "pca_k"),
            "depth": ("backend", "depth"),
            "C_reg": ("ensemble", "C_reg"),
        }[axis]
        raw[target[0]][target[1]] = value
        raw["sweep"] = None
        return parse_config(raw)


def apply_overrides(raw: dict, overrides) -> dict:
    """Apply ``a.b.c=value`` overrides; values parse as JSON, else as plain strings."""
    raw = copy.deepcopy(raw)
    for item in overrides or ():
        key, sep, text = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        node = raw
        parts = key.split(".")
        for p in parts[:-1]:
            if not isinstance(node.get(p), dict):
                node[p] = {}
            node = node[p]
        node[parts[-1]] = value
    return raw


def parse_config(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    full = copy.deepcopy(DEFAULTS)
    for k, v in raw.items():
        if k not in DEFAULTS and k != "data":
            raise ConfigError("unknown field", path=k)
        if isinstance(v, dict) and isinstance(full.get(k), dict) and k != "backend":
            full[k] = {**full[k], **v}
        else:
            full[k] = copy.deepcopy(v)
    if "data" not in full:
        raise ConfigError("missing required field", path="data")

    data = full["data"]
    if not isinstance(data, dict) or ("path" in data) == ("synthetic" in data):
        raise ConfigError("give exactly one of 'path' or 'synthetic'", path="data")
    data_path, synthetic = None, None
    if "path" in data:
        data_path = str(_need(data, "path", "data", str))
    else:
        s = data["synthetic"]
        if not isinstance(s, dict):
            raise ConfigError("expected an object", path="data.synthetic")
        synthetic = SyntheticSpec(
            _int(s, "feature_count", "data.synthetic", 1),
            _int(s, "informative_count", "data.synthetic", 0),
            _num(s, "class_separation", "data.synthetic"),
            _int(s, "seed", "data.synthetic"),
            _int(s, "count", "data.synthetic", 1),
        )

    pre = full["preprocessing"]
    standardize = _need(pre, "standardize", "preprocessing", bool)
    pca_k = pre.get("pca_k")
    if pca_k is not None and (not isinstance(pca_k, int) or isinstance(pca_k, bool) or pca_k < 1):
        raise ConfigError("must be a positive integer or null", path="preprocessing.pca_k")

    if not isinstance(full["backend"], dict):
        raise ConfigError("expected an object", path="backend")
    backend = backend_from_dict(full["backend"])

    e = full["ensemble"]
    ens = EnsembleSettings(
        _int(e, "N", "ensemble", 1),
        _int(e, "n_train_per_member", "ensemble", 2),
        _int(e, "G", "ensemble", 1),
        _num(e, "C_reg", "ensemble", positive=True),
        _int(e, "master_seed", "ensemble", 0),
    )

    ev = full["evaluation"]
    test_size = _int(ev, "test_size", "evaluation", 1)
    binning = _need(ev, "binning", "evaluation", str)
    if binning not in BINNING_MODES:
        raise ConfigError(f"must be one of {BINNING_MODES}", path="evaluation.binning")

    axis, values = None, ()
    sw = full["sweep"]
    if sw is not None:
        if not isinstance(sw, dict):
            raise ConfigError("expected an object", path="sweep")
        axis = _need(sw, "axis", "sweep", str)
        if axis not in SWEEP_AXES:
            raise ConfigError(f"must be one of {SWEEP_AXES}", path="sweep.axis")
        values = _need(sw, "values", "sweep", list)
        if not values:
            raise ConfigError("must not be empty", path="sweep.values")
        for i, v in enumerate(values):
            ok = isinstance(v, (int, float)) and not isinstance(v, bool)
            if axis != "C_reg":
                ok = ok and isinstance(v, int) and v >= 1
            elif ok:
                ok = v > 0
            if not ok:
                raise ConfigError("invalid sweep value", path=f"sweep.values[{i}]")
        if axis == "depth" and backend.kind != "qubit":
            raise ConfigError("depth sweeps need a qubit backend", path="sweep.axis")
        values = tuple(values)

    threads = _int(full, "threads", "", 1) if "threads" in full else 1
    output = str(full.get("output") or "results")
    return ExperimentConfig(
        data_path, synthetic, standardize, pca_k, backend, ens, test_size, binning,
        axis, values, output, threads, raw=full,
    )


def load_config(path, overrides=()) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}", path=str(path)) from None
    except OSError as exc:
        raise ConfigError(str(exc), path=str(path)) from None
    return parse_config(apply_overrides(raw, overrides))


def resolved(cfg: ExperimentConfig) -> dict:
    out = cfg.to_dict()
    out["backend"] = cfg.backend.to_dict()
    out["ensemble"] = asdict(cfg.ensemble)
    return out
