"""Backend settings that turn into a concrete embedding once the feature count is known."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .cv import DEFAULT_MAX_AMPLITUDES, CvEmbeddingSpec
from .errors import ConfigError
from .qubit import QubitEmbeddingSpec


def derive_seed(master_seed: int, *path: int) -> int:
    """64-bit seed at ``path`` below ``master_seed``.

    Uses numpy's SeedSequence spawn keys, so the seed for member ``k`` does
    not depend on how many other members exist.
    """
    ss = np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, np.uint64)[0])


def member_seeds(master_seed: int, k: int) -> tuple[int, int]:
    """(subset seed, angle seed) for ensemble member ``k``."""
    return derive_seed(master_seed, k, 0), derive_seed(master_seed, k, 1)


@dataclass(frozen=True)
class QubitBackend:
    n_qubits: int = 10
    depth: int = 52
    shared_angles: bool = False
    feature_scale: float = 1.0

    kind = "qubit"
    per_member = property(lambda self: not self.shared_angles)

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ConfigError("must be >= 1", path="backend.n_qubits")
        if self.n_qubits > 20:
            raise ConfigError("statevector simulation limited to 20 qubits", path="backend.n_qubits")
        if self.depth < 1:
            raise ConfigError("must be >= 1", path="backend.depth")

    def embedding(self, n_features: int, angle_seed: int) -> QubitEmbeddingSpec:
        return QubitEmbeddingSpec.from_seed(self.n_qubits, self.depth, angle_seed, self.feature_scale)

    def to_dict(self) -> dict:
        return {"kind": "qubit", **asdict(self)}


@dataclass(frozen=True)
class CvBackend:
    layers: int = 1
    beta: float = 0.1
    gamma: float = 0.1
    truncation: int = 8
    max_amplitudes: int = DEFAULT_MAX_AMPLITUDES

    kind = "cv"
    per_member = False

    def __post_init__(self):
        if self.layers < 1:
            raise ConfigError("must be >= 1", path="backend.layers")
        if self.truncation < 2:
            raise ConfigError("must be >= 2", path="backend.truncation")

    def embedding(self, n_features: int, angle_seed: int | None = None) -> CvEmbeddingSpec:
        spec = CvEmbeddingSpec(n_features, self.layers, self.beta, self.gamma, self.truncation, self.max_amplitudes)
        spec.check_budget()
        return spec

    def to_dict(self) -> dict:
        return {"kind": "cv", **asdict(self)}


def backend_from_dict(d: dict):
    d = dict(d)
    kind = d.pop("kind", None)
    try:
        if kind == "qubit":
            return QubitBackend(**d)
        if kind == "cv":
            return CvBackend(**d)
    except TypeError as exc:
        raise ConfigError(str(exc), path="backend") from None
    raise ConfigError(f"unknown backend kind {kind!r} (expected 'qubit' or 'cv')", path="backend.kind")
