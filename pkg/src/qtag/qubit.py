"""Statevector simulation of the layered qubit feature map and its fidelity kernel.

Each layer applies H to every qubit, then ``R_y(theta) R_z(x)`` per qubit, then a
ring of controlled-``R_x(phi)`` gates (control k, target k+1 mod n).  Features
are re-uploaded cyclically when ``n * depth`` exceeds the feature count.

Qubit 1 is the most significant bit of the amplitude index.  ``feature_scale``
multiplies every feature before its z rotation (1.0 encodes ``R_z(x)`` as is).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .gram import KernelMatrix, gram

TWO_PI = 2.0 * np.pi
_H = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)


def rz(lam):
    return np.diag([np.exp(-0.5j * lam), np.exp(0.5j * lam)])


def ry(lam):
    c, s = np.cos(lam / 2), np.sin(lam / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rx(lam):
    c, s = np.cos(lam / 2), np.sin(lam / 2)
    return np.array([[c, -1j * s], [-1j * s, c]])


@dataclass(frozen=True, eq=False)
class QubitEmbeddingSpec:
    n_qubits: int
    depth: int
    theta: np.ndarray = field(repr=False)
    phi: np.ndarray = field(repr=False)
    angle_seed: int | None = None
    feature_scale: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.feature_scale):
            raise ConfigError("must be finite", path="backend.feature_scale")
        if self.n_qubits < 1:
            raise ConfigError("must be >= 1", path="backend.n_qubits")
        if self.depth < 1:
            raise ConfigError("must be >= 1", path="backend.depth")
        size = self.n_qubits * self.depth
        for name in ("theta", "phi"):
            a = np.array(getattr(self, name), dtype=np.float64).reshape(-1)
            if a.shape[0] != size:
                raise ConfigError(f"needs {size} angles, got {a.shape[0]}", path=f"backend.{name}")
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    @classmethod
    def from_seed(cls, n_qubits: int, depth: int, angle_seed: int, feature_scale: float = 1.0) -> "QubitEmbeddingSpec":
        """Draw theta then phi uniformly on [0, 2pi) from ``angle_seed``."""
        rng = np.random.default_rng(angle_seed)
        size = n_qubits * depth
        theta = rng.uniform(0.0, TWO_PI, size)
        phi = rng.uniform(0.0, TWO_PI, size)
        return cls(n_qubits, depth, theta, phi, angle_seed, feature_scale)

    def key(self) -> dict:
        return {
            "backend": "qubit",
            "n_qubits": self.n_qubits,
            "depth": self.depth,
            "theta": self.theta.tolist(),
            "phi": self.phi.tolist(),
            "feature_scale": float(self.feature_scale),
        }

    def embed(self, X) -> np.ndarray:
        return build_qubit_states(X, self)

    @staticmethod
    def overlap(A, B):
        return np.abs(A @ B.conj().T) ** 2


def build_qubit_states(X, spec: QubitEmbeddingSpec) -> np.ndarray:
    """Embed each row of ``X``; returns a (count, 2**n) complex array."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    N, F = X.shape
    if F == 0:
        raise ConfigError("feature vector is empty")
    n, d = spec.n_qubits, spec.depth
    psi = np.zeros((N, 2**n), dtype=complex)
    psi[:, 0] = 1.0
    tensor = psi.reshape((N,) + (2,) * n)
    for i in range(d):
        for j in range(n):
            slot = n * i + j
            x = spec.feature_scale * X[:, slot % F]
            # per-event 2x2: Ry(theta) Rz(x) H
            ez = np.exp(-0.5j * x)
            c, s = np.cos(spec.theta[slot] / 2), np.sin(spec.theta[slot] / 2)
            u00 = (c * ez + (-s) * ez.conj()) / np.sqrt(2)
            u01 = (c * ez - (-s) * ez.conj()) / np.sqrt(2)
            u10 = (s * ez + c * ez.conj()) / np.sqrt(2)
            u11 = (s * ez - c * ez.conj()) / np.sqrt(2)
            view = psi.reshape(N, 2**j, 2, 2 ** (n - j - 1))
            p0 = view[:, :, 0, :].copy()
            p1 = view[:, :, 1, :]
            shape = (N, 1, 1)
            view[:, :, 0, :] = u00.reshape(shape) * p0 + u01.reshape(shape) * p1
            view[:, :, 1, :] = u10.reshape(shape) * p0 + u11.reshape(shape) * p1
        if n == 1:
            continue
        for k in range(n):
            _controlled_rx(tensor, k, (k + 1) % n, spec.phi[n * i + k])
    return psi


def _controlled_rx(tensor, control, target, lam):
    c, s = np.cos(lam / 2), np.sin(lam / 2)
    idx = [slice(None)] * tensor.ndim
    idx[1 + control] = 1
    sub = tensor[tuple(idx)]
    tax = 1 + target - (1 if target > control else 0)
    i0 = [slice(None)] * sub.ndim
    i1 = [slice(None)] * sub.ndim
    i0[tax], i1[tax] = 0, 1
    p0 = sub[tuple(i0)].copy()
    p1 = sub[tuple(i1)].copy()
    sub[tuple(i0)] = c * p0 - 1j * s * p1
    sub[tuple(i1)] = -1j * s * p0 + c * p1


def build_qubit_state(x, spec: QubitEmbeddingSpec) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size == 0:
        raise ConfigError("feature vector is empty")
    return build_qubit_states(x[None, :], spec)[0]


def qubit_kernel(x, y, spec: QubitEmbeddingSpec) -> float:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape != y.shape:
        raise ConfigError(f"length mismatch ({x.size} vs {y.size})")
    a = build_qubit_state(x, spec)
    b = build_qubit_state(y, spec)
    return float(abs(np.vdot(a, b)) ** 2)


def qubit_gram(X, Y=None, spec: QubitEmbeddingSpec = None, threads: int = 1) -> KernelMatrix:
    if spec is None:
        raise ConfigError("an embedding spec is required")
    X = getattr(X, "X", X)
    Y = getattr(Y, "X", Y)
    return gram(spec, X, Y, threads=threads)
