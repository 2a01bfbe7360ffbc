"""Continuous-variable feature map simulated in a truncated Fock basis.

Each feature drives one qumode.  The embedding alternates displacement
layers ``exp(beta x_i (a^dag - a))`` with nearest-neighbour two-mode squeezing
``exp(gamma x_i (a_i a_{i+1} - a_i^dag a_{i+1}^dag))`` on an open chain,
starting from vacuum with a displacement.  With one layer the modes never
interact, so states are kept in product form (``n`` vectors of length ``D``)
and kernels cost ``n * D**2`` per pair.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.linalg import expm

from .errors import BudgetError, ConfigError
from .gram import KernelMatrix, gram

DEFAULT_MAX_AMPLITUDES = 2**20
# amplitudes held in memory at once while building a batch of full states
_CHUNK_AMPLITUDES = 2**22


class LadderOperators(NamedTuple):
    a: np.ndarray
    a_dag: np.ndarray


def ladder_operators(D: int) -> LadderOperators:
    if D < 2:
        raise ConfigError(f"truncation D={D} must be >= 2", path="backend.truncation")
    a = np.diag(np.sqrt(np.arange(1, D, dtype=np.float64)), k=1).astype(complex)
    return LadderOperators(a, a.conj().T)


def displacement_generator(x_i: float, beta: float, D: int) -> np.ndarray:
    a, a_dag = ladder_operators(D)
    return beta * x_i * (a_dag - a)


def single_mode_displacement(x_i: float, beta: float, D: int) -> np.ndarray:
    return expm(displacement_generator(x_i, beta, D))


def squeeze_generator(x_i: float, gamma: float, D: int) -> np.ndarray:
    a, a_dag = ladder_operators(D)
    return gamma * x_i * (np.kron(a, a) - np.kron(a_dag, a_dag))


def two_mode_squeeze(x_i: float, gamma: float, D: int) -> np.ndarray:
    """Unitary on modes (i, i+1); row index is ``D * n_i + n_{i+1}``."""
    return expm(squeeze_generator(x_i, gamma, D))


@lru_cache(maxsize=None)
def _spectral(kind: str, D: int):
    """Eigendecomposition of the Hermitian ``i * A`` for the unit generator ``A``.

    Then ``exp(t A) = V diag(exp(-i t w)) V^H`` for any real ``t``, which lets a
    whole batch of feature values share one decomposition.
    """
    if kind == "disp":
        A = displacement_generator(1.0, 1.0, D)
    else:
        A = squeeze_generator(1.0, 1.0, D)
    w, V = np.linalg.eigh(1j * A)
    w.setflags(write=False)
    V.setflags(write=False)
    return w, V


def _batch_unitaries(kind: str, t: np.ndarray, D: int) -> np.ndarray:
    w, V = _spectral(kind, D)
    phases = np.exp(-1j * np.multiply.outer(t, w))
    return (V[None, :, :] * phases[:, None, :]) @ V.conj().T


def displaced_vacua(t: np.ndarray, D: int) -> np.ndarray:
    """``exp(t (a^dag - a)) |0>`` for every entry of ``t``; adds a trailing axis of size D."""
    w, V = _spectral("disp", D)
    t = np.asarray(t, dtype=np.float64)
    phases = np.exp(-1j * np.multiply.outer(t, w))
    return (phases * V[0].conj()) @ V.T


@dataclass(frozen=True)
class CvEmbeddingSpec:
    n_modes: int
    layers: int = 1
    beta: float = 0.1
    gamma: float = 0.1
    truncation: int = 8
    max_amplitudes: int = DEFAULT_MAX_AMPLITUDES

    def __post_init__(self):
        if self.n_modes < 1:
            raise ConfigError("must be >= 1", path="backend.n_modes")
        if self.layers < 1:
            raise ConfigError("must be >= 1", path="backend.layers")
        if self.truncation < 2:
            raise ConfigError("must be >= 2", path="backend.truncation")
        if not (np.isfinite(self.beta) and np.isfinite(self.gamma)):
            raise ConfigError("beta and gamma must be finite", path="backend")

    @property
    def product_form(self) -> bool:
        return self.layers == 1

    def key(self) -> dict:
        return {
            "backend": "cv",
            "n_modes": self.n_modes,
            "layers": self.layers,
            "beta": float(self.beta),
            "gamma": float(self.gamma) if self.layers > 1 else None,
            "truncation": self.truncation,
        }

    def check_budget(self):
        if self.product_form:
            return
        size = self.truncation**self.n_modes
        if size > self.max_amplitudes:
            raise BudgetError(
                f"{self.n_modes} modes at D={self.truncation} need {self.truncation}^{self.n_modes} "
                f"amplitudes (budget {self.max_amplitudes}); use layers=1 (product states) "
                f"or reduce the feature count with PCA"
            )

    def embed(self, X) -> np.ndarray:
        return build_cv_states(X, self)

    def overlap(self, A, B):
        if self.product_form:
            K = np.ones((A.shape[0], B.shape[0]))
            for m in range(A.shape[1]):
                K *= np.abs(A[:, m, :] @ B[:, m, :].conj().T) ** 2
            return K
        return np.abs(A @ B.conj().T) ** 2


def build_cv_states(X, spec: CvEmbeddingSpec) -> np.ndarray:
    """Embed each row of ``X``.

    Returns (count, n, D) product states when ``layers == 1``; otherwise
    (count, D**n) full statevectors with mode 0 as the slowest index.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    N, F = X.shape
    if F != spec.n_modes:
        raise ConfigError(f"expected {spec.n_modes} features, got {F}")
    D, n = spec.truncation, spec.n_modes
    if spec.product_form:
        return displaced_vacua(spec.beta * X, D)
    spec.check_budget()
    size = D**n
    out = np.empty((N, size), dtype=complex)
    chunk = max(1, _CHUNK_AMPLITUDES // size)
    for s in range(0, N, chunk):
        out[s:s + chunk] = _full_states(X[s:s + chunk], spec)
    return out


def _full_states(X, spec: CvEmbeddingSpec) -> np.ndarray:
    N = X.shape[0]
    D, n = spec.truncation, spec.n_modes
    psi = np.zeros((N, D**n), dtype=complex)
    psi[:, 0] = 1.0
    for op in range(spec.layers):
        if op % 2 == 0:
            for i in range(n):
                U = _batch_unitaries("disp", spec.beta * X[:, i], D)
                psi = _apply(psi, U, D**i, D, D ** (n - i - 1))
        else:
            for i in range(n - 1):
                U = _batch_unitaries("sq", spec.gamma * X[:, i], D)
                psi = _apply(psi, U, D**i, D * D, D ** (n - i - 2))
    return psi


def _apply(psi, U, left, width, right):
    N = psi.shape[0]
    view = psi.reshape(N, left, width, right)
    return (U[:, None, :, :] @ view).reshape(N, -1)


def build_cv_state(x, spec: CvEmbeddingSpec) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    return build_cv_states(x[None, :], spec)[0]


def product_to_full(state: np.ndarray) -> np.ndarray:
    """Expand an (n, D) product state into its D**n tensor."""
    out = state[0]
    for v in state[1:]:
        out = np.kron(out, v)
    return out


def cv_kernel(x, y, spec: CvEmbeddingSpec) -> float:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.shape != y.shape:
        raise ConfigError(f"length mismatch ({x.size} vs {y.size})")
    S = build_cv_states(np.stack([x, y]), spec)
    return float(spec.overlap(S[:1], S[1:])[0, 0])


def cv_gram(X, Y=None, spec: CvEmbeddingSpec = None, threads: int = 1) -> KernelMatrix:
    if spec is None:
        raise ConfigError("an embedding spec is required")
    X = getattr(X, "X", X)
    Y = getattr(Y, "X", Y)
    return gram(spec, X, Y, threads=threads)


def rbf_limit(X, Y, beta: float) -> np.ndarray:
    """Infinite-truncation limit of the one-layer kernel: ``exp(-beta^2 |x - y|^2)``."""
    X = np.atleast_2d(X)
    Y = np.atleast_2d(Y)
    d2 = ((X[:, None, :] - Y[None, :, :]) ** 2).sum(-1)
    return np.exp(-(beta**2) * d2)


def reduced_density(psi: np.ndarray, n_modes: int, D: int, mode: int) -> np.ndarray:
    """Single-mode density matrix of a full (D**n) statevector."""
    t = np.moveaxis(psi.reshape((D,) * n_modes), mode, 0).reshape(D, -1)
    return t @ t.conj().T


# -- Wigner function -------------------------------------------------------

def hermite_functions(D: int, x: np.ndarray) -> np.ndarray:
    """Position-space number states <x|n> for n < D; shape ``x.shape + (D,)``.

    Uses the quadrature ``x = (a^dag + a)/sqrt(2)``.
    """
    x = np.asarray(x, dtype=np.float64)
    out = np.empty(x.shape + (D,))
    out[..., 0] = np.pi**-0.25 * np.exp(-0.5 * x**2)
    if D > 1:
        out[..., 1] = np.sqrt(2.0) * x * out[..., 0]
    for k in range(1, D - 1):
        out[..., k + 1] = np.sqrt(2.0 / (k + 1)) * x * out[..., k] - np.sqrt(k / (k + 1)) * out[..., k - 1]
    return out


def wigner(state, xs, ps, n_y: int = 1601) -> np.ndarray:
    """Wigner function on the grid ``xs`` x ``ps``.

    ``W(x, p) = (2/pi) \\int dy exp(4 i y p) <x - y|rho|x + y>`` evaluated by
    trapezoidal quadrature in ``y``.  ``state`` is a length-D amplitude vector
    or a D x D density matrix of a single mode.
    """
    state = np.asarray(state, dtype=complex)
    if state.ndim == 1:
        rho = np.outer(state, state.conj())
    elif state.ndim == 2 and state.shape[0] == state.shape[1]:
        rho = state
    else:
        raise ConfigError("wigner needs a single-mode state vector or density matrix")
    D = rho.shape[0]
    xs = np.asarray(xs, dtype=np.float64)
    ps = np.asarray(ps, dtype=np.float64)
    # number states up to D-1 are negligible beyond this radius
    reach = np.sqrt(2 * D + 1) + 8.0
    y = np.linspace(-reach, reach, n_y)
    wts = np.full(n_y, y[1] - y[0])
    wts[[0, -1]] *= 0.5
    minus = hermite_functions(D, xs[:, None] - y[None, :])
    plus = hermite_functions(D, xs[:, None] + y[None, :])
    # <x-y|rho|x+y> with real number-state wavefunctions
    f = np.einsum("xym,mn,xyn->xy", minus, rho, plus)
    phase = np.exp(4j * np.outer(y, ps)) * wts[:, None]
    return (2.0 / np.pi) * (f @ phase).real
