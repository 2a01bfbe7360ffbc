"""Weighted soft-margin SVM trained on a precomputed kernel with SMO.

The dual solved is::

    max  sum(alpha) - 1/2 sum_ij alpha_i alpha_j y_i y_j K_ij
    s.t. 0 <= alpha_i <= C_i,   sum_i alpha_i y_i = 0,   C_i = C_reg * n * w_i

Each iteration picks the maximal KKT-violating pair and solves the
two-variable subproblem exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ConvergenceError
from .gram import KernelMatrix

_TAU = 1e-12


@dataclass(frozen=True, eq=False)
class SvmModel:
    dual_coeffs: np.ndarray
    support_indices: np.ndarray
    bias: float
    c_reg: float
    alphas: np.ndarray = field(default=None, repr=False)
    objective_trace: list | None = field(default=None, repr=False)
    iterations: int = 0

    @property
    def n_support(self) -> int:
        return len(self.support_indices)

    def to_dict(self) -> dict:
        return {
            "support_indices": [int(i) for i in self.support_indices],
            "dual_coeffs": [float(c) for c in self.dual_coeffs],
            "bias": float(self.bias),
            "c_reg": float(self.c_reg),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SvmModel":
        return cls(
            np.asarray(d["dual_coeffs"], dtype=np.float64),
            np.asarray(d["support_indices"], dtype=np.int64),
            float(d["bias"]),
            float(d["c_reg"]),
        )


def _entries(K):
    return K.entries if isinstance(K, KernelMatrix) else np.asarray(K, dtype=np.float64)


def train_svm(K, labels, sample_weights=None, C_reg: float = 1.0, tol: float = 1e-3,
              max_iter: int | None = None, record_trace: bool = False) -> SvmModel:
    """Fit the weighted dual on a symmetric training Gram ``K``.

    ``sample_weights`` defaults to uniform.  Raises ``ConvergenceError`` if the
    maximal KKT violation is still above ``tol`` after ``max_iter`` pair updates.
    """
    E = _entries(K)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    n = y.shape[0]
    if E.shape != (n, n):
        raise ConfigError(f"kernel shape {E.shape} does not match {n} labels")
    if n == 0:
        raise ConfigError("no training events")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ConfigError("labels must be -1 or +1")
    if np.all(y == y[0]):
        raise ConfigError("training labels contain a single class")
    if C_reg <= 0:
        raise ConfigError("C_reg must be positive", path="ensemble.C_reg")
    w = np.full(n, 1.0 / n) if sample_weights is None else np.asarray(sample_weights, dtype=np.float64)
    if w.shape != (n,) or np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ConfigError("sample weights must be finite and non-negative")
    C = C_reg * n * w
    if max_iter is None:
        max_iter = 200 * n + 20000

    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of the minimisation form: Q alpha - 1
    pos = y > 0
    diag = np.diag(E).copy()
    trace = [0.0] if record_trace else None

    it = 0
    gap = np.inf
    while True:
        score = -y * grad
        up = np.where(pos, alpha < C, alpha > 0)
        low = np.where(pos, alpha > 0, alpha < C)
        s_up = np.where(up, score, -np.inf)
        s_low = np.where(low, score, np.inf)
        i = int(np.argmax(s_up))
        j = int(np.argmin(s_low))
        gap = s_up[i] - s_low[j]
        if gap < tol:
            break
        if it >= max_iter:
            raise ConvergenceError(f"SMO did not converge in {max_iter} iterations", gap)
        it += 1
        curv = diag[i] + diag[j] - 2.0 * E[i, j]
        t = gap / max(curv, _TAU)
        # step t moves alpha_i by y_i t and alpha_j by -y_j t
        lim_i = C[i] - alpha[i] if pos[i] else alpha[i]
        lim_j = alpha[j] if pos[j] else C[j] - alpha[j]
        t = min(t, lim_i, lim_j)
        ai = alpha[i] + y[i] * t
        aj = alpha[j] - y[j] * t
        if t == lim_i:
            ai = C[i] if pos[i] else 0.0
        if t == lim_j:
            aj = 0.0 if pos[j] else C[j]
        t_i = (ai - alpha[i]) * y[i]
        t_j = -(aj - alpha[j]) * y[j]
        alpha[i], alpha[j] = ai, aj
        # rows equal columns for a symmetric Gram and are contiguous
        grad += y * (t_i * E[i] - t_j * E[j])
        if record_trace:
            trace.append(float(-(0.5 * alpha @ grad - 0.5 * alpha.sum())))

    bias = -_rho(alpha, grad, y, C) + 0.0
    sv = np.flatnonzero(alpha > 0)
    return SvmModel(
        dual_coeffs=alpha[sv] * y[sv],
        support_indices=sv,
        bias=float(bias),
        c_reg=float(C_reg),
        alphas=alpha,
        objective_trace=trace,
        iterations=it,
    )


def _rho(alpha, grad, y, C):
    yg = y * grad
    free = (alpha > 0) & (alpha < C)
    if np.any(free):
        return float(yg[free].mean())
    boxed = C > 0
    at_upper = alpha >= C
    # bounds on rho implied by the KKT conditions of bounded variables
    ub_mask = boxed & ((at_upper & (y < 0)) | (~at_upper & (y > 0)))
    lb_mask = boxed & ((at_upper & (y > 0)) | (~at_upper & (y < 0)))
    ub = yg[ub_mask].min(initial=np.inf)
    lb = yg[lb_mask].max(initial=-np.inf)
    if not np.isfinite(ub):
        return float(lb)
    if not np.isfinite(lb):
        return float(ub)
    return float(0.5 * (ub + lb))


def decision_values(model: SvmModel, K_cross) -> np.ndarray:
    """``f(x) = sum_s coeff_s K(x, x_s) + b`` with ``K_cross`` restricted to support columns."""
    E = _entries(K_cross)
    if E.ndim != 2:
        E = E.reshape(-1, model.n_support)
    if E.shape[1] != model.n_support:
        raise ConfigError(f"kernel has {E.shape[1]} columns, model has {model.n_support} support vectors")
    return E @ model.dual_coeffs + model.bias


def decision_values_full(model: SvmModel, K_cross_full) -> np.ndarray:
    """Same as ``decision_values`` but ``K_cross_full`` spans every training column."""
    E = _entries(K_cross_full)
    return E[:, model.support_indices] @ model.dual_coeffs + model.bias


def sign(f) -> np.ndarray:
    return np.where(np.asarray(f) >= 0, 1, -1)


def predict(model: SvmModel, K_cross) -> np.ndarray:
    return sign(decision_values(model, K_cross))
