"""Confidence binning of qr predictions and the effective tagging efficiency."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

STATIC_EDGES = (0.0, 0.1, 0.25, 0.5, 0.625, 0.75, 0.875, 1.0)


@dataclass(frozen=True)
class TagBinning:
    boundaries: tuple
    mode: str = "static"

    def __post_init__(self):
        b = tuple(float(e) for e in self.boundaries)
        if len(b) < 2 or b[0] != 0.0 or b[-1] != 1.0:
            raise ConfigError("bin edges must start at 0 and end at 1", path="evaluation.binning")
        if any(hi <= lo for lo, hi in zip(b, b[1:])):
            raise ConfigError("bin edges must be strictly ascending", path="evaluation.binning")
        object.__setattr__(self, "boundaries", b)

    @property
    def n_bins(self) -> int:
        return len(self.boundaries) - 1

    def assign(self, r) -> np.ndarray:
        """0-based bin index per r; intervals are [lo, hi) except the last, which is closed."""
        r = np.asarray(r, dtype=np.float64)
        idx = np.searchsorted(np.asarray(self.boundaries), r, side="right") - 1
        return np.clip(idx, 0, self.n_bins - 1)


def static_bins() -> TagBinning:
    return TagBinning(STATIC_EDGES, "static")


def equal_population_bins(r_values, k: int = 7) -> TagBinning:
    """Edges at the j/k empirical quantiles, each placed midway between neighbouring order statistics."""
    r = np.sort(np.asarray(r_values, dtype=np.float64))
    if k < 1:
        raise ConfigError("need at least one bin")
    if r.size < k:
        raise ConfigError(f"need at least {k} r values, got {r.size}")
    m = r.size
    inner = []
    for j in range(1, k):
        pos = int(round(j * m / k))
        inner.append(0.5 * (r[pos - 1] + r[pos]))
    edges = [0.0] + inner + [1.0]
    if any(hi <= lo for lo, hi in zip(edges, edges[1:])):
        raise ConfigError("degenerate r distribution: equal-population edges collapse")
    return TagBinning(tuple(edges), "equal-population")


@dataclass(frozen=True, eq=False)
class TagReport:
    boundaries: tuple
    epsilon: np.ndarray
    wrong: np.ndarray
    mean_r: np.ndarray
    counts: np.ndarray
    epsilon_eff: float

    def rows(self):
        b = self.boundaries
        for i in range(len(self.epsilon)):
            yield b[i], b[i + 1], self.epsilon[i], self.wrong[i], self.mean_r[i]


def effective_efficiency(epsilon, wrong) -> float:
    """Sum over bins of ``eps_i (1 - 2 w_i)**2``."""
    epsilon = np.asarray(epsilon, dtype=np.float64)
    wrong = np.asarray(wrong, dtype=np.float64)
    return float(np.sum(epsilon * (1.0 - 2.0 * wrong) ** 2))


def tag_report(qr, labels, binning: TagBinning | None = None) -> TagReport:
    qr = np.asarray(qr, dtype=np.float64).reshape(-1)
    labels = np.asarray(labels).reshape(-1)
    if qr.shape != labels.shape:
        raise ConfigError(f"{qr.size} predictions but {labels.size} labels")
    if qr.size == 0:
        raise ConfigError("no predictions to report on")
    if np.any(np.abs(qr) > 1.0 + 1e-12):
        raise ConfigError("qr values must lie in [-1, 1]")
    binning = binning or static_bins()
    q = np.where(qr >= 0, 1, -1)
    r = np.minimum(np.abs(qr), 1.0)
    bins = binning.assign(r)
    nb = binning.n_bins
    counts = np.bincount(bins, minlength=nb)
    n_wrong = np.bincount(bins, weights=(q != labels).astype(np.float64), minlength=nb)
    r_sum = np.bincount(bins, weights=r, minlength=nb)
    filled = counts > 0
    safe = np.where(filled, counts, 1)
    wrong = np.where(filled, n_wrong / safe, 0.0)
    mean_r = np.where(filled, r_sum / safe, 0.0)
    epsilon = counts / qr.size
    return TagReport(binning.boundaries, epsilon, wrong, mean_r, counts, effective_efficiency(epsilon, wrong))


def calibration_check(report: TagReport) -> list[tuple[float, float]]:
    """(<r_i>, 1 - 2 w_i) for each non-empty bin."""
    return [
        (float(m), float(1.0 - 2.0 * w))
        for m, w, c in zip(report.mean_r, report.wrong, report.counts)
        if c > 0
    ]


def format_report(report: TagReport) -> str:
    lines = ["bin_lo\tbin_hi\tepsilon_i\tw_i\tmean_r_i"]
    for lo, hi, eps, w, mr in report.rows():
        lines.append("\t".join(f"{v:.6g}" for v in (lo, hi, eps, w, mr)))
    lines.append(f"epsilon_eff\t{report.epsilon_eff:.6g}")
    return "\n".join(lines) + "\n"
