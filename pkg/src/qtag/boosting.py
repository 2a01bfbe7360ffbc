"""Discrete AdaBoost over kernel SVM stages and the bagged ensemble of boosted members."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .backends import backend_from_dict, member_seeds
from .data import Dataset, subsample_indices
from .errors import ConfigError, NumericError
from .gram import KernelMatrix, gram
from .svm import SvmModel, decision_values_full, sign, train_svm

EPS_CLAMP = 1e-10


def stage_weight(err: float) -> float:
    e = min(max(err, EPS_CLAMP), 1.0 - EPS_CLAMP)
    return 0.5 * np.log((1.0 - e) / e)


@dataclass(eq=False)
class BoostedModel:
    stages: list  # (SvmModel, stage weight) pairs
    generations: int
    errors: list = field(default_factory=list)
    training_subset: np.ndarray | None = None

    @property
    def stage_weights(self) -> np.ndarray:
        return np.array([a for _, a in self.stages])

    def loss_bound(self) -> np.ndarray:
        """Running product of 2 sqrt(eps (1 - eps)) over accepted stages."""
        e = np.clip(np.asarray(self.errors[: len(self.stages)]), EPS_CLAMP, 1 - EPS_CLAMP)
        return np.cumprod(2.0 * np.sqrt(e * (1.0 - e)))

    def support_union(self) -> np.ndarray:
        return np.unique(np.concatenate([m.support_indices for m, _ in self.stages]))

    def to_dict(self) -> dict:
        return {
            "generations": self.generations,
            "errors": [float(e) for e in self.errors],
            "training_subset": None if self.training_subset is None else [int(i) for i in self.training_subset],
            "stages": [{"alpha": float(a), "svm": m.to_dict()} for m, a in self.stages],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BoostedModel":
        subset = d.get("training_subset")
        return cls(
            stages=[(SvmModel.from_dict(s["svm"]), float(s["alpha"])) for s in d["stages"]],
            generations=int(d["generations"]),
            errors=list(d.get("errors", [])),
            training_subset=None if subset is None else np.asarray(subset, dtype=np.int64),
        )


def train_adaboost(K_train, labels, G: int, C_reg: float = 1.0, tol: float = 1e-3) -> BoostedModel:
    """Boost weighted SVMs for up to ``G`` generations on one training Gram.

    A stage whose weighted error reaches 0.5 is discarded and ends boosting.
    A stage with zero error is kept and also ends boosting, since reweighting
    would leave the weights unchanged and every later stage would repeat it.
    """
    if G < 1:
        raise ConfigError("must be >= 1", path="ensemble.G")
    E = K_train.entries if isinstance(K_train, KernelMatrix) else np.asarray(K_train, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    n = y.shape[0]
    w = np.full(n, 1.0 / n)
    model = BoostedModel(stages=[], generations=G)
    for _ in range(G):
        svm = train_svm(E, y, w, C_reg, tol=tol)
        h = sign(decision_values_full(svm, E))
        wrong = h != y
        err = float(w[wrong].sum())
        model.errors.append(err)
        if err >= 0.5:
            break
        alpha = stage_weight(err)
        model.stages.append((svm, alpha))
        if not wrong.any():
            break
        w = w * np.exp(-alpha * y * h)
        w /= w.sum()
    if not model.stages:
        raise NumericError("no usable stage: first weighted error was >= 0.5")
    return model


def stage_votes(model: BoostedModel, K_cross_full) -> np.ndarray:
    """(stages, events) matrix of +-1 stage predictions; ``K_cross_full`` spans the training subset."""
    E = K_cross_full.entries if isinstance(K_cross_full, KernelMatrix) else np.asarray(K_cross_full)
    if not model.stages:
        return np.zeros((0, E.shape[0]), dtype=np.int64)
    need = max(int(m.support_indices.max(initial=-1)) for m, _ in model.stages) + 1
    if E.ndim != 2 or E.shape[1] < need:
        raise ConfigError(f"cross kernel has {E.shape[1] if E.ndim == 2 else '?'} columns, need {need}")
    return np.stack([sign(decision_values_full(m, E)) for m, _ in model.stages])


def qr_from_votes(alphas, votes, generations: int | None = None) -> np.ndarray:
    alphas = np.asarray(alphas)[:generations]
    votes = np.asarray(votes)[:generations]
    return (alphas @ votes) / alphas.sum()


def boosted_qr(model: BoostedModel, K_cross_full, generations: int | None = None) -> np.ndarray:
    """Normalised weighted vote of the stages, in [-1, 1].

    ``generations`` limits evaluation to the first stages (nested prefix models).
    """
    return qr_from_votes(model.stage_weights, stage_votes(model, K_cross_full), generations)


@dataclass(eq=False)
class EnsembleModel:
    members: list
    member_seeds: list  # (subset seed, angle seed) per member
    backend: object
    master_seed: int
    n_train_per_member: int
    C_reg: float
    generations: int
    train_features: np.ndarray | None = field(default=None, repr=False)

    @property
    def N(self) -> int:
        return len(self.members)

    def member_embedding(self, k: int):
        return self.backend.embedding(self.train_features.shape[1], self.member_seeds[k][1])

    def manifest(self) -> dict:
        return {
            "N": self.N,
            "G": self.generations,
            "master_seed": int(self.master_seed),
            "n_train_per_member": int(self.n_train_per_member),
            "C_reg": float(self.C_reg),
            "backend": self.backend.to_dict(),
            "member_seeds": [[int(a), int(b)] for a, b in self.member_seeds],
        }


def _member_seed_pair(master_seed, k, backend):
    subset_seed, angle_seed = member_seeds(master_seed, k)
    if not backend.per_member:
        # every member shares member 0's angles
        angle_seed = member_seeds(master_seed, 0)[1]
    return subset_seed, angle_seed


def train_ensemble(d: Dataset, N: int, n_train_per_member: int, G: int, backend, C_reg: float = 1.0,
                   master_seed: int = 0, threads: int = 1) -> EnsembleModel:
    """Train ``N`` boosted members, each on its own seeded subsample of ``d``.

    Results are collected in member order, so the model does not depend on
    ``threads`` or on completion order.
    """
    if len(d) == 0:
        raise ConfigError("training dataset is empty")
    if N < 1:
        raise ConfigError("must be >= 1", path="ensemble.N")
    if not 1 <= n_train_per_member <= len(d):
        raise ConfigError(f"must lie in [1, {len(d)}]", path="ensemble.n_train_per_member")
    seeds = [_member_seed_pair(master_seed, k, backend) for k in range(N)]

    def fit(k):
        subset_seed, angle_seed = seeds[k]
        idx = subsample_indices(len(d), n_train_per_member, subset_seed)
        emb = backend.embedding(d.feature_count, angle_seed)
        K = gram(emb, d.X[idx])
        model = train_adaboost(K, d.y[idx], G, C_reg)
        model.training_subset = idx
        return model

    if threads > 1 and N > 1:
        with ThreadPoolExecutor(threads) as pool:
            members = list(pool.map(fit, range(N)))
    else:
        members = [fit(k) for k in range(N)]
    return EnsembleModel(members, seeds, backend, master_seed, n_train_per_member, C_reg, G, d.X)


def ensemble_votes(e: EnsembleModel, X_test, threads: int = 1) -> list:
    """Per member: (stage weights, stage vote matrix) on ``X_test``."""
    if e.train_features is None:
        raise ConfigError("ensemble has no training features attached")
    X_test = np.atleast_2d(np.asarray(X_test, dtype=np.float64))
    if X_test.shape[1] != e.train_features.shape[1]:
        raise ConfigError(f"test events have {X_test.shape[1]} features, model expects {e.train_features.shape[1]}")
    shared = {}
    if not e.backend.per_member and len(X_test):
        emb = e.member_embedding(0)
        shared["emb"] = emb
        shared["test"] = emb.embed(X_test)

    def run(k):
        m = e.members[k]
        if len(X_test) == 0:
            return m.stage_weights, np.zeros((len(m.stages), 0), dtype=np.int64)
        emb = shared["emb"] if shared else e.member_embedding(k)
        test_states = shared["test"] if shared else emb.embed(X_test)
        union = m.support_union()
        train_states = emb.embed(e.train_features[m.training_subset[union]])
        block = emb.overlap(test_states, train_states)
        full = np.zeros((len(X_test), len(m.training_subset)))
        full[:, union] = block
        return m.stage_weights, stage_votes(m, full)

    if threads > 1 and e.N > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(run, range(e.N)))
    return [run(k) for k in range(e.N)]


def qr_from_ensemble_votes(votes, generations: int | None = None) -> np.ndarray:
    return np.mean([qr_from_votes(a, v, generations) for a, v in votes], axis=0)


def ensemble_qr(e: EnsembleModel, X_test, threads: int = 1, generations: int | None = None) -> np.ndarray:
    """Mean of the members' boosted qr values."""
    return qr_from_ensemble_votes(ensemble_votes(e, X_test, threads), generations)


def save_ensemble(e: EnsembleModel, directory, extra: dict | None = None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for k, m in enumerate(e.members):
        body = {"member": k, "subset_seed": e.member_seeds[k][0], "angle_seed": e.member_seeds[k][1], **m.to_dict()}
        (directory / f"member_{k:04d}.json").write_text(json.dumps(body, sort_keys=True, indent=1) + "\n")
    manifest = e.manifest()
    if extra:
        manifest.update(extra)
    (directory / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")
    return directory


def load_ensemble(directory, train_features=None) -> EnsembleModel:
    directory = Path(directory)
    try:
        manifest = json.loads((directory / "manifest.json").read_text())
    except FileNotFoundError:
        raise ConfigError(f"{directory}: no manifest.json") from None
    members = [
        BoostedModel.from_dict(json.loads((directory / f"member_{k:04d}.json").read_text()))
        for k in range(manifest["N"])
    ]
    return EnsembleModel(
        members,
        [tuple(s) for s in manifest["member_seeds"]],
        backend_from_dict(manifest["backend"]),
        manifest["master_seed"],
        manifest["n_train_per_member"],
        manifest["C_reg"],
        manifest["G"],
        train_features,
    )

