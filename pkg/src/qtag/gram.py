"""Kernel matrices: assembly from embedded states, invariant checks, binary cache."""

from __future__ import annotations

import hashlib
import json
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol

import numpy as np

from .errors import ConfigError, NumericError

MAGIC = b"QGRM"
VERSION = 1
_HEADER = struct.Struct("<4sIQQB")


class Embedding(Protocol):
    """What the Gram builder needs from a feature map."""

    def embed(self, X: np.ndarray) -> np.ndarray: ...

    def overlap(self, A: np.ndarray, B: np.ndarray) -> np.ndarray: ...

    def key(self) -> dict: ...


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    entries: np.ndarray
    symmetric: bool

    @property
    def n_rows(self) -> int:
        return self.entries.shape[0]

    @property
    def n_cols(self) -> int:
        return self.entries.shape[1]

    @property
    def shape(self):
        return self.entries.shape

    def columns(self, idx) -> "KernelMatrix":
        return KernelMatrix(self.entries[:, np.asarray(idx, dtype=np.int64)], False)

    def submatrix(self, rows, cols=None) -> "KernelMatrix":
        rows = np.asarray(rows, dtype=np.int64)
        if cols is None:
            return KernelMatrix(self.entries[np.ix_(rows, rows)], self.symmetric)
        return KernelMatrix(self.entries[np.ix_(rows, np.asarray(cols, dtype=np.int64))], False)


def check_invariants(K: KernelMatrix, diag_tol=1e-9, eig_tol=1e-8) -> None:
    """Raise NumericError if a symmetric Gram violates symmetry, unit diagonal, range or PSD."""
    E = K.entries
    if E.min(initial=0.0) < -1e-12 or E.max(initial=0.0) > 1 + diag_tol:
        raise NumericError("kernel entries outside [0, 1]")
    if not K.symmetric:
        return
    if not np.array_equal(E, E.T):
        raise NumericError("Gram matrix not symmetric")
    if np.max(np.abs(np.diag(E) - 1.0), initial=0.0) > diag_tol:
        raise NumericError("Gram diagonal deviates from 1")
    if E.shape[0]:
        lo = np.linalg.eigvalsh(E)[0]
        if lo < -eig_tol * E.shape[0]:
            raise NumericError(f"Gram not PSD (min eigenvalue {lo:.3e})")


def _blocks(n, size):
    return [(i, min(i + size, n)) for i in range(0, n, size)]


def gram_from_states(embedding: Embedding, SA, SB=None, threads: int = 1, block: int = 512) -> KernelMatrix:
    """Assemble a Gram (``SB is None``) or cross-kernel from pre-embedded states.

    States are built once before the parallel phase and only read afterwards.
    In the symmetric case only upper-triangle blocks are evaluated and then mirrored.
    """
    symmetric = SB is None
    other = SA if symmetric else SB
    n, m = len(SA), len(other)
    out = np.empty((n, m))
    tasks = []
    for r0, r1 in _blocks(n, block):
        for c0, c1 in _blocks(m, block):
            if symmetric and c1 <= r0:
                continue
            tasks.append((r0, r1, c0, c1))

    def run(t):
        r0, r1, c0, c1 = t
        out[r0:r1, c0:c1] = embedding.overlap(SA[r0:r1], other[c0:c1])

    if threads > 1 and len(tasks) > 1:
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(run, tasks))
    else:
        for t in tasks:
            run(t)
    if symmetric:
        upper = np.triu(out)
        out = upper + np.triu(out, 1).T
    np.clip(out, 0.0, None, out=out)
    return KernelMatrix(out, symmetric)


def gram(embedding: Embedding, X, Y=None, threads: int = 1) -> KernelMatrix:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ConfigError("empty input to Gram computation")
    SA = embedding.embed(X)
    if Y is None:
        return gram_from_states(embedding, SA, threads=threads)
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2 or Y.shape[0] == 0:
        raise ConfigError("empty input to Gram computation")
    if Y.shape[1] != X.shape[1]:
        raise ConfigError(f"feature counts differ ({X.shape[1]} vs {Y.shape[1]})")
    return gram_from_states(embedding, SA, embedding.embed(Y), threads=threads)


# -- binary cache -----------------------------------------------------------

def write_kernel(K: KernelMatrix, path) -> None:
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with tmp.open("wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, K.n_rows, K.n_cols, int(K.symmetric)))
        fh.write(np.ascontiguousarray(K.entries, dtype="<f8").tobytes())
    os.replace(tmp, path)


def read_kernel(path) -> KernelMatrix:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ConfigError(f"{path}: truncated kernel file")
    magic, version, n, m, sym = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ConfigError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ConfigError(f"{path}: unsupported version {version}")
    body = raw[_HEADER.size:]
    if len(body) != 8 * n * m:
        raise ConfigError(f"{path}: expected {n}x{m} entries")
    E = np.frombuffer(body, dtype="<f8").reshape(n, m).astype(np.float64)
    return KernelMatrix(E, bool(sym))


def cache_key(embedding: Embedding, x_digest: str, y_digest: str | None = None) -> str:
    blob = json.dumps({"spec": embedding.key(), "x": x_digest, "y": y_digest}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def cache_dir() -> Path | None:
    d = os.environ.get("QTAG_CACHE_DIR")
    return Path(d) if d else None


def cached_gram(embedding: Embedding, X, x_digest: str, Y=None, y_digest=None, threads=1) -> KernelMatrix:
    """``gram`` backed by ``$QTAG_CACHE_DIR`` when set."""
    root = cache_dir()
    if root is None:
        return gram(embedding, X, Y, threads=threads)
    root.mkdir(parents=True, exist_ok=True)
    path = root / f"{cache_key(embedding, x_digest, y_digest)}.qgrm"
    if path.exists():
        return read_kernel(path)
    K = gram(embedding, X, Y, threads=threads)
    write_kernel(K, path)
    return K
