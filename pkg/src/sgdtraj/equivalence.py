"""Tau/kappa vectors, their distances and trajectory-level summaries."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .dataset import ImageSet
from .mlp import MlpParams, forward, predict_class


def tau(p: MlpParams, test: ImageSet) -> np.ndarray:
    """Network outputs on the test samples, flattened sample-major (N*K,)."""
    if len(test) == 0:
        raise ValueError("tau needs a non-empty test set")
    return forward(p, test.images).ravel()


def kappa(p: MlpParams, test: ImageSet) -> np.ndarray:
    if len(test) == 0:
        raise ValueError("kappa needs a non-empty test set")
    return predict_class(forward(p, test.images)).astype(np.int64)


def kappa_from_tau(t, K: int) -> np.ndarray:
    t = np.asarray(t)
    return predict_class(t.reshape(-1, K)).astype(np.int64)


def _pair(u, v):
    u, v = np.asarray(u), np.asarray(v)
    if u.shape != v.shape or u.ndim != 1:
        raise ValueError(f"vector shapes differ: {u.shape} vs {v.shape}")
    return u, v


def _euclidean_rows(diff: np.ndarray) -> np.ndarray:
    # Scale by the largest entry first so tiny differences cannot underflow to 0.
    scale = np.max(np.abs(diff), axis=-1, initial=0.0)
    safe = np.where(scale > 0, scale, 1.0)
    unit = diff / safe[..., None]
    return scale * np.sqrt(np.einsum("...j,...j->...", unit, unit))


def tau_distance(u, v) -> float:
    u, v = _pair(u, v)
    return float(_euclidean_rows(u.astype(np.float64) - v))


def kappa_distance(u, v) -> float:
    u, v = _pair(u, v)
    return float(np.count_nonzero(u != v))


def vector_kind(vectors: Sequence[np.ndarray]) -> str:
    """'tau' for real-valued snapshots, 'kappa' for integer labels."""
    kinds = {"kappa" if np.issubdtype(np.asarray(v).dtype, np.integer) else "tau" for v in vectors}
    if len(kinds) != 1:
        raise ValueError("cannot mix tau and kappa vectors in one distance matrix")
    return kinds.pop()


@dataclass(frozen=True)
class DistanceMatrix:
    ids: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1] or v.shape[0] != len(self.ids):
            raise ValueError(f"distance matrix shape {v.shape} does not match {len(self.ids)} ids")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("snapshot ids must be unique")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("distances must be finite and non-negative")
        if np.any(np.diag(v) != 0) or not np.array_equal(v, v.T):
            raise ValueError("distance matrix must be symmetric with a zero diagonal")
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "values", v)

    def __len__(self):
        return len(self.ids)


def distance_matrix(vectors: Sequence, ids: Sequence[str] | None = None, kind: str | None = None):
    """Pairwise Euclidean (tau) or Hamming (kappa) distances between snapshots."""
    if len(vectors) == 0:
        raise ValueError("no snapshots")
    found = vector_kind(vectors)
    if kind is not None and kind != found:
        raise ValueError(f"expected {kind} vectors, got {found}")
    X = np.stack([np.asarray(v) for v in vectors]) if len({np.shape(v) for v in vectors}) == 1 else None
    if X is None or X.ndim != 2:
        raise ValueError("snapshot vectors must all have the same length")
    m = X.shape[0]
    ids = tuple(str(i) for i in range(m)) if ids is None else tuple(ids)
    out = np.zeros((m, m))
    if found == "tau":
        X = X.astype(np.float64)
        for i in range(m - 1):
            out[i, i + 1 :] = _euclidean_rows(X[i + 1 :] - X[i])
    else:
        for i in range(m - 1):
            out[i, i + 1 :] = np.count_nonzero(X[i + 1 :] != X[i], axis=1)
    out = out + out.T
    return DistanceMatrix(ids, out)


def mean_pairwise_distance(vectors: Sequence, metric=tau_distance) -> float:
    """Mean distance over all unordered pairs (needs at least two vectors)."""
    if len(vectors) < 2:
        raise ValueError("need at least two vectors")
    return float(np.mean([metric(u, v) for u, v in combinations(vectors, 2)]))


def path_roughness(path: Sequence) -> float:
    """Mean angle (radians) between consecutive displacement vectors of a path.

    Zero-length displacements carry no direction and are skipped.
    """
    X = np.asarray(path, dtype=np.float64)
    steps = np.diff(X, axis=0)
    norms = np.linalg.norm(steps, axis=1)
    steps, norms = steps[norms > 0], norms[norms > 0]
    if len(steps) < 2:
        raise ValueError("need at least two non-zero displacements")
    cos = np.einsum("ij,ij->i", steps[:-1], steps[1:]) / (norms[:-1] * norms[1:])
    return float(np.mean(np.arccos(np.clip(cos, -1.0, 1.0))))
