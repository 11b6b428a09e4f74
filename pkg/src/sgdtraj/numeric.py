"""Numeric substrate: matrix validation, a Jacobi eigensolver and seedable random streams."""

from __future__ import annotations

from typing import Sequence

import numpy as np

MASK64 = (1 << 64) - 1

JACOBI_MAX_SWEEPS = 100
JACOBI_TOL = 1e-12
# Above this size "auto" hands the decomposition to LAPACK.
JACOBI_AUTO_LIMIT = 200


class EigenConvergenceError(RuntimeError):
    pass


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Return `m` as a finite 2-D float64 array, raising ValueError otherwise."""
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries")
    return arr


def check_symmetric(m: np.ndarray, rtol: float = 1e-12) -> None:
    if m.shape[0] != m.shape[1]:
        raise ValueError(f"matrix must be square, got shape {m.shape}")
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    asym = float(np.max(np.abs(m - m.T))) if m.size else 0.0
    if asym > rtol * scale:
        raise ValueError(f"matrix is not symmetric (max |m - m.T| = {asym:.3g})")


def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Pairings of 0..n-1 into rounds of disjoint pairs covering every pair once."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        p, q = [], []
        for i in range(m // 2):
            i1, i2 = players[i], players[m - 1 - i]
            if i1 >= n or i2 >= n:
                continue
            p.append(min(i1, i2))
            q.append(max(i1, i2))
        rounds.append((np.array(p, dtype=np.intp), np.array(q, dtype=np.intp)))
        players = [players[0], players[-1]] + players[1:-1]
    return rounds


def jacobi_eigh(m, max_sweeps: int = JACOBI_MAX_SWEEPS, tol: float = JACOBI_TOL):
    """Full eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Rotations are applied one round-robin round at a time: the pairs inside a
    round are disjoint, so they commute and can be applied together.
    Returns unsorted (values, vectors).
    """
    a = as_matrix(m).copy()
    check_symmetric(a)
    n = a.shape[0]
    v = np.eye(n)
    norm = float(np.linalg.norm(a))
    if n < 2 or norm == 0.0:
        return np.diag(a).copy(), v

    rounds = _round_robin(n)
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tol * norm:
            return np.diag(a).copy(), v
        for p, q in rounds:
            apq = a[p, q]
            active = apq != 0.0
            if not active.any():
                continue
            p, q, apq = p[active], q[active], apq[active]
            theta = (a[q, q] - a[p, p]) / (2.0 * apq)
            t = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.hypot(theta, 1.0))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c

            rp, rq = a[p, :], a[q, :]
            a[p, :] = c[:, None] * rp - s[:, None] * rq
            a[q, :] = s[:, None] * rp + c[:, None] * rq
            cp, cq = a[:, p], a[:, q]
            a[:, p] = cp * c - cq * s
            a[:, q] = cp * s + cq * c
            a[p, q] = 0.0
            a[q, p] = 0.0
            vp, vq = v[:, p], v[:, q]
            v[:, p] = vp * c - vq * s
            v[:, q] = vp * s + vq * c

    off = np.linalg.norm(a - np.diag(np.diag(a)))
    if off <= tol * norm:
        return np.diag(a).copy(), v
    raise EigenConvergenceError(
        f"Jacobi did not converge in {max_sweeps} sweeps (off-diagonal norm {off:.3g})"
    )


def sym_eig(m, k: int | None = None, method: str = "auto"):
    """Top-`k` eigenpairs of a symmetric matrix, eigenvalues descending.

    `method` is "jacobi", "lapack" or "auto" (Jacobi up to JACOBI_AUTO_LIMIT rows).
    With k=None the full spectrum is returned.
    """
    arr = as_matrix(m)
    check_symmetric(arr)
    n = arr.shape[0]
    if k is None:
        k = n
    if not 0 <= k <= n:
        raise ValueError(f"k={k} out of range for a {n}x{n} matrix")
    if method == "auto":
        method = "jacobi" if n <= JACOBI_AUTO_LIMIT else "lapack"
    if method == "jacobi":
        values, vectors = jacobi_eigh(arr)
    elif method == "lapack":
        values, vectors = np.linalg.eigh(0.5 * (arr + arr.T))
    else:
        raise ValueError(f"unknown eigensolver method {method!r}")
    order = np.argsort(-values, kind="stable")[:k]
    return values[order], vectors[:, order]


class RngStream:
    """Seeded Philox stream; sub-streams come from `derive`.

    Two streams built from the same (seed, path) yield the same sequence.
    Not thread-safe: give each worker its own derived stream.
    """

    def __init__(self, seed: int, path: Sequence[int] = ()):
        self.seed = int(seed) & MASK64
        self.path = tuple(int(i) for i in path)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        self.generator = np.random.Generator(np.random.Philox(ss))

    def derive(self, index: int) -> "RngStream":
        return RngStream(self.seed, self.path + (int(index),))

    def random(self, size=None):
        return self.generator.random(size)

    def uniform(self, low, high, size=None):
        return self.generator.uniform(low, high, size)

    def normal(self, size=None):
        return self.generator.standard_normal(size)

    def integers(self, low, high=None, size=None):
        return self.generator.integers(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def raw(self, size: int) -> np.ndarray:
        """Raw 64-bit outputs of the underlying bit generator."""
        return self.generator.bit_generator.random_raw(size)

    def __repr__(self):
        return f"RngStream(seed={self.seed}, path={self.path})"


def derive(seed: int, index: int) -> RngStream:
    return RngStream(seed, (index,))


def cumulative_weights(weights) -> np.ndarray:
    """Validate a probability vector and return its cumulative sums."""
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a non-empty 1-D vector")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError("weights must be finite and non-negative")
    total = float(w.sum())
    if abs(total - 1.0) > 1e-12:
        raise ValueError(f"weights must sum to 1 (sum = {total!r})")
    return np.cumsum(w)


def indices_from_uniforms(cdf: np.ndarray, u) -> np.ndarray:
    """Map uniforms in [0, 1) to categories by binary search on `cdf`."""
    idx = np.searchsorted(cdf, u, side="right")
    # u can exceed cdf[-1] by rounding; fall back to the last category with mass
    last = int(np.flatnonzero(np.diff(np.concatenate(([0.0], cdf))) > 0)[-1])
    return np.minimum(idx, last)


def sample_index(weights, rng: RngStream) -> int:
    cdf = cumulative_weights(weights)
    return int(indices_from_uniforms(cdf, rng.random()))


def sample_indices(weights, rng: RngStream, size: int) -> np.ndarray:
    cdf = cumulative_weights(weights)
    return indices_from_uniforms(cdf, rng.random(size))
