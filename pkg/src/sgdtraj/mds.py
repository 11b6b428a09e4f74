"""Classical (Torgerson) MDS and SMACOF stress majorization."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .equivalence import DistanceMatrix
from .numeric import sym_eig


@dataclass
class Embedding:
    ids: tuple[str, ...]
    coords: np.ndarray
    method: str
    stress: float
    history: list[float] = field(default_factory=list)
    # sum of |negative eigenvalues| dropped by classical MDS (non-Euclidean mass)
    clamped_mass: float = 0.0

    @property
    def dims(self) -> int:
        return self.coords.shape[1]


def _dist_values(D) -> np.ndarray:
    return D.values if isinstance(D, DistanceMatrix) else np.asarray(D, dtype=np.float64)


def _ids(D, m: int) -> tuple[str, ...]:
    return D.ids if isinstance(D, DistanceMatrix) else tuple(str(i) for i in range(m))


def pairwise_distances(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    diff = X[:, None, :] - X[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def stress(D, X) -> float:
    """Raw stress: sum over pairs i < j of (D_ij - |x_i - x_j|)^2."""
    d = _dist_values(D)
    X = X.coords if isinstance(X, Embedding) else np.asarray(X, dtype=np.float64)
    if d.shape != (X.shape[0], X.shape[0]):
        raise ValueError(f"distance matrix {d.shape} does not match {X.shape[0]} points")
    iu = np.triu_indices(d.shape[0], k=1)
    return float(np.sum((d[iu] - pairwise_distances(X)[iu]) ** 2))


def double_center(d) -> np.ndarray:
    """B = -1/2 J (D*D) J with J the centering matrix."""
    sq = np.asarray(d, dtype=np.float64) ** 2
    b = -0.5 * (sq - sq.mean(axis=0)[None, :] - sq.mean(axis=1)[:, None] + sq.mean())
    return 0.5 * (b + b.T)


def classical_mds(D, dims: int = 2, method: str = "auto") -> Embedding:
    """Torgerson scaling: top eigenvectors of the double-centred squared distances.

    Negative eigenvalues are clamped to zero; their total magnitude is kept in
    `clamped_mass` as a measure of how non-Euclidean D is.
    """
    d = _dist_values(D)
    m = d.shape[0]
    if d.ndim != 2 or d.shape[1] != m:
        raise ValueError(f"distance matrix must be square, got {d.shape}")
    if not 1 <= dims <= max(m - 1, 0):
        raise ValueError(f"dims must be between 1 and M-1 = {m - 1}")
    values, vectors = sym_eig(double_center(d), k=None, method=method)
    top = np.clip(values[:dims], 0.0, None)
    coords = vectors[:, :dims] * np.sqrt(top)[None, :]
    coords -= coords.mean(axis=0)
    return Embedding(
        ids=_ids(D, m),
        coords=coords,
        method="classical",
        stress=stress(d, coords),
        clamped_mass=float(-values[values < 0].sum()),
    )


def guttman_transform(d: np.ndarray, X: np.ndarray) -> np.ndarray:
    """One majorization step for unit weights: X <- B(X) X / M."""
    m = X.shape[0]
    cur = pairwise_distances(X)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(cur > 0, d / cur, 0.0)
    Bm = -ratio
    np.fill_diagonal(Bm, 0.0)
    np.fill_diagonal(Bm, -Bm.sum(axis=1))
    return Bm @ X / m


def smacof(D, init, max_iters: int = 300, tol: float = 1e-9) -> Embedding:
    """Refine an embedding by stress majorization.

    Stops after `max_iters` or once the relative stress decrease falls below
    `tol`. A step that would raise stress (only possible through rounding)
    is discarded and ends the iteration, so `history` never increases.
    """
    d = _dist_values(D)
    X = init.coords if isinstance(init, Embedding) else np.asarray(init, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != d.shape[0]:
        raise ValueError(f"initial configuration {X.shape} does not match {d.shape[0]} points")
    X = X.copy()
    current = stress(d, X)
    history = [current]
    for _ in range(max_iters):
        if current == 0.0:
            break
        candidate = guttman_transform(d, X)
        new = stress(d, candidate)
        if new > current:
            break
        X = candidate
        history.append(new)
        done = (current - new) / current < tol
        current = new
        if done:
            break
    ids = init.ids if isinstance(init, Embedding) else _ids(D, d.shape[0])
    clamped = init.clamped_mass if isinstance(init, Embedding) else 0.0
    return Embedding(ids, X, "smacof", current, history, clamped)


def embed(D, dims: int = 2, method: str = "smacof", max_iters: int = 300, tol: float = 1e-9):
    """Classical MDS, optionally refined by SMACOF (the default pipeline)."""
    start = classical_mds(D, dims)
    if method == "classical":
        return start
    if method != "smacof":
        raise ValueError(f"unknown MDS method {method!r}")
    return smacof(D, start, max_iters, tol)
