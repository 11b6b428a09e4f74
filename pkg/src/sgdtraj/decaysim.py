"""Coordinate-decay model of SGD.

Each step picks one coordinate of every replica vector (uniformly or by
Zipf's law) and multiplies it by gamma, driving ||theta||^2 to zero at
per-coordinate rates.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .numeric import RngStream, cumulative_weights, indices_from_uniforms

LAWS = ("uniform", "zipf")


@dataclass(frozen=True)
class DecayConfig:
    d: int = 1000
    replicas: int = 5
    gamma: float = 0.9
    law: str = "zipf"
    steps: int = 50_000
    snapshot_every: int | None = None  # defaults to d
    seed: int = 0
    theta0: tuple[float, ...] | None = None  # fixed start shared by all replicas

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie strictly between 0 and 1")
        if self.d < 1 or self.replicas < 1 or self.steps < 0:
            raise ValueError("need d >= 1, replicas >= 1, steps >= 0")
        if self.law not in LAWS:
            raise ValueError(f"law must be one of {LAWS}, got {self.law!r}")
        if self.snapshot_every is not None and self.snapshot_every < 1:
            raise ValueError("snapshot_every must be >= 1")
        if self.theta0 is not None and len(self.theta0) != self.d:
            raise ValueError("theta0 must have length d")

    @property
    def cadence(self) -> int:
        return self.snapshot_every or self.d


@dataclass
class DecayState:
    step: int
    theta: np.ndarray  # replicas x d

    def sq_norms(self) -> np.ndarray:
        return np.sum(self.theta**2, axis=1)


@dataclass
class DecayTrajectory:
    config: DecayConfig
    steps: np.ndarray  # (S,) step count at each snapshot
    snapshots: np.ndarray  # (S, replicas, d)

    def at(self, t: int) -> np.ndarray:
        """Replica vectors at the last snapshot taken at or before step t."""
        k = int(np.searchsorted(self.steps, t, side="right")) - 1
        if k < 0:
            raise ValueError(f"no snapshot at or before step {t}")
        return self.snapshots[k]


def zipf_weights(d: int) -> np.ndarray:
    """p_i proportional to 1/i for i = 1..d."""
    if d < 1:
        raise ValueError("d must be >= 1")
    inv = 1.0 / np.arange(1, d + 1, dtype=np.float64)
    return inv / inv.sum()


def uniform_weights(d: int) -> np.ndarray:
    if d < 1:
        raise ValueError("d must be >= 1")
    return np.full(d, 1.0 / d)


def law_weights(law: str, d: int) -> np.ndarray:
    if law == "uniform":
        return uniform_weights(d)
    if law == "zipf":
        return zipf_weights(d)
    raise ValueError(f"law must be one of {LAWS}, got {law!r}")


def decay_step(state: DecayState, rngs: Sequence[RngStream], gamma: float, weights) -> DecayState:
    """Advance every replica by one step; replica r draws from rngs[r]."""
    theta = state.theta.copy()
    if len(rngs) != theta.shape[0]:
        raise ValueError("need one random stream per replica")
    cdf = cumulative_weights(weights)
    for r, rng in enumerate(rngs):
        i = indices_from_uniforms(cdf, rng.random())
        theta[r, i] *= gamma
    return DecayState(state.step + 1, theta)


def expected_sq(theta0, weights, gamma: float, t: int) -> np.ndarray:
    """E[theta_i(t)^2] = theta0_i^2 (1 - (1 - gamma^2) p_i)^t."""
    if t < 0:
        raise ValueError("t must be >= 0")
    p = np.asarray(weights, dtype=np.float64)
    return np.asarray(theta0, dtype=np.float64) ** 2 * (1.0 - (1.0 - gamma**2) * p) ** t


def expected_fourth(theta0, weights, gamma: float, t: int) -> np.ndarray:
    """E[theta_i(t)^4]; with expected_sq this gives the Monte Carlo spread."""
    p = np.asarray(weights, dtype=np.float64)
    return np.asarray(theta0, dtype=np.float64) ** 4 * (1.0 - (1.0 - gamma**4) * p) ** t


def half_life(weights, gamma: float) -> np.ndarray:
    """Steps for E[theta_i^2] to halve, per coordinate."""
    p = np.asarray(weights, dtype=np.float64)
    return np.log(2.0) / -np.log1p(-(1.0 - gamma**2) * p)


def initial_state(cfg: DecayConfig) -> DecayState:
    root = RngStream(cfg.seed)
    if cfg.theta0 is not None:
        theta = np.tile(np.asarray(cfg.theta0, dtype=np.float64), (cfg.replicas, 1))
    else:
        theta = np.stack([root.derive(r).normal(cfg.d) for r in range(cfg.replicas)])
    return DecayState(0, theta)


def replica_streams(cfg: DecayConfig) -> list[RngStream]:
    """Selection streams; replica r uses sub-stream r after its initial draw."""
    root = RngStream(cfg.seed)
    streams = [root.derive(r) for r in range(cfg.replicas)]
    if cfg.theta0 is None:
        for s in streams:
            s.normal(cfg.d)
    return streams


def _advance(theta: np.ndarray, idx: np.ndarray, gamma: float) -> None:
    # Repeated in-place multiplication, bit-identical to stepping one at a time.
    counts = np.bincount(idx, minlength=theta.shape[0])
    for k in range(int(counts.max(initial=0))):
        theta[counts > k] *= gamma


def _snapshot_marks(cfg: DecayConfig) -> list[int]:
    marks = list(range(0, cfg.steps + 1, cfg.cadence))
    if marks[-1] != cfg.steps:
        marks.append(cfg.steps)
    return marks


def _replica_path(cfg: DecayConfig, r: int) -> np.ndarray:
    cdf = cumulative_weights(law_weights(cfg.law, cfg.d))
    stream = RngStream(cfg.seed).derive(r)
    if cfg.theta0 is None:
        theta = stream.normal(cfg.d)
    else:
        theta = np.array(cfg.theta0, dtype=np.float64)
    marks = _snapshot_marks(cfg)
    out = np.empty((len(marks), cfg.d))
    out[0] = theta
    for s in range(1, len(marks)):
        n = marks[s] - marks[s - 1]
        _advance(theta, indices_from_uniforms(cdf, stream.random(n)), cfg.gamma)
        out[s] = theta
    return out


def _replica_job(args):
    return _replica_path(*args)


def run_decay(cfg: DecayConfig, workers: int = 1) -> DecayTrajectory:
    """Simulate all replicas, snapshotting every `cfg.cadence` steps and at the end.

    Replica r's trajectory depends only on (seed, r), never on how many
    replicas run, in what order, or on `workers`.
    """
    jobs = [(cfg, r) for r in range(cfg.replicas)]
    if workers > 1 and cfg.replicas > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            paths = list(pool.map(_replica_job, jobs))
    else:
        paths = [_replica_job(j) for j in jobs]
    return DecayTrajectory(cfg, np.array(_snapshot_marks(cfg)), np.stack(paths, axis=1))


def mean_replica_distance(theta: np.ndarray) -> float:
    return float(np.mean([np.linalg.norm(u - v) for u, v in combinations(theta, 2)]))


def memory_ratio(traj: DecayTrajectory, t: int) -> float:
    """Mean inter-replica distance at step t relative to step 0."""
    if traj.snapshots.shape[1] < 2:
        raise ValueError("memory_ratio needs at least two replicas")
    start = mean_replica_distance(traj.snapshots[0])
    if start == 0.0:
        return 1.0
    return mean_replica_distance(traj.at(t)) / start
