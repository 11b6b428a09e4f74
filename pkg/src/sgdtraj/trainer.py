"""SGD training loops, per-epoch snapshots and multi-run orchestration."""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg.blas import dger

from .dataset import ImageSet
from .equivalence import kappa_from_tau, tau
from .mlp import LOSSES, MlpParams, backprop, forward, predict_class, sigmoid
from .numeric import RngStream

log = logging.getLogger(__name__)

NUM_CLASSES = 10


class DivergenceError(ArithmeticError):
    def __init__(self, epoch: int, batch: int, run_id: int | None = None):
        self.epoch, self.batch, self.run_id = epoch, batch, run_id
        where = f"epoch {epoch}, batch {batch}"
        if run_id is not None:
            where = f"run {run_id}, " + where
        super().__init__(f"training diverged at {where}")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.5
    batch_size: int = 1
    epochs: int = 20
    hidden_units: int = 100
    seed: int = 0
    snapshot_every: int = 1
    deskew: bool = False
    loss: str = "sse"

    def __post_init__(self):
        if not self.learning_rate >= 0 or not np.isfinite(self.learning_rate):
            raise ValueError("learning_rate must be a finite non-negative number")
        if self.batch_size < 1 or self.epochs < 1 or self.hidden_units < 1:
            raise ValueError("batch_size, epochs and hidden_units must be >= 1")
        if self.snapshot_every < 1:
            raise ValueError("snapshot_every must be >= 1")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}")


@dataclass
class Snapshot:
    epoch: int
    tau: np.ndarray
    kappa: np.ndarray
    train_error: float
    test_error: float
    mean_loss: float  # mean loss of the epoch that ended here; nan at epoch 0


@dataclass
class RunRecord:
    run_id: int
    config: TrainConfig
    snapshots: list[Snapshot] = field(default_factory=list)
    params: MlpParams | None = None

    @property
    def epochs(self) -> list[int]:
        return [s.epoch for s in self.snapshots]


def init_params(rng: RngStream, D: int, H: int, K: int) -> MlpParams:
    """Uniform weights in +-1/sqrt(fan_in), zero biases."""
    if min(D, H, K) < 1:
        raise ValueError("layer sizes must be >= 1")
    A = rng.uniform(-1.0 / np.sqrt(D), 1.0 / np.sqrt(D), (H, D))
    B = rng.uniform(-1.0 / np.sqrt(H), 1.0 / np.sqrt(H), (K, H))
    return MlpParams(np.zeros(H), A, np.zeros(K), B)


def error_rate(p: MlpParams, data: ImageSet, chunk: int = 10000) -> float:
    if len(data) == 0:
        return 0.0
    wrong = 0
    for start in range(0, len(data), chunk):
        y = forward(p, data.images[start : start + chunk])
        wrong += int(np.count_nonzero(predict_class(y) != data.labels[start : start + chunk]))
    return wrong / len(data)


def sgd_epoch(p: MlpParams, data: ImageSet, cfg: TrainConfig, rng: RngStream, epoch: int = 1):
    """One shuffled pass of minibatch SGD with mean-gradient steps.

    Returns (new params, mean per-sample loss measured before each update).
    """
    n = len(data)
    if n == 0:
        raise ValueError("cannot train on an empty dataset")
    if cfg.batch_size == 1 and cfg.learning_rate > 0:
        return _sgd_epoch_single(p, data, cfg, rng, epoch)
    a, A, b, B = (x.copy() for x in p.arrays())
    K = b.shape[0]
    targets = np.eye(K)
    order = rng.permutation(n)
    lr, bs = cfg.learning_rate, cfg.batch_size
    total = 0.0
    for batch, start in enumerate(range(0, n, bs)):
        idx = order[start : start + bs]
        (ga, gA, gb, gB), losses = backprop(
            a, A, b, B, data.images[idx], targets[data.labels[idx]], cfg.loss
        )
        total += losses.sum()
        if not (np.isfinite(total) and np.isfinite(ga).all() and np.isfinite(gb).all()):
            raise DivergenceError(epoch, batch)
        if lr == 0:
            continue
        step = lr / len(idx)
        a -= step * ga
        A -= step * gA
        b -= step * gb
        B -= step * gB
    new = MlpParams(a, A, b, B)
    if not new.is_finite():
        raise DivergenceError(epoch, batch)
    return new, total / n


def _sgd_epoch_single(p: MlpParams, data: ImageSet, cfg: TrainConfig, rng: RngStream, epoch: int):
    # Same update as the batched loop with rank-1 BLAS updates; A.T and B.T
    # are Fortran-ordered views, so dger writes through in place.
    a, A, b, B = (np.ascontiguousarray(x).copy() for x in p.arrays())
    At, Bt = A.T, B.T
    X, labels = data.images, data.labels
    lr, sse = cfg.learning_rate, cfg.loss == "sse"
    total = 0.0
    order = rng.permutation(len(data))
    for batch, i in enumerate(order):
        x = X[i]
        h = sigmoid(a + A @ x)
        y = sigmoid(b + B @ h)
        err = y.copy()
        err[labels[i]] -= 1.0
        if sse:
            total += err @ err
            d_out = 2.0 * err * y * (1.0 - y)
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                total -= np.log1p(-y).sum() - np.log1p(-y[labels[i]]) + np.log(y[labels[i]])
            d_out = err
        d_hid = (d_out @ B) * h * (1.0 - h)
        if not (np.isfinite(total) and np.isfinite(d_hid).all()):
            raise DivergenceError(epoch, batch)
        b -= lr * d_out
        dger(-lr, h, d_out, a=Bt, overwrite_a=1)
        a -= lr * d_hid
        dger(-lr, x, d_hid, a=At, overwrite_a=1)
    new = MlpParams(a, A, b, B)
    if not new.is_finite():
        raise DivergenceError(epoch, len(order) - 1)
    return new, total / len(order)


def _snapshot(p: MlpParams, epoch: int, data: ImageSet, test: ImageSet, mean_loss: float):
    t = tau(p, test)
    return Snapshot(
        epoch=epoch,
        tau=t,
        kappa=kappa_from_tau(t, p.b.shape[0]),
        train_error=error_rate(p, data),
        test_error=error_rate(p, test),
        mean_loss=mean_loss,
    )


def train_run(cfg: TrainConfig, data: ImageSet, test: ImageSet, run_id: int = 0,
              keep_params: bool = False) -> RunRecord:
    """Train one network on sub-stream `run_id` of the config seed.

    Snapshots are taken at epoch 0, every `snapshot_every` epochs and at the end.
    """
    rng = RngStream(cfg.seed).derive(run_id)
    p = init_params(rng, data.dims, cfg.hidden_units, NUM_CLASSES)
    record = RunRecord(run_id, cfg)
    record.snapshots.append(_snapshot(p, 0, data, test, float("nan")))
    for epoch in range(1, cfg.epochs + 1):
        try:
            p, mean_loss = sgd_epoch(p, data, cfg, rng, epoch)
        except DivergenceError as exc:
            raise DivergenceError(exc.epoch, exc.batch, run_id) from None
        if epoch % cfg.snapshot_every == 0 or epoch == cfg.epochs:
            record.snapshots.append(_snapshot(p, epoch, data, test, mean_loss))
        log.debug("run %d epoch %d loss %.6f", run_id, epoch, mean_loss)
    if keep_params:
        record.params = p
    return record


def _train_job(args):
    return train_run(*args)


def run_experiment(cfg: TrainConfig, num_runs: int, data: ImageSet, test: ImageSet,
                   workers: int = 1, keep_params: bool = False) -> list[RunRecord]:
    """Train `num_runs` independent networks; results are ordered by run_id.

    Each run owns its derived RNG stream, so the records do not depend on
    `workers`.
    """
    if num_runs < 1:
        raise ValueError("num_runs must be >= 1")
    jobs = [(cfg, data, test, k, keep_params) for k in range(num_runs)]
    if workers <= 1 or num_runs == 1:
        records = [_train_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_train_job, jobs))
    return sorted(records, key=lambda r: r.run_id)
