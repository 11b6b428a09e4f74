"""One-hidden-layer sigmoid MLP: y = sigmoid(b + B sigmoid(a + A x))."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LOSSES = ("sse", "bce")


@dataclass(frozen=True)
class MlpParams:
    a: np.ndarray  # (H,) hidden bias
    A: np.ndarray  # (H, D) input weights
    b: np.ndarray  # (K,) output bias
    B: np.ndarray  # (K, H) output weights

    def __post_init__(self):
        for name in ("a", "A", "b", "B"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.float64))
        H, D = self.A.shape
        K = self.b.shape[0]
        if self.a.shape != (H,) or self.B.shape != (K, H) or self.b.ndim != 1:
            raise ValueError(
                f"inconsistent shapes a{self.a.shape} A{self.A.shape} b{self.b.shape} B{self.B.shape}"
            )

    @property
    def shape(self) -> tuple[int, int, int]:
        """(D, H, K)"""
        return self.A.shape[1], self.A.shape[0], self.b.shape[0]

    @classmethod
    def zeros(cls, D: int, H: int, K: int) -> "MlpParams":
        return cls(np.zeros(H), np.zeros((H, D)), np.zeros(K), np.zeros((K, H)))

    def arrays(self) -> tuple[np.ndarray, ...]:
        return self.a, self.A, self.b, self.B

    def copy(self) -> "MlpParams":
        return MlpParams(*(x.copy() for x in self.arrays()))

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(x)) for x in self.arrays())

    def permute_hidden(self, perm) -> "MlpParams":
        """Reorder hidden units; the network function is unchanged."""
        perm = np.asarray(perm)
        return MlpParams(self.a[perm], self.A[perm], self.b.copy(), self.B[:, perm])

    def flat(self) -> np.ndarray:
        return np.concatenate([x.ravel() for x in self.arrays()])

    @classmethod
    def from_flat(cls, v, D: int, H: int, K: int) -> "MlpParams":
        v = np.asarray(v, dtype=np.float64)
        sizes = np.cumsum([H, H * D, K])
        a, A, b, B = np.split(v, sizes)
        return cls(a, A.reshape(H, D), b, B.reshape(K, H))


def sigmoid(z):
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-z))


def forward(p: MlpParams, x) -> np.ndarray:
    """Network outputs for one input (D,) or a batch (N, D)."""
    x = np.asarray(x, dtype=np.float64)
    D = p.A.shape[1]
    if x.shape[-1] != D or x.ndim not in (1, 2):
        raise ValueError(f"input shape {x.shape} does not match D={D}")
    h = sigmoid(p.a + x @ p.A.T)
    return sigmoid(p.b + h @ p.B.T)


def one_hot(label, K: int) -> np.ndarray:
    label = np.asarray(label)
    if np.any(label < 0) or np.any(label >= K):
        raise ValueError(f"label out of range 0..{K - 1}")
    return (np.arange(K) == label[..., None]).astype(np.float64)


def loss(y, label, kind: str = "sse") -> float:
    """Sum-of-squares error against the one-hot target (or binary cross-entropy)."""
    y = np.asarray(y, dtype=np.float64)
    t = one_hot(label, y.shape[-1])
    if kind == "sse":
        return float(np.sum((y - t) ** 2))
    if kind == "bce":
        with np.errstate(divide="ignore", invalid="ignore"):
            return float(-np.sum(t * np.log(y) + (1 - t) * np.log1p(-y)))
    raise ValueError(f"unknown loss {kind!r}")


def backprop(a, A, b, B, X, T, kind: str = "sse"):
    """Per-batch summed gradients (ga, gA, gb, gB) and per-sample losses.

    X is N x D, T the N x K one-hot targets.
    """
    h = sigmoid(a + X @ A.T)
    y = sigmoid(b + h @ B.T)
    err = y - T
    if kind == "sse":
        losses = np.sum(err**2, axis=1)
        d_out = 2.0 * err * y * (1.0 - y)
    elif kind == "bce":
        with np.errstate(divide="ignore", invalid="ignore"):
            losses = -np.sum(T * np.log(y) + (1 - T) * np.log1p(-y), axis=1)
        d_out = err
    else:
        raise ValueError(f"unknown loss {kind!r}")
    d_hid = (d_out @ B) * h * (1.0 - h)
    return (d_hid.sum(axis=0), d_hid.T @ X, d_out.sum(axis=0), d_out.T @ h), losses


def batch_grad(p: MlpParams, X, labels, kind: str = "sse"):
    """Mean gradient and mean loss over a batch (X is N x D)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != p.A.shape[1]:
        raise ValueError(f"batch shape {X.shape} does not match D={p.A.shape[1]}")
    n = X.shape[0]
    T = one_hot(np.asarray(labels), p.b.shape[0])
    sums, losses = backprop(*p.arrays(), X, T, kind)
    return MlpParams(*(s / n for s in sums)), float(losses.mean())


def grad(p: MlpParams, x, label, kind: str = "sse") -> MlpParams:
    """Exact gradient of loss(forward(p, x), label) for a single sample."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("grad takes a single input vector")
    g, _ = batch_grad(p, x[None, :], [label], kind)
    return g


def predict_class(y) -> np.ndarray | int:
    """Index of the largest output; ties go to the lowest index."""
    y = np.asarray(y)
    if y.shape[-1] == 0:
        raise ValueError("empty output vector")
    cls = np.argmax(y, axis=-1)
    return int(cls) if y.ndim == 1 else cls
