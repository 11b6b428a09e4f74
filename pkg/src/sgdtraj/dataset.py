"""MNIST ingestion (IDX format), moment-based deskewing and synthetic test data."""

from __future__ import annotations

import hashlib
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .numeric import RngStream

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
SIDE = 28
PIXELS = SIDE * SIDE
DATA_DIR_ENV = "MNIST_DATA_DIR"

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}

# |mu11| below this (in pixel-mass units) is treated as noise by deskew
SKEW_NOISE_FLOOR = 1e-9


class IdxFormatError(ValueError):
    pass


class IdxLengthError(ValueError):
    pass


@dataclass(frozen=True)
class ImageSet:
    images: np.ndarray
    labels: np.ndarray
    source: str = "synthetic"

    def __post_init__(self):
        images = np.asarray(self.images, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if images.ndim != 2:
            raise ValueError(f"images must be N x pixels, got shape {images.shape}")
        if labels.shape != (images.shape[0],):
            raise ValueError(
                f"{images.shape[0]} images but {labels.shape[0] if labels.ndim else 0} labels"
            )
        if images.size and (images.min() < 0.0 or images.max() > 1.0):
            raise ValueError("pixel values must lie in [0, 1]")
        if labels.size and (labels.min() < 0 or labels.max() > 9):
            raise ValueError("labels must lie in 0..9")
        images.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "images", images)
        object.__setattr__(self, "labels", labels)

    def __len__(self):
        return self.labels.shape[0]

    @property
    def dims(self) -> int:
        return self.images.shape[1]

    def checksum(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.images).tobytes())
        h.update(np.ascontiguousarray(self.labels).tobytes())
        return h.hexdigest()


def parse_idx(data: bytes, expect: int | None = None) -> np.ndarray:
    """Decode an IDX image or label payload.

    Images come back as an (N, rows*cols) float array scaled to [0, 1];
    labels as an (N,) int64 array. `expect` pins the magic number.
    """
    if len(data) < 4:
        raise IdxLengthError(f"expected at least 4 header bytes, got {len(data)}")
    (magic,) = struct.unpack(">I", data[:4])
    if magic not in (IMAGE_MAGIC, LABEL_MAGIC) or (expect is not None and magic != expect):
        wanted = f"0x{expect:08x}" if expect is not None else "0x00000803 or 0x00000801"
        raise IdxFormatError(f"bad IDX magic 0x{magic:08x} (expected {wanted})")

    ndims = 3 if magic == IMAGE_MAGIC else 1
    header = 4 + 4 * ndims
    if len(data) < header:
        raise IdxLengthError(f"expected {header} header bytes, got {len(data)}")
    dims = struct.unpack(f">{ndims}I", data[4:header])
    count = int(np.prod(dims, dtype=np.int64))
    expected = header + count
    if len(data) != expected:
        raise IdxLengthError(f"expected {expected} bytes for dims {dims}, got {len(data)}")

    raw = np.frombuffer(data, dtype=np.uint8, count=count, offset=header)
    if magic == LABEL_MAGIC:
        return raw.astype(np.int64)
    return raw.reshape(dims[0], dims[1] * dims[2]).astype(np.float64) / 255.0


def parse_idx_images(data: bytes) -> np.ndarray:
    return parse_idx(data, expect=IMAGE_MAGIC)


def parse_idx_labels(data: bytes) -> np.ndarray:
    return parse_idx(data, expect=LABEL_MAGIC)


def encode_idx_images(images: np.ndarray, rows: int = SIDE, cols: int = SIDE) -> bytes:
    """Inverse of parse_idx for images (pixels rounded back to bytes)."""
    pix = np.clip(np.rint(np.asarray(images) * 255.0), 0, 255).astype(np.uint8)
    return struct.pack(">4I", IMAGE_MAGIC, pix.shape[0], rows, cols) + pix.tobytes()


def encode_idx_labels(labels) -> bytes:
    lab = np.asarray(labels, dtype=np.uint8)
    return struct.pack(">2I", LABEL_MAGIC, lab.shape[0]) + lab.tobytes()


def resolve_data_dir(data_dir: str | os.PathLike | None) -> Path | None:
    if data_dir is not None:
        return Path(data_dir)
    env = os.environ.get(DATA_DIR_ENV)
    return Path(env) if env else None


def mnist_paths(data_dir: str | os.PathLike) -> dict[str, Path]:
    """Locate the four MNIST files; accepts the dash or dot naming variants."""
    root = Path(data_dir)
    paths = {}
    for key, name in MNIST_FILES.items():
        candidates = [root / name, root / name.replace("-idx", ".idx")]
        found = next((c for c in candidates if c.is_file()), None)
        if found is None:
            raise FileNotFoundError(str(candidates[0]))
        paths[key] = found
    return paths


def load_mnist(data_dir: str | os.PathLike, deskew_images: bool = False):
    """Return (train, test) ImageSets from a directory of raw IDX files."""
    paths = mnist_paths(data_dir)
    out = []
    for split in ("train", "test"):
        images = parse_idx_images(paths[f"{split}_images"].read_bytes())
        labels = parse_idx_labels(paths[f"{split}_labels"].read_bytes())
        if deskew_images:
            images = deskew_batch(images)
        out.append(ImageSet(images, labels, source=str(paths[f"{split}_images"])))
    return out[0], out[1]


def mnist_available(data_dir=None) -> bool:
    root = resolve_data_dir(data_dir)
    if root is None:
        return False
    try:
        mnist_paths(root)
    except FileNotFoundError:
        return False
    return True


def central_moments(images: np.ndarray):
    """Mass, centroid and (mu11, mu02) for a stack of (N, H, W) images.

    x runs along columns, y along rows.
    """
    n, h, w = images.shape
    ys = np.arange(h, dtype=np.float64)[None, :, None]
    xs = np.arange(w, dtype=np.float64)[None, None, :]
    mass = images.sum(axis=(1, 2))
    safe = np.where(mass > 0, mass, 1.0)
    cx = (images * xs).sum(axis=(1, 2)) / safe
    cy = (images * ys).sum(axis=(1, 2)) / safe
    dx = xs - cx[:, None, None]
    dy = ys - cy[:, None, None]
    mu11 = (images * dx * dy).sum(axis=(1, 2))
    mu02 = (images * dy * dy).sum(axis=(1, 2))
    return mass, cx, cy, mu11, mu02


def deskew_batch(images, side: int = SIDE) -> np.ndarray:
    """Deskew flattened square images; see `deskew`."""
    flat = np.asarray(images, dtype=np.float64)
    stack = flat.reshape(-1, side, side)
    n = stack.shape[0]
    mass, _, cy, mu11, mu02 = central_moments(stack)
    ok = (mass > 0) & (mu02 > 0) & (np.abs(mu11) > SKEW_NOISE_FLOOR)
    alpha = np.where(ok, mu11 / np.where(mu02 > 0, mu02, 1.0), 0.0)

    rows = np.arange(side, dtype=np.float64)
    cols = np.arange(side, dtype=np.float64)
    # output pixel (y, x) reads input at x + alpha * (y - cy)
    src = cols[None, None, :] + alpha[:, None, None] * (rows[None, :, None] - cy[:, None, None])
    x0 = np.floor(src)
    frac = src - x0
    x0 = x0.astype(np.int64)
    x1 = x0 + 1

    padded = np.zeros((n, side, side + 2))
    padded[:, :, 1:-1] = stack
    # indices outside the image land on the zero padding
    i0 = np.clip(x0 + 1, 0, side + 1)
    i1 = np.clip(x1 + 1, 0, side + 1)
    bi = np.arange(n)[:, None, None]
    ri = np.arange(side)[None, :, None]
    out = (1.0 - frac) * padded[bi, ri, i0] + frac * padded[bi, ri, i1]
    out = np.clip(out, 0.0, 1.0)
    out[~ok] = stack[~ok]
    return out.reshape(flat.shape)


def deskew(image) -> np.ndarray:
    """Shear a 28x28 image horizontally about its centroid so mu11 becomes ~0.

    The shear factor is mu11 / mu02 and sampling is linear along each row.
    Empty or unskewed images come back unchanged.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.shape != (SIDE, SIDE):
        raise ValueError(f"deskew expects a {SIDE}x{SIDE} image, got {img.shape}")
    return deskew_batch(img.reshape(1, PIXELS)).reshape(SIDE, SIDE)


def test_subset(data: ImageSet, n: int = 1000) -> ImageSet:
    if not 0 <= n <= len(data):
        raise ValueError(f"subset size {n} out of range for a set of {len(data)}")
    return ImageSet(data.images[:n], data.labels[:n], source=data.source)


test_subset.__test__ = False  # keep pytest from collecting it


def _blob_means(dims: int, classes: int, separation: float, rng: RngStream):
    if dims < 1 or classes < 2 or classes > 10:
        raise ValueError("need dims >= 1 and 2 <= classes <= 10")
    if separation < 0:
        raise ValueError("separation must be non-negative")
    if classes <= dims:
        q, _ = np.linalg.qr(rng.normal((dims, classes)))
        # orthonormal rows scaled by sqrt(2)*s are 2*s apart pairwise
        shape = np.sqrt(2.0) * separation * q.T
    else:
        u = rng.normal(dims)
        u /= np.linalg.norm(u)
        shape = 2.0 * separation * np.arange(classes)[:, None] * u[None, :]
    shape = shape - shape.mean(axis=0)
    sigma = 0.5 / (float(np.abs(shape).max()) + 4.0)
    return 0.5 + sigma * shape, sigma


def _blob_samples(means, sigma, per_class: int, rng: RngStream) -> ImageSet:
    if per_class < 0:
        raise ValueError("per_class must be non-negative")
    classes, dims = means.shape
    labels = np.repeat(np.arange(classes), per_class)
    labels = labels[rng.permutation(labels.size)]
    noise = rng.normal((labels.size, dims))
    images = np.clip(means[labels] + sigma * noise, 0.0, 1.0)
    return ImageSet(images, labels, source="synthetic")


def synthetic_blobs(
    dims: int, classes: int, per_class: int, separation: float, rng: RngStream
) -> ImageSet:
    """Isotropic Gaussian clusters clipped to [0, 1].

    `separation` is half the gap between any two class means in units of the
    cluster standard deviation, so two classes at separation s are confused
    with probability Phi(-s) by the Bayes rule. When classes <= dims the means
    lie along random orthonormal directions; otherwise they are evenly spaced
    along one random direction. Sigma is chosen so every mean sits at least
    4 sigma inside the unit cube, which keeps clipping negligible.
    """
    means, sigma = _blob_means(dims, classes, separation, rng)
    return _blob_samples(means, sigma, per_class, rng)


def synthetic_train_test(dims: int, classes: int, per_class_train: int, per_class_test: int,
                         separation: float, rng: RngStream):
    """Train and test sets drawn from the same cluster means."""
    means, sigma = _blob_means(dims, classes, separation, rng.derive(0))
    return (_blob_samples(means, sigma, per_class_train, rng.derive(1)),
            _blob_samples(means, sigma, per_class_test, rng.derive(2)))
