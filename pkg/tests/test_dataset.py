import struct

import numpy as np
import pytest

from sgdtraj.dataset import (
    ImageSet,
    IdxFormatError,
    IdxLengthError,
    LABEL_MAGIC,
    central_moments,
    deskew,
    deskew_batch,
    encode_idx_images,
    encode_idx_labels,
    load_mnist,
    mnist_paths,
    parse_idx,
    parse_idx_images,
    parse_idx_labels,
    synthetic_blobs,
    synthetic_train_test,
    test_subset as take_subset,
)
from sgdtraj.numeric import RngStream

MNIST_TRAIN_COUNTS = [5923, 6742, 5958, 6131, 5842, 5421, 5918, 6265, 5851, 5949]
MNIST_TEST_COUNTS = [980, 1135, 1032, 1010, 982, 892, 1028, 1010, 974, 1009]


def moments(img):
    _, _, _, mu11, mu02 = central_moments(np.asarray(img)[None])
    return float(mu11[0]), float(mu02[0])


def sheared_bar(shear, width=3, top=4, bottom=24):
    """A vertical bar with its columns offset by shear * (row - centre)."""
    img = np.zeros((28, 28))
    centre = 0.5 * (top + bottom - 1)
    for y in range(top, bottom):
        x = 13 + shear * (y - centre)
        for dx in np.arange(-width / 2, width / 2, 0.05):
            xf = x + dx
            x0 = int(np.floor(xf))
            f = xf - x0
            img[y, x0] += 0.05 * (1 - f)
            img[y, x0 + 1] += 0.05 * f
    return np.clip(img, 0, 1)


# --- IDX parsing ------------------------------------------------------------

def test_hand_built_image_fixture():
    data = struct.pack(">4I", 0x803, 1, 2, 2) + bytes([0, 128, 255, 0])
    out = parse_idx(data)
    assert out.shape == (1, 4)
    assert out[0].tolist() == [0.0, 128 / 255, 1.0, 0.0]


def test_labels_parse_in_order():
    data = struct.pack(">2I", 0x801, 4) + bytes([3, 1, 4, 1])
    assert parse_idx(data).tolist() == [3, 1, 4, 1]


def test_label_magic_to_image_parser_names_magic():
    data = struct.pack(">2I", LABEL_MAGIC, 1) + bytes([7])
    with pytest.raises(IdxFormatError, match="0x00000801"):
        parse_idx_images(data)


def test_unknown_magic_rejected():
    with pytest.raises(IdxFormatError, match="0xdeadbeef"):
        parse_idx(struct.pack(">I", 0xDEADBEEF) + bytes(8))


def test_truncated_payload_reports_counts():
    data = struct.pack(">4I", 0x803, 2, 2, 2) + bytes(5)
    with pytest.raises(IdxLengthError, match="expected 24 .* got 21"):
        parse_idx(data)


def test_truncated_header():
    with pytest.raises(IdxLengthError):
        parse_idx(struct.pack(">I", 0x803) + bytes(3))


def test_encode_round_trip():
    rng = np.random.default_rng(0)
    pix = rng.integers(0, 256, size=(5, 784)) / 255.0
    assert np.array_equal(parse_idx_images(encode_idx_images(pix)), pix)
    assert parse_idx_labels(encode_idx_labels([9, 0, 2])).tolist() == [9, 0, 2]


def test_load_from_directory(tmp_path):
    rng = np.random.default_rng(1)
    pix = rng.integers(0, 256, size=(6, 784)) / 255.0
    lab = [0, 1, 2, 3, 4, 5]
    for stem in ("train", "t10k"):
        (tmp_path / f"{stem}-images-idx3-ubyte").write_bytes(encode_idx_images(pix))
        (tmp_path / f"{stem}-labels-idx1-ubyte").write_bytes(encode_idx_labels(lab))
    train, test = load_mnist(tmp_path)
    assert len(train) == 6 and len(test) == 6
    assert np.array_equal(train.images, pix)
    assert train.source.endswith("train-images-idx3-ubyte")


def test_missing_file_names_path(tmp_path):
    with pytest.raises(FileNotFoundError, match="train-images"):
        mnist_paths(tmp_path)


def test_official_files_round_trip(mnist):
    train, test = mnist
    assert len(train) == 60000 and len(test) == 10000
    assert np.bincount(train.labels, minlength=10).tolist() == MNIST_TRAIN_COUNTS
    assert np.bincount(test.labels, minlength=10).tolist() == MNIST_TEST_COUNTS


def test_first_thousand_match_direct_indexing(mnist):
    _, test = mnist
    sub = take_subset(test)
    assert np.array_equal(sub.images, test.images[:1000])
    assert np.array_equal(sub.labels, test.labels[:1000])


# --- ImageSet ---------------------------------------------------------------

def test_imageset_invariants():
    with pytest.raises(ValueError):
        ImageSet(np.zeros((2, 4)), [0])
    with pytest.raises(ValueError):
        ImageSet(np.full((1, 4), 1.5), [0])
    with pytest.raises(ValueError):
        ImageSet(np.zeros((1, 4)), [10])
    s = ImageSet(np.zeros((1, 4)), [3])
    with pytest.raises(ValueError):
        s.images[0, 0] = 1.0


# --- deskew -----------------------------------------------------------------

def test_empty_image_unchanged():
    z = np.zeros((28, 28))
    assert np.array_equal(deskew(z), z)


def test_symmetric_blob_unchanged():
    yy, xx = np.mgrid[0:28, 0:28]
    blob = np.exp(-((xx - 13.5) ** 2 / 18 + (yy - 13.5) ** 2 / 40))
    assert abs(moments(blob)[0]) < 1e-9
    assert np.max(np.abs(deskew(blob) - blob)) <= 1e-6


def test_sheared_bar_residual():
    img = sheared_bar(0.3)
    mu11, mu02 = moments(img)
    assert mu11 / mu02 == pytest.approx(0.3, abs=0.02)
    out = deskew(img)
    r11, r02 = moments(out)
    assert abs(r11 / r02) < 0.03
    assert abs(r11) <= 0.1 * abs(mu11)
    assert abs(out.sum() - img.sum()) <= 0.02 * img.sum()
    assert out.min() >= 0 and out.max() <= 1


@pytest.mark.parametrize("shear", [-0.4, -0.1, 0.2, 0.5])
def test_deskew_properties_on_varied_shears(shear):
    img = sheared_bar(shear, width=4)
    out = deskew(img)
    assert abs(out.sum() - img.sum()) <= 0.02 * img.sum()
    assert abs(moments(out)[0]) <= 0.1 * abs(moments(img)[0])
    assert np.max(np.abs(deskew(out) - out)) <= 1e-3


def test_deskew_batch_matches_single():
    imgs = np.stack([sheared_bar(s).ravel() for s in (0.1, -0.2, 0.0)])
    out = deskew_batch(imgs)
    for i in range(3):
        assert np.array_equal(out[i], deskew(imgs[i].reshape(28, 28)).ravel())


def test_deskew_rejects_wrong_shape():
    with pytest.raises(ValueError):
        deskew(np.zeros((27, 28)))


def test_deskew_idempotent_on_mnist(mnist):
    train, _ = mnist  # already deskewed once
    once = train.images[:200]
    assert np.max(np.abs(deskew_batch(once) - once)) <= 1e-3


# --- subsets ----------------------------------------------------------------

def test_subset_bounds():
    s = synthetic_blobs(4, 2, 5, 2.0, RngStream(0))
    assert len(take_subset(s, 0)) == 0
    full = take_subset(s, len(s))
    assert np.array_equal(full.images, s.images) and np.array_equal(full.labels, s.labels)
    assert np.array_equal(take_subset(s, 3).labels, s.labels[:3])
    with pytest.raises(ValueError):
        take_subset(s, len(s) + 1)


# --- synthetic data ---------------------------------------------------------

def test_blobs_balanced_and_valid():
    s = synthetic_blobs(20, 5, 30, 4.0, RngStream(3))
    assert np.bincount(s.labels).tolist() == [30] * 5
    assert s.images.shape == (150, 20)
    assert s.source == "synthetic"


def test_blobs_deterministic():
    a = synthetic_blobs(10, 3, 20, 4.0, RngStream(11))
    b = synthetic_blobs(10, 3, 20, 4.0, RngStream(11))
    assert a.checksum() == b.checksum()
    assert a.checksum() != synthetic_blobs(10, 3, 20, 4.0, RngStream(12)).checksum()


def nearest_centroid_error(train, test):
    cents = np.stack([train.images[train.labels == c].mean(0) for c in np.unique(train.labels)])
    d = ((test.images[:, None, :] - cents[None]) ** 2).sum(-1)
    return float(np.mean(d.argmin(1) != test.labels))


def test_centroid_classifier_on_well_separated_pair():
    train, test = synthetic_train_test(2, 2, 500, 5000, 6.0, RngStream(5))
    assert nearest_centroid_error(train, test) < 0.01


def test_zero_separation_is_chance():
    train, test = synthetic_train_test(5, 4, 500, 2000, 0.0, RngStream(6))
    err = nearest_centroid_error(train, test)
    # chance error is 0.75; allow a 5 sigma band for 8000 test samples
    assert abs(err - 0.75) < 5 * np.sqrt(0.75 * 0.25 / 8000) + 0.02


def test_separation_four_near_bayes_limit():
    # Phi(-4) ~ 3.2e-5 per pair, so ten classes stay well below 0.1% error
    train, test = synthetic_train_test(20, 10, 200, 2000, 4.0, RngStream(7))
    assert nearest_centroid_error(train, test) < 0.001


def test_more_classes_than_dims():
    s = synthetic_blobs(1, 4, 10, 4.0, RngStream(8))
    assert np.bincount(s.labels).tolist() == [10] * 4


def test_blob_preconditions():
    with pytest.raises(ValueError):
        synthetic_blobs(0, 2, 5, 1.0, RngStream(0))
    with pytest.raises(ValueError):
        synthetic_blobs(3, 1, 5, 1.0, RngStream(0))
