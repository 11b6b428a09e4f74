"""Command-line entry point: train, simulate, embed, mds, plot.

Exit codes: 0 success, 2 usage or input error, 3 numeric divergence.
Every command validates its inputs before writing, and writes through a
temporary path so a failed run leaves no partial output behind.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import os
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import (
    DATA_DIR_ENV,
    PIXELS,
    ImageSet,
    deskew_batch,
    load_mnist,
    mnist_paths,
    resolve_data_dir,
    synthetic_train_test,
    test_subset,
)
from .decaysim import DecayConfig, expected_sq, law_weights, memory_ratio, run_decay
from .equivalence import distance_matrix
from .formats import (
    FormatError,
    fmt,
    read_coordinates,
    read_distance_matrix,
    read_trajectory,
    replace_dir,
    write_coordinates,
    write_distance_matrix,
    write_manifest,
    write_table,
    write_trajectory,
)
from .mds import embed
from .numeric import RngStream
from .plot import PlotSpec, render_svg
from .trainer import DivergenceError, TrainConfig, run_experiment

EXIT_OK, EXIT_USAGE, EXIT_DIVERGED = 0, 2, 3

log = logging.getLogger("sgdtraj")


class UsageError(Exception):
    pass


def _check_out_dir(path: Path) -> None:
    if path.exists() and (not path.is_dir() or any(path.iterdir())):
        raise UsageError(f"output directory {path} exists and is not empty")


def _write_dir(out: Path, writer) -> None:
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}-", dir=out.parent))
    try:
        writer(tmp)
        replace_dir(tmp, out)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


def _write_file(out: Path, writer) -> None:
    out.parent.mkdir(parents=True, exist_ok=True)
    fd, name = tempfile.mkstemp(prefix=f".{out.name}-", dir=out.parent)
    os.close(fd)
    try:
        writer(name)
        os.replace(name, out)
    except BaseException:
        Path(name).unlink(missing_ok=True)
        raise


def _load_training_data(args) -> tuple[ImageSet, ImageSet, str]:
    if args.synthetic:
        per_test = max(1, args.test_size // 10)
        train, test = synthetic_train_test(
            args.synthetic_dims, 10, args.synthetic_per_class, per_test,
            args.synthetic_separation, RngStream(args.data_seed),
        )
        if args.deskew:
            if train.dims != PIXELS:
                raise UsageError("--deskew needs 784-pixel images (--synthetic-dims 784)")
            train = ImageSet(deskew_batch(train.images), train.labels, train.source)
            test = ImageSet(deskew_batch(test.images), test.labels, test.source)
        return train, test, "synthetic"

    root = resolve_data_dir(args.data_dir)
    if root is None:
        raise UsageError(f"no data: pass --data-dir, set {DATA_DIR_ENV}, or use --synthetic")
    try:
        mnist_paths(root)
    except FileNotFoundError as exc:
        raise UsageError(f"missing MNIST file: {exc}") from None
    train, test = load_mnist(root, deskew_images=args.deskew)
    if args.test_size > len(test):
        raise UsageError(f"--test-size {args.test_size} exceeds the {len(test)} test samples")
    return train, test_subset(test, args.test_size), "mnist"


def cmd_train(args) -> int:
    out = Path(args.out)
    _check_out_dir(out)
    cfg = TrainConfig(
        learning_rate=args.lr, batch_size=args.batch, epochs=args.epochs,
        hidden_units=args.hidden, seed=args.seed, snapshot_every=args.snapshot_every,
        deskew=args.deskew, loss=args.loss,
    )
    if args.runs < 1:
        raise UsageError("--runs must be >= 1")
    train, test, name = _load_training_data(args)
    checksum = hashlib.sha256((train.checksum() + test.checksum()).encode()).hexdigest()
    records = run_experiment(cfg, args.runs, train, test, workers=args.workers)

    def write(tmp: Path):
        write_manifest(tmp / "manifest.txt", {
            "command": "train",
            "dataset": name,
            "dataset_checksum": checksum,
            "train_samples": len(train),
            "test_samples": len(test),
            "seed": cfg.seed,
            "lr": repr(cfg.learning_rate),
            "batch": cfg.batch_size,
            "epochs": cfg.epochs,
            "hidden": cfg.hidden_units,
            "runs": args.runs,
            "snapshot_every": cfg.snapshot_every,
            "deskew": int(cfg.deskew),
            "loss": cfg.loss,
            "code_version": __version__,
        })
        rows = []
        for rec in records:
            ids = [f"{rec.run_id}:{s.epoch}" for s in rec.snapshots]
            write_trajectory(tmp / f"tau_run{rec.run_id:03d}.csv", ids, [s.tau for s in rec.snapshots])
            write_trajectory(tmp / f"kappa_run{rec.run_id:03d}.csv", ids, [s.kappa for s in rec.snapshots])
            for s in rec.snapshots:
                rows.append([rec.run_id, s.epoch, s.train_error, s.test_error, s.mean_loss])
        write_table(tmp / "errors.csv", ["run", "epoch", "train_error", "test_error", "mean_loss"], rows)

    _write_dir(out, write)
    final = [r.snapshots[-1] for r in records]
    print(f"runs={len(records)} mean_train_error={fmt(np.mean([s.train_error for s in final]))} "
          f"mean_test_error={fmt(np.mean([s.test_error for s in final]))}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    out = Path(args.out)
    _check_out_dir(out)
    cfg = DecayConfig(
        d=args.dims, replicas=args.replicas, gamma=args.gamma, law=args.law,
        steps=args.steps, snapshot_every=args.snapshot_every, seed=args.seed,
    )
    traj = run_decay(cfg, workers=args.workers)
    weights = law_weights(cfg.law, cfg.d)

    def write(tmp: Path):
        manifest = {
            "command": "simulate",
            "dims": cfg.d,
            "replicas": cfg.replicas,
            "steps": cfg.steps,
            "law": cfg.law,
            "gamma": repr(cfg.gamma),
            "snapshot_every": cfg.cadence,
            "seed": cfg.seed,
            "weights": ",".join(fmt(w) for w in weights),
            "code_version": __version__,
        }
        if cfg.replicas >= 2:
            manifest["memory_ratio_final"] = fmt(memory_ratio(traj, cfg.steps))
        write_manifest(tmp / "manifest.txt", manifest)
        theta0 = traj.snapshots[0]
        exp_ids, exp_rows = [], []
        for r in range(cfg.replicas):
            ids = [f"{r}:{int(t)}" for t in traj.steps]
            write_trajectory(tmp / f"tau_replica{r:03d}.csv", ids, list(traj.snapshots[:, r]))
            for t in traj.steps:
                exp_ids.append(f"{r}:{int(t)}")
                exp_rows.append(expected_sq(theta0[r], weights, cfg.gamma, int(t)))
        write_trajectory(tmp / "expected_sq.csv", exp_ids, exp_rows)

    _write_dir(out, write)
    if cfg.replicas >= 2:
        print(f"memory_ratio={fmt(memory_ratio(traj, cfg.steps))}")
    return EXIT_OK


def cmd_embed(args) -> int:
    runs = Path(args.runs)
    if not runs.is_dir():
        raise UsageError(f"no such run directory: {runs}")
    files = sorted(runs.glob(f"{args.metric}_*.csv"))
    if not files:
        raise UsageError(f"no {args.metric} trajectory files in {runs}")
    ids, vectors = [], []
    for path in files:
        file_ids, file_vectors = read_trajectory(path)
        ids += file_ids
        vectors += file_vectors
    if len({v.shape for v in vectors}) > 1:
        raise UsageError("trajectory files have mixed vector lengths")
    if len(set(ids)) != len(ids):
        raise UsageError("duplicate snapshot ids across trajectory files")
    dm = distance_matrix(vectors, ids, kind=args.metric)
    _write_file(Path(args.out), lambda p: write_distance_matrix(p, dm))
    print(f"snapshots={len(dm)}")
    return EXIT_OK


def cmd_mds(args) -> int:
    dm = read_distance_matrix(args.dist)
    emb = embed(dm, dims=args.dims, method=args.method, max_iters=args.max_iters, tol=args.tol)
    _write_file(Path(args.out), lambda p: write_coordinates(p, emb.ids, emb.coords))
    print(f"stress={fmt(emb.stress)}")
    print(f"clamped_negative_mass={fmt(emb.clamped_mass)}")
    return EXIT_OK


def cmd_plot(args) -> int:
    spec = PlotSpec(args.coords, args.out, args.width, args.height)
    ids, coords = read_coordinates(spec.coords_path)
    svg = render_svg(ids, coords, spec.width, spec.height)
    _write_file(Path(spec.out_path), lambda p: Path(p).write_text(svg, encoding="utf-8"))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sgdtraj", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train MLPs and record tau/kappa trajectories")
    p.add_argument("--data-dir", help=f"directory with the MNIST IDX files (or ${DATA_DIR_ENV})")
    p.add_argument("--synthetic", action="store_true", help="use Gaussian blobs instead of MNIST")
    p.add_argument("--synthetic-dims", type=int, default=50)
    p.add_argument("--synthetic-per-class", type=int, default=200)
    p.add_argument("--synthetic-separation", type=float, default=4.0)
    p.add_argument("--data-seed", type=int, default=12345)
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--epochs", type=int, default=20)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--batch", type=int, default=1)
    p.add_argument("--hidden", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--snapshot-every", type=int, default=1)
    p.add_argument("--test-size", type=int, default=1000)
    p.add_argument("--loss", choices=["sse", "bce"], default="sse")
    p.add_argument("--deskew", action="store_true")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("simulate", help="run the coordinate-decay model")
    p.add_argument("--dims", type=int, default=1000)
    p.add_argument("--replicas", type=int, default=5)
    p.add_argument("--steps", type=int, default=50_000)
    p.add_argument("--law", choices=["uniform", "zipf"], default="zipf")
    p.add_argument("--gamma", type=float, default=0.9)
    p.add_argument("--snapshot-every", type=int, default=None, help="default: --dims")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("embed", help="pairwise distance matrix over all snapshots")
    p.add_argument("--runs", required=True, help="directory written by train or simulate")
    p.add_argument("--metric", choices=["tau", "kappa"], default="tau")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("mds", help="embed a distance matrix in the plane")
    p.add_argument("--dist", required=True)
    p.add_argument("--dims", type=int, default=2)
    p.add_argument("--method", choices=["classical", "smacof"], default="smacof")
    p.add_argument("--max-iters", type=int, default=300)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mds)

    p = sub.add_parser("plot", help="render embedded trajectories as SVG")
    p.add_argument("--coords", required=True)
    p.add_argument("--width", type=int, default=800)
    p.add_argument("--height", type=int, default=600)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except DivergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (UsageError, FormatError, FileNotFoundError, FileExistsError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
