"""Command-line interface: simulate test problems, train a model, recover
images, and evaluate PSNR.

The CLI is a thin shell over the library: every subcommand reads files,
calls pure functions, and writes files. Exit codes: 0 success, 1 validation
error, 2 I/O or file-format error.

Training data lives in one directory, paired by filename stem:
``<stem>.clean.cimg`` (target image), ``<stem>.meas.cimg`` (measurement),
and for k-space problems ``<stem>.mask.cmsk``.
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from .fileio import (
    ConfigError,
    FormatError,
    load_config,
    read_image,
    read_mask,
    read_model,
    write_image,
    write_mask,
    write_metrics_csv,
    write_model,
    write_training_csv,
)
from .ops import ifft2_unitary, psnr
from .recovery import KIND_DENOISE, KIND_MRI, DenoisingProblem, MriProblem, recover
from .simulate import DEFAULT_CENTER_FRACTION, add_awgn, gen_mask, gen_phantom, simulate_kspace
from .training import TrainingConfig, train_network

__all__ = ["cli_main", "main", "build_parser", "training_config_from_dict"]

# natural-image noise scale: sigma values quoted on the [0, 255] range are
# mapped to data units by sigma / 255 * peak with unit-peak phantoms
NATURAL_SCALE = 255.0
DEFAULT_MRI_LAM = 1e6


def build_parser():
    parser = argparse.ArgumentParser(
        prog="bcdnet",
        description="Train and run layered image-recovery networks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate phantom/measurement files")
    p.add_argument("--problem", choices=[KIND_DENOISE, KIND_MRI], required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--count", type=int, default=4, help="number of samples")
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--kind", choices=["ellipses", "blocks"], default="ellipses")
    p.add_argument("--sigma", type=float, default=None,
                   help="noise std on the 0-255 scale (default 30 denoise, 0 mri)")
    p.add_argument("--rate", type=float, default=0.1, help="k-space sampling rate")
    p.add_argument("--center-fraction", type=float, default=DEFAULT_CENTER_FRACTION)
    p.add_argument("--supersample", type=int, default=3,
                   help="phantom supersampling factor for k-space synthesis")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train a model from a directory of images")
    p.add_argument("--config", required=True, help="key=value config file")
    p.add_argument("--train-dir", default=None,
                   help="directory of paired training files (default: config 'paths')")
    p.add_argument("--out", default="model.bcdn", help="output model file")
    p.add_argument("--metrics", default=None, help="training metrics CSV path")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("recover", help="run a trained model on one measurement")
    p.add_argument("--model", required=True)
    p.add_argument("--measurement", required=True)
    p.add_argument("--mask", default=None, help="sampling mask (k-space problems)")
    p.add_argument("--reference", default=None, help="clean image for PSNR metrics")
    p.add_argument("--out", required=True, help="reconstruction CIMG path")
    p.add_argument("--metrics", default=None, help="per-layer metrics CSV path")
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("eval", help="print PSNR of a reconstruction")
    p.add_argument("--recon", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--peak", type=float, default=None)
    p.set_defaults(func=cmd_eval)
    return parser


def cmd_simulate(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.count < 1:
        raise ValueError("count must be >= 1")
    sigma = args.sigma
    if sigma is None:
        sigma = 30.0 if args.problem == KIND_DENOISE else 0.0
    sigma_data = sigma / NATURAL_SCALE
    if args.problem == KIND_MRI:
        mask = gen_mask(args.height, args.width, args.rate,
                        args.center_fraction, seed=args.seed + 5000)
    for i in range(args.count):
        stem = out / f"im{i:02d}"
        seed = args.seed + i
        if args.problem == KIND_DENOISE:
            clean = gen_phantom(args.kind, args.height, args.width, seed)
            meas = add_awgn(clean, sigma_data, seed=seed + 1000)
        else:
            hi = gen_phantom(args.kind, args.height * args.supersample,
                             args.width * args.supersample, seed, with_phase=True)
            full = np.ones((args.height, args.width), dtype=bool)
            clean = ifft2_unitary(
                simulate_kspace(hi, args.height, args.width, full)
            )
            meas = simulate_kspace(hi, args.height, args.width, mask,
                                   sigma_data, seed=seed + 1000)
            write_mask(f"{stem}.mask.cmsk", mask)
        write_image(f"{stem}.clean.cimg", clean)
        write_image(f"{stem}.meas.cimg", meas)
    print(f"wrote {args.count} {args.problem} sample(s) to {out}")
    return 0


def training_config_from_dict(cfg, problem):
    """Build a TrainingConfig from parsed config-file values."""
    lam = cfg.get("lambda")
    if lam is None:
        if problem == KIND_DENOISE:
            sigma = cfg.get("sigma")
            if sigma is None:
                raise ConfigError("denoise training needs 'lambda' or 'sigma'")
            lam = 10.0 * NATURAL_SCALE / sigma
        else:
            lam = DEFAULT_MRI_LAM
    max_sweeps = cfg.get("max_sweeps", 120 if problem == KIND_DENOISE else 180)
    try:
        return TrainingConfig(
            lam=lam,
            n_filters=cfg.get("filters_k", 64),
            patch_shape=(cfg.get("patch_h", 8), cfg.get("patch_w", 8)),
            n_patches=cfg.get("n_patches", 20000),
            n_layers=cfg.get("layers", 10),
            admm_iters=cfg.get("admm_iters", 4),
            v_subgrad_iters=cfg.get("v_iters", 4),
            alpha_subgrad_iters=cfg.get("alpha_iters", 4),
            rel_diff_tol=cfg.get("rel_tol", 2e-3),
            max_block_sweeps=max_sweeps,
            rho0=cfg.get("rho0", 1.0),
            seed=cfg.get("seed", 0),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _training_pairs(train_dir, problem):
    train_dir = Path(train_dir)
    if not train_dir.is_dir():
        raise FileNotFoundError(f"training directory {train_dir} does not exist")
    stems = sorted(p.name[: -len(".clean.cimg")]
                   for p in train_dir.glob("*.clean.cimg"))
    if not stems:
        raise ValueError(f"no *.clean.cimg files in {train_dir}")
    images, problems = [], []
    for stem in stems:
        clean = read_image(train_dir / f"{stem}.clean.cimg")
        meas = read_image(train_dir / f"{stem}.meas.cimg")
        if problem == KIND_DENOISE:
            problems.append(DenoisingProblem(meas))
        else:
            mask = read_mask(train_dir / f"{stem}.mask.cmsk")
            problems.append(MriProblem(meas, mask))
        images.append(clean)
    return images, problems


def cmd_train(args):
    cfg = load_config(args.config)
    problem = cfg.get("problem")
    if problem is None:
        raise ConfigError("config must set 'problem'")
    train_dir = args.train_dir or cfg.get("paths")
    if train_dir is None:
        raise ValueError("give --train-dir or set 'paths' in the config")
    images, problems = _training_pairs(train_dir, problem)
    tc = training_config_from_dict(cfg, problem)
    model, history = train_network(images, problems, problem, tc)
    write_model(args.out, model)
    if args.metrics:
        rows = [
            (layer_idx + 1, sweep, block, objective)
            for layer_idx, layer_rows in enumerate(history)
            for sweep, block, objective in layer_rows
        ]
        write_training_csv(args.metrics, rows)
    print(f"trained {model.n_layers} layer(s) on {len(images)} image(s) -> {args.out}")
    return 0


def cmd_recover(args):
    model = read_model(args.model)
    meas = read_image(args.measurement)
    if model.kind == KIND_DENOISE:
        problem = DenoisingProblem(meas)
    else:
        if args.mask is None:
            raise ValueError("k-space recovery needs --mask")
        problem = MriProblem(meas, read_mask(args.mask))
    x, trace = recover(model, problem)
    write_image(args.out, x)
    if args.metrics:
        reference = read_image(args.reference) if args.reference else None
        rows = []
        for i, (img, cost) in enumerate(zip(trace.images[1:], trace.costs)):
            value = psnr(img, reference) if reference is not None else float("nan")
            rows.append((i + 1, value, cost))
        write_metrics_csv(args.metrics, rows)
    print(f"recovered {args.measurement} -> {args.out}")
    return 0


def cmd_eval(args):
    recon = read_image(args.recon)
    ref = read_image(args.ref)
    value = psnr(recon, ref, peak=args.peak)
    print(f"{value:.6f} dB")
    return 0


def cli_main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main():
    raise SystemExit(cli_main())
