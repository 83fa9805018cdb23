"""Command-line interface: kernel queries and experiment drivers.

Every command writes CSV (17 significant digits, LF line endings, header
row) or JSON, plus a JSON manifest for the experiment commands.  Output
bytes are fully determined by the configuration and seed list.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 I/O error.  The env var NTKLN_SEED sets the default seed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .activations import activation as make_activation
from .activations import hermite_coeffs, kappa_series
from .arch import make_arch
from .errors import ConfigError, NtklnError, NumericalError
from .experiments import (
    FIG_VARIANTS,
    FiniteNetRegressor,
    ToyDatasetConfig,
    heatmap_experiment,
    make_toy_dataset,
    multi_seed_scan,
)
from .kernel import limit_ntk_ratio, ntk, variance_curve
from .regression import NTKRegressor


def _fmt(v) -> str:
    return f"{float(v):.17g}"


def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) if isinstance(v, (int, float, np.floating))
                              else str(v) for v in row) + "\n")


def _write_json(path: str, payload) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _config_hash(cfg: dict) -> str:
    return hashlib.sha256(
        json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]


def _write_manifest(path: str, command: str, cfg: dict, seeds, outputs,
                    wall_time: float) -> None:
    _write_json(path, {
        "command": command,
        "config": cfg,
        "config_hash": _config_hash(cfg),
        "seeds": list(seeds),
        "outputs": list(outputs),
        "version": __version__,
        "wall_time_s": wall_time,
    })


def _parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(tok) for tok in text.split(",") if tok != ""])
    except ValueError:
        raise ConfigError(f"cannot parse vector {text!r}") from None


def _parse_floats(text: str) -> list:
    return [float(tok) for tok in text.split(",") if tok != ""]


def _default_seed() -> int:
    return int(os.environ.get("NTKLN_SEED", "0"))


def _seed_list(args) -> list:
    if getattr(args, "seed_list", None):
        return sorted(int(s) for s in args.seed_list.split(","))
    base = _default_seed()
    return list(range(base, base + args.seeds))


def _arch_from_args(args, input_dim: int):
    activation, depth = args.activation, args.depth
    if getattr(args, "arch", None):
        token = args.arch
        if ":" in token:
            activation, raw = token.rsplit(":", 1)
            depth = int(raw)
        else:
            activation = token
    if args.sigma_b <= 0:
        raise ConfigError("sigma_b must be positive (degenerate kernel at 0)")
    return make_arch(input_dim=input_dim, depth=depth, activation=activation,
                     ln=args.ln, sigma_b=args.sigma_b,
                     width=getattr(args, "width", 128))


def _add_arch_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--arch", help="activation[:depth] shorthand, e.g. relu:2")
    p.add_argument("--activation", default="relu")
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--ln", default=None,
                   help="LN placement: none|first|last|every or stage indices")
    p.add_argument("--sigma-b", dest="sigma_b", type=float, default=0.1)
    p.add_argument("--width", type=int, default=128)


def _add_common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", default=None, help="output file path")
    p.add_argument("--config", default=None,
                   help="key=value config file; command-line flags win")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ntkln",
        description="Infinite-width NTK kernels, bounds, and experiments "
                    "for fully-connected networks with Layer Norm")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kernel", help="evaluate Theta(x, x')")
    _add_arch_flags(p)
    _add_common_flags(p)
    p.add_argument("--x", required=True, help="comma-separated input vector")
    p.add_argument("--xp", required=True, help="comma-separated input vector")

    p = sub.add_parser("heatmap", help="seed-averaged empirical NTK grid")
    _add_arch_flags(p)
    _add_common_flags(p)
    p.add_argument("--grid-lo", type=float, default=-25.0)
    p.add_argument("--grid-hi", type=float, default=25.0)
    p.add_argument("--grid-step", type=float, default=2.0)
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--seed-list", default=None)
    p.add_argument("--parametrisation", choices=("ntk", "standard"),
                   default="ntk")

    p = sub.add_parser("variance-curve", help="Theta(x,x) along one direction")
    _add_arch_flags(p)
    _add_common_flags(p)
    p.add_argument("--direction", default="1")
    p.add_argument("--norms", default=None,
                   help="comma-separated norms (default log grid to 1e6)")

    p = sub.add_parser("homogeneity", help="Theta(lx,lx')/l^(2n^L) scan")
    _add_arch_flags(p)
    _add_common_flags(p)
    p.add_argument("--x", default="1")
    p.add_argument("--xp", default=None)
    p.add_argument("--lambdas", default="1e2,1e3,1e4,1e5,1e6")

    p = sub.add_parser("fit-predict", help="GP posterior mean on a toy dataset")
    _add_arch_flags(p)
    _add_common_flags(p)
    p.add_argument("--dataset", choices=("sine", "linear", "quadratic"),
                   required=True)
    p.add_argument("--scan-lo", type=float, default=-15.0)
    p.add_argument("--scan-hi", type=float, default=15.0)
    p.add_argument("--scan-points", type=int, default=61)

    p = sub.add_parser("bound-check", help="bound certificate scan report")
    _add_arch_flags(p)
    _add_common_flags(p)
    p.add_argument("--dataset", choices=("sine", "linear", "quadratic"),
                   required=True)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("train-toy", help="train finite nets, scan predictions")
    _add_common_flags(p)
    p.add_argument("--dataset", choices=("sine", "linear", "quadratic"),
                   required=True)
    p.add_argument("--arch", choices=tuple(FIG_VARIANTS), default="standard",
                   help="LN placement variant")
    p.add_argument("--width", type=int, default=128)
    p.add_argument("--sigma-b", dest="sigma_b", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=3000)
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--seed-list", default=None)
    p.add_argument("--scan-lo", type=float, default=-15.0)
    p.add_argument("--scan-hi", type=float, default=15.0)
    p.add_argument("--scan-points", type=int, default=61)

    p = sub.add_parser("hermite", help="truncated Hermite series for kappa")
    _add_common_flags(p)
    p.add_argument("--activation", default="relu")
    p.add_argument("--order", type=int, default=40)
    p.add_argument("--rho", type=float, required=True)

    return parser


def _apply_config_file(argv: list) -> list:
    """Insert config-file entries before user flags so flags win."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        raise ConfigError("--config requires a path")
    path = argv[idx + 1]
    try:
        lines = open(path).read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    extra = []
    for line in lines:
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"config line {line!r} is not key=value")
        key, value = line.split("=", 1)
        extra.extend([f"--{key.strip().replace('_', '-')}", value.strip()])
    return [argv[0]] + extra + argv[1:]


def cmd_kernel(args) -> list:
    x = _parse_vector(args.x)
    xp = _parse_vector(args.xp)
    if len(x) != len(xp):
        raise ConfigError("--x and --xp must have equal length")
    arch = _arch_from_args(args, input_dim=len(x))
    theta = ntk(arch, x, xp)
    out = args.out or "kernel.csv"
    _write_csv(out, ["x", "x_prime", "theta"],
               [[";".join(_fmt(v) for v in x),
                 ";".join(_fmt(v) for v in xp), theta]])
    return [out]


def cmd_heatmap(args) -> list:
    arch = _arch_from_args(args, input_dim=1)
    n = int(round((args.grid_hi - args.grid_lo) / args.grid_step)) + 1
    grid = args.grid_lo + args.grid_step * np.arange(n)
    seeds = _seed_list(args)
    grid, mean, std, analytic = heatmap_experiment(
        arch, grid, seeds, parametrisation=args.parametrisation)
    out = args.out or "heatmap.csv"
    rows = []
    for i, a in enumerate(grid):
        for j, b in enumerate(grid):
            rows.append([a, b, mean[i, j], std[i, j], len(seeds)])
    _write_csv(out, ["x", "x_prime", "theta_mean", "theta_std", "n_seeds"], rows)
    ana_out = out.replace(".csv", "_analytic.csv")
    _write_csv(ana_out, ["x", "x_prime", "theta_mean", "theta_std", "n_seeds"],
               [[a, b, analytic[i, j], 0.0, 0]
                for i, a in enumerate(grid) for j, b in enumerate(grid)])
    return [out, ana_out]


def cmd_variance_curve(args) -> list:
    direction = _parse_vector(args.direction)
    arch = _arch_from_args(args, input_dim=len(direction))
    norms = _parse_floats(args.norms) if args.norms else \
        list(np.logspace(-2, 6, 33))
    vals = variance_curve(arch, direction, norms)
    out = args.out or "variance.csv"
    _write_csv(out, ["norm", "theta_xx"], list(zip(norms, vals)))
    return [out]


def cmd_homogeneity(args) -> list:
    x = _parse_vector(args.x)
    xp = _parse_vector(args.xp) if args.xp else x.copy()
    arch = _arch_from_args(args, input_dim=len(x))
    lambdas = _parse_floats(args.lambdas)
    ratios = limit_ntk_ratio(arch, x, xp, lambdas)
    out = args.out or "homogeneity.csv"
    _write_csv(out, ["lambda", "ratio"], list(zip(lambdas, ratios)))
    return [out]


def cmd_fit_predict(args) -> list:
    arch_args = _arch_from_args(args, input_dim=1)
    ds = make_toy_dataset(ToyDatasetConfig(kind=args.dataset))
    model = NTKRegressor(depth=arch_args.depth, activation=arch_args.activation,
                         ln=arch_args.ln_positions, sigma_b=arch_args.sigma_b)
    model.fit(ds.X, ds.y)
    xs = np.linspace(args.scan_lo, args.scan_hi, args.scan_points)
    preds = model.predict(xs.reshape(-1, 1))
    out = args.out or "fit_predict.csv"
    _write_csv(out, ["x", "mean", "ci_half_width"],
               [[x, p, 0.0] for x, p in zip(xs, preds)])
    train_out = out.replace(".csv", "_train.csv")
    _write_csv(train_out, ["x", "y"],
               list(zip(ds.X.ravel(), ds.y)))
    return [out, train_out]


def cmd_bound_check(args) -> list:
    arch = _arch_from_args(args, input_dim=1)
    if not arch.has_ln:
        raise ConfigError("bound-check requires at least one LN placement")
    ds = make_toy_dataset(ToyDatasetConfig(kind=args.dataset))
    model = NTKRegressor(depth=arch.depth, activation=arch.activation,
                         ln=arch.ln_positions, sigma_b=arch.sigma_b)
    model.fit(ds.X, ds.y)
    seed = args.seed if args.seed is not None else _default_seed()
    report = model.cross_norm_bound_check(seed=seed)
    report["max_scanned_mean_le_bound_rkhs"] = \
        report["max_abs_mean"] <= report["bound_rkhs"] + 1e-9
    report["dataset"] = args.dataset
    report["lambda_min"] = model.lambda_min_
    report["variance_constant"] = model.variance_constant_
    out = args.out or "bound_check.json"
    _write_json(out, report)
    return [out]


def cmd_train_toy(args) -> list:
    ds = make_toy_dataset(ToyDatasetConfig(kind=args.dataset))
    xs = np.linspace(args.scan_lo, args.scan_hi, args.scan_points)
    seeds = _seed_list(args)
    ln = FIG_VARIANTS[args.arch]

    def make_and_fit(seed):
        model = FiniteNetRegressor(depth=2, width=args.width, activation="relu",
                                   ln=ln, sigma_b=args.sigma_b,
                                   parametrisation="standard",
                                   learning_rate=args.learning_rate,
                                   epochs=args.epochs, seed=seed)
        return model.fit(ds.X, ds.y)

    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            fitted = dict(zip(sorted(seeds),
                              pool.map(make_and_fit, sorted(seeds))))
        mean, ci = multi_seed_scan(lambda s: fitted[s], xs.reshape(-1, 1), seeds)
    else:
        mean, ci = multi_seed_scan(make_and_fit, xs.reshape(-1, 1), seeds)
    out = args.out or "train_toy.csv"
    _write_csv(out, ["x", "mean", "ci_half_width"],
               list(zip(xs, mean, ci)))
    train_out = out.replace(".csv", "_train.csv")
    _write_csv(train_out, ["x", "y"], list(zip(ds.X.ravel(), ds.y)))
    return [out, train_out]


def cmd_hermite(args) -> list:
    act = make_activation(args.activation)
    exp = hermite_coeffs(act, args.order)
    value = kappa_series(exp, args.rho)
    payload = {
        "activation": args.activation,
        "order": args.order,
        "rho": args.rho,
        "series": value,
    }
    if act._arccos_alpha is not None or act.name == "identity":
        closed = float(act.kappa(args.rho))
        payload["closed_form"] = closed
        payload["abs_error"] = abs(closed - value)
    out = args.out or "hermite.json"
    _write_json(out, payload)
    return [out]


_COMMANDS = {
    "kernel": cmd_kernel,
    "heatmap": cmd_heatmap,
    "variance-curve": cmd_variance_curve,
    "homogeneity": cmd_homogeneity,
    "fit-predict": cmd_fit_predict,
    "bound-check": cmd_bound_check,
    "train-toy": cmd_train_toy,
    "hermite": cmd_hermite,
}

# Commands that ship a run manifest next to their outputs.
_MANIFEST_COMMANDS = ("heatmap", "variance-curve", "homogeneity",
                      "fit-predict", "bound-check", "train-toy", "hermite")


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config_file(argv)
        args = parser.parse_args(argv)
        start = time.time()
        outputs = _COMMANDS[args.command](args)
        if args.command in _MANIFEST_COMMANDS:
            cfg = {k: v for k, v in sorted(vars(args).items())
                   if k not in ("command", "config") and v is not None}
            seeds = _seed_list(args) if hasattr(args, "seeds") else \
                [getattr(args, "seed", None) or _default_seed()]
            manifest_path = outputs[0].rsplit(".", 1)[0] + "_manifest.json"
            _write_manifest(manifest_path, args.command, cfg, seeds,
                            outputs, round(time.time() - start, 3))
            outputs.append(manifest_path)
        for path in outputs:
            print(path)
        return 0
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except NtklnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
