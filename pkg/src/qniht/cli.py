"""Command-line entry point ``qniht``.

Exit status: 0 on success, 1 on invalid usage or input, 2 on a runtime failure.
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from . import __version__
from .experiments import RUNNERS, CertificationError, load_config, parse_bit_pairs
from .linalg import DimensionError, DomainError, MeasurementMatrix, Observation, read_matrix, write_matrix
from .niht import RecoveryConfig, LowPrecision, niht_recover, qniht_recover
from .quantize import LEVEL_MODES, QuantizerConfig, quantize_tensor, write_quantized

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _key_value(text: str) -> tuple[str, str]:
    key, sep, val = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    return key.strip(), val


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qniht", description="Sparse recovery with full- and low-precision NIHT.")
    p.add_argument("--version", action="version", version=f"qniht {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def experiment(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="flat key=value config file")
        sp.add_argument("--set", action="append", type=_key_value, default=[], metavar="KEY=VALUE",
                        help="override one config key (repeatable)")
        sp.add_argument("--seed", type=int, help="master seed (overrides the config)")
        sp.add_argument("--out", default=".", help="output directory")
        return sp

    experiment("gaussian", "recovery on iid Gaussian matrices")
    sky = experiment("sky", "simulated sky: NIHT, QNIHT and CLEAN")
    sky.add_argument("--full", action="store_true", help="256x256 pixels, 30 antennas")
    sweep = experiment("rip-sweep", "gamma and certified bit width over d or L")
    sweep.add_argument("--param", choices=("d", "L"))
    sweep.add_argument("--values", help="start:stop:count or a comma list")
    experiment("bound-check", "empirical error against the theoretical bounds")

    rec = sub.add_parser("recover", help="recover a sparse vector from matrix and observation files")
    rec.add_argument("--phi", required=True, help="matrix file")
    rec.add_argument("--y", required=True, help="observation file (N=1 matrix)")
    rec.add_argument("--s", type=int, required=True, help="sparsity")
    rec.add_argument("--bits", help="b_phi,b_y for low precision; omit for full precision")
    rec.add_argument("--mode", choices=LEVEL_MODES, default="power2")
    rec.add_argument("--step-matrix", choices=("quantized", "full"), default="quantized")
    rec.add_argument("--max-iter", type=int, default=500)
    rec.add_argument("--tol", type=float, default=1e-6)
    rec.add_argument("--seed", type=int, default=0)
    rec.add_argument("--out", default=".", help="output directory")

    q = sub.add_parser("quantize", help="stochastically quantize a matrix file")
    q.add_argument("input", help="matrix file")
    q.add_argument("output", help="packed output file")
    q.add_argument("--bits", type=int, required=True)
    q.add_argument("--mode", choices=LEVEL_MODES, default="power2")
    q.add_argument("--seed", type=int, default=0)
    return p


def _run_experiment(args) -> int:
    overrides = dict(args.set)
    overrides["kind"] = args.command
    if args.seed is not None:
        overrides["seed"] = str(args.seed)
    if getattr(args, "full", False):
        overrides["full"] = "true"
    for name in ("param", "values"):
        if getattr(args, name, None) is not None:
            overrides[name] = getattr(args, name)
    cfg = load_config(args.config, overrides)
    out = Path(args.out)
    RUNNERS[cfg.kind](cfg, out)
    print(f"wrote results to {out}")
    return EXIT_OK


def _run_recover(args) -> int:
    phi = MeasurementMatrix(read_matrix(args.phi))
    yv = read_matrix(args.y)
    if yv.shape[1] != 1:
        raise DimensionError("observation file must hold a single column")
    y = Observation(yv[:, 0])
    prec = None
    if args.bits:
        (bp, by), = parse_bit_pairs(args.bits)
        if not math.isinf(bp):
            prec = LowPrecision(bp, by, args.mode, args.seed, args.step_matrix)
    cfg = RecoveryConfig(args.s, args.max_iter, tol=args.tol, precision=prec)
    rep = qniht_recover(phi, y, cfg) if prec else niht_recover(phi, y, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix(out / "estimate.bin", rep.estimate.densify())
    with open(out / "report.csv", "w") as fh:
        rep.to_csv(fh, header_comment=f"qniht {__version__} s={args.s} bits={args.bits or 'full'} seed={args.seed}")
    print(f"{rep.iterations} iterations, converged={rep.converged}, support={list(map(int, rep.estimate.support))}")
    return EXIT_OK


def _run_quantize(args) -> int:
    a = read_matrix(args.input)
    q = quantize_tensor(a, QuantizerConfig(args.bits, args.mode, args.seed))
    write_quantized(args.output, q)
    print(f"{q.rows}x{q.cols} -> {q.nbytes()} bytes, scale {q.scale!r}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"qniht: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return EXIT_OK if not exc.code else EXIT_USAGE
    try:
        if args.command == "recover":
            return _run_recover(args)
        if args.command == "quantize":
            return _run_quantize(args)
        return _run_experiment(args)
    except (DomainError, DimensionError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"qniht: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CertificationError, ArithmeticError, RuntimeError, OSError, MemoryError) as exc:
        print(f"qniht: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
