"""Command-line interface: bench, curves, approx-error, train.

Exit codes: 0 success, 1 runtime failure, 2 usage error. Every subcommand
prints its resolved configuration to stderr before doing work; data output
goes to stdout unless --out/--report is given, in which case the file is
written atomically (temp file + rename).
"""

from __future__ import annotations

import argparse
import os
import re
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import activations as act
from . import kernels, rsqrt
from .activations import ActivationKind, ActivationSpec, DomainError
from .nn import (
    OptimizerConfig,
    TrainingDiverged,
    build_architecture1,
    build_architecture2,
    load_mnist_dir,
    train,
)

# exact-tier names plus the bit-trick variants of the rsqrt family
_EXACT_NAMES = {
    "relu": ActivationKind.RELU,
    "isrlu": ActivationKind.ISRLU,
    "isru": ActivationKind.ISRU,
    "elu": ActivationKind.ELU,
    "tanh": ActivationKind.TANH,
    "isru-sigmoid": ActivationKind.ISRU_SIGMOID,
}
_APPROX_NAMES = {
    "isrlu-approx": ActivationKind.ISRLU,
    "isru-approx": ActivationKind.ISRU,
    "isru-sigmoid-approx": ActivationKind.ISRU_SIGMOID,
}

# published comparison's row order
_BENCH_DEFAULT = "relu,isru-approx,isrlu-approx,isrlu,elu"


def _allow_leading_minus_values(parser: argparse.ArgumentParser) -> None:
    # let values like -5:5 pass as arguments rather than being read as flags
    parser._negative_number_matcher = re.compile(r"^-\d")


def _echo_config(args: argparse.Namespace) -> None:
    pairs = ", ".join(f"{k}={v!r}" for k, v in sorted(vars(args).items()) if k != "func")
    print(f"config: {pairs}", file=sys.stderr)


def _write_out(path, text: str) -> None:
    """Atomic write: the target appears complete or not at all."""
    if path is None or path == "stdout":
        sys.stdout.write(text)
        return
    target = Path(path)
    fd, tmp = tempfile.mkstemp(dir=target.parent or Path("."), prefix=target.name + ".")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_range(text: str, parser):
    m = text.split(":")
    if len(m) != 2:
        parser.error(f"bad range {text!r}, expected LO:HI")
    try:
        lo, hi = float(m[0]), float(m[1])
    except ValueError:
        parser.error(f"bad range {text!r}, expected numeric LO:HI")
    return lo, hi


def _spec_for(name: str, alpha: float, parser) -> ActivationSpec:
    try:
        if name in _EXACT_NAMES:
            return ActivationSpec(_EXACT_NAMES[name], alpha=alpha)
        if name in _APPROX_NAMES:
            return ActivationSpec(
                _APPROX_NAMES[name], alpha=alpha, tier="approx", refinement_steps=0
            )
    except DomainError as e:
        parser.error(str(e))
    parser.error(
        f"unknown function {name!r}; choose from "
        + ",".join(sorted(_EXACT_NAMES) + sorted(_APPROX_NAMES))
    )


def _cmd_bench(args, parser) -> int:
    specs = [_spec_for(n.strip(), args.alpha, parser) for n in args.functions.split(",") if n.strip()]
    if not specs:
        parser.error("--functions must name at least one function")
    try:
        config = kernels.BenchConfig(
            n_elements=args.n,
            negative_fraction=args.negative_fraction,
            timed_runs=args.runs,
            seed=args.seed,
        )
    except DomainError as e:
        parser.error(str(e))
    _echo_config(args)
    report = kernels.run_bench(config, specs)
    style = "markdown" if args.format in ("md", "markdown") else "csv"
    text = kernels.format_report(report, style)
    _write_out(args.out, text)
    print(f"platform: {report.platform_note}", file=sys.stderr)
    return 0


def _cmd_curves(args, parser) -> int:
    if args.preset == "fig1":
        names = ["isrlu", "isrlu", "elu", "relu"]
        alphas = [1.0, 3.0, 1.0, 1.0]
        derivatives = True
    elif args.preset == "fig2":
        names = ["isru", "tanh"]
        alphas = [1.0, 1.0]
        derivatives = args.derivatives
    else:
        names = [n.strip() for n in args.functions.split(",") if n.strip()]
        alphas = []
        if args.alpha:
            for a in str(args.alpha).split(","):
                try:
                    alphas.append(float(a))
                except ValueError:
                    parser.error(f"bad alpha value {a!r}")
        derivatives = args.derivatives
    if not names:
        parser.error("no functions selected")
    for n in names:
        if n not in _EXACT_NAMES:
            parser.error(f"curves supports exact functions only, got {n!r}")
    while len(alphas) < len(names):
        alphas.append(1.0)

    lo, hi = _parse_range(args.range, parser)
    if args.step <= 0:
        parser.error(f"--step must be > 0, got {args.step}")
    if hi < lo:
        parser.error(f"empty range {args.range!r}")
    _echo_config(args)

    count = int(np.floor((hi - lo) / args.step + 1e-9)) + 1
    xs = lo + args.step * np.arange(count)

    cols = [("x", xs)]
    for name, alpha in zip(names, alphas):
        kind = _EXACT_NAMES[name]
        tag = name if kind in act.ALPHA_FREE_KINDS else f"{name}_a{alpha:g}"
        cols.append((tag, np.asarray(act.forward(kind, xs, alpha))))
        if derivatives:
            cols.append((tag + "_prime", np.asarray(act.derivative(kind, xs, alpha))))

    lines = [",".join(c[0] for c in cols)]
    for i in range(count):
        lines.append(",".join(f"{c[1][i]:.10g}" for c in cols))
    _write_out(args.out, "\n".join(lines) + "\n")
    return 0


def _cmd_approx_error(args, parser) -> int:
    try:
        magic = int(args.magic, 0)
    except ValueError:
        parser.error(f"bad magic constant {args.magic!r}; expected an integer like 0x5F375A86")
    iters = []
    for part in args.iters.split(","):
        part = part.strip()
        if part not in ("0", "1", "2"):
            parser.error(f"--iters entries must be 0, 1 or 2, got {part!r}")
        iters.append(int(part))
    lo, hi = _parse_range(args.range, parser)
    _echo_config(args)
    try:
        for k in iters:
            policy = rsqrt.ApproxPolicy(magic=magic, nr_steps=k)
            rep = rsqrt.measure_error(policy, lo, hi, args.samples)
            print(
                f"nr_steps={k}: max relative error {rep.max_rel_error:.6e} "
                f"({rep.accurate_bits:.2f} accurate bits) over [{rep.lo:g}, {rep.hi:g}], "
                f"{rep.samples} samples"
            )
    except DomainError as e:
        parser.error(str(e))
    return 0


def _cmd_train(args, parser) -> int:
    name = args.activation
    if name not in _EXACT_NAMES:
        parser.error(f"unknown activation {name!r}")
    tier_map = {
        "exact": ("exact", 0),
        "approx0": ("approx", 0),
        "approx1": ("approx", 1),
        "approx2": ("approx", 2),
    }
    if args.tier not in tier_map:
        parser.error(f"bad tier {args.tier!r}")
    tier, steps = tier_map[args.tier]
    try:
        spec = ActivationSpec(
            _EXACT_NAMES[name], alpha=args.alpha, tier=tier, refinement_steps=steps
        )
        if args.arch == 1:
            config = build_architecture1(spec, args.pkeep, args.learnable_alpha)
        else:
            config = build_architecture2(
                spec, args.pkeep_conv, args.pkeep_fc, args.learnable_alpha
            )
        optimizer = OptimizerConfig(
            lr_start=args.lr_start, lr_end=args.lr_end, batch_size=args.batch
        )
    except DomainError as e:
        parser.error(str(e))
    if args.epochs < 0:
        parser.error("--epochs must be >= 0")
    _echo_config(args)

    try:
        data = load_mnist_dir(args.data_dir)
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    try:
        report = train(
            config,
            optimizer,
            data,
            epochs=args.epochs,
            seed=args.seed,
            log=lambda msg: print(msg),
        )
    except TrainingDiverged as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    if report.epochs:
        best = max(e.test_accuracy for e in report.epochs)
        print(f"max test accuracy {best:.2f}% over {len(report.epochs)} epochs")
    if args.report:
        _write_out(args.report, report.to_csv())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isrukit",
        description="Inverse-square-root activation toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="time batched activation kernels")
    b.add_argument("--functions", default=_BENCH_DEFAULT,
                   help=f"comma list of kernels to time (default: {_BENCH_DEFAULT})")
    b.add_argument("--alpha", type=float, default=1.0, help="alpha for alpha-using functions")
    b.add_argument("--n", type=int, default=1 << 24, help="elements per buffer")
    b.add_argument("--negative-fraction", type=float, default=0.5,
                   help="fraction of negative inputs (default 0.5)")
    b.add_argument("--runs", type=int, default=10, help="timed runs per function")
    b.add_argument("--format", choices=("md", "markdown", "csv"), default="md")
    b.add_argument("--seed", type=int, default=42)
    b.add_argument("--out", default="stdout", help="output path or 'stdout'")
    b.set_defaults(func=_cmd_bench)

    c = sub.add_parser("curves", help="emit activation curves as CSV")
    _allow_leading_minus_values(c)
    c.add_argument("--functions", default="isrlu",
                   help="comma list of exact functions")
    c.add_argument("--alpha", default=None,
                   help="comma list of alphas, matched to --functions by position")
    c.add_argument("--range", default="-5:5", help="LO:HI inclusive (default -5:5)")
    c.add_argument("--step", type=float, default=0.01)
    c.add_argument("--derivatives", action="store_true", help="also emit f' columns")
    c.add_argument("--preset", choices=("fig1", "fig2"), default=None,
                   help="fig1: isrlu a=1/a=3, elu, relu with derivatives; fig2: isru vs tanh")
    c.add_argument("--out", default="stdout")
    c.set_defaults(func=_cmd_curves)

    a = sub.add_parser("approx-error", help="measure fast-rsqrt accuracy per iteration count")
    _allow_leading_minus_values(a)
    a.add_argument("--iters", default="0,1,2", help="comma list of Newton step counts")
    a.add_argument("--range", default="1e-3:1e3", help="scan range LO:HI")
    a.add_argument("--samples", type=int, default=1_000_000)
    a.add_argument("--magic", default=hex(rsqrt.DEFAULT_MAGIC),
                   help="initial-estimate constant (hex or decimal)")
    a.set_defaults(func=_cmd_approx_error)

    t = sub.add_parser("train", help="train a CNN on MNIST")
    t.add_argument("--arch", type=int, choices=(1, 2), default=1)
    t.add_argument("--activation", default="isrlu",
                   help="isrlu|isru|elu|relu|tanh|isru-sigmoid")
    t.add_argument("--alpha", type=float, default=1.0)
    t.add_argument("--learnable-alpha", action="store_true",
                   help="learn alpha jointly with the weights")
    t.add_argument("--tier", default="exact", help="exact|approx0|approx1|approx2")
    t.add_argument("--pkeep", type=float, default=0.4, help="dropout keep probability (arch 1)")
    t.add_argument("--pkeep-conv", type=float, default=0.7, help="conv dropout keep (arch 2)")
    t.add_argument("--pkeep-fc", type=float, default=0.4, help="fc dropout keep (arch 2)")
    t.add_argument("--epochs", type=int, default=17)
    t.add_argument("--batch", type=int, default=100)
    t.add_argument("--lr-start", type=float, default=0.003)
    t.add_argument("--lr-end", type=float, default=0.0001)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--data-dir", default="data/mnist",
                   help="directory holding the four IDX files")
    t.add_argument("--report", default=None, help="write per-epoch CSV here")
    t.set_defaults(func=_cmd_train)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, parser)
    except (DomainError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
