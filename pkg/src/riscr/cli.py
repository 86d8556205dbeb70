"""Command line front end.

Subcommands: optimize, sweep, gradcheck, reproduce-fig2, reproduce-fig3,
baseline-noris. A config file (key = value lines) supplies defaults; flags
override the file; --set handles any remaining key.
"""

from __future__ import annotations

import argparse
import itertools
import sys
from dataclasses import replace
from pathlib import Path

from .config import ExperimentConfig, known_keys, load_config
from .harness import (
    SUMMARY_LABEL,
    _converged_means,
    gradcheck,
    reproduce_fig2,
    reproduce_fig3,
    run_experiment,
    run_no_ris_baseline,
)


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="key = value config file")
    parser.add_argument("--seed", type=int, help="root seed (run.seed)")
    parser.add_argument("--method", choices=("pgm", "sca", "both"))
    parser.add_argument("--order", type=int, help="constellation order M")
    parser.add_argument("--kind", choices=("qam", "psk"), help="constellation kind")
    parser.add_argument("--sigma2-db", type=float, help="noise power in dB")
    parser.add_argument("--realizations", type=int, help="channel realizations")
    parser.add_argument("--n-noise", type=int, help="MI noise draws per iteration")
    parser.add_argument("--final-noise", type=int, help="MI noise draws at the final point")
    parser.add_argument("--mi-every", type=int, help="evaluate MI every k iterations (0 = final only)")
    parser.add_argument("--blocked", action=argparse.BooleanOptionalAction,
                        help="block the direct link")
    parser.add_argument("--L0", dest="l0", type=float, help="initial step scale")
    parser.add_argument("--delta", type=float, help="sufficient-decrease constant")
    parser.add_argument("--rho", type=float, help="backtracking shrink factor")
    parser.add_argument("--max-iters", type=int, help="gradient-method iteration cap")
    parser.add_argument("--rel-tol", type=float, help="relative-decrease stop threshold")
    parser.add_argument("--sca-outer-iters", type=int)
    parser.add_argument("--sca-inner-iters", type=int)
    parser.add_argument("--sca-tol", type=float, help="SCA outer relative tolerance")
    parser.add_argument(
        "--set",
        dest="extra",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help=f"set any config key directly (known keys: {', '.join(known_keys())})",
    )


_FLAG_TO_KEY = {
    "seed": "run.seed",
    "method": "run.method",
    "order": "modulation.order",
    "kind": "modulation.kind",
    "sigma2_db": "noise.sigma2_db",
    "realizations": "run.n_realizations",
    "n_noise": "run.n_noise",
    "final_noise": "run.final_noise",
    "mi_every": "run.mi_every",
    "blocked": "run.direct_blocked",
    "l0": "pgm.l0",
    "delta": "pgm.delta",
    "rho": "pgm.rho",
    "max_iters": "pgm.max_iters",
    "rel_tol": "pgm.rel_tol",
    "sca_outer_iters": "sca.outer_max_iters",
    "sca_inner_iters": "sca.inner_max_iters",
    "sca_tol": "sca.outer_rel_tol",
}


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    overrides = {}
    for flag, key in _FLAG_TO_KEY.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    for item in args.extra:
        if "=" not in item:
            raise SystemExit(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    return load_config(getattr(args, "config", None), overrides)


def _print_summary(records) -> None:
    means = _converged_means(records)
    for method in sorted(means):
        vals = means[method]
        print(
            f"{method:>12s}: R0 = {vals['r0']:.4f} bpcu, MI = {vals['mi']:.4f} bpcu "
            f"(stderr {vals['mi_stderr']:.4f}), gaussian rate = {vals['gaussian_rate']:.4f} bpcu"
        )


def _cmd_optimize(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    records = run_experiment(config, csv_path=args.out)
    n_rows = sum(1 for r in records if r.realization != SUMMARY_LABEL)
    print(f"{n_rows} iteration rows over {config.n_realizations} realizations")
    _print_summary(records)
    if args.out:
        print(f"wrote {args.out}")
    return 0


def _cmd_baseline(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    records = run_no_ris_baseline(config, csv_path=args.out)
    _print_summary(records)
    if args.out:
        print(f"wrote {args.out}")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    axes = []
    for item in args.grid:
        if "=" not in item:
            raise SystemExit(f"--grid expects KEY=V1,V2,..., got {item!r}")
        key, values = item.split("=", 1)
        axes.append([(key.strip(), v.strip()) for v in values.split(",")])
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for combo in itertools.product(*axes):
        saved = args.extra
        args.extra = saved + [f"{k}={v}" for k, v in combo]
        config = _config_from_args(args)
        args.extra = saved
        tag = "_".join(f"{k.split('.')[-1]}{v}" for k, v in combo) or "base"
        path = out_dir / f"sweep_{tag}.csv"
        records = run_experiment(config, csv_path=path, run_id=f"sweep-{tag}")
        print(f"[{tag}]")
        _print_summary(records)
        print(f"wrote {path}")
    return 0


def _cmd_gradcheck(args: argparse.Namespace) -> int:
    # small-instance defaults; --set/--config can override
    defaults = {
        "geometry.n_tx": "3",
        "geometry.n_rx": "2",
        "geometry.ris_rows": "2",
        "geometry.ris_cols": "2",
        "modulation.order": "2",
    }
    args.extra = [f"{k}={v}" for k, v in defaults.items()] + args.extra
    config = _config_from_args(args)
    report = gradcheck(config, n_points=args.points, step=args.step)
    print(
        f"gradcheck over {report.n_points} points: "
        f"max rel err theta = {report.max_rel_theta:.3e}, "
        f"P = {report.max_rel_p:.3e} (threshold {report.threshold:.1e})"
    )
    print("PASS" if report.passed else "FAIL")
    return 0 if report.passed else 1


def _cmd_fig2(args: argparse.Namespace) -> int:
    overrides = _reproduction_overrides(args)
    summary = reproduce_fig2(
        seed=args.seed,
        out_dir=args.out_dir,
        n_realizations=args.realizations,
        mi_every=args.mi_every,
        overrides=overrides,
    )
    for panel, methods in summary.items():
        print(f"panel: direct link {panel}")
        for method in sorted(methods):
            vals = methods[method]
            print(
                f"  {method:>10s}: R0 = {vals['r0']:.4f}, MI = {vals['mi']:.4f} "
                f"(stderr {vals['mi_stderr']:.4f})"
            )
    print(f"wrote CSVs to {args.out_dir}")
    return 0


def _cmd_fig3(args: argparse.Namespace) -> int:
    overrides = _reproduction_overrides(args)
    panels = tuple(args.panels.split(","))
    summary = reproduce_fig3(
        seed=args.seed,
        out_dir=args.out_dir,
        panels=panels,
        n_realizations=args.realizations,
        mi_every=args.mi_every,
        overrides=overrides,
    )
    for panel, methods in summary.items():
        print(f"panel: direct link {panel}")
        for method in sorted(methods):
            vals = methods[method]
            print(
                f"  {method:>10s}: MI = {vals['mi']:.4f} (stderr {vals['mi_stderr']:.4f}), "
                f"gaussian rate = {vals['gaussian_rate']:.4f}"
            )
    print(f"wrote CSVs to {args.out_dir}")
    return 0


def _reproduction_overrides(args: argparse.Namespace) -> dict:
    base = ExperimentConfig()
    overrides = {}
    if args.max_iters is not None:
        overrides["pgm"] = replace(base.pgm, max_iters=args.max_iters)
        overrides["sca"] = replace(base.sca, outer_max_iters=args.max_iters)
    if args.n_noise is not None:
        overrides["n_noise"] = args.n_noise
    if args.final_noise is not None:
        overrides["final_noise"] = args.final_noise
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riscr",
        description="Cutoff-rate optimization of precoding and surface phases",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_opt = sub.add_parser("optimize", help="run the configured experiment")
    _add_common_flags(p_opt)
    p_opt.add_argument("--out", type=Path, help="CSV output path")
    p_opt.set_defaults(func=_cmd_optimize)

    p_base = sub.add_parser("baseline-noris", help="run without the reflecting surface")
    _add_common_flags(p_base)
    p_base.add_argument("--out", type=Path, help="CSV output path")
    p_base.set_defaults(func=_cmd_baseline)

    p_sweep = sub.add_parser("sweep", help="grid over config keys")
    _add_common_flags(p_sweep)
    p_sweep.add_argument("--grid", action="append", default=[], metavar="KEY=V1,V2,...")
    p_sweep.add_argument("--out-dir", type=Path, default=Path("."))
    p_sweep.set_defaults(func=_cmd_sweep)

    p_grad = sub.add_parser("gradcheck", help="finite-difference gradient check")
    _add_common_flags(p_grad)
    p_grad.add_argument("--points", type=int, default=5)
    p_grad.add_argument("--step", type=float, default=1e-6)
    p_grad.set_defaults(func=_cmd_gradcheck)

    for name, fn in (("reproduce-fig2", _cmd_fig2), ("reproduce-fig3", _cmd_fig3)):
        p_fig = sub.add_parser(name, help=f"{name.replace('-', ' ')} experiment")
        p_fig.add_argument("--seed", type=int, default=1)
        p_fig.add_argument("--out-dir", type=Path, default=Path("."))
        p_fig.add_argument("--realizations", type=int, default=30)
        p_fig.add_argument("--mi-every", type=int, default=1)
        p_fig.add_argument("--max-iters", type=int)
        p_fig.add_argument("--n-noise", type=int)
        p_fig.add_argument("--final-noise", type=int)
        if name == "reproduce-fig3":
            p_fig.add_argument("--panels", default="present,blocked")
        p_fig.set_defaults(func=fn)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
