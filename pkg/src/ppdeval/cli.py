"""Command-line surface over the scenario runners.

Subcommands mirror the library runners one to one: ``contour``, ``delta``,
``clt-check``, ``expfam-table``, ``linreg-curves`` and ``logreg-table``.
Every command takes ``--seed``, ``--out`` and ``--format {csv,json}``; a
JSON config file mirroring the run-spec fields can supply estimation
budgets, with explicit flags taking precedence.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import scenarios as sc
from .conjugate import NaturalParams, SufficientSummary
from .snr import delta_exact, log10_snr_from_delta, snr_from_delta
from .vi import TrainConfig


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0, help="master RNG seed")
    parser.add_argument("--out", required=True, help="output file path")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--config", help="JSON file with run-spec fields")


def _runspec(args) -> sc.RunSpec:
    base = {}
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            base = json.load(fh)
    spec = sc.RunSpec.from_dict({**sc.RunSpec().to_dict(), **base})
    return spec.override(
        K_naive=getattr(args, "k_naive", None),
        K_is=getattr(args, "k_is", None),
        S=getattr(args, "s", None),
        runs=getattr(args, "runs", None),
        iters=getattr(args, "iters", None),
        learning_rate=getattr(args, "lr", None),
        M=getattr(args, "m", None),
        seed=args.seed,
    )


def _add_runspec_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--k-naive", type=int, help="inner samples, naive estimator")
    parser.add_argument("--k-is", type=int, help="inner samples, IS estimator")
    parser.add_argument("--s", type=int, help="outer replicates per run")
    parser.add_argument("--runs", type=int, help="independent runs per row")
    parser.add_argument("--iters", type=int, help="optimizer iterations")
    parser.add_argument("--lr", type=float, help="optimizer learning rate")
    parser.add_argument("--m", type=int, help="inner samples of the weighted bound")


def _grid(spec: str) -> np.ndarray:
    lo, hi, num = spec.split(":")
    return np.linspace(float(lo), float(hi), int(num))


def _cmd_contour(args) -> None:
    rows = sc.run_contour(
        args.model,
        _grid(args.means),
        _grid(args.sizes),
        K=args.k,
        train_mean=args.train_mean,
        train_size=args.train_size,
    )
    sc.write_rows(args.out, rows, args.format)


def _cmd_delta(args) -> None:
    model = sc.expfam_model(args.model)
    xi0 = sc.expfam_prior(args.model)
    if args.prior_tau is not None or args.prior_nu is not None:
        xi0 = NaturalParams(
            args.prior_tau if args.prior_tau is not None else float(xi0.tau[0]),
            args.prior_nu if args.prior_nu is not None else xi0.nu,
        )
    train = SufficientSummary(
        np.full(model.dim, args.train_mean * args.train_size), args.train_size, 0.0
    )
    test = SufficientSummary(
        np.full(model.dim, args.test_mean * args.test_size), args.test_size, 0.0
    )
    bd = delta_exact(model, xi0, train, test)
    rows = [
        {
            "model": args.model,
            "delta": bd.delta,
            "kl_left": bd.kl_left,
            "kl_right": bd.kl_right,
            "b_form": bd.b_form,
            "K": args.k,
            "snr": snr_from_delta(bd.delta, args.k),
            "log10_snr": (
                float("inf") if bd.delta == 0 else log10_snr_from_delta(bd.delta, args.k)
            ),
        }
    ]
    sc.write_rows(args.out, rows, args.format)


def _cmd_clt_check(args) -> None:
    dims = [int(d) for d in args.dims.split(",")]
    rows = sc.run_clt_check(dims, seed=args.seed, n_train=args.train_size)
    sc.write_rows(args.out, rows, args.format)


def _cmd_expfam_table(args) -> None:
    spec = _runspec(args)
    rows = []
    for name in args.models.split(","):
        scenario = sc.expfam_scenario(name.strip(), args.seed)
        rows.extend(sc.run_table(scenario, spec, mode=args.mode))
    sc.write_rows(args.out, rows, args.format)


def _cmd_linreg_curves(args) -> None:
    spec = _runspec(args)
    K_list = [int(k) for k in args.k_list.split(",")]
    cfg = TrainConfig(spec.iters, spec.learning_rate, spec.M, spec.iw_grad_batch, spec.seed)
    rows = sc.run_linreg_error_curves(
        [n.strip() for n in args.scenarios.split(",")],
        K_list,
        seed=args.seed,
        replicates=args.replicates,
        train_config=cfg,
    )
    sc.write_rows(args.out, rows, args.format)


def _cmd_logreg_table(args) -> None:
    spec = _runspec(args)
    rows = []
    for name in args.scenarios.split(","):
        scenario = sc.gen_logreg(name.strip(), args.seed)
        rows.extend(sc.run_table(scenario, spec, mode="approximate"))
    sc.write_rows(args.out, rows, args.format)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ppdeval",
        description="SNR analytics and learned-IS evaluation of predictive densities",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("contour", help="delta / SNR grid over synthetic test sets")
    _add_common(p)
    p.add_argument("--model", choices=sc.EXPFAM_MODEL_NAMES, required=True)
    p.add_argument("--means", default="0:20:41", help="test-mean grid lo:hi:num")
    p.add_argument("--sizes", default="0:200:41", help="test-size grid lo:hi:num")
    p.add_argument("--k", type=int, default=1, help="inner sample count for SNR")
    p.add_argument("--train-mean", type=float, default=10.0)
    p.add_argument("--train-size", type=int, default=100)
    p.set_defaults(func=_cmd_contour)

    p = sub.add_parser("delta", help="closed-form delta and SNR for one setting")
    _add_common(p)
    p.add_argument("--model", choices=sc.EXPFAM_MODEL_NAMES, required=True)
    p.add_argument("--train-mean", type=float, required=True)
    p.add_argument("--train-size", type=float, required=True)
    p.add_argument("--test-mean", type=float, required=True)
    p.add_argument("--test-size", type=float, required=True)
    p.add_argument("--prior-tau", type=float, help="override the default prior tau")
    p.add_argument("--prior-nu", type=float, help="override the default prior nu")
    p.add_argument("--k", type=int, default=1)
    p.set_defaults(func=_cmd_delta)

    p = sub.add_parser("clt-check", help="exact vs large-data delta by dimension")
    _add_common(p)
    p.add_argument("--dims", default="1,10,100,1000")
    p.add_argument("--train-size", type=int, default=1000)
    p.set_defaults(func=_cmd_clt_check)

    p = sub.add_parser("expfam-table", help="estimator comparison, scalar models")
    _add_common(p)
    _add_runspec_flags(p)
    p.add_argument("--models", default="normal,exp,binomial")
    p.add_argument("--mode", choices=("exact", "approximate"), default="exact")
    p.set_defaults(func=_cmd_expfam_table)

    p = sub.add_parser("linreg-curves", help="evaluation error vs sample count")
    _add_common(p)
    _add_runspec_flags(p)
    p.add_argument("--scenarios", default=",".join(sc.LINREG_SCENARIO_NAMES))
    p.add_argument("--k-list", default="1,10,100,1000,10000,100000,1000000")
    p.add_argument("--replicates", type=int, default=1000)
    p.set_defaults(func=_cmd_linreg_curves)

    p = sub.add_parser("logreg-table", help="estimator comparison, logistic model")
    _add_common(p)
    _add_runspec_flags(p)
    p.add_argument("--scenarios", default=",".join(sc.LOGREG_SCENARIO_NAMES))
    p.set_defaults(func=_cmd_logreg_table)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
