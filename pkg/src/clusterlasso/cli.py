"""Command-line interface.

Subcommands: gen (emit one design instance), solve (one penalized solve from
files), constants (print the constants table), verify (assumptions + events
on one trial), experiment (full Monte Carlo run), report (recompute summary
and CSV from persisted trial records).

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import harness, lasso, proxy, theory
from .mixture import DesignInstance, rng_from_key, sample_design
from .proxy import GroundTruth
from .serialize import SCHEMA_VERSION, dump_json, load_json

USAGE_EXIT = 1
RUNTIME_EXIT = 2


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage problems; the interface promises 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(USAGE_EXIT)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="clusterlasso", description=__doc__)
    sub = parser.add_subparsers(dest="command")

    gen = sub.add_parser("gen", help="draw one design instance to JSON")
    _config_args(gen)
    gen.add_argument("--trial", type=int, default=0)
    gen.add_argument("--out", required=True, help="design JSON path")
    gen.add_argument(
        "--by-seed", action="store_true",
        help="reference the deviations by seed instead of embedding them",
    )
    gen.add_argument("--with-truth", help="also draw a truth record to this path")

    solve = sub.add_parser("solve", help="solve one instance from files")
    solve.add_argument("--design", required=True, help="design JSON from gen")
    solve.add_argument("--truth", required=True, help="truth JSON from gen")
    solve.add_argument("--centers", help="centers file when the design is by seed")
    _config_args(solve, required=False)
    solve.add_argument("--lam", type=float, help="override the default level")
    solve.add_argument("--tol", type=float, default=1e-9)
    solve.add_argument("--max-iter", type=int, default=50000)
    solve.add_argument("--out", help="solution JSON path (default stdout)")

    const = sub.add_parser("constants", help="print the constants table")
    _config_args(const)
    const.add_argument("--s", type=int, help="true support size (default n_active)")

    verify = sub.add_parser("verify", help="assumptions and events on one trial")
    _config_args(verify)
    verify.add_argument("--trial", type=int, default=0)

    exp = sub.add_parser("experiment", help="run the full Monte Carlo experiment")
    _config_args(exp)
    exp.add_argument("--trials", type=int, help="override trial count")
    exp.add_argument("--seed", type=int, help="override master seed")
    exp.add_argument("--out", help="output directory")

    rep = sub.add_parser("report", help="recompute summary and CSV from records")
    _config_args(rep)
    rep.add_argument("--records", required=True, help="trials.jsonl path")
    rep.add_argument("--out", required=True, help="output directory")
    return parser


def _config_args(sub, required: bool = True):
    sub.add_argument("--config", required=required, help="experiment config (INI)")
    sub.add_argument(
        "--override", action="append", default=[], metavar="SECTION.KEY=VALUE",
        help="override one config entry (repeatable)",
    )


def _load(args) -> harness.ExperimentConfig:
    return harness.load_config(args.config, args.override)


def _cmd_gen(args) -> int:
    config = _load(args)
    centers = harness.resolve_centers(config, args.trial)
    key = (config.master_seed, args.trial, harness.TAG_DESIGN)
    instance = sample_design(config.spec, centers, rng_from_key(*key), seed_key=key)
    doc = instance.to_dict(config.spec, embed=not args.by_seed)
    dump_json(doc, args.out)
    print(f"design instance written to {args.out}")
    if args.with_truth:
        truth = proxy.sample_ground_truth(
            instance,
            config.s,
            config.truth_rule,
            config.sigma,
            rng_from_key(config.master_seed, args.trial, harness.TAG_TRUTH),
        )
        dump_json(truth.to_dict(), args.with_truth)
        print(f"ground truth written to {args.with_truth}")
    return 0


def _cmd_solve(args) -> int:
    design_doc = load_json(args.design)
    if args.centers:
        centers = harness.load_centers_file(args.centers)
    elif args.config:
        # the design's seed key carries its trial index, which pins the
        # centers stream even under per-trial redraw
        key = design_doc.get("seed_key") or [0, 0]
        trial = int(key[1]) if len(key) > 1 else 0
        centers = harness.resolve_centers(_load(args), trial)
    else:
        raise ValueError("need --centers or --config to rebuild the centers")
    instance = DesignInstance.from_dict(design_doc, centers)
    truth = GroundTruth.from_dict(load_json(args.truth), instance)
    lam = args.lam
    if lam is None:
        alpha = _load(args).params.alpha if args.config else 1.0
        lam = lasso.default_lambda(truth.sigma, alpha, instance.p)
    solution = lasso.solve(
        instance.design, truth.response, lam, tol=args.tol, max_iter=args.max_iter
    )
    doc = {
        "schema_version": SCHEMA_VERSION,
        "kind": "solution",
        "lam": lam,
        "objective": solution.objective,
        "duality_gap": solution.duality_gap,
        "kkt_infinity": solution.kkt_infinity,
        "iterations": solution.iterations,
        "polished": solution.polished,
        "backend": solution.backend,
        "support": solution.support.tolist(),
        "values": solution.beta_hat[solution.support].tolist(),
        "prediction_error": lasso.prediction_error(
            instance.design, truth.beta, solution.beta_hat
        ),
    }
    if args.out:
        dump_json(doc, args.out)
        print(f"solution written to {args.out}")
    else:
        json.dump(doc, sys.stdout, indent=2)
        print()
    return 0


def _cmd_constants(args) -> int:
    config = _load(args)
    s = args.s if args.s is not None else config.s
    constants = theory.compute_constants(config.spec, config.params, s=s)
    rows = theory.constants_table(constants)
    name_w = max(len(r[0]) for r in rows)
    formula_w = max(len(r[1]) for r in rows)
    print(f"{'name':<{name_w}}  {'formula':<{formula_w}}  value")
    for name, formula, value in rows:
        print(f"{name:<{name_w}}  {formula:<{formula_w}}  {value!r}")
    return 0


def _cmd_verify(args) -> int:
    config = _load(args)
    record = harness.run_trial(config, args.trial)
    if record.get("error"):
        print(f"trial {args.trial} failed: {record['error']}", file=sys.stderr)
        return RUNTIME_EXIT
    print(f"trial {args.trial}  (seed key {record['seed_key']})")
    print(
        f"prediction error {record['prediction_error']!r}  "
        f"bound rhs {record['bound_rhs']!r}  holds={record['bound_holds']}"
    )
    print(
        f"empirical delta {record['delta_empirical']!r}  "
        f"analytic delta {record['delta_analytic']!r}"
    )
    print("events:")
    for name, ev in record["events"].items():
        extra = "  SINGULAR" if ev.get("singular") else ""
        print(
            f"  {name:<16} measured={ev['measured']!r} "
            f"threshold={ev['threshold']!r} holds={ev['holds']}{extra}"
        )
    print("assumptions:")
    for a in record["assumptions"]:
        state = "pass" if a["satisfied"] else "FAIL"
        note = f"  ({a['note']})" if a["note"] else ""
        print(f"  {a['index']:>2} {a['name']:<24} {state}  margin={a['margin']!r}{note}")
    dec = record["decomposition"]
    print(
        "decomposition norms: "
        f"a={dec['norm_a']!r} b={dec['norm_b']!r} "
        f"a*={dec['norm_a_star']!r} b*={dec['norm_b_star']!r}"
    )
    return 0


def _cmd_experiment(args) -> int:
    overrides = list(args.override)
    if args.trials is not None:
        overrides.append(f"experiment.trials={args.trials}")
    if args.seed is not None:
        overrides.append(f"experiment.master_seed={args.seed}")
    config = harness.load_config(args.config, overrides)
    summary = harness.run_experiment(config, out_dir=args.out)
    out = args.out or config.output_dir or harness.default_output_dir()
    viol = summary["bound_violation"]
    print(
        f"{summary['n_trials']} trials ({summary['n_failed']} failed) -> {out}"
    )
    print(
        f"bound violations: {viol['failures']}/{viol['total']} "
        f"(freq {viol['freq']!r})"
    )
    for name, block in summary["event_failures"].items():
        print(f"event {name}: failure freq {block['freq']!r}")
    return 0


def _cmd_report(args) -> int:
    config = _load(args)
    records = harness.read_records(args.records)
    summary = harness.summarize(records, config.to_dict())
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    harness.write_csv(records, os.path.join(args.out, "trials.csv"))
    print(f"summary and CSV written to {args.out}")
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "solve": _cmd_solve,
    "constants": _cmd_constants,
    "verify": _cmd_verify,
    "experiment": _cmd_experiment,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return USAGE_EXIT
    try:
        return _COMMANDS[args.command](args)
    except BrokenPipeError:
        return 0
    except SystemExit:
        raise
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_EXIT


if __name__ == "__main__":
    sys.exit(main())
