"""Seeded Monte Carlo experiment runner.

One trial = derive per-trial streams from (master seed, trial index), draw a
design and a ground truth, solve the penalized regression, build the proxy,
and measure every bound quantity. Trials never abort the experiment: any
module error becomes a failed-trial record. Data files (trial records,
summary, CSV) are byte-reproducible from (config, master seed); volatile
metadata (timestamps, host) lives in a separate file.
"""

from __future__ import annotations

import configparser
import csv
import io
import json
import math
import os
import platform
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import lasso, proxy, theory
from .mixture import (
    CenterMatrix,
    MixtureSpec,
    gaussian_centers,
    orthonormal_centers,
    rng_from_key,
    sample_design,
)
from .proxy import TruthRule
from .serialize import SCHEMA_VERSION, decode_array, load_json
from .theory import BoundParams

__all__ = [
    "ExperimentConfig",
    "load_config",
    "config_from_dict",
    "load_centers_file",
    "resolve_centers",
    "run_trial",
    "run_experiment",
    "summarize",
    "wilson_interval",
    "read_records",
    "write_csv",
    "CSV_COLUMNS",
]

OUTPUT_DIR_ENV = "CLUSTERLASSO_OUT"

# Stream tags appended to (master_seed, trial_index) when deriving
# per-purpose generators; fixed so records can be regenerated in isolation.
TAG_CENTERS = 0
TAG_DESIGN = 1
TAG_TRUTH = 2


@dataclass(frozen=True)
class ExperimentConfig:
    spec: MixtureSpec
    params: BoundParams
    trials: int = 100
    master_seed: int = 0
    workers: int = 1
    redraw_centers: bool = False
    center_source: str = "gaussian"
    center_path: str | None = None
    truth_rule: TruthRule = TruthRule()
    truth_s: int | None = None
    sigma: float = 0.05
    lam: float | None = None
    solver_tol: float = 1e-9
    solver_max_iter: int = 50000
    solver_kkt_tol: float = 1e-6
    solver_check_every: int = 10
    solver_polish: bool = True
    output_dir: str | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.center_source not in ("gaussian", "orthonormal", "file"):
            raise ValueError(f"unknown center source {self.center_source!r}")
        if self.center_source == "file" and not self.center_path:
            raise ValueError("center source 'file' needs a path")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")

    @property
    def s(self) -> int:
        return self.spec.n_active if self.truth_s is None else self.truth_s

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "experiment": {
                "trials": self.trials,
                "master_seed": self.master_seed,
                "workers": self.workers,
                "redraw_centers": self.redraw_centers,
            },
            "mixture": self.spec.to_dict(),
            "centers": {
                "source": self.center_source,
                "path": self.center_path,
            },
            "theorem": self.params.to_dict(),
            "truth": {
                **self.truth_rule.to_dict(),
                "s": self.truth_s,
                "sigma": self.sigma,
            },
            "solver": {
                "lam": self.lam,
                "tol": self.solver_tol,
                "max_iter": self.solver_max_iter,
                "kkt_tol": self.solver_kkt_tol,
                "check_every": self.solver_check_every,
                "polish": self.solver_polish,
            },
        }


def _get(parser, section, key, cast, default=None, required=False):
    if parser.has_option(section, key):
        raw = parser.get(section, key).strip()
        if raw == "":
            return default
        if cast is bool:
            return raw.lower() in ("1", "true", "yes", "on")
        return cast(raw)
    if required:
        raise ValueError(f"config is missing [{section}] {key}")
    return default


def load_config(path, overrides=()) -> ExperimentConfig:
    """Parse the INI experiment config (schema documented in the README).

    ``overrides`` are ``section.key=value`` strings applied on top of the
    file before validation.
    """
    parser = configparser.ConfigParser()
    read = parser.read(path)
    if not read:
        raise FileNotFoundError(f"config file not found: {path}")
    for item in overrides:
        try:
            target, value = item.split("=", 1)
            section, key = target.split(".", 1)
        except ValueError as exc:
            raise ValueError(
                f"override {item!r} is not of the form section.key=value"
            ) from exc
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section.strip(), key.strip(), value.strip())

    version = _get(parser, "experiment", "schema_version", int, required=True)
    if version != SCHEMA_VERSION:
        raise ValueError(
            f"unsupported config schema_version {version} "
            f"(this build reads {SCHEMA_VERSION})"
        )

    weights_raw = _get(parser, "mixture", "weights", str)
    weights = (
        None
        if not weights_raw
        else np.array([float(v) for v in weights_raw.split(",")])
    )
    spec = MixtureSpec(
        n=_get(parser, "mixture", "n", int, required=True),
        p=_get(parser, "mixture", "p", int, required=True),
        n_clusters=_get(parser, "mixture", "n_clusters", int, required=True),
        n_active=_get(parser, "mixture", "n_active", int, required=True),
        spread=_get(parser, "mixture", "spread", float, required=True),
        weights=weights,
    )
    chi_raw = _get(parser, "theorem", "chi_tail", str, default="fit")
    params = BoundParams(
        alpha=_get(parser, "theorem", "alpha", float, default=1.0),
        r=_get(parser, "theorem", "r", float, default=0.2),
        cluster_floor=_get(parser, "theorem", "cluster_floor", float, default=1.0),
        cluster_power=_get(parser, "theorem", "cluster_power", int, default=1),
        chi_tail=None if chi_raw in (None, "fit", "auto") else float(chi_raw),
        dev_const=_get(parser, "theorem", "dev_const", float, default=2.0),
        dev_rate=_get(parser, "theorem", "dev_rate", float, default=0.5),
        inv_gram_bound=_get(
            parser, "theorem", "inv_gram_bound", float, default=2.0
        ),
    )
    rule = TruthRule(
        support_rule=_get(
            parser, "truth", "support_rule", str, default="one_per_cluster"
        ),
        magnitude=_get(parser, "truth", "magnitude", str, default="constant"),
        value=_get(parser, "truth", "value", float, default=1.0),
        low=_get(parser, "truth", "low", float, default=0.5),
        high=_get(parser, "truth", "high", float, default=1.5),
    )
    lam_raw = _get(parser, "solver", "lam", str, default="default")
    return ExperimentConfig(
        spec=spec,
        params=params,
        trials=_get(parser, "experiment", "trials", int, default=100),
        master_seed=_get(parser, "experiment", "master_seed", int, default=0),
        workers=_get(parser, "experiment", "workers", int, default=1),
        redraw_centers=_get(
            parser, "experiment", "redraw_centers", bool, default=False
        ),
        center_source=_get(parser, "centers", "source", str, default="gaussian"),
        center_path=_get(parser, "centers", "path", str),
        truth_rule=rule,
        truth_s=_get(parser, "truth", "s", int),
        sigma=_get(parser, "truth", "sigma", float, default=0.05),
        lam=None if lam_raw in (None, "default", "auto") else float(lam_raw),
        solver_tol=_get(parser, "solver", "tol", float, default=1e-9),
        solver_max_iter=_get(parser, "solver", "max_iter", int, default=50000),
        solver_kkt_tol=_get(parser, "solver", "kkt_tol", float, default=1e-6),
        solver_check_every=_get(parser, "solver", "check_every", int, default=10),
        solver_polish=_get(parser, "solver", "polish", bool, default=True),
        output_dir=_get(parser, "experiment", "output_dir", str),
    )


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Rebuild a config from its echoed dictionary form."""
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError("unsupported config echo schema_version")
    truth = dict(doc["truth"])
    truth_s = truth.pop("s", None)
    sigma = truth.pop("sigma")
    solver = doc["solver"]
    return ExperimentConfig(
        spec=MixtureSpec.from_dict(doc["mixture"]),
        params=BoundParams.from_dict(doc["theorem"]),
        trials=doc["experiment"]["trials"],
        master_seed=doc["experiment"]["master_seed"],
        workers=doc["experiment"]["workers"],
        redraw_centers=doc["experiment"]["redraw_centers"],
        center_source=doc["centers"]["source"],
        center_path=doc["centers"]["path"],
        truth_rule=TruthRule.from_dict(truth),
        truth_s=truth_s,
        sigma=sigma,
        lam=solver["lam"],
        solver_tol=solver["tol"],
        solver_max_iter=solver["max_iter"],
        solver_kkt_tol=solver["kkt_tol"],
        solver_check_every=solver["check_every"],
        solver_polish=solver["polish"],
    )


def load_centers_file(path) -> CenterMatrix:
    """Centers from a .npy array or a JSON record with a base64 matrix."""
    if str(path).endswith(".npy"):
        return CenterMatrix.from_array(np.load(path))
    doc = load_json(path)
    return CenterMatrix.from_array(
        decode_array(doc["centers_b64"], (doc["n"], doc["n_clusters"]))
    )


def resolve_centers(config: ExperimentConfig, trial_index: int) -> CenterMatrix:
    """Centers for one trial: drawn once per experiment unless redrawn."""
    if config.center_source == "file":
        return load_centers_file(config.center_path)
    key = (
        (config.master_seed, trial_index, TAG_CENTERS)
        if config.redraw_centers
        else (config.master_seed, TAG_CENTERS)
    )
    maker = (
        gaussian_centers
        if config.center_source == "gaussian"
        else orthonormal_centers
    )
    return maker(config.spec.n, config.spec.n_clusters, rng_from_key(*key))


def _failed_record(trial_index: int, seed_key, message: str) -> dict:
    return {
        "trial_index": trial_index,
        "seed_key": list(seed_key),
        "error": message,
    }


def run_trial(config: ExperimentConfig, trial_index: int) -> dict:
    """Execute one trial; returns the JSON-ready record.

    Deterministic in (config, trial_index). Any exception from the sampling,
    solving or measuring stages is captured into a failed-trial record.
    """
    seed_key = (config.master_seed, trial_index)
    try:
        return _run_trial_inner(config, trial_index)
    except Exception as exc:  # crash isolation: one bad trial never aborts
        return _failed_record(trial_index, seed_key, f"{type(exc).__name__}: {exc}")


def _run_trial_inner(config: ExperimentConfig, trial_index: int) -> dict:
    spec, params = config.spec, config.params
    centers = resolve_centers(config, trial_index)
    design_key = (config.master_seed, trial_index, TAG_DESIGN)
    instance = sample_design(
        spec, centers, rng_from_key(*design_key), seed_key=design_key
    )
    truth = proxy.sample_ground_truth(
        instance,
        config.s,
        config.truth_rule,
        config.sigma,
        rng_from_key(config.master_seed, trial_index, TAG_TRUTH),
    )
    lam = (
        config.lam
        if config.lam is not None
        else lasso.default_lambda(config.sigma, params.alpha, spec.p)
    )
    solution = lasso.solve(
        instance.design,
        truth.response,
        lam,
        tol=config.solver_tol,
        max_iter=config.solver_max_iter,
        kkt_tol=config.solver_kkt_tol,
        check_every=config.solver_check_every,
        polish=config.solver_polish,
    )

    reps = proxy.best_representatives(instance, centers)
    prox = proxy.build_beta_star(truth, instance, reps)
    disc = proxy.proxy_discrepancy(instance.design, truth.beta, prox.beta_star)
    center_energy = float(
        np.linalg.norm(
            centers.centers[:, instance.labels[truth.support]]
            @ truth.beta[truth.support]
        )
    )
    if center_energy <= 0.0:
        raise ValueError("degenerate trial: center-weighted truth is zero")
    signal_energy = float(np.linalg.norm(instance.design @ truth.beta))
    delta_emp = disc / center_energy

    constants = theory.compute_constants(spec, params, s=truth.s)
    pred = lasso.prediction_error(instance.design, truth.beta, solution.beta_hat)
    rhs_emp = theory.theorem_rhs(
        prox.s_star, constants.r_star, lam, delta_emp, center_energy, signal_energy
    )
    rhs_ana = theory.theorem_rhs(
        prox.s_star, constants.r_star, lam, constants.delta_lower,
        center_energy, signal_energy,
    )
    assumptions = theory.check_assumptions(
        spec, params, centers, instance, truth, prox
    )
    condition = theory.check_events(
        centers, instance, truth, prox, lam, params, assumptions=assumptions
    )

    events = {
        "center_gram": {
            "measured": condition.center_gram_dev,
            "threshold": condition.thresholds["center_gram"],
            "holds": condition.event_center_gram,
        },
        "design_gram": {
            "measured": condition.design_gram_dev,
            "threshold": condition.thresholds["design_gram"],
            "holds": condition.event_design_gram,
        },
        "noise": {
            "measured": condition.noise_corr_inf,
            "threshold": condition.thresholds["noise"],
            "holds": condition.event_noise,
        },
        "complementarity": {
            "measured": None if condition.comp_singular else condition.comp_size,
            "threshold": condition.thresholds["complementarity"],
            "holds": condition.event_complementarity,
            "singular": condition.comp_singular,
        },
    }
    dec = condition.decomposition
    return {
        "trial_index": trial_index,
        "seed_key": [config.master_seed, trial_index],
        "error": None,
        "s": truth.s,
        "s_star": prox.s_star,
        "truth_cluster_count": int(
            np.unique(instance.labels[truth.support]).size
        ),
        "lam": lam,
        "sigma": config.sigma,
        "prediction_error": pred,
        "bound_rhs": rhs_emp,
        "bound_holds": bool(pred <= rhs_emp),
        "bound_rhs_analytic": rhs_ana,
        "bound_holds_analytic": bool(pred <= rhs_ana),
        "proxy_discrepancy": disc,
        "delta_empirical": delta_emp,
        "delta_analytic": constants.delta_lower,
        "center_energy": center_energy,
        "signal_energy": signal_energy,
        "events": events,
        "rho_center": condition.rho_center,
        "decomposition": {
            "norm_a": dec.norm_a,
            "norm_b": dec.norm_b,
            "norm_a_star": dec.norm_a_star,
            "norm_b_star": dec.norm_b_star,
            "chain_total": dec.chain_total,
            "identity_residual": dec.identity_residual,
        },
        "assumption_mask": "".join(
            "1" if a.satisfied else "0" for a in assumptions
        ),
        "assumptions": [
            {
                "index": a.index,
                "name": a.name,
                "satisfied": a.satisfied,
                "margin": a.margin,
                "measured": a.measured,
                "threshold": a.threshold,
                "note": a.note,
            }
            for a in assumptions
        ],
        "solver": {
            "iterations": solution.iterations,
            "duality_gap": solution.duality_gap,
            "kkt_infinity": solution.kkt_infinity,
            "objective": solution.objective,
            "converged": solution.converged,
            "polished": solution.polished,
            "backend": solution.backend,
        },
    }


def wilson_interval(successes: int, total: int, z: float = 1.959963984540054):
    """Wilson 95% score interval; always contains the point estimate."""
    if total == 0:
        return (0.0, 1.0)
    phat = successes / total
    denom = 1.0 + z * z / total
    center = (phat + z * z / (2 * total)) / denom
    half = (
        z
        * math.sqrt(phat * (1 - phat) / total + z * z / (4 * total * total))
        / denom
    )
    # rounding can push an endpoint past the estimate at the boundaries;
    # clamp so the interval always contains it
    return (
        min(max(0.0, center - half), phat),
        max(min(1.0, center + half), phat),
    )


def _freq_block(fails: int, total: int) -> dict:
    freq = fails / total if total else 0.0
    lo, hi = wilson_interval(fails, total) if total else (0.0, 1.0)
    return {"failures": fails, "total": total, "freq": freq,
            "wilson_low": lo, "wilson_high": hi}


def _quantiles(values) -> dict:
    if not values:
        return {"q0": None, "q25": None, "q50": None, "q75": None, "q100": None}
    qs = np.quantile(np.asarray(values, dtype=np.float64), [0, 0.25, 0.5, 0.75, 1.0])
    return {
        "q0": float(qs[0]), "q25": float(qs[1]), "q50": float(qs[2]),
        "q75": float(qs[3]), "q100": float(qs[4]),
    }


def _constants_block(config_echo: dict) -> dict | None:
    """Config-level constants table embedded in the summary; None when the
    parameters put the starred constants out of range."""
    config = config_from_dict(config_echo)
    try:
        constants = theory.compute_constants(config.spec, config.params, config.s)
    except (ValueError, ArithmeticError):
        return None
    return {name: value for name, _, value in theory.constants_table(constants)}


def summarize(records: list[dict], config_echo: dict) -> dict:
    """Aggregate trial records into the experiment summary (pure function of
    the records and the config echo, so re-running it on persisted records
    reproduces the stored summary exactly)."""
    ok = [r for r in records if r.get("error") is None]
    failed = [r for r in records if r.get("error") is not None]

    events = {}
    for name in ("center_gram", "design_gram", "noise", "complementarity"):
        fails = sum(1 for r in ok if not r["events"][name]["holds"])
        events[name] = _freq_block(fails, len(ok))

    viol_emp = sum(1 for r in ok if not r["bound_holds"])
    viol_ana = sum(1 for r in ok if not r["bound_holds_analytic"])

    by_mask: dict[str, dict] = {}
    for mask in sorted({r["assumption_mask"] for r in ok}):
        rows = [r for r in ok if r["assumption_mask"] == mask]
        holds = sum(1 for r in rows if r["bound_holds_analytic"])
        by_mask[mask] = {
            "count": len(rows),
            "analytic_bound_holding_freq": holds / len(rows),
        }

    return {
        "schema_version": SCHEMA_VERSION,
        "kind": "summary",
        "n_trials": len(records),
        "n_failed": len(failed),
        "failed_indices": [r["trial_index"] for r in failed],
        "event_failures": events,
        "bound_violation": _freq_block(viol_emp, len(ok)),
        "bound_violation_analytic": _freq_block(viol_ana, len(ok)),
        "analytic_bound_by_assumption_mask": by_mask,
        "quantiles": {
            "prediction_error": _quantiles([r["prediction_error"] for r in ok]),
            "delta_empirical": _quantiles([r["delta_empirical"] for r in ok]),
            "norm_a": _quantiles([r["decomposition"]["norm_a"] for r in ok]),
            "norm_b": _quantiles([r["decomposition"]["norm_b"] for r in ok]),
            "norm_a_star": _quantiles(
                [r["decomposition"]["norm_a_star"] for r in ok]
            ),
            "norm_b_star": _quantiles(
                [r["decomposition"]["norm_b_star"] for r in ok]
            ),
        },
        "constants": _constants_block(config_echo),
        "config": config_echo,
    }


CSV_COLUMNS = [
    "trial_index", "seed", "error", "s", "s_star", "truth_cluster_count",
    "lam", "sigma", "prediction_error", "bound_rhs", "bound_holds",
    "bound_rhs_analytic", "bound_holds_analytic", "proxy_discrepancy",
    "delta_empirical", "delta_analytic", "center_energy", "signal_energy",
    "center_gram_dev", "design_gram_dev", "noise_corr_inf", "comp_size",
    "event_center_gram", "event_design_gram", "event_noise",
    "event_complementarity", "comp_singular", "rho_center",
    "norm_a", "norm_b", "norm_a_star", "norm_b_star", "chain_total",
    "identity_residual", "assumption_mask",
    "solver_iterations", "solver_duality_gap", "solver_kkt_infinity",
    "solver_objective", "solver_polished", "solver_backend",
]


def _csv_row(record: dict) -> list:
    if record.get("error") is not None:
        row = {c: "" for c in CSV_COLUMNS}
        row["trial_index"] = record["trial_index"]
        row["seed"] = record["seed_key"][0]
        row["error"] = record["error"]
        return [row[c] for c in CSV_COLUMNS]
    ev = record["events"]
    dec = record["decomposition"]
    sol = record["solver"]
    comp = ev["complementarity"]
    values = {
        "trial_index": record["trial_index"],
        "seed": record["seed_key"][0],
        "error": "",
        "s": record["s"],
        "s_star": record["s_star"],
        "truth_cluster_count": record["truth_cluster_count"],
        "lam": record["lam"],
        "sigma": record["sigma"],
        "prediction_error": record["prediction_error"],
        "bound_rhs": record["bound_rhs"],
        "bound_holds": record["bound_holds"],
        "bound_rhs_analytic": record["bound_rhs_analytic"],
        "bound_holds_analytic": record["bound_holds_analytic"],
        "proxy_discrepancy": record["proxy_discrepancy"],
        "delta_empirical": record["delta_empirical"],
        "delta_analytic": record["delta_analytic"],
        "center_energy": record["center_energy"],
        "signal_energy": record["signal_energy"],
        "center_gram_dev": ev["center_gram"]["measured"],
        "design_gram_dev": ev["design_gram"]["measured"],
        "noise_corr_inf": ev["noise"]["measured"],
        "comp_size": "" if comp["measured"] is None else comp["measured"],
        "event_center_gram": ev["center_gram"]["holds"],
        "event_design_gram": ev["design_gram"]["holds"],
        "event_noise": ev["noise"]["holds"],
        "event_complementarity": comp["holds"],
        "comp_singular": comp["singular"],
        "rho_center": record["rho_center"],
        "norm_a": dec["norm_a"],
        "norm_b": dec["norm_b"],
        "norm_a_star": dec["norm_a_star"],
        "norm_b_star": dec["norm_b_star"],
        "chain_total": dec["chain_total"],
        "identity_residual": dec["identity_residual"],
        "assumption_mask": record["assumption_mask"],
        "solver_iterations": sol["iterations"],
        "solver_duality_gap": sol["duality_gap"],
        "solver_kkt_infinity": sol["kkt_infinity"],
        "solver_objective": sol["objective"],
        "solver_polished": sol["polished"],
        "solver_backend": sol["backend"],
    }
    return [values[c] for c in CSV_COLUMNS]


def write_csv(records: list[dict], path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for record in records:
        writer.writerow(_csv_row(record))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def read_records(path) -> list[dict]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    return records


def _trial_task(args) -> dict:
    config, index = args
    return run_trial(config, index)


def default_output_dir() -> str:
    return os.environ.get(OUTPUT_DIR_ENV, os.path.join(os.getcwd(), "out"))


def run_experiment(config: ExperimentConfig, out_dir=None) -> dict:
    """Run all trials, persist records/summary/CSV/metadata, return summary.

    Layout under ``out_dir``: trials.jsonl (one record per line),
    summary.json, trials.csv (flat, documented column order), meta.json
    (timestamps and host info; excluded from reproducibility guarantees).
    """
    out = out_dir or config.output_dir or default_output_dir()
    try:
        os.makedirs(out, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out!r}: {exc}") from exc

    started = time.time()
    indices = range(config.trials)
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            records = list(
                pool.map(_trial_task, [(config, i) for i in indices], chunksize=1)
            )
    else:
        records = [run_trial(config, i) for i in indices]

    trials_path = os.path.join(out, "trials.jsonl")
    try:
        with open(trials_path, "w", encoding="utf-8") as fh:
            for record in records:
                fh.write(json.dumps(record) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write {trials_path!r}: {exc}") from exc

    # summarize from the persisted form so that re-running the report on the
    # stored file reproduces the summary byte for byte
    persisted = read_records(trials_path)
    summary = summarize(persisted, config.to_dict())
    with open(os.path.join(out, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    write_csv(persisted, os.path.join(out, "trials.csv"))

    meta = {
        "started_unix": started,
        "elapsed_seconds": time.time() - started,
        "host": platform.node(),
        "platform": platform.platform(),
        "python": sys.version,
        "numpy": np.__version__,
        "solver_backend": lasso.solver_backend(),
    }
    with open(os.path.join(out, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2)
        fh.write("\n")
    return summary
