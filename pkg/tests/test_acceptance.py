"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines. The Monte Carlo criteria (4, 5, 7) share a single 1000-trial
experiment at the reference configuration executed once per session.
"""

import json
import math
import time

import numpy as np
import pytest
import scipy.special

import _oracles as ora
from test_theory import GRID

import clusterlasso as cl
from clusterlasso import harness
from clusterlasso.mixture import MixtureSpec, rng_from_key, sample_design
from clusterlasso.proxy import (
    TruthRule,
    best_representatives,
    build_beta_star,
    proxy_discrepancy,
    sample_ground_truth,
)
from clusterlasso.serialize import dump_json, encode_array
from clusterlasso.tails import chi_tail_suite, gaussian_norm_suite
from clusterlasso.theory import (
    BoundParams,
    compute_constants,
    decomposition_norms,
    entropy_integral,
    theorem_rhs,
)

REFERENCE_SEED = 2024


def _passed(number: int, name: str, details: str) -> None:
    print(f"ACCEPTANCE {number} ({name}): PASS [{details}]")


def reference_config(tmp_dir) -> harness.ExperimentConfig:
    centers = cl.orthonormal_centers(
        200, 40, rng_from_key(REFERENCE_SEED, harness.TAG_CENTERS)
    )
    path = str(tmp_dir / "centers.json")
    dump_json(
        {
            "schema_version": 1,
            "kind": "centers",
            "n": 200,
            "n_clusters": 40,
            "centers_b64": encode_array(centers.centers),
        },
        path,
    )
    return harness.ExperimentConfig(
        spec=MixtureSpec(n=200, p=2000, n_clusters=40, n_active=8, spread=1e-3),
        params=BoundParams(alpha=1.0, r=0.2, cluster_floor=1.0, cluster_power=2),
        trials=1000,
        master_seed=REFERENCE_SEED,
        center_source="file",
        center_path=path,
        truth_rule=TruthRule(value=2.0),
        sigma=0.05,
    )


@pytest.fixture(scope="module")
def reference_run(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("reference")
    config = reference_config(tmp)
    started = time.time()
    summary = harness.run_experiment(config, out_dir=tmp / "out")
    elapsed = time.time() - started
    records = harness.read_records(tmp / "out" / "trials.jsonl")
    return {
        "config": config,
        "summary": summary,
        "records": records,
        "elapsed": elapsed,
        "out": tmp / "out",
    }


def test_criterion_1_solver_matches_independent_oracle():
    started = time.time()
    rng = np.random.default_rng(1000)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(8, 21))
        p = int(rng.integers(10, 41))
        x = rng.standard_normal((n, p))
        x /= np.linalg.norm(x, axis=0)
        s = int(rng.integers(1, min(n, 6)))
        beta = np.zeros(p)
        idx = rng.choice(p, s, replace=False)
        beta[idx] = rng.choice([-1.0, 1.0], s) * rng.uniform(0.5, 2.0, s)
        y = x @ beta + 0.1 * rng.standard_normal(n)
        lam = float(rng.uniform(0.05, 0.5))
        sol = cl.solve(x, y, lam, tol=1e-9)
        _, obj_oracle, gap_oracle = ora.projected_gradient_lasso(
            x, y, lam, gap_tol=1e-9
        )
        assert gap_oracle <= 1e-9
        diff = abs(sol.objective - obj_oracle)
        worst = max(worst, diff)
        assert diff <= 1e-7

    worst_ortho = 0.0
    for seed in range(10):
        r2 = np.random.default_rng(2000 + seed)
        q, _ = np.linalg.qr(r2.standard_normal((25, 10)))
        y = q @ r2.standard_normal(10) + 0.05 * r2.standard_normal(25)
        lam = 0.3
        sol = cl.solve(q, y, lam, tol=1e-12)
        closed = ora.soft_threshold(q.T @ y, lam)
        err = float(np.max(np.abs(sol.beta_hat - closed)))
        worst_ortho = max(worst_ortho, err)
        assert err <= 1e-9
    elapsed = time.time() - started
    assert elapsed < 10.0
    _passed(
        1,
        "solver correctness",
        f"50 oracle matches (worst {worst:.2e} <= 1e-7), orthonormal closed "
        f"form (worst {worst_ortho:.2e} <= 1e-9), {elapsed:.1f}s < 10s",
    )


def test_criterion_2_zero_spread_exactness():
    started = time.time()
    worst_disc = 0.0
    worst_norm = 0.0
    spec = MixtureSpec(n=20, p=50, n_clusters=5, n_active=3, spread=0.0)
    for seed in range(100):
        centers = cl.gaussian_centers(20, 5, rng_from_key(3000, seed))
        inst = sample_design(spec, centers, rng_from_key(3001, seed))
        truth = sample_ground_truth(
            inst, 3, TruthRule(), 0.1, rng_from_key(3002, seed)
        )
        prox = build_beta_star(truth, inst, best_representatives(inst, centers))
        disc = proxy_discrepancy(inst.design, truth.beta, prox.beta_star)
        dec = decomposition_norms(centers, inst, truth, prox)
        worst_disc = max(worst_disc, disc)
        worst_norm = max(
            worst_norm, dec.norm_a, dec.norm_b, dec.norm_a_star, dec.norm_b_star
        )
        assert disc <= 1e-10
        for value in (dec.norm_a, dec.norm_b, dec.norm_a_star, dec.norm_b_star):
            assert value <= 1e-10
    elapsed = time.time() - started
    assert elapsed < 5.0
    _passed(
        2,
        "zero-variance exactness",
        f"100 seeds, max discrepancy {worst_disc:.2e}, max decomposition "
        f"norm {worst_norm:.2e}, {elapsed:.1f}s < 5s",
    )


def test_criterion_3_constants_double_entry():
    assert entropy_integral() == pytest.approx(1.5 * math.sqrt(math.pi), abs=1e-8)
    assert len(GRID) == 20
    rel = 1e-12
    for point in GRID:
        spec = MixtureSpec(
            n=point["n"], p=point["p"], n_clusters=max(point["s_star"], 2),
            n_active=point["s_star"], spread=point["spread"],
        )
        params = BoundParams(
            alpha=point["alpha"], r=point["r"], cluster_floor=point["floor"],
            cluster_power=point["power"], chi_tail=point["chi"],
            inv_gram_bound=point["rho"],
        )
        c = compute_constants(spec, params, s=point["s"])
        n, p, s, ss = point["n"], point["p"], point["s"], point["s_star"]
        sp, a, r = point["spread"], point["alpha"], point["r"]
        q = ora.tail_q(a, point["floor"], point["chi"], point["power"], n, p)
        pairs = [
            (c.c_mu, ora.c_mu(r, a)),
            (c.c_spar, ora.c_spar(r, a)),
            (c.c_col, ora.c_col(r, a)),
            (c.tail_factor, q),
            (c.r_max, ora.r_max(sp, n, p, s, a, 0.5)),
            (c.mu_max, ora.mu_max(sp, n, p, s, a)),
            (c.sigma_max_sq, ora.sigma_max_sq(sp, s)),
            (c.r_star_max, ora.r_star_max(sp, n, q)),
            (c.k_n_s, ora.k_n_s(a, n, p, q)),
            (c.mu_star_max, ora.mu_star_max(sp, a, n, p, q)),
            (c.sigma_star_max_sq, ora.sigma_star_max_sq(sp, n, q, ss)),
            (c.c_snp, ora.c_snp(r, a, q, p)),
            (c.r_star, ora.r_star(r)),
        ]
        for got, expected in pairs:
            assert got == pytest.approx(expected, rel=rel)
        assert c.delta_lower == pytest.approx(
            ora.delta_lower(sp, n, p, s, ss, a, 0.5, q, point["rho"], ora.c_int()),
            rel=1e-10,
        )
        assert theorem_rhs(
            ss, c.r_star, 0.7, c.delta_lower, 1.3, 2.1
        ) == pytest.approx(
            ora.bound_rhs(ss, ora.r_star(r), 0.7, c.delta_lower, 1.3, 2.1),
            rel=rel,
        )
    _passed(
        3,
        "constants double-entry",
        "20-point grid agrees with the independent coding at 1e-12 relative; "
        "entropy integral matches 3*sqrt(pi)/2 within 1e-8",
    )


def test_criterion_4_event_frequencies(reference_run):
    summary = reference_run["summary"]
    elapsed = reference_run["elapsed"]
    assert summary["n_failed"] == 0
    freqs = {}
    for name in ("center_gram", "design_gram", "noise"):
        block = summary["event_failures"][name]
        freqs[name] = block["freq"]
        assert block["freq"] <= 0.05, f"event {name} fails too often"
    assert elapsed < 900.0
    _passed(
        4,
        "event frequencies",
        "failure freqs over 1000 trials: "
        f"center {freqs['center_gram']:.4f}, design {freqs['design_gram']:.4f}, "
        f"noise {freqs['noise']:.4f} (all <= 0.05), {elapsed:.0f}s < 900s",
    )


def test_criterion_5_bound_holding(reference_run):
    summary = reference_run["summary"]
    viol = summary["bound_violation"]
    holding = 1.0 - viol["freq"]
    assert holding >= 0.95
    analytic = summary["bound_violation_analytic"]
    lines = [
        f"empirical-delta holding {holding:.4f} >= 0.95",
        f"analytic-delta holding {1.0 - analytic['freq']:.4f} (reported)",
    ]
    for mask, block in summary["analytic_bound_by_assumption_mask"].items():
        lines.append(
            f"mask {mask}: n={block['count']} "
            f"holding {block['analytic_bound_holding_freq']:.4f}"
        )
    _passed(5, "prediction bound", "; ".join(lines))


def test_criterion_6_tail_suites():
    started = time.time()
    gauss = gaussian_norm_suite(rng_from_key(4000), trials=10_000)
    level = 2.0 * math.exp(-4.5)
    assert gauss.exceed_freq <= level * 1.5
    chi = chi_tail_suite(rng_from_key(4001), samples=1_000_000)
    exact = float(scipy.special.gammainc(5.0, 0.5))
    assert chi.exact == pytest.approx(exact, rel=1e-12)
    assert abs(chi.empirical - chi.exact) <= 0.2 * chi.exact
    elapsed = time.time() - started
    assert elapsed < 120.0
    _passed(
        6,
        "tail suites",
        f"gaussian norm exceedance {gauss.exceed_freq:.2e} <= "
        f"{level * 1.5:.2e}; chi lower tail {chi.empirical:.3e} vs exact "
        f"{chi.exact:.3e} (within 20%), {elapsed:.0f}s < 120s",
    )


def test_criterion_7_decomposition_chain(reference_run):
    records = [r for r in reference_run["records"] if r["error"] is None]
    assert len(records) == 1000
    violations = 0
    worst_residual = 0.0
    for record in records:
        dec = record["decomposition"]
        if record["proxy_discrepancy"] > dec["chain_total"] * (1 + 1e-9) + 1e-12:
            violations += 1
        worst_residual = max(worst_residual, dec["identity_residual"])
        assert dec["identity_residual"] <= 1e-10
    assert violations == 0
    _passed(
        7,
        "decomposition chain",
        f"0 violations in 1000 trials; worst expansion identity residual "
        f"{worst_residual:.2e} <= 1e-10",
    )


def test_criterion_8_reproducibility(tmp_path):
    config = reference_config(tmp_path)
    small = harness.ExperimentConfig(
        spec=config.spec,
        params=config.params,
        trials=40,
        master_seed=config.master_seed,
        center_source=config.center_source,
        center_path=config.center_path,
        truth_rule=config.truth_rule,
        sigma=config.sigma,
    )
    out1, out2 = tmp_path / "rep1", tmp_path / "rep2"
    s1 = harness.run_experiment(small, out_dir=out1)
    s2 = harness.run_experiment(small, out_dir=out2)
    assert json.dumps(s1, sort_keys=True) == json.dumps(s2, sort_keys=True)
    for name in ("trials.jsonl", "summary.json", "trials.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    _passed(
        8,
        "reproducibility",
        "40-trial rerun at the reference configuration produced byte-identical "
        "trials.jsonl, summary.json and trials.csv",
    )
