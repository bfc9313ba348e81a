"""Bound machinery: named constants, assumption checks, event measurements.

Everything here is a deterministic function of one trial's objects. The
constants module-level contract: each closed-form quantity is evaluated
verbatim from its defining formula (no algebraic rearrangement), so an
independently coded oracle can match it to near machine precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.integrate
import scipy.stats

from . import linalg
from .mixture import CenterMatrix, DesignInstance, MixtureSpec
from .proxy import GroundTruth, ProxyVector

__all__ = [
    "BoundParams",
    "BoundConstants",
    "AssumptionCheck",
    "DecompositionReport",
    "ConditionReport",
    "SpreadTooLargeError",
    "fit_chi_tail_log",
    "entropy_integral",
    "compute_constants",
    "delta_terms",
    "delta_lower_bound",
    "theorem_rhs",
    "check_assumptions",
    "decomposition_norms",
    "check_events",
    "constants_table",
]

ASSUMPTION_NAMES = (
    "dimension scale",
    "center coherence",
    "cluster sizes",
    "proxy sparsity",
    "sample size",
    "cross-cluster columns",
    "spread budget",
    "signal strength",
    "proxy signal strength",
    "randomized signs",
)


class SpreadTooLargeError(ValueError):
    """spread * sqrt(n * tail factor) reached 1; starred constants blow up."""


@dataclass(frozen=True)
class BoundParams:
    """Free parameters of the prediction bound.

    alpha            confidence exponent: failure levels scale like p**-alpha
    r                Gram-deviation budget, must lie in (0, 1/4)
    cluster_floor    scale of the minimum-cluster-size requirement
    cluster_power    log-power of the minimum-cluster-size requirement
    chi_tail         constant dominating the chi-square lower tail
                     P(chi2_n <= u^2) <= chi_tail * (u^2/n)^n on the fitted
                     grid; None fits the smallest such constant numerically
    dev_const, dev_rate
                     (C, c) of the scalar norm-deviation tail
                     P(| ||g||/spread - sqrt(n) | >= u) <= C exp(-c u^2)
    inv_gram_bound   operational bound on the inverse active-center Gram
                     norm used inside the delta bound (measured per trial as
                     well; on the center Gram event it is at most 2)
    """

    alpha: float = 1.0
    r: float = 0.2
    cluster_floor: float = 1.0
    cluster_power: int = 1
    chi_tail: float | None = None
    dev_const: float = 2.0
    dev_rate: float = 0.5
    inv_gram_bound: float = 2.0

    def __post_init__(self):
        if not 0.0 < self.r < 0.25:
            raise ValueError("r must lie in (0, 1/4)")
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.cluster_floor <= 0:
            raise ValueError("cluster_floor must be positive")
        if self.cluster_power < 1:
            raise ValueError("cluster_power must be a positive integer")
        if self.dev_const <= 0 or self.dev_rate <= 0:
            raise ValueError("deviation constants must be positive")
        if self.inv_gram_bound < 1:
            raise ValueError("inv_gram_bound must be at least 1")

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "r": self.r,
            "cluster_floor": self.cluster_floor,
            "cluster_power": self.cluster_power,
            "chi_tail": self.chi_tail,
            "dev_const": self.dev_const,
            "dev_rate": self.dev_rate,
            "inv_gram_bound": self.inv_gram_bound,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BoundParams":
        return cls(**d)


@dataclass(frozen=True)
class BoundConstants:
    """Every named constant of the bound, plus the echoing inputs (s, s_star).

    tail_factor is the recurring quantity
    (alpha (1 - 1/e) / (cluster_floor * chi_tail))^(1/n) / log(p)^((nu-1)/n);
    chi_tail_log is log(chi_tail) (the constant itself can overflow a float
    for large n, its log never does at desk scale).
    """

    s: int
    s_star: int
    c_mu: float
    c_spar: float
    c_col: float
    c_int: float
    c_int_star: float
    c_snp: float
    chi_tail_log: float
    tail_factor: float
    r_max: float
    mu_max: float
    sigma_max_sq: float
    r_star_max: float
    k_n_s: float
    mu_star_max: float
    sigma_star_max_sq: float
    r_star: float
    delta_lower: float
    delta_term_values: tuple[float, float, float, float]
    bound_rhs: float = math.nan


@dataclass(frozen=True)
class AssumptionCheck:
    """One assumption evaluated as a predicate with a signed margin.

    margin is positive exactly when the assumption holds (threshold minus
    measured for upper bounds, measured minus threshold for lower bounds);
    NaN marks predicates whose threshold is undefined at these parameters.
    """

    index: int
    name: str
    satisfied: bool
    margin: float
    measured: float
    threshold: float
    note: str = ""
    clauses: dict = field(default_factory=dict)


@dataclass(frozen=True)
class DecompositionReport:
    """l2 norms of the four deviation sums plus the exactness residual of
    the expansion (truth-minus-proxy image equals the signed sum of the
    four pieces)."""

    norm_a: float
    norm_b: float
    norm_a_star: float
    norm_b_star: float
    identity_residual: float

    @property
    def chain_total(self) -> float:
        return self.norm_a + self.norm_b + self.norm_a_star + self.norm_b_star


@dataclass(frozen=True)
class ConditionReport:
    """Measured event quantities with their thresholds and flags.

    Events hold when the measured quantity is strictly below its threshold.
    The complementarity event additionally fails by singularity when the
    restricted Gram cannot be inverted.
    """

    center_gram_dev: float
    design_gram_dev: float
    noise_corr_inf: float
    comp_size: float
    event_center_gram: bool
    event_design_gram: bool
    event_noise: bool
    event_complementarity: bool
    comp_singular: bool
    rho_center: float
    thresholds: dict
    decomposition: DecompositionReport
    assumption_flags: tuple = ()
    assumption_margins: tuple = ()

    @property
    def event_flags(self) -> tuple[bool, bool, bool, bool]:
        return (
            self.event_center_gram,
            self.event_design_gram,
            self.event_noise,
            self.event_complementarity,
        )


@lru_cache(maxsize=64)
def fit_chi_tail_log(
    n: int, lo: float = 0.01, hi: float = 1.0, points: int = 400
) -> float:
    """log of the smallest constant C with P(chi2_n <= t n) <= C t^n on the
    grid t in [lo, hi].

    Computed in log space: the ratio itself overflows double precision for
    moderate n. The supremum over t -> 0 is infinite (the exact lower tail
    decays like t^(n/2), slower than t^n), which is why the fit is pinned to
    a grid bounded away from zero.
    """
    t = np.exp(np.linspace(math.log(lo), math.log(hi), points))
    log_ratio = scipy.stats.chi2.logcdf(t * n, df=n) - n * np.log(t)
    return float(np.max(log_ratio))


def entropy_integral(tol: float = 1e-10) -> float:
    """Adaptive quadrature of the covering-entropy integral
    int_0^3 sqrt(log(3/e)) de, after the substitution e = 3 exp(-t^2) that
    removes the endpoint singularity (closed form: 3 sqrt(pi) / 2)."""
    val, _ = scipy.integrate.quad(
        lambda t: 6.0 * t * t * math.exp(-t * t), 0.0, np.inf,
        epsabs=tol, epsrel=tol,
    )
    return float(val)


def _chi_tail_log(params: BoundParams, n: int) -> float:
    if params.chi_tail is not None:
        if params.chi_tail <= 0:
            raise ValueError("chi_tail must be positive")
        return math.log(params.chi_tail)
    return fit_chi_tail_log(n)


def _tail_factor(params: BoundParams, n: int, p: int) -> float:
    """(alpha (1-1/e) / (floor * C_chi))^(1/n) * (1/log(p)^(nu-1))^(1/n)."""
    log_chi = _chi_tail_log(params, n)
    num = math.log(params.alpha * (1.0 - math.exp(-1.0))) - math.log(
        params.cluster_floor
    )
    return math.exp(
        (num - log_chi - (params.cluster_power - 1) * math.log(math.log(p))) / n
    )


def _deviation_reach(spread: float, n: int, p: int, s: int, params: BoundParams):
    """spread * (sqrt(n) + sqrt((alpha/c) log p + (1/c) log s))."""
    return spread * (
        math.sqrt(n)
        + math.sqrt(
            (params.alpha / params.dev_rate) * math.log(p)
            + math.log(s) / params.dev_rate
        )
    )


def compute_constants(
    spec: MixtureSpec,
    params: BoundParams,
    s: int,
    lam: float | None = None,
    center_energy: float | None = None,
    signal_energy: float | None = None,
) -> BoundConstants:
    """Evaluate every named constant for one parameter point.

    ``s`` is the true support size (distinct from spec.n_active, the proxy
    support size). When lam and the two energies are supplied, the final
    prediction bound is evaluated at delta = delta_lower and stored in
    bound_rhs; otherwise bound_rhs is NaN.
    """
    if spec.p < 2:
        raise ValueError("p must be at least 2")
    if s < 1:
        raise ValueError("s must be at least 1")
    n, p, spread = spec.n, spec.p, spec.spread
    alpha, r = params.alpha, params.r
    logp = math.log(p)

    c_mu = r / (1.0 + alpha)
    c_spar = r * r / ((1.0 + alpha) * math.e**2)
    c_col = 0.5 * (
        math.sqrt(2.0) / math.sqrt((1.0 - r) * (1.0 + alpha)) - (1.0 + r)
    )
    c_int = entropy_integral()

    chi_log = _chi_tail_log(params, n)
    q = _tail_factor(params, n, p)
    root_nq = spread * math.sqrt(n * q)
    if root_nq >= 1.0:
        raise SpreadTooLargeError(
            f"spread * sqrt(n * tail factor) = {root_nq:.6g} >= 1; the "
            "starred constants are undefined (spread budget violated)"
        )

    reach = _deviation_reach(spread, n, p, s, params)
    r_max = 1.0 + reach
    mu_max = 0.5 * spread * (
        math.sqrt(n) + math.sqrt(s) + math.sqrt(2.0 * alpha * logp)
    )
    sigma_max_sq = 0.5 * math.sqrt(s) * spread * spread
    r_star_max = 1.0 / (1.0 - root_nq)
    k_n_s = math.sqrt(alpha * n * logp * q)
    mu_star_max = spread * k_n_s
    sigma_star_max_sq = (
        q / (1.0 - root_nq) * math.sqrt(spec.n_active) * spread * spread
    )
    c_snp = min(
        0.1 * r / math.sqrt(alpha * q),
        0.5 * math.sqrt(logp),
    )
    r_star = 1.1 * r * (1.1 + 0.11 * r)

    terms = delta_terms(
        spec, params, s, spec.n_active,
        q=q, reach=reach, r_max=r_max, mu_max=mu_max,
        r_star_max=r_star_max, mu_star_max=mu_star_max, c_int=c_int,
    )
    delta_lower = float(sum(terms))

    rhs = math.nan
    if lam is not None and center_energy is not None and signal_energy is not None:
        rhs = theorem_rhs(
            spec.n_active, r_star, lam, delta_lower, center_energy, signal_energy
        )

    return BoundConstants(
        s=s,
        s_star=spec.n_active,
        c_mu=c_mu,
        c_spar=c_spar,
        c_col=c_col,
        c_int=c_int,
        c_int_star=c_int,
        c_snp=c_snp,
        chi_tail_log=chi_log,
        tail_factor=q,
        r_max=r_max,
        mu_max=mu_max,
        sigma_max_sq=sigma_max_sq,
        r_star_max=r_star_max,
        k_n_s=k_n_s,
        mu_star_max=mu_star_max,
        sigma_star_max_sq=sigma_star_max_sq,
        r_star=r_star,
        delta_lower=delta_lower,
        delta_term_values=terms,
        bound_rhs=rhs,
    )


def delta_terms(
    spec: MixtureSpec,
    params: BoundParams,
    s: int,
    s_star: int,
    q: float | None = None,
    reach: float | None = None,
    r_max: float | None = None,
    mu_max: float | None = None,
    r_star_max: float | None = None,
    mu_star_max: float | None = None,
    c_int: float | None = None,
) -> tuple[float, float, float, float]:
    """The four summands of the analytic lower bound on delta.

    Precomputed ingredients may be passed to avoid recomputation; omitted
    ones are evaluated from their defining formulas.
    """
    n, p, spread = spec.n, spec.p, spec.spread
    alpha = params.alpha
    logp = math.log(p)
    rho = params.inv_gram_bound

    if q is None:
        q = _tail_factor(params, n, p)
    if reach is None:
        reach = _deviation_reach(spread, n, p, s, params)
    if r_max is None:
        r_max = 1.0 + reach
    if mu_max is None:
        mu_max = 0.5 * spread * (
            math.sqrt(n) + math.sqrt(s) + math.sqrt(2.0 * alpha * logp)
        )
    root_nq = spread * math.sqrt(n * q)
    if root_nq >= 1.0:
        raise SpreadTooLargeError("spread budget violated in delta evaluation")
    if r_star_max is None:
        r_star_max = 1.0 / (1.0 - root_nq)
    if mu_star_max is None:
        mu_star_max = spread * math.sqrt(alpha * n * logp * q)
    if c_int is None:
        c_int = entropy_integral()

    log_lift = math.sqrt(alpha * logp + math.log(2.0 * n + 2.0))
    t1 = 4.0 * reach * (
        1.0 + 8.0 * math.sqrt(2.0) * log_lift * math.sqrt(s_star * rho)
    )
    t2 = (
        12.0 * c_int * spread * math.sqrt(n) * r_max + alpha * logp * mu_max
    ) * math.sqrt(s_star * rho)
    t3 = 4.0 * spread * math.sqrt(n * q) * (
        1.0 + 2.0 * math.sqrt(2.0) * math.sqrt(rho) * log_lift
    )
    t4 = (
        24.0 * r_star_max * spread * math.sqrt(q) * c_int
        + mu_star_max * alpha * logp
    ) * math.sqrt(rho)
    return (t1, t2, t3, t4)


def delta_lower_bound(
    constants: BoundConstants,
    spec: MixtureSpec,
    params: BoundParams,
    s_star: int,
) -> float:
    """Sum of the four delta terms for the given constants."""
    terms = delta_terms(
        spec, params, constants.s, s_star,
        q=constants.tail_factor, r_max=constants.r_max,
        mu_max=constants.mu_max, r_star_max=constants.r_star_max,
        mu_star_max=constants.mu_star_max, c_int=constants.c_int,
    )
    return float(sum(terms))


def theorem_rhs(
    s_star: int,
    r_star: float,
    lam: float,
    delta: float,
    center_energy: float,
    signal_energy: float,
) -> float:
    """Right-hand side of the prediction bound.

    center_energy is the l2 norm of the center-weighted truth combination,
    signal_energy the l2 norm of the design image of the truth.
    """
    if lam <= 0:
        raise ValueError("lam must be positive")
    return (
        s_star
        * 1.5
        * r_star
        * lam
        * (1.5 * lam + math.sqrt(1.0 + r_star) * delta * center_energy)
        + 0.5 * delta * delta * signal_energy * signal_energy
    )


def _appendix_gram_budget(
    spec: MixtureSpec, params: BoundParams, q: float, k_n_s: float
) -> float:
    """Max-form Gram-deviation budget used by the cross-cluster clause."""
    spread = spec.spread
    root_nq = spread * math.sqrt(spec.n * q)
    sk = spread * k_n_s
    up = ((1.0 + params.r) + (1.0 + params.r) * sk + sk * sk) / (
        1.0 - root_nq
    ) ** 2 - 1.0
    down = 1.0 - (
        (1.0 - params.r) / (1.0 + root_nq) ** 2
        - ((1.0 + params.r) * sk + sk * sk) / (1.0 - root_nq) ** 2
    )
    return max(up, down)


def check_assumptions(
    spec: MixtureSpec,
    params: BoundParams,
    centers: CenterMatrix,
    instance: DesignInstance,
    truth: GroundTruth,
    prox: ProxyVector,
) -> list[AssumptionCheck]:
    """Evaluate all ten assumptions on one coherent trial.

    Failures are reported with signed margins, never raised. Thresholds that
    are undefined at the given parameters (nonpositive or non-finite
    denominators) produce a failed check with a NaN margin and an
    explanatory note.
    """
    n, p = spec.n, spec.p
    k_tot = spec.n_clusters
    alpha, r = params.alpha, params.r
    logp = math.log(p)
    consts = compute_constants(spec, params, s=truth.s)
    checks: list[AssumptionCheck] = []

    # 1: dimension scale (two clauses)
    thr_p = max(k_tot, math.exp(math.exp(2.0 - math.log(alpha))))
    thr_logp = max(
        0.2 * r * (1.0 + 1.1 * r + 0.11 * r * r)
        / (0.1 * (1.1 * r + 0.11 * r * r)),
        1.1 * r * (1.1 + 0.11 * r) / alpha,
    )
    clauses = {
        "p_scale": (p >= thr_p, p - thr_p),
        "log_p_scale": (logp >= thr_logp, logp - thr_logp),
    }
    ok = all(c[0] for c in clauses.values())
    checks.append(
        AssumptionCheck(
            1, ASSUMPTION_NAMES[0], ok,
            min(c[1] for c in clauses.values()),
            measured=float(p), threshold=thr_p, clauses=clauses,
        )
    )

    # 2: center coherence
    thr = consts.c_mu / logp
    mu = centers.coherence_mu
    checks.append(
        AssumptionCheck(2, ASSUMPTION_NAMES[1], mu <= thr, thr - mu, mu, thr)
    )

    # 3: cluster sizes
    counts = np.array(
        [instance.cluster_members(int(k)).size for k in instance.active_set]
    )
    thr = params.cluster_floor * logp**params.cluster_power
    measured = float(counts.min()) if counts.size else 0.0
    checks.append(
        AssumptionCheck(
            3, ASSUMPTION_NAMES[2], measured >= thr, measured - thr, measured, thr
        )
    )

    # 4: proxy sparsity
    thr = (k_tot / logp) * consts.c_spar / centers.op_norm**2
    s_star = float(prox.s_star)
    checks.append(
        AssumptionCheck(
            4, ASSUMPTION_NAMES[3], s_star <= thr, thr - s_star, s_star, thr
        )
    )

    # 5: sample size
    thr = (alpha + 1.0) / params.dev_rate * logp
    checks.append(
        AssumptionCheck(
            5, ASSUMPTION_NAMES[4], n >= thr, n - thr, float(n), thr
        )
    )

    # 6: cross-cluster columns (two clauses)
    lhs_a = consts.c_col
    thr_a = math.e**2 * (alpha + 1.0) * max(math.sqrt(consts.c_spar), consts.c_mu)
    budget = _appendix_gram_budget(spec, params, consts.tail_factor, consts.k_n_s)
    lhs_b = consts.c_col + (1.0 + 1.1 * r) * consts.c_snp
    denom = (alpha * logp - math.log(2.0)) * 2.0
    if denom <= 0:
        clauses = {
            "column_budget": (lhs_a >= thr_a, lhs_a - thr_a),
            "deviation_budget": (False, math.nan),
        }
        note = "second clause undefined: alpha log p does not exceed log 2"
        ok, margin = False, math.nan
    else:
        thr_b = 0.5 * math.sqrt(logp * (1.0 - budget) ** 2 / denom)
        clauses = {
            "column_budget": (lhs_a >= thr_a, lhs_a - thr_a),
            "deviation_budget": (lhs_b <= thr_b, thr_b - lhs_b),
        }
        note = ""
        ok = all(c[0] for c in clauses.values())
        margin = min(c[1] for c in clauses.values())
    checks.append(
        AssumptionCheck(
            6, ASSUMPTION_NAMES[5], ok, margin,
            measured=lhs_a, threshold=thr_a, note=note, clauses=clauses,
        )
    )

    # 7: spread budget (three clauses; the third holds by construction
    # because c_snp is defined as the largest admissible value)
    reach = consts.r_max - 1.0
    thr_b = consts.c_snp / (
        math.sqrt(logp)
        * (math.sqrt(n) + math.sqrt((alpha + 1.0) / params.dev_rate * logp))
    )
    clauses = {
        "reach_half": (reach <= 0.5, 0.5 - reach),
        "spread_cap": (spec.spread <= thr_b, thr_b - spec.spread),
        # c_snp is defined as the largest admissible value, so its own
        # clause holds with zero slack by construction and is excluded from
        # the reported margin
        "snp_admissible": (True, 0.0),
    }
    ok = all(c[0] for c in clauses.values())
    checks.append(
        AssumptionCheck(
            7, ASSUMPTION_NAMES[6], ok,
            min(clauses["reach_half"][1], clauses["spread_cap"][1]),
            measured=spec.spread, threshold=thr_b, clauses=clauses,
        )
    )

    # 8: signal strength
    signal = float(truth.beta[truth.support] @ truth.beta[truth.support])
    denom = (
        4.0 * alpha**2 / 9.0 * consts.mu_max**2 * logp**2
        - 12.0 * consts.c_int * consts.mu_max * consts.r_max
        * spec.spread * math.sqrt(n)
    )
    num = 2.0 * alpha * logp * n * consts.sigma_max_sq
    checks.append(
        _ratio_check(8, ASSUMPTION_NAMES[7], signal, num, denom)
    )

    # 9: proxy signal strength
    proxy_signal = float(
        prox.beta_star[prox.support] @ prox.beta_star[prox.support]
    )
    denom = (
        4.0 * alpha**2 / 9.0 * consts.mu_star_max**2 * logp**2
        - 24.0 * consts.c_int_star * consts.mu_star_max * consts.r_star_max
        * spec.spread * math.sqrt(consts.tail_factor)
    )
    num = 2.0 * alpha * logp * n * consts.sigma_star_max_sq
    checks.append(
        _ratio_check(9, ASSUMPTION_NAMES[8], proxy_signal, num, denom)
    )

    # 10: randomized signs (generation-process predicate; recorded from the
    # sampler metadata rather than measured)
    checks.append(
        AssumptionCheck(
            10, ASSUMPTION_NAMES[9], truth.random_signs, math.nan,
            measured=float(truth.random_signs), threshold=1.0,
            note="sign pattern drawn uniformly from {-1,+1}"
            if truth.random_signs
            else "sign pattern was not randomized",
        )
    )
    return checks


def _ratio_check(
    index: int, name: str, measured: float, num: float, denom: float
) -> AssumptionCheck:
    if not (denom > 0.0 and math.isfinite(denom) and math.isfinite(num)):
        return AssumptionCheck(
            index, name, False, math.nan, measured, math.nan,
            note="threshold undefined: denominator is nonpositive or "
            "indeterminate at this spread (vacuous at spread 0)",
        )
    thr = num / denom
    return AssumptionCheck(
        index, name, measured >= thr, measured - thr, measured, thr
    )


def _deviation_vectors(centers, instance, support, weights):
    """Center-scaling and spread components of the normalization expansion.

    For each supported column j with raw vector v_j = center + deviation:
      scale part  (1/||v_j|| - 1) * center_j * w_j
      spread part deviation_j * w_j / ||v_j||
    """
    a = np.zeros(instance.n)
    b = np.zeros(instance.n)
    for j in support:
        raw = instance.raw[:, j]
        norm = float(np.linalg.norm(raw))
        w = weights[j]
        c = centers.centers[:, int(instance.labels[j])]
        a += (1.0 / norm - 1.0) * w * c
        b += (w / norm) * instance.deviations[:, j]
    return a, b


def decomposition_norms(
    centers: CenterMatrix,
    instance: DesignInstance,
    truth: GroundTruth,
    prox: ProxyVector,
) -> DecompositionReport:
    """Norms of the four deviation sums plus the expansion identity residual."""
    a, b = _deviation_vectors(centers, instance, truth.support, truth.beta)
    a_s, b_s = _deviation_vectors(
        centers, instance, prox.support, prox.beta_star
    )
    diff = (a + b) - (a_s + b_s)
    direct = instance.design @ truth.beta - instance.design @ prox.beta_star
    residual = abs(float(np.linalg.norm(diff)) - float(np.linalg.norm(direct)))
    return DecompositionReport(
        norm_a=float(np.linalg.norm(a)),
        norm_b=float(np.linalg.norm(b)),
        norm_a_star=float(np.linalg.norm(a_s)),
        norm_b_star=float(np.linalg.norm(b_s)),
        identity_residual=residual,
    )


def check_events(
    centers: CenterMatrix,
    instance: DesignInstance,
    truth: GroundTruth,
    prox: ProxyVector,
    lam: float,
    params: BoundParams,
    assumptions: list[AssumptionCheck] | None = None,
) -> ConditionReport:
    """Measure the four proof events against their thresholds.

    Flags are True when the measured quantity is strictly below the
    threshold. The complementarity quantity needs the restricted Gram
    inverse; when that factorization fails the event is reported as failed
    by singularity with an infinite measured value.
    """
    sigma = truth.sigma
    alpha, r = params.alpha, params.r
    p = instance.p
    r_star = 1.1 * r * (1.1 + 0.11 * r)

    active_centers = centers.centers[:, instance.active_set]
    gram_c = active_centers.T @ active_centers
    center_dev = _sym_deviation(gram_c)
    min_sing = linalg.spectral_norm(active_centers).min_singular
    rho_center = float("inf") if min_sing == 0.0 else 1.0 / min_sing**2

    design_t = instance.design[:, prox.support]
    design_dev = _sym_deviation(design_t.T @ design_t)

    noise_inf = float(np.max(np.abs(instance.design.T @ truth.noise)))

    comp_singular = False
    signs = np.sign(prox.beta_star[prox.support])
    try:
        gram_t = design_t.T @ design_t
        u_noise = linalg.solve_gram_system(gram_t, design_t.T @ truth.noise)
        u_sign = linalg.solve_gram_system(gram_t, signs)
        mask = np.ones(p, dtype=bool)
        mask[prox.support] = False
        outside = instance.design[:, mask]
        comp_size = float(
            np.max(np.abs(outside.T @ (design_t @ u_noise)))
            + lam * np.max(np.abs(outside.T @ (design_t @ u_sign)))
        ) if mask.any() else 0.0
    except linalg.GramSingularError:
        comp_singular = True
        comp_size = float("inf")

    thresholds = {
        "center_gram": 0.5,
        "design_gram": r_star,
        "noise": sigma * math.sqrt(2.0 * alpha * math.log(p)),
        "complementarity": sigma * math.sqrt(1.0 + r_star) + 0.5 * lam,
    }
    flags = assumptions or []
    return ConditionReport(
        center_gram_dev=center_dev,
        design_gram_dev=design_dev,
        noise_corr_inf=noise_inf,
        comp_size=comp_size,
        event_center_gram=center_dev < thresholds["center_gram"],
        event_design_gram=design_dev < thresholds["design_gram"],
        event_noise=noise_inf < thresholds["noise"],
        event_complementarity=(
            not comp_singular and comp_size < thresholds["complementarity"]
        ),
        comp_singular=comp_singular,
        rho_center=rho_center,
        thresholds=thresholds,
        decomposition=decomposition_norms(centers, instance, truth, prox),
        assumption_flags=tuple(c.satisfied for c in flags),
        assumption_margins=tuple(c.margin for c in flags),
    )


def _sym_deviation(gram: np.ndarray) -> float:
    g = gram.copy()
    g[np.diag_indices_from(g)] -= 1.0
    return linalg.spectral_norm(g).operator_norm


def constants_table(constants: BoundConstants) -> list[tuple[str, str, float]]:
    """(name, defining formula, value) rows for reporting."""
    c = constants
    return [
        ("c_mu", "r / (1 + alpha)", c.c_mu),
        ("c_spar", "r^2 / ((1 + alpha) e^2)", c.c_spar),
        ("c_col", "(sqrt(2)/sqrt((1-r)(1+alpha)) - (1+r)) / 2", c.c_col),
        ("c_int", "integral_0^3 sqrt(log(3/e)) de", c.c_int),
        ("c_int_star", "alias of c_int (identical definition)", c.c_int_star),
        ("c_snp", "min(0.1 r / sqrt(alpha q), sqrt(log p)/2)", c.c_snp),
        ("chi_tail_log", "log of fitted chi-square lower-tail constant",
         c.chi_tail_log),
        ("tail_factor",
         "(alpha (1-1/e)/(floor chi_tail))^(1/n) log(p)^(-(nu-1)/n)",
         c.tail_factor),
        ("r_max", "1 + spread (sqrt(n) + sqrt((alpha/c) log p + log(s)/c))",
         c.r_max),
        ("mu_max", "spread (sqrt(n) + sqrt(s) + sqrt(2 alpha log p)) / 2",
         c.mu_max),
        ("sigma_max_sq", "sqrt(s) spread^2 / 2", c.sigma_max_sq),
        ("r_star_max", "1 / (1 - spread sqrt(n q))", c.r_star_max),
        ("k_n_s", "sqrt(alpha n log(p) q)", c.k_n_s),
        ("mu_star_max", "spread k_n_s", c.mu_star_max),
        ("sigma_star_max_sq",
         "q sqrt(s_star) spread^2 / (1 - spread sqrt(n q))",
         c.sigma_star_max_sq),
        ("r_star", "1.1 r (1.1 + 0.11 r)", c.r_star),
        ("delta_term_1", "scale-deviation term", c.delta_term_values[0]),
        ("delta_term_2", "spread-process term", c.delta_term_values[1]),
        ("delta_term_3", "representative scale term", c.delta_term_values[2]),
        ("delta_term_4", "representative spread term", c.delta_term_values[3]),
        ("delta_lower", "sum of the four delta terms", c.delta_lower),
        ("bound_rhs", "prediction bound at delta_lower", c.bound_rhs),
    ]
