"""Empirical sanity suites for the concentration bounds the analysis rests on.

Each sub-suite samples the relevant random object, measures tail frequencies
and compares them against the analytic level: Gaussian matrix extreme
singular values, chi-square lower tails (including the fitted tail constant
at both candidate exponents), scalar norm deviations, and the two matrix
tail inequalities (symmetric Rademacher sums and sums of rank-one
positive-semidefinite terms).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
import scipy.special
import scipy.stats

from .theory import BoundParams, fit_chi_tail_log

__all__ = [
    "GaussianNormReport",
    "ChiTailReport",
    "ScalarDeviationReport",
    "MatrixRademacherReport",
    "PsdSumReport",
    "ConcentrationReport",
    "gaussian_norm_suite",
    "chi_tail_suite",
    "scalar_deviation_suite",
    "matrix_rademacher_suite",
    "psd_sum_suite",
    "concentration_suite",
]

_CHUNK = 2048


@dataclass(frozen=True)
class GaussianNormReport:
    """Exceedance of sigma_max(G) over sqrt(n)+sqrt(m)+u for standard
    normal G, against the 2 exp(-u^2/2) level."""

    n_rows: int
    n_cols: int
    u: float
    trials: int
    exceed_freq: float
    bound: float

    @property
    def within_bound(self) -> bool:
        return self.exceed_freq <= self.bound


@dataclass(frozen=True)
class ChiTailReport:
    """Chi-square lower tail: empirical frequency vs the incomplete-gamma
    value, plus fitted tail constants at the two candidate exponents.

    fitted_log_paper is the log of the smallest constant C such that the
    empirical P(chi2_df <= t df) is dominated by C t^df on the grid;
    fitted_log_half uses exponent df/2 instead. The smaller constant marks
    which exponent actually matches the decay.
    """

    df: int
    u_sq: float
    samples: int
    empirical: float
    exact: float
    grid: tuple
    fitted_log_paper: float
    fitted_log_half: float
    analytic_log_paper: float


@dataclass(frozen=True)
class ScalarDeviationReport:
    """Tail of | ||g||_2 - sqrt(n) | against C exp(-c u^2)."""

    n: int
    trials: int
    u_grid: tuple
    exceed_freq: tuple
    bound: tuple

    @property
    def within_bound(self) -> bool:
        return all(f <= b for f, b in zip(self.exceed_freq, self.bound))


@dataclass(frozen=True)
class MatrixRademacherReport:
    """Largest eigenvalue of a Rademacher-signed sum of fixed symmetric
    matrices against the d exp(-u^2 / (8 ||sum V_j^2||)) level."""

    dim: int
    terms: int
    trials: int
    u_grid: tuple
    exceed_freq: tuple
    bound: tuple

    @property
    def within_bound(self) -> bool:
        return all(f <= b for f, b in zip(self.exceed_freq, self.bound))


@dataclass(frozen=True)
class PsdSumReport:
    """Operator norm of a sum of rank-one PSD terms (unit sphere outer
    products) against the d (e mu / t)^(t/B) level, valid for t >= e mu."""

    dim: int
    terms: int
    trials: int
    t_grid: tuple
    exceed_freq: tuple
    bound: tuple

    @property
    def within_bound(self) -> bool:
        return all(f <= b for f, b in zip(self.exceed_freq, self.bound))


@dataclass(frozen=True)
class ConcentrationReport:
    gaussian_norm: GaussianNormReport
    chi_tail: ChiTailReport
    scalar_deviation: ScalarDeviationReport
    matrix_rademacher: MatrixRademacherReport
    psd_sum: PsdSumReport

    def to_dict(self) -> dict:
        return asdict(self)


def gaussian_norm_suite(
    rng: np.random.Generator,
    trials: int,
    n_rows: int = 20,
    n_cols: int = 20,
    u: float = 3.0,
) -> GaussianNormReport:
    exceed = 0
    thr = math.sqrt(n_rows) + math.sqrt(n_cols) + u
    done = 0
    while done < trials:
        m = min(_CHUNK, trials - done)
        g = rng.standard_normal((m, n_rows, n_cols))
        smax = np.linalg.svd(g, compute_uv=False)[:, 0]
        exceed += int(np.count_nonzero(smax > thr))
        done += m
    return GaussianNormReport(
        n_rows=n_rows,
        n_cols=n_cols,
        u=u,
        trials=trials,
        exceed_freq=exceed / trials,
        bound=min(1.0, 2.0 * math.exp(-u * u / 2.0)),
    )


def chi_tail_suite(
    rng: np.random.Generator,
    samples: int,
    df: int = 10,
    u_sq: float = 1.0,
    grid=(0.1, 0.2, 0.4, 0.7, 1.0),
) -> ChiTailReport:
    draws = rng.chisquare(df, size=samples)
    draws.sort()
    empirical = float(np.searchsorted(draws, u_sq, side="right")) / samples
    exact = float(scipy.special.gammainc(df / 2.0, u_sq / 2.0))

    def fitted(exponent: float) -> float:
        best = -math.inf
        for t in grid:
            freq = float(np.searchsorted(draws, t * df, side="right")) / samples
            if freq > 0.0:
                best = max(best, math.log(freq) - exponent * math.log(t))
        return best

    return ChiTailReport(
        df=df,
        u_sq=u_sq,
        samples=samples,
        empirical=empirical,
        exact=exact,
        grid=tuple(grid),
        fitted_log_paper=fitted(float(df)),
        fitted_log_half=fitted(df / 2.0),
        analytic_log_paper=fit_chi_tail_log(df, lo=min(grid), hi=max(grid)),
    )


def scalar_deviation_suite(
    params: BoundParams,
    rng: np.random.Generator,
    trials: int,
    n: int = 50,
    u_grid=(0.5, 1.0, 1.5, 2.0, 3.0),
) -> ScalarDeviationReport:
    devs = np.empty(trials)
    done = 0
    while done < trials:
        m = min(_CHUNK, trials - done)
        g = rng.standard_normal((m, n))
        devs[done : done + m] = np.abs(
            np.linalg.norm(g, axis=1) - math.sqrt(n)
        )
        done += m
    freqs = tuple(float(np.mean(devs >= u)) for u in u_grid)
    bounds = tuple(
        min(1.0, params.dev_const * math.exp(-params.dev_rate * u * u))
        for u in u_grid
    )
    return ScalarDeviationReport(
        n=n, trials=trials, u_grid=tuple(u_grid),
        exceed_freq=freqs, bound=bounds,
    )


def matrix_rademacher_suite(
    rng: np.random.Generator,
    trials: int,
    dim: int = 8,
    terms: int = 24,
    u_grid=(2.0, 4.0, 6.0),
) -> MatrixRademacherReport:
    """Signed sums of fixed symmetric matrices (drawn once per suite)."""
    base = rng.standard_normal((terms, dim, dim))
    v = 0.5 * (base + base.transpose(0, 2, 1))
    variance = np.linalg.norm(np.einsum("kij,kjl->il", v, v), 2)

    tops = np.empty(trials)
    done = 0
    while done < trials:
        m = min(_CHUNK, trials - done)
        signs = rng.choice([-1.0, 1.0], size=(m, terms))
        sums = np.einsum("tk,kij->tij", signs, v)
        tops[done : done + m] = np.linalg.eigvalsh(sums)[:, -1]
        done += m
    freqs = tuple(float(np.mean(tops >= u)) for u in u_grid)
    bounds = tuple(
        min(1.0, dim * math.exp(-u * u / (8.0 * variance))) for u in u_grid
    )
    return MatrixRademacherReport(
        dim=dim, terms=terms, trials=trials, u_grid=tuple(u_grid),
        exceed_freq=freqs, bound=bounds,
    )


def psd_sum_suite(
    rng: np.random.Generator,
    trials: int,
    dim: int = 8,
    terms: int = 40,
    t_factors=(1.2, 1.5, 2.0),
) -> PsdSumReport:
    """Sums of unit-sphere outer products; each term has norm exactly 1 and
    the expected sum has norm terms/dim, so the tail level applies for
    thresholds at least e * terms / dim."""
    mu = terms / dim
    t_grid = tuple(f * math.e * mu for f in t_factors)
    tops = np.empty(trials)
    done = 0
    while done < trials:
        m = min(_CHUNK, trials - done)
        g = rng.standard_normal((m, terms, dim))
        g /= np.linalg.norm(g, axis=2, keepdims=True)
        sums = np.einsum("tki,tkj->tij", g, g)
        tops[done : done + m] = np.linalg.eigvalsh(sums)[:, -1]
        done += m
    freqs = tuple(float(np.mean(tops >= t)) for t in t_grid)
    bounds = tuple(
        min(1.0, dim * (math.e * mu / t) ** (t / 1.0)) for t in t_grid
    )
    return PsdSumReport(
        dim=dim, terms=terms, trials=trials, t_grid=t_grid,
        exceed_freq=freqs, bound=bounds,
    )


def concentration_suite(
    params: BoundParams,
    rng: np.random.Generator,
    trials: int,
    chi_samples: int | None = None,
) -> ConcentrationReport:
    """Run all sub-suites on one stream. ``trials`` is the per-suite Monte
    Carlo size (at least 100); the chi-square suite may use its own larger
    sample count since single draws are cheap."""
    if trials < 100:
        raise ValueError("need at least 100 trials")
    return ConcentrationReport(
        gaussian_norm=gaussian_norm_suite(rng, trials),
        chi_tail=chi_tail_suite(rng, chi_samples or max(trials, 100000)),
        scalar_deviation=scalar_deviation_suite(params, rng, trials),
        matrix_rademacher=matrix_rademacher_suite(rng, trials),
        psd_sum=psd_sum_suite(rng, trials),
    )
