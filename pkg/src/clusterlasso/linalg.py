"""Dense matrix primitives: spectral norms, coherence, Gram systems.

All routines are deterministic pure functions. The spectral norm uses power
iteration with a fixed start vector (normalized all-ones) so repeated runs on
the same input produce identical output, which matters for the seeded
experiment pipeline built on top of this module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "SpectralReport",
    "SpectralConvergenceError",
    "DegenerateColumnError",
    "GramSingularError",
    "as_matrix",
    "spectral_norm",
    "gram_deviation",
    "coherence",
    "coherent_pair",
    "normalize_columns",
    "solve_gram_system",
]

NORM_FLOOR = 1e-12
# Above this column count the exact smallest singular value is replaced by a
# Gershgorin lower bound on the Gram spectrum (documented desk-scale cutoff).
MIN_SINGULAR_EXACT_LIMIT = 512


class SpectralConvergenceError(RuntimeError):
    """Power iteration did not settle; carries the last estimate."""

    def __init__(self, estimate: float, iterations: int, residual: float):
        self.estimate = estimate
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            f"power iteration stalled at {estimate:.6g} after "
            f"{iterations} iterations (residual {residual:.3g})"
        )


class DegenerateColumnError(ValueError):
    """A column norm fell below the normalization floor."""

    def __init__(self, index: int, norm: float, detail: str = ""):
        self.index = index
        self.norm = norm
        msg = f"column {index} has l2 norm {norm:.3g} below the floor"
        super().__init__(msg + (f" ({detail})" if detail else ""))


class GramSingularError(np.linalg.LinAlgError):
    """The Gram matrix is not positive definite; inversion failed."""


@dataclass(frozen=True)
class SpectralReport:
    """Largest/smallest singular value of a matrix plus iteration stats."""

    operator_norm: float
    min_singular: float
    iterations: int
    residual: float

    def __post_init__(self):
        if self.min_singular > self.operator_norm * (1 + 1e-10) + 1e-12:
            raise ValueError("min_singular exceeds operator_norm")


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Validate and return a 2-d float64 array with finite entries."""
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2 or a.size == 0:
        raise ValueError(f"{name} must be a nonempty 2-d array")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def _power_pass(a: np.ndarray, v: np.ndarray, tol: float, max_iter: int):
    """One power iteration run on the implicit Gram from start vector v."""
    w = a.T @ (a @ v)
    if np.linalg.norm(w) == 0.0:
        # start lies in the null space; restart along the largest-norm
        # column direction, which cannot be annihilated
        j = int(np.argmax(np.einsum("ij,ij->j", a, a)))
        v = np.zeros(a.shape[1])
        v[j] = 1.0
        w = a.T @ (a @ v)
    est = float(v @ w)  # Rayleigh quotient for sigma^2
    residual = np.inf
    for it in range(1, max_iter + 1):
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0, it, 0.0, True
        v = w / nw
        w = a.T @ (a @ v)
        new = float(v @ w)
        residual = abs(new - est) / max(new, np.finfo(float).tiny)
        est = new
        if residual <= tol:
            return float(np.sqrt(max(est, 0.0))), it, residual, True
    return float(np.sqrt(max(est, 0.0))), max_iter, residual, False


def spectral_norm(m, tol: float = 1e-10, max_iter: int = 10000) -> SpectralReport:
    """Largest singular value via power iteration on the implicit Gram.

    Deterministic: two fixed start vectors are used (normalized all-ones and
    normalized alternating signs; the second guards against sign-structured
    matrices whose top singular direction is orthogonal to the first) and the
    larger converged estimate wins. Raises
    :class:`SpectralConvergenceError` after ``max_iter`` non-converged
    iterations.
    """
    a = as_matrix(m)
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not a.any():
        return SpectralReport(0.0, 0.0, 0, 0.0)

    cols = a.shape[1]
    ones = np.ones(cols) / np.sqrt(cols)
    alt = np.ones(cols)
    alt[1::2] = -1.0
    alt /= np.linalg.norm(alt)

    best = (-1.0, 0, np.inf, False)
    for start in (ones, alt):
        result = _power_pass(a, start, tol, max_iter)
        if result[0] > best[0]:
            best = result
    norm, iterations, residual, converged = best
    if not converged:
        raise SpectralConvergenceError(norm, iterations, residual)
    return SpectralReport(norm, _min_singular(a), iterations, residual)


def _min_singular(a: np.ndarray) -> float:
    """Smallest singular value (exact up to the size cutoff, bound beyond)."""
    rows, cols = a.shape
    if cols > rows:
        return 0.0
    g = a.T @ a
    if cols > MIN_SINGULAR_EXACT_LIMIT:
        # Gershgorin lower bound on the Gram spectrum, clipped at zero
        off = np.abs(g).sum(axis=1) - np.abs(np.diag(g))
        return float(np.sqrt(max(0.0, np.min(np.diag(g) - off))))
    try:
        cho = scipy.linalg.cho_factor(g, check_finite=False)
    except scipy.linalg.LinAlgError:
        return 0.0
    # inverse power iteration: largest eigenvalue of G^{-1}
    v = np.ones(cols) / np.sqrt(cols)
    est = 0.0
    for _ in range(10000):
        w = scipy.linalg.cho_solve(cho, v, check_finite=False)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        new = float(v @ scipy.linalg.cho_solve(cho, v, check_finite=False))
        if abs(new - est) <= 1e-12 * max(new, np.finfo(float).tiny):
            est = new
            break
        est = new
    return float(1.0 / np.sqrt(est))


def gram_deviation(m, tol: float = 1e-10, max_iter: int = 10000) -> float:
    """Operator-norm distance of the column Gram matrix from the identity."""
    a = as_matrix(m)
    g = a.T @ a
    g[np.diag_indices_from(g)] -= 1.0
    return spectral_norm(g, tol=tol, max_iter=max_iter).operator_norm


def coherent_pair(m) -> tuple[int, int, float]:
    """Most correlated pair of distinct normalized columns, with its value."""
    a = normalize_columns(m)
    if a.shape[1] < 2:
        raise ValueError("coherence needs at least two columns")
    g = np.abs(a.T @ a)
    np.fill_diagonal(g, -1.0)
    flat = int(np.argmax(g))
    i, j = divmod(flat, g.shape[1])
    return min(i, j), max(i, j), float(min(g[i, j], 1.0))


def coherence(m) -> float:
    """Maximum |inner product| over distinct normalized column pairs."""
    return coherent_pair(m)[2]


def normalize_columns(m, floor: float = NORM_FLOOR) -> np.ndarray:
    """Rescale every column to unit l2 norm; errors on degenerate columns."""
    a = as_matrix(m)
    norms = np.linalg.norm(a, axis=0)
    bad = np.flatnonzero(norms <= floor)
    if bad.size:
        raise DegenerateColumnError(int(bad[0]), float(norms[bad[0]]))
    return a / norms


def solve_gram_system(g, b, tol: float = 1e-8) -> np.ndarray:
    """Solve G x = b for a symmetric positive definite Gram matrix G.

    Cholesky factorization with one step of iterative refinement; raises
    :class:`GramSingularError` when G is not positive definite (the
    invertibility event failed) or the refined residual exceeds
    ``tol * ||b||``.
    """
    gm = as_matrix(g, "gram matrix")
    if gm.shape[0] != gm.shape[1]:
        raise ValueError("gram matrix must be square")
    rhs = np.asarray(b, dtype=np.float64)
    try:
        cho = scipy.linalg.cho_factor(gm, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise GramSingularError(
            "gram matrix is not positive definite (invertibility failed)"
        ) from exc
    x = scipy.linalg.cho_solve(cho, rhs, check_finite=False)
    resid = rhs - gm @ x
    x = x + scipy.linalg.cho_solve(cho, resid, check_finite=False)
    resid = np.linalg.norm(rhs - gm @ x)
    if resid > tol * max(np.linalg.norm(rhs), np.finfo(float).tiny):
        raise GramSingularError(
            f"gram solve residual {resid:.3g} exceeds tolerance"
        )
    return x
