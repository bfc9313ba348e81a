import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clusterlasso import linalg


def test_spectral_norm_diagonal():
    report = linalg.spectral_norm(np.diag([3.0, 1.0]))
    assert report.operator_norm == pytest.approx(3.0, rel=1e-9)
    assert report.min_singular == pytest.approx(1.0, rel=1e-9)
    assert report.residual <= 1e-10


def test_spectral_norm_zero_matrix():
    report = linalg.spectral_norm(np.zeros((2, 2)))
    assert report.operator_norm == 0.0
    assert report.min_singular == 0.0


def test_spectral_norm_golden_ratio():
    # largest singular value of [[1,1],[0,1]] solves s^4 - 3 s^2 + 1 = 0
    golden = (1.0 + np.sqrt(5.0)) / 2.0
    report = linalg.spectral_norm([[1.0, 1.0], [0.0, 1.0]])
    assert report.operator_norm == pytest.approx(golden, rel=1e-9)


def test_spectral_norm_matches_transpose():
    rng = np.random.default_rng(11)
    for _ in range(5):
        m = rng.standard_normal((20, 30))
        a = linalg.spectral_norm(m).operator_norm
        b = linalg.spectral_norm(m.T).operator_norm
        assert a == pytest.approx(b, abs=1e-8)


def test_spectral_norm_sign_structured():
    # top singular direction orthogonal to the all-ones start
    m = np.array([[1.0, -1.0], [-1.0, 1.0]])
    assert linalg.spectral_norm(m).operator_norm == pytest.approx(2.0, rel=1e-9)


def test_spectral_norm_rejects_bad_tol():
    with pytest.raises(ValueError):
        linalg.spectral_norm(np.eye(2), tol=0.0)


def test_spectral_norm_non_convergence_carries_estimate():
    m = np.diag([2.0, 2.0 - 1e-13, 1.0])
    with pytest.raises(linalg.SpectralConvergenceError) as err:
        linalg.spectral_norm(m, tol=1e-16, max_iter=3)
    assert err.value.estimate > 0.0
    assert err.value.iterations == 3


def test_min_singular_wide_matrix_is_zero():
    assert linalg.spectral_norm(np.ones((2, 5))).min_singular == 0.0


def test_gram_deviation_identity():
    assert linalg.gram_deviation(np.eye(3)) == 0.0


def test_gram_deviation_single_unit_column():
    assert linalg.gram_deviation(np.array([[1.0], [0.0]])) == pytest.approx(
        0.0, abs=1e-12
    )


def test_gram_deviation_two_column_example():
    m = np.array([[1.0, 1.0 / np.sqrt(2.0)], [0.0, 1.0 / np.sqrt(2.0)]])
    assert linalg.gram_deviation(m) == pytest.approx(np.sqrt(0.5), rel=1e-9)


def test_gram_deviation_orthonormal_columns():
    rng = np.random.default_rng(5)
    q, _ = np.linalg.qr(rng.standard_normal((12, 7)))
    assert linalg.gram_deviation(q) <= 1e-10


def test_coherence_identity():
    assert linalg.coherence(np.eye(4)) == 0.0


def test_coherence_duplicated_column():
    m = np.array([[1.0, 1.0], [0.0, 0.0]])
    assert linalg.coherence(m) == pytest.approx(1.0)


def test_coherence_three_column_example():
    m = np.array(
        [[1.0, 1.0 / np.sqrt(2.0), 0.0], [0.0, 1.0 / np.sqrt(2.0), 1.0]]
    )
    assert linalg.coherence(m) == pytest.approx(np.sqrt(0.5), rel=1e-12)


def test_coherence_zero_column_names_index():
    m = np.array([[1.0, 0.0], [0.0, 0.0]])
    with pytest.raises(linalg.DegenerateColumnError) as err:
        linalg.coherence(m)
    assert err.value.index == 1


@settings(max_examples=30, deadline=None)
@given(
    scales=st.lists(
        st.floats(min_value=1e-3, max_value=1e3), min_size=5, max_size=5
    )
)
def test_coherence_invariant_under_column_rescaling(scales):
    rng = np.random.default_rng(17)
    m = rng.standard_normal((8, 5))
    i0, j0, base = linalg.coherent_pair(m)
    i1, j1, scaled = linalg.coherent_pair(m * np.asarray(scales))
    assert (i0, j0) == (i1, j1)
    assert scaled == pytest.approx(base, abs=1e-12)


def test_normalize_columns_examples():
    np.testing.assert_allclose(
        linalg.normalize_columns([[2.0], [0.0]]), [[1.0], [0.0]]
    )
    np.testing.assert_allclose(
        linalg.normalize_columns([[3.0], [4.0]]), [[0.6], [0.8]]
    )


def test_normalize_columns_idempotent():
    rng = np.random.default_rng(2)
    m = linalg.normalize_columns(rng.standard_normal((6, 4)))
    # unchanged up to rounding: renormalizing divides by a norm within
    # one ulp of 1
    np.testing.assert_allclose(linalg.normalize_columns(m), m, atol=5e-16)


def test_normalize_columns_floor():
    m = np.array([[1.0, 1e-14], [0.0, 0.0]])
    with pytest.raises(linalg.DegenerateColumnError) as err:
        linalg.normalize_columns(m)
    assert err.value.index == 1


def test_solve_gram_system_examples():
    np.testing.assert_allclose(
        linalg.solve_gram_system(np.eye(2), [1.0, 2.0]), [1.0, 2.0]
    )
    np.testing.assert_allclose(
        linalg.solve_gram_system(np.diag([2.0, 4.0]), [2.0, 4.0]), [1.0, 1.0]
    )
    np.testing.assert_allclose(
        linalg.solve_gram_system([[2.0, 1.0], [1.0, 2.0]], [3.0, 3.0]),
        [1.0, 1.0],
    )


def test_solve_gram_system_roundtrip():
    rng = np.random.default_rng(23)
    for _ in range(5):
        a = rng.standard_normal((10, 6))
        g = a.T @ a + 0.5 * np.eye(6)
        b = rng.standard_normal(6)
        x = linalg.solve_gram_system(g, b)
        assert np.linalg.norm(g @ x - b) <= 1e-8 * np.linalg.norm(b)


def test_solve_gram_system_singular():
    g = np.array([[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(linalg.GramSingularError):
        linalg.solve_gram_system(g, [1.0, 1.0])


def test_as_matrix_rejects_nan():
    with pytest.raises(ValueError):
        linalg.as_matrix([[np.nan, 1.0]])


def test_spectral_report_invariant():
    with pytest.raises(ValueError):
        linalg.SpectralReport(
            operator_norm=1.0, min_singular=2.0, iterations=1, residual=0.0
        )
