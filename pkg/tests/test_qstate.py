import numpy as np
import pytest
from hypothesis import given
from scipy.linalg import expm

from seaqt import qstate as qs
from conftest import seeds


def _brute_partial_trace(rho, keep):
    out = np.zeros((2, 2), dtype=complex)
    for i in range(2):
        for k in range(2):
            for j in range(2):
                if keep == "A":
                    out[i, k] += rho[2 * i + j, 2 * k + j]
                else:
                    out[i, k] += rho[2 * j + i, 2 * j + k]
    return out


def test_partial_trace_of_product_returns_factor(rng):
    a, b = qs.random_density(2, rng), qs.random_density(2, rng)
    assert np.allclose(qs.partial_trace(qs.kron(a, b), "A"), a, atol=1e-14)
    assert np.allclose(qs.partial_trace(qs.kron(a, b), "B"), b, atol=1e-14)


def test_partial_trace_of_bell_is_maximally_mixed():
    bell = qs.ket2dm(qs.BELL_PHI)
    assert np.allclose(qs.partial_trace(bell, "A"), np.eye(2) / 2, atol=1e-15)


@given(seeds)
def test_partial_trace_matches_index_sum(seed):
    rho = qs.random_density(4, np.random.default_rng(seed))
    for keep in "AB":
        assert np.allclose(qs.partial_trace(rho, keep), _brute_partial_trace(rho, keep), atol=1e-14)


@given(seeds)
def test_partial_trace_preserves_trace_and_validity(seed):
    rho = qs.random_density(4, np.random.default_rng(seed))
    for keep in "AB":
        red = qs.partial_trace(rho, keep)
        assert abs(qs.trace(red) - 1) < 1e-12
        qs.validate_density(red)


def test_partial_trace_rejects_wrong_dimension():
    with pytest.raises(qs.StateError):
        qs.partial_trace(np.eye(2) / 2, "A")
    with pytest.raises(ValueError):
        qs.partial_trace(np.eye(4) / 4, "C")


def test_matrix_sqrt_trivial_cases():
    assert np.allclose(qs.matrix_sqrt(np.eye(2) / 2), np.eye(2) / np.sqrt(2), atol=1e-15)
    assert np.allclose(qs.matrix_sqrt(np.diag([1.0, 0.0])), np.diag([1.0, 0.0]), atol=1e-15)


def test_matrix_sqrt_squares_back_on_1000_states(rng):
    for dim in (2, 4):
        rho = qs.random_density(dim, rng, size=500, rank=None)
        sq = qs.matrix_sqrt(rho)
        assert np.max(np.abs(sq @ sq - rho)) < 1e-12
        assert np.max(qs.hermitian_residual(sq)) < 1e-14
        assert np.min(np.linalg.eigvalsh(sq)) > -1e-12


def test_matrix_sqrt_clamps_tiny_negativity_and_rejects_large():
    rho = np.diag([1.0 + 1e-12, -1e-12]).astype(complex)
    assert np.allclose(qs.matrix_sqrt(rho), np.diag([1.0, 0.0]), atol=1e-6)
    with pytest.raises(qs.StateError):
        qs.matrix_sqrt(np.diag([1.1, -0.1]))


def test_matrix_sqrt_rejects_non_hermitian():
    with pytest.raises(qs.StateError, match="hermitian"):
        qs.matrix_sqrt(np.array([[0.5, 0.1], [0.0, 0.5]]))


def test_range_log_pure_state_is_zero():
    assert np.allclose(qs.range_log(qs.ket2dm(qs.KET0)), 0, atol=1e-15)


def test_range_log_diagonal_rank_deficient():
    rho = np.diag([0.5, 0.5, 0.0, 0.0]).astype(complex)
    assert np.allclose(qs.range_log(rho), np.diag([np.log(0.5)] * 2 + [0, 0]), atol=1e-14)


@given(seeds)
def test_range_log_exp_round_trip(seed):
    rng = np.random.default_rng(seed)
    for dim in (2, 4):
        rho = qs.random_density(dim, rng)
        if np.min(np.linalg.eigvalsh(rho)) < 1e-6:
            continue
        assert np.max(np.abs(expm(qs.range_log(rho)) - rho)) < 1e-10


def test_range_log_rejects_bad_eps():
    with pytest.raises(ValueError):
        qs.range_log(np.eye(2) / 2, rank_eps=0)


def test_expectation_examples():
    assert qs.expectation(qs.ket2dm(qs.KET0), qs.Z) == pytest.approx(1.0)
    assert qs.expectation(np.eye(2) / 2, qs.X) == pytest.approx(0.0)
    assert qs.expectation((qs.I2 + 0.3 * qs.X) / 2, qs.X) == pytest.approx(0.3)
    with pytest.raises(qs.StateError):
        qs.expectation(np.eye(4) / 4, qs.X)


def test_entropy_examples():
    assert qs.von_neumann_entropy(qs.ket2dm(qs.KET1)) == pytest.approx(0.0, abs=1e-15)
    assert qs.von_neumann_entropy(np.eye(2) / 2) == pytest.approx(np.log(2))
    p = np.array([0.25, 0.75])
    oracle = -sum(x * np.log(x) for x in p)
    assert qs.von_neumann_entropy(np.diag(p)) == pytest.approx(oracle, rel=1e-14)


def test_entropy_additive_on_100_products(rng):
    a = qs.random_density(2, rng, size=100)
    b = qs.random_density(2, rng, size=100)
    prod = np.einsum("nij,nkl->nikjl", a, b).reshape(100, 4, 4)
    lhs = qs.von_neumann_entropy(prod)
    rhs = qs.von_neumann_entropy(a) + qs.von_neumann_entropy(b)
    assert np.max(np.abs(lhs - rhs)) < 1e-12


@given(seeds)
def test_entropy_bounds(seed):
    rho = qs.random_density(4, np.random.default_rng(seed))
    s = qs.von_neumann_entropy(rho)
    assert -1e-15 <= s <= np.log(4) + 1e-12


def test_validate_density_errors():
    with pytest.raises(qs.StateError, match="hermitian"):
        qs.validate_density(np.array([[0.5, 0.2], [0.0, 0.5]]))
    with pytest.raises(qs.StateError, match="trace"):
        qs.validate_density(np.eye(2))
    with pytest.raises(qs.StateError, match="negative"):
        qs.validate_density(np.diag([1.2, -0.2]))
    with pytest.raises(qs.StateError, match="non-finite"):
        qs.validate_density(np.array([[np.nan, 0], [0, 1]]))


def test_ground_state_convention():
    rho0 = qs.ket2dm(qs.KET0)
    assert qs.expectation(rho0, qs.Z) == 1.0
    # the lowering operator maps |1> to |0>
    assert np.allclose(qs.LOWER @ qs.KET1, qs.KET0)


def test_propagator_matches_expm(rng):
    h = qs.hermitize(rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4)))
    assert np.allclose(qs.propagator(h, 0.7), expm(-0.7j * h), atol=1e-12)


def test_gibbs_state_weights():
    h = np.diag([0.0, 1.0])
    rho = qs.gibbs_state(h, 2.0)
    assert rho[1, 1].real / rho[0, 0].real == pytest.approx(np.exp(-2.0))
