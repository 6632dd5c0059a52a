"""Dirac bridge: squared operator, square-root equation, limits and the series."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sqrtop.dirac import (
    ALPHA,
    BETA,
    SIGMA4,
    SQUARED_TERMS,
    decompose_potential,
    defect_scaling,
    dirac_block,
    dirac_lattice,
    eigenpair_residuals,
    identity_residual,
    perturbation_series,
    principal_sqrtm,
    schrodinger_limit,
    sqrt_equation_check,
    sqrt_report_csv,
    squared_operator,
)
from sqrtop.errors import BranchError, DomainError, NumericalError, UsageError
from sqrtop.params import PhysicalParams

vec = st.tuples(*[st.floats(-2, 2)] * 3)


def test_clifford_algebra():
    # [TRIVIAL] alpha_i alpha_j + alpha_j alpha_i = 2 delta_ij, alpha beta = -beta alpha
    for i in range(3):
        assert np.allclose(ALPHA[i] @ BETA + BETA @ ALPHA[i], 0)
        for j in range(3):
            assert np.allclose(ALPHA[i] @ ALPHA[j] + ALPHA[j] @ ALPHA[i], 2 * (i == j) * np.eye(4))
    assert np.allclose(BETA @ BETA, np.eye(4))


# --------------------------------------------------------- squared operator


@given(vec, vec, st.floats(-2, 2), st.sampled_from([PhysicalParams(), PhysicalParams(m=0.7, c=1.9, hbar=0.6, e=1.3)]))
def test_squared_identity_plane_wave(k, A, V, p):
    res = identity_residual(dirac_block(k, A, V, p))
    assert res["identity"] < 1e-12
    assert res["hermitian"] < 1e-12


def test_squared_terms_named(unit):
    sq = squared_operator(dirac_block([0.1, 0.2, 0.3], params=unit))
    assert tuple(sq.terms) == SQUARED_TERMS
    assert not np.any(sq.terms["dV_dt"])


@given(vec, st.floats(-1, 1))
def test_plane_wave_spectrum(k, V):
    # [DERIVED] D has eigenvalues V -+ sqrt(c^2 hbar^2 k^2 + m^2 c^4), each doubled
    p = PhysicalParams(m=1.2, c=1.5)
    ev = np.sort(np.linalg.eigvalsh(dirac_block(k, V=V, params=p).matrix()))
    w = np.sqrt(p.hbar_c**2 * np.dot(k, k) + p.rest_energy**2)
    np.testing.assert_allclose(ev, [V - w, V - w, V + w, V + w], atol=1e-12)


def test_gradient_terms_sum_to_commutator(unit):
    op = dirac_lattice(40, 0.1, V=lambda x: 0.3 * np.tanh(x), params=unit)
    sq = squared_operator(op)
    comm = sum(np.kron(a, pi @ op.V - op.V @ pi) for a, pi in zip(ALPHA, op.pis))
    np.testing.assert_allclose(sq.terms["alpha_E"] + sq.terms["alpha_grad_V"], unit.c * comm, atol=1e-13)


def test_lattice_identity_and_eigenpairs(unit):
    op = dirac_lattice(160, 0.1, V=lambda x: 0.4 * np.tanh(x), params=unit)
    assert identity_residual(op)["identity"] < 1e-12
    vals, res = eigenpair_residuals(op, 5)
    assert len(vals) == 5 and np.max(res) < 1e-8


def test_lattice_constant_field_sigma_term(unit):
    # with B along z the spin term acts as -e hbar c B Sigma_z on smooth spinors;
    # the centred-difference commutator with x is a neighbour average, exact to O(h^2)
    n, h, Bz = 80, 0.1, 0.3
    op = dirac_lattice(n, h, B1=(0, 0, Bz), params=unit)
    x = op.meta["x"]
    f = np.exp(-x * x)
    spin = np.array([1.0, 2.0, -1.0, 0.5])
    psi = np.kron(spin, f)
    got = (squared_operator(op).terms["sigma_B"] @ psi).reshape(4, n)
    want = -unit.e * unit.hbar_c * Bz * np.outer(np.diag(SIGMA4[2]).real * spin, f)
    inner = slice(10, n - 10)
    np.testing.assert_allclose(got[:, inner], want[:, inner], atol=2 * h * h)


def test_lattice_errors(unit):
    with pytest.raises(UsageError):
        dirac_lattice(10, 0.1, B1=(0.1, 0, 0), params=unit)
    with pytest.raises(DomainError):
        dirac_lattice(2, 0.1, params=unit)
    with pytest.raises(UsageError):
        dirac_lattice(10, 0.1, V=np.zeros(9), params=unit)
    with pytest.raises(UsageError):
        squared_operator(dirac_block([0, 0, 0], params=unit), dV_dt=1.0)


# ---------------------------------------------------------- square root form


def test_sqrt_equation_at_rest(unit):
    rows = sqrt_equation_check(dirac_block([0, 0, 0], params=unit))
    assert max(r.beta_left for r in rows) < 1e-10
    assert all(r.consistent for r in rows)


def test_sqrt_equation_moving(unit):
    # the signed form holds; beta sqrt(M) does not once k != 0
    rows = sqrt_equation_check(dirac_block([0.3, -0.2, 0.5], params=unit))
    assert max(r.signed for r in rows) < 1e-10
    assert max(r.beta_left for r in rows) > 1e-3


def test_sqrt_equation_constant_potential(unit):
    rows = sqrt_equation_check(dirac_block([0, 0, 1.0], V=0.25, params=unit))
    assert max(r.signed for r in rows) < 1e-10


def test_sqrt_report_csv(unit):
    text = sqrt_report_csv(sqrt_equation_check(dirac_block([0, 0, 0], params=unit)))
    lines = text.splitlines()
    assert lines[0] == "energy,beta_sqrtM,sqrtM_beta,signE_sqrtM,consistent"
    assert len(lines) == 5


def test_principal_sqrtm_branch():
    with pytest.raises(BranchError):
        principal_sqrtm(np.diag([1.0, -1.0]))
    root = principal_sqrtm(np.array([[4.0, 1.0], [0.0, 9.0]]))
    np.testing.assert_allclose(root @ root, [[4.0, 1.0], [0.0, 9.0]], atol=1e-13)


# ------------------------------------------------------------ limits


def test_defect_scaling_slope(unit):
    slope, rels = defect_scaling([0.025, 0.05, 0.1], params=unit)
    assert abs(slope - 2.0) < 0.1
    assert np.all(np.diff(rels) > 0)


def test_schrodinger_limit_small_momentum(unit):
    out = schrodinger_limit(dirac_block([0.01, 0, 0], params=unit))
    assert out["max_relative_defect"] < 1e-3


# ------------------------------------------------------------ series


def test_series_scalar_example():
    # [PAPER] sqrt(4) (1 + 0.05 - 0.00125) = 2.09750 against sqrt(4.4) = 2.0976177
    approx, led = perturbation_series(np.array([[4.0]]), np.array([[0.4]]), 2)
    assert approx[0, 0].real == pytest.approx(2.09750, abs=5e-6)
    assert np.sqrt(4.4) == pytest.approx(2.0976177, abs=5e-8)
    assert led.norm_GinvF == pytest.approx(0.1)


@pytest.mark.parametrize("target", [0.1, 0.3, 0.5])
def test_series_error_ratio(target):
    rng = np.random.default_rng(int(target * 10))
    n = 6
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    g = rng.uniform(1.0, 3.0, n)
    ratio = rng.uniform(-1, 1, n)
    ratio *= target / np.max(np.abs(ratio))
    G = Q @ np.diag(g) @ Q.T
    F = Q @ np.diag(g * ratio) @ Q.T
    _, led = perturbation_series(G, F, 4)
    errs = np.array(led.errors)
    assert np.all(errs[1:] / errs[:-1] <= led.norm_GinvF + 0.05)
    assert led.commutator < 1e-12


def test_series_noncommuting_limit():
    # the series converges to sqrt(G) sqrt(I + G^-1 F), not sqrtm(G + F)
    G = np.diag([1.0, 2.0, 3.0])
    F = 0.2 * np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
    _, led = perturbation_series(G, F, 25)
    assert led.limit_errors[-1] < 1e-10
    assert led.errors[-1] > 1e-4
    assert led.commutator > 0.1


def test_series_errors():
    with pytest.raises(NumericalError):
        perturbation_series(np.eye(2), 1.5 * np.eye(2), 3)
    _, led = perturbation_series(np.eye(2), 1.5 * np.eye(2), 3, allow_divergent=True)
    assert led.divergent
    with pytest.raises(DomainError):
        perturbation_series(-np.eye(2), 0.1 * np.eye(2), 3)
    with pytest.raises(DomainError):
        perturbation_series(np.eye(2), 0.1 * np.eye(2), -1)
    with pytest.raises(UsageError):
        perturbation_series(np.eye(2), np.eye(3), 1)


# -------------------------------------------------------- decomposition


def test_decompose_potential_closes(unit):
    B1 = (0.0, 0.1, 0.2)
    op = dirac_lattice(30, 0.2, V=lambda x: 0.1 * np.exp(-x * x),
                       A=lambda x: np.stack([0.05 * np.sin(x), 0.02 * x, np.zeros_like(x)], axis=-1),
                       k_perp=(0.3, -0.1), B1=B1, params=unit)
    G, F, pieces = decompose_potential(op, B1)
    np.testing.assert_allclose(G + F, squared_operator(op).matrix, atol=1e-12)


def test_decompose_potential_errors(unit):
    op = dirac_lattice(10, 0.2, B1=(0, 0, 0.1), params=unit)
    with pytest.raises(UsageError):
        decompose_potential(op, (0, 0, 0.2))
    with pytest.raises(UsageError):
        decompose_potential(dirac_block([0, 0, 0], params=unit), (0, 0, 0))
