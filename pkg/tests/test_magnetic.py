"""Constant magnetic field: matrix mass, polar factors and the kernel engines."""

import numpy as np
import pytest
import scipy.linalg
from hypothesis import assume, given
from hypothesis import strategies as st

from sqrtop.errors import DomainError, NumericalError, UsageError
from sqrtop.fields import PeriodicGrid, ScalarField, SpinorField, spinor_from_function
from sqrtop.kernels import apply_free
from sqrtop.magnetic import (
    CONSTRUCTIONS,
    apply_constant_B,
    compare_constructions,
    constant_B_symbols,
    mass_matrix,
    polar_decompose,
    principal_sqrt,
    symmetric_gauge,
)
from sqrtop.params import PhysicalParams

field = st.tuples(*[st.floats(-0.8, 0.8)] * 3)


# -------------------------------------------------------------- mass matrix


@pytest.mark.parametrize("construction", ["verbatim", "hermitian"])
def test_zero_field_is_scalar_mass(construction):
    p = PhysicalParams(m=1.5, c=2.0, hbar=0.7)
    mm = mass_matrix([0, 0, 0], p, construction)
    np.testing.assert_allclose(mm.mu_squared, p.mu**2 * np.eye(4), atol=1e-14)


def test_verbatim_axial_example(unit):
    # [DERIVED] substitution B3 = 0.5 in natural units
    mm = mass_matrix([0, 0, 0.5], unit, "verbatim")
    np.testing.assert_allclose(mm.mu_squared, np.diag([0.5, 0.5, 1.5, 1.5]), atol=1e-15)


def test_verbatim_transverse_pairs(unit):
    # [DERIVED] B = (0.5, 0, 0): eigenvalues 1 -+ 0.5i, each doubled
    ev = np.sort_complex(mass_matrix([0.5, 0, 0], unit, "verbatim").eigenvalues)
    np.testing.assert_allclose(ev, [1 - 0.5j, 1 - 0.5j, 1 + 0.5j, 1 + 0.5j], atol=1e-12)


@given(st.floats(-0.9, 0.9))
def test_axial_constructions_agree(b3):
    cmp = compare_constructions([0, 0, b3], PhysicalParams())
    assert cmp["max_difference"] < 1e-12


@given(field)
def test_hermitian_construction_is_hermitian(B):
    mm = mass_matrix(B, PhysicalParams(), "hermitian")
    np.testing.assert_allclose(mm.mu_squared, mm.mu_squared.conj().T, atol=1e-15)
    # eigenvalues mu^2 -+ |B|, each doubled
    ev = np.sort(mm.eigenvalues.real)
    nb = np.linalg.norm(B)
    np.testing.assert_allclose(ev, [1 - nb, 1 - nb, 1 + nb, 1 + nb], atol=1e-12)


def test_transverse_constructions_differ(unit):
    # reported, not asserted equal: the printed block form is not Hermitian
    assert compare_constructions([0.5, 0, 0], unit)["max_difference"] > 0.1


def test_mass_matrix_rejects_bad_input(unit):
    with pytest.raises(UsageError):
        mass_matrix([0, 0, 1], unit, "bogus")
    with pytest.raises(DomainError):
        mass_matrix([0, np.nan, 1], unit)
    assert "verbatim" in CONSTRUCTIONS and "hermitian" in CONSTRUCTIONS


# ---------------------------------------------------------------- roots


@given(field, st.sampled_from(["verbatim", "hermitian"]))
def test_principal_sqrt_squares_back(B, construction):
    # verbatim eigenvalues are 1 -+ sqrt(B3^2 - (B1 + i B2)^2); equal roots make a Jordan block
    disc = B[2] ** 2 - (B[0] + 1j * B[1]) ** 2
    assume(construction == "hermitian" or abs(disc) > 1e-3)
    mm = mass_matrix(B, PhysicalParams(), construction)
    root = principal_sqrt(mm.mu_squared)
    np.testing.assert_allclose(root @ root, mm.mu_squared, atol=1e-12)
    # principal branch: arguments in (-pi/2, pi/2]
    assert np.all(np.linalg.eigvals(root).real > -1e-12)


def test_principal_sqrt_jordan_case_raises(unit):
    with pytest.raises(NumericalError):
        principal_sqrt(mass_matrix([0.3, 0.0, 0.3], unit, "verbatim").mu_squared)


def test_principal_sqrt_defective():
    with pytest.raises(NumericalError):
        principal_sqrt(np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_polar_diagonal_positive():
    # [TRIVIAL]
    U, P, res = polar_decompose(np.diag([1.0, 2.0, 3.0, 4.0]))
    np.testing.assert_allclose(U, np.eye(4), atol=1e-14)
    np.testing.assert_allclose(P, np.diag([1.0, 2.0, 3.0, 4.0]), atol=1e-14)


def test_polar_sign_capture():
    # [TRIVIAL]
    U, P, res = polar_decompose(np.diag([-1.0, 1.0, 1.0, 1.0]))
    np.testing.assert_allclose(U, np.diag([-1.0, 1, 1, 1]), atol=1e-14)
    np.testing.assert_allclose(P, np.eye(4), atol=1e-14)


@pytest.mark.parametrize("B", [(0.5, 0, 0), (0.5, 0.3, 0), (0.3, -0.2, 0.4)])
def test_polar_transverse(unit, B):
    # [DERIVED] hermitian square root oracle from scipy
    mm = mass_matrix(B, unit, "verbatim")
    U, P, res = polar_decompose(mm)
    mu = principal_sqrt(mm.mu_squared)
    assert res < 1e-12
    np.testing.assert_allclose(U.conj().T @ U, np.eye(4), atol=1e-12)
    np.testing.assert_allclose(P, scipy.linalg.sqrtm(mu.conj().T @ mu), atol=1e-12)
    assert np.max(np.abs(U - np.eye(4))) > 1e-3


def test_polar_factor_realness(unit):
    # the off-diagonal block i (B2 - i B1) is real for B along x (real rotation U),
    # Hermitian for B along y (U = I) and neither in between (non-real U)
    U_x = polar_decompose(mass_matrix([0.5, 0, 0], unit, "verbatim"))[0]
    U_y = polar_decompose(mass_matrix([0, 0.5, 0], unit, "verbatim"))[0]
    U_xy = polar_decompose(mass_matrix([0.5, 0.3, 0], unit, "verbatim"))[0]
    assert np.max(np.abs(U_x.imag)) < 1e-14
    np.testing.assert_allclose(U_y, np.eye(4), atol=1e-12)
    assert np.max(np.abs(U_xy.imag)) > 1e-3


# ---------------------------------------------------------------- gauge


def test_symmetric_gauge_curl(unit):
    # the printed gauge has curl -(e / hbar c) B
    B = np.array([0.2, -0.5, 0.7])
    h = 1e-3
    jac = np.empty((3, 3))
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        jac[:, j] = (symmetric_gauge(e, B, unit) - symmetric_gauge(-e, B, unit)) / (2 * h)
    curl = np.array([jac[2, 1] - jac[1, 2], jac[0, 2] - jac[2, 0], jac[1, 0] - jac[0, 1]])
    np.testing.assert_allclose(curl, -B, atol=1e-12)


# -------------------------------------------------------------- engines


def _band_limited(grid):
    """A periodic trig polynomial, usable both as samples and as an analytic func."""
    L = grid.lengths[0]
    modes = [((0, 0, 0), [1, 0.2, 0, 0.1j]), ((1, 0, 0), [0.3, 0, 0.5j, 0]),
             ((0, -1, 1), [0, 0.4, 0.1, 0]), ((1, 1, 0), [0.2j, 0, 0, 0.3])]

    def func(pts):
        pts = np.asarray(pts, dtype=float)
        out = np.zeros((4,) + pts.shape[:-1], dtype=complex)
        for n, c in modes:
            phase = np.exp(2j * np.pi / L * (pts @ np.array(n, dtype=float)))
            out += np.array(c).reshape((4,) + (1,) * phase.ndim) * phase
        return out

    analytic = spinor_from_function(grid, func)
    return analytic, SpinorField(grid, analytic.values.copy())


def test_constant_B_symbols_free_part():
    # the free moment is the free symbol: 2 pi^2 (sqrt(k^2 + mu^2) - mu)
    k = np.array([0.0, 0.5, 2.0, 7.0])
    sym = constant_B_symbols(k, 1.3)
    np.testing.assert_allclose(sym["free"] / (2 * np.pi**2), np.sqrt(k**2 + 1.69) - 1.3, atol=1e-11)


def test_constant_B_symbols_moments():
    # [DERIVED] at k = 0 the z-moments reduce to radial integrals with closed forms:
    # 4 pi int mu r K1(mu r) dr = 2 pi^2 / mu, and int mu r^3 K1(mu r) dr = 3 pi / (2 mu^3)
    # times the k -> 0 value 1/3 of j1(x)/x
    mu = 1.7
    sym = constant_B_symbols(np.array([0.0]), mu)
    assert sym["m0"][0] == pytest.approx(2 * np.pi**2 / mu, rel=1e-10)
    assert sym["m1"][0] == pytest.approx(np.pi / (2 * mu**3), rel=1e-10)


def test_constant_B_zero_field_is_free(unit):
    # [TRIVIAL] reduction: B = 0 acts as apply_free on each component
    grid = PeriodicGrid((8, 8, 8), 0.5)
    rng = np.random.default_rng(7)
    vals = rng.normal(size=(4,) + grid.shape) + 1j * rng.normal(size=(4,) + grid.shape)
    psi = SpinorField(grid, vals)
    got = apply_constant_B(psi, (0, 0, 0), unit).values
    for c in range(4):
        ref = apply_free(ScalarField(grid, vals[c]), unit).values[0]
        np.testing.assert_allclose(got[c], ref, atol=1e-10)


@pytest.mark.parametrize("B, construction", [((0, 0, 0.5), "hermitian"), ((0.4, 0, 0.3), "verbatim")])
def test_constant_B_modes_match_shell_quadrature(B, construction):
    # [DERIVED] the mode path against the 3D quadrature engine, term by term
    p = PhysicalParams(m=2.0)
    grid = PeriodicGrid((6, 6, 6), 0.7)
    analytic, sampled = _band_limited(grid)
    idx = [0, 50, 131]
    pts = grid.points()[idx]
    out, parts = apply_constant_B(sampled, B, p, construction=construction, ledger=True)
    ref, ref_parts = apply_constant_B(analytic, B, p, construction=construction, points=pts, ledger=True)
    scale = np.max(np.abs(ref))
    assert np.max(np.abs(out.values.reshape(4, -1)[:, idx] - ref)) < 1e-8 * scale
    # the a^2 K1 term on its own, and the pieces sum to the output
    a2 = parts["a2_K1"].reshape(4, -1)[:, idx]
    assert np.max(np.abs(a2 - ref_parts["a2_K1"])) < 1e-8 * scale
    np.testing.assert_allclose(sum(parts.values()), out.values, atol=1e-12 * scale)


def test_constant_B_first_order_in_field(unit):
    # [DERIVED] finite-difference slope consistency for small B3
    grid = PeriodicGrid((8, 8, 8), 0.5)
    x = grid.points()
    g = np.exp(-np.sum(x * x, axis=-1) / 2).reshape(grid.shape)
    psi = SpinorField(grid, np.stack([g, 0.5 * g, 0.25j * g, -g]))
    base = apply_constant_B(psi, (0, 0, 0), unit).values
    d1 = apply_constant_B(psi, (0, 0, 1e-3), unit).values - base
    d2 = apply_constant_B(psi, (0, 0, 2e-3), unit).values - base
    assert np.max(np.abs(d2 - 2 * d1)) < 5e-3 * np.max(np.abs(d2))


def test_constant_B_error_estimate(unit):
    grid = PeriodicGrid((6, 6, 6), 0.5)
    psi = SpinorField(grid, np.ones((4,) + grid.shape, dtype=complex))
    out, err = apply_constant_B(psi, (0, 0, 0.3), unit, return_error=True)
    assert err < 1e-10


def test_constant_B_vanishing_channel(unit):
    grid = PeriodicGrid((4, 4, 4), 0.5)
    psi = SpinorField(grid, np.ones((4,) + grid.shape, dtype=complex))
    with pytest.raises(DomainError):
        apply_constant_B(psi, (0, 0, 1.0), unit)


def test_constant_B_needs_spinor(unit):
    grid = PeriodicGrid((4, 4, 4), 0.5)
    with pytest.raises(UsageError):
        apply_constant_B(ScalarField(grid, np.ones(grid.shape)), (0, 0, 0.2), unit)
