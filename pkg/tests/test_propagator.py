"""Real-time propagator: light-cone branches, subordinated kernel and apply_U."""

import numpy as np
import pytest
import scipy.special as sc
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from sqrtop.errors import DomainError, SingularLocusError, UsageError
from sqrtop.fields import PeriodicGrid, RadialGrid, ScalarField, relative_l2, scalar_from_function
from sqrtop.params import PhysicalParams
from sqrtop.propagator import (
    LightConeRegion,
    apply_U,
    continued_kernel,
    imaginary_time_kernel,
    propagator_symbol,
    real_time_kernel,
    region_classify,
    subordinated_heat_kernel,
    subordination_quadrature,
    tabulate_kernel,
    z_kernel,
)
from sqrtop.spectral import evolve_spectral, radial_evolve_spectral

# ---------------------------------------------------------------- regions


@pytest.mark.parametrize("ct, r, want", [
    (2.0, 1.0, LightConeRegion.FUTURE_TIMELIKE),
    (0.5, 1.0, LightConeRegion.SPACELIKE),
    (-2.0, 1.0, LightConeRegion.PAST_TIMELIKE),
    (0.0, 0.3, LightConeRegion.SPACELIKE),
])
def test_region_examples(ct, r, want):
    # [TRIVIAL]
    assert region_classify(ct, r) is want


@given(st.floats(-5, 5), st.floats(0, 5))
def test_region_property(ct, r):
    if abs(ct) == r:
        with pytest.raises(SingularLocusError):
            region_classify(ct, r)
        return
    got = region_classify(ct, r)
    assert (got is LightConeRegion.FUTURE_TIMELIKE) == (ct > r)
    assert (got is LightConeRegion.PAST_TIMELIKE) == (ct < -r)


def test_region_errors():
    with pytest.raises(SingularLocusError):
        region_classify(1.0, 1.0)
    with pytest.raises(DomainError):
        region_classify(0.5, -1.0)


# --------------------------------------------------------------- branches


def test_z_kernel_spacelike_value():
    # [DERIVED] -(2i / pi) K2(1) = -1.0344046i with the printed sign
    val, meta = z_kernel(0.0, 1.0, 1.0)
    assert val == pytest.approx(-2j * sc.kv(2, 1.0) / np.pi, abs=1e-14)
    assert val.imag == pytest.approx(-1.0344046, abs=1e-7)
    assert meta["region"] == "spacelike"
    assert z_kernel(0.0, 1.0, 1.0, convention="continued")[0] == pytest.approx(-val)


@pytest.mark.parametrize("ct, order, kind", [(2.0, 2, 2), (-2.0, 2, 1)])
def test_z_kernel_timelike_branches(ct, order, kind):
    # [DERIVED] scipy Hankel oracle: H2^(2) future, -H2^(1) past
    r, mu = 1.0, 1.3
    d = ct * ct - r * r
    h = sc.hankel2(order, mu * np.sqrt(d)) if kind == 2 else -sc.hankel1(order, mu * np.sqrt(d))
    assert z_kernel(ct, r, mu)[0] == pytest.approx(h / d, rel=1e-12)


def test_z_kernel_cone_matching():
    # H2 and K2 share the leading 2/z^2 growth, so |Z| |d|^2 matches across the cone
    r, mu, eps = 1.0, 1.0, 1e-4
    inside = z_kernel(1 - eps, r, mu)[0]
    outside = z_kernel(1 + eps, r, mu)[0]
    d_in = abs((1 - eps) ** 2 - r * r)
    d_out = abs((1 + eps) ** 2 - r * r)
    assert abs(inside) * d_in**2 == pytest.approx(abs(outside) * d_out**2, rel=1e-3)


def test_z_kernel_errors():
    with pytest.raises(SingularLocusError):
        z_kernel(1.0, 1.0, 1.0)
    with pytest.raises(UsageError):
        z_kernel(0.5, 1.0, 1.0, convention="other")
    with pytest.raises(DomainError):
        z_kernel(0.5, 1.0, 0.0)


@given(st.floats(0.1, 3.0), st.floats(0.05, 4.0), st.floats(0.3, 3.0))
def test_real_time_kernel_is_continuation(ct, r, mu):
    # the real-time kernel is kappa(s, r) at s = i ct
    if abs(abs(ct) - r) < 1e-2:
        return
    want = continued_kernel(1j * ct, r, mu)
    assert real_time_kernel(ct, r, mu) == pytest.approx(complex(want), rel=1e-10)


# --------------------------------------------------------- imaginary time


def test_subordinated_kernel_example(unit):
    # [DERIVED] r = ct = 1: (1 / 4 pi^2) 2 K2(sqrt 2) / 2
    want = sc.kv(2, np.sqrt(2)) / (4 * np.pi**2)
    assert subordinated_heat_kernel(1.0, 1.0, unit) == pytest.approx(want, rel=1e-12)
    assert subordination_quadrature(1.0, 1.0, unit) == pytest.approx(want, rel=1e-8)


@given(st.floats(0.05, 4.0), st.floats(0.1, 3.0), st.floats(0.3, 3.0))
def test_subordination_quadrature_property(r, t, m):
    p = PhysicalParams(m=m)
    assert subordination_quadrature(r, t, p) == pytest.approx(subordinated_heat_kernel(r, t, p), rel=1e-8)


@given(st.floats(0.05, 4.0), st.floats(0.1, 3.0))
def test_imaginary_time_matches_heat_kernel(r, tau):
    p = PhysicalParams()
    assert imaginary_time_kernel(tau, r, p) == pytest.approx(subordinated_heat_kernel(r, tau, p), rel=1e-8)


@pytest.mark.parametrize("ct", [0.3, 1.0, 2.0])
def test_subordinated_kernel_total_mass(unit, ct):
    # [DERIVED] the k = 0 multiplier: int kernel d^3x = e^{-mu ct}
    def f(r):
        return 4 * np.pi * r * r * subordinated_heat_kernel(r, ct, unit)

    total = sum(integrate.quad(f, lo, hi, epsabs=0, epsrel=1e-12, limit=200)[0]
                for lo, hi in ((0, ct), (ct, 10 * ct + 10), (10 * ct + 10, np.inf)))
    assert total == pytest.approx(np.exp(-unit.mu * ct), rel=1e-6)


def test_subordinated_kernel_massless_limit():
    p = PhysicalParams(m=0.0)
    m_small = PhysicalParams(m=1e-6)
    assert subordinated_heat_kernel(1.0, 0.5, p) == pytest.approx(subordinated_heat_kernel(1.0, 0.5, m_small), rel=1e-6)


def test_subordinated_kernel_needs_positive_t(unit):
    with pytest.raises(DomainError):
        subordinated_heat_kernel(1.0, 0.0, unit)


# ------------------------------------------------------------- symbols


@given(st.floats(0.0, 8.0), st.floats(0.1, 2.0))
def test_propagator_symbol_extrapolates_to_phase(k, ct):
    # two damping levels, linearly extrapolated, give exp(-i ct sqrt(k^2 + mu^2));
    # extrapolating e^{-eps x} linearly leaves e1 e2 x^2 / 2 at second order
    e1, e2 = 2e-3, 1e-3
    x = ct * np.sqrt(k * k + 1)
    a = propagator_symbol([k], ct, 1.0, e1)[0]
    b = propagator_symbol([k], ct, 1.0, e2)[0]
    extrap = (e1 * b - e2 * a) / (e1 - e2)
    assert abs(extrap - np.exp(-1j * x)) < 1.01 * e1 * e2 * x * x / 2 + 1e-10


def test_propagator_symbol_damped_is_exact():
    # at fixed damping the symbol is exactly exp(-s sqrt(k^2 + mu^2))
    k, ct, eps = np.array([0.0, 1.0, 3.0]), 0.7, 0.02
    s = eps * ct + 1j * ct
    np.testing.assert_allclose(propagator_symbol(k, ct, 1.0, eps), np.exp(-s * np.sqrt(k * k + 1)), atol=1e-10)


# --------------------------------------------------------------- apply_U


def _gaussian_periodic(grid):
    x = grid.points()
    return ScalarField(grid, np.exp(-np.sum(x * x, axis=-1) / 2).reshape(grid.shape).astype(complex))


def test_apply_U_zero_time_is_identity(unit):
    # [TRIVIAL] U(0) = I
    psi = _gaussian_periodic(PeriodicGrid((8, 8, 8), 0.5))
    assert apply_U(psi, 0.0, params=unit) is psi


def test_apply_U_small_time_identity(unit):
    grid = RadialGrid.gauss_legendre(12.0, panels=48, order=10)
    psi = scalar_from_function(grid, lambda r: np.exp(-r * r / 2), support=9.0)
    got = apply_U(psi, 1e-3, params=unit).values[0]
    assert relative_l2(got, psi.values[0], grid.r**2 * grid.weights) < 1e-2


def test_apply_U_radial_matches_spectral(unit):
    # [DERIVED] radial spectral oracle at mu ct = 0.5
    grid = RadialGrid.gauss_legendre(12.0, panels=48, order=10)
    psi = scalar_from_function(grid, lambda r: np.exp(-r * r / 2), support=9.0)
    got = apply_U(psi, 0.5, params=unit).values[0]
    ref = radial_evolve_spectral(psi, 0.5, unit).values[0]
    assert relative_l2(got, ref, grid.r**2 * grid.weights) < 1e-2


@pytest.mark.parametrize("t", [0.1, 0.5, 2.0])
def test_apply_U_periodic_matches_spectral(unit, t):
    # [DERIVED] sampled field, mode by mode, against the spectral multiplier
    psi = _gaussian_periodic(PeriodicGrid((16, 16, 16), 0.5))
    got = apply_U(psi, t, params=unit)
    ref = evolve_spectral(psi, t, unit)
    assert relative_l2(got.values, ref.values) < 1e-3


def test_apply_U_backward_in_time(unit):
    psi = _gaussian_periodic(PeriodicGrid((12, 12, 12), 0.5))
    np.testing.assert_allclose(apply_U(psi, -0.5, params=unit).values,
                               evolve_spectral(psi, -0.5, unit).values, atol=1e-4)


def test_apply_U_gauge_phase(unit):
    # the phase carries a/2: compare with the spectral oracle at gauge wavevector a/2
    psi = _gaussian_periodic(PeriodicGrid((16, 16, 16), 0.5))
    A = np.array([0.4, 0.0, -0.2])
    got = apply_U(psi, 0.5, A=A, params=unit)
    ref = evolve_spectral(psi, 0.5, unit, gauge_a=0.5 * np.asarray(unit.gauge_wavevector(A)))
    assert relative_l2(got.values, ref.values) < 1e-3


def test_apply_U_errors(unit):
    grid = RadialGrid.gauss_legendre(4.0, panels=4)
    psi = scalar_from_function(grid, lambda r: np.exp(-r * r))
    with pytest.raises(UsageError):
        apply_U(psi, 0.5, A=(0.1, 0, 0), params=unit)
    with pytest.raises(UsageError):
        apply_U(psi, 0.5, params=unit, beta=2)
    with pytest.raises(DomainError):
        apply_U(psi, 0.5, params=PhysicalParams(m=0.0))


# ---------------------------------------------------------------- table


def test_tabulate_skips_cone_and_labels(unit):
    table = tabulate_kernel([-1.0, 0.5, 1.0], [0.5, 1.0, 2.0], unit)
    pairs = {(ct, r) for ct, r, _, _ in table.rows}
    assert (1.0, 1.0) not in pairs and (0.5, 0.5) not in pairs and (-1.0, 1.0) not in pairs
    lines = table.to_csv().splitlines()
    assert lines[0] == "ct,r,re,im,region"
    assert {ln.split(",")[-1] for ln in lines[1:]} <= {r.value for r in LightConeRegion}
