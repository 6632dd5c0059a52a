"""Validation suites: each check measures one quantity against a tolerance.

A check passes when ``value <= tol``.  Checks marked ``expected_fail``
measure a limit that cannot reach the stated tolerance at the stated point;
they are reported with status ``xfail`` (or ``xpass``) and only count as
failures in strict mode.  ``tol=None`` marks report-only rows.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError
from .params import PhysicalParams

SUITES = ("identities", "bessel", "fractional", "free-kernel", "constant-A", "assembly",
          "constant-B", "propagator", "dirac", "perturbation")


@dataclass
class Check:
    suite: str
    name: str
    value: float
    tol: float = None
    expected_fail: bool = False
    detail: str = ""

    @property
    def status(self):
        if self.tol is None:
            return "report"
        ok = bool(np.isfinite(self.value) and self.value <= self.tol)
        if self.expected_fail:
            return "xpass" if ok else "xfail"
        return "pass" if ok else "fail"

    def failed(self, strict=False):
        s = self.status
        return s == "fail" or (strict and s in ("xfail", "xpass"))


@dataclass
class SuiteResult:
    name: str
    checks: list = field(default_factory=list)
    seconds: float = 0.0


class _Recorder:
    def __init__(self, suite, tolerances):
        self.suite = suite
        self.tolerances = tolerances or {}
        self.checks = []

    def tol(self, name, default):
        key = f"{self.suite}.{name}"
        return float(self.tolerances.get(key, self.tolerances.get(name, default)))

    def add(self, name, value, default_tol, expected_fail=False, detail=""):
        tol = None if default_tol is None else self.tol(name, default_tol)
        self.checks.append(Check(self.suite, name, float(value), tol, expected_fail, detail))


def _grid(lo, hi, n=5):
    return np.linspace(lo, hi, n)


# ------------------------------------------------------------------ suites


def suite_identities(rec, params):
    from .fractional import density_bromwich_check
    from .kernels import bessel_laplace_identity, resolvent_kernel_identity, spectral_density_identity

    pts = [(m, r) for m in _grid(0.5, 4) for r in _grid(0.5, 4)]
    rec.add("resolvent_kernel", max(resolvent_kernel_identity(m, r, lam)[2]
                                    for m, r in pts for lam in (0.0, 3.0)), 1e-8)
    rec.add("spectral_density", max(spectral_density_identity(m, r)[2] for m, r in pts), 1e-6)
    rec.add("bessel_laplace", max(bessel_laplace_identity(r * r / 4, m * m)[2] for m, r in pts), 1e-8)
    rec.add("subordination_contour", max(abs(density_bromwich_check(t, s))
                                         for t in _grid(0.2, 5) for s in _grid(0.2, 5)), 1e-6)


def suite_bessel(rec, params):
    from .special import bessel_k, bessel_k_half

    u = np.geomspace(1e-3, 30, 400)
    k0, k1, k2, k3 = (bessel_k(n, u) for n in range(4))
    rec.add("recurrence_K2", np.max(np.abs(k2 - k0 - 2 * k1 / u) / k2), 1e-12)
    rec.add("recurrence_K3", np.max(np.abs(k3 - k1 - 4 * k2 / u) / k3), 1e-12)
    us = 1e-3
    rec.add("small_u_K1", abs(us * bessel_k(1, us) - 1), 1e-3)
    rec.add("small_u_K0", abs(bessel_k(0, us) / np.log(1 / us) - 1), 1e-3, expected_fail=True,
            detail="next order is (ln 2 - euler_gamma)/ln(1/u)")
    ul = 20.0
    rec.add("large_u_K1", abs(np.exp(ul) * ul**1.5 * bessel_k(1, ul) / ul / np.sqrt(np.pi / 2) - 1),
            1e-2, expected_fail=True, detail="next order is 3/(8u)")
    small = np.geomspace(1e-4, 0.1, 200)
    a, b, c = bessel_k(1, small) / small, bessel_k_half(small) / np.sqrt(small), bessel_k(0, small)
    rec.add("half_order_exact", np.max(np.abs(b * small * np.exp(small) / np.sqrt(np.pi / 2) - 1)), 1e-14)
    # "much greater" read as a factor of at least 4 (the ratio is 4.7 at u = 0.1)
    rec.add("small_u_ordering_violations", np.sum(~((a > b) & (b > 4 * c))), 0.5)
    large = np.linspace(3, 60, 300)
    a, b, c = bessel_k(1, large) / large, bessel_k_half(large) / np.sqrt(large), bessel_k(0, large)
    rec.add("large_u_ordering_violations", np.sum(~((c > b) & (b > a))), 0.5)
    weighted = large * bessel_k(0, large) > 2 * bessel_k(1, large)
    rec.add("mass_weighted_dominance_violations", np.sum(~weighted), 0.5)


def suite_fractional(rec, params):
    import scipy.linalg

    from .fractional import (SemigroupHandle, balakrishnan_sqrt_apply, resolvent_from_semigroup,
                             subordinate_apply)

    rng = np.random.default_rng(20240611)
    worst_sqrt = worst_sub = worst_res = 0.0
    bound_violations = 0
    for i in range(20):
        n = int(rng.integers(2, 17))
        Mx = rng.normal(size=(n, n)) / np.sqrt(n)
        A = -(Mx.T @ Mx + 0.5 * np.eye(n))
        v = rng.normal(size=n)
        sg = SemigroupHandle.from_matrix(A)
        root = scipy.linalg.sqrtm(-A).real
        ref = root @ v
        worst_sqrt = max(worst_sqrt, np.linalg.norm(balakrishnan_sqrt_apply(sg, v) - ref) / np.linalg.norm(ref))
        if i < 8:
            ref = scipy.linalg.expm(-root) @ v
            got = subordinate_apply(sg, 1.0, v)
            worst_sub = max(worst_sub, np.linalg.norm(got - ref) / np.linalg.norm(ref))
            lam = 0.7 + 0.3j
            got = resolvent_from_semigroup(sg, lam, v)
            ref = np.linalg.solve(lam * np.eye(n) - A, v)
            worst_res = max(worst_res, np.linalg.norm(got - ref) / np.linalg.norm(ref))
            if np.linalg.norm(got) > sg.M * np.linalg.norm(v) / (lam.real - sg.growth_bound) * (1 + 1e-12):
                bound_violations += 1
    rec.add("balakrishnan_vs_sqrtm", worst_sqrt, 1e-6)
    rec.add("subordinated_vs_expm", worst_sub, 1e-6)
    rec.add("resolvent_laplace", worst_res, 1e-8)
    rec.add("resolvent_bound_violations", bound_violations, 0.5)


def suite_free_kernel(rec, params):
    from .fields import RadialGrid, relative_l2, scalar_from_function
    from .kernels import apply_free, compton_decay_rate
    from .spectral import radial_apply_spectral

    for sigma in (0.5, 1.0, 2.0):
        grid = RadialGrid.gauss_legendre(12 * sigma, panels=int(48 * max(1, sigma)), order=10)
        psi = scalar_from_function(grid, lambda r, s=sigma: np.exp(-r * r / (2 * s * s)),
                                   support=9 * sigma)
        got = apply_free(psi, params).values[0]
        ref = radial_apply_spectral(psi, params).values[0]
        w = grid.r**2 * grid.weights
        rec.add(f"gaussian_sigma_{sigma:g}", relative_l2(got, ref, w), 1e-3)
    grid = RadialGrid.gauss_legendre(4.0, panels=8, order=8)
    one = scalar_from_function(grid, lambda r: np.ones_like(np.asarray(r, dtype=float)), support=np.inf)
    out = apply_free(one, params).values[0]
    rec.add("constant_field", np.max(np.abs(out - params.rest_energy)) / params.rest_energy, 1e-10)
    rate, _, _ = compton_decay_rate(params)
    rec.add("compton_decay_rate", abs(rate / params.mu - 1), 0.1)


def _ball_points(grid, radius):
    pts = grid.points()
    return pts[np.linalg.norm(pts, axis=-1) <= radius + 1e-12]


def suite_constant_A(rec, params):
    from .fields import PeriodicGrid, relative_l2, scalar_from_function
    from .kernels import apply_constant_A
    from .spectral import apply_spectral

    grid = PeriodicGrid((48, 48, 48), 0.5)
    psi = scalar_from_function(grid, lambda p: np.exp(-np.sum(p * p, axis=-1) / 2), support=7.0)
    pts = _ball_points(grid, 1.2)
    idx = np.flatnonzero(np.linalg.norm(grid.points(), axis=-1) <= 1.2 + 1e-12)
    for amp in (0.1, 0.3, 0.6):
        A = np.array([amp, 0.0, 0.0])
        a = params.gauge_wavevector(A)
        got = apply_constant_A(psi, A, params, points=pts)[0]
        ref = apply_spectral(psi, params, gauge_a=a).values.reshape(-1)[idx]
        rec.add(f"gauge_covariance_a_{amp:g}", relative_l2(got, ref), 1e-3)


def suite_assembly(rec, params):
    from .assembly import general_assembly
    from .fields import Field, PeriodicGrid, SpinorField, relative_l2, scalar_from_function
    from .kernels import apply_constant_A, apply_free
    from .magnetic import apply_constant_B, symmetric_gauge

    grid = PeriodicGrid((16, 16, 16), 0.5)

    def gauss(p):
        return np.exp(-np.sum(p * p, axis=-1) / 2) * (1 + 0.3 * p[..., 0])

    psi = scalar_from_function(grid, gauss, support=7.0)
    mu = scalar_from_function(grid, lambda p: np.full(p.shape[:-1], params.mu))
    pts = _ball_points(grid, 1.0)

    def vector_field(fn):
        vals = np.moveaxis(fn(grid.points()), -1, 0).reshape((3,) + grid.shape)
        return Field(grid, vals, lambda p: np.moveaxis(fn(p), -1, 0))

    got = general_assembly(mu, None, None, psi, params, points=pts)
    rec.add("reduction_free", relative_l2(got, apply_free(psi, params, points=pts)), 1e-10)
    A = np.array([0.3, -0.1, 0.2])
    a = np.asarray(params.gauge_wavevector(A))
    af = vector_field(lambda p: np.broadcast_to(a, p.shape))
    got = general_assembly(mu, af, a, psi, params, points=pts)
    rec.add("reduction_constant_A", relative_l2(got, apply_constant_A(psi, A, params, points=pts)), 1e-10)
    B = np.array([0.2, -0.1, 0.3])
    af = vector_field(lambda p: symmetric_gauge(p, B, params))
    got = general_assembly(mu, af, None, psi, params, points=pts)
    spinor = SpinorField(grid, np.stack([psi.values[0]] * 4),
                         lambda p: np.stack([gauss(p)] * 4), 7.0)
    ref = apply_constant_B(spinor, B, params, construction="scalar", points=pts)
    rec.add("reduction_constant_B", max(relative_l2(got[0], ref[c]) for c in range(4)), 1e-8)


def suite_constant_B(rec, params):
    from .magnetic import compare_constructions, mass_matrix, polar_decompose

    unit = PhysicalParams()
    mm = mass_matrix([0, 0, 0.5], unit, "verbatim")
    rec.add("verbatim_axial_diagonal", np.max(np.abs(mm.mu_squared - np.diag([0.5, 0.5, 1.5, 1.5]))), 1e-14)
    ev = np.sort_complex(mass_matrix([0.5, 0, 0], unit, "verbatim").eigenvalues)
    rec.add("verbatim_transverse_pairs", np.max(np.abs(ev - np.array([1 - 0.5j, 1 - 0.5j, 1 + 0.5j, 1 + 0.5j]))), 1e-12)
    worst = 0.0
    for B in ([0.5, 0, 0], [0, 0, 0.5], [0.3, -0.2, 0.4]):
        for c in ("verbatim", "hermitian"):
            worst = max(worst, polar_decompose(mass_matrix(B, unit, c))[2])
    rec.add("polar_residual", worst, 1e-12)
    cmp_axial = compare_constructions([0, 0, 0.5], unit)
    rec.add("constructions_axial_agree", cmp_axial["max_difference"], 1e-12)
    cmp = compare_constructions([0.5, 0, 0], unit)
    rec.add("constructions_transverse_difference", cmp["max_difference"], None,
            detail="verbatim " + " ".join(f"{z:.6g}" for z in cmp["verbatim"])
            + " | hermitian " + " ".join(f"{z:.6g}" for z in cmp["hermitian"]))


def suite_propagator(rec, params):
    from .fields import RadialGrid, relative_l2, scalar_from_function
    from .propagator import (LightConeRegion, apply_U, imaginary_time_kernel, region_classify,
                             subordinated_heat_kernel, subordination_quadrature)
    from .spectral import radial_evolve_spectral

    wrong = 0
    for ct in np.linspace(-3, 3, 61):
        for r in np.linspace(0, 3, 31):
            if abs(abs(ct) - r) < 1e-12:
                continue
            want = (LightConeRegion.FUTURE_TIMELIKE if ct > r else
                    LightConeRegion.PAST_TIMELIKE if ct < -r else LightConeRegion.SPACELIKE)
            wrong += region_classify(ct, r) is not want
    rec.add("region_classification_errors", wrong, 0.5)
    grid = RadialGrid.gauss_legendre(12.0, panels=48, order=10)
    psi = scalar_from_function(grid, lambda r: np.exp(-r * r / 2), support=9.0)
    w = grid.r**2 * grid.weights
    for mct in (0.25, 0.5):
        t = mct / (params.mu * params.c)
        got = apply_U(psi, t, params=params).values[0]
        ref = radial_evolve_spectral(psi, t, params).values[0]
        rec.add(f"evolve_match_mu_ct_{mct:g}", relative_l2(got, ref, w), 1e-2)
    t = 1e-3 / (params.mu * params.c)
    got = apply_U(psi, t, params=params).values[0]
    rec.add("small_t_identity", relative_l2(got, psi.values[0], w), 1e-2)
    worst_wick = worst_sub = 0.0
    for tau in (0.3, 0.7, 1.5):
        for r in (0.2, 1.0, 2.5):
            h = subordinated_heat_kernel(r, tau, params)
            worst_wick = max(worst_wick, abs(imaginary_time_kernel(tau, r, params) - h) / h)
            worst_sub = max(worst_sub, abs(subordination_quadrature(r, tau, params) - h) / h)
    rec.add("imaginary_time_match", worst_wick, 1e-8)
    rec.add("subordination_quadrature", worst_sub, 1e-8)


def suite_dirac(rec, params):
    from .dirac import (defect_scaling, dirac_block, dirac_lattice, eigenpair_residuals,
                        identity_residual, sqrt_equation_check)

    rng = np.random.default_rng(7)
    worst = herm = 0.0
    for _ in range(50):
        res = identity_residual(dirac_block(rng.normal(size=3), rng.normal(size=3), rng.normal(), params))
        worst = max(worst, res["identity"])
        herm = max(herm, res["hermitian"])
    rec.add("squared_identity_plane_wave", worst, 1e-12)
    rec.add("squared_hermitian_plane_wave", herm, 1e-12)
    op = dirac_lattice(160, 0.1, V=lambda x: 0.4 * params.rest_energy * np.tanh(x), params=params)
    rec.add("squared_identity_lattice", identity_residual(op)["identity"], 1e-12)
    _, res = eigenpair_residuals(op, 5)
    rec.add("lattice_eigenpair_residual", np.max(res), 1e-8)
    rows = sqrt_equation_check(dirac_block([0, 0, 0], params=params))
    rec.add("sqrt_equation_free_rest", max(r.beta_left for r in rows), 1e-10)
    rows = sqrt_equation_check(dirac_block([0.3, -0.2, 0.5], params=params))
    rec.add("sqrt_equation_free_signed", max(r.signed for r in rows), 1e-10)
    rec.add("sqrt_equation_free_moving_beta", max(r.beta_left for r in rows), None,
            detail="beta sqrt(M) at nonzero k; eigenvectors of D are not eigenvectors of beta")
    rows = sqrt_equation_check(dirac_block([0, 0, 1.0], V=0.25, params=params))
    rec.add("sqrt_equation_constant_V_signed", max(r.signed for r in rows), 1e-10)
    slope, _ = defect_scaling([0.025, 0.05, 0.1], params=params)
    rec.add("schrodinger_defect_slope", abs(slope - 2.0), 0.1)


def suite_perturbation(rec, params):
    from .dirac import perturbation_series

    rng = np.random.default_rng(11)
    worst = -np.inf
    for target in (0.1, 0.3, 0.5):
        n = 6
        Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
        g = rng.uniform(1.0, 3.0, n)
        ratio = rng.uniform(-1, 1, n)
        ratio *= target / np.max(np.abs(ratio))
        G = Q @ np.diag(g) @ Q.T
        F = Q @ np.diag(g * ratio) @ Q.T
        _, led = perturbation_series(G, F, 4)
        errs = np.array(led.errors)
        ratios = errs[1:] / errs[:-1]
        worst = max(worst, float(np.max(ratios)) - led.norm_GinvF)
    rec.add("error_ratio_excess", worst, 0.05)
    approx, led = perturbation_series(np.array([[4.0]]), np.array([[0.4]]), 2)
    rec.add("scalar_example_series", abs(approx[0, 0].real - 2.09750), 5e-6)
    rec.add("scalar_example_exact", abs(np.sqrt(4.4) - 2.0976177), 5e-8)


RUNNERS = {
    "identities": suite_identities,
    "bessel": suite_bessel,
    "fractional": suite_fractional,
    "free-kernel": suite_free_kernel,
    "constant-A": suite_constant_A,
    "assembly": suite_assembly,
    "constant-B": suite_constant_B,
    "propagator": suite_propagator,
    "dirac": suite_dirac,
    "perturbation": suite_perturbation,
}


def run(name, params=None, tolerances=None):
    """Run one suite and return a SuiteResult."""
    if name not in RUNNERS:
        raise UsageError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    params = params or PhysicalParams()
    rec = _Recorder(name, tolerances)
    start = time.perf_counter()
    RUNNERS[name](rec, params)
    return SuiteResult(name, rec.checks, time.perf_counter() - start)
