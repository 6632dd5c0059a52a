r"""Bessel-kernel representation of the square-root operator.

The operator is applied in subtraction form

.. math::
    \mathcal{S}\psi(x) = \frac{\hbar c}{2\pi^2}\int
        \bigl[\psi(x) - e^{i a\cdot(x-y)}\psi(y)\bigr]
        \frac{\mu^2 K_2(\mu|x-y|)}{|x-y|^2}\,dy + \hbar c\mu\,\psi(x),

whose Fourier symbol is :math:`\hbar c\sqrt{|k-a|^2+\mu^2}`.  The local term
:math:`\hbar c\mu\psi(x) = mc^2\psi(x)` carries the delta-function part of the
kernel.  ``LEVY_CONSTANT`` is the dimensionless factor :math:`1/2\pi^2`; see
``scripts/derive_levy_constant.py`` for its independent derivation.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.integrate

from . import quadrature as quad
from .errors import AccuracyError, DomainError, NumericalError, UsageError
from .fields import PeriodicGrid, RadialGrid
from .params import PhysicalParams
from .special import bessel_k, bessel_k_complex_upto3, bessel_k_upto3

LEVY_CONSTANT = 0.05066059182116889  # 1 / (2 pi^2)

_DEFAULT = PhysicalParams()


@dataclass(frozen=True)
class QuadratureSpec:
    """Resolution knobs for the kernel engines.

    ``panel``/``order`` set the composite radial Gauss rule, ``bandwidth`` the
    largest wavenumber the angular rule must resolve, ``support`` overrides
    the radius beyond which the input field is treated as zero.
    """

    panel: float = 0.5
    order: int = 8
    bandwidth: float = 6.0
    n_min: int = 6
    n_max: int = 96
    support: float = None

    def refined(self):
        return QuadratureSpec(self.panel / 2, self.order, self.bandwidth * 1.5,
                              self.n_min + 4, self.n_max, self.support)


# ------------------------------------------------------------- closed forms


def free_effective_kernel(mu, r):
    """K0(mu r)/r^2 + 2 K1(mu r)/(mu r^3), which equals K2(mu r)/r^2."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0) or mu <= 0:
        raise DomainError("mu and r must be positive")
    k = bessel_k_upto3(mu * r)
    out = k[0] / r**2 + 2 * k[1] / (mu * r**3)
    return out.item() if out.ndim == 0 else out


def resolvent_kernel_identity(mu, r, lam):
    r"""Heat-kernel Laplace transform against the Yukawa closed form.

    lhs = int_0^inf exp(-r^2/4t - (mu^2 + lam) t) (4 pi t)^{-3/2} dt,
    rhs = exp(-sqrt(lam + mu^2) r) / (4 pi r).
    """
    if mu <= 0 or r <= 0 or lam < 0:
        raise DomainError("need mu, r > 0 and lam >= 0")
    kappa2 = mu * mu + lam
    peak = r / (2 * np.sqrt(kappa2))

    def f(t):
        return np.exp(-r * r / (4 * t) - kappa2 * t) / (4 * np.pi * t) ** 1.5

    lhs = _quad_sum(f, [0.0, peak, 4 * peak, np.inf])
    rhs = np.exp(-np.sqrt(kappa2) * r) / (4 * np.pi * r)
    return lhs, rhs, abs(lhs - rhs) / abs(rhs)


def spectral_density_identity(mu, r):
    r"""int_0^inf exp(-sqrt(lam + mu^2) r) / r dlam / sqrt(lam) against 2 mu K1(mu r) / r.

    Evaluated with lam = s^2 so the endpoint singularity disappears.
    """
    if mu <= 0 or r <= 0:
        raise DomainError("need mu, r > 0")
    scale = max(mu, 1.0 / r)
    lhs = _quad_sum(lambda s: 2 * np.exp(-np.sqrt(s * s + mu * mu) * r) / r,
                    [0.0, scale, 10 * scale, np.inf])
    rhs = 2 * mu * bessel_k(1, mu * r) / r
    return lhs, rhs, abs(lhs - rhs) / abs(rhs)


def bessel_laplace_identity(a, p):
    """int_0^inf exp(-a/s - p s) s^{-3} ds against 2 (p/a) K2(2 sqrt(a p))."""
    if a <= 0 or p <= 0:
        raise DomainError("need a, p > 0")
    peak = np.sqrt(a / p)
    lhs = _quad_sum(lambda s: np.exp(-a / s - p * s) / s**3, [0.0, peak, 10 * peak, np.inf])
    rhs = 2 * (p / a) * bessel_k(2, 2 * np.sqrt(a * p))
    return lhs, rhs, abs(lhs - rhs) / abs(rhs)


def _quad_sum(f, breaks):
    total = 0.0
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        val, err = scipy.integrate.quad(f, lo, hi, epsabs=0.0, epsrel=1e-13, limit=400)[:2]
        if not np.isfinite(val):
            raise NumericalError("quadrature failed", {"interval": (lo, hi), "error": err})
        total += val
    return total


# ------------------------------------------------------------ profiles


def regime_label(u):
    """singular for mu r <= 0.1, compton up to 3, asymptotic beyond."""
    u = np.asarray(u, dtype=float)
    return np.where(u <= 0.1, "singular", np.where(u <= 3.0, "compton", "asymptotic"))


@dataclass
class KernelProfile:
    kind: str
    r: np.ndarray
    values: np.ndarray
    regime: np.ndarray
    meta: dict = field(default_factory=dict)

    def to_csv(self):
        lines = [f"# {k} = {v}" for k, v in self.meta.items()]
        if np.iscomplexobj(self.values):
            lines.append("r,re,im,regime")
            for r, v, g in zip(self.r, self.values, self.regime):
                lines.append(f"{float(r)!r},{float(v.real)!r},{float(v.imag)!r},{g}")
        else:
            lines.append("r,value,regime")
            for r, v, g in zip(self.r, self.values, self.regime):
                lines.append(f"{float(r)!r},{float(v)!r},{g}")
        return "\n".join(lines) + "\n"


def kernel_profile(kind, r, params=_DEFAULT, a=None, B=None, construction="hermitian"):
    """Tabulate the jump kernel mu^2 K2(mu r) / r^2 (times LEVY_CONSTANT hbar c).

    ``constant-A`` multiplies by the phase exp(i |a| r) along the direction of
    ``a``; ``constant-B`` reports the channel average of the matrix kernel.
    """
    r = np.asarray(r, dtype=float)
    if r.size == 0:
        raise UsageError("empty range")
    mu = params.mu
    pref = LEVY_CONSTANT * params.hbar_c
    meta = {"kind": kind, "levy_constant": LEVY_CONSTANT, **params.as_dict(), "mu": mu}
    if kind == "free":
        vals = pref * mu**2 * free_effective_kernel(mu, r)
    elif kind == "constant-A":
        a = np.zeros(3) if a is None else np.asarray(a, dtype=float)
        vals = pref * mu**2 * free_effective_kernel(mu, r) * np.exp(1j * np.linalg.norm(a) * r)
        meta["a"] = [float(x) for x in a]
    elif kind == "constant-B" and (B is None or not np.any(B)):
        # zero field: the matrix mass is mu^2 I, so use the scalar evaluation
        vals = pref * mu**2 * free_effective_kernel(mu, r)
        meta["B"] = [0.0, 0.0, 0.0]
        meta["construction"] = construction
    elif kind == "constant-B":
        from .magnetic import mass_matrix, matrix_function

        mm = mass_matrix(np.zeros(3) if B is None else B, params, construction)
        if np.min(np.abs(mm.eigenvalues)) <= 1e-12 * mu**2:
            raise DomainError("a mass channel vanishes for this field; the kernel is not integrable")
        mats = matrix_function(
            mm.mu_squared,
            lambda lam: lam[:, None] * bessel_k_complex_upto3(np.sqrt(lam)[:, None] * r[None, :])[2] / r**2,
        )
        avg = np.trace(mats, axis1=0, axis2=1) / 4
        vals = pref * avg.real
        meta["B"] = [float(x) for x in mm.B]
        meta["construction"] = construction
        meta["max_abs_imag"] = float(np.max(np.abs(avg.imag))) * pref
    else:
        raise UsageError(f"unknown kernel kind {kind!r}")
    return KernelProfile(kind, r, vals, regime_label(mu * r), meta)


def imaginary_term_limit(a, mu):
    r"""Small-r limit of the shell-averaged first extra term of the constant-A form.

    The integrand :math:`r^2\langle e^{ia\cdot z}\,i a\cdot z\rangle K_2(\mu r)/r^2`
    averages over directions to :math:`-s j_1(s) K_2(\mu r)` with
    :math:`s = |a| r`; as :math:`r \to 0` this tends to
    :math:`-2|a|^2 / 3\mu^2`.  The limit is real.
    """
    a = np.asarray(a, dtype=float)
    if mu <= 0:
        raise DomainError("mu must be positive")
    return complex(-2.0 * float(a @ a) / (3.0 * mu * mu))


def imaginary_term_shell_average(a, mu, r):
    """-s j1(s) K2(mu r) with s = |a| r: the angular average behind ``imaginary_term_limit``."""
    s = np.linalg.norm(np.asarray(a, dtype=float)) * np.asarray(r, dtype=float)
    with np.errstate(invalid="ignore", divide="ignore"):
        j1 = np.where(s > 1e-3, np.sin(s) / s**2 - np.cos(s) / s, s / 3 - s**3 / 30)
    return -s * j1 * bessel_k(2, mu * np.asarray(r, dtype=float))


# ------------------------------------------------------------ engines


def _sampler_for(psi, points):
    if psi.func is not None:
        pts = psi.grid.points() if points is None else np.asarray(points, dtype=float)
        return quad.AnalyticSampler(psi, pts)
    if points is not None:
        raise UsageError("sampled fields are evaluated on their own grid points")
    return quad.SpectralSampler(psi)


def _reach(psi, sampler, mu_re, spec):
    cutoff = 45.0 / mu_re
    support = spec.support if spec.support is not None else psi.support
    if support is None:
        return cutoff
    return min(cutoff, float(np.max(np.linalg.norm(sampler.points, axis=-1))) + support)


def covariant_integral(sampler, mu, a, rhi, spec):
    """int [psi(x) - e^{i a.z} psi(x - z)] mu^2 K2(mu r) / r^2 dz, r < rhi, plus the tail."""
    mu = complex(mu)
    psi0 = sampler.at_points()[..., None]
    a = None if a is None or not np.any(a) else np.asarray(a, dtype=float)

    def integrand(x, z, r, shifted):
        k2 = bessel_k_complex_upto3(mu * r)[2]
        if a is None:
            diff = psi0 - shifted
        else:
            diff = psi0 - np.exp(1j * (z @ a)) * shifted
        return diff * (mu * mu * k2 / (r * r))

    body = quad.sphere_integrate(sampler, integrand, rhi, spec.panel, spec.order,
                                 spec.bandwidth + (0 if a is None else np.linalg.norm(a)),
                                 spec.n_min, spec.n_max)
    return body + psi0[..., 0] * quad.k2_tail(mu, rhi)[0]


def _check_mu(params):
    if params.mu <= 0:
        raise DomainError("the Bessel-kernel form needs m > 0")


def _finish(psi, values, points, err, return_error):
    if points is None:
        out = psi.with_values(values.reshape((psi.components,) + psi.grid.shape))
    else:
        out = values
    return (out, err) if return_error else out


def sinc_deficit(x):
    """1 - sin(x)/x without cancellation near 0."""
    x = np.asarray(x, dtype=float)
    x2 = x * x
    series = x2 * (1 / 6 - x2 * (1 / 120 - x2 * (1 / 5040 - x2 / 362880)))
    safe = np.where(x < 0.1, 1.0, x)
    return np.where(x < 0.1, series, 1 - np.sin(safe) / safe)


def kernel_symbol(kn, mu, panel=0.5, order=8):
    """4 pi int_0^inf (1 - sin(k r)/(k r)) mu^2 K2(mu r) dr for each ``k`` in ``kn``.

    This is what the subtraction-form kernel does to a plane wave, integrated
    over angles analytically; times hbar c / (2 pi^2) it should equal
    hbar c (sqrt(k^2 + mu^2) - mu).
    """
    kn = np.atleast_1d(np.asarray(kn, dtype=float))
    r, w = quad.gl_rule(quad.graded_edges(45.0 / mu, panel), order)
    k2 = bessel_k_upto3(mu * r)[2]
    return 4 * np.pi * (sinc_deficit(np.outer(kn, r)) @ (w * mu * mu * k2))


def _periodic_multiplier_apply(psi, mu, a, params, spec):
    """Kernel applied to a sampled periodic field mode by mode.

    Each Fourier mode is an eigenfunction of the translation-invariant kernel,
    so the 3D integral reduces to :func:`kernel_symbol` at ``|k - a|``.
    """
    kx, ky, kz = psi.grid.wavevectors()
    kn = np.sqrt((kx - a[0]) ** 2 + (ky - a[1]) ** 2 + (kz - a[2]) ** 2)
    uniq, inv = np.unique(np.round(kn, 12), return_inverse=True)
    coeffs = np.fft.fftn(psi.values, axes=(-3, -2, -1))
    pref = params.hbar_c / (2 * np.pi**2)
    out = []
    for sp in (spec, spec.refined()):
        mult = pref * kernel_symbol(uniq, mu, sp.panel, sp.order)[inv].reshape(kn.shape)
        mult = mult + params.rest_energy
        out.append(np.fft.ifftn(coeffs * mult, axes=(-3, -2, -1)))
    err = float(np.max(np.abs(out[1] - out[0])))
    return psi.with_values(out[1]), err


def apply_free(psi, params=_DEFAULT, points=None, spec=None, tol=1e-6, return_error=False):
    """hbar c sqrt(-Laplacian + mu^2) applied to ``psi`` by the subtraction-form integral.

    Radial fields use the one dimensional shell engine and return a field on
    the same grid; periodic fields use the 3D engine at ``points`` (default:
    every grid point).  The error estimate compares against a refined rule
    and raises AccuracyError if it exceeds ``tol`` relative to the output.
    """
    _check_mu(params)
    mu = params.mu
    pref = params.hbar_c / (2 * np.pi**2)
    if isinstance(psi.grid, RadialGrid):
        func = psi.func
        if func is None:
            from scipy.interpolate import CubicSpline

            spline = CubicSpline(psi.grid.r, psi.values[0])

            def func(s, _sp=spline, _rmax=psi.grid.rmax):
                return np.where(s <= _rmax, _sp(np.minimum(s, _rmax)), 0.0)

        support = psi.support if psi.support is not None else psi.grid.rmax
        rho = psi.grid.r if points is None else np.asarray(points, dtype=float)
        vals = []
        for kw in ({}, {"panel": 0.125, "order": 14}):
            integral = quad.radial_subtraction_integral(func, rho, mu, support, **kw)
            vals.append(pref * integral + params.rest_energy * func(rho))
        err = float(np.max(np.abs(vals[1] - vals[0])))
        scale = max(float(np.max(np.abs(vals[1]))), 1e-300)
        if err > tol * scale:
            raise AccuracyError("radial quadrature did not converge",
                                {"error_estimate": err, "scale": scale})
        if points is None:
            out = psi.with_values(vals[1][None])
        else:
            out = vals[1]
        return (out, err) if return_error else out
    if not isinstance(psi.grid, PeriodicGrid):
        raise UsageError("unsupported grid")
    spec = spec or QuadratureSpec()
    if psi.func is None and points is None:
        out, err = _periodic_multiplier_apply(psi, mu, np.zeros(3), params, spec)
        return (out, err) if return_error else out
    sampler = _sampler_for(psi, points)
    rhi = _reach(psi, sampler, mu, spec)
    values = pref * covariant_integral(sampler, mu, None, rhi, spec) + params.rest_energy * sampler.at_points()
    err = None
    if return_error:
        fine = pref * covariant_integral(sampler, mu, None, rhi, spec.refined()) + params.rest_energy * sampler.at_points()
        err = float(np.max(np.abs(fine - values)))
    return _finish(psi, values, points, err, return_error)


def apply_constant_A(psi, A, params=_DEFAULT, points=None, spec=None, ledger=False,
                     return_error=False):
    """Square-root operator with constant vector potential ``A``.

    Uses the gauge-covariant kernel exp(i a.(x - y)) mu^2 K2 / r^2 with
    a = e A / (hbar c).  With ``ledger=True`` the two extra terms of the
    expanded constant-A form are evaluated separately and returned alongside
    (keys ``iaz_term``, ``a2_K1_term`` and their real/imaginary norms).
    """
    _check_mu(params)
    if isinstance(psi.grid, RadialGrid):
        raise UsageError("constant A breaks radial symmetry; use a periodic grid")
    mu = params.mu
    a = np.asarray(params.gauge_wavevector(A), dtype=float)
    pref = params.hbar_c / (2 * np.pi**2)
    spec = spec or QuadratureSpec()
    if psi.func is None and points is None and not ledger:
        out, err = _periodic_multiplier_apply(psi, mu, a, params, spec)
        return (out, err) if return_error else out
    sampler = _sampler_for(psi, points)
    rhi = _reach(psi, sampler, mu, spec)
    values = pref * covariant_integral(sampler, mu, a, rhi, spec) + params.rest_energy * sampler.at_points()
    err = None
    if return_error:
        fine = pref * covariant_integral(sampler, mu, a, rhi, spec.refined()) + params.rest_energy * sampler.at_points()
        err = float(np.max(np.abs(fine - values)))
    out = _finish(psi, values, points, err, return_error)
    if not ledger:
        return out
    terms = constant_A_extra_terms(sampler, mu, a, rhi, spec, params)
    return out, terms


def constant_A_extra_terms(sampler, mu, a, rhi, spec, params):
    """The i a.z K2 and a^2 K1 integrals of the expanded constant-A form."""
    pref = params.hbar_c / (2 * np.pi**2)

    def iaz(x, z, r, shifted):
        k2 = bessel_k(2, mu * r)
        az = z @ a
        return -np.exp(1j * az) * (1j * az) * shifted * (mu * mu * k2 / (r * r))

    def a2k1(x, z, r, shifted):
        k1 = bessel_k(1, mu * r)
        return -0.5 * float(a @ a) * np.exp(1j * (z @ a)) * shifted * (mu * k1 / r)

    bw = spec.bandwidth + np.linalg.norm(a)
    t1 = pref * quad.sphere_integrate(sampler, iaz, rhi, spec.panel, spec.order, bw,
                                      spec.n_min, spec.n_max)
    t2 = pref * quad.sphere_integrate(sampler, a2k1, rhi, spec.panel, spec.order, bw,
                                      spec.n_min, spec.n_max)
    norms = {
        name: (float(np.linalg.norm(t.real)), float(np.linalg.norm(t.imag)))
        for name, t in (("iaz_term", t1), ("a2_K1_term", t2))
    }
    return {"iaz_term": t1, "a2_K1_term": t2, "norms": norms}


def bump(R):
    """Smooth radial bump exp(1 - 1/(1 - (r/R)^2)) supported in r < R."""

    def f(r):
        r = np.asarray(r, dtype=float)
        x = np.clip(r / R, 0.0, 1.0)
        with np.errstate(divide="ignore", over="ignore"):
            return np.where(x < 1, np.exp(1 - 1 / np.maximum(1 - x * x, 1e-300)), 0.0)

    return f


def compton_decay_rate(params=_DEFAULT, R=1.0, offsets=None):
    """Fitted exponential decay rate of apply_free outside a compact source.

    The output beyond the support behaves like exp(-mu d) d^{-5/2}; the fit
    removes the power law and returns the slope of -log|S psi|.
    """
    _check_mu(params)
    mu = params.mu
    if offsets is None:
        offsets = np.linspace(5.0, 12.0, 8) / mu
    d = R + np.asarray(offsets, dtype=float)
    f = bump(R)
    integral = quad.radial_subtraction_integral(f, d, mu, R, panel=min(0.25, R / 8))
    vals = np.abs(params.hbar_c / (2 * np.pi**2) * integral)
    slope = np.polyfit(d, np.log(vals) + 2.5 * np.log(d), 1)[0]
    return float(-slope), d, vals
