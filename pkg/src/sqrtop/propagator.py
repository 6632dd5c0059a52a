r"""Heat-type semigroup and real-time propagator of the square-root operator.

The semigroup :math:`e^{-s\sqrt{-\Delta+\mu^2}}` (with ``s = c t``) has kernel

.. math::
    \kappa(s, r) = \frac{s}{2\pi^2}\,\frac{\mu^2K_2\big(\mu\sqrt{r^2+s^2}\big)}{r^2+s^2},

obtained by subordinating the heat kernel to the one-sided 1/2-stable law.
Real time corresponds to ``s = i c t``.  Off the light cone the continued
kernel reduces to Hankel functions inside the cone and to :math:`K_2`
outside it:

* future-timelike: :math:`\frac{ct}{4\pi}\mu^2H_2^{(2)}(\mu q)/q^2`,
* past-timelike:   :math:`-\frac{ct}{4\pi}\mu^2H_2^{(1)}(\mu q)/q^2`,
* spacelike:       :math:`\frac{ct}{4\pi}\frac{2i}{\pi}\mu^2K_2(\mu q)/q^2`,

with :math:`q = |c^2t^2 - r^2|^{1/2}`.  :func:`z_kernel` returns the bracketed
branch functions; ``convention="printed"`` keeps the historical sign of the
spacelike branch, ``"continued"`` the sign produced by the continuation.

:func:`apply_U` evaluates :math:`e^{-(\varepsilon + i)ct\sqrt{\cdot}}` with the
smooth continued kernel at two values of :math:`\varepsilon` and extrapolates
linearly to :math:`\varepsilon = 0`.  For ``\varepsilon > 0`` the cone
singularity is a peak of width :math:`\sim\varepsilon ct`, resolved with
radial panels graded toward ``r = c|t|``.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import integrate

from . import quadrature as quad
from .errors import AccuracyError, DomainError, SingularLocusError, UsageError
from .fields import PeriodicGrid, RadialGrid
from .kernels import QuadratureSpec, _sampler_for
from .params import PhysicalParams
from .special import bessel_k, bessel_k_complex, hankel

_DEFAULT = PhysicalParams()

EPSILONS = (0.02, 0.01)
# the 1D mode-by-mode path resolves a much narrower cone peak cheaply
MODE_EPSILONS = (0.002, 0.001)


class LightConeRegion(str, Enum):
    PAST_TIMELIKE = "past-timelike"
    SPACELIKE = "spacelike"
    FUTURE_TIMELIKE = "future-timelike"


def region_classify(ct, r):
    """Light-cone region of the separation (ct, r); the cone itself is an error."""
    if r < 0:
        raise DomainError("r must be nonnegative")
    if abs(ct) == r:
        raise SingularLocusError("separation lies on the light cone")
    if ct > r:
        return LightConeRegion.FUTURE_TIMELIKE
    if ct < -r:
        return LightConeRegion.PAST_TIMELIKE
    return LightConeRegion.SPACELIKE


def subordinated_heat_kernel(r, t, params=_DEFAULT):
    """Kernel of exp(-c t sqrt(-Laplacian + mu^2)) at separation ``r``."""
    if not t > 0:
        raise DomainError("t must be positive")
    s = params.c * t
    rho2 = np.asarray(r, dtype=float) ** 2 + s * s
    mu = params.mu
    if mu == 0:
        return s / (np.pi**2 * rho2 * rho2)
    return s / (2 * np.pi**2) * mu * mu * bessel_k(2, mu * np.sqrt(rho2)) / rho2


def subordination_quadrature(r, t, params=_DEFAULT):
    """Independent evaluation: heat kernels averaged over the 1/2-stable density."""
    if not t > 0:
        raise DomainError("t must be positive")
    s = params.c * t
    mu = params.mu

    def f(u):
        dens = s * u**-1.5 / np.sqrt(4 * np.pi) * np.exp(-s * s / (4 * u))
        return dens * (4 * np.pi * u) ** -1.5 * np.exp(-r * r / (4 * u) - mu * mu * u)

    peak = (r * r + s * s) / 10.0
    total = 0.0
    for lo, hi in ((0, peak), (peak, 10 * peak), (10 * peak, np.inf)):
        val, _ = integrate.quad(f, lo, hi, epsabs=0, epsrel=1e-12, limit=400)
        total += val
    return total


def z_kernel(ct, r, mu, convention="printed"):
    """Branch function of the real-time kernel (without the mu^2 ct / 4 pi factor).

    Returns ``(value, meta)``; ``meta`` records the region and the prefactor
    that turns the branch value into the kernel.
    """
    if convention not in ("printed", "continued"):
        raise UsageError("convention must be 'printed' or 'continued'")
    if not mu > 0:
        raise DomainError("mu must be positive")
    region = region_classify(ct, r)
    d = ct * ct - r * r
    q = np.sqrt(abs(d))
    if region is LightConeRegion.FUTURE_TIMELIKE:
        val = hankel(2, 2, mu * q) / d
    elif region is LightConeRegion.PAST_TIMELIKE:
        val = -hankel(2, 1, mu * q) / d
    else:
        sign = -1.0 if convention == "printed" else 1.0
        val = sign * 2j * bessel_k(2, mu * q) / (np.pi * (-d))
    meta = {"region": region.value, "prefactor": "c*beta/(4*pi)" if convention == "printed"
            else "mu^2*c*t/(4*pi)", "convention": convention}
    return complex(val), meta


def continued_kernel(s, r, mu):
    r"""kappa(s, r) for complex ``s`` with Re s >= 0, principal branch of the root."""
    s = np.asarray(s, dtype=complex)
    r = np.asarray(r, dtype=float)
    rho2 = r * r + s * s
    root = np.sqrt(rho2)
    return s / (2 * np.pi**2) * mu * mu * bessel_k_complex(2, mu * root) / rho2


def real_time_kernel(ct, r, mu):
    """Off-cone real-time kernel assembled from :func:`z_kernel` branches."""
    val, _ = z_kernel(ct, r, mu, convention="continued")
    return mu * mu * ct / (4 * np.pi) * val


def imaginary_time_kernel(tau, r, params=_DEFAULT):
    """Spacelike real-time branch evaluated at t = -i tau with complex arithmetic.

    Off the cone this must reproduce :func:`subordinated_heat_kernel` at ``tau``.
    """
    ct = -1j * params.c * tau
    d = r * r - ct * ct
    mu = params.mu
    val = ct / (4 * np.pi) * mu * mu * (2j / np.pi) * bessel_k_complex(2, mu * np.sqrt(d)) / d
    return complex(val)


@dataclass
class KernelTable:
    rows: list

    def to_csv(self):
        lines = ["ct,r,re,im,region"]
        for ct, r, v, reg in self.rows:
            lines.append(f"{float(ct)!r},{float(r)!r},{float(v.real)!r},{float(v.imag)!r},{reg}")
        return "\n".join(lines) + "\n"


def tabulate_kernel(ct_values, r_values, params=_DEFAULT):
    """Real-time kernel on a (ct, r) grid; points on the cone are skipped."""
    rows = []
    for ct in ct_values:
        for r in r_values:
            if abs(ct) == r or ct == 0:
                continue
            rows.append((float(ct), float(r), real_time_kernel(ct, r, params.mu),
                         region_classify(ct, r).value))
    return KernelTable(rows)


def cone_edges(ct, rhi, eps, panel=0.5):
    """Radial panel edges graded geometrically toward r = |ct| from both sides."""
    rc = abs(ct)
    offs = eps * 2.0 ** np.arange(-3, 60)
    offs = offs[offs < 0.5]
    inner = rc * (1 - offs[::-1])
    outer = rc * (1 + offs)
    edges = [0.0, rc * 0.25, *inner, rc, *outer, rc * 1.5]
    r = rc * 1.5
    while r < rhi:
        r = min(r + min(panel, max(r - rc, 0.05 * rc)), rhi)
        edges.append(r)
    return np.array(sorted(set(e for e in edges if e <= rhi)))


def _damped_s(ct, eps, beta):
    return eps * abs(ct) + 1j * beta * ct


def _radial_apply(func, rho, ct, eps, beta, mu, rhi, order, spanel):
    s = _damped_s(ct, eps, beta)
    edges = cone_edges(ct, rhi, eps, spanel)
    r, w = quad.gl_rule(edges, order)
    kap = continued_kernel(s, r, mu)
    out = np.empty(len(rho), dtype=complex)
    for i, p in enumerate(rho):
        centre = np.maximum(p, r)
        half = np.minimum(p, r)
        pieces = np.maximum(np.ceil(2 * half / spanel).astype(int), 1)
        avg = np.empty(len(r), dtype=complex)
        for m in np.unique(pieces):
            sel = pieces == m
            avg[sel] = quad._shell_deviation_direct(func, 0.0, centre[sel], half[sel], m, 10)
        out[i] = np.sum(w * 4 * np.pi * r * r * kap * avg)
    return out


def propagator_symbol(kn, ct, mu, eps, beta=1, panel=0.25, order=10):
    """4 pi int kappa(s, r) sin(k r)/(k r) r^2 dr at the damped time s = eps|ct| + i beta ct.

    The plane-wave eigenvalue of the damped kernel; for eps -> 0 it tends to
    exp(-i beta ct sqrt(k^2 + mu^2)).
    """
    kn = np.atleast_1d(np.asarray(kn, dtype=float))
    s = _damped_s(ct, eps, beta)
    r, w = quad.gl_rule(cone_edges(ct, abs(ct) + 45.0 / mu, eps, panel), order)
    kr = np.outer(kn, r)
    sinc = np.where(kr > 0, np.sin(kr) / np.where(kr > 0, kr, 1.0), 1.0)
    return sinc @ (w * 4 * np.pi * r * r * continued_kernel(s, r, mu))


def apply_U(psi, t, A=None, params=_DEFAULT, points=None, spec=None, beta=1, tol=1e-3,
            return_error=False):
    """Real-time propagator exp(-i beta t H / hbar) with constant ``A``.

    Radial fields (``A`` must vanish) use shell averages.  Periodic fields with
    a callable use the 3D engine at ``points``; sampled periodic fields are
    propagated mode by mode with :func:`propagator_symbol`.  The result is the
    linear extrapolation of the damped evolutions at the two values in
    ``EPSILONS`` (``MODE_EPSILONS`` on the mode-by-mode path).  The error
    estimate is the squared extrapolation step over the output scale; an
    AccuracyError is raised when it exceeds ``tol`` relative to the output.
    """
    if params.mu <= 0:
        raise DomainError("the Bessel-kernel form needs m > 0")
    if beta not in (1, -1):
        raise UsageError("beta must be +1 or -1")
    ct = params.c * t
    mu = params.mu
    if ct == 0:
        out = psi if points is None else psi.evaluate(points)
        return (out, 0.0) if return_error else out
    spec = spec or QuadratureSpec()
    eps_pair = EPSILONS
    if isinstance(psi.grid, RadialGrid):
        if A is not None and np.any(A):
            raise UsageError("a vector potential breaks radial symmetry; use a periodic grid")
        if psi.func is None:
            raise UsageError("radial propagation needs an analytic callable")
        support = psi.support if psi.support is not None else psi.grid.rmax
        rho = psi.grid.r if points is None else np.asarray(points, dtype=float)
        rhi = float(np.max(rho)) + support + abs(ct)
        vals = [_radial_apply(psi.func, rho, ct, e, beta, mu, rhi, 10, min(spec.panel, 0.25))
                for e in EPSILONS]
    elif isinstance(psi.grid, PeriodicGrid) and psi.func is None and points is None:
        b = 0.5 * np.asarray(params.gauge_wavevector(A if A is not None else np.zeros(3)))
        kx, ky, kz = psi.grid.wavevectors()
        kn = np.sqrt((kx - b[0]) ** 2 + (ky - b[1]) ** 2 + (kz - b[2]) ** 2)
        uniq, inv = np.unique(np.round(kn, 12), return_inverse=True)
        coeffs = np.fft.fftn(psi.values, axes=(-3, -2, -1))
        vals = []
        eps_pair = MODE_EPSILONS
        for e in eps_pair:
            mult = propagator_symbol(uniq, ct, mu, e, beta, min(spec.panel, 0.25))
            vals.append(np.fft.ifftn(coeffs * mult[inv].reshape(kn.shape), axes=(-3, -2, -1)))
    elif isinstance(psi.grid, PeriodicGrid):
        sampler = _sampler_for(psi, points)
        b = 0.5 * np.asarray(params.gauge_wavevector(A if A is not None else np.zeros(3)))
        support = spec.support if spec.support is not None else psi.support
        if support is None:
            support = 0.5 * min(psi.grid.lengths)
        rhi = support + abs(ct) + float(np.max(np.linalg.norm(sampler.points, axis=-1)))
        vals = []
        for e in EPSILONS:
            s = _damped_s(ct, e, beta)

            def integrand(x, z, r, shifted, s=s):
                phase = np.exp(1j * (z @ b))
                return continued_kernel(s, r, mu) * phase * shifted

            edges = cone_edges(ct, rhi, e, spec.panel)
            vals.append(quad.sphere_integrate(sampler, integrand, rhi, order=spec.order,
                                              bandwidth=spec.bandwidth + np.linalg.norm(b),
                                              n_min=spec.n_min, n_max=spec.n_max, edges=edges))
    else:
        raise UsageError("unsupported grid")
    e2, e1 = eps_pair
    coarse, fine = vals
    extrap = (e2 * fine - e1 * coarse) / (e2 - e1)
    # the extrapolation removes the first-order term; what is left scales
    # like the square of the step, relative to the output
    scale = max(float(np.max(np.abs(extrap))), 1e-300)
    step = float(np.max(np.abs(extrap - fine)))
    err = step * step / scale
    if err > tol * scale:
        raise AccuracyError("damping extrapolation did not meet tolerance",
                            {"error_estimate": err, "scale": scale})
    extrap = np.asarray(extrap).reshape((psi.components, -1)) if points is not None else extrap
    if points is None:
        out = psi.with_values(np.asarray(extrap).reshape((psi.components,) + psi.grid.shape))
    else:
        out = extrap
    return (out, err) if return_error else out
