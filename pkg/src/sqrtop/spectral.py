r"""Fourier-multiplier reference implementation of the square-root operator.

Periodic 3D fields are handled with the FFT.  Radial fields use the
spherical sine transform

.. math::
    \hat\psi(k) = \frac{4\pi}{k}\int_0^\infty r\psi(r)\sin(kr)\,dr,\qquad
    \psi(r) = \frac{1}{2\pi^2 r}\int_0^\infty k\hat\psi(k)\sin(kr)\,dk,

with composite Gauss-Legendre rules in both variables.  A constant gauge
wavevector ``a`` shifts the symbol to ``k - a``, which is the exact Fourier
image of conjugation by ``exp(i a.x)``.
"""

import numpy as np

from .errors import AccuracyError, UsageError
from .fields import Field, PeriodicGrid
from .params import PhysicalParams

_DEFAULT = PhysicalParams()


def symbol(k, params=_DEFAULT):
    """sqrt(c^2 hbar^2 |k|^2 + m^2 c^4) for a 3-vector or (..., 3) array ``k``."""
    k = np.asarray(k, dtype=float)
    k2 = np.sum(k * k, axis=-1)
    return np.sqrt(params.hbar_c**2 * k2 + params.rest_energy**2)


def symbol_of_norm(kn, params=_DEFAULT):
    kn = np.asarray(kn, dtype=float)
    return np.sqrt(params.hbar_c**2 * kn * kn + params.rest_energy**2)


class SpectralBackend:
    """Cached multiplier table for one periodic grid and parameter set."""

    def __init__(self, grid, params=_DEFAULT, gauge_a=None):
        if not isinstance(grid, PeriodicGrid):
            raise UsageError("spectral application needs a periodic grid")
        self.grid = grid
        self.params = params
        kx, ky, kz = grid.wavevectors()
        if gauge_a is not None:
            a = np.asarray(gauge_a, dtype=float)
            kx, ky, kz = kx - a[0], ky - a[1], kz - a[2]
        k2 = kx * kx + ky * ky + kz * kz
        self.multiplier = np.sqrt(params.hbar_c**2 * k2 + params.rest_energy**2)
        self.multiplier.setflags(write=False)

    def apply(self, values, power=1):
        spec = np.fft.fftn(values, axes=(-3, -2, -1))
        return np.fft.ifftn(spec * self.multiplier**power, axes=(-3, -2, -1))

    def propagate(self, values, t, signs=None):
        phase = np.exp(-1j * t * self.multiplier / self.params.hbar)
        spec = np.fft.fftn(values, axes=(-3, -2, -1))
        if signs is None:
            return np.fft.ifftn(spec * phase, axes=(-3, -2, -1))
        out = np.empty_like(spec)
        conj_phase = np.conj(phase)
        for c, s in enumerate(signs):
            out[c] = spec[c] * (phase if s > 0 else conj_phase)
        return np.fft.ifftn(out, axes=(-3, -2, -1))


def _require_periodic(psi):
    if not isinstance(psi.grid, PeriodicGrid):
        raise UsageError("apply_spectral needs a field on a periodic grid")


def apply_spectral(psi, params=_DEFAULT, gauge_a=None, power=1):
    """Apply the multiplier (to ``power``) on a periodic grid."""
    _require_periodic(psi)
    backend = SpectralBackend(psi.grid, params, gauge_a)
    return psi.with_values(backend.apply(psi.values, power))


def evolve_spectral(psi, t, params=_DEFAULT, gauge_a=None, beta=None):
    """Multiply each mode by exp(-i t symbol / hbar).

    For four-component fields ``beta`` defaults to the Dirac-Pauli signs
    (+, +, -, -) so the lower components run backwards in phase.
    """
    _require_periodic(psi)
    backend = SpectralBackend(psi.grid, params, gauge_a)
    if beta is None and psi.components == 4:
        beta = (1, 1, -1, -1)
    return psi.with_values(backend.propagate(psi.values, t, beta))


# --------------------------------------------------------------- radial oracle


def _gl_panels(a, b, panel, order):
    n = max(1, int(np.ceil((b - a) / panel)))
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, n + 1)
    lo, hi = edges[:-1, None], edges[1:, None]
    return ((hi - lo) / 2 * x + (hi + lo) / 2).ravel(), ((hi - lo) / 2 * w).ravel()


def sine_transform(r, w, values, k):
    """Forward spherical transform from radial quadrature data to wavenumbers ``k``."""
    s = np.sin(np.outer(k, r))
    return 4 * np.pi / k * (s @ (w * r * values))


def inverse_sine_transform(k, wk, spec, rho):
    # sin(k rho) / rho written through sinc so rho = 0 is allowed
    s = np.sinc(np.outer(rho, k) / np.pi) * k
    return (s @ (wk * k * spec)) / (2 * np.pi**2)


def _choose_kmax(r, w, values, tol):
    rmax = float(np.max(r))
    dr = np.max(np.diff(np.sort(r)))
    # beyond klim the forward rule aliases; the transform must have decayed well before
    klim = np.pi / (4 * dr)
    probe = np.linspace(klim / 400, klim, 400)
    mag = np.abs(sine_transform(r, w, values, probe)) * (1 + probe)
    scale = np.max(mag)
    above = np.nonzero(mag > tol * scale)[0]
    if len(above) == 0:
        return probe[0], rmax
    last = above[-1]
    if probe[last] > 0.8 * klim:
        raise AccuracyError(
            "field transform does not decay within the grid's resolution",
            {"k_limit": klim, "tail_ratio": float(mag[-1] / scale)},
        )
    return min(1.25 * probe[last] + 1.0, klim), rmax


def _radial_multiplier_apply(psi, mult, radii=None, tol=1e-12, k_order=12):
    grid = psi.grid
    if grid.kind != "radial":
        raise UsageError("radial oracle needs a radial field")
    vals = psi.values[0]
    edge = np.abs(vals[np.argmax(grid.r)])
    if edge > 1e-10 * np.max(np.abs(vals)):
        raise AccuracyError(
            "field does not decay at the grid edge", {"edge_ratio": float(edge / np.max(np.abs(vals)))}
        )
    r, w = grid.r, grid.weights
    kmax, rmax = _choose_kmax(r, w, vals, tol)
    rho = r if radii is None else np.asarray(radii, dtype=float)
    results = []
    for panel in (2.0 / rmax, 1.0 / rmax):
        k, wk = _gl_panels(0.0, kmax, panel, k_order)
        spec = sine_transform(r, w, vals, k)
        results.append(inverse_sine_transform(k, wk, spec * mult(k), rho))
    err = float(np.max(np.abs(results[1] - results[0])))
    if radii is not None:
        return results[1], err
    return psi.with_values(results[1][None]), err


def radial_apply_spectral(psi, params=_DEFAULT, power=1, radii=None, return_error=False):
    """Square-root operator on a radial field via the spherical sine transform.

    With ``radii`` the result is evaluated there and returned as an array;
    otherwise a field on the input grid is returned.
    """
    out, err = _radial_multiplier_apply(psi, lambda k: symbol_of_norm(k, params) ** power, radii)
    return (out, err) if return_error else out


def radial_evolve_spectral(psi, t, params=_DEFAULT, radii=None, return_error=False):
    """exp(-i t symbol / hbar) applied to a radial field."""
    out, err = _radial_multiplier_apply(
        psi, lambda k: np.exp(-1j * t * symbol_of_norm(k, params) / params.hbar), radii
    )
    return (out, err) if return_error else out


def quadratic_form(psi, params=_DEFAULT, gauge_a=None):
    """Return (<psi, Op psi>, sum symbol |psi_hat|^2 / N) on a periodic grid."""
    _require_periodic(psi)
    backend = SpectralBackend(psi.grid, params, gauge_a)
    direct = np.vdot(psi.values, backend.apply(psi.values))
    spec = np.fft.fftn(psi.values, axes=(-3, -2, -1))
    parseval = np.sum(backend.multiplier * np.abs(spec) ** 2) / psi.grid.size
    return direct, parseval
