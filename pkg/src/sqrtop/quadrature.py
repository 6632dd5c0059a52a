r"""Quadrature engines for the nonlocal kernel operators.

Two engines are provided.

``radial_subtraction_integral``
    For radial :math:`\psi` the integral over a sphere of radius ``r`` centred
    at distance :math:`\rho` from the origin collapses to

    .. math:: \frac{1}{2\rho r}\int_{|\rho-r|}^{\rho+r} s\,\psi(s)\,ds,

    so :math:`\int[\psi(x)-\psi(y)]k(|x-y|)dy` becomes a one dimensional
    integral in ``r`` whose inner integral is done by Gauss-Legendre.

``sphere_integrate``
    General 3D integrals :math:`\int f(x, z)\,dz` in spherical coordinates
    centred at every output point.  The angular rule (Gauss-Legendre in
    :math:`\cos\theta`, even uniform grid in :math:`\varphi`) is invariant
    under :math:`z\to -z`, so odd singular parts cancel pairwise and the
    principal value is taken exactly.  Angular resolution grows with ``r``
    and with the field bandwidth.
"""

from functools import lru_cache

import numpy as np

from .errors import UsageError
from .special import bessel_k_complex_upto3


@lru_cache(maxsize=64)
def _leggauss(n):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gl_rule(edges, order):
    """Composite Gauss-Legendre nodes and weights on consecutive ``edges``."""
    x, w = _leggauss(order)
    edges = np.asarray(edges, dtype=float)
    lo, hi = edges[:-1, None], edges[1:, None]
    return ((hi - lo) / 2 * x + (hi + lo) / 2).ravel(), ((hi - lo) / 2 * w).ravel()


def graded_edges(rhi, panel, levels=8):
    """Panel edges on [0, rhi]: geometric grading toward 0, then width <= panel."""
    if rhi <= 0:
        raise UsageError("upper limit must be positive")
    first = min(panel, rhi)
    grading = first * 2.0 ** -np.arange(levels, 0, -1)
    n = max(1, int(np.ceil((rhi - first) / panel)))
    body = np.linspace(first, rhi, n + 1) if rhi > first else np.array([first])
    return np.concatenate([[0.0], grading, body])


def angular_rule(n_theta):
    """Antipodally symmetric sphere rule: unit vectors (M, 3), weights summing to 4 pi."""
    ct, wt = _leggauss(n_theta)
    n_phi = 2 * n_theta
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    st = np.sqrt(1 - ct * ct)
    dirs = np.stack(
        [
            np.outer(st, np.cos(phi)).ravel(),
            np.outer(st, np.sin(phi)).ravel(),
            np.repeat(ct, n_phi),
        ],
        axis=-1,
    )
    w = np.repeat(wt, n_phi) * (2 * np.pi / n_phi)
    return dirs, w


def angular_count(r, bandwidth, n_min=6, n_max=96):
    """Gauss points in cos(theta) needed to resolve exp(i k r cos theta) for k <= bandwidth."""
    return int(np.clip(np.ceil(0.5 * bandwidth * r) + n_min, n_min, n_max))


class AnalyticSampler:
    """psi(x - z) from an analytic callable mapping (..., 3) points to (C, ...)."""

    def __init__(self, field, points):
        self.field = field
        self.points = np.asarray(points, dtype=float)

    def at_points(self):
        return self.field.evaluate(self.points)

    def shifted(self, z):
        y = self.points[:, None, :] - z[None, :, :]
        return self.field.evaluate(y.reshape(-1, 3)).reshape(
            (self.field.components, len(self.points), len(z))
        )


class SpectralSampler:
    """psi(x - z) on every grid point by FFT phase shifts (periodic wrap)."""

    def __init__(self, field, batch=64):
        grid = field.grid
        if grid.kind != "periodic":
            raise UsageError("spectral translation needs a periodic grid")
        self.field = field
        self.points = grid.points()
        self.spec = np.fft.fftn(field.values, axes=(-3, -2, -1))
        self.k = grid.wavevectors()
        self.batch = batch

    def at_points(self):
        return self.field.values.reshape(self.field.components, -1)

    def shifted(self, z):
        c = self.field.components
        out = np.empty((c, len(self.points), len(z)), dtype=complex)
        kx, ky, kz = self.k
        for start in range(0, len(z), self.batch):
            zz = z[start : start + self.batch]
            phase = np.exp(
                -1j
                * (
                    kx[None] * zz[:, 0, None, None, None]
                    + ky[None] * zz[:, 1, None, None, None]
                    + kz[None] * zz[:, 2, None, None, None]
                )
            )
            moved = np.fft.ifftn(self.spec[:, None] * phase[None], axes=(-3, -2, -1))
            out[:, :, start : start + len(zz)] = moved.reshape(c, len(zz), -1).transpose(0, 2, 1)
        return out


def sphere_integrate(sampler, integrand, rhi, panel=0.5, order=8, bandwidth=6.0,
                     n_min=6, n_max=96, levels=8, edges=None):
    """Sum over shells of ``integrand(x, z, r, psi_shift)`` against r^2 dr dOmega.

    ``integrand`` returns an array ``(..., P, M)``; the result has shape
    ``(..., P)``.  Explicit radial panel ``edges`` override the graded default.
    """
    if edges is None:
        edges = graded_edges(rhi, panel, levels)
    rs, wr = gl_rule(edges, order)
    x = sampler.points
    total = None
    for r, w in zip(rs, wr):
        dirs, wd = angular_rule(angular_count(r, bandwidth, n_min, n_max))
        z = r * dirs
        vals = integrand(x, z, r, sampler.shifted(z))
        contrib = (vals @ wd) * (w * r * r)
        total = contrib if total is None else total + contrib
    return total


def k2_tail(mu, rhi, order=16):
    r"""4 pi int_{rhi}^inf mu^2 K2(mu r) dr for (possibly complex) ``mu`` with Re mu > 0."""
    mu = np.atleast_1d(np.asarray(mu, dtype=complex))
    span = 60.0 / np.min(mu.real)
    edges = rhi + span * np.linspace(0, 1, 41) ** 2
    rs, wr = gl_rule(edges, order)
    k2 = bessel_k_complex_upto3(np.outer(mu, rs))[2]
    return 4 * np.pi * (k2 @ wr) * mu**2


class CumulativeRadial:
    """P(s) = int_0^s t psi(t) dt for a radial callable, exact to quadrature precision."""

    def __init__(self, func, smax, panel, order):
        self.func = func
        self.panel = panel
        self.order = order
        n = int(np.ceil(smax / panel)) + 1
        self.edges = panel * np.arange(n + 1)
        nodes, weights = gl_rule(self.edges, order)
        per_panel = (weights * nodes * func(nodes)).reshape(n, order).sum(axis=1)
        self.table = np.concatenate([[0.0], np.cumsum(per_panel)])

    def segment(self, mid, half):
        """int over [mid - half, mid + half] of t psi(t) dt, one GL rule.

        Taking the half width directly (not as a difference of endpoints)
        keeps full relative precision for very short intervals.
        """
        x, w = _leggauss(self.order)
        t = mid[..., None] + half[..., None] * x
        return half * np.sum(w * t * self.func(t), axis=-1)

    def __call__(self, s):
        idx = np.minimum((s / self.panel).astype(int), len(self.edges) - 2)
        base = self.edges[idx]
        return self.table[idx] + self.segment((base + s) / 2, (s - base) / 2)


def _shell_deviation_direct(func, ref, centre, half, pieces, order):
    """Shell average minus ``ref``, integrating t (psi(t) - ref) so constants cancel exactly."""
    x, w = _leggauss(order)
    sub = half / pieces
    offsets = (2 * np.arange(pieces) + 1 - pieces)[:, None]
    # node t = centre + sub * (offset + x) over all pieces
    u = (offsets + x[None, :]).ravel()
    t = centre[:, None] + sub[:, None] * u[None, :]
    ww = np.tile(w, pieces)
    return np.sum(ww * t * (func(t) - ref), axis=-1) / (2 * centre * pieces)


def radial_subtraction_integral(func, rho, mu, support, panel=0.25, order=10, s_order=10):
    r"""int [psi(rho) - psi(y)] K2(mu|x-y|) / |x-y|^2 dy for radial ``psi``.

    Multiplied by mu^2 so that the result pairs with the Levy constant.
    ``support`` bounds the region where ``psi`` is non-negligible.
    """
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    panel = min(panel, 0.5 / mu)
    spanel = panel
    reach = min(support, 45.0 / mu)
    cum = CumulativeRadial(func, rho.max() + 2 * reach + 2 * panel, spanel, s_order)
    out = np.empty(len(rho), dtype=complex)
    psi_rho = func(rho)
    for i, p in enumerate(rho):
        rhi = min(p + support, 45.0 / mu)
        edges = graded_edges(rhi, panel)
        r, w = gl_rule(edges, order)
        # shell average over |y| in [|p - r|, p + r]
        centre = np.maximum(p, r)
        half = np.minimum(p, r)
        pieces = np.maximum(np.ceil(2 * half / spanel).astype(int), 1)
        direct = pieces <= 16
        # bracket = psi(rho) - shell average
        bracket = np.empty_like(r, dtype=complex)
        for m in np.unique(pieces[direct]):
            sel = direct & (pieces == m)
            bracket[sel] = -_shell_deviation_direct(
                func, psi_rho[i], centre[sel], half[sel], m, s_order
            )
        if np.any(~direct):
            lo, hi = centre[~direct] - half[~direct], centre[~direct] + half[~direct]
            bracket[~direct] = psi_rho[i] - (cum(hi) - cum(lo)) / (2 * p * r[~direct])
        k2 = bessel_k_complex_upto3(mu * r)[2].real
        integrand = 4 * np.pi * bracket * k2 * mu**2
        out[i] = np.sum(w * integrand) + psi_rho[i] * k2_tail(mu, rhi)[0]
    return out
