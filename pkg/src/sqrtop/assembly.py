r"""Term-by-term assembly of the square-root operator for variable mass and potential.

For a position dependent inverse length :math:`\mu(y)`, a vector potential
wavevector field :math:`a(y) = eA(y)/\hbar c` and a constant path average
:math:`\bar a`, the kernel is obtained by applying
:math:`(-i\nabla_y + a)^2 + \mu^2` to :math:`g = w(y)\,F(u)` with

.. math::
    w = e^{i\bar a\cdot z}\mu(y)^2,\quad F(u) = K_1(u)/u,\quad
    u = \mu(y)\,r,\quad z = x - y,\quad r = |z|.

Expanding gives eight pieces:

* ``mass_K1``: :math:`(a^2 + \mu^2 - i\nabla\cdot a)\,g`
* ``a_gradient_K1``: :math:`-2i F\,a\cdot\nabla w`
* ``a_gradient_K2``: :math:`-2i wF'(u)\,a\cdot\nabla u`
* ``laplacian_w_K1``: :math:`-F\,\Delta w`
* ``K3``: :math:`-wF''(u)\,|\nabla u|^2`, containing :math:`K_3`
* ``K2``: :math:`-wF'(u)\,\Delta u`
* ``mixed_K2``: :math:`-2F'(u)\,\nabla w\cdot\nabla u`
* ``delta_counterterm``: the local part, below.

Closed forms used for the derivatives (all in ``y``):

.. math::
    \nabla u = r\nabla\mu - \mu z/r,\qquad
    |\nabla u|^2 = r^2|\nabla\mu|^2 - 2\mu\nabla\mu\cdot z + \mu^2,\qquad
    \Delta u = r\Delta\mu - 2\nabla\mu\cdot z/r + 2\mu/r,

.. math::
    \nabla w = w\,v,\quad v = 2\nabla\mu/\mu - i\bar a,\qquad
    \Delta w = w\,[v\cdot v + 2\Delta\mu/\mu - 2|\nabla\mu|^2/\mu^2].

The singular behaviour at :math:`y = x` is removed by subtracting the
free kernel :math:`G_0 = -\mu(x)^2K_2(\mu(x) r)/r^2` times :math:`\psi(x)`
and adding back its exact integral as the local term
:math:`\hbar c\,\mu(x)\psi(x)`.  Each piece is integrated against
:math:`\psi(y) - \psi(x)`; the counterterm collects
:math:`\psi(x)\int (G - G_0)` plus the far tail and the local term.
"""

import numpy as np

from . import quadrature as quad
from .errors import DomainError, UsageError
from .fields import Field, PeriodicGrid
from .kernels import QuadratureSpec, _finish, _reach, _sampler_for
from .params import PhysicalParams
from .special import bessel_k_complex_upto3

_DEFAULT = PhysicalParams()

TERMS = (
    "mass_K1",
    "a_gradient_K1",
    "a_gradient_K2",
    "laplacian_w_K1",
    "K3",
    "K2",
    "mixed_K2",
    "delta_counterterm",
)


def _fd_gradient(f, pts, h):
    out = np.empty(pts.shape, dtype=float)
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        out[..., k] = (f(pts + e) - f(pts - e)) / (2 * h)
    return out


def _fd_laplacian(f, pts, h):
    centre = f(pts)
    total = -6.0 * centre
    for k in range(3):
        e = np.zeros(3)
        e[k] = h
        total = total + f(pts + e) + f(pts - e)
    return total / (h * h)


class _MassModel:
    """mu, grad mu and Laplacian of mu at arbitrary (..., 3) points."""

    def __init__(self, mu_field, grad=None, laplacian=None, h=1e-3):
        if mu_field.func is None:
            raise UsageError("general assembly needs mu_field with an analytic callable")
        self._f = lambda p: np.real(np.asarray(mu_field.func(p))).reshape(p.shape[:-1])
        self._grad = grad
        self._lap = laplacian
        self.h = h

    def __call__(self, pts):
        mu = self._f(pts)
        if np.any(~(mu > 0)):
            raise DomainError("mu must be positive everywhere it is sampled")
        grad = self._grad(pts) if self._grad else _fd_gradient(self._f, pts, self.h)
        lap = self._lap(pts) if self._lap else _fd_laplacian(self._f, pts, self.h)
        return mu, np.asarray(grad, dtype=float), np.asarray(lap, dtype=float)


class _PotentialModel:
    """a and div a at arbitrary (..., 3) points; ``None`` means a = 0."""

    def __init__(self, a_field, divergence=None, h=1e-3):
        self.zero = a_field is None
        if not self.zero and a_field.func is None:
            raise UsageError("general assembly needs a_field with an analytic callable")
        self._field = a_field
        self._div = divergence
        self.h = h

    def _a(self, pts):
        vals = np.real(np.asarray(self._field.func(pts))).reshape((3,) + pts.shape[:-1])
        return np.moveaxis(vals, 0, -1)

    def __call__(self, pts):
        if self.zero:
            return np.zeros(pts.shape), np.zeros(pts.shape[:-1])
        a = self._a(pts)
        if self._div:
            div = np.asarray(self._div(pts), dtype=float)
        else:
            div = np.zeros(pts.shape[:-1])
            for k in range(3):
                e = np.zeros(3)
                e[k] = self.h
                div = div + (self._a(pts + e)[..., k] - self._a(pts - e)[..., k]) / (2 * self.h)
        return a, div


def kernel_pieces(x, z, r, mass, potential, a_bar):
    """The seven kernel pieces at y = x - z, each of shape (P, M), and G_0."""
    y = x[:, None, :] - z[None, :, :]
    mu, gmu, lmu = mass(y)
    a, diva = potential(y)
    u = mu * r
    k = bessel_k_complex_upto3(u.astype(complex))
    k1, k2, k3 = k[1], k[2], k[3]
    F = k1 / u
    F1 = -k2 / u
    F2 = k3 / u - k2 / (u * u)

    gz = np.einsum("pmk,mk->pm", gmu, z)
    g2 = np.sum(gmu * gmu, axis=-1)
    gu = r * gmu - (mu / r)[..., None] * z[None, :, :]
    gu2 = r * r * g2 - 2 * mu * gz + mu * mu
    lu = r * lmu - 2 * gz / r + 2 * mu / r

    phase = np.exp(1j * (z @ a_bar))[None, :]
    w = phase * mu * mu
    v = 2 * gmu / mu[..., None] - 1j * a_bar
    gw = w[..., None] * v
    lw = w * (np.sum(v * v, axis=-1) + 2 * lmu / mu - 2 * g2 / (mu * mu))
    g = w * F

    pieces = {
        "mass_K1": (np.sum(a * a, axis=-1) + mu * mu - 1j * diva) * g,
        "a_gradient_K1": -2j * F * np.sum(a * gw, axis=-1),
        "a_gradient_K2": -2j * w * F1 * np.sum(a * gu, axis=-1),
        "laplacian_w_K1": -F * lw,
        "K3": -w * F2 * gu2,
        "K2": -w * F1 * lu,
        "mixed_K2": -2 * F1 * np.sum(gw * gu, axis=-1),
    }
    return pieces


def general_assembly(mu_field, a_field, a_bar, psi, params=_DEFAULT, points=None, spec=None,
                     mu_grad=None, mu_laplacian=None, a_divergence=None, ledger=False):
    """Square-root operator for variable mass and vector potential.

    Parameters
    ----------
    mu_field : ScalarField
        Inverse length mu(y) > 0 with an analytic callable.
    a_field : Field or None
        Three-component wavevector field a(y) = e A(y) / hbar c, or None for zero.
    a_bar : array_like
        Constant path-averaged wavevector carried by the phase factor.
    psi : Field
        Input on the same periodic grid.  Multi-component inputs are treated
        componentwise (the mass is scalar).
    mu_grad, mu_laplacian, a_divergence : callable, optional
        Exact derivatives; central differences of the callables otherwise.
    ledger : bool
        Also return a dict of the eight pieces evaluated at the output points.
    """
    for f in (mu_field, a_field):
        if f is not None and f.grid != psi.grid:
            raise UsageError("mu_field, a_field and psi must share one grid")
    if not isinstance(psi.grid, PeriodicGrid):
        raise UsageError("general assembly runs on periodic grids")
    if np.any(~(np.real(mu_field.values) > 0)):
        raise DomainError("mu must be positive on the grid")
    if a_field is not None and (not isinstance(a_field, Field) or a_field.components != 3):
        raise UsageError("a_field must carry three components")
    a_bar = np.zeros(3) if a_bar is None else np.asarray(a_bar, dtype=float)
    mass = _MassModel(mu_field, mu_grad, mu_laplacian)
    potential = _PotentialModel(a_field, a_divergence)
    spec = spec or QuadratureSpec()
    sampler = _sampler_for(psi, points)
    x = sampler.points
    mu_x, _, _ = mass(x)
    rhi = _reach(psi, sampler, float(np.min(mu_x)), spec)
    psi0 = sampler.at_points()
    names = TERMS[:-1]

    def integrand(x, z, r, shifted):
        pieces = kernel_pieces(x, z, r, mass, potential, a_bar)
        diff = shifted - psi0[..., None]
        G = sum(pieces.values())
        G0 = -(mu_x * mu_x)[:, None] * bessel_k_complex_upto3((mu_x * r).astype(complex))[2][:, None] / (r * r)
        rows = [pieces[n][None] * diff for n in names]
        rows.append(((G - G0)[None] * psi0[..., None]))
        return np.stack(rows)

    bw = spec.bandwidth + (np.linalg.norm(a_bar) if np.any(a_bar) else 0.0)
    raw = quad.sphere_integrate(sampler, integrand, rhi, spec.panel, spec.order, bw,
                                spec.n_min, spec.n_max)
    pref = params.hbar_c / (2 * np.pi**2)
    tail = quad.k2_tail(mu_x.astype(complex), rhi)
    parts = {n: pref * raw[i] for i, n in enumerate(names)}
    parts["delta_counterterm"] = (pref * (raw[-1] + psi0 * tail) + params.hbar_c * mu_x * psi0)
    total = sum(parts.values())
    out = _finish(psi, total, points, None, False)
    if not ledger:
        return out
    parts["norms"] = {
        n: (float(np.linalg.norm(parts[n].real)), float(np.linalg.norm(parts[n].imag)))
        for n in TERMS
    }
    return out, parts
