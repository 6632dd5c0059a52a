r"""Constant magnetic field: matrix mass, polar factors and the kernel operator.

With :math:`B` constant the mass term becomes the 4x4 matrix
:math:`\mu^2 = (mc/\hbar)^2 - (e/\hbar c)\,\Sigma\cdot B`.  Two constructions
are available: ``hermitian`` builds exactly that; ``verbatim`` builds the
block matrix with entries :math:`(m^2c^2/\hbar^2 \mp eB_3/\hbar c) I_2` on the
diagonal and :math:`\pm(ie/\hbar c)(B_2 - iB_1) I_2` off it, which is not
Hermitian for transverse fields.  ``scalar`` drops the spin term.

Bessel kernels of a matrix argument are evaluated by spectral calculus:
:math:`f(\mu^2) = V f(\Lambda) V^{-1}` with principal square roots of the
eigenvalues.

The operator uses the symmetric gauge :math:`a(y) = (e/2\hbar c)\,y\times B`
and the kernel

.. math::
    G = -\frac{\mu^2 K_2(\mu r)}{r^2} + |a(y)|^2\frac{\mu K_1(\mu r)}{r}
        - 2i\,(a(y)\cdot x)\frac{\mu^2 K_2(\mu r)}{r^2},

so that :math:`\mathcal{S}\psi = \frac{\hbar c}{2\pi^2}\int[G\psi(y) + \mu^2K_2\psi(x)/r^2]dy
+ \hbar c\mu\psi(x)`.  The third term is odd at :math:`y = x`; the symmetric
angular rule evaluates its principal value.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from . import quadrature as quad
from .errors import AccuracyError, DomainError, NumericalError, UsageError
from .fields import PeriodicGrid, SpinorField
from .kernels import QuadratureSpec, _reach
from .params import PhysicalParams
from .special import bessel_k_complex_upto3

_DEFAULT = PhysicalParams()

SIGMA = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)

CONSTRUCTIONS = ("verbatim", "hermitian", "scalar")


@dataclass(frozen=True)
class MassMatrix:
    mu_squared: np.ndarray
    construction: str
    B: tuple
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def mass_matrix(B, params=_DEFAULT, construction="hermitian"):
    """Build the 4x4 squared mass for a constant field ``B``."""
    B = np.asarray(B, dtype=float)
    if B.shape != (3,) or not np.all(np.isfinite(B)):
        raise DomainError("B must be a finite 3-vector")
    if construction not in CONSTRUCTIONS:
        raise UsageError(f"construction must be one of {CONSTRUCTIONS}")
    m2 = params.mu**2
    q = params.e / params.hbar_c
    eye2 = np.eye(2)
    if construction == "verbatim":
        off = 1j * q * (B[1] - 1j * B[0])
        mat = np.block(
            [
                [(m2 - q * B[2]) * eye2, off * eye2],
                [-off * eye2, (m2 + q * B[2]) * eye2],
            ]
        )
    else:
        sb = np.tensordot(B, SIGMA, axes=1) if construction == "hermitian" else np.zeros((2, 2))
        mat = m2 * np.eye(4) - q * np.kron(np.eye(2), sb)
    mat = np.asarray(mat, dtype=complex)
    vals, vecs = np.linalg.eig(mat)
    return MassMatrix(mat, construction, tuple(B), vals, vecs)


def _eig_checked(mat):
    vals, vecs = np.linalg.eig(mat)
    # a Jordan block shows up as cond ~ 1/sqrt(eps) ~ 1e8, so flag well before that
    if np.linalg.cond(vecs) > 1e6:
        raise NumericalError("matrix is defective within tolerance", {"cond": float(np.linalg.cond(vecs))})
    return vals, vecs


def matrix_function(mat, f):
    """f(mat) by eigendecomposition; ``f`` maps the eigenvalue vector to (n, ...) values."""
    vals, vecs = _eig_checked(np.asarray(mat, dtype=complex))
    inv = np.linalg.inv(vecs)
    fv = np.asarray(f(vals))
    return np.einsum("ij,j...,jk->ik...", vecs, fv, inv)


def principal_sqrt(mat):
    """Principal square root (eigenvalue arguments in (-pi, pi]); principal branch per eigenvalue."""
    return matrix_function(mat, np.sqrt)


def polar_decompose(mm):
    """Polar factors (U, |mu|) of mu = principal sqrt of the squared mass.

    Passing a plain array treats it as mu itself.
    """
    mu = principal_sqrt(mm.mu_squared) if isinstance(mm, MassMatrix) else np.asarray(mm, dtype=complex)
    U, P = scipy.linalg.polar(mu, side="right")
    residual = float(np.linalg.norm(mu - U @ P))
    return U, P, residual


def compare_constructions(B, params=_DEFAULT):
    """Sorted eigenvalues of both constructions and their largest mismatch."""
    ev = {}
    for c in ("verbatim", "hermitian"):
        vals = mass_matrix(B, params, c).eigenvalues
        ev[c] = vals[np.lexsort((vals.imag, vals.real))]
    return {"verbatim": ev["verbatim"], "hermitian": ev["hermitian"],
            "max_difference": float(np.max(np.abs(ev["verbatim"] - ev["hermitian"])))}


def symmetric_gauge(y, B, params=_DEFAULT):
    """a(y) = (e / 2 hbar c) y x B for (..., 3) points."""
    return 0.5 * params.e / params.hbar_c * np.cross(y, np.asarray(B, dtype=float))


class _ChannelSampler:
    """Wraps a sampler so components are expressed in the eigenbasis of mu^2."""

    def __init__(self, base, inv):
        self.base = base
        self.inv = inv
        self.points = base.points

    def at_points(self):
        return np.einsum("ij,j...->i...", self.inv, self.base.at_points())

    def shifted(self, z):
        return np.einsum("ij,j...->i...", self.inv, self.base.shifted(z))


def apply_constant_B(psi, B, params=_DEFAULT, construction="hermitian", points=None,
                     spec=None, ledger=False, return_error=False):
    """Square-root operator for constant ``B`` on a four-component field.

    Returns values at ``points`` (default all grid points) as a (4, P) array,
    or a SpinorField when ``points`` is None.  With ``ledger=True`` also
    returns a dict with the free, a^2 K1 and cross terms and the local part.
    ``return_error=True`` appends the refined-rule difference for sampled
    fields on their own grid (None on the 3D path).
    """
    if not isinstance(psi, SpinorField) or not isinstance(psi.grid, PeriodicGrid):
        raise UsageError("apply_constant_B needs a SpinorField on a periodic grid")
    if params.mu <= 0:
        raise DomainError("the Bessel-kernel form needs m > 0")
    mm = mass_matrix(B, params, construction)
    vals, vecs = _eig_checked(mm.mu_squared)
    inv = np.linalg.inv(vecs)
    mus = np.sqrt(vals.astype(complex))
    if np.any(mus.real <= 0):
        raise DomainError("every eigenvalue of mu^2 must have a root with positive real part")
    spec = spec or QuadratureSpec()
    if psi.func is None and points is None:
        out, parts, err = _constant_B_modes(psi, B, mus, vecs, inv, params, spec)
        res = (out, parts) if ledger else (out,)
        res = res + (err,) if return_error else res
        return res if len(res) > 1 else out
    from .kernels import _sampler_for

    base = _sampler_for(psi, points)
    sampler = _ChannelSampler(base, inv)
    rhi = _reach(psi, base, float(np.min(mus.real)), spec)
    Bv = np.asarray(B, dtype=float)
    terms = constant_B_terms(sampler, mus, Bv, rhi, spec, params)
    pref = params.hbar_c / (2 * np.pi**2)
    psi0 = sampler.at_points()
    tail = np.array([quad.k2_tail(m, rhi)[0] for m in mus])
    local = pref * psi0 * tail[:, None] + params.hbar_c * mus[:, None] * psi0
    parts = {
        "free": pref * terms[0],
        "a2_K1": pref * terms[1],
        "cross": pref * terms[2],
        "local": local,
    }
    total = sum(parts.values())

    def back(v):
        return vecs @ v

    out = back(total)
    if points is None:
        out_field = psi.with_values(out.reshape((4,) + psi.grid.shape))
    else:
        out_field = out
    res = (out_field, {k: back(v) for k, v in parts.items()}) if ledger else (out_field,)
    res = res + (None,) if return_error else res
    return res if len(res) > 1 else out_field


def _j1_over_x(x):
    """j1(x) / x, smooth through 0."""
    x = np.asarray(x, dtype=float)
    x2 = x * x
    series = 1 / 3 - x2 * (1 / 30 - x2 * (1 / 840 - x2 / 45360))
    safe = np.where(x < 0.05, 1.0, x)
    exact = (np.sin(safe) - safe * np.cos(safe)) / safe**3
    return np.where(x < 0.05, series, exact)


def _j2_over_x2(x):
    """j2(x) / x^2, smooth through 0."""
    x = np.asarray(x, dtype=float)
    x2 = x * x
    series = 1 / 15 - x2 * (1 / 210 - x2 * (1 / 7560 - x2 / 498960))
    safe = np.where(x < 0.2, 1.0, x)
    exact = ((3 - safe**2) * np.sin(safe) - 3 * safe * np.cos(safe)) / safe**5
    return np.where(x < 0.2, series, exact)


def constant_B_symbols(kn, mu, panel=0.5, order=8):
    """Radial moments of the constant-B kernel pieces at wavenumbers ``kn``.

    With f0 = mu^2 K2(mu r) / r^2 and f1 = mu K1(mu r) / r, returns a dict of
    arrays over ``kn``:

    - ``free``: 4 pi int (1 - sinc(kr)) f0 r^2 dr
    - ``m0``: 4 pi int sinc(kr) f1 r^2 dr
    - ``m1``: int f1 r^4 j1(kr)/(kr) dr, so int f1 z_i e^{-ikz} dz = -4 pi i k_i m1
    - ``m2b``: int f1 r^6 j2(kr)/(kr)^2 dr, so that
      int f1 z_i z_j e^{-ikz} dz = 4 pi (delta_ij m1 - k_i k_j m2b)
    - ``n1``: as ``m1`` with f0 in place of f1
    """
    from .kernels import sinc_deficit

    kn = np.atleast_1d(np.asarray(kn, dtype=float))
    mu = complex(mu)
    r, w = quad.gl_rule(quad.graded_edges(45.0 / mu.real, panel), order)
    kb = bessel_k_complex_upto3(mu * r)
    f0 = mu * mu * kb[2] / (r * r)
    f1 = mu * kb[1] / r
    x = np.outer(kn, r)
    deficit = sinc_deficit(x)
    j1x = _j1_over_x(x)
    return {
        "free": 4 * np.pi * (deficit @ (w * f0 * r**2)),
        "m0": 4 * np.pi * ((1.0 - deficit) @ (w * f1 * r**2)),
        "m1": j1x @ (w * f1 * r**4),
        "m2b": _j2_over_x2(x) @ (w * f1 * r**6),
        "n1": j1x @ (w * f0 * r**4),
    }


def _constant_B_modes(psi, B, mus, vecs, inv, params, spec):
    """Constant-B kernel on a sampled periodic spinor, one Fourier mode at a time.

    The symmetric gauge is linear, a(y) = L y, so with y = x - z every
    integrand piece is a polynomial of degree <= 2 in z with x-dependent
    coefficients times psi(x - z).  The z-moments of each radial kernel act
    on Fourier modes as multipliers, which leaves a handful of FFTs per
    channel instead of a 3D quadrature per grid point.
    """
    grid = psi.grid
    L = symmetric_gauge(np.eye(3), B, params).T
    Q = L.T @ L
    X = np.stack(grid.coords())
    Lx = np.einsum("ij,j...->i...", L, X)
    Qx = np.einsum("ij,j...->i...", Q, X)
    LTx = np.einsum("ji,j...->i...", L, X)
    lx2 = np.sum(Lx * Lx, axis=0)
    K = np.stack(grid.wavevectors())
    kn = np.sqrt(np.sum(K * K, axis=0))
    kQk = np.einsum("i...,ij,j...->...", K, Q, K)
    uniq, where = np.unique(np.round(kn, 12), return_inverse=True)
    phi = np.einsum("ij,j...->i...", inv, psi.values)
    pref = params.hbar_c / (2 * np.pi**2)

    def ifft(a):
        return np.fft.ifftn(a, axes=(-3, -2, -1))

    runs = []
    for sp in (spec, spec.refined()):
        parts = {"free": [], "a2_K1": [], "cross": [], "local": []}
        for c, mu in enumerate(mus):
            sym = {k: v[where].reshape(kn.shape)
                   for k, v in constant_B_symbols(uniq, mu, sp.panel, sp.order).items()}
            ph = np.fft.fftn(phi[c])
            m1 = [ifft(ph * (-4j * np.pi) * K[i] * sym["m1"]) for i in range(3)]
            zz = ifft(ph * 4 * np.pi * (np.trace(Q) * sym["m1"] - kQk * sym["m2b"]))
            a2 = lx2 * ifft(ph * sym["m0"]) - 2 * sum(Qx[i] * m1[i] for i in range(3)) + zz
            # a(x - z).x = -z.(L^T x) since x.Lx = 0 for the antisymmetric gauge
            n1 = [ifft(ph * (-4j * np.pi) * K[i] * sym["n1"]) for i in range(3)]
            cross = 2j * sum(LTx[i] * n1[i] for i in range(3))
            parts["free"].append(pref * ifft(ph * sym["free"]))
            parts["a2_K1"].append(pref * a2)
            parts["cross"].append(pref * cross)
            parts["local"].append(params.hbar_c * mu * phi[c])
        runs.append({k: np.stack(v) for k, v in parts.items()})

    def back(v):
        return np.einsum("ij,j...->i...", vecs, v)

    totals = [back(sum(run.values())) for run in runs]
    err = float(np.max(np.abs(totals[1] - totals[0])))
    scale = max(float(np.max(np.abs(totals[1]))), 1e-300)
    if err > 1e-6 * scale:
        raise AccuracyError("constant-B mode quadrature did not converge",
                            {"error_estimate": err, "scale": scale})
    return psi.with_values(totals[1]), {k: back(v) for k, v in runs[1].items()}, err


def constant_B_terms(sampler, mus, B, rhi, spec, params):
    """Integrals of the three kernel pieces, channel-wise, stacked as (3, C, P)."""
    mus = np.asarray(mus, dtype=complex)
    psi0 = sampler.at_points()[..., None]

    def integrand(x, z, r, shifted):
        k = bessel_k_complex_upto3(mus * r)
        k1, k2 = k[1][:, None, None], k[2][:, None, None]
        m = mus[:, None, None]
        y = x[:, None, :] - z[None, :, :]
        a = symmetric_gauge(y, B, params)
        a2 = np.sum(a * a, axis=-1)
        ax = np.einsum("pmk,pk->pm", a, x)
        free = (psi0 - shifted) * (m * m * k2 / (r * r))
        a2k1 = a2 * shifted * (m * k1 / r)
        cross = -2j * ax * shifted * (m * m * k2 / (r * r))
        return np.stack([free, a2k1, cross])

    bw = spec.bandwidth
    return quad.sphere_integrate(sampler, integrand, rhi, spec.panel, spec.order, bw,
                                 spec.n_min, spec.n_max)
