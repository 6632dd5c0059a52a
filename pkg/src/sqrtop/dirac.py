r"""Dirac operator with the potential folded into the mass, and its square.

Two representations share one code path.  Each is described by three
kinetic momentum matrices :math:`\pi_j = p_j - (e/c)A_j` acting on the
spatial index and a Hermitian potential matrix ``V``:

* ``plane-wave``: one spatial point, :math:`\pi_j = \hbar k_j - (e/c)A_j`;
* ``lattice-1d``: ``N`` sites along x with centred differences for
  :math:`p_x`; the transverse momenta are fixed numbers.

Spinor index is the slow index (``kron(spin, space)``) in the Dirac-Pauli
basis.  The operator is :math:`D = c\,\alpha\cdot\pi + \beta mc^2 + V`.

Its square is assembled from pieces whose continuum meaning is noted in
``SQUARED_TERMS``.  Field strengths are realized as commutators of the
discrete momenta, e.g. :math:`-e\hbar c\,\Sigma\cdot B` as
:math:`c^2\sum_{i<j}\alpha_i\alpha_j[\pi_i,\pi_j]` and :math:`-i\hbar c\,\alpha\cdot\nabla V`
as :math:`c\,\alpha\cdot[\pi, V]`, so the identity holds to rounding on the
lattice too.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import BranchError, DomainError, NumericalError, UsageError
from .magnetic import SIGMA
from .params import PhysicalParams

_DEFAULT = PhysicalParams()

I2 = np.eye(2, dtype=complex)
Z2 = np.zeros((2, 2), dtype=complex)
BETA = np.block([[I2, Z2], [Z2, -I2]])
ALPHA = np.array([np.block([[Z2, s], [s, Z2]]) for s in SIGMA])
SIGMA4 = np.array([np.block([[s, Z2], [Z2, s]]) for s in SIGMA])

SQUARED_TERMS = (
    "c2_pi2",          # c^2 pi^2
    "V_alpha_pi",      # 2 c V alpha.pi
    "sigma_B",         # -e hbar c Sigma.B
    "alpha_E",         # -i e hbar c alpha.E, with e E = -grad V
    "dV_dt",           # -i hbar dV/dt (zero: static fields only)
    "alpha_grad_V",    # -2 i hbar c alpha.grad V
    "mass_V_squared",  # (m c^2 + beta V)^2
)


@dataclass
class DiracOperator:
    representation: str
    pis: list
    V: np.ndarray
    params: PhysicalParams = _DEFAULT
    meta: dict = field(default_factory=dict)

    @property
    def n_sites(self):
        return self.V.shape[0]

    def matrix(self):
        p = self.params
        eye = np.eye(self.n_sites)
        mat = p.rest_energy * np.kron(BETA, eye) + np.kron(np.eye(4), self.V)
        for a, pi in zip(ALPHA, self.pis):
            mat = mat + p.c * np.kron(a, pi)
        return mat


@dataclass
class SquaredOperator:
    matrix: np.ndarray
    terms: dict
    representation: str


def dirac_block(k, A=(0.0, 0.0, 0.0), V=0.0, params=_DEFAULT):
    """Plane-wave block c alpha.(hbar k - e A / c) + m c^2 beta + V as a DiracOperator."""
    k = np.asarray(k, dtype=float)
    A = np.asarray(A, dtype=float)
    if k.shape != (3,) or A.shape != (3,):
        raise DomainError("k and A must be 3-vectors")
    pis = [np.array([[params.hbar * k[j] - params.e / params.c * A[j]]], dtype=complex)
           for j in range(3)]
    return DiracOperator("plane-wave", pis, np.array([[complex(V)]]), params,
                         {"k": k.tolist(), "A": A.tolist(), "V": float(np.real(V))})


def _centred_difference(n, h, periodic):
    d = (np.eye(n, k=1) - np.eye(n, k=-1)) / (2 * h)
    if periodic:
        d[0, -1] = -1 / (2 * h)
        d[-1, 0] = 1 / (2 * h)
    return d


def dirac_lattice(n, spacing, V=None, A=None, k_perp=(0.0, 0.0), B1=(0.0, 0.0, 0.0),
                  params=_DEFAULT, periodic=False):
    """N-site lattice along x.

    Parameters
    ----------
    V : callable or array, optional
        Potential energy at the sites ``x_i = (i - n/2) h``.
    A : callable or (n, 3) array, optional
        Vector potential samples (added to the constant-field part).
    k_perp : pair
        Fixed transverse wavenumbers (k_y, k_z).
    B1 : 3-vector
        Constant magnetic field realized by A1 = (0, B_z x, -B_y x); B_x must
        vanish in one dimension.
    """
    if n < 3 or not spacing > 0:
        raise DomainError("need n >= 3 sites and positive spacing")
    x = (np.arange(n) - n // 2) * spacing
    B1 = np.asarray(B1, dtype=float)
    if B1[0] != 0:
        raise UsageError("a one dimensional lattice cannot carry B_x")
    Vs = np.zeros(n) if V is None else (V(x) if callable(V) else np.asarray(V, dtype=float))
    As = np.zeros((n, 3)) if A is None else (A(x) if callable(A) else np.asarray(A, dtype=float))
    if Vs.shape != (n,) or As.shape != (n, 3):
        raise UsageError("potential samples do not match the lattice")
    As = As + np.stack([np.zeros(n), B1[2] * x, -B1[1] * x], axis=-1)
    q = params.e / params.c
    px = -1j * params.hbar * _centred_difference(n, spacing, periodic)
    pis = [
        px - q * np.diag(As[:, 0]),
        np.diag(params.hbar * k_perp[0] - q * As[:, 1]).astype(complex),
        np.diag(params.hbar * k_perp[1] - q * As[:, 2]).astype(complex),
    ]
    return DiracOperator("lattice-1d", pis, np.diag(Vs).astype(complex), params,
                         {"n": n, "spacing": spacing, "x": x, "periodic": periodic,
                          "B1": B1.tolist()})


def _spin(mat, op):
    return np.kron(mat, op)


def squared_operator(op, dV_dt=None):
    """Assemble the squared Dirac operator term by term."""
    if dV_dt is not None and np.any(dV_dt):
        raise UsageError("time-dependent potentials are not supported")
    p = op.params
    c = p.c
    n = op.n_sites
    pi2 = sum(pi @ pi for pi in op.pis)
    terms = {"c2_pi2": c * c * _spin(np.eye(4), pi2)}
    apv = sum(_spin(a, op.V @ pi) for a, pi in zip(ALPHA, op.pis))
    terms["V_alpha_pi"] = 2 * c * apv
    sb = np.zeros((4 * n, 4 * n), dtype=complex)
    for i in range(3):
        for j in range(i + 1, 3):
            comm = op.pis[i] @ op.pis[j] - op.pis[j] @ op.pis[i]
            sb = sb + _spin(ALPHA[i] @ ALPHA[j], comm)
    terms["sigma_B"] = c * c * sb
    # c alpha.[pi, V] is -i hbar c alpha.grad V in the continuum
    grad = sum(_spin(a, pi @ op.V - op.V @ pi) for a, pi in zip(ALPHA, op.pis))
    terms["alpha_E"] = -c * grad
    terms["dV_dt"] = np.zeros_like(sb)
    terms["alpha_grad_V"] = 2 * c * grad
    mv = p.rest_energy * np.eye(4 * n) + _spin(BETA, op.V)
    terms["mass_V_squared"] = mv @ mv
    total = sum(terms.values())
    return SquaredOperator(total, terms, op.representation)


def identity_residual(op):
    """Relative norm of D^2 minus the assembled square, and a Hermiticity audit."""
    D = op.matrix()
    M = squared_operator(op).matrix
    scale = max(np.linalg.norm(D @ D), 1e-300)
    return {
        "identity": float(np.linalg.norm(D @ D - M) / scale),
        "hermitian": float(np.linalg.norm(M - M.conj().T) / scale),
    }


def doubler_weight(vec, n):
    """Fraction of a lattice eigenvector's weight at |k| above half the Brillouin zone."""
    comps = np.fft.fft(vec.reshape(4, n), axis=1)
    freq = np.abs(np.fft.fftfreq(n))
    high = np.sum(np.abs(comps[:, freq > 0.25]) ** 2)
    return float(high / np.sum(np.abs(comps) ** 2))


def lowest_eigenpairs(op, count=5, filter_doublers=True):
    """The ``count`` eigenpairs of D with smallest |E|, optionally skipping doublers."""
    D = op.matrix()
    vals, vecs = np.linalg.eigh(D)
    order = np.argsort(np.abs(vals))
    keep = []
    for i in order:
        if filter_doublers and op.representation == "lattice-1d":
            if doubler_weight(vecs[:, i], op.n_sites) > 0.5:
                continue
        keep.append(i)
        if len(keep) == count:
            break
    return vals[keep], vecs[:, keep]


def eigenpair_residuals(op, count=5):
    """||M psi - E^2 psi|| / ||psi|| for the lowest eigenpairs of D."""
    M = squared_operator(op).matrix
    vals, vecs = lowest_eigenpairs(op, count)
    res = np.linalg.norm(M @ vecs - vecs * vals**2, axis=0) / np.linalg.norm(vecs, axis=0)
    return vals, res


def principal_sqrtm(M):
    """Schur-based principal square root; nonpositive real eigenvalues are refused."""
    ev = np.linalg.eigvals(M)
    bad = (ev.real <= 0) & (np.abs(ev.imag) <= 1e-12 * max(np.max(np.abs(ev)), 1.0))
    if np.any(bad):
        raise BranchError("matrix has eigenvalues on the nonpositive real axis",
                          {"eigenvalues": ev[bad].tolist()})
    root = scipy.linalg.sqrtm(M)
    if not np.all(np.isfinite(root)):
        raise NumericalError("matrix square root failed")
    return root


@dataclass
class SqrtEquationRow:
    energy: float
    beta_left: float
    beta_right: float
    signed: float
    consistent: bool


def sqrt_equation_check(op, count=None, tol=1e-10):
    """Residuals of the square-root form of the Dirac equation for each eigenpair.

    Three variants are reported: beta sqrt(M), sqrt(M) beta, and
    sign(E) sqrt(M).  ``consistent`` marks eigenpairs where beta sqrt(M)
    reproduces the eigenvalue within ``tol``.
    """
    if 4 * op.n_sites > 4096:
        raise UsageError("representation too large for a dense square root")
    M = squared_operator(op).matrix
    R = principal_sqrtm(M)
    beta = np.kron(BETA, np.eye(op.n_sites))
    if count is None:
        vals, vecs = np.linalg.eigh(op.matrix())
    else:
        vals, vecs = lowest_eigenpairs(op, count)
    rows = []
    for E, v in zip(vals, vecs.T):
        nv = np.linalg.norm(v)
        left = np.linalg.norm(beta @ (R @ v) - E * v) / nv
        right = np.linalg.norm(R @ (beta @ v) - E * v) / nv
        signed = np.linalg.norm(np.sign(E) * (R @ v) - E * v) / nv
        rows.append(SqrtEquationRow(float(E), float(left), float(right), float(signed),
                                    bool(left < tol)))
    return rows


def sqrt_report_csv(rows):
    lines = ["energy,beta_sqrtM,sqrtM_beta,signE_sqrtM,consistent"]
    for r in rows:
        lines.append(f"{r.energy!r},{r.beta_left!r},{r.beta_right!r},{r.signed!r},{int(r.consistent)}")
    return "\n".join(lines) + "\n"


def first_order_operator(op):
    r"""beta [m c^2 + (M - m^2 c^4) / (2 m c^2)], the first-order expansion of beta sqrt(M)."""
    p = op.params
    if p.m <= 0:
        raise DomainError("the expansion needs m > 0")
    M = squared_operator(op).matrix
    n4 = M.shape[0]
    beta = np.kron(BETA, np.eye(op.n_sites))
    mc2 = p.rest_energy
    return beta @ (mc2 * np.eye(n4) + (M - mc2 * mc2 * np.eye(n4)) / (2 * mc2))


def schrodinger_operator(op):
    """pi^2/2m + V + m c^2 - (e hbar / 2 m c) Sigma.B + V^2 / 2 m c^2 on the upper block."""
    p = op.params
    n = op.n_sites
    sq = squared_operator(op)
    up = np.zeros((4 * n, 2 * n))
    up[: 2 * n, :] = np.eye(2 * n)
    pi2 = sum(pi @ pi for pi in op.pis)
    mc2 = p.rest_energy
    # sigma_B term divided by 2 m c^2 equals -(e hbar / 2 m c) Sigma.B
    sb = up.T @ sq.terms["sigma_B"] @ up / (2 * mc2)
    V2 = np.kron(I2, op.V)
    return (np.kron(I2, pi2) / (2 * p.m) + V2 + mc2 * np.eye(2 * n) + sb
            + V2 @ V2 / (2 * mc2))


def schrodinger_limit(op):
    """Compare the nonrelativistic operator's spectrum with the positive Dirac branch."""
    H = schrodinger_operator(op)
    approx = np.sort(np.linalg.eigvals(H).real)
    exact_all = np.linalg.eigvalsh(op.matrix())
    exact = np.sort(exact_all[exact_all > 0])[: len(approx)]
    mc2 = op.params.rest_energy
    defect = approx[: len(exact)] - exact
    binding = np.abs(exact - mc2)
    rel = np.abs(defect) / np.where(binding > 0, binding, np.inf)
    return {"approx": approx, "exact": exact, "defect": defect,
            "max_defect": float(np.max(np.abs(defect))),
            "max_relative_defect": float(np.max(rel)), "operator": H}


def defect_scaling(lambdas, k_hat=(1.0, 0.0, 0.0), v_hat=0.5, params=_DEFAULT):
    """Slope of log(relative defect) against log(v/c) for plane waves.

    With v/c = lam the momentum is hbar k = lam m c k_hat and the potential
    V = lam^2 m c^2 v_hat; the slope should be 2.
    """
    lambdas = np.asarray(lambdas, dtype=float)
    mc = params.m * params.c
    rels = []
    for lam in lambdas:
        k = lam * mc / params.hbar * np.asarray(k_hat, dtype=float)
        V = lam * lam * params.rest_energy * v_hat
        rels.append(schrodinger_limit(dirac_block(k, V=V, params=params))["max_relative_defect"])
    slope = np.polyfit(np.log(lambdas), np.log(rels), 1)[0]
    return float(slope), np.array(rels)


# ------------------------------------------------------------ perturbation


def _binom_half(n):
    out = 1.0
    for j in range(n):
        out *= (0.5 - j) / (j + 1)
    return out


@dataclass
class SeriesLedger:
    norm_GinvF: float
    norm_symmetric: float
    errors: list
    limit_errors: list
    commutator: float
    divergent: bool


def perturbation_series(G, F, order, reference=True, allow_divergent=False):
    """sqrt(G) sum_n binom(1/2, n) (G^{-1} F)^n up to ``order``.

    Returns ``(approximation, ledger)``.  ``ledger.errors[n]`` is the relative
    2-norm error of the partial sum through order ``n`` against sqrtm(G + F);
    ``ledger.limit_errors[n]`` measures it against sqrt(G) sqrt(I + G^{-1}F),
    the series' own limit, which differs from sqrtm(G + F) unless G and F
    commute.
    """
    G = np.atleast_2d(np.asarray(G, dtype=complex))
    F = np.atleast_2d(np.asarray(F, dtype=complex))
    if G.shape != F.shape or G.shape[0] != G.shape[1]:
        raise UsageError("G and F must be square matrices of one size")
    if int(order) != order or order < 0:
        raise DomainError("order must be a nonnegative integer")
    herm = (G + G.conj().T) / 2
    try:
        np.linalg.cholesky(herm)
    except np.linalg.LinAlgError:
        raise DomainError("G must be positive definite") from None
    rootG = principal_sqrtm(G)
    X = np.linalg.solve(G, F)
    nx = float(np.linalg.norm(X, 2))
    inv_root = np.linalg.inv(rootG)
    nsym = float(np.linalg.norm(inv_root @ F @ inv_root, 2))
    divergent = nx >= 1
    if divergent and not allow_divergent:
        raise NumericalError("series diverges: ||G^-1 F|| >= 1", {"norm": nx})
    n = G.shape[0]
    partial = np.zeros_like(G)
    power = np.eye(n, dtype=complex)
    sums = []
    for j in range(int(order) + 1):
        partial = partial + _binom_half(j) * power
        sums.append(rootG @ partial)
        power = power @ X
    errors, limit_errors = [], []
    if reference:
        exact = principal_sqrtm(G + F)
        limit = rootG @ principal_sqrtm(np.eye(n) + X)
        en = np.linalg.norm(exact, 2)
        ln = np.linalg.norm(limit, 2)
        errors = [float(np.linalg.norm(s - exact, 2) / en) for s in sums]
        limit_errors = [float(np.linalg.norm(s - limit, 2) / ln) for s in sums]
    ledger = SeriesLedger(nx, nsym, errors, limit_errors,
                          float(np.linalg.norm(G @ F - F @ G, 2)), divergent)
    return sums[-1], ledger


def decompose_potential(op_total, B1):
    """Split the squared operator into G (constant B1 part) and F (the rest).

    ``op_total`` is a lattice operator built with ``B1`` and an extra vector
    potential; G is rebuilt from the constant-field part alone.  Returns
    ``(G, F, pieces)`` where ``pieces`` itemizes F.
    """
    if op_total.representation != "lattice-1d":
        raise UsageError("decomposition needs a lattice operator")
    meta = op_total.meta
    if list(np.asarray(B1, dtype=float)) != list(meta["B1"]):
        raise UsageError("B1 does not match the operator's constant field")
    p = op_total.params
    n = op_total.n_sites
    c = p.c
    q = p.e / c
    x = meta["x"]
    B1 = np.asarray(B1, dtype=float)
    a1 = np.stack([np.zeros(n), B1[2] * x, -B1[1] * x], axis=-1)
    px = -1j * p.hbar * _centred_difference(n, meta["spacing"], meta["periodic"])
    kperp = [np.diag(op_total.pis[1])[0] + q * a1[0, 1], np.diag(op_total.pis[2])[0] + q * a1[0, 2]]
    pi1 = [px - q * np.diag(a1[:, 0]), np.diag(kperp[0] - q * a1[:, 1]),
           np.diag(kperp[1] - q * a1[:, 2])]
    # the remainder A2 enters as pi_total = pi1 - (e/c) A2
    a2 = [(pi1[j] - op_total.pis[j]) / q for j in range(3)]
    base = DiracOperator("lattice-1d", pi1, np.zeros((n, n), dtype=complex), p, meta)
    G = squared_operator(base).matrix
    full = squared_operator(op_total)
    V = op_total.V
    eye4 = np.eye(4)
    pieces = {}
    mv = p.rest_energy * np.eye(4 * n) + np.kron(BETA, V)
    pieces["mass_V"] = mv @ mv - p.rest_energy**2 * np.eye(4 * n)
    pieces["A2_squared"] = np.kron(eye4, sum(q * q * c * c * (a @ a) for a in a2))
    pieces["pi1_A2"] = -np.kron(eye4, sum(q * c * c * (pi1[j] @ a2[j]) for j in range(3)))
    pieces["A2_pi1"] = -np.kron(eye4, sum(q * c * c * (a2[j] @ pi1[j]) for j in range(3)))
    pieces["V_alpha_pi"] = full.terms["V_alpha_pi"]
    pieces["sigma_B2"] = full.terms["sigma_B"] - squared_operator(base).terms["sigma_B"]
    pieces["alpha_E"] = full.terms["alpha_E"]
    pieces["dV_dt"] = full.terms["dV_dt"]
    pieces["alpha_grad_V"] = full.terms["alpha_grad_V"]
    F = sum(pieces.values())
    return G, F, pieces
