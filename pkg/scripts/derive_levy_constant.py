"""Recover the normalisation of the jump kernel by quadrature.

For mu = 1 the symbol sqrt(k^2 + 1) - 1 must equal

    C * 4 pi * int_0^inf (1 - sin(k r) / (k r)) K2(r) dr

for a single constant C.  Solving at several k and comparing with
1 / (2 pi^2) confirms the constant used by the kernels.
"""

import argparse

import numpy as np
from scipy import integrate, special

from sqrtop.kernels import LEVY_CONSTANT


def angular_integral(k):
    def f(r):
        kr = k * r
        # series for small kr avoids cancellation in 1 - sin(x)/x
        x2 = kr * kr
        damp = x2 * (1 / 6 - x2 * (1 / 120 - x2 * (1 / 5040 - x2 / 362880))) if kr < 0.1 else 1 - np.sin(kr) / kr
        return damp * special.kv(2, r)

    total = 0.0
    edges = [0.0, 1e-3, 0.1, 1.0, 5.0, 20.0, 60.0, 200.0]  # K2(200) ~ 1e-88
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(f, lo, hi, epsabs=1e-15, epsrel=1e-12, limit=200)
        total += val
    return 4 * np.pi * total


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--k", type=float, nargs="*", default=[0.1, 0.5, 1.0, 2.0, 5.0])
    args = ap.parse_args(argv)
    print(f"{'k':>6} {'C(k)':>22} {'C(k) * 2 pi^2':>18}")
    worst = 0.0
    for k in args.k:
        c = (np.hypot(k, 1.0) - 1.0) / angular_integral(k)
        worst = max(worst, abs(c / LEVY_CONSTANT - 1))
        print(f"{k:6.2f} {c:22.16f} {c * 2 * np.pi**2:18.14f}")
    print(f"1/(2 pi^2) = {LEVY_CONSTANT:.16f}; max relative deviation {worst:.2e}")
    return 0 if worst < 1e-8 else 1


if __name__ == "__main__":
    raise SystemExit(main())
