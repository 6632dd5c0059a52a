"""Show that the free jump kernel depends on mass only through u = mu r.

With hbar = c = 1 the kernel times r^4 / LEVY_CONSTANT equals u^2 K2(u).
The script tabulates it for several masses on a common u grid, prints the
largest spread between masses and optionally writes the columns as CSV.
"""

import argparse

import numpy as np

from sqrtop.kernels import LEVY_CONSTANT, kernel_profile
from sqrtop.params import PhysicalParams


def collapsed(masses, u):
    cols = []
    for m in masses:
        p = PhysicalParams(m=m)
        r = u / p.mu
        prof = kernel_profile("free", r, p)
        cols.append(prof.values * r**4 / (LEVY_CONSTANT * p.hbar_c))
    return np.array(cols)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--masses", type=float, nargs="+", default=[0.25, 1.0, 4.0])
    ap.add_argument("--u", default="0.01:12:60", help="START:STOP:COUNT")
    ap.add_argument("--csv", help="write u and one column per mass")
    args = ap.parse_args()
    lo, hi, n = args.u.split(":")
    u = np.linspace(float(lo), float(hi), int(n))
    cols = collapsed(args.masses, u)
    spread = np.max(np.abs(cols - cols[0]) / np.abs(cols[0]))
    print(f"max relative spread across masses: {spread:.2e}")
    print(f"u^2 K2(u) at u -> 0: {cols[0, 0]:.6f} (limit 2)")
    if args.csv:
        header = "u," + ",".join(f"m={m}" for m in args.masses)
        np.savetxt(args.csv, np.column_stack([u, cols.T]), delimiter=",", header=header, comments="")


if __name__ == "__main__":
    main()
