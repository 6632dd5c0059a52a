"""Command line front end.

Verbs: ``suite``, ``tabulate``, ``apply``, ``info``.  Settings come from an
INI-style config file (``--config``) and are overridden by flags.  Exit
codes: 0 ok, 1 check failure, 2 usage, 3 I/O, 4 malformed data.  Keys are
case sensitive.

Config sections and keys::

    [params]      m, c, hbar, e
    [grid]        shape (N or N,N,N), spacing
    [run]         out, suite, strict
    [tolerances]  <suite>.<check> = value   (or just <check>)
    [operator]    A (x,y,z), B (x,y,z), t, construction
"""

import argparse
import configparser
import io
import json
import os
import sys
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DomainError, MalformedFieldError, NumericalError, UsageError
from .io_utils import atomic_write_text
from .params import PhysicalParams

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO, EXIT_MALFORMED = 0, 1, 2, 3, 4

_SCHEMA = {
    "params": {"m", "c", "hbar", "e"},
    "grid": {"shape", "spacing"},
    "run": {"out", "suite", "strict"},
    "tolerances": None,
    "operator": {"A", "B", "t", "construction"},
}


def _vec(text):
    vals = [float(v) for v in text.replace(" ", "").split(",") if v]
    if len(vals) != 3:
        raise UsageError(f"expected three comma separated numbers, got {text!r}")
    return tuple(vals)


def _parser():
    cp = configparser.ConfigParser()
    # check names such as small_u_K0 are case sensitive
    cp.optionxform = str
    return cp


def _fmt_vec(v):
    return ",".join(repr(float(x)) for x in v)


@dataclass
class RunConfig:
    command: str = "info"
    params: PhysicalParams = field(default_factory=PhysicalParams)
    grid_shape: tuple = (16, 16, 16)
    grid_spacing: float = 0.5
    out: str = "sqrtop-out"
    suite: str = "all"
    strict: bool = False
    tolerances: dict = field(default_factory=dict)
    A: tuple = (0.0, 0.0, 0.0)
    B: tuple = (0.0, 0.0, 0.0)
    t: float = 0.5
    construction: str = "hermitian"
    fields: tuple = ()

    def __post_init__(self):
        for k, v in self.tolerances.items():
            if not float(v) > 0:
                raise UsageError(f"tolerance {k} must be positive")
        if self.construction not in ("verbatim", "hermitian", "scalar"):
            raise UsageError("construction must be verbatim, hermitian or scalar")

    def to_ini(self):
        cp = _parser()
        cp["params"] = {k: repr(float(v)) for k, v in self.params.as_dict().items()}
        cp["grid"] = {"shape": ",".join(str(n) for n in self.grid_shape),
                      "spacing": repr(float(self.grid_spacing))}
        cp["run"] = {"out": self.out, "suite": self.suite, "strict": str(self.strict).lower()}
        cp["tolerances"] = {k: repr(float(v)) for k, v in sorted(self.tolerances.items())}
        cp["operator"] = {"A": _fmt_vec(self.A), "B": _fmt_vec(self.B), "t": repr(float(self.t)),
                          "construction": self.construction}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text, command="info"):
        cp = _parser()
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise UsageError(f"unreadable config: {exc}") from None
        for sec in cp.sections():
            if sec not in _SCHEMA:
                raise UsageError(f"unknown config section [{sec}]")
            allowed = _SCHEMA[sec]
            if allowed is not None:
                extra = set(cp[sec]) - allowed
                if extra:
                    raise UsageError(f"unknown keys in [{sec}]: {sorted(extra)}")
        kw = {"command": command}
        try:
            if cp.has_section("params"):
                kw["params"] = PhysicalParams(**{k: float(v) for k, v in cp["params"].items()})
            if cp.has_section("grid"):
                g = cp["grid"]
                if "shape" in g:
                    kw["grid_shape"] = _shape(g["shape"])
                if "spacing" in g:
                    kw["grid_spacing"] = float(g["spacing"])
            if cp.has_section("run"):
                r = cp["run"]
                if "out" in r:
                    kw["out"] = r["out"]
                if "suite" in r:
                    kw["suite"] = r["suite"]
                if "strict" in r:
                    kw["strict"] = r.getboolean("strict")
            if cp.has_section("tolerances"):
                kw["tolerances"] = {k: float(v) for k, v in cp["tolerances"].items()}
            if cp.has_section("operator"):
                o = cp["operator"]
                if "A" in o:
                    kw["A"] = _vec(o["A"])
                if "B" in o:
                    kw["B"] = _vec(o["B"])
                if "t" in o:
                    kw["t"] = float(o["t"])
                if "construction" in o:
                    kw["construction"] = o["construction"]
        except (ValueError, DomainError) as exc:
            raise UsageError(f"bad config value: {exc}") from None
        return cls(**kw)


def _shape(text):
    parts = [int(p) for p in str(text).split(",") if p.strip()]
    if len(parts) == 1:
        parts = parts * 3
    if len(parts) != 3 or min(parts) < 2:
        raise UsageError("grid shape must be N or N,N,N with N >= 2")
    return tuple(parts)


def _params_flag(text, base):
    vals = base.as_dict()
    for item in text.split(","):
        if not item.strip():
            continue
        key, _, value = item.partition("=")
        key = key.strip()
        if key not in vals:
            raise UsageError(f"unknown parameter {key!r}")
        vals[key] = float(value)
    return PhysicalParams(**vals)


def _range(text):
    try:
        lo, hi, n = text.split(":")
        lo, hi, n = float(lo), float(hi), int(n)
    except ValueError:
        raise UsageError(f"range must be START:STOP:COUNT, got {text!r}") from None
    if n < 1 or (n > 1 and hi <= lo):
        raise UsageError("empty range")
    return np.linspace(lo, hi, n)


# -------------------------------------------------------------------- verbs


def _report_csv(results):
    lines = ["suite,check,value,tol,status,seconds,detail"]
    for res in results:
        for c in res.checks:
            tol = "" if c.tol is None else repr(c.tol)
            detail = c.detail.replace(",", ";")
            lines.append(f"{c.suite},{c.name},{c.value!r},{tol},{c.status},{res.seconds:.3f},{detail}")
    return "\n".join(lines) + "\n"


def run_suite(name, config):
    """Run a suite (or ``all``); write reports; return the exit status."""
    from . import suites

    names = suites.SUITES if name == "all" else (name,)
    if any(n not in suites.SUITES for n in names):
        raise UsageError(f"unknown suite {name!r}; choose from {', '.join(suites.SUITES)} or all")
    results = [suites.run(n, config.params, config.tolerances) for n in names]
    checks = [c for r in results for c in r.checks]
    failed = [f"{c.suite}.{c.name}" for c in checks if c.failed(config.strict)]
    counts = {}
    for c in checks:
        counts[c.status] = counts.get(c.status, 0) + 1
    summary = {"suite": name, "checks": len(checks), "failed": failed, "status_counts": counts}
    os.makedirs(config.out, exist_ok=True)
    atomic_write_text(os.path.join(config.out, f"suite-{name}.csv"), _report_csv(results))
    atomic_write_text(os.path.join(config.out, f"suite-{name}.json"), json.dumps(summary, sort_keys=True) + "\n")
    for c in checks:
        tol = "-" if c.tol is None else f"{c.tol:.1e}"
        print(f"{c.status:6s} {c.suite}.{c.name}: {c.value:.3e} (tol {tol})")
    print(json.dumps(summary, sort_keys=True))
    return EXIT_FAIL if failed else EXIT_OK


def tabulate(kind, config, r_range=None, ct_range=None):
    """Write a kernel CSV and return its path."""
    from .kernels import LEVY_CONSTANT, KernelProfile, kernel_profile, regime_label
    from .propagator import subordinated_heat_kernel, tabulate_kernel

    p = config.params
    header = [f"# {k} = {v}" for k, v in p.as_dict().items()]
    header += [f"# levy_constant = {LEVY_CONSTANT!r}"]
    if kind in ("free", "constant-A", "constant-B"):
        if r_range is None:
            raise UsageError("--r is required")
        a = p.gauge_wavevector(config.A)
        prof = kernel_profile(kind, r_range, p, a=a, B=config.B, construction=config.construction)
        text = prof.to_csv()
    elif kind == "heat":
        if r_range is None:
            raise UsageError("--r is required")
        vals = subordinated_heat_kernel(r_range, config.t, p)
        prof = KernelProfile("heat", r_range, np.asarray(vals, dtype=float),
                             regime_label(p.mu * r_range), {"kind": "heat", "t": config.t,
                                                            **p.as_dict()})
        text = prof.to_csv()
    elif kind == "z-kernel":
        if r_range is None or ct_range is None:
            raise UsageError("--r and --ct are required")
        table = tabulate_kernel(ct_range, r_range, p)
        if not table.rows:
            raise UsageError("empty range")
        text = "\n".join(header + ["# prefactor = mu^2 c t / (4 pi)"]) + "\n" + table.to_csv()
    else:
        raise UsageError(f"unknown kernel kind {kind!r}")
    os.makedirs(config.out, exist_ok=True)
    path = os.path.join(config.out, f"kernel-{kind}.csv")
    atomic_write_text(path, text)
    return path


def apply(operator, field_path, config, output=None):
    """Apply an operator to a field file; write the result and a metadata sidecar."""
    from .fields import SpinorField, read_field, relative_l2, write_field
    from .kernels import apply_constant_A, apply_free
    from .magnetic import apply_constant_B
    from .propagator import apply_U
    from .spectral import evolve_spectral, radial_evolve_spectral

    if field_path.startswith("builtin:"):
        psi = builtin_field(field_path, config)
        source = field_path
    else:
        psi = read_field(field_path)
        source = os.path.abspath(field_path)
    p = config.params
    meta = {"operator": operator, "input": source, "grid": psi.grid.kind,
            "shape": list(psi.grid.shape), "params": p.as_dict()}
    err = None
    if operator == "sqrt-free":
        out, err = apply_free(psi, p, return_error=True)
    elif operator == "sqrt-A":
        out, err = apply_constant_A(psi, config.A, p, return_error=True)
    elif operator == "sqrt-B":
        if not isinstance(psi, SpinorField):
            raise UsageError("sqrt-B needs a four-component field")
        out, err = apply_constant_B(psi, config.B, p, construction=config.construction,
                                    return_error=True)
    elif operator == "evolve-spectral" and psi.grid.kind == "radial":
        if np.any(config.A):
            raise UsageError("a vector potential breaks radial symmetry")
        out, err = radial_evolve_spectral(psi, config.t, p, return_error=True)
        meta["t"] = config.t
    elif operator == "evolve-spectral":
        out = evolve_spectral(psi, config.t, p, gauge_a=np.asarray(p.gauge_wavevector(config.A)))
        meta["t"] = config.t
    elif operator == "propagate-U":
        if psi.func is None and psi.grid.kind == "radial":
            from scipy.interpolate import CubicSpline

            spline = CubicSpline(psi.grid.r, psi.values[0])
            rmax = psi.grid.rmax
            psi = psi.with_values(psi.values, lambda s: np.where(s <= rmax, spline(np.minimum(s, rmax)), 0.0))
        out, err = apply_U(psi, config.t, A=config.A, params=p, return_error=True)
        meta["t"] = config.t
        if not np.any(config.A):
            if psi.grid.kind == "radial":
                ref = radial_evolve_spectral(psi, config.t, p)
                w = psi.grid.r**2 * psi.grid.weights
                meta["relative_l2_vs_spectral"] = relative_l2(out.values, ref.values, w[None])
            else:
                ref = evolve_spectral(psi, config.t, p)
                meta["relative_l2_vs_spectral"] = relative_l2(out.values, ref.values)
    else:
        raise UsageError(f"unknown operator {operator!r}")
    meta["error_estimate"] = err
    os.makedirs(config.out, exist_ok=True)
    output = output or os.path.join(config.out, f"{operator}.field")
    write_field(output, out)
    atomic_write_text(output + ".meta.jsonl", json.dumps(meta, sort_keys=True) + "\n")
    return output, meta


BUILTINS = ("gaussian", "constant", "spinor-gaussian", "radial-gaussian")


def builtin_field(spec, config):
    """Generate ``builtin:NAME[:VALUE]`` on the configured grid.

    ``gaussian:w`` is exp(-|x|^2 / w^2) (default w = 1), ``constant:v`` the
    constant v (default 1), ``spinor-gaussian:w`` a four-component Gaussian
    and ``radial-gaussian:w`` the same profile on a radial Gauss grid of
    radius ``grid_shape[0] * grid_spacing``.  Periodic fields are stored
    as samples only, as if read from a file.
    """
    from .fields import PeriodicGrid, RadialGrid, ScalarField, SpinorField, scalar_from_function

    parts = spec.split(":")[1:]
    name = parts[0] if parts else ""
    if name not in BUILTINS or len(parts) > 2:
        raise UsageError(f"unknown builtin field {spec!r}; choose from {', '.join(BUILTINS)}")
    try:
        value = float(parts[1]) if len(parts) == 2 else 1.0
    except ValueError:
        raise UsageError(f"bad builtin parameter in {spec!r}") from None
    if name == "radial-gaussian":
        rmax = config.grid_shape[0] * config.grid_spacing
        if not value > 0:
            raise UsageError("radial-gaussian width must be positive")
        # panels of width <= w / 4 resolve the transform down to 1e-12
        grid = RadialGrid.gauss_legendre(rmax, panels=max(int(np.ceil(4 * rmax / value)), 16))
        return scalar_from_function(grid, lambda r: np.exp(-(r / value) ** 2), support=rmax)
    grid = PeriodicGrid(config.grid_shape, config.grid_spacing)
    pts = grid.points()
    if name == "constant":
        return ScalarField(grid, np.full(grid.shape, value, dtype=complex))
    prof = np.exp(-np.sum(pts * pts, axis=-1) / value**2).reshape(grid.shape).astype(complex)
    if name == "gaussian":
        return ScalarField(grid, prof)
    return SpinorField(grid, np.stack([prof, 0.5 * prof, 0.25j * prof, -0.5 * prof]))


def info(config):
    from . import __version__
    from .kernels import LEVY_CONSTANT
    from .suites import SUITES

    p = config.params
    return {"version": __version__, "params": p.as_dict(), "mu": p.mu, "rest_energy": p.rest_energy,
            "levy_constant": LEVY_CONSTANT, "suites": list(SUITES) + ["all"]}


# -------------------------------------------------------------------- main


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file")
    common.add_argument("--out", help="output directory")
    common.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE")
    common.add_argument("--grid", help="N or N,N,N for builtin fields")
    common.add_argument("--spacing", type=float, help="grid spacing for builtin fields")
    common.add_argument("--params", help="m=..,c=..,hbar=..,e=..")
    parser = argparse.ArgumentParser(prog="sqrtop", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)
    s = sub.add_parser("suite", parents=[common], help="run a validation suite")
    s.add_argument("name")
    s.add_argument("--strict", action="store_true", help="count documented expected failures")
    t = sub.add_parser("tabulate", parents=[common], help="tabulate a kernel")
    t.add_argument("kind", help="free, constant-A, constant-B, z-kernel or heat")
    t.add_argument("--r", help="START:STOP:COUNT")
    t.add_argument("--ct", help="START:STOP:COUNT")
    t.add_argument("--A", help="x,y,z")
    t.add_argument("--B", help="x,y,z")
    t.add_argument("--t", type=float)
    t.add_argument("--construction")
    a = sub.add_parser("apply", parents=[common], help="apply an operator to a field file")
    a.add_argument("operator", help="sqrt-free, sqrt-A, sqrt-B, evolve-spectral or propagate-U")
    a.add_argument("field", help="field file or builtin:NAME[:VALUE]")
    a.add_argument("--output")
    a.add_argument("--A", help="x,y,z")
    a.add_argument("--B", help="x,y,z")
    a.add_argument("--t", type=float)
    a.add_argument("--construction")
    sub.add_parser("info", parents=[common], help="print parameters and constants")
    return parser


def load_config(args):
    """Config file first, then flags (flags win)."""
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise OSError(f"cannot read config: {exc}") from exc
        cfg = RunConfig.from_ini(text, args.verb)
    else:
        cfg = RunConfig(command=args.verb)
    changes = {}
    if args.out:
        changes["out"] = args.out
    if args.grid:
        changes["grid_shape"] = _shape(args.grid)
    if args.spacing is not None:
        if not args.spacing > 0:
            raise UsageError("--spacing must be positive")
        changes["grid_spacing"] = args.spacing
    if args.params:
        changes["params"] = _params_flag(args.params, cfg.params)
    if args.tol:
        tols = dict(cfg.tolerances)
        for item in args.tol:
            key, sep, value = item.partition("=")
            if not sep:
                raise UsageError(f"--tol expects NAME=VALUE, got {item!r}")
            try:
                tols[key.strip()] = float(value)
            except ValueError:
                raise UsageError(f"bad tolerance value {value!r}") from None
        changes["tolerances"] = tols
    for attr, conv in (("A", _vec), ("B", _vec), ("t", float), ("construction", str)):
        val = getattr(args, attr, None)
        if val is not None:
            changes[attr] = conv(val)
    if getattr(args, "strict", False):
        changes["strict"] = True
    return replace(cfg, **changes)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = load_config(args)
        if args.verb == "suite":
            return run_suite(args.name, cfg)
        if args.verb == "tabulate":
            path = tabulate(args.kind, cfg, _range(args.r) if args.r else None,
                            _range(args.ct) if args.ct else None)
            print(path)
        elif args.verb == "apply":
            path, meta = apply(args.operator, args.field, cfg, args.output)
            print(json.dumps({"output": path, **{k: meta[k] for k in meta if k != "input"}},
                             sort_keys=True, default=str))
        else:
            print(json.dumps(info(cfg), sort_keys=True))
        return EXIT_OK
    except MalformedFieldError as exc:
        print(f"malformed field: {exc}", file=sys.stderr)
        return EXIT_MALFORMED
    except (UsageError, DomainError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericalError as exc:
        print(f"numerical failure: {exc} {exc.diagnostics}", file=sys.stderr)
        return EXIT_FAIL
