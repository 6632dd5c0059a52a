"""Grids, sampled fields and the plain-text field format.

Two grid kinds exist:

* ``PeriodicGrid``: a cubic box of ``shape`` points with uniform ``spacing``;
  coordinates are ``x_i = (i - n/2) * h`` along each axis, so the origin sits
  on a grid point.
* ``RadialGrid``: composite Gauss-Legendre nodes on ``(0, rmax)`` carrying
  quadrature weights, for radially symmetric functions of ``|x|``.

A field stores complex samples with the component axis first
(``values.shape == (components,) + grid.shape``).  An optional analytic
callable ``func`` lets the kernel engines evaluate the field off the grid
exactly; without it they interpolate.

File format (version 1), one record per line::

    # sqrtop-field 1
    kind periodic | radial
    dims n1 [n2 n3]
    spacing h            (periodic) / rmax R (radial)
    components C
    data
    re im [re im ...]    (one row per grid point, row-major, C pairs per row)

Radial files prefix each data row with the node ``r`` and weight ``w``.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, MalformedFieldError, UsageError

FORMAT_TAG = "# sqrtop-field 1"


@dataclass(frozen=True)
class PeriodicGrid:
    shape: tuple
    spacing: float

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        if len(shape) != 3 or min(shape) < 2:
            raise DomainError("periodic grids are three dimensional with n >= 2")
        if not self.spacing > 0:
            raise DomainError("grid spacing must be positive")
        object.__setattr__(self, "shape", shape)

    kind = "periodic"

    @property
    def size(self):
        return int(np.prod(self.shape))

    @property
    def lengths(self):
        return tuple(n * self.spacing for n in self.shape)

    def axes(self):
        return [(np.arange(n) - n // 2) * self.spacing for n in self.shape]

    def coords(self):
        """Coordinate arrays X, Y, Z of shape ``self.shape``."""
        return np.meshgrid(*self.axes(), indexing="ij")

    def points(self):
        """All grid points as a (size, 3) array in row-major order."""
        return np.stack([c.ravel() for c in self.coords()], axis=-1)

    def wavevectors(self):
        """Angular wavevector arrays matching ``np.fft.fftn`` ordering."""
        ks = [2 * np.pi * np.fft.fftfreq(n, d=self.spacing) for n in self.shape]
        return np.meshgrid(*ks, indexing="ij")

    def cell_volume(self):
        return self.spacing**3


@dataclass(frozen=True)
class RadialGrid:
    r: np.ndarray
    weights: np.ndarray
    rmax: float

    kind = "radial"

    @classmethod
    def gauss_legendre(cls, rmax, panels=64, order=10):
        """Composite Gauss-Legendre nodes on ``(0, rmax)``."""
        if not rmax > 0 or panels < 1 or order < 1:
            raise DomainError("need rmax > 0 and positive panel/order counts")
        x, w = np.polynomial.legendre.leggauss(order)
        edges = np.linspace(0.0, rmax, panels + 1)
        lo, hi = edges[:-1, None], edges[1:, None]
        r = ((hi - lo) / 2 * x + (hi + lo) / 2).ravel()
        wt = ((hi - lo) / 2 * w).ravel()
        return cls(r, wt, float(rmax))

    @property
    def shape(self):
        return (len(self.r),)

    @property
    def size(self):
        return len(self.r)

    def __eq__(self, other):
        return (
            isinstance(other, RadialGrid)
            and self.rmax == other.rmax
            and np.array_equal(self.r, other.r)
            and np.array_equal(self.weights, other.weights)
        )

    def __hash__(self):
        return hash((self.rmax, self.r.tobytes()))


@dataclass(frozen=True, eq=False)
class Field:
    """Complex samples on a grid, component axis first."""

    grid: object
    values: np.ndarray
    func: Optional[Callable] = field(default=None, repr=False)
    support: Optional[float] = None

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape == tuple(self.grid.shape):
            vals = vals[None]
        if vals.shape[1:] != tuple(self.grid.shape):
            raise UsageError(
                f"values of shape {vals.shape} do not match grid {self.grid.shape}"
            )
        object.__setattr__(self, "values", vals)

    @property
    def components(self):
        return self.values.shape[0]

    def evaluate(self, pts):
        """Field at arbitrary points.

        Periodic grids take (P, 3) points, radial grids take radii.  Returns
        an array of shape ``(components, P)``.
        """
        if self.func is not None:
            pts = np.asarray(pts, dtype=float)
            lead = pts.shape[:-1] if self.grid.kind == "periodic" else pts.shape
            out = np.asarray(self.func(pts), dtype=complex)
            return out.reshape((self.components,) + lead)
        raise UsageError("off-grid evaluation needs an analytic callable")

    def with_values(self, values, func=None):
        return type(self)(self.grid, values, func, self.support)

    def norm(self):
        """Discrete L2 norm using the grid measure."""
        if self.grid.kind == "periodic":
            return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.cell_volume()))
        w = 4 * np.pi * self.grid.r**2 * self.grid.weights
        return float(np.sqrt(np.sum(w * np.abs(self.values) ** 2)))


class ScalarField(Field):
    def __post_init__(self):
        super().__post_init__()
        if self.components != 1:
            raise UsageError("scalar fields carry one component")

    @property
    def data(self):
        return self.values[0]


class SpinorField(Field):
    def __post_init__(self):
        super().__post_init__()
        if self.components != 4:
            raise UsageError("spinor fields carry exactly four components")


def scalar_from_function(grid, func, support=None):
    """Sample ``func`` on ``grid`` and keep it for off-grid evaluation."""
    if grid.kind == "periodic":
        vals = np.asarray(func(grid.points()), dtype=complex).reshape(grid.shape)
    else:
        vals = np.asarray(func(grid.r), dtype=complex)
    return ScalarField(grid, vals, func, support)


def spinor_from_function(grid, func, support=None):
    """``func`` maps (P, 3) points to a (4, P) array."""
    if grid.kind != "periodic":
        raise UsageError("spinor fields live on periodic grids")
    vals = np.asarray(func(grid.points()), dtype=complex).reshape((4,) + grid.shape)
    return SpinorField(grid, vals, func, support)


def relative_l2(a, b, weights=None):
    """||a - b|| / ||b|| with optional quadrature weights."""
    a = np.asarray(a)
    b = np.asarray(b)
    w = 1.0 if weights is None else weights
    num = np.sum(w * np.abs(a - b) ** 2)
    den = np.sum(w * np.abs(b) ** 2)
    return float(np.sqrt(num / den))


# ---------------------------------------------------------------- file format


def format_field(f):
    """Serialise a field to the version-1 text format."""
    g = f.grid
    lines = [FORMAT_TAG, f"kind {g.kind}"]
    if g.kind == "periodic":
        lines.append("dims " + " ".join(str(n) for n in g.shape))
        lines.append(f"spacing {g.spacing!r}")
    else:
        lines.append(f"dims {g.size}")
        lines.append(f"rmax {g.rmax!r}")
    lines.append(f"components {f.components}")
    lines.append("data")
    flat = f.values.reshape(f.components, -1)
    for i in range(flat.shape[1]):
        row = []
        if g.kind == "radial":
            row += [repr(float(g.r[i])), repr(float(g.weights[i]))]
        for c in range(f.components):
            row += [repr(float(flat[c, i].real)), repr(float(flat[c, i].imag))]
        lines.append(" ".join(row))
    return "\n".join(lines) + "\n"


def parse_field(text):
    """Inverse of :func:`format_field`; raises MalformedFieldError with offsets."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise MalformedFieldError("file is not UTF-8 text", exc.start) from None
    offsets = []
    pos = 0
    lines = text.split("\n")
    for line in lines:
        offsets.append(pos)
        pos += len(line.encode("utf-8")) + 1

    def fail(msg, i):
        raise MalformedFieldError(msg, offsets[i] if i < len(offsets) else pos)

    if not lines or lines[0].strip() != FORMAT_TAG:
        fail("missing format tag", 0)
    header = {}
    i = 1
    while i < len(lines) and lines[i].strip() != "data":
        parts = lines[i].split()
        if not parts and i == len(lines) - 1:
            fail("missing data section", i)
        if not parts:
            fail("blank header line", i)
        if parts[0] in header:
            fail(f"duplicate header key {parts[0]!r}", i)
        header[parts[0]] = (parts[1:], i)
        i += 1
    if i >= len(lines):
        fail("missing data section", len(lines) - 1)
    for key in ("kind", "dims", "components"):
        if key not in header:
            fail(f"missing header key {key!r}", i)
    kind = header["kind"][0]
    if kind not in (["periodic"], ["radial"]):
        fail("kind must be periodic or radial", header["kind"][1])
    kind = kind[0]
    try:
        dims = [int(v) for v in header["dims"][0]]
        ncomp = int(header["components"][0][0])
    except (ValueError, IndexError):
        fail("dims/components must be integers", header["dims"][1])
    if ncomp < 1:
        fail("components must be positive", header["components"][1])
    if kind == "periodic":
        if len(dims) != 3 or "spacing" not in header:
            fail("periodic files need three dims and a spacing", header["dims"][1])
        try:
            spacing = float(header["spacing"][0][0])
        except (ValueError, IndexError):
            fail("spacing must be a number", header["spacing"][1])
        try:
            grid = PeriodicGrid(tuple(dims), spacing)
        except DomainError as exc:
            fail(str(exc), header["dims"][1])
        npts = grid.size
        width = 2 * ncomp
    else:
        if len(dims) != 1 or "rmax" not in header:
            fail("radial files need one dim and rmax", header["dims"][1])
        try:
            rmax = float(header["rmax"][0][0])
        except (ValueError, IndexError):
            fail("rmax must be a number", header["rmax"][1])
        npts = dims[0]
        width = 2 + 2 * ncomp
    rows = []
    for j in range(npts):
        k = i + 1 + j
        if k >= len(lines) or not lines[k].strip():
            fail(f"expected {npts} data rows, found {j}", min(k, len(lines) - 1))
        parts = lines[k].split()
        if len(parts) != width:
            fail(f"expected {width} numbers per row, found {len(parts)}", k)
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            fail("non-numeric entry", k)
    trailing = [ln for ln in lines[i + 1 + npts:] if ln.strip()]
    if trailing:
        fail("unexpected trailing data", i + 1 + npts)
    arr = np.array(rows, dtype=float).reshape(npts, width)
    if kind == "radial":
        grid = RadialGrid(arr[:, 0].copy(), arr[:, 1].copy(), rmax)
        arr = arr[:, 2:]
    vals = (arr[:, 0::2] + 1j * arr[:, 1::2]).T.reshape((ncomp,) + grid.shape)
    cls = SpinorField if ncomp == 4 else ScalarField if ncomp == 1 else Field
    return cls(grid, vals)


def write_field(path, f):
    from .io_utils import atomic_write_text

    atomic_write_text(path, format_field(f))


def read_field(path):
    with open(path, "rb") as fh:
        return parse_field(fh.read())
