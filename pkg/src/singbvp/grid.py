"""Uniform interior grids on intervals and axis-aligned rectangles.

Only interior nodes are stored; the homogeneous Dirichlet boundary value 0
is implicit everywhere.  2D fields are flattened row-major with x as the
outer axis and y as the inner axis: value[i*n + j] lives at (x_i, y_j).
This layout is part of the file format contract (see write_field_csv).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

__all__ = [
    "DomainSpec",
    "Grid",
    "ScalarField",
    "build_grid",
    "neg_laplacian",
    "neg_laplacian_matrix",
    "gradient_p",
    "gradient_components",
    "boundary_distance",
    "field_from_function",
    "write_field_csv",
    "read_field_csv",
]

_FMT = "%.17g"  # fixed decimal width for bit-stable round trips


@dataclass(frozen=True)
class DomainSpec:
    """An interval (a,b) or rectangle (ax,bx) x (ay,by) with n interior
    nodes per axis and mesh width (b-a)/(n+1)."""

    kind: str
    bounds: tuple
    n: int

    def __post_init__(self):
        if self.kind not in ("interval", "rectangle"):
            raise ValueError(f"unknown domain kind {self.kind!r}")
        n = self.n
        if not isinstance(n, (int, np.integer)) or n < 3:
            raise ValueError(f"need at least 3 interior nodes per axis, got n={n}")
        for a, b in self.axis_bounds:
            if not (np.isfinite(a) and np.isfinite(b) and a < b):
                raise ValueError(f"degenerate axis bounds ({a}, {b})")

    @property
    def ndim(self) -> int:
        return 1 if self.kind == "interval" else 2

    @property
    def axis_bounds(self) -> tuple:
        """Bounds normalized to a tuple of (lo, hi) pairs, one per axis."""
        if self.kind == "interval":
            return (tuple(float(v) for v in self.bounds),)
        return tuple(tuple(float(v) for v in ab) for ab in self.bounds)

    @property
    def mesh_widths(self) -> tuple:
        return tuple((b - a) / (self.n + 1) for a, b in self.axis_bounds)

    @property
    def num_nodes(self) -> int:
        return self.n**self.ndim

    @staticmethod
    def interval(a: float, b: float, n: int) -> "DomainSpec":
        return DomainSpec("interval", (float(a), float(b)), int(n))

    @staticmethod
    def rectangle(ax: float, bx: float, ay: float, by: float, n: int) -> "DomainSpec":
        return DomainSpec(
            "rectangle", ((float(ax), float(bx)), (float(ay), float(by))), int(n)
        )


@dataclass(frozen=True)
class Grid:
    """Interior node coordinates and mesh widths for a DomainSpec."""

    domain: DomainSpec
    axes: tuple          # one strictly interior coordinate array per axis
    h: tuple             # mesh width per axis

    @property
    def points(self) -> np.ndarray:
        """All nodes as an (N, ndim) array in storage order."""
        if self.domain.ndim == 1:
            return self.axes[0][:, None]
        X, Y = np.meshgrid(self.axes[0], self.axes[1], indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()])

    @property
    def shape(self) -> tuple:
        return (self.domain.n,) * self.domain.ndim


def build_grid(domain: DomainSpec) -> Grid:
    """Equally spaced interior nodes; boundary nodes excluded."""
    axes = []
    for (a, b), h in zip(domain.axis_bounds, domain.mesh_widths):
        axes.append(a + h * np.arange(1, domain.n + 1))
    return Grid(domain=domain, axes=tuple(axes), h=domain.mesh_widths)


@dataclass
class ScalarField:
    """Node values of a function over the interior nodes of a domain.

    The boundary value is implicitly 0 (Dirichlet).  values is flat,
    length n in 1D and n^2 (row-major, x outer) in 2D.
    """

    domain: DomainSpec
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.domain.num_nodes,):
            raise ValueError(
                f"field length {v.shape} does not match domain "
                f"({self.domain.num_nodes} nodes)"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "values", v)

    def reshaped(self) -> np.ndarray:
        """values as an (n,) or (n,n) array."""
        if self.domain.ndim == 1:
            return self.values
        n = self.domain.n
        return self.values.reshape(n, n)

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def copy_with(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(self.domain, np.asarray(values, dtype=float))


def field_from_function(domain: DomainSpec, fn) -> ScalarField:
    """Sample fn on the interior nodes.  fn takes (x,) arrays in 1D and
    (x, y) arrays in 2D."""
    g = build_grid(domain)
    if domain.ndim == 1:
        vals = np.asarray(fn(g.axes[0]), dtype=float)
    else:
        X, Y = np.meshgrid(g.axes[0], g.axes[1], indexing="ij")
        vals = np.asarray(fn(X, Y), dtype=float).ravel()
    return ScalarField(domain, vals)


def _check_match(u: ScalarField, domain: DomainSpec):
    if u.domain != domain:
        raise ValueError("field does not match expected domain")


def neg_laplacian(u: ScalarField) -> ScalarField:
    """Second-order centered -Laplacian with zero Dirichlet ghost values."""
    dom = u.domain
    if dom.ndim == 1:
        h = dom.mesh_widths[0]
        v = u.values
        padded = np.zeros(v.size + 2)
        padded[1:-1] = v
        out = (2.0 * v - padded[:-2] - padded[2:]) / h**2
        return ScalarField(dom, out)
    hx, hy = dom.mesh_widths
    n = dom.n
    v = u.reshaped()
    padded = np.zeros((n + 2, n + 2))
    padded[1:-1, 1:-1] = v
    out = (2.0 * v - padded[:-2, 1:-1] - padded[2:, 1:-1]) / hx**2
    out += (2.0 * v - padded[1:-1, :-2] - padded[1:-1, 2:]) / hy**2
    return ScalarField(dom, out.ravel())


def neg_laplacian_matrix(domain: DomainSpec) -> sp.csr_matrix:
    """Sparse matrix of the discrete negative Laplacian on interior nodes."""
    n = domain.n
    if domain.ndim == 1:
        h = domain.mesh_widths[0]
        a = sp.diags(
            [2.0 / h**2 * np.ones(n), -1.0 / h**2 * np.ones(n - 1),
             -1.0 / h**2 * np.ones(n - 1)],
            [0, 1, -1],
        )
        return a.tocsr()
    hx, hy = domain.mesh_widths
    ex = np.ones(n)
    t_x = sp.diags([2.0 / hx**2 * ex, -1.0 / hx**2 * ex[:-1], -1.0 / hx**2 * ex[:-1]],
                   [0, 1, -1])
    t_y = sp.diags([2.0 / hy**2 * ex, -1.0 / hy**2 * ex[:-1], -1.0 / hy**2 * ex[:-1]],
                   [0, 1, -1])
    eye = sp.identity(n)
    return (sp.kron(t_x, eye) + sp.kron(eye, t_y)).tocsr()


def gradient_components(u: ScalarField) -> tuple:
    """Centered-difference gradient components with zero Dirichlet ghosts.

    At nodes adjacent to the boundary the stencil uses the boundary value 0
    at distance h, which keeps second order for fields vanishing there.
    """
    dom = u.domain
    if dom.ndim == 1:
        h = dom.mesh_widths[0]
        v = u.values
        padded = np.zeros(v.size + 2)
        padded[1:-1] = v
        return ((padded[2:] - padded[:-2]) / (2.0 * h),)
    hx, hy = dom.mesh_widths
    n = dom.n
    v = u.reshaped()
    padded = np.zeros((n + 2, n + 2))
    padded[1:-1, 1:-1] = v
    gx = (padded[2:, 1:-1] - padded[:-2, 1:-1]) / (2.0 * hx)
    gy = (padded[1:-1, 2:] - padded[1:-1, :-2]) / (2.0 * hy)
    return (gx.ravel(), gy.ravel())


def gradient_p(u: ScalarField, p: float) -> ScalarField:
    """Euclidean norm of the discrete gradient raised to the power p.

    Requires 0 < p <= 2; larger exponents are out of scope.
    """
    if not (0.0 < p <= 2.0):
        raise ValueError(f"gradient exponent p must lie in (0, 2], got {p}")
    comps = gradient_components(u)
    q = comps[0] ** 2
    for c in comps[1:]:
        q = q + c**2
    if p == 2.0:
        return ScalarField(u.domain, q)
    return ScalarField(u.domain, q ** (p / 2.0))


def boundary_distance(domain: DomainSpec) -> ScalarField:
    """Exact distance from each node to the box boundary."""
    g = build_grid(domain)
    per_axis = []
    for (a, b), x in zip(domain.axis_bounds, g.axes):
        per_axis.append(np.minimum(x - a, b - x))
    if domain.ndim == 1:
        return ScalarField(domain, per_axis[0])
    d = np.minimum(per_axis[0][:, None], per_axis[1][None, :])
    return ScalarField(domain, d.ravel())


def write_field_csv(u: ScalarField, path) -> None:
    """Dump a field as CSV with columns x[,y],value, 17 significant digits."""
    g = build_grid(u.domain)
    pts = g.points
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if u.domain.ndim == 1:
            w.writerow(["x", "value"])
            for x, val in zip(pts[:, 0], u.values):
                w.writerow([_FMT % x, _FMT % val])
        else:
            w.writerow(["x", "y", "value"])
            for (x, y), val in zip(pts, u.values):
                w.writerow([_FMT % x, _FMT % y, _FMT % val])


def read_field_csv(path, domain: DomainSpec) -> ScalarField:
    """Read a field dumped by write_field_csv, validating node count and
    coordinates against the given domain."""
    g = build_grid(domain)
    pts = g.points
    rows = []
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        ncols = 2 if domain.ndim == 1 else 3
        if len(header) != ncols:
            raise ValueError(f"expected {ncols} CSV columns, got {len(header)}")
        for row in r:
            rows.append([float(tok) for tok in row])
    arr = np.asarray(rows)
    if arr.shape[0] != domain.num_nodes:
        raise ValueError(
            f"CSV has {arr.shape[0]} rows, domain has {domain.num_nodes} nodes"
        )
    coord_tol = 1e-9 * max(h for h in domain.mesh_widths)
    if np.max(np.abs(arr[:, :-1] - pts)) > coord_tol:
        raise ValueError("CSV node coordinates do not match the domain grid")
    return ScalarField(domain, arr[:, -1])
