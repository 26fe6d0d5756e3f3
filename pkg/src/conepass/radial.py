"""Radial discretization of the unit ball.

Profiles are piecewise-linear (P1) radial functions on [0, 1].  Every integral
carries the weight r^(N-1) from the volume element of the N-ball; the constant
angular factor is dropped throughout, which rescales all energies by one fixed
constant and changes no minimizer, level ordering, or limit.

The admissible cone consists of nonnegative, nondecreasing profiles.  Its
metric projection (in the discrete weighted L2 inner product with lumped node
weights w_i = int r^(N-1) phi_i dr) is a weighted isotonic regression followed
by a clamp at the box bounds; clamping a monotone profile keeps it monotone,
so the composition is idempotent and nonexpansive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError

GRADINGS = ("uniform", "boundary-refined", "origin-refined")


@dataclass(frozen=True, eq=False)
class ConeTolerance:
    """Slack for membership tests of the cone of nondecreasing profiles."""

    nonneg_tol: float = 1e-12
    monotone_tol: float = 1e-12


@dataclass(frozen=True, eq=False)
class RadialGrid:
    """P1 mesh of [0, 1] with per-element Gauss quadrature.

    Attributes
    ----------
    nodes : (n+1,) increasing array with nodes[0] = 0, nodes[-1] = 1.
    dim : spatial dimension N >= 1 (weight r^(N-1)).

    Derived arrays (filled in __post_init__):
    h : (n,) element lengths.
    quad_x, quad_w : (n, k) Gauss points and plain weights per element.
    quad_rw : (n, k) weights including the r^(N-1) factor.
    elem_measure : (n,) int_e r^(N-1) dr.
    lumped : (n+1,) node weights int r^(N-1) phi_i dr.
    """

    nodes: np.ndarray
    dim: int
    h: np.ndarray = field(init=False, repr=False)
    quad_x: np.ndarray = field(init=False, repr=False)
    quad_w: np.ndarray = field(init=False, repr=False)
    quad_rw: np.ndarray = field(init=False, repr=False)
    elem_measure: np.ndarray = field(init=False, repr=False)
    lumped: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise InvalidParameterError("grid needs at least two nodes")
        if abs(nodes[0]) > 0.0 or abs(nodes[-1] - 1.0) > 1e-14:
            raise InvalidParameterError("grid must span [0, 1] exactly")
        if np.any(np.diff(nodes) <= 0):
            raise InvalidParameterError("grid nodes must be strictly increasing")
        if not (isinstance(self.dim, (int, np.integer)) and self.dim >= 1):
            raise InvalidParameterError("dimension must be an integer >= 1")
        nodes = nodes.copy()
        nodes[-1] = 1.0
        object.__setattr__(self, "nodes", nodes)

        N = int(self.dim)
        h = np.diff(nodes)
        # enough Gauss points for r^(N-1) times quartics: degree N+3 exact
        k = max(3, math.ceil((N + 4) / 2))
        gx, gw = np.polynomial.legendre.leggauss(k)
        mid = 0.5 * (nodes[:-1] + nodes[1:])
        half = 0.5 * h
        qx = mid[:, None] + half[:, None] * gx[None, :]
        qw = half[:, None] * gw[None, :]
        qrw = qw * qx ** (N - 1)
        measure = qrw.sum(axis=1)

        # lumped weights: int r^(N-1) phi_i dr, phi_i the hat at node i
        lam_right = (qx - nodes[:-1, None]) / h[:, None]   # phi of right node
        lumped = np.zeros(nodes.size)
        np.add.at(lumped, np.arange(h.size), (qrw * (1.0 - lam_right)).sum(axis=1))
        np.add.at(lumped, np.arange(1, nodes.size), (qrw * lam_right).sum(axis=1))

        object.__setattr__(self, "h", h)
        object.__setattr__(self, "quad_x", qx)
        object.__setattr__(self, "quad_w", qw)
        object.__setattr__(self, "quad_rw", qrw)
        object.__setattr__(self, "elem_measure", measure)
        object.__setattr__(self, "lumped", lumped)

    @property
    def n_elements(self) -> int:
        return self.nodes.size - 1

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    def at_quad(self, values: np.ndarray) -> np.ndarray:
        """Linear interpolation of nodal values onto the quadrature points."""
        values = np.asarray(values, dtype=float)
        lam = (self.quad_x - self.nodes[:-1, None]) / self.h[:, None]
        return values[:-1, None] * (1.0 - lam) + values[1:, None] * lam

    def basis_at_quad(self):
        """(phi_left, phi_right) values at the quadrature points, shape (n, k)."""
        lam = (self.quad_x - self.nodes[:-1, None]) / self.h[:, None]
        return 1.0 - lam, lam


def make_grid(n: int, dim: int, grading: str = "uniform") -> RadialGrid:
    """Build a grid with n elements.

    grading "uniform" spaces nodes evenly; "boundary-refined" clusters nodes
    near r = 1 (node map r = 1 - (1-t)^2), for profiles with boundary layers;
    "origin-refined" clusters near r = 0 (node map r = t^2), for profiles
    whose curvature blows up at the center.
    """
    if not (isinstance(n, (int, np.integer)) and n >= 4):
        raise InvalidParameterError("need at least 4 elements")
    if grading not in GRADINGS:
        raise InvalidParameterError(f"unknown grading {grading!r}")
    t = np.linspace(0.0, 1.0, int(n) + 1)
    if grading == "uniform":
        nodes = t
    elif grading == "origin-refined":
        nodes = t ** 2
        nodes[0] = 0.0
        nodes[-1] = 1.0
    else:
        nodes = 1.0 - (1.0 - t) ** 2
        nodes[0] = 0.0
        nodes[-1] = 1.0
    return RadialGrid(nodes=nodes, dim=int(dim))


@dataclass(frozen=True, eq=False)
class RadialFunction:
    """Nodal values of a P1 radial profile on a RadialGrid."""

    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n_nodes,):
            raise InvalidParameterError(
                f"values shape {vals.shape} does not match grid "
                f"({self.grid.n_nodes} nodes)")
        if not np.all(np.isfinite(vals)):
            raise InvalidParameterError("profile values must be finite")
        object.__setattr__(self, "values", vals)

    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / self.grid.h

    def at_quad(self) -> np.ndarray:
        return self.grid.at_quad(self.values)

    def with_values(self, values: np.ndarray) -> "RadialFunction":
        return RadialFunction(self.grid, values)

    def __call__(self, r):
        return np.interp(r, self.grid.nodes, self.values)

    def on_grid(self, grid: RadialGrid) -> "RadialFunction":
        """Resample onto another grid by piecewise-linear interpolation."""
        if grid is self.grid:
            return self
        return RadialFunction(grid, self(grid.nodes))

    def linf(self) -> float:
        return float(np.max(np.abs(self.values)))


def constant_profile(grid: RadialGrid, value: float) -> RadialFunction:
    return RadialFunction(grid, np.full(grid.n_nodes, float(value)))


def integrate(g, grid: RadialGrid) -> float:
    """Approximate int_0^1 r^(N-1) g(r) dr with the grid quadrature.

    g may be a callable, nodal values (n+1,), or quadrature-point values
    shaped (n, k) / (n*k,).  Exact for polynomial g of degree <= 4.
    """
    if callable(g):
        vals = np.asarray(g(grid.quad_x), dtype=float)
        vals = np.broadcast_to(vals, grid.quad_x.shape)
    else:
        arr = np.asarray(g, dtype=float)
        if arr.shape == (grid.n_nodes,):
            vals = grid.at_quad(arr)
        elif arr.shape == grid.quad_x.shape:
            vals = arr
        elif arr.size == grid.quad_x.size:
            vals = arr.reshape(grid.quad_x.shape)
        else:
            raise InvalidParameterError(
                f"cannot interpret integrand of shape {arr.shape}")
    return float(np.sum(grid.quad_rw * vals))


def norm_w1p(u: RadialFunction, p: float) -> float:
    """Weighted W^(1,p) norm (int r^(N-1) (|u'|^p + |u|^p) dr)^(1/p)."""
    if p < 2:
        raise InvalidParameterError("norm requires p >= 2")
    s = np.abs(u.slopes())[:, None]
    v = np.abs(u.at_quad())
    total = float(np.sum(u.grid.quad_rw * (s ** p + v ** p)))
    return total ** (1.0 / p)


def dual_norm(vec: np.ndarray, grid: RadialGrid) -> float:
    """Weighted discrete norm of a nodal defect: sqrt(sum_i vec_i^2 / w_i)."""
    return float(np.sqrt(np.sum(np.asarray(vec) ** 2 / grid.lumped)))


def is_in_cone(u: RadialFunction, tol: ConeTolerance | None = None) -> bool:
    """True when u is nonnegative and nondecreasing within tolerance."""
    if tol is None:
        tol = ConeTolerance()
    v = u.values
    if v.min() < -tol.nonneg_tol:
        return False
    return bool(np.all(np.diff(v) >= -tol.monotone_tol))


def _pav_nondecreasing(y: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Weighted isotonic regression by pool-adjacent-violators.

    Returns the nondecreasing z minimizing sum w_i (z_i - y_i)^2.
    """
    n = y.size
    means = np.empty(n)
    weights = np.empty(n)
    counts = np.empty(n, dtype=np.intp)
    top = -1
    for i in range(n):
        top += 1
        means[top] = y[i]
        weights[top] = w[i]
        counts[top] = 1
        while top > 0 and means[top - 1] > means[top]:
            wsum = weights[top - 1] + weights[top]
            means[top - 1] = (weights[top - 1] * means[top - 1]
                              + weights[top] * means[top]) / wsum
            weights[top - 1] = wsum
            counts[top - 1] += counts[top]
            top -= 1
    return np.repeat(means[:top + 1], counts[:top + 1])


def project_cone(u: RadialFunction, lower: float | None = 0.0,
                 upper: float | None = None) -> RadialFunction:
    """Nearest profile (weighted L2, lumped node weights) that is
    nondecreasing and clamped to [lower, upper].

    Returns the input values unchanged when they already satisfy the
    constraints exactly.
    """
    v = u.values
    ok = np.all(np.diff(v) >= 0.0)
    if ok and lower is not None:
        ok = v[0] >= lower
    if ok and upper is not None:
        ok = v[-1] <= upper
    if ok:
        return u
    z = _pav_nondecreasing(v, u.grid.lumped)
    if lower is not None:
        z = np.maximum(z, lower)
    if upper is not None:
        z = np.minimum(z, upper)
    return u.with_values(z)


def random_cone_profile(grid: RadialGrid, lo: float, hi: float,
                        rng: np.random.Generator) -> RadialFunction:
    """Random nondecreasing profile with values in [lo, hi].

    Mixes several shapes (rough cumulative sums, sparse steps, smooth power
    ramps, near-constants) so property tests exercise more than one texture.
    """
    if hi <= lo:
        raise InvalidParameterError("need hi > lo for profile sampling")
    n = grid.n_nodes
    kind = rng.integers(0, 4)
    if kind == 0:
        inc = rng.exponential(1.0, n)
    elif kind == 1:
        inc = rng.exponential(1.0, n) * (rng.random(n) < 0.08)
        inc[0] = rng.exponential(1.0)
    elif kind == 2:
        k = rng.uniform(0.5, 6.0)
        ramp = grid.nodes ** k
        inc = np.diff(ramp, prepend=0.0) + 1e-12
    else:
        inc = np.full(n, 1e-12)
        inc[0] = 1.0
    c = np.cumsum(inc)
    c = (c - c[0]) / max(c[-1] - c[0], 1e-300)
    base = rng.uniform(0.0, 1.0)
    span = rng.uniform(0.0, 1.0 - base) if kind != 3 else 0.0
    vals = lo + (hi - lo) * (base * (1 - c) + (base + span) * c)
    # base at r=0, base+span at r=1, all inside [lo, hi]
    return RadialFunction(grid, vals)


def increasing_unit_shape(grid: RadialGrid, rng: np.random.Generator,
                          pin_start: bool = False) -> np.ndarray:
    """Random nondecreasing g with g(1) = 1 and values in [0, 1].

    With pin_start, also g(0) = 0 (used for spheres around an upper state).
    """
    inc = rng.exponential(1.0, grid.n_nodes)
    if rng.random() < 0.3:
        inc *= (rng.random(grid.n_nodes) < 0.15)
        inc[-1] += 1e-9
    c = np.cumsum(inc)
    if pin_start:
        c = c - c[0]
    g = c / max(c[-1], 1e-300)
    return np.clip(g, 0.0, 1.0)


def write_profile_csv(u: RadialFunction, path) -> None:
    """Two-column CSV (r, u), 17 significant digits, LF line endings."""
    with open(path, "w", newline="\n") as fh:
        fh.write("r,u\n")
        for r, v in zip(u.grid.nodes, u.values):
            fh.write(f"{r:.17g},{v:.17g}\n")


def read_profile_csv(path, dim: int) -> RadialFunction:
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    if data.ndim != 2 or data.shape[1] != 2:
        raise InvalidParameterError(f"{path}: expected two columns r,u")
    grid = RadialGrid(nodes=data[:, 0], dim=int(dim))
    return RadialFunction(grid, data[:, 1])
