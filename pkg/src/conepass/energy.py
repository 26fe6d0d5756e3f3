"""Energy functional and its diagnostics.

I(u) = int_0^1 r^(N-1) [ (|u'|^p + |u|^p)/p - F(u) ] dr

with F the antiderivative of the (possibly truncated) nonlinearity.  The
weak gradient is assembled against the P1 nodal basis with the same
quadrature as the energy, so discrete critical points, fixed points of the
inverse-operator map, and zeros of the gradient coincide exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, GeometryError, InvalidParameterError
from .nonlinearity import phi_p
from .radial import (RadialFunction, RadialGrid, constant_profile, dual_norm,
                     increasing_unit_shape, integrate, is_in_cone)


def energy(u: RadialFunction, tnl) -> float:
    """I(u) via the grid quadrature (slopes constant per element)."""
    p = tnl.p
    g = u.grid
    s = np.abs(u.slopes())[:, None]
    v = u.at_quad()
    integrand = (s ** p + np.abs(v) ** p) / p - tnl.F(v)
    return float(np.sum(g.quad_rw * integrand))


def weak_form(grid: RadialGrid, values: np.ndarray, p: float,
              source_quad: np.ndarray | None) -> np.ndarray:
    """Nodal vector G_i = int r^(N-1) [phi_p(u') phi_i' + (phi_p(u) - h) phi_i].

    source_quad holds h at the quadrature points (None means h = 0).  This
    single assembly underlies the energy gradient (h = f(u)) and the inner
    convex solves (h given), keeping the two consistent to roundoff.
    """
    slopes = np.diff(values) / grid.h
    flux = phi_p(slopes, p)                       # per element
    vq = grid.at_quad(values)
    react = phi_p(vq, p)
    if source_quad is not None:
        react = react - source_quad
    phiL, phiR = grid.basis_at_quad()
    wL = np.sum(grid.quad_rw * react * phiL, axis=1)
    wR = np.sum(grid.quad_rw * react * phiR, axis=1)
    gradL = -flux * grid.elem_measure / grid.h
    gradR = -gradL
    G = np.zeros(grid.n_nodes)
    G[:-1] += gradL + wL
    G[1:] += gradR + wR
    return G


def gradient(u: RadialFunction, tnl) -> np.ndarray:
    """Weak gradient of the energy at u (nodal defect vector)."""
    hq = tnl.f(u.at_quad())
    return weak_form(u.grid, u.values, tnl.p, hq)


def grad_norm(u: RadialFunction, tnl) -> float:
    return dual_norm(gradient(u, tnl), u.grid)


def fd_gradient_check(u: RadialFunction, tnl, direction: np.ndarray,
                      step: float = 1e-7) -> tuple[float, float, float]:
    """Central-difference directional derivative of the energy against the
    weak gradient pairing; returns (fd_value, exact_value, relative_error).

    step is a nodal perturbation, so it moves element slopes by step / h;
    keep it far below the narrowest element width, or the curvature kink of
    |u'|^p at zero slope contaminates the quotient on graded grids.
    """
    w = np.asarray(direction, dtype=float)
    scale = float(np.max(np.abs(w)))
    if scale == 0.0:
        raise InvalidParameterError("direction must be nonzero")
    w = w / scale
    e_plus = energy(u.with_values(u.values + step * w), tnl)
    e_minus = energy(u.with_values(u.values - step * w), tnl)
    fd = (e_plus - e_minus) / (2.0 * step)
    exact = float(np.dot(gradient(u, tnl), w))
    rel = abs(fd - exact) / max(abs(exact), 1e-12)
    return fd, exact, rel


def _half_element_integrals(u: RadialFunction, tnl):
    """int r^(N-1) (phi_p(u) - f(u)) dr over the left/right half of each
    element (4-point Gauss per half)."""
    g = u.grid
    p = tnl.p
    gx, gw = np.polynomial.legendre.leggauss(4)
    lefts = g.nodes[:-1]
    mids = 0.5 * (g.nodes[:-1] + g.nodes[1:])
    rights = g.nodes[1:]
    out = []
    for a, b in ((lefts, mids), (mids, rights)):
        half = 0.5 * (b - a)
        x = 0.5 * (a + b)[:, None] + half[:, None] * gx[None, :]
        w = half[:, None] * gw[None, :]
        uv = np.interp(x, g.nodes, u.values)
        vals = (phi_p(uv, p) - tnl.f(uv)) * x ** (g.dim - 1)
        out.append(np.sum(w * vals, axis=1))
    return out[0], out[1], mids


def residual_strong(u: RadialFunction, tnl) -> float:
    """Strong-form defect of -Delta_p u + phi_p(u) = f(u) with Neumann ends.

    Conserved form: the flux w = r^(N-1) phi_p(u') vanishes at both ends and
    satisfies w' = r^(N-1)(phi_p(u) - f(u)), so w is recovered exactly by
    integrating the right-hand side from the origin.  The defect compares the
    flux carried by the profile's slopes at element midpoints against that
    reconstruction, plus the Neumann defects at both ends in the same flux
    units (|w| at the first midpoint, |reconstructed w(1)|).

    Flux mismatch rather than a pointwise flux-derivative norm: solutions
    with p > 2 have u' ~ c (1-r)^(1/(p-1)) at the boundary, so any pointwise
    form of the defect is O(1) there no matter the mesh, while the integrated
    mismatch vanishes under refinement.
    """
    g = u.grid
    p = tnl.p
    slopes = u.slopes()
    L, R, mids = _half_element_integrals(u, tnl)
    w = mids ** (g.dim - 1) * phi_p(slopes, p)
    # reconstructed flux at midpoints: cumulative rhs integral from r = 0
    full = L + R
    w_rec = np.concatenate([[0.0], np.cumsum(full[:-1])]) + L
    defects = np.abs(w - w_rec)
    # both Neumann conditions live in the same mismatch: w_rec starts at 0,
    # so a spurious slope at the origin shows up in the first cells, and the
    # r = 1 condition is the total rhs integral returning to 0
    neumann_end = abs(np.sum(full))
    return float(max(np.max(defects), neumann_end))


def nehari_scale(u: RadialFunction, p: float, q: float) -> float:
    """t with t u on the Nehari set of the pure power q:
    t = (||u||_W1p^p / int r^(N-1) |u|^q dr)^(1/(q-p))."""
    if q <= p:
        raise InvalidParameterError("nehari scaling needs q > p")
    g = u.grid
    s = np.abs(u.slopes())[:, None]
    v = np.abs(u.at_quad())
    num = float(np.sum(g.quad_rw * (s ** p + v ** p)))
    den = float(np.sum(g.quad_rw * v ** q))
    if den <= 1e-300:
        raise DegenerateInputError("profile vanishes: no Nehari scaling")
    return (num / den) ** (1.0 / (q - p))


nehari_scale_pure_power = nehari_scale


@dataclass(frozen=True)
class EnergyReport:
    value: float
    grad_norm: float
    nehari: float
    residual_strong: float
    is_cone: bool

    def as_dict(self) -> dict:
        return {"value": self.value, "grad_norm": self.grad_norm,
                "nehari": self.nehari, "residual_strong": self.residual_strong,
                "is_cone": self.is_cone}


def energy_report(u: RadialFunction, tnl) -> EnergyReport:
    """Bundle of the standard diagnostics at u.

    `nehari` is the pure-power scaling when the base family is a pure power,
    else the directional derivative I'(u)[u] (zero at critical points).
    """
    if tnl.name.startswith("pure_power"):
        try:
            ne = nehari_scale(u, tnl.p, tnl.params["q"])
        except DegenerateInputError:
            ne = math.nan
    else:
        g = u.grid
        s = np.abs(u.slopes())[:, None]
        v = u.at_quad()
        ne = float(np.sum(g.quad_rw * (s ** tnl.p + np.abs(v) ** tnl.p
                                       - tnl.f(v) * v)))
    return EnergyReport(value=energy(u, tnl),
                        grad_norm=grad_norm(u, tnl),
                        nehari=ne,
                        residual_strong=residual_strong(u, tnl),
                        is_cone=is_in_cone(u))


@dataclass(frozen=True)
class GeometryReport:
    alpha_minus: float
    alpha_plus: float | None
    witness_t: float
    witness_energy: float
    samples: int
    tau: float


def geometry_probe(tnl, states, grid: RadialGrid, tau: float,
                   sample_count: int = 200, seed: int = 0) -> GeometryReport:
    """Empirical mountain-pass geometry around the trapping constants.

    Samples random cone profiles on the sup-sphere of radius tau around
    u_minus (and around u_plus when finite) and returns the worst energy gap
    alpha = min I(sample) - I(constant); also a witness level t with
    I(t * u_zero-scaled constant) below both trap levels by at least 1.
    A nonpositive alpha aborts (no certified barrier).
    """
    if not (0.0 < tau < min(states.gap_below(), states.gap_above())):
        raise InvalidParameterError(
            f"tau={tau} must lie in (0, min(u0-u-, u+-u0))")
    rng = np.random.default_rng(seed)
    e_minus = energy(constant_profile(grid, states.u_minus), tnl)

    worst = math.inf
    for _ in range(sample_count):
        gshape = increasing_unit_shape(grid, rng)
        u = RadialFunction(grid, states.u_minus + tau * gshape)
        worst = min(worst, energy(u, tnl) - e_minus)
    alpha_minus = worst
    if alpha_minus <= 0:
        raise GeometryError(
            f"no energy barrier above u_minus (alpha={alpha_minus:.3e})")

    alpha_plus = None
    e_plus = math.inf
    if math.isfinite(states.u_plus):
        e_plus = energy(constant_profile(grid, states.u_plus), tnl)
        worst = math.inf
        for _ in range(sample_count):
            gshape = increasing_unit_shape(grid, rng, pin_start=True)
            u = RadialFunction(grid, states.u_plus - tau + tau * gshape)
            worst = min(worst, energy(u, tnl) - e_plus)
        alpha_plus = worst
        if alpha_plus <= 0:
            raise GeometryError(
                f"no energy barrier below u_plus (alpha={alpha_plus:.3e})")

    target = min(e_minus, e_plus) - 1.0
    witness_t = math.nan
    witness_e = math.nan
    for t in states.u_zero * np.geomspace(1.01, 1e3, 600):
        e_t = energy(constant_profile(grid, t), tnl)
        if e_t < target:
            witness_t = float(t)
            witness_e = e_t
            break
    if not math.isfinite(witness_t):
        raise GeometryError("no constant level found below the trap levels")

    return GeometryReport(alpha_minus=alpha_minus, alpha_plus=alpha_plus,
                          witness_t=witness_t, witness_energy=witness_e,
                          samples=sample_count, tau=tau)
