"""Radial shooting oracle for the Neumann problem and the limit profile.

Independent cross-check for the variational solver.  The radial equation

    -(r^(N-1) phi_p(u'))' + r^(N-1) phi_p(u) = r^(N-1) f(u),  u'(0) = u'(1) = 0

is integrated as a first order system in (u, w) with w = r^(N-1) phi_p(u')
the radial flux:

    u' = sign(w) |w / r^(N-1)|^(1/(p-1))
    w' = r^(N-1) (phi_p(u) - f(u))

Starting from u(0) = a the flux has the exact small-r expansion
w = -g(a) r^N / N + O(r^(2N)) with g(s) = f(s) - phi_p(s), so integration
begins at a tiny radius delta with series values there.  The augmented
components carry the W^{1,p} density and int F(u) along the trajectory so
energies come out at integrator accuracy rather than interpolation accuracy.

A Neumann solution corresponds to a root of miss(a) = w(1; a).  Roots are
bracketed by a scan over the interval between the trapping constants and
refined by bisection.

The limit profile G (zero right-hand side, G(1) = 1, G'(0) = 0) is obtained
from a single shot: the equation is (p-1)-homogeneous, so G = u(.; 1)/u(1; 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ShootingFailureError
from .nonlinearity import zero_nonlinearity
from .radial import RadialFunction, RadialGrid

START_RADIUS = 1e-6


def _series_value(a: float, g_a: float, p: float, dim: int, r) -> np.ndarray:
    """u(r) near the origin: a - sign(g_a) ((p-1)/p) (|g_a|/N)^(1/(p-1)) r^(p/(p-1))."""
    coef = math.copysign((abs(g_a) / dim) ** (1.0 / (p - 1.0)), g_a)
    return a - coef * (p - 1.0) / p * np.asarray(r) ** (p / (p - 1.0))


def startup_state(a: float, tnl, dim: int,
                  delta: float = START_RADIUS) -> tuple[float, float, float, float]:
    """(u, w, z_norm, z_F) at r = delta from the expansion around the origin.

    The integral seeds are the constant-profile values over [0, delta]; the
    dropped corrections are O(delta^(N + p/(p-1))).
    """
    p = tnl.p
    g_a = float(tnl.f(a)) - math.copysign(abs(a) ** (p - 1.0), a)
    u_d = float(_series_value(a, g_a, p, dim, delta))
    w_d = -g_a * delta ** dim / dim
    cell = delta ** dim / dim
    return u_d, w_d, abs(a) ** p * cell, float(tnl.F(a)) * cell


@dataclass(frozen=True)
class ShotResult:
    a: float
    reached_end: bool
    r_stop: float
    u_end: float
    w_end: float          # flux at r_stop; the miss when r_stop = 1
    slope_end: float
    energy: float         # trajectory value of the free energy
    norm_p: float         # int r^(N-1) (|u'|^p + |u|^p)
    sol: object = None    # dense interpolant over [delta, r_stop], if requested


def shoot(a: float, tnl, dim: int, rtol: float = 1e-10,
          u_blow: float | None = None, dense: bool = False,
          r_stop: float = 1.0) -> ShotResult:
    """Integrate one trajectory from u(0) = a out to r = r_stop.

    Terminates early (reached_end False) if |u| exceeds u_blow.  State is
    [u, w, z_norm, z_F]; energies are z_norm/p - z_F at the end.
    """
    if not (START_RADIUS < r_stop <= 1.0):
        raise ShootingFailureError(f"r_stop must lie in (delta, 1], got {r_stop}")
    p = tnl.p
    f = tnl.f
    F = tnl.F
    nm1 = dim - 1
    pinv = 1.0 / (p - 1.0)

    def rhs(r, y):
        u, w = y[0], y[1]
        rn = r ** nm1
        s = w / rn
        du = math.copysign(abs(s) ** pinv, s)
        up = math.copysign(abs(u) ** (p - 1.0), u)
        dw = rn * (up - float(f(u)))
        dzn = rn * (abs(du) ** p + abs(u) ** p)
        dzf = rn * float(F(u))
        return (du, dw, dzn, dzf)

    if u_blow is None:
        cap = getattr(tnl, "cap", math.inf)
        u_blow = 10.0 * max(1.0, abs(a), cap if math.isfinite(cap) else 1.0)

    def hit_ceiling(r, y):
        return u_blow - abs(y[0])
    hit_ceiling.terminal = True
    hit_ceiling.direction = -1

    y0 = list(startup_state(a, tnl, dim))
    scale = max(1.0, abs(a), 1.0 if not math.isfinite(getattr(tnl, "cap", math.inf))
                else getattr(tnl, "cap"))
    atol = [1e-14 * scale, 1e-14 * scale ** (p - 1.0),
            1e-14 * scale ** p, 1e-14 * scale ** p]
    res = solve_ivp(rhs, (START_RADIUS, r_stop), y0, method="DOP853",
                    rtol=rtol, atol=atol, events=hit_ceiling,
                    dense_output=dense)
    if not res.success and res.status != 1:
        raise ShootingFailureError(f"integrator failed at a={a}: {res.message}")
    reached = res.status == 0
    r_stop = float(res.t[-1])
    u_end, w_end, zn, zf = (float(v) for v in res.y[:, -1])
    rn_end = r_stop ** nm1
    s_end = w_end / rn_end if rn_end > 0 else 0.0
    slope_end = math.copysign(abs(s_end) ** pinv, s_end)
    return ShotResult(a=a, reached_end=reached, r_stop=r_stop, u_end=u_end,
                      w_end=w_end, slope_end=slope_end,
                      energy=zn / p - zf, norm_p=zn,
                      sol=res.sol if dense else None)


def shot_profile(shot: ShotResult, tnl, grid: RadialGrid) -> RadialFunction:
    """Sample a dense trajectory onto the nodes of a grid."""
    if shot.sol is None:
        raise ShootingFailureError("shot was integrated without dense output")
    p = tnl.p
    a = shot.a
    g_a = float(tnl.f(a)) - math.copysign(abs(a) ** (p - 1.0), a)
    r = grid.nodes
    vals = np.empty_like(r)
    inner = r < START_RADIUS
    vals[inner] = _series_value(a, g_a, p, grid.dim, r[inner])
    vals[~inner] = shot.sol(r[~inner])[0]
    return RadialFunction(grid, vals)


@dataclass(frozen=True)
class ShootingCandidate:
    a: float
    miss: float
    energy: float
    u_start: float
    u_end: float


@dataclass(frozen=True)
class ShootingSolution:
    profile: RadialFunction
    a: float
    miss: float
    energy: float
    norm_p: float
    identity_defect: float     # |w(1)|, the Neumann defect in flux units
    candidates: tuple[ShootingCandidate, ...]
    bisection_iters: int = 0

    @property
    def parameter(self) -> float:
        return self.a

    def as_dict(self) -> dict:
        return {"a": self.a, "miss": self.miss, "energy": self.energy,
                "norm_p": self.norm_p, "identity_defect": self.identity_defect,
                "bisection_iters": self.bisection_iters,
                "n_candidates": len(self.candidates)}


def _bisect_root(f_lo, f_hi, a_lo, a_hi, evaluate, miss_tol, max_iter):
    """Bisection on sign(miss); returns (a, miss, iters) at the best point."""
    best = (a_lo, f_lo) if abs(f_lo) < abs(f_hi) else (a_hi, f_hi)
    for it in range(max_iter):
        mid = 0.5 * (a_lo + a_hi)
        if mid == a_lo or mid == a_hi:
            return best + (it,)
        fm = evaluate(mid)
        if abs(fm) < abs(best[1]):
            best = (mid, fm)
        if abs(fm) < miss_tol:
            return best + (it + 1,)
        if (fm > 0) == (f_lo > 0):
            a_lo, f_lo = mid, fm
        else:
            a_hi, f_hi = mid, fm
    return best + (max_iter,)


def shoot_neumann(tnl, states, grid: RadialGrid, scan_points: int = 64,
                  miss_tol: float = 1e-10, rtol: float = 1e-10,
                  max_bisect: int = 80,
                  scan_interval: tuple[float, float] | None = None
                  ) -> ShootingSolution:
    """Locate nonconstant nondecreasing Neumann solutions by shooting.

    Scans launch heights a strictly between u_minus and u_zero, brackets
    sign changes of miss(a) = w(1; a), bisects each bracket, filters the
    roots (nondecreasing, ends above u_zero, nonconstant), and returns the
    lowest-energy survivor.  All roots found are reported as candidates.
    scan_interval restricts the scan (warm starts in parameter sweeps).
    """
    u_lo = states.u_minus
    u_hi = states.u_zero
    span = u_hi - u_lo
    if not (span > 0 and math.isfinite(span)):
        raise ShootingFailureError("degenerate scan interval between constants")
    cap = getattr(tnl, "cap", math.inf)
    u_blow = 10.0 * max(1.0, u_hi, cap if math.isfinite(cap) else 1.0)

    rtol_scan = max(rtol, 1e-8)
    cache: dict[tuple[float, float], ShotResult] = {}

    def run(a, tol):
        key = (a, tol)
        if key not in cache:
            cache[key] = shoot(a, tnl, grid.dim, rtol=tol, u_blow=u_blow)
        return cache[key]

    def miss_at(a, tol=rtol):
        # terminal flux doubles as a sign surrogate for blown-up shots
        return run(a, tol).w_end

    lo_default = u_lo + 1e-6 * span
    hi_default = u_hi - 1e-6 * span
    if scan_interval is None:
        scan_lo, scan_hi = lo_default, hi_default
    else:
        scan_lo = max(lo_default, float(scan_interval[0]))
        scan_hi = min(hi_default, float(scan_interval[1]))
        if not scan_lo < scan_hi:
            raise ShootingFailureError("empty scan interval requested")
    grid_a = np.linspace(scan_lo, scan_hi, scan_points)
    misses = [miss_at(a, rtol_scan) for a in grid_a]

    roots: list[tuple[float, float, int]] = []
    for i in range(scan_points - 1):
        m0, m1 = misses[i], misses[i + 1]
        if m0 == 0.0:
            roots.append((float(grid_a[i]), 0.0, 0))
            continue
        if (m0 > 0) != (m1 > 0):
            a0, a1 = float(grid_a[i]), float(grid_a[i + 1])
            f0, f1 = miss_at(a0), miss_at(a1)
            if (f0 > 0) == (f1 > 0):
                continue
            roots.append(_bisect_root(f0, f1, a0, a1,
                                      lambda a: miss_at(a), miss_tol,
                                      max_bisect))
    # merge rediscoveries of the same root from adjacent brackets
    roots.sort()
    merged: list[tuple[float, float, int]] = []
    for a_star, miss, iters in roots:
        if merged and abs(a_star - merged[-1][0]) < 1e-9 * span:
            if abs(miss) < abs(merged[-1][1]):
                merged[-1] = (a_star, miss, iters)
            continue
        merged.append((a_star, miss, iters))
    roots = merged
    if not roots:
        raise ShootingFailureError(
            "no sign change of the Neumann miss over the scan interval")

    mono_tol = 1e-8 * max(1.0, u_hi)
    nonconst_tol = 1e-6 * max(1.0, u_hi)
    candidates = []
    survivors = []
    for a_star, miss, iters in roots:
        shot = shoot(a_star, tnl, grid.dim, rtol=rtol, u_blow=u_blow,
                     dense=True)
        if not shot.reached_end:
            continue
        prof = shot_profile(shot, tnl, grid)
        cand = ShootingCandidate(a=a_star, miss=shot.w_end, energy=shot.energy,
                                 u_start=float(prof.values[0]),
                                 u_end=float(prof.values[-1]))
        candidates.append(cand)
        diffs = np.diff(prof.values)
        monotone = diffs.min() >= -mono_tol if diffs.size else True
        crosses = cand.u_end > u_hi - mono_tol
        nonconstant = cand.u_end - cand.u_start > nonconst_tol
        if monotone and crosses and nonconstant:
            survivors.append((cand, prof, shot, iters))
    if not survivors:
        raise ShootingFailureError(
            f"{len(candidates)} roots found but none is a nondecreasing "
            "nonconstant profile crossing the unstable constant")

    cand, prof, shot, iters = min(survivors, key=lambda t: t[0].energy)
    return ShootingSolution(profile=prof, a=cand.a, miss=cand.miss,
                            energy=shot.energy, norm_p=shot.norm_p,
                            identity_defect=abs(cand.miss),
                            candidates=tuple(candidates),
                            bisection_iters=iters)


@dataclass(frozen=True)
class LimitProfile:
    profile: RadialFunction
    value0: float          # G(0)
    c_limit: float         # (1/p) ||G||_{W^{1,p}}^p
    flux_end: float        # r^(N-1) phi_p(G') at r = 1
    boundary_slope: float  # G'(1)
    miss: float            # |G(1) - 1| on the verification shot
    bisection_iters: int = 0

    @property
    def parameter(self) -> float:
        return self.value0

    def as_dict(self) -> dict:
        return {"value0": self.value0, "c_limit": self.c_limit,
                "flux_end": self.flux_end,
                "boundary_slope": self.boundary_slope, "miss": self.miss,
                "bisection_iters": self.bisection_iters}


def shoot_limit_profile(p: float, dim: int, grid: RadialGrid,
                        rtol: float = 1e-11) -> LimitProfile:
    """Limit profile G: -Delta_p G + phi_p(G) = 0, G'(0) = 0, G(1) = 1.

    One pilot shot from height 1 fixes the scale by homogeneity, then a
    verification shot from the rescaled height supplies the profile and the
    trajectory integrals directly.
    """
    tnl = zero_nonlinearity(p)
    pilot = shoot(1.0, tnl, dim, rtol=rtol, u_blow=1e6)
    if not pilot.reached_end or pilot.u_end <= 0:
        raise ShootingFailureError("pilot shot for the limit profile failed")
    a_star = 1.0 / pilot.u_end
    final = shoot(a_star, tnl, dim, rtol=rtol, u_blow=1e6, dense=True)
    if not final.reached_end:
        raise ShootingFailureError("rescaled limit-profile shot failed")
    prof = shot_profile(final, tnl, grid)
    return LimitProfile(profile=prof, value0=a_star,
                        c_limit=final.norm_p / p,
                        flux_end=final.w_end,
                        boundary_slope=final.slope_end,
                        miss=abs(final.u_end - 1.0))


# the limit profile solves the Dirichlet problem G(1) = 1 with zero source
shoot_dirichlet_G = shoot_limit_profile


def integrate_ivp(a: float, tnl, p: float | None = None, dim: int = 1,
                  r_stop: float = 1.0, rtol: float = 1e-10,
                  dense: bool = False) -> ShotResult:
    """One radial trajectory from u(0) = a to r_stop; see shoot.

    p, when given, must agree with the nonlinearity's exponent (it rides
    along in tnl; the explicit argument is a guard for callers that track
    it separately).
    """
    if p is not None and p != tnl.p:
        raise ShootingFailureError(
            f"exponent mismatch: p={p} but the nonlinearity carries {tnl.p}")
    return shoot(a, tnl, dim, rtol=rtol, dense=dense, r_stop=r_stop)


def variational_G(p: float, dim: int, grid: RadialGrid,
                  opts=None) -> RadialFunction:
    """Limit profile by direct minimization instead of shooting.

    Minimizes (1/p) int r^(N-1) (|v'|^p + v^p) dr over profiles with
    v(1) = 1 (last node eliminated), using the same damped Newton as the
    inverse operator.  Cross-validates shoot_dirichlet_G.
    """
    from .operator import inner_solve
    from .radial import constant_profile
    if grid.dim != dim:
        raise ShootingFailureError(
            f"grid dimension {grid.dim} does not match N={dim}")
    return inner_solve(None, p, grid, opts=opts,
                       v0=constant_profile(grid, 1.0), dirichlet_end=1.0)
