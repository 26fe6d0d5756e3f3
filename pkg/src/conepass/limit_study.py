"""Large-exponent study of the pure-power family.

For f(u) = u^(q-1) the nonconstant solutions u_q approach, as q grows, the
profile G solving -Delta_p G + phi_p(G) = 0 with G'(0) = 0, G(1) = 1, and
the critical levels c_q approach c_inf = (1/p) ||G||_{W^{1,p}}^p.  This
module runs q-sweeps with either solver, collects per-q diagnostics
(sup-distance to G, levels, norms, the volume identity defect, a discrete
Hoelder quotient), computes c_inf by constrained minimization with a
shooting cross-check, and fits empirical decay rates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (GeometryError, InvalidParameterError,
                     NonconvergenceError, ShootingFailureError)
from .nonlinearity import (build_truncation, estimate_sup_cap,
                           find_constant_states, phi_p, pure_power)
from .radial import RadialFunction, integrate, make_grid, norm_w1p
from .energy import energy
from .mountain_pass import MinimaxOptions
from .driver import solve_problem
from .shooting import shoot_dirichlet_G, shoot_neumann, variational_G

METHODS = ("minimax", "shooting", "both")

# warm starts kick in here: the boundary layer sharpens and the previous
# solution is a better anchor than a cold scan or a cold path
WARM_START_Q = 40.0


@dataclass(frozen=True)
class SweepRow:
    q: float
    c_q: float
    u0_val: float              # u_q(0)
    u1_val: float              # u_q(1)
    sup_dist_G: float          # ||u_q - G||_inf
    norm_W1p: float
    identity_defect: float     # |int r^(N-1) (f(u) - phi_p(u)) dr|
    p: float = math.nan
    dim: int = 0
    method: str = ""
    a_param: float = math.nan          # shooting launch height
    cross_dist: float = math.nan       # L_inf between the two solvers
    holder_quotient: float = math.nan  # of u_q - G, exponent 1/2, subsampled
    boundary_slope_gap: float = math.nan   # |u_q'(1) - G'(1)| = G'(1)
    c1_bound: float = math.nan         # max|u_q| + max|u_q'| (boundedness)
    error: str | None = None
    profile: RadialFunction | None = field(default=None, repr=False,
                                           compare=False)

    def ok(self) -> bool:
        return self.error is None

    def as_dict(self) -> dict:
        return {"q": self.q, "c_q": self.c_q, "u0": self.u0_val,
                "u1": self.u1_val, "sup_dist_G": self.sup_dist_G,
                "norm_W1p": self.norm_W1p,
                "identity_defect": self.identity_defect,
                "cross_dist": self.cross_dist,
                "holder_quotient": self.holder_quotient,
                "error": self.error}


def _holder_quotient(diff: RadialFunction, mu: float = 0.5,
                     pairs: int = 512, seed: int = 0) -> float:
    """max |d(r_i) - d(r_j)| / |r_i - r_j|^mu over random node pairs."""
    r = diff.grid.nodes
    d = diff.values
    rng = np.random.default_rng(seed)
    n = r.size
    i = rng.integers(0, n, size=pairs)
    j = rng.integers(0, n, size=pairs)
    keep = i != j
    i, j = i[keep], j[keep]
    if i.size == 0:
        return 0.0
    return float(np.max(np.abs(d[i] - d[j]) / np.abs(r[i] - r[j]) ** mu))


def _row_metrics(q, prof, G, p, tnl) -> dict:
    grid = prof.grid
    uq = prof.at_quad()
    ident = abs(float(integrate(tnl.f(uq) - phi_p(uq, p), grid)))
    diff = prof.with_values(prof.values - G.profile.values)
    slopes = prof.slopes()
    return {
        "u0_val": float(prof.values[0]),
        "u1_val": float(prof.values[-1]),
        "sup_dist_G": float(np.max(np.abs(diff.values))),
        "norm_W1p": norm_w1p(prof, p),
        "identity_defect": ident,
        "holder_quotient": _holder_quotient(diff),
        "boundary_slope_gap": abs(G.boundary_slope),
        "c1_bound": float(np.max(np.abs(prof.values))
                          + np.max(np.abs(slopes))),
    }


def _solve_one_q(q, p, dim, method, metric_grid, G, minimax_n, rtol, opts,
                 warm_a=None, warm_mm=None):
    """One sweep entry; returns (row, best_a, best_mm) for warm starting."""
    base = pure_power(q, p)
    states = find_constant_states(base)
    cap = estimate_sup_cap(base, states)
    tnl = build_truncation(base, cap, dim)

    solver_failures = (ShootingFailureError, NonconvergenceError,
                       GeometryError)
    shot = None
    mm = None
    err_parts = []
    if method in ("shooting", "both"):
        try:
            interval = None
            if warm_a is not None:
                interval = (warm_a - 0.15, warm_a + 0.05)
            try:
                shot = shoot_neumann(tnl, states, metric_grid,
                                     rtol=rtol, scan_interval=interval)
            except solver_failures:
                if interval is None:
                    raise
                shot = shoot_neumann(tnl, states, metric_grid, rtol=rtol)
        except solver_failures as exc:
            err_parts.append(f"shooting: {exc}")
    if method in ("minimax", "both"):
        try:
            result = solve_problem(p, dim, base, opts=opts, grid_n=minimax_n,
                                   warm_start=warm_mm)
            mm = result.report.u_star
        except solver_failures as exc:
            err_parts.append(f"minimax: {exc}")

    source = shot.profile if shot is not None else (
        mm.on_grid(metric_grid) if mm is not None else None)
    if source is None:
        row = SweepRow(q=q, c_q=math.nan, u0_val=math.nan,
                       u1_val=math.nan, sup_dist_G=math.nan,
                       norm_W1p=math.nan, identity_defect=math.nan,
                       p=p, dim=dim, method=method,
                       error="; ".join(err_parts) or "no result")
        return row, None, None

    metrics = _row_metrics(q, source, G, p, tnl)
    if shot is not None:
        c_q = shot.energy
        metrics["identity_defect"] = shot.identity_defect
        metrics["norm_W1p"] = shot.norm_p ** (1.0 / p)
        a_param = shot.a
    else:
        c_q = energy(mm, tnl)
        a_param = math.nan
    cross = math.nan
    if shot is not None and mm is not None:
        cross = float(np.max(np.abs(mm.on_grid(metric_grid).values
                                    - shot.profile.values)))
    row = SweepRow(q=q, c_q=float(c_q), p=p, dim=dim,
                   method=method, a_param=a_param, cross_dist=cross,
                   error="; ".join(err_parts) or None,
                   profile=source, **metrics)
    return row, (shot.a if shot is not None else None), mm


def _solve_one_q_packed(args):
    return _solve_one_q(*args)[0]


def run_q_sweep(p: float, dim: int, q_list, method: str = "both",
                grid_n: int = 2048, minimax_n: int = 512,
                opts: MinimaxOptions | None = None,
                rtol: float = 1e-10, workers: int = 1) -> list[SweepRow]:
    """One SweepRow per exponent; failures are recorded, not raised.

    The metric grid (boundary refined, grid_n elements) carries the
    shooting profiles and all distances to G; minimax runs on its own
    coarser grid and is resampled for comparisons.  Above WARM_START_Q the
    shooting scan narrows around the previous launch height and the
    minimax solve continues from the previous profile.  workers > 1 opts
    into a process pool over the exponents, which disables warm starting;
    the rows come back in q order either way.
    """
    q_list = [float(q) for q in q_list]
    if any(q <= p for q in q_list):
        raise InvalidParameterError("every exponent must exceed p")
    if sorted(q_list) != q_list:
        raise InvalidParameterError("exponent list must be increasing")
    if method not in METHODS:
        raise InvalidParameterError(f"method must be one of {METHODS}")

    metric_grid = make_grid(grid_n, dim, grading="boundary-refined")
    G = shoot_dirichlet_G(p, dim, metric_grid)

    if workers > 1 and len(q_list) > 1:
        from concurrent.futures import ProcessPoolExecutor
        jobs = [(q, p, dim, method, metric_grid, G, minimax_n, rtol, opts)
                for q in q_list]
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            return list(pool.map(_solve_one_q_packed, jobs))

    rows: list[SweepRow] = []
    prev_a: float | None = None
    prev_mm: RadialFunction | None = None
    for q in q_list:
        warm = q >= WARM_START_Q
        row, a, mm = _solve_one_q(q, p, dim, method, metric_grid, G,
                                  minimax_n, rtol, opts,
                                  warm_a=prev_a if warm else None,
                                  warm_mm=prev_mm if warm else None)
        rows.append(row)
        if a is not None:
            prev_a = a
        if mm is not None:
            prev_mm = mm
    return rows


def compute_c_infinity(p: float, dim: int, grid_n: int = 4096,
                       cross_check_tol: float = 1e-6) -> float:
    """(1/p) ||G||^p_{W^{1,p}} by constrained minimization.

    The trace-constrained minimizer is computed on a uniform grid (the
    p > 2 profile has its curvature blow-up at the origin, where uniform
    spacing is adequate for the value even when it is marginal for L_inf)
    and the value is cross-checked against the shooting trajectory's own
    norm integral, which involves no spatial discretization at all.
    """
    grid = make_grid(grid_n, dim, grading="uniform")
    g_var = variational_G(p, dim, grid)
    c_var = norm_w1p(g_var, p) ** p / p
    lp = shoot_dirichlet_G(p, dim, grid)
    if abs(c_var - lp.c_limit) > cross_check_tol:
        raise NonconvergenceError(
            f"variational and shooting limit levels disagree: "
            f"{c_var:.12g} vs {lp.c_limit:.12g}")
    return float(c_var)


@dataclass(frozen=True)
class ConvergenceReport:
    q: tuple
    sup_dist_G: tuple
    c_gap: tuple               # |c_q - c_inf|
    norm_gap: tuple            # | ||u_q|| - ||G|| |
    c_inf: float
    g_norm: float
    rate_sup: float            # fitted d log(sup_dist) / d log(q)
    rate_c: float
    sup_monotone: bool
    c_monotone: bool
    final_over_initial_sup: float
    flags: tuple

    def as_dict(self) -> dict:
        return {"q": list(self.q), "sup_dist_G": list(self.sup_dist_G),
                "c_gap": list(self.c_gap), "norm_gap": list(self.norm_gap),
                "c_inf": self.c_inf, "g_norm": self.g_norm,
                "rate_sup": self.rate_sup, "rate_c": self.rate_c,
                "sup_monotone": self.sup_monotone,
                "c_monotone": self.c_monotone,
                "final_over_initial_sup": self.final_over_initial_sup,
                "flags": list(self.flags)}


def _fit_rate(q, y):
    q = np.asarray(q, dtype=float)
    y = np.asarray(y, dtype=float)
    good = (y > 0) & np.isfinite(y)
    if good.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(q[good]), np.log(y[good]), 1)[0])


def convergence_report(rows: list[SweepRow], c_inf: float) -> ConvergenceReport:
    """Trend diagnostics for a finished sweep; needs at least 3 clean rows."""
    rows = [r for r in rows if r.ok()]
    if len(rows) < 3:
        raise InvalidParameterError(
            "convergence report needs at least 3 successful rows")
    p = rows[0].p
    g_norm = (p * c_inf) ** (1.0 / p)
    q = tuple(r.q for r in rows)
    sup = tuple(r.sup_dist_G for r in rows)
    c_gap = tuple(abs(r.c_q - c_inf) for r in rows)
    norm_gap = tuple(abs(r.norm_W1p - g_norm) for r in rows)
    sup_mono = all(b < a for a, b in zip(sup, sup[1:]))
    c_mono = all(b < a for a, b in zip(c_gap, c_gap[1:]))
    flags = []
    if not sup_mono:
        flags.append("sup distance to G is not strictly decreasing")
    if not c_mono:
        flags.append("level gap is not strictly decreasing")
    return ConvergenceReport(
        q=q, sup_dist_G=sup, c_gap=c_gap, norm_gap=norm_gap, c_inf=c_inf,
        g_norm=g_norm, rate_sup=_fit_rate(q, sup), rate_c=_fit_rate(q, c_gap),
        sup_monotone=sup_mono, c_monotone=c_mono,
        final_over_initial_sup=(sup[-1] / sup[0] if sup[0] > 0 else math.nan),
        flags=tuple(flags))


SWEEP_CSV_HEADER = "q,c_q,u0,u1,sup_dist_G,norm_W1p,identity_defect"


def sweep_csv_lines(rows: list[SweepRow]) -> list[str]:
    lines = [SWEEP_CSV_HEADER]
    for r in rows:
        lines.append(",".join(f"{x:.17g}" for x in
                              (r.q, r.c_q, r.u0_val, r.u1_val,
                               r.sup_dist_G, r.norm_W1p,
                               r.identity_defect)))
    return lines


def write_sweep_csv(rows: list[SweepRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(sweep_csv_lines(rows)) + "\n")


def write_profile_dat(prof: RadialFunction, path) -> None:
    """Two-column r/value file, ready for plotting tools."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r, v in zip(prof.grid.nodes, prof.values):
            fh.write(f"{r:.17g} {v:.17g}\n")
