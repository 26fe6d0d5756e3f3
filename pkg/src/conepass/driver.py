"""Problem assembly and the retrying solve loop.

Glue between the ingredient modules: parse a nonlinearity description,
locate the constant states, build the capped nonlinearity, and run the
minimax solver.  The a priori sup bound is only an estimate, so the solve
retries with a doubled cap when the box saturates (path construction fails)
or the computed profile presses against the cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import GeometryError, InvalidParameterError, NonconvergenceError
from .nonlinearity import (Nonlinearity, TruncatedNonlinearity,
                           build_truncation, estimate_sup_cap,
                           find_constant_states, multiwell, pure_power)
from .mountain_pass import (MinimaxOptions, SolveReport, _newton_refine,
                            _polish_fixed_point, _box, _certificates,
                            minimax_solve)
from .energy import energy, energy_report, grad_norm
from .radial import RadialFunction, RadialGrid, make_grid, project_cone

MAX_CAP_DOUBLINGS = 8


def parse_nonlinearity(desc, p: float) -> Nonlinearity:
    """Build a nonlinearity from a descriptor string or mapping.

    String forms: "pure_power:<q>", "multiwell", "multiwell:<a>,<b>,<c>",
    "multiwell:<a>,<b>,<c>:<eps>", "zero", "custom_table:<csv path>".
    Mapping forms: {"family": "pure_power", "q": 5.0},
    {"family": "multiwell", "crossings": [a, b, c], "eps": 0.5},
    {"family": "custom_table", "csv": "path"}, {"family": "zero"}.
    """
    if isinstance(desc, dict):
        family = str(desc.get("family", "")).strip().lower()
        if family == "pure_power":
            if "q" not in desc:
                raise InvalidParameterError("pure_power needs an exponent q")
            return pure_power(float(desc["q"]), p)
        if family == "multiwell":
            kwargs = {}
            if "crossings" in desc:
                crossings = tuple(float(x) for x in desc["crossings"])
                if len(crossings) != 3:
                    raise InvalidParameterError("multiwell needs three crossings")
                kwargs["crossings"] = crossings
            if "eps" in desc:
                kwargs["eps"] = float(desc["eps"])
            return multiwell(p, **kwargs)
        if family == "custom_table":
            if "csv" not in desc:
                raise InvalidParameterError("custom_table needs a csv path")
            from .nonlinearity import from_table
            return from_table(desc["csv"], p)
        if family == "zero":
            from .nonlinearity import zero_nonlinearity
            return zero_nonlinearity(p)
        raise InvalidParameterError(f"unknown nonlinearity family {family!r}")
    parts = desc.split(":")
    kind = parts[0].strip().lower()
    if kind == "pure_power":
        if len(parts) != 2:
            raise InvalidParameterError("pure_power needs one exponent, "
                                        "e.g. pure_power:5")
        return pure_power(float(parts[1]), p)
    if kind == "multiwell":
        if len(parts) == 1:
            return multiwell(p)
        crossings = tuple(float(x) for x in parts[1].split(","))
        if len(crossings) != 3:
            raise InvalidParameterError("multiwell needs three crossings")
        eps = float(parts[2]) if len(parts) > 2 else 0.5
        return multiwell(p, crossings=crossings, eps=eps)
    if kind == "zero":
        from .nonlinearity import zero_nonlinearity
        return zero_nonlinearity(p)
    if kind == "custom_table":
        if len(parts) < 2:
            raise InvalidParameterError("custom_table needs a csv path")
        from .nonlinearity import from_table
        return from_table(":".join(parts[1:]), p)
    raise InvalidParameterError(f"unknown nonlinearity descriptor {desc!r}")


@dataclass(frozen=True)
class ProblemSetup:
    base: Nonlinearity
    tnl: TruncatedNonlinearity
    states: object
    grid: RadialGrid
    cap: float


def setup_problem(p: float, dim: int, f, grid_n: int = 512,
                  grading: str = "boundary-refined",
                  cap: float | None = None,
                  u0_hint: float | None = None) -> ProblemSetup:
    """Resolve the nonlinearity, constant states, cap, grid for one run."""
    if p < 2:
        raise InvalidParameterError("p must be at least 2")
    if dim < 1:
        raise InvalidParameterError("dimension must be at least 1")
    base = parse_nonlinearity(f, p) if isinstance(f, (str, dict)) else f
    if base.p != p:
        raise InvalidParameterError(
            f"nonlinearity exponent {base.p} does not match p={p}")
    states = find_constant_states(base, u0_hint=u0_hint)
    cap0 = float(cap) if cap is not None else estimate_sup_cap(base, states)
    tnl = build_truncation(base, cap0, dim)
    grid = make_grid(grid_n, dim, grading=grading)
    return ProblemSetup(base=base, tnl=tnl, states=states, grid=grid,
                        cap=cap0)


@dataclass(frozen=True)
class SolveResult:
    report: SolveReport
    setup: ProblemSetup
    cap_doublings: int


def _cap_pressed(report: SolveReport, tnl) -> bool:
    cap = getattr(tnl, "cap", math.inf)
    if not math.isfinite(cap):
        return False
    return float(np.max(report.u_star.values)) >= cap * (1.0 - 1e-9)


def _continue_from(guess: RadialFunction, setup: ProblemSetup,
                   opts: MinimaxOptions) -> SolveReport | None:
    """Refine a nearby previous solution under the current problem data.

    Newton on the weak form first, fixed-point polish as fallback; the
    result is accepted only when certified.  Returns None when the guess
    is not inside the new solution's basin.
    """
    tnl, states, grid = setup.tnl, setup.states, setup.grid
    lo, hi = _box(states, tnl)
    start = project_cone(guess.on_grid(grid), lower=lo, upper=hi)
    u, gn = _newton_refine(start, tnl, opts.grad_tol)
    if u is None:
        u, gn = _polish_fixed_point(start, tnl, lo, hi, opts.grad_tol,
                                    opts.inner)
        if gn >= opts.grad_tol:
            return None
    u = project_cone(u, lower=lo, upper=hi)
    gn = grad_norm(u, tnl)
    if gn >= opts.grad_tol:
        return None
    c = energy(u, tnl)
    certs = _certificates(u, tnl, states, c, grid)
    if not all(certs.values()):
        return None
    return SolveReport(u_star=u, c=c, energy_report=energy_report(u, tnl),
                       iterations=0, converged=True, certificates=certs,
                       trace=((0, c, gn),), geometry=None)


def solve_problem(p: float | None = None, dim: int | None = None,
                  f=None, *, setup: ProblemSetup | None = None,
                  opts: MinimaxOptions | None = None,
                  grid_n: int = 512, grading: str = "boundary-refined",
                  warm_start: RadialFunction | None = None) -> SolveResult:
    """Full solve with automatic cap escalation.

    Either pass (p, dim, f) or a prebuilt setup.  The cap doubles and the
    truncation is rebuilt when the path cannot leave the box or the solution
    presses against the cap, at most MAX_CAP_DOUBLINGS times.
    """
    if setup is None:
        if p is None or dim is None or f is None:
            raise InvalidParameterError("need p, dim, f or a setup")
        setup = setup_problem(p, dim, f, grid_n=grid_n, grading=grading)
    opts = opts or MinimaxOptions()

    doublings = 0
    last_error: Exception | None = None
    while True:
        if warm_start is not None:
            report = _continue_from(warm_start, setup, opts)
            if report is not None:
                return SolveResult(report=report, setup=setup,
                                   cap_doublings=doublings)
        try:
            report = minimax_solve(setup.tnl, setup.states, opts, setup.grid)
            if not _cap_pressed(report, setup.tnl):
                return SolveResult(report=report, setup=setup,
                                   cap_doublings=doublings)
            last_error = None
        except GeometryError as exc:
            last_error = exc
        if doublings >= MAX_CAP_DOUBLINGS:
            if last_error is not None:
                raise NonconvergenceError(
                    f"cap escalation exhausted after {doublings} doublings: "
                    f"{last_error}")
            raise NonconvergenceError(
                "solution presses against the cap even after "
                f"{doublings} doublings")
        doublings += 1
        new_cap = 2.0 * setup.cap
        setup = replace(setup,
                        cap=new_cap,
                        tnl=build_truncation(setup.base, new_cap,
                                             setup.grid.dim))
