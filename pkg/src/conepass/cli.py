"""Command-line entry point: solve, shoot, sweep, validate.

Configuration comes from an optional JSON file (--config) with flat flag
overrides; every setting has a default, so `conepass solve --p 3 --N 2
--f pure_power:5` is a complete invocation.  Config layout:

    {
      "problem": {"p": 3.0, "N": 2,
                  "nonlinearity": {"family": "pure_power", "q": 5.0}},
      "grid": {"n": 512, "grading": "boundary-refined"},
      "solver": {"m": 32, "grad_tol": 1e-8},
      "sweep": {"q_list": [5, 10, 20, 40, 80], "method": "both"},
      "output_dir": "out",
      "seed": 0,
      "workers": 1
    }

Exit codes: 0 success, 1 solver failure (error.json written), 2
configuration error.  All outputs are deterministic for a fixed config and
seed: UTF-8, LF line endings, 17-significant-digit floats in CSV/dat files.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .driver import parse_nonlinearity, setup_problem, solve_problem
from .energy import fd_gradient_check, grad_norm, residual_strong
from .errors import ConepassError, InvalidParameterError
from .limit_study import (METHODS, compute_c_infinity, convergence_report,
                          run_q_sweep, write_profile_dat, write_sweep_csv)
from .mountain_pass import MinimaxOptions
from .nonlinearity import build_truncation, check_hypotheses
from .operator import apply_T, verify_cone_preservation
from .radial import (GRADINGS, RadialFunction, constant_profile, make_grid,
                     random_cone_profile, write_profile_csv)
from .shooting import shoot_dirichlet_G, shoot_neumann

EXIT_OK = 0
EXIT_SOLVER = 1
EXIT_CONFIG = 2

_SOLVER_KEYS = tuple(f.name for f in fields(MinimaxOptions)
                     if f.name != "inner")


@dataclass
class RunConfig:
    p: float = 3.0
    dim: int = 2
    f_desc: object = "pure_power:5"
    f_given: bool = False
    u0_hint: float | None = None
    grid_n: int = 512
    grading: str = "boundary-refined"
    solver: dict | None = None
    q_list: tuple = (5.0, 10.0, 20.0, 40.0, 80.0)
    method: str = "both"
    out_dir: str = "out"
    seed: int = 0
    workers: int = 1
    dirichlet_G: bool = False
    inject_fault: bool = False

    def minimax_options(self) -> MinimaxOptions:
        kwargs = dict(self.solver or {})
        kwargs["seed"] = self.seed
        return MinimaxOptions(**kwargs)

    def out_path(self) -> Path:
        path = Path(self.out_dir)
        path.mkdir(parents=True, exist_ok=True)
        return path


def _parse_q_list(text: str) -> tuple:
    try:
        return tuple(float(tok) for tok in text.split(",") if tok.strip())
    except ValueError as exc:
        raise InvalidParameterError(f"bad q list {text!r}: {exc}")


def load_config(args) -> RunConfig:
    cfg = RunConfig()
    data = {}
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise InvalidParameterError("config root must be a JSON object")

    problem = data.get("problem", {})
    cfg.p = float(problem.get("p", cfg.p))
    cfg.dim = int(problem.get("N", cfg.dim))
    if "nonlinearity" in problem:
        cfg.f_desc = problem["nonlinearity"]
        cfg.f_given = True
    if problem.get("u0_hint") is not None:
        cfg.u0_hint = float(problem["u0_hint"])
    grid = data.get("grid", {})
    cfg.grid_n = int(grid.get("n", cfg.grid_n))
    cfg.grading = str(grid.get("grading", cfg.grading))
    solver = data.get("solver", {})
    if solver:
        unknown = set(solver) - set(_SOLVER_KEYS)
        if unknown:
            raise InvalidParameterError(
                f"unknown solver option(s): {sorted(unknown)}")
        cfg.solver = dict(solver)
    sweep = data.get("sweep", {})
    if "q_list" in sweep:
        cfg.q_list = tuple(float(q) for q in sweep["q_list"])
    cfg.method = str(sweep.get("method", cfg.method))
    cfg.out_dir = str(data.get("output_dir", cfg.out_dir))
    cfg.seed = int(data.get("seed", cfg.seed))
    cfg.workers = int(data.get("workers", cfg.workers))

    # flat flag overrides
    if args.p is not None:
        cfg.p = args.p
    if args.N is not None:
        cfg.dim = args.N
    if args.f is not None:
        cfg.f_desc = args.f
        cfg.f_given = True
    if args.grid_n is not None:
        cfg.grid_n = args.grid_n
    if args.grading is not None:
        cfg.grading = args.grading
    if args.tau is not None:
        cfg.solver = dict(cfg.solver or {})
        cfg.solver["tau"] = args.tau
    if args.path_nodes is not None:
        cfg.solver = dict(cfg.solver or {})
        cfg.solver["m"] = args.path_nodes
    if args.q_list is not None:
        cfg.q_list = _parse_q_list(args.q_list)
    if args.method is not None:
        cfg.method = args.method
    if args.out is not None:
        cfg.out_dir = args.out
    if args.seed is not None:
        cfg.seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    cfg.dirichlet_G = bool(getattr(args, "dirichlet_G", False))
    cfg.inject_fault = bool(getattr(args, "inject_fault", False))
    return cfg


def validate_config(cfg: RunConfig, command: str) -> RunConfig:
    if cfg.p < 2:
        raise InvalidParameterError("p must be at least 2")
    if cfg.p == 2:
        print("note: p = 2 is a validation mode outside the p > 2 regime",
              file=sys.stderr)
    if cfg.dim < 1:
        raise InvalidParameterError("N must be at least 1")
    if cfg.grid_n < 16:
        raise InvalidParameterError("grid needs at least 16 elements")
    if cfg.grading not in GRADINGS:
        raise InvalidParameterError(f"grading must be one of {GRADINGS}")
    if cfg.method not in METHODS:
        raise InvalidParameterError(f"method must be one of {METHODS}")
    if cfg.workers < 1:
        raise InvalidParameterError("workers must be positive")
    if cfg.solver:
        cfg.minimax_options()     # surfaces bad option values now

    if command == "sweep":
        if not cfg.q_list:
            raise InvalidParameterError("sweep needs a nonempty q list")
        if any(q <= cfg.p for q in cfg.q_list):
            raise InvalidParameterError("every sweep exponent must exceed p")
        if list(cfg.q_list) != sorted(cfg.q_list):
            raise InvalidParameterError("q list must be increasing")
    if command == "shoot" and not cfg.dirichlet_G and not cfg.f_given:
        raise InvalidParameterError(
            "shoot needs --f (or config nonlinearity) unless --dirichlet-G")
    if command in ("solve", "shoot", "validate") and not cfg.dirichlet_G:
        nl = parse_nonlinearity(cfg.f_desc, cfg.p)
        if nl.name == "pure_power" and nl.params["q"] <= cfg.p:
            raise InvalidParameterError("pure power exponent must exceed p")
    return cfg


# ---------------------------------------------------------------------------
# deterministic output helpers


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_json(path, obj) -> None:
    text = json.dumps(_jsonable(obj), indent=2, sort_keys=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text + "\n")


def _problem_dict(cfg: RunConfig) -> dict:
    return {"p": cfg.p, "N": cfg.dim, "nonlinearity": cfg.f_desc,
            "grid_n": cfg.grid_n, "grading": cfg.grading, "seed": cfg.seed}


def _write_error(cfg: RunConfig, exc: Exception) -> None:
    try:
        write_json(cfg.out_path() / "error.json",
                   {"error": {"type": type(exc).__name__,
                              "message": str(exc)}})
    except OSError:
        pass


# ---------------------------------------------------------------------------
# commands


def cmd_solve(cfg: RunConfig) -> int:
    setup = setup_problem(cfg.p, cfg.dim, cfg.f_desc, grid_n=cfg.grid_n,
                          grading=cfg.grading, u0_hint=cfg.u0_hint)
    result = solve_problem(setup=setup, opts=cfg.minimax_options())
    rep = result.report
    out = cfg.out_path()
    write_profile_csv(rep.u_star, out / "profile.csv")
    write_json(out / "solve_report.json", {
        "problem": _problem_dict(cfg),
        "cap": result.setup.cap,
        "cap_doublings": result.cap_doublings,
        "report": rep.as_dict(),
        "u0": float(rep.u_star.values[0]),
        "u1": float(rep.u_star.values[-1]),
    })
    print(f"level c = {rep.c:.12g} after {rep.iterations} sweeps")
    print(f"u(0) = {rep.u_star.values[0]:.9g}, "
          f"u(1) = {rep.u_star.values[-1]:.9g}")
    for name, val in rep.certificates.items():
        print(f"  certificate {name}: {'ok' if val else 'FAILED'}")
    print(f"wrote {out / 'solve_report.json'} and {out / 'profile.csv'}")
    return EXIT_OK if rep.accepted() else EXIT_SOLVER


def cmd_shoot(cfg: RunConfig) -> int:
    out = cfg.out_path()
    grid = make_grid(cfg.grid_n, cfg.dim, grading=cfg.grading)
    if cfg.dirichlet_G:
        lp = shoot_dirichlet_G(cfg.p, cfg.dim, grid)
        write_profile_csv(lp.profile, out / "profile.csv")
        write_json(out / "shoot_report.json", {
            "problem": {"p": cfg.p, "N": cfg.dim, "mode": "dirichlet_G",
                        "grid_n": cfg.grid_n, "grading": cfg.grading},
            "report": lp.as_dict(),
        })
        print(f"G(0) = {lp.value0:.9g}")
        print(f"c_infinity = {lp.c_limit:.12g}")
        print(f"G'(1) = {lp.boundary_slope:.9g}")
        return EXIT_OK
    setup = setup_problem(cfg.p, cfg.dim, cfg.f_desc, grid_n=cfg.grid_n,
                          grading=cfg.grading, u0_hint=cfg.u0_hint)
    sol = shoot_neumann(setup.tnl, setup.states, grid)
    write_profile_csv(sol.profile, out / "profile.csv")
    write_json(out / "shoot_report.json", {
        "problem": _problem_dict(cfg),
        "report": sol.as_dict(),
        "u0": float(sol.profile.values[0]),
        "u1": float(sol.profile.values[-1]),
    })
    print(f"launch height a = {sol.a:.12g} (miss {sol.miss:.3g}, "
          f"{sol.bisection_iters} bisections)")
    print(f"level = {sol.energy:.12g}, identity defect = "
          f"{sol.identity_defect:.3g}")
    print(f"u(0) = {sol.profile.values[0]:.9g}, "
          f"u(1) = {sol.profile.values[-1]:.9g}")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig) -> int:
    out = cfg.out_path()
    rows = run_q_sweep(cfg.p, cfg.dim, list(cfg.q_list), method=cfg.method,
                       minimax_n=cfg.grid_n, opts=cfg.minimax_options(),
                       workers=cfg.workers)
    write_sweep_csv(rows, out / "sweep.csv")
    for row in rows:
        if row.profile is not None:
            write_profile_dat(row.profile, out / f"profile_q{row.q:g}.dat")

    c_inf = compute_c_infinity(cfg.p, cfg.dim)
    g_grid = make_grid(2048, cfg.dim, grading="boundary-refined")
    G = shoot_dirichlet_G(cfg.p, cfg.dim, g_grid)
    write_profile_dat(G.profile, out / "limit_profile.dat")

    clean = [r for r in rows if r.ok()]
    summary = {
        "problem": {"p": cfg.p, "N": cfg.dim, "method": cfg.method,
                    "q_list": list(cfg.q_list), "seed": cfg.seed,
                    "workers": cfg.workers},
        "c_infinity": c_inf,
        "G0": G.value0,
        "G_boundary_slope": G.boundary_slope,
        "rows": [r.as_dict() for r in rows],
    }
    if len(clean) >= 3:
        summary["convergence"] = convergence_report(rows, c_inf).as_dict()
    else:
        summary["convergence"] = None
        summary["note"] = "rate fitting needs at least 3 successful rows"
    write_json(out / "sweep_summary.json", summary)

    print(f"c_infinity = {c_inf:.12g}")
    print(f"{'q':>8} {'c_q':>18} {'sup|u_q - G|':>14} {'status':>8}")
    for r in rows:
        status = "ok" if r.ok() else "FAILED"
        print(f"{r.q:>8g} {r.c_q:>18.12g} {r.sup_dist_G:>14.6g} {status:>8}")
    failures = [r for r in rows if not r.ok()]
    for r in failures:
        print(f"  q={r.q:g}: {r.error}", file=sys.stderr)
    print(f"wrote {out / 'sweep.csv'} and {out / 'sweep_summary.json'}")
    return EXIT_SOLVER if failures else EXIT_OK


def _junction_gaps(tnl, x: float) -> tuple[float, float]:
    """Relative f and f' jumps across s = x, sampled at 1e-13 separation."""
    lo, hi = x * (1.0 - 1e-13), x * (1.0 + 1e-13)
    f_lo = float(tnl.f(np.array([lo]))[0])
    f_hi = float(tnl.f(np.array([hi]))[0])
    d_lo = float(tnl.f_prime(np.array([lo]))[0])
    d_hi = float(tnl.f_prime(np.array([hi]))[0])
    gap_f = abs(f_hi - f_lo) / max(1.0, abs(float(tnl.f(np.array([x]))[0])))
    gap_d = abs(d_hi - d_lo) / max(
        1.0, abs(float(tnl.f_prime(np.array([x]))[0])))
    return gap_f, gap_d


def cmd_validate(cfg: RunConfig) -> int:
    setup = setup_problem(cfg.p, cfg.dim, cfg.f_desc, grid_n=cfg.grid_n,
                          grading=cfg.grading, u0_hint=cfg.u0_hint)
    if cfg.inject_fault:
        # degenerate blend on purpose: the C1 junction check below must trip
        tnl = build_truncation(setup.base, setup.cap, cfg.dim,
                               blend_width=0.0, audit=False)
    else:
        tnl = setup.tnl
    grid = setup.grid
    states = setup.states
    checks: list[tuple[str, bool | None, str]] = []

    hyp = check_hypotheses(setup.base)
    hyp_ok = all(getattr(hyp, k) == "pass" for k in ("f1", "f2", "f3"))
    checks.append(("hypotheses f1-f3", hyp_ok,
                   f"f0={hyp.f0}, {len(hyp.intersections)} intersection(s)"))

    if tnl.is_identity:
        checks.append(("truncation bit-exact below cap", None,
                       "identity truncation, nothing to compare"))
        checks.append(("truncation C1 junctions", None,
                       "identity truncation, no junction"))
        checks.append(("truncation tail growth", None,
                       "identity truncation, base growth kept"))
    else:
        s_below = np.linspace(0.0, tnl.cap, 1001)
        bit_ok = (np.array_equal(tnl.f(s_below), setup.base.f(s_below))
                  and np.array_equal(tnl.f_prime(s_below),
                                     setup.base.f_prime(s_below)))
        checks.append(("truncation bit-exact below cap", bit_ok,
                       f"1001 samples on [0, {tnl.cap:g}]"))
        worst = 0.0
        for x in (tnl.cap, tnl.cap + tnl.blend_width):
            worst = max(worst, *_junction_gaps(tnl, x))
        checks.append(("truncation C1 junctions", worst < 1e-10,
                       f"worst relative jump {worst:.3g}"))
        xs = np.array([1e3, 1e6]) * tnl.cap
        ratios = tnl.f(xs) * xs ** (1.0 - tnl.ell)
        drift = abs(float(ratios[0] / ratios[1]) - 1.0)
        checks.append(("truncation tail growth", drift < 0.01,
                       f"power-law ratio drift {drift:.3g} at 1e3 cap"))

    s_mono = np.unique(np.concatenate([
        np.linspace(0.0, 10.0 * tnl.cap, 4000),
        np.geomspace(1e-3 * tnl.cap, 1e3 * tnl.cap, 6000)]))
    mono_ok = bool(np.all(tnl.f_prime(s_mono) >= -1e-12))
    checks.append(("truncation monotone", mono_ok, "f' >= 0 on audit grid"))

    cone = verify_cone_preservation(tnl, states, grid, trials=100,
                                    seed=cfg.seed)
    checks.append(("cone preservation (100 trials)", cone.passed(),
                   f"{cone.failures} failures, worst monotone violation "
                   f"{cone.worst_monotone_violation:.3g}"))

    rng = np.random.default_rng(cfg.seed)
    hi_box = min(states.u_plus, tnl.cap)
    # uniform companion grid: the finite-difference step must stay small
    # against the narrowest element or the slope kinks dominate the quotient
    grid_fd = make_grid(cfg.grid_n, cfg.dim, grading="uniform")
    worst_rel = 0.0
    for _ in range(50):
        u = random_cone_profile(grid_fd, states.u_minus, hi_box, rng)
        direction = rng.standard_normal(grid_fd.n_nodes)
        _, _, rel = fd_gradient_check(u, tnl, direction)
        worst_rel = max(worst_rel, rel)
    checks.append(("gradient vs finite differences (50)", worst_rel < 1e-5,
                   f"worst relative error {worst_rel:.3g}"))

    u0c = constant_profile(grid, states.u_zero)
    gn = grad_norm(u0c, tnl)
    rs = residual_strong(u0c, tnl)
    checks.append(("constant state criticality", max(gn, rs) < 1e-10,
                   f"grad {gn:.3g}, strong residual {rs:.3g}"))

    g21 = make_grid(2048, 1, grading="uniform")
    lp = shoot_dirichlet_G(2.0, 1, g21)
    gap0 = abs(lp.value0 - 1.0 / math.cosh(1.0))
    gap_c = abs(lp.c_limit - math.tanh(1.0) / 2.0)
    checks.append(("closed form G (p=2, N=1)", max(gap0, gap_c) < 1e-8,
                   f"|G(0) - sech 1| = {gap0:.3g}, "
                   f"|c - tanh(1)/2| = {gap_c:.3g}"))
    vT = apply_T(RadialFunction(g21, g21.nodes.copy()), 2.0, g21)
    exact = (g21.nodes + math.tanh(0.5) * np.cosh(g21.nodes)
             - np.sinh(g21.nodes))
    gap_T = float(np.max(np.abs(vT.values - exact)))
    checks.append(("closed form T (p=2, N=1, h=r)", gap_T < 1e-6,
                   f"Linf gap {gap_T:.3g}"))

    width = max(len(name) for name, _, _ in checks)
    failed = 0
    for name, ok, detail in checks:
        if ok is None:
            status = "skip"
        elif ok:
            status = "pass"
        else:
            status = "FAIL"
            failed += 1
        print(f"{name:<{width}}  {status:<4}  {detail}")
    write_json(cfg.out_path() / "validate_report.json", {
        "problem": _problem_dict(cfg),
        "inject_fault": cfg.inject_fault,
        "checks": [{"name": n, "status": ("skip" if ok is None else
                                          "pass" if ok else "fail"),
                    "detail": d} for n, ok, d in checks],
    })
    print(f"{failed} check(s) failed" if failed else "all checks passed")
    return EXIT_SOLVER if failed else EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON config file; flags override it")
    sub.add_argument("--p", type=float, default=None,
                     help="exponent p of the p-Laplacian (p >= 2)")
    sub.add_argument("--N", type=int, default=None, help="space dimension")
    sub.add_argument("--f", default=None,
                     help="nonlinearity, e.g. pure_power:5, multiwell, "
                          "custom_table:<csv>")
    sub.add_argument("--q-list", default=None,
                     help="comma-separated exponents for sweep")
    sub.add_argument("--grid-n", type=int, default=None,
                     help="number of grid elements")
    sub.add_argument("--grading", choices=GRADINGS, default=None)
    sub.add_argument("--tau", type=float, default=None,
                     help="trap radius for the path endpoints")
    sub.add_argument("--path-nodes", type=int, default=None,
                     help="path segments for the minimax descent")
    sub.add_argument("--out", default=None, help="output directory")
    sub.add_argument("--seed", type=int, default=None)
    sub.add_argument("--workers", type=int, default=None,
                     help="process pool size for the sweep (disables "
                          "warm starts when > 1)")
    sub.add_argument("--method", choices=METHODS, default=None,
                     help="solver route for the sweep")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="conepass",
        description="Radial quasilinear Neumann problems: cone-constrained "
                    "mountain pass, shooting oracle, large-exponent study.")
    subs = parser.add_subparsers(dest="command", required=True)

    sp = subs.add_parser("solve", help="minimax solve, reports certificates")
    _add_common(sp)
    sp.set_defaults(func=cmd_solve)

    sp = subs.add_parser("shoot", help="radial shooting oracle")
    _add_common(sp)
    sp.add_argument("--dirichlet-G", action="store_true", dest="dirichlet_G",
                    help="compute the limit profile G instead of a Neumann "
                         "solution")
    sp.set_defaults(func=cmd_shoot)

    sp = subs.add_parser("sweep", help="q sweep against the limit profile")
    _add_common(sp)
    sp.set_defaults(func=cmd_sweep)

    sp = subs.add_parser("validate", help="property checks and closed forms")
    _add_common(sp)
    sp.add_argument("--inject-fault", action="store_true",
                    dest="inject_fault",
                    help="corrupt the truncation blend on purpose (the C1 "
                         "check must fail)")
    sp.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = validate_config(load_config(args), args.command)
    except ConepassError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, json.JSONDecodeError, ValueError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(cfg)
    except ConepassError as exc:
        _write_error(cfg, exc)
        print(f"solver failure: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
