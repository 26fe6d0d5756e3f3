"""Cone-constrained minimax descent: paths, certificates, level traces."""

import numpy as np
import pytest

from conepass import (InvalidParameterError, MinimaxOptions,
                      NonconvergenceError, constant_profile, energy,
                      initial_path, make_grid, minimax_solve, pure_power,
                      setup_problem, shoot_neumann, solve_problem,
                      taylor_certificate)


def test_options_require_enough_segments():
    with pytest.raises(InvalidParameterError):
        MinimaxOptions(m=4)


def test_initial_path_straddles_the_ridge():
    setup = setup_problem(3.0, 2, "pure_power:5", grid_n=256)
    opts = MinimaxOptions(m=16)
    path = initial_path(setup.states, setup.tnl, opts, setup.grid)
    energies = path.energies(setup.tnl)
    level_lo = energy(constant_profile(setup.grid, setup.states.u_minus),
                      setup.tnl)
    level_u0 = energy(constant_profile(setup.grid, setup.states.u_zero),
                      setup.tnl)
    assert len(path.nodes) == 17
    # both endpoints sit in their traps, below the crest the path crosses
    kmax = int(np.argmax(energies))
    assert 0 < kmax < len(path.nodes) - 1
    assert energies[0] < level_lo + 0.01
    assert energies[0] < energies[kmax] - 1e-6
    assert energies[-1] < energies[kmax] - 1e-6
    assert float(np.max(energies)) < 10.0 * max(level_u0, 1e-3)
    for node in path.nodes:
        assert np.all(np.diff(node.values) >= -1e-9)


def test_minimax_agrees_with_shooting_small_grid():
    setup = setup_problem(3.0, 2, "pure_power:5", grid_n=256)
    rep = minimax_solve(setup.tnl, setup.states, MinimaxOptions(), setup.grid)
    assert rep.converged
    assert all(rep.certificates.values())
    fine = make_grid(1024, 2, grading="boundary-refined")
    oracle = shoot_neumann(setup.tnl, setup.states, fine)
    assert rep.c == pytest.approx(oracle.energy, abs=5e-7)
    resampled = np.interp(fine.nodes, setup.grid.nodes, rep.u_star.values)
    assert float(np.max(np.abs(resampled - oracle.profile.values))) < 2e-3


def test_recorded_level_is_monotone():
    setup = setup_problem(3.0, 2, "pure_power:5", grid_n=256)
    rep = minimax_solve(setup.tnl, setup.states, MinimaxOptions(), setup.grid)
    # trace rows are (sweep, level, grad norm); the level is column 1
    levels = np.asarray(rep.trace)[:, 1]
    assert levels.size >= 2
    inc = np.diff(levels)
    assert float(np.max(inc)) <= 1e-14 * max(1.0, float(np.max(
        np.abs(levels))))


def test_solve_problem_full_instance():
    result = solve_problem(3.0, 2, "pure_power:5")
    rep = result.report
    assert rep.accepted()
    assert rep.c == pytest.approx(0.066524362350, abs=5e-8)
    assert rep.u_star.values[0] < 1.0 < rep.u_star.values[-1]
    assert result.cap_doublings == 0


def test_solve_problem_multiwell_second_well_certifies():
    setup = setup_problem(3.0, 2, "multiwell", u0_hint=1.5)
    result = solve_problem(setup=setup)
    rep = result.report
    assert rep.accepted()
    assert rep.c == pytest.approx(0.005270073, abs=1e-8)
    assert rep.u_star.values[0] < 1.5 < rep.u_star.values[-1]


def test_solve_problem_multiwell_first_well_is_genuine_but_shallow():
    # the first well's saddle sits about 5e-9 below the constant level,
    # inside the certificate's 1e-8 safety margin: the solve must converge,
    # match the oracle level, and honestly fail that one certificate
    setup = setup_problem(3.0, 2, "multiwell")
    try:
        result = solve_problem(setup=setup)
        rep = result.report
    except NonconvergenceError as err:
        rep = getattr(err, "report", None)
        assert rep is not None
    assert rep.certificates["nonconstant"]
    assert rep.certificates["identity_ok"]
    assert not rep.certificates["below_u0_level"]
    assert rep.c == pytest.approx(0.001106766, abs=1e-8)


def test_stalled_solver_raises_with_partial_report():
    setup = setup_problem(3.0, 2, "pure_power:5", grid_n=256)
    with pytest.raises(NonconvergenceError) as exc:
        minimax_solve(setup.tnl, setup.states, MinimaxOptions(max_outer=2),
                      setup.grid)
    assert exc.value.report.iterations == 2


def test_taylor_certificate_tracks_the_local_model():
    for dim in (1, 2):
        setup = setup_problem(3.0, dim, "pure_power:5", grid_n=512)
        rows = taylor_certificate(setup.tnl, setup.states, [0.02],
                                  setup.grid)
        assert rows[0].ratio == pytest.approx(1.0, abs=0.05)
        # the tilt lowers the ray maximum: both sides of the model dip
        assert rows[0].measured < 0.0
        assert rows[0].predicted_quadratic < 0.0


def test_taylor_quadratic_coefficient_pure_power():
    # (p-1) u0^(p-2) - f'(u0) = 2 - 4 = -2 times int r^0 v^2 dr with
    # v = r - 1/2 gives -2/12: the quadratic model must reproduce it
    setup = setup_problem(3.0, 1, "pure_power:5", grid_n=512)
    rows = taylor_certificate(setup.tnl, setup.states, [0.01], setup.grid)
    coeff = 2.0 * rows[0].predicted_quadratic / 0.01 ** 2
    assert coeff == pytest.approx(-1.0 / 6.0, rel=1e-3)