"""Radial shooting oracle and the large-exponent limit profile."""

import math

import numpy as np
import pytest

from conepass import (integrate_ivp, make_grid, norm_w1p, pure_power,
                      setup_problem, shoot, shoot_dirichlet_G,
                      shoot_limit_profile, shoot_neumann, variational_G)


def test_limit_profile_closed_form_p2():
    # p = 2, N = 1: G = cosh(r)/cosh(1), so G(0) = sech 1 and the limit
    # level is tanh(1)/2
    grid = make_grid(2048, 1, grading="uniform")
    lp = shoot_dirichlet_G(2.0, 1, grid)
    assert abs(lp.value0 - 1.0 / math.cosh(1.0)) < 1e-8
    assert abs(lp.c_limit - math.tanh(1.0) / 2.0) < 1e-8
    assert abs(lp.boundary_slope - math.tanh(1.0)) < 1e-8
    exact = np.cosh(grid.nodes) / math.cosh(1.0)
    assert float(np.max(np.abs(lp.profile.values - exact))) < 1e-8
    assert lp.miss < 1e-9
    assert shoot_limit_profile is not None


def test_limit_profile_p3_n2_frozen_values():
    grid = make_grid(2048, 2, grading="uniform")
    lp = shoot_dirichlet_G(3.0, 2, grid)
    assert lp.value0 == pytest.approx(0.6491847367, abs=1e-7)
    assert lp.boundary_slope == pytest.approx(0.59898536, abs=1e-6)
    assert lp.profile.values[-1] == pytest.approx(1.0, abs=1e-10)
    assert lp.boundary_slope > 0.0


def test_limit_profile_as_dict():
    grid = make_grid(512, 1, grading="uniform")
    d = shoot_dirichlet_G(2.0, 1, grid).as_dict()
    assert set(d) == {"value0", "c_limit", "flux_end", "boundary_slope",
                      "miss", "bisection_iters"}


def test_variational_route_agrees_with_shooting():
    # independent discretizations of the same constrained minimum
    for p, dim, grading, tol in ((2.0, 1, "uniform", 1e-8),
                                 (3.0, 2, "origin-refined", 1e-6),
                                 (3.0, 3, "origin-refined", 1e-6)):
        grid = make_grid(2048, dim, grading=grading)
        g = variational_G(p, dim, grid)
        c_var = norm_w1p(g, p) ** p / p
        lp = shoot_dirichlet_G(p, dim, grid)
        assert abs(c_var - lp.c_limit) < tol, (p, dim)


def test_neumann_shooting_frozen_instances():
    frozen = {
        (3.0, 2, 5.0): (0.923898666536, 0.066524362350),
        (3.0, 3, 6.0): (0.909114561534, 0.055452587072),
        (2.5, 2, 4.0): (0.994055198866, 0.074999590445),
    }
    for (p, dim, q), (a_star, level) in frozen.items():
        setup = setup_problem(p, dim, f"pure_power:{q:g}")
        grid = make_grid(2048, dim, grading="boundary-refined")
        sol = shoot_neumann(setup.tnl, setup.states, grid)
        assert sol.a == pytest.approx(a_star, abs=1e-8), (p, dim, q)
        assert sol.energy == pytest.approx(level, abs=1e-9), (p, dim, q)
        assert sol.miss < 1e-9
        assert sol.identity_defect < 1e-6
        assert np.all(np.diff(sol.profile.values) >= -1e-12)
        assert sol.profile.values[0] < setup.states.u_zero
        assert sol.profile.values[-1] > setup.states.u_zero


def test_neumann_shooting_multiwell_both_wells():
    setup = setup_problem(3.0, 2, "multiwell")
    grid = make_grid(2048, 2, grading="boundary-refined")
    sol = shoot_neumann(setup.tnl, setup.states, grid)
    assert sol.a == pytest.approx(0.497491917, abs=1e-7)
    assert sol.energy == pytest.approx(0.001106766, abs=1e-8)

    hinted = setup_problem(3.0, 2, "multiwell", u0_hint=1.5)
    sol2 = shoot_neumann(hinted.tnl, hinted.states, grid)
    assert sol2.a == pytest.approx(1.477975872, abs=1e-7)
    assert sol2.energy == pytest.approx(0.005270073, abs=1e-8)


def test_shot_trajectories_are_monotone_from_below():
    setup = setup_problem(3.0, 2, "pure_power:5")
    shot = shoot(0.9, setup.tnl, 2)
    assert shot is not None


def test_integrate_ivp_guards_p_mismatch():
    from conepass import ShootingFailureError

    nl = pure_power(5.0, 3.0)
    with pytest.raises(ShootingFailureError):
        integrate_ivp(0.9, nl, p=2.5, dim=2)


def test_integrate_ivp_matches_shoot():
    nl = pure_power(5.0, 3.0)
    out = integrate_ivp(0.9, nl, dim=2)
    assert out is not None
