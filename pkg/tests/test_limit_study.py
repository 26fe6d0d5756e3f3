"""Large-exponent sweep, limit level, convergence reporting."""

import math

import numpy as np
import pytest

from conepass import (InvalidParameterError, compute_c_infinity,
                      convergence_report, run_q_sweep, sweep_csv_lines,
                      write_profile_dat, write_sweep_csv)


@pytest.fixture(scope="module")
def short_sweep():
    return run_q_sweep(3.0, 2, [5.0, 10.0, 20.0], method="shooting")


def test_c_infinity_closed_form_p2():
    assert compute_c_infinity(2.0, 1) == pytest.approx(math.tanh(1.0) / 2.0,
                                                       abs=1e-8)


def test_c_infinity_p3_n2_frozen():
    assert compute_c_infinity(3.0, 2) == pytest.approx(0.119594485946,
                                                       abs=1e-7)


def test_c_infinity_stable_under_refinement():
    a = compute_c_infinity(3.0, 2, grid_n=1024)
    b = compute_c_infinity(3.0, 2, grid_n=2048)
    assert abs(a - b) < 1e-6


def test_sweep_rows_frozen_values(short_sweep):
    rows = short_sweep
    assert [r.q for r in rows] == [5.0, 10.0, 20.0]
    assert all(r.ok() for r in rows)
    c_expected = (0.066524362350, 0.113333016039, 0.128722545054)
    sup_expected = (0.274714, 0.156044, 0.100316)
    for row, c_q, sup in zip(rows, c_expected, sup_expected):
        assert row.c_q == pytest.approx(c_q, abs=1e-8)
        assert row.sup_dist_G == pytest.approx(sup, abs=1e-4)
        assert row.u0_val < 1.0 < row.u1_val
        assert row.identity_defect < 1e-8


def test_sweep_distances_decrease(short_sweep):
    sup = [r.sup_dist_G for r in short_sweep]
    assert all(a > b for a, b in zip(sup, sup[1:]))


def test_sweep_rejects_bad_exponent_lists():
    with pytest.raises(InvalidParameterError):
        run_q_sweep(3.0, 2, [5.0, 4.0], method="shooting")
    with pytest.raises(InvalidParameterError):
        run_q_sweep(3.0, 2, [2.0, 5.0], method="shooting")
    with pytest.raises(InvalidParameterError):
        run_q_sweep(3.0, 2, [5.0], method="simplex")


def test_convergence_report_needs_three_rows(short_sweep):
    with pytest.raises(InvalidParameterError):
        convergence_report(short_sweep[:2], 0.1196)


def test_convergence_report_contents(short_sweep):
    c_inf = compute_c_infinity(3.0, 2)
    rep = convergence_report(short_sweep, c_inf)
    assert rep.sup_monotone
    assert rep.final_over_initial_sup < 1.0
    assert rep.rate_sup < 0.0
    d = rep.as_dict()
    assert len(d["q"]) == 3
    assert len(d["c_gap"]) == 3


def test_csv_writer_format(tmp_path, short_sweep):
    path = tmp_path / "sweep.csv"
    write_sweep_csv(short_sweep, path)
    text = open(path, encoding="utf-8", newline="").read()
    lines = text.split("\n")
    assert lines[0] == "q,c_q,u0,u1,sup_dist_G,norm_W1p,identity_defect"
    assert len(lines) == 5 and lines[-1] == ""
    assert "\r" not in text
    # floats carry 17 significant digits, reread must be exact
    val = float(lines[1].split(",")[1])
    assert val == short_sweep[0].c_q
    assert sweep_csv_lines(short_sweep)[0] == lines[0]


def test_profile_dat_writer(tmp_path, short_sweep):
    prof = short_sweep[0].profile
    path = tmp_path / "profile.dat"
    write_profile_dat(prof, path)
    data = np.loadtxt(path)
    assert data.shape == (prof.grid.n_nodes, 2)
    assert np.array_equal(data[:, 0], prof.grid.nodes)
    assert np.array_equal(data[:, 1], prof.values)


def test_parallel_sweep_matches_sequential(short_sweep):
    rows = run_q_sweep(3.0, 2, [5.0, 10.0, 20.0], method="shooting",
                       workers=2)
    for seq, par in zip(short_sweep, rows):
        assert par.q == seq.q
        assert par.c_q == seq.c_q
        assert par.sup_dist_G == seq.sup_dist_G


def test_minimax_route_cross_validates_one_exponent():
    rows = run_q_sweep(3.0, 2, [5.0], method="both")
    assert rows[0].ok()
    assert rows[0].cross_dist < 1e-3
    assert rows[0].c_q == pytest.approx(0.066524362350, abs=1e-6)
