"""Nonlinearity families, hypothesis audit, constant states, truncation."""

import numpy as np
import pytest

from conepass import (InvalidParameterError, build_truncation,
                      check_hypotheses, critical_exponent,
                      estimate_sup_cap, find_constant_states, from_table,
                      multiwell, phi_p, pure_power, zero_nonlinearity)


def test_phi_p_is_the_odd_power():
    s = np.array([-2.0, -0.5, 0.0, 0.5, 2.0])
    out = phi_p(s, 3.0)
    assert np.allclose(out, np.array([-4.0, -0.25, 0.0, 0.25, 4.0]))
    assert np.all(phi_p(s, 2.0) == s)


def test_family_triples_are_consistent():
    for nl in (pure_power(5.0, 3.0), pure_power(10.0, 2.5),
               multiwell(3.0), multiwell(2.5, crossings=(0.4, 0.9, 1.3),
                                         eps=0.2)):
        report = nl.validate(smax=5.0, rel_tol=1e-5)
        assert report["F_vs_f"] < 1e-5
        assert report["f_vs_f_prime"] < 1e-5


def test_pure_power_requires_q_above_p():
    with pytest.raises(InvalidParameterError):
        pure_power(3.0, 3.0)
    with pytest.raises(InvalidParameterError):
        pure_power(2.0, 2.5)


def test_critical_exponent():
    assert critical_exponent(3.0, 2) == np.inf
    assert critical_exponent(3.0, 3) == np.inf
    # N > p: p* = Np/(N-p)
    assert critical_exponent(2.5, 4) == pytest.approx(10.0 / 1.5)
    assert critical_exponent(2.0, 3) == pytest.approx(6.0)


def test_hypothesis_audit_passes_for_standard_families():
    for nl in (pure_power(5.0, 3.0), pure_power(10.0, 2.5),
               pure_power(6.0, 3.0), multiwell(3.0)):
        hyp = check_hypotheses(nl)
        assert hyp.f1 == "pass"
        assert hyp.f2 == "pass"
        assert hyp.f3 == "pass"
        assert hyp.limit_zero < 1.0
        assert len(hyp.intersections) >= 1


def test_hypothesis_audit_flags_subunit_power():
    # f(s) = 0.5 s^(p-1) never crosses s^(p-1): growth and crossing fail
    from conepass import Nonlinearity

    sub = Nonlinearity(f=lambda s: 0.5 * np.asarray(s, float) ** 2,
                       f_prime=lambda s: np.asarray(s, float),
                       F=lambda s: np.asarray(s, float) ** 3 / 6.0,
                       p=3.0, name="subunit")
    hyp = check_hypotheses(sub)
    assert hyp.f2 == "fail"
    assert hyp.f3 == "fail"


def test_zero_nonlinearity_is_identically_zero():
    nl = zero_nonlinearity(3.0)
    s = np.linspace(0.0, 4.0, 50)
    assert np.all(nl.f(s) == 0.0)
    assert np.all(nl.F(s) == 0.0)


def test_multiwell_crossings_carry_signed_margins():
    nl = multiwell(3.0)
    hyp = check_hypotheses(nl)
    found = sorted(i.s for i in hyp.intersections)
    assert np.allclose(found, [0.5, 1.0, 1.5], atol=1e-9)
    margins = {round(i.s, 6): i.margin for i in hyp.intersections}
    # upward crossings at 0.5 and 1.5, downward recrossing at 1.0
    assert margins[0.5] > 0.0
    assert margins[1.0] < 0.0
    assert margins[1.5] > 0.0
    for it in hyp.intersections:
        assert abs(it.residual) < 1e-9


def test_constant_states_pure_power():
    nl = pure_power(5.0, 3.0)
    states = find_constant_states(nl)
    assert states.u_minus == 0.0
    assert states.u_zero == pytest.approx(1.0, abs=1e-10)
    assert states.u_plus == np.inf


def test_constant_states_multiwell_default_and_hinted():
    nl = multiwell(3.0)
    first = find_constant_states(nl)
    assert first.u_minus == 0.0
    assert first.u_plus == pytest.approx(1.0, abs=1e-9)
    assert first.u_zero == pytest.approx(0.5, abs=1e-9)
    second = find_constant_states(nl, u0_hint=1.5)
    assert second.u_minus == pytest.approx(1.0, abs=1e-9)
    assert second.u_zero == pytest.approx(1.5, abs=1e-9)
    assert second.u_plus == np.inf


def test_estimate_sup_cap_clears_the_window():
    nl = pure_power(5.0, 3.0)
    states = find_constant_states(nl)
    cap = estimate_sup_cap(nl, states)
    assert cap > states.u_zero


def test_truncation_identity_below_critical():
    nl = pure_power(5.0, 3.0)          # p* = inf in dimension 2
    tnl = build_truncation(nl, 2.0, 2)
    assert tnl.is_identity
    s = np.linspace(0.0, 50.0, 500)
    assert np.array_equal(tnl.f(s), nl.f(s))


def test_truncation_blend_bitexact_and_c1():
    nl = pure_power(10.0, 2.5)         # supercritical in dimension 4
    tnl = build_truncation(nl, 2.0, 4)
    assert not tnl.is_identity
    s = np.linspace(0.0, tnl.cap, 1001)
    assert np.array_equal(tnl.f(s), nl.f(s))
    assert np.array_equal(tnl.f_prime(s), nl.f_prime(s))
    for x in (tnl.cap, tnl.cap + tnl.blend_width):
        lo, hi = x * (1.0 - 1e-13), x * (1.0 + 1e-13)
        fl, fh = tnl.f(np.array([lo]))[0], tnl.f(np.array([hi]))[0]
        dl, dh = tnl.f_prime(np.array([lo]))[0], tnl.f_prime(
            np.array([hi]))[0]
        assert abs(fh - fl) / max(1.0, abs(fl)) < 1e-10
        assert abs(dh - dl) / max(1.0, abs(dl)) < 1e-10


def test_truncation_tail_is_subcritical_power():
    nl = pure_power(10.0, 2.5)
    tnl = build_truncation(nl, 2.0, 4)
    assert tnl.ell < critical_exponent(2.5, 4)
    xs = tnl.cap * np.array([1e3, 1e6])
    ratios = tnl.f(xs) * xs ** (1.0 - tnl.ell)
    assert abs(ratios[0] / ratios[1] - 1.0) < 1e-12
    s = np.geomspace(1e-3, 1e6, 4000)
    assert np.all(tnl.f_prime(s) >= -1e-12)


def test_truncation_antiderivative_matches_f():
    nl = pure_power(10.0, 2.5)
    tnl = build_truncation(nl, 2.0, 4)
    s = np.linspace(0.5, 12.0, 400)
    h = 1e-6 * np.maximum(s, 1.0)
    fd = (tnl.F(s + h) - tnl.F(s - h)) / (2 * h)
    scale = np.maximum(1.0, np.abs(tnl.f(s)))
    assert np.max(np.abs(fd - tnl.f(s)) / scale) < 1e-8


def test_degenerate_blend_breaks_c1_detectably():
    nl = pure_power(10.0, 2.5)
    tnl = build_truncation(nl, 2.0, 4, blend_width=0.0, audit=False)
    assert not tnl.is_identity
    x = tnl.cap + tnl.blend_width
    lo, hi = x * (1.0 - 1e-13), x * (1.0 + 1e-13)
    dl = tnl.f_prime(np.array([lo]))[0]
    dh = tnl.f_prime(np.array([hi]))[0]
    assert abs(dh - dl) / max(1.0, abs(dl)) > 1e-6


def test_explicit_blend_width_forces_blend_even_subcritical():
    nl = pure_power(5.0, 3.0)
    tnl = build_truncation(nl, 2.0, 2, blend_width=1.0)
    assert not tnl.is_identity


def test_from_table_reproduces_pure_power(tmp_path):
    q, p = 5.0, 3.0
    s = np.linspace(0.0, 6.0, 1200)
    path = tmp_path / "table.csv"
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("s,f\n")
        for si in s:
            fh.write(f"{si:.17g},{si ** (q - 1):.17g}\n")
    nl = from_table(path, p)
    ref = pure_power(q, p)
    x = np.linspace(0.05, 5.5, 300)
    rel = np.abs(nl.f(x) - ref.f(x)) / np.maximum(1.0, ref.f(x))
    assert np.max(rel) < 1e-6
    hyp = check_hypotheses(nl)
    assert hyp.f3 == "pass"


def test_from_table_rejects_garbage(tmp_path):
    bad = tmp_path / "bad.csv"
    with open(bad, "w", encoding="utf-8") as fh:
        fh.write("s,f\n1.0,1.0\n0.5,0.2\n")
    with pytest.raises(Exception):
        from_table(bad, 3.0)
