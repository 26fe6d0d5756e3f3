"""Nonlinear right-hand sides f(u) and their admissibility machinery.

The solver handles -Delta_p u + u^(p-1) = f(u) for f that is nonnegative,
nondecreasing, below s^(p-1) near 0, eventually above it, and crossing it
transversally at some state u_zero.  Growth may exceed the Sobolev-critical
power; in that case a C1 truncation caps f beyond an a priori bound and
continues it with a subcritical power, leaving f untouched below the cap.

All callables are vectorized over numpy arrays and clamp negative arguments
to 0 (profiles may carry -1e-14 level noise from projections).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (InvalidNonlinearityError, InvalidParameterError,
                     TruncationFailureError, UnsupportedNonlinearityError)

AUDIT_SPAN = (1e-8, 1e8)


def phi_p(s, p: float):
    """Odd power |s|^(p-2) s."""
    s = np.asarray(s, dtype=float)
    return np.sign(s) * np.abs(s) ** (p - 1)


@dataclass(frozen=True, eq=False)
class Nonlinearity:
    """f, its derivative, and its antiderivative F (F(0) = 0), plus p."""

    f: Callable[[np.ndarray], np.ndarray]
    f_prime: Callable[[np.ndarray], np.ndarray]
    F: Callable[[np.ndarray], np.ndarray]
    p: float
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.p < 2:
            raise InvalidParameterError("nonlinearity requires p >= 2")
        f0 = float(np.asarray(self.f(np.array([0.0])))[0])
        if f0 < 0:
            raise InvalidNonlinearityError("f(0) must be nonnegative")

    def validate(self, smax: float = 10.0, rel_tol: float = 1e-6) -> dict:
        """Central-difference consistency of (f, f', F) on [0, smax].

        Errors are measured relative to max(1, |f|); raises when the worst
        relative defect exceeds rel_tol.
        """
        s = np.geomspace(1e-3, smax, 200)
        hs = 1e-6 * np.maximum(s, 1.0)
        fd_F = (self.F(s + hs) - self.F(s - hs)) / (2 * hs)
        fd_f = (self.f(s + hs) - self.f(s - hs)) / (2 * hs)
        scale = np.maximum(1.0, np.abs(self.f(s)))
        scale_d = np.maximum(1.0, np.abs(self.f_prime(s)))
        err_F = float(np.max(np.abs(fd_F - self.f(s)) / scale))
        err_f = float(np.max(np.abs(fd_f - self.f_prime(s)) / scale_d))
        report = {"F_vs_f": err_F, "f_vs_f_prime": err_f}
        if max(err_F, err_f) > rel_tol:
            raise InvalidNonlinearityError(
                f"inconsistent derivative data: {report}")
        return report


def pure_power(q: float, p: float) -> Nonlinearity:
    """f(s) = s^(q-1) with antiderivative s^q / q (q > p required)."""
    if q <= p:
        raise InvalidParameterError("pure power needs q > p")

    def f(s):
        return np.maximum(np.asarray(s, dtype=float), 0.0) ** (q - 1)

    def fp(s):
        return (q - 1) * np.maximum(np.asarray(s, dtype=float), 0.0) ** (q - 2)

    def F(s):
        return np.maximum(np.asarray(s, dtype=float), 0.0) ** q / q

    return Nonlinearity(f, fp, F, p, name="pure_power", params={"q": float(q)})


def multiwell(p: float, crossings=(0.5, 1.0, 1.5), eps: float = 0.5) -> Nonlinearity:
    """f(s) = s^(p-1) (1 + eps (s-a)(s-b)(s-c)): transversal crossings of
    s^(p-1) at exactly a < b < c.  Used for multi-state configurations."""
    a, b, c = (float(x) for x in crossings)
    if not (0 < a < b < c):
        raise InvalidParameterError("crossings must satisfy 0 < a < b < c")
    if not (0 < eps * a * b * c < 1):
        raise InvalidParameterError("need 0 < eps*a*b*c < 1 for the small-s limit")
    e2 = a * b + a * c + b * c
    e1 = a + b + c
    e0 = -a * b * c

    def P(s):
        return ((s - a) * (s - b) * (s - c))

    def Pp(s):
        return 3 * s ** 2 - 2 * e1 * s + e2

    def f(s):
        s = np.maximum(np.asarray(s, dtype=float), 0.0)
        return s ** (p - 1) * (1.0 + eps * P(s))

    def fp(s):
        s = np.maximum(np.asarray(s, dtype=float), 0.0)
        return ((p - 1) * s ** (p - 2) * (1.0 + eps * P(s))
                + s ** (p - 1) * eps * Pp(s))

    # antiderivative of s^(p-1) (1 + eps (s^3 - e1 s^2 + e2 s + e0))
    def F(s):
        s = np.maximum(np.asarray(s, dtype=float), 0.0)
        return (s ** p / p
                + eps * (s ** (p + 3) / (p + 3) - e1 * s ** (p + 2) / (p + 2)
                         + e2 * s ** (p + 1) / (p + 1) + e0 * s ** p / p))

    return Nonlinearity(f, fp, F, p, name="multiwell",
                        params={"crossings": (a, b, c), "eps": float(eps)})


def zero_nonlinearity(p: float) -> Nonlinearity:
    """f identically 0 (the limit-profile equation's right-hand side)."""
    def zf(s):
        return np.zeros_like(np.asarray(s, dtype=float))
    return Nonlinearity(zf, zf, zf, p, name="zero")


def from_table(path, p: float) -> Nonlinearity:
    """Monotone cubic interpolation of tabulated (s, f(s)) samples.

    Columns: s, f.  s must start at 0 and increase; beyond the last sample f
    continues linearly with its end slope (clamped below at 0).
    """
    from scipy.interpolate import PchipInterpolator

    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 2:
        raise InvalidParameterError(f"{path}: expected two columns s,f")
    s_tab, f_tab = data[:, 0], data[:, 1]
    if s_tab[0] != 0.0 or np.any(np.diff(s_tab) <= 0):
        raise InvalidParameterError("table abscissae must start at 0 and increase")
    if np.any(f_tab < 0):
        raise InvalidNonlinearityError("table values must be nonnegative")
    pch = PchipInterpolator(s_tab, f_tab, extrapolate=False)
    dpch = pch.derivative()
    ipch = pch.antiderivative()
    s_end = float(s_tab[-1])
    f_end = float(f_tab[-1])
    g_end = max(float(dpch(s_end)), 0.0)
    F_end = float(ipch(s_end))

    def f(s):
        s = np.maximum(np.asarray(s, dtype=float), 0.0)
        out = np.where(s <= s_end, np.nan_to_num(pch(np.minimum(s, s_end))),
                       f_end + g_end * (s - s_end))
        return out

    def fp(s):
        s = np.maximum(np.asarray(s, dtype=float), 0.0)
        return np.where(s <= s_end, np.nan_to_num(dpch(np.minimum(s, s_end))),
                        g_end)

    def F(s):
        s = np.maximum(np.asarray(s, dtype=float), 0.0)
        tail = F_end + f_end * (s - s_end) + 0.5 * g_end * (s - s_end) ** 2
        return np.where(s <= s_end, np.nan_to_num(ipch(np.minimum(s, s_end))),
                        tail)

    return Nonlinearity(f, fp, F, p, name="custom_table",
                        params={"path": str(path), "s_end": s_end})


# ---------------------------------------------------------------------------
# hypothesis audit


@dataclass(frozen=True)
class Intersection:
    s: float
    margin: float        # f'(s) - (p-1) s^(p-2), transversality
    residual: float      # |f(s) - s^(p-1)|


@dataclass(frozen=True)
class HypothesisReport:
    f0: str
    f1: str
    f2: str
    f3: str
    limit_zero: float
    liminf_infinity: float
    intersections: tuple
    notes: tuple

    def all_pass(self) -> bool:
        return all(s == "pass" for s in (self.f0, self.f1, self.f2, self.f3))


def _ratio(nl, s):
    with np.errstate(over="ignore", invalid="ignore"):
        return nl.f(s) / s ** (nl.p - 1)


def _bisect_crossing(nl, lo: float, hi: float, iters: int = 200):
    """Bisect f(s) = s^(p-1) on [lo, hi] given a sign change of the ratio."""
    rlo = float(_ratio(nl, np.array([lo]))[0]) - 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        rm = float(_ratio(nl, np.array([mid]))[0]) - 1.0
        if rm == 0.0:
            lo = hi = mid
            break
        if (rm > 0) == (rlo > 0):
            lo = mid
            rlo = rm
        else:
            hi = mid
        if hi - lo <= 1e-16 * max(1.0, hi):
            break
    s = 0.5 * (lo + hi)
    res = abs(float(nl.f(np.array([s]))[0]) - s ** (nl.p - 1))
    margin = (float(nl.f_prime(np.array([s]))[0])
              - (nl.p - 1) * s ** (nl.p - 2))
    return Intersection(s=s, margin=margin, residual=res)


def _scan_intersections(nl, s_hi: float):
    s = np.geomspace(1e-8, s_hi, 4001)
    rho = _ratio(nl, s) - 1.0
    rho = np.where(np.isfinite(rho), rho, 1e30)
    sign = np.sign(rho)
    brackets = [(i, i + 1) for i in np.nonzero(sign[:-1] * sign[1:] < 0)[0]]
    # a sample can land exactly on a crossing (pure powers cross at s = 1,
    # which the log grid hits); the zero kills both adjacent sign products,
    # so bracket such samples with their neighbours instead
    for j in np.nonzero(sign == 0)[0]:
        if 1 <= j < sign.size - 1 and sign[j - 1] * sign[j + 1] < 0:
            brackets.append((j - 1, j + 1))
    found = []
    for i, k in sorted(brackets):
        found.append(_bisect_crossing(nl, float(s[i]), float(s[k])))
    return found


def check_hypotheses(nl: Nonlinearity) -> HypothesisReport:
    """Numeric audit of the structural hypotheses on log-spaced samples.

    Verdicts are "pass" / "fail" / "inconclusive"; limits are estimated from
    the extreme sample decades, so a slowly settling ratio is flagged rather
    than guessed.
    """
    p = nl.p
    s = np.geomspace(*AUDIT_SPAN, 400)
    notes = []

    with np.errstate(over="ignore"):
        fv = nl.f(s)
        fpv = nl.f_prime(s)
    tolv = 1e-12 * np.maximum(1.0, np.abs(fv))
    told = 1e-12 * np.maximum(1.0, np.abs(fpv))
    f0 = "pass"
    if np.any(fv < -tolv) or np.any(np.nan_to_num(fpv) < -told):
        f0 = "fail"
        notes.append("f or f' negative somewhere on the audit grid")

    rho = _ratio(nl, s)
    head = rho[:24]           # s in [1e-8, ~1e-7]
    L0 = float(head[-1])
    spread = float(np.max(head) - np.min(head))
    if spread > 1e-3 * max(1.0, abs(L0)):
        f1 = "inconclusive"
        notes.append("small-s ratio not settled over the first decade")
    elif 0.0 <= L0 < 1.0 - 1e-9:
        f1 = "pass"
    else:
        f1 = "fail"
        notes.append(f"limit of f/s^(p-1) at 0+ is {L0:.6g}, not in [0,1)")

    tail = rho[-24:]          # s in [~1e7, 1e8]
    tail = tail[np.isfinite(tail)]
    Linf = float(np.min(tail)) if tail.size else float("inf")
    if not tail.size:
        f2 = "pass"           # overflowed upward: liminf certainly > 1
        Linf = float("inf")
    elif Linf > 1.0 + 1e-9:
        f2 = "pass"
    elif Linf > 1.0 - 1e-3:
        f2 = "inconclusive"
        notes.append("large-s ratio hovers near 1")
    else:
        f2 = "fail"
        notes.append(f"liminf of f/s^(p-1) estimated {Linf:.6g} <= 1")

    inter = _scan_intersections(nl, AUDIT_SPAN[1])
    transversal = [it for it in inter
                   if it.margin > 1e-8 * max(1.0, (p - 1) * it.s ** (p - 2))]
    f3 = "pass" if transversal else "fail"
    if not transversal:
        notes.append("no transversal upward crossing of s^(p-1) found")

    return HypothesisReport(f0=f0, f1=f1, f2=f2, f3=f3,
                            limit_zero=L0, liminf_infinity=Linf,
                            intersections=tuple(inter), notes=tuple(notes))


def shift_to_f0(nl: Nonlinearity) -> tuple[Nonlinearity, float]:
    """Smallest m >= 1 (audit-grid estimate) with g = f + (m-1) s^(p-1)
    nonnegative and nondecreasing; returns (g, m).

    The shifted problem replaces u^(p-1) by m u^(p-1) on the left; this
    operation only builds g and reports m.
    """
    p = nl.p
    f0 = float(np.asarray(nl.f(np.array([0.0])))[0])
    if f0 < 0:
        raise UnsupportedNonlinearityError("f(0) < 0 cannot be shifted")
    s = np.geomspace(*AUDIT_SPAN, 2000)
    with np.errstate(over="ignore", invalid="ignore"):
        need_val = np.max(-nl.f(s) / s ** (p - 1))
        need_der = np.max(-nl.f_prime(s) / ((p - 1) * s ** (p - 2)))
    needed = float(max(0.0, np.nan_to_num(need_val), np.nan_to_num(need_der)))
    if not math.isfinite(needed) or needed > 1e12:
        raise UnsupportedNonlinearityError(
            "no finite shift makes f nonnegative and nondecreasing")
    if needed == 0.0:
        return nl, 1.0
    m = 1.0 + needed

    base_f, base_fp, base_F = nl.f, nl.f_prime, nl.F

    def f(sv):
        sv = np.maximum(np.asarray(sv, dtype=float), 0.0)
        return base_f(sv) + (m - 1.0) * sv ** (p - 1)

    def fp(sv):
        sv = np.maximum(np.asarray(sv, dtype=float), 0.0)
        return base_fp(sv) + (m - 1.0) * (p - 1) * sv ** (p - 2)

    def F(sv):
        sv = np.maximum(np.asarray(sv, dtype=float), 0.0)
        return base_F(sv) + (m - 1.0) * sv ** p / p

    shifted = Nonlinearity(f, fp, F, p, name=nl.name + "+shift",
                           params={**nl.params, "m": m})
    return shifted, m


# ---------------------------------------------------------------------------
# constant states and the a priori cap


@dataclass(frozen=True)
class ConstantStates:
    """Ordered constant states u_minus < u_zero < u_plus of f(s) = s^(p-1).

    u_zero is a transversal upward crossing; u_minus is the largest root
    below it (0 when f(0) = 0 and nothing else intersects), u_plus the
    smallest root above it, +inf when none exists.
    """

    u_minus: float
    u_zero: float
    u_plus: float
    margin: float = 0.0
    residual: float = 0.0

    def gap_below(self) -> float:
        return self.u_zero - self.u_minus

    def gap_above(self) -> float:
        return self.u_plus - self.u_zero


def find_constant_states(tnl, u0_hint: float | None = None) -> ConstantStates:
    """Bracket and bisect the roots of f(s) = s^(p-1), classify them around a
    transversal crossing (nearest to u0_hint when given, else the smallest).

    Works on any object exposing f, f_prime, p (plain or truncated families).
    """
    cap = getattr(tnl, "cap", None)
    s_hi = 1e3 * max(1.0, cap if cap is not None else 1.0)
    roots = _scan_intersections(tnl, s_hi)
    p = tnl.p
    candidates = [it for it in roots
                  if it.margin > 1e-8 * max(1.0, (p - 1) * it.s ** (p - 2))]
    if not candidates:
        raise InvalidNonlinearityError(
            "no transversal upward intersection with s^(p-1) "
            "(tangential touches do not qualify)")
    if u0_hint is None:
        pick = candidates[0]
    else:
        pick = min(candidates, key=lambda it: abs(it.s - u0_hint))
    u0 = pick.s

    below = [it.s for it in roots if it.s < u0 * (1 - 1e-10)]
    if below:
        u_minus = max(below)
    else:
        f_at_0 = float(np.asarray(tnl.f(np.array([0.0])))[0])
        if abs(f_at_0) > 1e-12:
            raise InvalidNonlinearityError(
                "f(0) > 0 but no intersection below u_zero was found")
        u_minus = 0.0
    above = [it.s for it in roots if it.s > u0 * (1 + 1e-10)]
    u_plus = min(above) if above else math.inf

    return ConstantStates(u_minus=u_minus, u_zero=u0, u_plus=u_plus,
                          margin=pick.margin, residual=pick.residual)


def estimate_sup_cap(nl: Nonlinearity, states: ConstantStates) -> float:
    """Initial a priori sup bound: max(1, 2 u_zero, 2 u_plus when finite).

    The solve driver verifies max u <= cap a posteriori and doubles the cap
    (rebuilding the truncation) on violation, at most 8 times.
    """
    cap = max(1.0, 2.0 * states.u_zero)
    if math.isfinite(states.u_plus):
        cap = max(cap, 2.0 * states.u_plus)
    return float(cap)


# ---------------------------------------------------------------------------
# truncation


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def _dsmoothstep(t):
    inside = (t > 0.0) & (t < 1.0)
    t = np.clip(t, 0.0, 1.0)
    return np.where(inside, 6.0 * t * (1.0 - t), 0.0)


@dataclass(frozen=True, eq=False)
class TruncatedNonlinearity:
    """f capped at `cap` and continued with subcritical growth s^(ell-1).

    Below the cap the callables are bit-for-bit the base family's.  Beyond
    it, a C1 smoothstep over [cap, cap + blend_width] blends the tangent line
    at the cap into A(s) s^(ell-1), whose coefficient A ramps (C1, in log s)
    from f(cap)/cap^(ell-1) to exactly 1 by s = 100 cap; from there on the
    truncation is exactly the power s^(ell-1).
    """

    base: Nonlinearity
    cap: float
    ell: float
    blend_width: float
    is_identity: bool
    f: Callable = field(repr=False)
    f_prime: Callable = field(repr=False)
    F: Callable = field(repr=False)

    @property
    def p(self) -> float:
        return self.base.p

    @property
    def name(self) -> str:
        return self.base.name + ("" if self.is_identity else "+trunc")

    @property
    def params(self) -> dict:
        return self.base.params


def critical_exponent(p: float, N: int) -> float:
    """Sobolev-critical exponent p* = Np/(N-p) for p < N, +inf otherwise."""
    return N * p / (N - p) if p < N else math.inf


def _build_blend(base: Nonlinearity, cap: float, ell: float, width: float):
    """Truncated callables for one candidate blend width (no audit here)."""
    K = cap
    W = width
    S1 = 100.0 * K
    logspan = math.log(S1 / K)
    fK = float(np.asarray(base.f(np.array([K])))[0])
    fpK = float(np.asarray(base.f_prime(np.array([K])))[0])
    A0 = fK / K ** (ell - 1.0)
    FK = float(np.asarray(base.F(np.array([K])))[0])

    def _tail_parts(s):
        chi = _smoothstep((s - K) / W)
        dchi = _dsmoothstep((s - K) / W) / W
        lam = _smoothstep(np.log(np.maximum(s, K) / K) / logspan)
        dlam = _dsmoothstep(np.log(np.maximum(s, K) / K) / logspan) / (
            np.maximum(s, K) * logspan)
        A = A0 + (1.0 - A0) * lam
        dA = (1.0 - A0) * dlam
        T = fK + fpK * (s - K)
        P = A * s ** (ell - 1.0)
        dP = dA * s ** (ell - 1.0) + A * (ell - 1.0) * s ** (ell - 2.0)
        val = (1.0 - chi) * T + chi * P
        der = -dchi * T + (1.0 - chi) * fpK + dchi * P + chi * dP
        return val, der

    def f(s):
        s = np.maximum(np.asarray(s, dtype=float), 0.0)
        out = np.array(base.f(np.minimum(s, K)), dtype=float, copy=True)
        hi = s > K
        if np.any(hi):
            val, _ = _tail_parts(s[hi])
            out[hi] = val
        return out

    def fp(s):
        s = np.maximum(np.asarray(s, dtype=float), 0.0)
        out = np.array(base.f_prime(np.minimum(s, K)), dtype=float, copy=True)
        hi = s > K
        if np.any(hi):
            _, der = _tail_parts(s[hi])
            out[hi] = der
        return out

    # cumulative table for the antiderivative on [K, S1]; beyond S1 the
    # truncation is exactly s^(ell-1) with a closed-form antiderivative.
    knots = np.geomspace(K, S1, 2049)
    gx, gw = np.polynomial.legendre.leggauss(7)
    mid = 0.5 * (knots[:-1] + knots[1:])
    half = 0.5 * np.diff(knots)
    pts = mid[:, None] + half[:, None] * gx[None, :]
    vals, _ = _tail_parts(pts.ravel())
    panel = (vals.reshape(pts.shape) * (half[:, None] * gw[None, :])).sum(axis=1)
    cum = np.concatenate([[0.0], np.cumsum(panel)])
    F_S1 = FK + float(cum[-1])

    def _tail_integral(s):
        """int_K^s of the blended truncation, vectorized for s > K."""
        out = np.empty_like(s)
        beyond = s >= S1
        if np.any(beyond):
            out[beyond] = (cum[-1]
                           + (s[beyond] ** ell - S1 ** ell) / ell)
        inside = ~beyond
        if np.any(inside):
            si = s[inside]
            idx = np.searchsorted(knots, si, side="right") - 1
            idx = np.clip(idx, 0, knots.size - 2)
            a = knots[idx]
            halfs = 0.5 * (si - a)
            mids = 0.5 * (si + a)
            ppts = mids[:, None] + halfs[:, None] * gx[None, :]
            pv, _ = _tail_parts(ppts.ravel())
            part = (pv.reshape(ppts.shape) * (halfs[:, None] * gw[None, :])
                    ).sum(axis=1)
            out[inside] = cum[idx] + part
        return out

    def F(s):
        s = np.maximum(np.asarray(s, dtype=float), 0.0)
        out = np.array(base.F(np.minimum(s, K)), dtype=float, copy=True)
        hi = s > K
        if np.any(hi):
            out[hi] = FK + _tail_integral(s[hi])
        return out

    return f, fp, F


def build_truncation(nl: Nonlinearity, cap: float, dim: int,
                     blend_width: float | None = None,
                     audit: bool = True) -> TruncatedNonlinearity:
    """Cap nl at `cap` with a C1 subcritical continuation.

    Subcritical pure powers are passed through unchanged (identity
    truncation) unless an explicit blend_width requests the blended
    construction.  Otherwise the blend width starts at `cap` (or the given
    blend_width) and doubles, at most 6 times, until the monotonicity and
    positivity audit passes.  audit=False skips widening and checks (fault
    injection for the validation command).
    """
    if cap <= 0 or not math.isfinite(cap):
        raise InvalidParameterError("cap must be positive and finite")
    p = nl.p
    pstar = critical_exponent(p, dim)

    if nl.name == "pure_power" and nl.params["q"] < pstar and blend_width is None:
        return TruncatedNonlinearity(base=nl, cap=float(cap),
                                     ell=float(nl.params["q"]),
                                     blend_width=0.0, is_identity=True,
                                     f=nl.f, f_prime=nl.f_prime, F=nl.F)

    ell = 0.5 * (p + min(pstar, p + 4.0))
    if not ell > p:
        raise UnsupportedNonlinearityError(
            f"no subcritical growth window above p={p} in dimension {dim}")

    width = float(blend_width) if blend_width is not None else float(cap)
    if width <= 0:
        if audit:
            raise InvalidParameterError("blend width must be positive")
        width = 1e-300     # degenerate on purpose: C1 audit must catch it

    attempts = 7 if audit else 1
    last_fail = ""
    for _ in range(attempts):
        f, fp, F = _build_blend(nl, cap, ell, width)
        if not audit:
            return TruncatedNonlinearity(base=nl, cap=float(cap), ell=ell,
                                         blend_width=width, is_identity=False,
                                         f=f, f_prime=fp, F=F)
        s_audit = np.unique(np.concatenate([
            np.linspace(0.0, 10.0 * cap, 4000),
            np.geomspace(1e-3 * cap, 1e3 * cap, 6000),
        ]))
        fv = f(s_audit)
        dv = fp(s_audit)
        ok_pos = np.all(fv >= -1e-12 * (1.0 + np.abs(fv)))
        ok_mono = np.all(dv >= -1e-10 * (1.0 + np.abs(fv) / np.maximum(s_audit, 1e-3)))
        if ok_pos and ok_mono:
            return TruncatedNonlinearity(base=nl, cap=float(cap), ell=ell,
                                         blend_width=width, is_identity=False,
                                         f=f, f_prime=fp, F=F)
        last_fail = ("negative value" if not ok_pos else "negative slope")
        width *= 2.0
    raise TruncationFailureError(
        f"truncation audit kept failing ({last_fail}) up to blend width {width/2}")
