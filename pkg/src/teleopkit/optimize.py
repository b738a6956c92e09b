"""Bounded scalar minimization: golden-section search with successive
parabolic interpolation (Brent). Non-finite objective values are treated as
worse than any finite value, which plain library implementations do not
handle gracefully; the redundancy search needs that because spans of the
search interval can be infeasible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

_GOLD = 0.5 * (3.0 - math.sqrt(5.0))
_TINY = 1e-21


@dataclass
class ScalarResult:
    x: float
    fx: float
    nfev: int
    niter: int
    converged: bool


def _clean(fx: float) -> float:
    return fx if math.isfinite(fx) else math.inf


def brent_min(f, lo: float, hi: float, xatol: float = 1e-6,
              maxiter: int = 100) -> ScalarResult:
    """Minimize f on [lo, hi] to an absolute x tolerance."""
    if not hi > lo:
        fx = _clean(f(lo))
        return ScalarResult(lo, fx, 1, 0, True)

    a, b = lo, hi
    x = w = v = a + _GOLD * (b - a)
    fx = fw = fv = _clean(f(x))
    nfev = 1
    d = e = 0.0

    for it in range(maxiter):
        m = 0.5 * (a + b)
        tol1 = xatol
        tol2 = 2.0 * tol1
        if abs(x - m) <= tol2 - 0.5 * (b - a):
            return ScalarResult(x, fx, nfev, it, True)

        use_golden = True
        if abs(e) > tol1 and math.isfinite(fx) and math.isfinite(fw) and math.isfinite(fv):
            # parabolic fit through (v, w, x)
            r = (x - w) * (fx - fv)
            qd = (x - v) * (fx - fw)
            p = (x - v) * qd - (x - w) * r
            qd = 2.0 * (qd - r)
            if qd > 0.0:
                p = -p
            qd = abs(qd)
            e_prev, e = e, d
            if (abs(p) < abs(0.5 * qd * e_prev) and p > qd * (a - x)
                    and p < qd * (b - x)):
                d = p / max(qd, _TINY)
                u = x + d
                if (u - a) < tol2 or (b - u) < tol2:
                    d = tol1 if x < m else -tol1
                use_golden = False
        if use_golden:
            e = (b - x) if x < m else (a - x)
            d = _GOLD * e

        u = x + d if abs(d) >= tol1 else x + (tol1 if d > 0 else -tol1)
        fu = _clean(f(u))
        nfev += 1

        if fu <= fx:
            if u < x:
                b = x
            else:
                a = x
            v, w, x = w, x, u
            fv, fw, fx = fw, fx, fu
        else:
            if u < x:
                a = u
            else:
                b = u
            if fu <= fw or w == x:
                v, w = w, u
                fv, fw = fw, fu
            elif fu <= fv or v == x or v == w:
                v, fv = u, fu

    return ScalarResult(x, fx, nfev, maxiter, False)


def brent_max(f, lo: float, hi: float, xatol: float = 1e-6,
              maxiter: int = 100) -> ScalarResult:
    """Maximize f on [lo, hi] by minimizing -f."""
    res = brent_min(lambda x: -f(x), lo, hi, xatol=xatol, maxiter=maxiter)
    res.fx = -res.fx
    return res
