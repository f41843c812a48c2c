"""Cutting-plane minimization of assembled objectives over a box.

The objective is a weighted list of catalog functions plus at most one
analytic tail:

  * SeriesTail: tau * sum_{k>=k0} (s(x) + t(x)/k)^+ with affine s, t
    (closed-form value; epigraph cuts come from tangents and from partial
    sums, which underestimate the series everywhere),
  * LevelTail: tau * (infinitely many copies of f^+), which is the indicator
    of {f <= 0} for tau > 0 and the indicator of dom f for tau = 0.

The master LP is disaggregated: one epigraph variable per positively
weighted term and one for the unweighted series value.  Cuts are tangents
of the individual component functions, so a CutCache can be shared across
solves with different weights (inner problems of a dual ascent differ only
in the objective row).  Domain cuts for every component are always valid
because a zero weight on an extended-valued term still enforces its domain
(0 * (+inf) = +inf); cuts describing the tail's own domain are included only
when the tail weight is positive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linprog, minimize as _nm_minimize

from .extreal import ExtReal, INF
from .functions import ConvexFn
from .infsum import harmonic, pospart_tail_sum

__all__ = [
    "Term",
    "SeriesTail",
    "LevelTail",
    "Objective",
    "CutCache",
    "InnerResult",
    "minimize_objective",
    "minimize_with_constraint",
    "grid_minimize",
]

POOL_CAP = 120
SERIES_M_CAP = 2 ** 20
UNBOUNDED_LB = -1e10
_POINT_NDIGITS = 11


@dataclass(frozen=True)
class Term:
    key: str
    weight: float
    fn: ConvexFn


@dataclass(frozen=True, eq=False)
class SeriesTail:
    """tau * sum_{k>=k0} max(s(x) + t(x)/k, 0), s = c.x + e, t = d.x + g."""

    key: str
    tau: float
    c: np.ndarray
    d: np.ndarray
    e: float
    g: float
    k0: int

    def parts(self, x):
        return float(self.c @ x) + self.e, float(self.d @ x) + self.g

    def value(self, x) -> ExtReal:
        s, t = self.parts(x)
        return pospart_tail_sum(self.tau, s, t, self.k0)

    def unweighted_value(self, x) -> ExtReal:
        s, t = self.parts(x)
        return pospart_tail_sum(1.0, s, t, self.k0)

    def tangent(self, x):
        """(gradient, value) of the unweighted series on its finite region."""
        s, t = self.parts(x)
        val = pospart_tail_sum(1.0, s, t, self.k0)
        if val.is_inf:
            return None
        if s >= 0 or t <= 0:
            return None  # series is identically zero nearby; theta >= 0 covers it
        kmax = int(math.floor(t / (-s)))
        while kmax >= self.k0 and s + t / kmax <= 0.0:
            kmax -= 1
        if kmax < self.k0:
            return None
        count = kmax - self.k0 + 1
        grad = count * self.c + (harmonic(kmax) - harmonic(self.k0 - 1)) * self.d
        return grad, val.value

    def value_many(self, X):
        s = X @ self.c + self.e
        t = X @ self.d + self.g
        out = np.zeros(X.shape[0])
        if self.tau == 0.0:
            return out
        diverge = (s > 0) | ((s == 0) & (t > 0))
        finite_pos = (s < 0) & (t > 0)
        if finite_pos.any():
            sn = s[finite_pos]
            tn = t[finite_pos]
            kmax = np.floor(tn / (-sn)).astype(int)
            exact_zero = sn + tn / np.maximum(kmax, 1) <= 0.0
            kmax = np.where(exact_zero, kmax - 1, kmax)
            ok = kmax >= self.k0
            vals = np.zeros(kmax.shape[0])
            if ok.any():
                km = kmax[ok]
                count = km - self.k0 + 1
                vals[ok] = self.tau * (count * sn[ok] + tn[ok] * (_harmonic_arr(km) - harmonic(self.k0 - 1)))
            out[finite_pos] = vals
        out[diverge] = np.inf
        out[out > 1e12] = np.inf
        return out


@dataclass(frozen=True, eq=False)
class LevelTail:
    """tau copies of f^+ repeated infinitely: for tau > 0 the indicator of
    {f <= 0}; for tau = 0 the indicator of dom f."""

    key: str
    tau: float
    fn: ConvexFn

    def value(self, x) -> ExtReal:
        fv = self.fn.value(x)
        if fv.is_inf:
            return INF
        if self.tau > 0 and fv.value > 1e-12 * (1.0 + abs(fv.value)):
            return INF
        return ExtReal(0.0)

    def value_many(self, X):
        fv = self.fn.value_many(X)
        bad = ~np.isfinite(fv)
        if self.tau > 0:
            bad = bad | (fv > 1e-12 * (1.0 + np.abs(fv)))
        return np.where(bad, np.inf, 0.0)


@dataclass(frozen=True, eq=False)
class Objective:
    terms: tuple
    series: Optional[SeriesTail] = None
    level: Optional[LevelTail] = None

    @property
    def dim(self) -> int:
        return self.terms[0].fn.dim

    def value(self, x) -> ExtReal:
        total = ExtReal(0.0)
        for t in self.terms:
            total = total + t.fn.value(x).scaled(t.weight)
        if self.series is not None:
            total = total + self.series.value(x)
        if self.level is not None:
            total = total + self.level.value(x)
        return total

    def value_many(self, X):
        total = np.zeros(X.shape[0])
        for t in self.terms:
            v = t.fn.value_many(X)
            if t.weight == 0.0:
                total = total + np.where(np.isinf(v), np.inf, 0.0)
            else:
                total = total + t.weight * v
        if self.series is not None:
            total = total + self.series.value_many(X)
        if self.level is not None:
            total = total + self.level.value_many(X)
        return total


class CutCache:
    """Reusable cut pools, keyed by component, valid across weight changes."""

    def __init__(self):
        self.term_cuts = {}  # key -> list[(g, rhs)] encoding g.x - theta <= rhs
        self.series_cuts = {}  # key -> list[(coef, rhs)] encoding coef.x - thetaS <= rhs
        self.series_M = {}
        self.x_cuts = []  # (a, b): a.x <= b, always valid
        self.x_cuts_tail = []  # valid only when the tail weight is positive
        self._seen = set()

    def point_seen(self, key, x) -> bool:
        sig = (key, tuple(np.round(x, _POINT_NDIGITS)))
        if sig in self._seen:
            return True
        self._seen.add(sig)
        return False

    def add_term_cut(self, key, g, rhs):
        pool = self.term_cuts.setdefault(key, [])
        pool.append((np.asarray(g, float), float(rhs)))
        if len(pool) > POOL_CAP:
            del pool[0]

    def add_series_cut(self, key, coef, rhs):
        pool = self.series_cuts.setdefault(key, [])
        row = (np.asarray(coef, float), float(rhs))
        for c0, r0 in pool:
            if abs(r0 - row[1]) < 1e-12 and np.allclose(c0, row[0], atol=1e-12):
                return
        pool.append(row)
        if len(pool) > POOL_CAP:
            del pool[0]

    def bump_series_M(self, key) -> int:
        m = self.series_M.get(key, 0)
        m = 2 * m if m else 4
        m = min(m, SERIES_M_CAP)  # keeps master LPs well conditioned
        self.series_M[key] = m
        return m

    def add_x_cut(self, a, b, conditional=False):
        row = (np.asarray(a, float), float(b))
        pool = self.x_cuts_tail if conditional else self.x_cuts
        for a0, b0 in pool:
            if abs(b0 - row[1]) < 1e-12 and np.allclose(a0, row[0], atol=1e-12):
                return
        pool.append(row)


@dataclass
class InnerResult:
    lb: float
    ub: float
    x: Optional[np.ndarray]
    iterations: int
    status: str
    flags: list = field(default_factory=list)
    evaluated: list = field(default_factory=list)

    @property
    def value(self) -> float:
        return self.lb

    @property
    def gap(self) -> float:
        return self.ub - self.lb


def _quadratic_parts(fn, weight: float = 1.0):
    """Collapse a kink-free subtree into (Q, a, b); None when impossible."""
    from .functions import Affine, ConvexQuadratic, Scale, Shift, Sum

    dim = fn.dim
    if isinstance(fn, Affine):
        return np.zeros((dim, dim)), weight * fn.a, weight * fn.b
    if isinstance(fn, ConvexQuadratic):
        return weight * fn.Q, weight * fn.a, weight * fn.b
    if isinstance(fn, Shift):
        parts = _quadratic_parts(fn.child, weight)
        if parts is None:
            return None
        Q, a, b = parts
        return Q, a, b + weight * fn.constant
    if isinstance(fn, Scale):
        return _quadratic_parts(fn.child, weight * fn.c)
    if isinstance(fn, Sum):
        Q = np.zeros((dim, dim))
        a = np.zeros(dim)
        b = 0.0
        for ch in fn.children:
            parts = _quadratic_parts(ch, weight)
            if parts is None:
                return None
            Q = Q + parts[0]
            a = a + parts[1]
            b = b + parts[2]
        return Q, a, b
    return None


def _try_smooth_minimize(obj: Objective, lo, hi):
    """Exact box minimum when the objective is a single quadratic or linear
    function: stationary point if interior, corner scan for the linear case.
    Returns None whenever a kink, an indicator or an active tail is present."""
    if obj.series is not None and obj.series.tau > 0.0:
        return None
    if obj.level is not None and (obj.level.tau > 0.0 or obj.level.fn.has_indicator):
        return None
    dim = len(lo)
    Q = np.zeros((dim, dim))
    a = np.zeros(dim)
    b = 0.0
    for t in obj.terms:
        if t.weight == 0.0:
            if t.fn.has_indicator:
                return None
            continue
        parts = _quadratic_parts(t.fn, t.weight)
        if parts is None:
            return None
        Q = Q + parts[0]
        a = a + parts[1]
        b = b + parts[2]
    if np.abs(Q).max() == 0.0:
        # linear: a corner attains the minimum; keep zero-gradient
        # coordinates at the center so boundary activity means descent
        x = np.where(a > 0, lo, np.where(a < 0, hi, 0.5 * (lo + hi)))
        val = float(a @ x) + b
        return val, x
    try:
        x = np.linalg.solve(Q, -a)
    except np.linalg.LinAlgError:
        x, *_ = np.linalg.lstsq(Q, -a, rcond=None)
    grad = Q @ x + a
    if np.linalg.norm(grad) > 1e-10 * (1.0 + np.linalg.norm(a)):
        return None
    pad = 1e-9 * (np.asarray(hi) - np.asarray(lo))
    if np.any(x < lo + pad) or np.any(x > hi - pad):
        return None  # box-constrained minimum: cutting planes handle it
    val = 0.5 * float(x @ Q @ x) + float(a @ x) + b
    return val, x


def _solve_lp(c_obj, rows, rhs, bounds, A_eq=None, b_eq=None):
    kwargs = dict(A_ub=np.array(rows) if rows else None,
                  b_ub=np.array(rhs) if rhs else None,
                  A_eq=A_eq, b_eq=b_eq, bounds=bounds, method="highs")
    res = linprog(c_obj, **kwargs)
    if res.status == 4:
        res = linprog(c_obj, **kwargs, options={"presolve": False})
    return res


def _evaluate_and_cut(obj: Objective, x, cache: CutCache):
    """Evaluate the true objective at x, adding tangent or domain cuts."""
    total = obj.value(x)
    for t in obj.terms:
        v = t.fn.value(x)
        if v.is_finite:
            if t.weight > 0.0 and not cache.point_seen(t.key, x):
                g = t.fn.any_subgradient(x)
                cache.add_term_cut(t.key, g, float(g @ x) - v.value)
        else:
            for a, b in t.fn.domain_cuts(x):
                cache.add_x_cut(a, b)
    st = obj.series
    if st is not None:
        s, tt = st.parts(x)
        sval = st.unweighted_value(x)
        if sval.is_finite:
            tan = st.tangent(x)
            if tan is not None and not cache.point_seen(st.key, x):
                grad, v = tan
                cache.add_series_cut(st.key, grad, float(grad @ x) - v)
        else:
            if s > 0:
                cache.add_x_cut(st.c, -st.e, conditional=True)
            M = cache.bump_series_M(st.key)
            dH = harmonic(st.k0 + M - 1) - harmonic(st.k0 - 1)
            coef = M * st.c + dH * st.d
            cache.add_series_cut(st.key, coef, -(M * st.e + dH * st.g))
    lt = obj.level
    if lt is not None:
        fv = lt.fn.value(x)
        if fv.is_inf:
            for a, b in lt.fn.domain_cuts(x):
                cache.add_x_cut(a, b)
        elif lt.tau > 0 and fv.value > 0:
            g = lt.fn.any_subgradient(x)
            cache.add_x_cut(g, float(g @ x) - fv.value, conditional=True)
    return total


def minimize_objective(obj: Objective, lo, hi, *, tol: float = 1e-8,
                       max_iter: int = 500, cache: Optional[CutCache] = None) -> InnerResult:
    """Minimize the assembled objective over the box [lo, hi].

    Returns certified bounds: lb is the master-LP value (a true lower bound),
    ub the best evaluated point.  Status 'infeasible' means the objective is
    +inf everywhere on the box.
    """
    cache = cache if cache is not None else CutCache()
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    dim = lo.shape[0]

    smooth = _try_smooth_minimize(obj, lo, hi)
    if smooth is not None:
        val, x = smooth
        return InnerResult(val, val, x, 0, "optimal", [], [(x, val)])

    active = [t for t in obj.terms if t.weight > 0.0]
    series_on = obj.series is not None and obj.series.tau > 0.0
    tail_weight_on = series_on or (obj.level is not None and obj.level.tau > 0.0)

    nvar = dim + len(active) + (1 if series_on else 0)
    c_obj = np.zeros(nvar)
    for i, t in enumerate(active):
        c_obj[dim + i] = t.weight
    if series_on:
        c_obj[-1] = obj.series.tau

    bounds = [(lo[i], hi[i]) for i in range(dim)]
    bounds += [(None, None)] * len(active)
    if series_on:
        bounds += [(0.0, None)]

    ub = math.inf
    xbest = None
    evaluated = []
    flags: list = []

    def note(x, total):
        nonlocal ub, xbest
        if total.is_finite:
            evaluated.append((x.copy(), total.value))
            if total.value < ub:
                return total.value, x.copy()
        return ub, xbest

    center = 0.5 * (lo + hi)
    ub, xbest = note(center, _evaluate_and_cut(obj, center, cache))

    lb = -math.inf
    status = "iteration_cap"
    it = 0
    seen_iterates = set()
    stall = 0
    for it in range(1, max_iter + 1):
        rows, rhs = [], []
        for i, t in enumerate(active):
            for g, r in cache.term_cuts.get(t.key, ()):
                row = np.zeros(nvar)
                row[:dim] = g
                row[dim + i] = -1.0
                rows.append(row)
                rhs.append(r)
        if series_on:
            for coef, r in cache.series_cuts.get(obj.series.key, ()):
                row = np.zeros(nvar)
                row[:dim] = coef
                row[-1] = -1.0
                rows.append(row)
                rhs.append(r)
        pools = cache.x_cuts + (cache.x_cuts_tail if tail_weight_on else [])
        for a, b in pools:
            row = np.zeros(nvar)
            row[:dim] = a
            rows.append(row)
            rhs.append(b)

        res = _solve_lp(c_obj, rows, rhs, bounds)
        if res.status == 2:
            return InnerResult(math.inf, math.inf, None, it, "infeasible", flags, evaluated)
        if res.status == 3:
            # some epigraph variable is uncut: generate cuts at the corners
            if it == 1:
                for corner in _box_corners(lo, hi):
                    ub, xbest = note(corner, _evaluate_and_cut(obj, corner, cache))
                continue
            flags.append("lower_bound_diverged")
            status = "unbounded"
            break
        if res.status != 0 or res.x is None:
            flags.append(f"master_lp_status_{res.status}")
            break
        lb = float(res.fun)
        xhat = res.x[:dim]
        if ub - lb <= tol:
            status = "optimal"
            break
        if lb < UNBOUNDED_LB and it >= 2:
            flags.append("lower_bound_diverged")
            status = "unbounded"
            break
        sig = tuple(np.round(xhat, _POINT_NDIGITS))
        if sig in seen_iterates:
            stall += 1
            if stall >= 2:
                status = "stalled"
                break
        else:
            seen_iterates.add(sig)
            stall = 0
        ub, xbest = note(xhat, _evaluate_and_cut(obj, xhat, cache))
        if ub - lb <= tol:
            status = "optimal"
            break

    if ub is math.inf and xbest is None and status == "optimal":
        status = "infeasible"
    return InnerResult(lb, ub, xbest, it, status, flags, evaluated[-24:])


def minimize_with_constraint(f0_term: Term, extra_domain_terms, constraint,
                             eps: float, lo, hi, *, slater_point=None,
                             tol: float = 1e-8, max_iter: int = 500) -> InnerResult:
    """Minimize f0 over {x in box : constraint(x) <= eps} by cutting planes.

    `constraint` follows the ConvexFn oracle protocol (pointwise max of the
    family members is enough).  Upper bounds come from feasible iterates; an
    infeasible iterate is pulled onto the feasible segment toward the given
    strictly feasible point when one is available.
    """
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    dim = lo.shape[0]
    f0 = f0_term.fn
    feas_tol = 1e-12

    nvar = dim + 1  # x plus the objective epigraph variable
    c_obj = np.zeros(nvar)
    c_obj[-1] = 1.0
    bounds = [(lo[i], hi[i]) for i in range(dim)] + [(None, None)]

    obj_cuts: list = []
    con_cuts: list = []
    x_cuts: list = []

    ub = math.inf
    xbest = None
    flags: list = []
    feasible_evals: list = []

    def feasible(x):
        v = constraint.value(x)
        return v.is_finite and v.value <= eps + feas_tol * (1.0 + abs(eps))

    def add_obj_cut(x):
        v = f0.value(x)
        if v.is_finite:
            g = f0.any_subgradient(x)
            obj_cuts.append((g, float(g @ x) - v.value))
        else:
            x_cuts.extend(f0.domain_cuts(x))
        for t in extra_domain_terms:
            if t.fn.value(x).is_inf:
                x_cuts.extend(t.fn.domain_cuts(x))

    def add_con_cut(x):
        v = constraint.value(x)
        if v.is_finite:
            g = constraint.any_subgradient(x)
            # sup(y) <= eps implies g.y <= g.x - (sup(x) - eps)
            con_cuts.append((g, float(g @ x) - v.value + eps))
        else:
            x_cuts.extend(constraint.domain_cuts(x))

    def try_upper(x):
        nonlocal ub, xbest
        if not feasible(x):
            return
        v = f0.value(x)
        ok = all(t.fn.value(x).is_finite for t in extra_domain_terms)
        if v.is_finite and ok:
            feasible_evals.append((x.copy(), v.value))
            if v.value < ub:
                ub, xbest = v.value, x.copy()

    def restore(x):
        """Binary search toward the strictly feasible anchor."""
        if slater_point is None:
            return None
        anchor = np.asarray(slater_point, float)
        if not feasible(anchor):
            return None
        t0, t1 = 0.0, 1.0
        for _ in range(60):
            tm = 0.5 * (t0 + t1)
            if feasible(x + tm * (anchor - x)):
                t1 = tm
            else:
                t0 = tm
        return x + t1 * (anchor - x)

    center = 0.5 * (lo + hi)
    add_obj_cut(center)
    add_con_cut(center)
    try_upper(center)

    lb = -math.inf
    status = "iteration_cap"
    it = 0
    seen = set()
    for it in range(1, max_iter + 1):
        rows, rhs = [], []
        for g, r in obj_cuts:
            row = np.zeros(nvar)
            row[:dim] = g
            row[-1] = -1.0
            rows.append(row)
            rhs.append(r)
        for a, b in con_cuts + x_cuts:
            row = np.zeros(nvar)
            row[:dim] = a
            rows.append(row)
            rhs.append(b)
        res = _solve_lp(c_obj, rows, rhs, bounds)
        if res.status == 2:
            return InnerResult(math.inf, math.inf, None, it, "infeasible", flags)
        if res.status == 3:
            if it == 1:
                for corner in _box_corners(lo, hi):
                    add_obj_cut(corner)
                    if feasible(corner):
                        try_upper(corner)
                    else:
                        add_con_cut(corner)
                continue
            flags.append("lower_bound_diverged")
            status = "unbounded"
            break
        if res.status != 0 or res.x is None:
            flags.append(f"master_lp_status_{res.status}")
            break
        lb = float(res.fun)
        xhat = res.x[:dim]
        if ub - lb <= tol:
            status = "optimal"
            break
        if lb < UNBOUNDED_LB and it >= 2:
            flags.append("lower_bound_diverged")
            status = "unbounded"
            break
        sig = tuple(np.round(xhat, _POINT_NDIGITS))
        if sig in seen:
            status = "stalled"
            break
        seen.add(sig)
        add_obj_cut(xhat)
        if feasible(xhat):
            try_upper(xhat)
        else:
            add_con_cut(xhat)
            pulled = restore(xhat)
            if pulled is not None:
                try_upper(pulled)
                add_obj_cut(pulled)
    # tie-break: the lexicographically smallest near-optimal feasible point
    if xbest is not None and feasible_evals:
        near = [x for x, v in feasible_evals if v <= ub + 1e-9 * (1.0 + abs(ub))]
        xbest = min(near, key=lambda x: tuple(np.round(x, 9)))
    return InnerResult(lb, ub, xbest, it, status, flags)


def grid_minimize(value_many, lo, hi, *, levels: int = 3, n: int = 65,
                  polish: bool = True):
    """Adaptive-grid minimization used as an independent cross-check oracle.

    `value_many` maps an (M, dim) array to M values (np.inf allowed).
    Returns (best value, best point).
    """
    lo = np.asarray(lo, float).copy()
    hi = np.asarray(hi, float).copy()
    full_lo, full_hi = lo.copy(), hi.copy()
    dim = lo.shape[0]
    best_val = math.inf
    best_x = 0.5 * (lo + hi)
    for _ in range(levels):
        axes = [np.linspace(lo[i], hi[i], n) for i in range(dim)]
        grids = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        vals = value_many(pts)
        j = int(np.argmin(vals))
        if vals[j] < best_val:
            best_val = float(vals[j])
            best_x = pts[j].copy()
        if not math.isfinite(best_val):
            # zoom toward the (possibly +inf) incumbent region anyway
            pass
        span = (hi - lo) / (n - 1)
        lo = np.maximum(full_lo, best_x - 2 * span)
        hi = np.minimum(full_hi, best_x + 2 * span)
    if polish and math.isfinite(best_val):
        def scalar(x):
            x = np.asarray(x, float)
            over = np.maximum(x - full_hi, 0.0) + np.maximum(full_lo - x, 0.0)
            if over.any():
                return 1e30 * (1.0 + float(over.sum()))
            v = float(value_many(x[None, :])[0])
            return 1e30 if not math.isfinite(v) else v

        res = _nm_minimize(scalar, best_x, method="Nelder-Mead",
                           options={"maxfev": 400, "xatol": 1e-10, "fatol": 1e-13})
        if res.fun < best_val:
            best_val = float(res.fun)
            best_x = np.asarray(res.x, float)
    return best_val, best_x


def _box_corners(lo, hi):
    dim = len(lo)
    corners = []
    for mask in range(2 ** dim):
        corners.append(np.array([hi[i] if (mask >> i) & 1 else lo[i]
                                 for i in range(dim)]))
    return corners


def _harmonic_arr(k):
    k = np.asarray(k)
    out = np.empty(k.shape, float)
    small = k <= 4096
    if small.any():
        from .infsum import _H_TABLE

        out[small] = _H_TABLE[k[small]]
    if (~small).any():
        kk = k[~small].astype(float)
        inv = 1.0 / kk
        out[~small] = np.log(kk) + 0.5772156649015328606 + 0.5 * inv - inv * inv / 12.0
    return out
