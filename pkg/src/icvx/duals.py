"""The three dual problems and the multiplier transfer between them.

Forms (CLI names in parentheses):

  * "haar": finitely supported nonnegative multipliers on the original
    constraints; classical, may leave a duality gap.
  * "d": summable multipliers plus a separate weight on the limit function
    of the constraint tail.
  * "dm": bounded multipliers; the first m constraints enter plainly, all
    later ones through their positive parts (exact tail series).

The dual function g(multiplier) = inf_x L(x, multiplier) is concave, and for
any fixed x the map multiplier -> L(x, multiplier) is affine.  The outer
maximization therefore runs a cutting-plane scheme on hypograph cuts
generated at inner minimizers, sharing one inner cut cache across all
multiplier evaluations (inner problems differ only in their objective row).
Multipliers whose inner problem is unbounded below still contribute cuts
through the points the inner solver visited, which is how the ascent escapes
regions where the dual value is minus infinity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np
from scipy.optimize import linprog

from .extreal import ExtReal
from .functions import PositivePart, zero_fn
from .infsum import ConstantTail, RationalAffineTail
from .primal import (
    Instance,
    ValueReport,
    constraint_sup_fn,
    minimize_lagrangian,
    solve_primal,
    value_function_scan,
)
from .solver import CutCache, LevelTail, Objective, SeriesTail, Term, minimize_objective

__all__ = [
    "Multiplier",
    "assemble_lagrangian",
    "dual_value",
    "solve_dual",
    "transfer_multiplier",
    "duality_chain_report",
    "minimax_check",
]

SPACES = ("haar", "l1", "linf")
MULT_CAP = 100.0


@dataclass(frozen=True)
class Multiplier:
    """Nonnegative multiplier with finite support plus a constant tail.

    space "haar": finite support only.  space "l1": finite support plus a
    weight on the limit function.  space "linf": finite support prefix plus
    a constant tail value (the shape produced by the transfer map).
    """

    space: str
    support: Mapping[int, float]
    horizon: int
    tail_value: float = 0.0
    limit_weight: float = 0.0

    def __post_init__(self):
        if self.space not in SPACES:
            raise ValueError(f"unknown multiplier space {self.space!r}")
        cleaned = {}
        for k, v in dict(self.support).items():
            k = int(k)
            v = float(v)
            if k < 1 or k > self.horizon:
                raise ValueError("support indices must lie in 1..horizon")
            if v < -1e-12:
                raise ValueError("multipliers must be nonnegative")
            if v != 0.0:
                cleaned[k] = max(v, 0.0)
        object.__setattr__(self, "support", cleaned)
        object.__setattr__(self, "tail_value", float(self.tail_value))
        object.__setattr__(self, "limit_weight", float(self.limit_weight))
        if self.tail_value < 0 or self.limit_weight < 0:
            raise ValueError("multipliers must be nonnegative")
        if self.space == "haar" and (self.tail_value or self.limit_weight):
            raise ValueError("haar multipliers have no tail and no limit weight")
        if self.space == "l1" and self.tail_value:
            raise ValueError("summable multipliers carry a zero tail")
        if self.space == "linf" and self.limit_weight:
            raise ValueError("bounded multipliers have no limit weight")

    def get(self, k: int) -> float:
        if k <= self.horizon:
            return self.support.get(k, 0.0)
        return self.tail_value

    @property
    def support_sum(self) -> float:
        return float(sum(self.support.values()))

    def as_dict(self) -> dict:
        return {
            "space": self.space,
            "support": {str(k): float(v) for k, v in sorted(self.support.items())},
            "horizon": int(self.horizon),
            "tail_value": float(self.tail_value),
            "limit_weight": float(self.limit_weight),
        }

    @staticmethod
    def zero(space: str, horizon: int) -> "Multiplier":
        return Multiplier(space, {}, horizon)


def assemble_lagrangian(inst: Instance, mult: Multiplier, m: Optional[int] = None,
                        include_objective: bool = True) -> Objective:
    """Assemble the inner objective for the multiplier's dual form.

    A zero weight on an extended-valued constraint still pins its domain
    (0 * (+inf) = +inf), so indicator-bearing members are kept as zero-weight
    terms.  Tail members beyond the explicit horizon collapse to the exact
    series (linf) or vanish (finite support).
    """
    fam = inst.family
    f0 = inst.f0 if include_objective else zero_fn(inst.dim)
    terms = [Term("f0", 1.0, f0)]
    if mult.space in ("haar", "l1"):
        if m is not None and mult.space == "haar":
            raise ValueError("the split index m applies to bounded multipliers only")
        upto = max(mult.horizon, fam.num_prefix) if fam.has_tail else fam.num_prefix
        if not fam.has_tail and any(k > upto for k in mult.support):
            raise ValueError("multiplier supported beyond the finite family")
        for k in range(1, upto + 1):
            w = mult.support.get(k, 0.0)
            fn = fam.member(k)
            if w > 0.0 or fn.has_indicator:
                terms.append(Term(f"c{k}", w, fn))
        series = level = None
        if fam.has_tail:
            if isinstance(fam.tail, ConstantTail) and fam.tail.fn.has_indicator:
                terms.append(Term("ct", 0.0, fam.tail.fn))
            if mult.limit_weight > 0.0:
                terms.append(Term("finf", mult.limit_weight, fam.limit_fn()))
        elif mult.limit_weight > 0.0:
            raise ValueError("limit weight needs a constraint tail")
        return Objective(terms=tuple(terms), series=series, level=level)

    if mult.space != "linf":
        raise ValueError(f"unknown space {mult.space!r}")
    if m is None:
        raise ValueError("bounded-multiplier form needs the split index m")
    if m < 0:
        raise ValueError("m must be >= 0")
    horizon = max(mult.horizon, m, fam.num_prefix) if fam.has_tail else fam.num_prefix
    if not fam.has_tail and any(k > horizon for k in mult.support):
        raise ValueError("multiplier supported beyond the finite family")
    for k in range(1, horizon + 1):
        w = mult.get(k)
        fn = fam.member(k)
        if k <= m:
            if w > 0.0 or fn.has_indicator:
                terms.append(Term(f"c{k}", w, fn))
        else:
            pos = PositivePart(fn)
            if w > 0.0 or fn.has_indicator:
                terms.append(Term(f"p{k}", w, pos))
    series = level = None
    if fam.has_tail:
        k0 = horizon + 1
        if isinstance(fam.tail, RationalAffineTail):
            t = fam.tail
            series = SeriesTail(f"S{k0}", mult.tail_value, t.c, t.d, t.e, t.g, k0)
        else:
            level = LevelTail("LVL", mult.tail_value, fam.tail.fn)
    return Objective(terms=tuple(terms), series=series, level=level)


def dual_value(inst: Instance, mult: Multiplier, m: Optional[int] = None,
               tol: float = 1e-8, cache: Optional[CutCache] = None,
               include_objective: bool = True,
               respect_ambient: bool = True) -> ValueReport:
    """g(mult) = inf over the box of the assembled Lagrangian."""
    obj = assemble_lagrangian(inst, mult, m=m, include_objective=include_objective)
    return minimize_lagrangian(inst, obj, tol=tol, cache=cache,
                               respect_ambient=respect_ambient)


def transfer_multiplier(mult: Multiplier, m: int) -> Multiplier:
    """Convert a solution of the summable-form dual into the bounded form:
    keep the first m weights, add (limit weight + alpha) to every later one,
    where alpha is 1 exactly when the limit weight is zero."""
    if mult.space != "l1":
        raise ValueError("transfer starts from a summable multiplier")
    if m < 0:
        raise ValueError("m must be >= 0")
    alpha = 0.0 if mult.limit_weight > 0.0 else 1.0
    add = mult.limit_weight + alpha
    horizon = max(mult.horizon, m)
    support = {}
    for k in range(1, horizon + 1):
        base = mult.get(k) if k <= mult.horizon else 0.0
        support[k] = base if k <= m else base + add
    return Multiplier("linf", support, horizon, tail_value=add)


def clip_to_family(mult: Multiplier, num_prefix: int) -> Multiplier:
    """Drop weights on indices a finite family does not have."""
    support = {k: v for k, v in mult.support.items() if k <= num_prefix}
    horizon = min(mult.horizon, num_prefix)
    horizon = max(horizon, max(support, default=1))
    return Multiplier(mult.space, support, horizon, tail_value=mult.tail_value,
                      limit_weight=mult.limit_weight)


# ---------------------------------------------------------------------------
# outer maximization
# ---------------------------------------------------------------------------


class _DualSpace:
    """Variable layout of a dual form: support weights, then the extras."""

    def __init__(self, inst: Instance, form: str, m: Optional[int], horizon: int,
                 simplex: bool = False, include_objective: bool = True):
        if form not in ("haar", "d", "dm"):
            raise ValueError(f"unknown dual form {form!r}")
        if form == "dm" and m is None:
            raise ValueError("form dm needs m")
        if form == "dm" and m > horizon:
            raise ValueError("the split index m must not exceed the support horizon")
        self.inst = inst
        self.form = form
        self.m = m if form == "dm" else None
        if not inst.family.has_tail:
            horizon = min(horizon, inst.family.num_prefix)
        self.horizon = horizon
        self.simplex = simplex
        self.include_objective = include_objective
        self.has_inf = form == "d" and inst.family.has_tail
        self.has_tail = form == "dm" and inst.family.has_tail
        self.nv = horizon + (1 if self.has_inf else 0) + (1 if self.has_tail else 0)

    def to_multiplier(self, vec) -> Multiplier:
        vec = np.maximum(np.asarray(vec, float), 0.0)
        support = {k + 1: float(vec[k]) for k in range(self.horizon) if vec[k] > 0}
        if self.form == "haar":
            return Multiplier("haar", support, self.horizon)
        if self.form == "d":
            lw = float(vec[self.horizon]) if self.has_inf else 0.0
            return Multiplier("l1", support, self.horizon, limit_weight=lw)
        tv = float(vec[self.horizon]) if self.has_tail else 0.0
        return Multiplier("linf", support, self.horizon, tail_value=tv)

    def from_multiplier(self, mult: Multiplier):
        vec = np.zeros(self.nv)
        for k, v in mult.support.items():
            if k <= self.horizon:
                vec[k - 1] = v
            # weights beyond the layout horizon fold into the tail variable
        if self.has_inf:
            vec[self.horizon] = mult.limit_weight
        if self.has_tail:
            vec[self.horizon] = mult.tail_value
        return vec

    def cut_row(self, x):
        """L(x, .) as (const, coef) over the layout, None when not affine."""
        inst = self.inst
        fam = inst.family
        f0v = inst.f0.value(x) if self.include_objective else ExtReal(0.0)
        if f0v.is_inf:
            return None
        const = f0v.value
        coef = np.zeros(self.nv)
        for k in range(1, self.horizon + 1):
            fv = fam.member(k).value(x)
            if fv.is_inf:
                return None
            if self.form == "dm" and k > self.m:
                coef[k - 1] = max(fv.value, 0.0)
            else:
                coef[k - 1] = fv.value
        if self.has_inf:
            lv = fam.limit_fn().value(x)
            if lv.is_inf:
                return None
            coef[self.horizon] = lv.value
        if self.has_tail:
            if isinstance(fam.tail, RationalAffineTail):
                t = fam.tail
                k0 = max(self.horizon, self.m, fam.num_prefix) + 1
                st = SeriesTail(f"S{k0}", 1.0, t.c, t.d, t.e, t.g, k0)
                sv = st.unweighted_value(x)
                if sv.is_inf:
                    return None
                coef[self.horizon] = sv.value
            else:
                fv = fam.tail.fn.value(x)
                if fv.is_inf or fv.value > 1e-12 * (1.0 + abs(fv.value)):
                    return None
                coef[self.horizon] = 0.0
        return const, coef


def _seed_vectors(space: _DualSpace) -> list:
    seeds = []
    if not space.simplex:
        seeds.append(np.zeros(space.nv))
    upto = min(space.horizon, max(space.inst.family.num_prefix, 1) + 2)
    for k in range(upto):
        e = np.zeros(space.nv)
        e[k] = 1.0
        seeds.append(e)
    if space.has_inf or space.has_tail:
        e = np.zeros(space.nv)
        e[space.horizon] = 1.0
        seeds.append(e)
    return seeds


def solve_dual(inst: Instance, form: str, m: Optional[int] = None, N: int = 32,
               tol: float = 1e-4, inner_tol: float = 1e-8, max_outer: int = 200,
               warm=(), cap: float = MULT_CAP, cache: Optional[CutCache] = None,
               simplex: bool = False, include_objective: bool = True,
               respect_ambient: bool = True):
    """Maximize the concave dual function over the requested multiplier set.

    Returns (report, multiplier).  The reported value is the certified inner
    lower bound at the best multiplier found, hence a true lower bound on the
    primal value by weak duality.  residuals["outer_gap"] bounds the distance
    to the dual optimum over the same multiplier class on the instance box.
    """
    if N < 1:
        raise ValueError("support horizon must be >= 1")
    space = _DualSpace(inst, form, m, N, simplex=simplex,
                       include_objective=include_objective)
    cache = cache if cache is not None else CutCache()

    cuts = []  # (const, coef): z <= const + coef . v
    evals = {}
    best_g = -math.inf
    best_vec = np.zeros(space.nv)
    best_report: Optional[ValueReport] = None
    flags: list = []

    def evaluate(vec):
        nonlocal best_g, best_vec, best_report
        key = tuple(np.round(vec, 12))
        if key in evals:
            return evals[key]
        mult = space.to_multiplier(vec)
        rep = dual_value(inst, mult, m=space.m, tol=inner_tol, cache=cache,
                         include_objective=space.include_objective,
                         respect_ambient=respect_ambient)
        g = rep.value
        for pt in rep.certificate.get("evaluated", [])[-6:]:
            row = space.cut_row(np.asarray(pt, float))
            if row is not None:
                cuts.append(row)
        if math.isfinite(g) and g > best_g:
            best_g, best_vec, best_report = g, vec.copy(), rep
        evals[key] = g
        return g

    for vec in _seed_vectors(space):
        evaluate(vec)
    for mult in warm:
        evaluate(space.from_multiplier(mult))

    it = 0
    z_master = math.inf
    for it in range(1, max_outer + 1):
        nv = space.nv
        if not cuts:
            break
        A = np.zeros((len(cuts), nv + 1))
        b = np.zeros(len(cuts))
        for i, (const, coef) in enumerate(cuts):
            A[i, :nv] = -coef
            A[i, nv] = 1.0
            b[i] = const
        c_obj = np.zeros(nv + 1)
        c_obj[nv] = -1.0
        bounds = [(0.0, 1.0 if simplex else cap)] * nv + [(-1e12, 1e12)]
        A_eq = b_eq = None
        if simplex:
            A_eq = np.zeros((1, nv + 1))
            A_eq[0, :nv] = 1.0
            b_eq = np.array([1.0])
        res = linprog(c_obj, A_ub=A, b_ub=b, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                      method="highs")
        if res.status == 4:
            res = linprog(c_obj, A_ub=A, b_ub=b, A_eq=A_eq, b_eq=b_eq,
                          bounds=bounds, method="highs",
                          options={"presolve": False})
        if res.status != 0 or res.x is None:
            flags.append(f"outer_lp_status_{res.status}")
            break
        z_master = float(res.x[-1])
        vhat = np.maximum(res.x[:nv], 0.0)
        if z_master - best_g <= tol:
            break
        key = tuple(np.round(vhat, 12))
        if key in evals:
            flags.append("outer_stalled")
            break
        evaluate(vhat)
    else:
        flags.append("outer_iteration_cap")

    # sparsity polish: snap near-zero weights and keep the better multiplier
    snapped = best_vec.copy()
    snapped[np.abs(snapped) < 1e-7] = 0.0
    if not np.array_equal(snapped, best_vec):
        g_snapped = evaluate(snapped)
        if g_snapped >= best_g - 1e-12:
            best_vec = snapped
            best_g = g_snapped

    outer_gap = z_master - best_g if math.isfinite(z_master) else math.inf
    if not math.isfinite(best_g):
        flags.append("no_finite_dual_value")
    if math.isfinite(outer_gap) and outer_gap > tol:
        flags.append("sup_approached_not_attained")
    if np.any(best_vec >= cap - 1e-9):
        flags.append("multiplier_cap_active")

    mult = space.to_multiplier(best_vec)
    inner_res = dict(best_report.residuals) if best_report is not None else {}
    report = ValueReport(
        value=best_g,
        argmin=None if best_report is None else best_report.argmin,
        residuals={"outer_gap": outer_gap, **{f"inner_{k}": v for k, v in inner_res.items()}},
        iterations=it,
        certificate={"multiplier": mult.as_dict(),
                     "evaluations": len(evals)},
        flags=flags,
    )
    return report, mult


def duality_chain_report(inst: Instance, m_list=(0, 3), N: int = 32,
                         tol: float = 1e-4, inner_tol: float = 1e-8,
                         eps_list=(0.5, 0.1, 0.01), k_trunc: int = 64) -> dict:
    """Solve the primal, the three duals and the value-function scan, then
    check the ordering scan-limit <= v(d) <= v(dm) <= v(primal)."""
    primal = solve_primal(inst, eps=0.0, k_trunc=k_trunc, tol=inner_tol)
    if primal.value == -math.inf:
        raise ValueError("the ordering report requires a primal value above -inf")
    cache = CutCache()
    haar_rep, haar_mult = solve_dual(inst, "haar", N=N, tol=tol,
                                     inner_tol=inner_tol, cache=cache)
    warm_d = []
    if math.isfinite(haar_rep.value):
        warm_d.append(Multiplier("l1", haar_mult.support, haar_mult.horizon))
    d_rep, d_mult = solve_dual(inst, "d", N=N, tol=tol, inner_tol=inner_tol,
                               cache=cache, warm=warm_d)
    dm_out = {}
    for m in m_list:
        warm = [transfer_multiplier(d_mult, m)] if math.isfinite(d_rep.value) else []
        if not inst.family.has_tail:
            warm = [clip_to_family(w, inst.family.num_prefix) for w in warm]
        dm_rep, dm_mult = solve_dual(inst, "dm", m=m, N=N, tol=tol,
                                     inner_tol=inner_tol, cache=cache, warm=warm)
        dm_out[m] = (dm_rep, dm_mult)
    scan = value_function_scan(inst, eps_list, k_trunc=k_trunc, tol=inner_tol)

    values = {
        "primal": primal.value,
        "haar": haar_rep.value,
        "d": d_rep.value,
        **{f"dm_{m}": dm_out[m][0].value for m in m_list},
        "scan_limit": scan["limit"],
    }
    chain_flags = []
    if math.isfinite(values["haar"]) and values["haar"] > values["d"] + tol:
        chain_flags.append("haar_above_d")
    for m in m_list:
        if values["d"] > values[f"dm_{m}"] + tol:
            chain_flags.append(f"d_above_dm_{m}")
        if values[f"dm_{m}"] > values["primal"] + tol:
            chain_flags.append(f"dm_{m}_above_primal")
    if math.isfinite(values["scan_limit"]) and values["scan_limit"] > values["d"] + tol:
        chain_flags.append("scan_above_d_soft")

    gaps = {
        "haar_gap": values["primal"] - values["haar"],
        "d_gap": values["primal"] - values["d"],
        **{f"dm_{m}_gap": values["primal"] - values[f"dm_{m}"] for m in m_list},
    }
    return {
        "instance": inst.name,
        "values": values,
        "gaps": gaps,
        "flags": chain_flags,
        "reports": {
            "primal": primal,
            "haar": haar_rep,
            "d": d_rep,
            **{f"dm_{m}": dm_out[m][0] for m in m_list},
        },
        "multipliers": {
            "haar": haar_mult,
            "d": d_mult,
            **{f"dm_{m}": dm_out[m][1] for m in m_list},
        },
        "scan": scan,
    }


def minimax_check(inst: Instance, N: int = 32, tol: float = 1e-4,
                  inner_tol: float = 1e-8) -> dict:
    """Check inf of the family supremum against the best convex combination.

    lhs: grid-free minimization of sup_k f_k over the box (exact tail sup).
    rhs: maximum over simplex-constrained multipliers (support plus a weight
    on the limit function) of the combined infimum.
    """
    sup = constraint_sup_fn(inst)
    if sup is None:
        raise ValueError("the minimax identity needs a nonempty family")
    from .primal import _SupAsFn

    lhs_obj = Objective(terms=(Term("supfam", 1.0, _SupAsFn(sup)),))
    lhs_res = minimize_objective(lhs_obj, inst.lo, inst.hi, tol=inner_tol)
    lhs = lhs_res.lb

    rep, mult = solve_dual(inst, "d", N=N, tol=tol, inner_tol=inner_tol,
                           simplex=True, include_objective=False,
                           respect_ambient=False)
    rhs = rep.value
    return {
        "lhs": lhs,
        "rhs": rhs,
        "gap": abs(lhs - rhs),
        "multiplier": mult,
        "pass": abs(lhs - rhs) <= max(tol, tol * abs(lhs)),
        "flags": rep.flags,
    }
