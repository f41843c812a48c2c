"""Primal problems: truncated solves, Slater checks, Lagrangian minimization.

An Instance fixes the box domain, the objective and the countable constraint
family.  Truncation is exact for the tail catalog because the solver enforces
the closed-form supremum of the omitted tail members rather than a finite
sample of them.

Boxes marked `ambient` stand in for all of R^n: a minimizer active at such a
box boundary is re-solved on doubled boxes, and a persistent decrease is
reported as the distinguished unbounded-below outcome (-inf in reports).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .extreal import ExtReal, INF
from .functions import ConvexFn
from .infsum import ConstraintFamily
from .solver import (
    CutCache,
    InnerResult,
    Objective,
    Term,
    grid_minimize,
    minimize_objective,
    minimize_with_constraint,
)

__all__ = [
    "Instance",
    "ValueReport",
    "SupFn",
    "constraint_sup_fn",
    "solve_primal",
    "slater_check",
    "minimize_lagrangian",
    "value_function_scan",
]

MAX_DOUBLINGS = 3


@dataclass(frozen=True, eq=False)
class Instance:
    """A convex program with countably many constraints on a box in R^n."""

    name: str
    dim: int
    lo: np.ndarray
    hi: np.ndarray
    f0: ConvexFn
    family: ConstraintFamily
    ambient: bool = False  # True: the box models all of R^n

    def __post_init__(self):
        lo = np.asarray(self.lo, float).reshape(-1)
        hi = np.asarray(self.hi, float).reshape(-1)
        if self.dim > 3:
            raise ValueError("instances are restricted to dimension <= 3")
        if lo.shape[0] != self.dim or hi.shape[0] != self.dim:
            raise ValueError("box does not match the instance dimension")
        if np.any(lo >= hi):
            raise ValueError("box must have lo < hi")
        if self.f0.dim != self.dim or self.family.dim != self.dim:
            raise ValueError("objective/constraints do not match the dimension")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def box(self):
        return self.lo, self.hi


@dataclass
class ValueReport:
    """Reported value with the data needed to re-verify it offline."""

    value: float  # math.inf = infeasible, -math.inf = unbounded below
    argmin: Optional[np.ndarray] = None
    residuals: dict = field(default_factory=dict)
    iterations: int = 0
    certificate: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.value)


class SupFn:
    """Pointwise maximum of finitely many catalog functions (oracle protocol)."""

    def __init__(self, children):
        self.children = list(children)
        if not self.children:
            raise ValueError("SupFn needs at least one child")
        self.dim = self.children[0].dim

    def value(self, x) -> ExtReal:
        best = None
        for f in self.children:
            v = f.value(x)
            if v.is_inf:
                return INF
            if best is None or v.value > best:
                best = v.value
        return ExtReal(best)

    def value_many(self, X):
        vals = self.children[0].value_many(X)
        for f in self.children[1:]:
            vals = np.maximum(vals, f.value_many(X))
        return vals

    def any_subgradient(self, x):
        vals = []
        for f in self.children:
            v = f.value(x)
            vals.append(-math.inf if v.is_inf else v.value)
        return self.children[int(np.argmax(vals))].any_subgradient(x)

    def domain_cuts(self, x):
        cuts = []
        for f in self.children:
            if f.value(x).is_inf:
                cuts.extend(f.domain_cuts(x))
        return cuts


def constraint_sup_fn(inst: Instance, k_trunc: Optional[int] = None):
    """Exact sup over all constraints: explicit members up to the truncation
    horizon plus the closed-form supremum of the remaining tail.  None for an
    unconstrained instance (sup over the empty index set)."""
    fam = inst.family
    if fam.is_empty:
        return None
    k_explicit = fam.num_prefix if k_trunc is None else max(k_trunc, fam.num_prefix)
    children = [fam.member(k) for k in range(1, min(k_explicit, fam.num_prefix) + 1)]
    if fam.has_tail:
        tail_sup = fam.tail_sup_fn(after=fam.num_prefix)
        children.append(tail_sup)
    return SupFn(children)


def slater_check(inst: Instance, level: float = 0.0, tol: float = 1e-9):
    """True plus a witness iff some x in dom f0 has sup_k f_k(x) < level.

    The tail supremum is evaluated in closed form, so the check covers all
    infinitely many constraints at once.
    """
    sup = constraint_sup_fn(inst)
    if sup is None:
        # no constraints at all: every point of dom f0 is strictly feasible
        probe = Objective(terms=(Term("f0_domain_probe", 0.0, inst.f0),))
        res = minimize_objective(probe, inst.lo, inst.hi, tol=tol, max_iter=50)
        return res.x is not None, res.x, -math.inf
    obj = Objective(terms=(Term("slater_sup", 1.0, _as_term_fn(sup, inst)),
                           Term("f0_domain", 0.0, inst.f0)))
    res = minimize_objective(obj, inst.lo, inst.hi, tol=tol, max_iter=400)
    if res.x is None:
        return False, None, math.inf
    if res.ub < level - 1e-12:
        return True, res.x, res.ub
    return False, None, res.ub


class _SupAsFn(ConvexFn):
    """Adapter enabling a SupFn to sit inside an Objective term."""

    def __init__(self, sup: SupFn):
        self.sup = sup
        self.dim = sup.dim

    def value(self, x):
        return self.sup.value(x)

    def value_many(self, X):
        return self.sup.value_many(X)

    def any_subgradient(self, x):
        return self.sup.any_subgradient(x)

    def domain_cuts(self, x):
        return self.sup.domain_cuts(x)

    def domain_rays(self, x):
        return []

    @property
    def has_indicator(self):
        return False


def _as_term_fn(sup: SupFn, inst: Instance) -> ConvexFn:
    return _SupAsFn(sup)


def solve_primal(inst: Instance, eps: float = 0.0, k_trunc: int = 64,
                 tol: float = 1e-8) -> ValueReport:
    """Minimize f0 over {x in box : f_k(x) <= eps for all k}.

    Constraints are enforced through the prefix members plus the exact tail
    supremum, which makes the truncation exact for the catalog.  Reports
    +inf on infeasibility (inf over the empty set) and -inf when an ambient
    box keeps shrinking the value under doubling.
    """
    if k_trunc < 1:
        raise ValueError("k_trunc must be >= 1")
    sup = constraint_sup_fn(inst, k_trunc)
    if sup is None:
        obj = Objective(terms=(Term("f0", 1.0, inst.f0),))
        return minimize_lagrangian(inst, obj, tol=tol)

    # exact infeasibility certificate: min of the sup function above eps
    ok, witness, sup_min = slater_check(inst, level=eps)
    if sup_min > eps + 1e-9:
        return ValueReport(value=math.inf, residuals={"constraint_inf": sup_min},
                           flags=["infeasible"])

    lo, hi = inst.lo.copy(), inst.hi.copy()
    report = None
    prev_value = None
    for doubling in range(MAX_DOUBLINGS + 1):
        res = minimize_with_constraint(
            Term("f0", 1.0, inst.f0), [], sup, eps, lo, hi,
            slater_point=witness, tol=tol)
        if res.status == "infeasible" or res.x is None:
            return ValueReport(value=math.inf, residuals={"lb": res.lb},
                               iterations=res.iterations, flags=["infeasible"])
        report = ValueReport(
            value=res.ub,
            argmin=res.x,
            residuals={"lb": res.lb, "gap": res.gap,
                       "constraint_violation": max(0.0, float(sup.value(res.x)) - eps)},
            iterations=res.iterations,
            certificate={"argmin": None if res.x is None else [float(v) for v in res.x],
                         "eps": float(eps)},
            flags=list(res.flags),
        )
        if not inst.ambient or not _boundary_active(res.x, lo, hi):
            break
        if prev_value is not None and res.ub < prev_value - 1e-6 * (1.0 + abs(prev_value)):
            if doubling == MAX_DOUBLINGS:
                report.value = -math.inf
                report.flags.append("unbounded_below")
                break
        prev_value = res.ub
        width = hi - lo
        lo = lo - 0.5 * width
        hi = hi + 0.5 * width
    if inst.ambient and report is not None and math.isfinite(report.value) \
            and prev_value is not None and report.value < prev_value - 1e-6 * (1.0 + abs(prev_value)):
        report.value = -math.inf
        report.flags.append("unbounded_below")
    return report


def _boundary_active(x, lo, hi, rel: float = 1e-6) -> bool:
    if x is None:
        return False
    width = hi - lo
    return bool(np.any(x <= lo + rel * width) or np.any(x >= hi - rel * width))


def minimize_lagrangian(inst: Instance, objective: Objective, tol: float = 1e-8,
                        cache: Optional[CutCache] = None,
                        max_iter: int = 500, respect_ambient: bool = True) -> ValueReport:
    """Inner infimum of an assembled Lagrangian over the instance box.

    Certified gap |ub - lb| <= tol on success.  For ambient boxes a
    boundary-active minimizer triggers doubling; a persistent decrease is the
    unbounded-below outcome (reported value -inf).  Pass respect_ambient=False
    to value the compactified problem on the stated box regardless.
    """
    ambient = inst.ambient and respect_ambient
    lo, hi = inst.lo.copy(), inst.hi.copy()
    first: Optional[InnerResult] = None
    res: Optional[InnerResult] = None
    unbounded = False
    for doubling in range(MAX_DOUBLINGS + 1):
        res = minimize_objective(objective, lo, hi, tol=tol, max_iter=max_iter,
                                 cache=cache)
        if res.status == "infeasible":
            return ValueReport(value=math.inf, iterations=res.iterations,
                               flags=["empty_domain"])
        if "lower_bound_diverged" in res.flags:
            unbounded = True
            break
        if first is None:
            first = res
        if not ambient or not _boundary_active(res.x, lo, hi):
            break
        if doubling == MAX_DOUBLINGS:
            break
        width = hi - lo
        lo = lo - 0.5 * width
        hi = hi + 0.5 * width
    if ambient and not unbounded and res is not None and first is not None:
        if math.isfinite(res.ub) and res.ub < first.ub - 1e-6 * (1.0 + abs(first.ub)) \
                and _boundary_active(res.x, lo, hi):
            unbounded = True
    evaluated = [list(map(float, x)) for x, _ in (res.evaluated if res else [])][-8:]
    if unbounded:
        return ValueReport(value=-math.inf, argmin=None,
                           iterations=res.iterations if res else 0,
                           flags=["unbounded_below"],
                           residuals={"lb": res.lb if res else -math.inf},
                           certificate={"evaluated": evaluated})
    return ValueReport(
        value=res.lb,
        argmin=res.x,
        residuals={"ub": res.ub, "gap": res.gap},
        iterations=res.iterations,
        certificate={"argmin": None if res.x is None else [float(v) for v in res.x],
                     "evaluated": evaluated},
        flags=list(res.flags),
    )


def value_function_scan(inst: Instance, eps_list, k_trunc: int = 64,
                        tol: float = 1e-8):
    """v(eps) along a decreasing list of positive eps, plus a limit estimate.

    The limit (linearly extrapolated from the two smallest eps) is a proxy
    for the closure of the value function at zero; monotonicity of v is
    checked and violations are flagged.
    """
    eps_list = [float(e) for e in eps_list]
    if any(e <= 0 for e in eps_list):
        raise ValueError("eps_list must be positive")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    points = []
    flags = []
    for e in eps_list:
        rep = solve_primal(inst, eps=e, k_trunc=k_trunc, tol=tol)
        points.append((e, rep.value))
    vals = [v for _, v in points]
    for (e1, v1), (e2, v2) in zip(points, points[1:]):
        # smaller eps tightens the problem, so the value must not decrease
        if math.isfinite(v1) and math.isfinite(v2) and v2 < v1 - 1e-7:
            flags.append("monotonicity_violation")
    finite = [(e, v) for e, v in points if math.isfinite(v)]
    if len(finite) >= 2:
        (e1, v1), (e0, v0) = finite[-2], finite[-1]
        slope = (v1 - v0) / (e1 - e0)
        limit = v0 - slope * e0
    elif finite:
        limit = finite[-1][1]
    else:
        limit = math.inf
    return {"points": points, "limit": limit, "flags": flags}


def grid_primal_value(inst: Instance, eps: float = 0.0, n: int = 129):
    """Brute-force oracle for dim <= 2: grid-min of f0 on the feasible mask."""
    sup = constraint_sup_fn(inst)
    lo, hi = inst.lo, inst.hi

    def masked(X):
        feas = sup.value_many(X) <= eps + 1e-9
        vals = inst.f0.value_many(X)
        return np.where(feas, vals, np.inf)

    return grid_minimize(masked, lo, hi, levels=3, n=n, polish=False)
