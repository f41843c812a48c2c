"""Optimality-structure certificates at a candidate primal solution.

Three layers, matching the strength of the claims they certify:

  * complementary slackness: multiplier-weighted constraint values vanish at
    the candidate point (all supported indices plus the limit weight in the
    summable form; only the first m indices in the bounded form),
  * attainment: the Lagrangian at the candidate equals both the objective
    value there and the certified inner infimum,
  * fuzzy stationarity: zero lies within eps of the weighted Minkowski sum of
    subdifferentials evaluated at points at most eps from the candidate, with
    the accompanying sum condition.  Points are searched exact-first (all at
    the candidate), then over a deterministic star grid; the number of
    constraint sets n escalates until the certificate meets eps or the
    schedule is exhausted, since larger n only enlarges the sum.

Certificates are self-contained: re-running the minimum-norm computation from
the stored points and weights reproduces the reported residuals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .duals import Multiplier, assemble_lagrangian, dual_value
from .functions import PositivePart, Subdifferential
from .infsum import ConstantTail
from .minnorm import min_norm_point
from .primal import Instance, constraint_sup_fn, slater_check

__all__ = [
    "SlacknessReport",
    "AttainmentReport",
    "FuzzyCertificate",
    "complementary_slackness",
    "lagrangian_attainment",
    "fuzzy_kkt_d",
    "fuzzy_kkt_dm",
    "recheck_certificate",
]

SEARCH_BUDGET = 10_000
N_SCHEDULE = (50, 200, 1000, 5000)


def _require_feasible(inst: Instance, x_bar, tol: float):
    x_bar = np.asarray(x_bar, float).reshape(-1)
    sup = constraint_sup_fn(inst)
    if sup is not None:
        v = sup.value(x_bar)
        if v.is_inf or v.value > tol:
            raise ValueError(f"candidate point is infeasible (constraint value {v})")
    if inst.f0.value(x_bar).is_inf:
        raise ValueError("candidate point lies outside dom f0")
    return x_bar


@dataclass
class SlacknessReport:
    products: dict
    max_violation: float
    passed: bool
    checked_indices: list

    def as_dict(self) -> dict:
        return {
            "products": {k: float(v) for k, v in self.products.items()},
            "max_violation": float(self.max_violation),
            "passed": bool(self.passed),
            "checked_indices": list(self.checked_indices),
        }


def complementary_slackness(inst: Instance, x_bar, mult: Multiplier,
                            m: Optional[int] = None, tol: float = 1e-9) -> SlacknessReport:
    """Products multiplier * constraint value at the candidate point.

    Summable/finite-support multipliers: every supported index plus the limit
    weight.  Bounded multipliers: only indices 1..m (partial slackness)."""
    x_bar = _require_feasible(inst, x_bar, tol)
    products = {}
    if mult.space in ("haar", "l1"):
        for k in sorted(mult.support):
            products[str(k)] = mult.support[k] * float(inst.family.member(k).value(x_bar))
        if mult.limit_weight > 0.0:
            products["inf"] = mult.limit_weight * float(inst.family.limit_fn().value(x_bar))
    else:
        if m is None:
            raise ValueError("partial slackness needs the split index m")
        for k in range(1, m + 1):
            w = mult.get(k)
            if w > 0.0:
                products[str(k)] = w * float(inst.family.member(k).value(x_bar))
    worst = max((abs(v) for v in products.values()), default=0.0)
    checked = list(products.keys())
    return SlacknessReport(products, worst, worst <= tol, checked)


@dataclass
class AttainmentReport:
    lagrangian_at_candidate: float
    objective_at_candidate: float
    inner_value: float
    residual_objective: float
    residual_inner: float
    passed: bool

    def as_dict(self) -> dict:
        return {k: float(getattr(self, k)) for k in (
            "lagrangian_at_candidate", "objective_at_candidate", "inner_value",
            "residual_objective", "residual_inner")} | {"passed": bool(self.passed)}


def lagrangian_attainment(inst: Instance, x_bar, mult: Multiplier,
                          m: Optional[int] = None, tol: float = 1e-7) -> AttainmentReport:
    """The Lagrangian infimum is attained at the candidate and equals f0 there."""
    x_bar = _require_feasible(inst, x_bar, tol)
    obj = assemble_lagrangian(inst, mult, m=m)
    L_at = float(obj.value(x_bar))
    f0_at = float(inst.f0.value(x_bar))
    inner = dual_value(inst, mult, m=m, tol=min(tol, 1e-8))
    res_obj = abs(L_at - f0_at)
    res_inner = L_at - inner.value if math.isfinite(inner.value) else math.inf
    passed = res_obj <= tol and res_inner <= tol + inner.residuals.get("gap", 0.0)
    return AttainmentReport(L_at, f0_at, inner.value, res_obj, res_inner, passed)


# ---------------------------------------------------------------------------
# fuzzy stationarity certificates
# ---------------------------------------------------------------------------


@dataclass
class FuzzyCertificate:
    form: str  # "d" or "dm"
    n: int
    m: Optional[int]
    eps: float
    candidate: np.ndarray
    points: dict  # index label -> point (np.ndarray)
    scales: dict  # index label -> multiplier weight
    residual_minnorm: float
    residual_sum: float
    minnorm_point: np.ndarray
    vertex_weights: dict
    passed: bool
    slater_ok: bool
    flags: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "form": self.form,
            "n": int(self.n),
            "m": None if self.m is None else int(self.m),
            "eps": float(self.eps),
            "candidate": [float(v) for v in self.candidate],
            "points": {k: [float(v) for v in p] for k, p in self.points.items()},
            "scales": {k: float(v) for k, v in self.scales.items()},
            "residual_minnorm": float(self.residual_minnorm),
            "residual_sum": float(self.residual_sum),
            "minnorm_point": [float(v) for v in self.minnorm_point],
            "passed": bool(self.passed),
            "slater_ok": bool(self.slater_ok),
            "flags": list(self.flags),
        }


def _certificate_sets(inst: Instance, form: str, mult: Multiplier,
                      m: Optional[int], n: int, points: dict):
    """(labels, sets, scales, sum_value) for the stationarity inclusion."""
    fam = inst.family
    labels = ["0"]
    sets = [inst.f0.subdiff(points["0"])]
    scales = [1.0]
    total = float(inst.f0.value(points["0"]))
    if form == "d":
        for k in sorted(mult.support):
            x_k = points[str(k)]
            fn = fam.member(k)
            labels.append(str(k))
            sets.append(fn.subdiff(x_k))
            scales.append(mult.support[k])
            total += mult.support[k] * float(fn.value(x_k))
        # zero-weight members contribute the normal cone of their domain,
        # which is {0} for full-domain members and is skipped
        upto = max(mult.horizon, fam.num_prefix) if fam.has_tail else fam.num_prefix
        for k in range(1, upto + 1):
            if mult.support.get(k, 0.0) == 0.0 and fam.member(k).has_indicator:
                x_k = points.get(str(k), points["0"])
                rays = fam.member(k).domain_rays(x_k)
                if rays:
                    labels.append(str(k))
                    sets.append(Subdifferential((np.zeros(inst.dim),), tuple(rays)))
                    scales.append(0.0)
        if mult.limit_weight > 0.0:
            fn = fam.limit_fn()
            x_inf = points["inf"]
            labels.append("inf")
            sets.append(fn.subdiff(x_inf))
            scales.append(mult.limit_weight)
            total += mult.limit_weight * float(fn.value(x_inf))
    else:
        for k in range(1, n + 1):
            if not fam.has_tail and k > fam.num_prefix:
                break  # a finite family has no members beyond its prefix
            w = mult.get(k)
            if w == 0.0:
                fn = fam.member(k) if (k <= fam.num_prefix or fam.has_tail) else None
                if fn is not None and fn.has_indicator:
                    x_k = points.get(str(k), points["0"])
                    rays = fn.domain_rays(x_k)
                    if rays:
                        labels.append(str(k))
                        sets.append(Subdifferential((np.zeros(inst.dim),), tuple(rays)))
                        scales.append(0.0)
                continue
            fn = fam.member(k)
            x_k = points.get(str(k), points["0"])
            labels.append(str(k))
            scales.append(w)
            if k <= m:
                sets.append(fn.subdiff(x_k))
                total += w * float(fn.value(x_k))
            else:
                pos = PositivePart(fn)
                sets.append(pos.subdiff(x_k))
                total += w * float(pos.value(x_k))
    return labels, sets, scales, total


def _assemble_certificate(inst, form, mult, m, n, eps, points, slater_ok,
                          sum_tol, flags):
    labels, sets, scales, total = _certificate_sets(inst, form, mult, m, n, points)
    res = min_norm_point(sets, scales, tol=min(1e-10, eps * 1e-3))
    x_bar = points["__candidate__"]
    sum_resid = total - float(inst.f0.value(x_bar))
    passed = res.norm <= eps and sum_resid <= sum_tol
    weights = {lab: [float(w) for w in wts]
               for lab, wts in zip(labels, res.vertex_weights)}
    pts = {lab: np.asarray(points.get(lab, x_bar), float) for lab in labels}
    return FuzzyCertificate(
        form=form, n=n, m=m, eps=eps, candidate=np.asarray(x_bar, float), points=pts,
        scales={lab: s for lab, s in zip(labels, scales)},
        residual_minnorm=res.norm, residual_sum=sum_resid,
        minnorm_point=res.point, vertex_weights=weights,
        passed=passed, slater_ok=slater_ok, flags=list(flags) + list(res.flags))


def _candidate_points(inst: Instance, fn, x_bar, eps: float):
    """Deterministic star-grid points within the eps-ball, box-clipped."""
    cands = [x_bar]
    for r in (0.5 * eps, eps):
        for i in range(inst.dim):
            for sgn in (1.0, -1.0):
                p = x_bar.copy()
                p[i] += sgn * r
                cands.append(np.clip(p, inst.lo, inst.hi))
    v = float(fn.value(x_bar)) if fn.value(x_bar).is_finite else None
    if v is not None and v != 0.0:
        g = fn.any_subgradient(x_bar)
        nrm = float(g @ g)
        if nrm > 0:
            step = -v / nrm
            if abs(step) * math.sqrt(nrm) <= eps:
                cands.append(np.clip(x_bar + step * g, inst.lo, inst.hi))
    out, seen = [], set()
    for p in cands:
        key = tuple(np.round(p, 12))
        if key not in seen:
            seen.add(key)
            out.append(p)
    return out


def _search_points(inst, form, mult, m, n, eps, x_bar, slater_ok, sum_tol):
    points = {"__candidate__": x_bar, "0": x_bar}
    if form == "d":
        search_labels = ["0"] + [str(k) for k in sorted(mult.support)]
        if mult.limit_weight > 0.0:
            points["inf"] = x_bar
            search_labels.append("inf")
        for k in sorted(mult.support):
            points[str(k)] = x_bar
    else:
        limit = min(n, max(mult.horizon, inst.family.num_prefix, m or 0, 64))
        search_labels = ["0"] + [str(k) for k in range(1, limit + 1) if mult.get(k) > 0.0]
        for k in range(1, n + 1):
            if mult.get(k) > 0.0:
                points[str(k)] = x_bar

    cert = _assemble_certificate(inst, form, mult, m, n, eps, points,
                                 slater_ok, sum_tol, [])
    if cert.passed:
        return cert
    budget = SEARCH_BUDGET
    improved = True
    sweeps = 0
    while improved and budget > 0 and sweeps < 3:
        improved = False
        sweeps += 1
        for lab in search_labels:
            if lab == "0":
                fn = inst.f0
            elif lab == "inf":
                fn = inst.family.limit_fn()
            else:
                fn = inst.family.member(int(lab))
            for cand in _candidate_points(inst, fn, x_bar, eps):
                if budget <= 0:
                    break
                budget -= 1
                trial = dict(points)
                trial[lab] = cand
                try:
                    c = _assemble_certificate(inst, form, mult, m, n, eps, trial,
                                              slater_ok, sum_tol, [])
                except ValueError:
                    continue  # candidate fell outside a domain
                if c.residual_sum <= sum_tol and c.residual_minnorm < cert.residual_minnorm - 1e-15:
                    cert = c
                    points = trial
                    improved = True
        if cert.passed:
            break
    return cert


def fuzzy_kkt_d(inst: Instance, x_bar, mult: Multiplier, eps: float,
                M: int = 5, sum_tol: float = 1e-9, feas_tol: float = 1e-9) -> FuzzyCertificate:
    """Stationarity certificate for the summable-form dual: zero within eps of
    subdiff f0 + sum of weighted constraint subdifferentials + weighted limit
    subdifferential, at points within eps of the candidate."""
    if mult.space != "l1":
        raise ValueError("fuzzy_kkt_d expects a summable multiplier")
    if eps <= 0 or M <= 0:
        raise ValueError("eps and M must be positive")
    x_bar = _require_feasible(inst, x_bar, feas_tol)
    slater_ok, _, _ = slater_check(inst)
    n = max(M + 1, max(mult.support, default=0))
    cert = _search_points(inst, "d", mult, None, n, eps, x_bar, slater_ok, sum_tol)
    if not cert.passed:
        cert.flags.append("hypothesis_violation_or_budget_exhausted")
    if not slater_ok:
        cert.flags.append("slater_failed")
    return cert


def fuzzy_kkt_dm(inst: Instance, x_bar, mult: Multiplier, m: int, eps: float,
                 M: int = 5, sum_tol: float = 1e-9, feas_tol: float = 1e-9) -> FuzzyCertificate:
    """Stationarity certificate for the bounded-form dual: plain
    subdifferentials up to m, positive-part subdifferentials beyond, n sets
    escalated until the inclusion meets eps (larger n only adds sets that
    contain zero, so escalation never hurts)."""
    if mult.space != "linf":
        raise ValueError("fuzzy_kkt_dm expects a bounded multiplier")
    if eps <= 0 or M <= m:
        raise ValueError("eps must be positive and M > m")
    x_bar = _require_feasible(inst, x_bar, feas_tol)
    slater_ok, _, _ = slater_check(inst)
    schedule = sorted({max(M + 1, mult.horizon), 2 * max(M, 1), *N_SCHEDULE})
    schedule = [n for n in schedule if n > M]
    has_tail_weight = inst.family.has_tail and mult.tail_value > 0.0
    if not has_tail_weight:
        # beyond the support there is nothing to add; one n suffices
        schedule = schedule[:1]
    if isinstance(inst.family.tail, ConstantTail):
        schedule = schedule[:1]

    # exact-point pass through the schedule first: enlarging n only adds sets,
    # so the first n whose all-at-candidate certificate meets eps wins
    best = None
    for n in schedule:
        points = {"__candidate__": x_bar, "0": x_bar}
        for k in range(1, n + 1):
            if mult.get(k) > 0.0:
                points[str(k)] = x_bar
        cert = _assemble_certificate(inst, "dm", mult, m, n, eps, points,
                                     slater_ok, sum_tol, [])
        if best is None or cert.residual_minnorm < best.residual_minnorm:
            best = cert
        if cert.passed:
            return best
    # fall back to the star-grid search at the most favorable n
    cert = _search_points(inst, "dm", mult, m, best.n, eps, x_bar, slater_ok, sum_tol)
    if cert.residual_minnorm < best.residual_minnorm:
        best = cert
    if not best.passed:
        best.flags.append("hypothesis_violation_or_budget_exhausted")
    if not slater_ok:
        best.flags.append("slater_failed")
    return best


def recheck_certificate(inst: Instance, cert: FuzzyCertificate) -> dict:
    """Recompute the certificate residuals from its stored points/weights."""
    mult_scales = dict(cert.scales)
    points = {k: np.asarray(p, float) for k, p in cert.points.items()}
    sets = []
    scales = []
    total = 0.0
    for lab in cert.points:
        x = points[lab]
        w = mult_scales[lab]
        if lab == "0":
            fn = inst.f0
        elif lab == "inf":
            fn = inst.family.limit_fn()
        else:
            k = int(lab)
            fn = inst.family.member(k)
            if cert.form == "dm" and cert.m is not None and k > cert.m:
                fn = PositivePart(fn)
        if w == 0.0:
            rays = fn.domain_rays(x)
            sets.append(Subdifferential((np.zeros(inst.dim),), tuple(rays)))
        else:
            sets.append(fn.subdiff(x))
        scales.append(w)
        total += w * float(fn.value(x)) if w > 0 else 0.0
    if "0" in cert.points:
        total += 0.0  # objective already carries weight 1.0 in scales
    res = min_norm_point(sets, scales, tol=min(1e-10, cert.eps * 1e-3))
    sum_resid = total - float(inst.f0.value(cert.candidate))
    return {
        "residual_minnorm": res.norm,
        "residual_sum": sum_resid,
        "minnorm_delta": abs(res.norm - cert.residual_minnorm),
    }
