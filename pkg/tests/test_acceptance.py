"""Acceptance suite: one test per criterion, one PASS/FAIL line printed each.

Every tolerance is pinned here, not configurable.  Random suites draw from
fixed seeds so runs are reproducible.
"""

import math

import numpy as np
import pytest

from conftest import classical_qp_dual_value, random_padded_qp

from icvx.duals import (
    Multiplier,
    clip_to_family,
    dual_value,
    duality_chain_report,
    minimax_check,
    solve_dual,
    transfer_multiplier,
)
from icvx.functions import BoxIndicator
from icvx.infsum import uniform_infimum_estimate
from icvx.instances import builtin, random_instance
from icvx.minnorm import min_norm_point
from icvx.primal import minimize_lagrangian, solve_primal, value_function_scan
from icvx.solver import CutCache, grid_minimize
from icvx.verify import complementary_slackness, fuzzy_kkt_d, fuzzy_kkt_dm


def _report(num, passed, detail):
    print(f"\nACCEPTANCE {num}: {'PASS' if passed else 'FAIL'} - {detail}")
    assert passed, detail


def test_criterion_1_karney_golden_suite():
    inst = builtin("karney")
    chain = duality_chain_report(inst, m_list=(0, 3), N=32)
    v = chain["values"]
    haar_mult = chain["multipliers"]["haar"]
    d_mult = chain["multipliers"]["d"]
    checks = [
        abs(v["primal"] - 0.0) <= 1e-6,
        abs(v["haar"] - (-1.0)) <= 1e-4,
        abs(haar_mult.get(1) - 1.0) <= 1e-3,
        all(val <= 1e-3 for k, val in haar_mult.support.items() if k != 1),
        abs(v["d"] - 0.0) <= 1e-4,
        abs(d_mult.limit_weight - 1.0) <= 1e-2,
        d_mult.support_sum <= 1e-2,
        abs(v["dm_0"] - 0.0) <= 1e-3,
        abs(v["dm_3"] - 0.0) <= 1e-3,
    ]
    detail = (f"primal={v['primal']:.2e} haar={v['haar']:.6f} d={v['d']:.2e} "
              f"dm0={v['dm_0']:.2e} dm3={v['dm_3']:.2e} "
              f"haar_l1={haar_mult.get(1):.6f} d_lw={d_mult.limit_weight:.6f}")
    _report(1, all(checks), detail)


def test_criterion_2_finite_reduction_equivalence():
    rng = np.random.default_rng(2024)
    worst = 0.0
    worst_lw = 0.0
    for i in range(10):
        inst = random_padded_qp(rng, name=f"qp{i}")
        Q, a, b = inst.f0.Q, inst.f0.a, inst.f0.b
        A = np.array([f.a for f in inst.family.prefix])
        c = np.array([-f.b for f in inst.family.prefix])
        oracle_val, x_star, _ = classical_qp_dual_value(Q, a, b, A, c)
        assert np.all(np.abs(x_star) < 19.0)
        cache = CutCache()
        d_rep, d_mult = solve_dual(inst, "d", N=8, tol=1e-6, inner_tol=1e-9,
                                   cache=cache)
        dm_rep, _ = solve_dual(inst, "dm", m=3, N=8, tol=1e-6, inner_tol=1e-9,
                               cache=cache,
                               warm=[transfer_multiplier(d_mult, 3)])
        worst = max(worst, abs(d_rep.value - oracle_val),
                    abs(dm_rep.value - oracle_val))
        worst_lw = max(worst_lw, d_mult.limit_weight)
    passed = worst <= 1e-5 and worst_lw <= 1e-6
    _report(2, passed, f"max |dual - oracle| = {worst:.2e} (<= 1e-5), "
                       f"max limit weight = {worst_lw:.2e} (<= 1e-6)")


def test_criterion_3_weak_duality_suite():
    rng = np.random.default_rng(333)
    worst_violation = -math.inf
    chain_ok = True
    for i in range(20):
        inst = random_instance(rng, name=f"w{i}")
        chain = duality_chain_report(inst, m_list=(0, 3), N=16,
                                     eps_list=(0.5, 0.1))
        v = chain["values"]
        vP = v["primal"]
        if math.isfinite(v["haar"]) and v["haar"] > v["d"] + 1e-6:
            chain_ok = False
        for key in ("dm_0", "dm_3"):
            if v["d"] > v[key] + 1e-6:
                chain_ok = False
        for key in ("haar", "d", "dm_0", "dm_3"):
            if math.isfinite(v[key]) and v[key] > vP + 1e-7:
                chain_ok = False
        cache = CutCache()
        hor = 8 if inst.family.has_tail else inst.family.num_prefix
        for j in range(50):
            space = ("haar", "l1", "linf")[j % 3]
            sup = {int(k): float(rng.uniform(0, 2))
                   for k in rng.integers(1, hor + 1, size=rng.integers(0, 4))}
            kw = {}
            if space == "l1" and inst.family.has_tail:
                kw["limit_weight"] = float(rng.uniform(0, 2))
            if space == "linf" and inst.family.has_tail:
                kw["tail_value"] = float(rng.uniform(0, 1))
            mult = Multiplier(space, sup, hor, **kw)
            m = int(rng.integers(0, 4)) if space == "linf" else None
            g = dual_value(inst, mult, m=m, cache=cache).value
            if math.isfinite(g):
                worst_violation = max(worst_violation, g - vP)
    passed = chain_ok and worst_violation <= 1e-7
    _report(3, passed, f"20 instances x 50 multipliers: max g - v(primal) = "
                       f"{worst_violation:.2e} (<= 1e-7), chain ordered: {chain_ok}")


def test_criterion_4_transfer_dominance():
    rng = np.random.default_rng(444)
    worst = math.inf
    count = 0
    for i in range(10):
        inst = random_instance(rng, name=f"t{i}", polyhedral_only=True)
        cache = CutCache()
        hor = 6 if inst.family.has_tail else inst.family.num_prefix
        for _ in range(10):
            sup = {int(k): float(rng.uniform(0, 1.5))
                   for k in rng.integers(1, hor + 1, size=rng.integers(0, 3))}
            lw = float(rng.uniform(0, 1.5)) if inst.family.has_tail else 0.0
            mult = Multiplier("l1", sup, hor, limit_weight=lw)
            m = int(rng.integers(0, 4))
            moved = transfer_multiplier(mult, m)
            if not inst.family.has_tail:
                m = min(m, inst.family.num_prefix)
                moved = clip_to_family(transfer_multiplier(mult, m),
                                       inst.family.num_prefix)
            g = dual_value(inst, mult, cache=cache, tol=1e-10).value
            gm = dual_value(inst, moved, m=m, cache=cache, tol=1e-10).value
            if math.isfinite(g):
                worst = min(worst, gm - g)
                count += 1
    passed = count >= 80 and worst >= -1e-9
    _report(4, passed, f"{count} finite pairs, min g_m(transfer) - g = "
                       f"{worst:.2e} (>= -1e-9)")


def test_criterion_5_fuzzy_certificates():
    inst = builtin("karney")
    x_bar = np.array([0.0, 0.0])
    d_mult = Multiplier("l1", {}, 32, limit_weight=1.0)

    cert_d = fuzzy_kkt_d(inst, x_bar, d_mult, eps=1e-6, M=5)
    points_exact = all(np.allclose(p, x_bar) for p in cert_d.points.values())

    moved = transfer_multiplier(d_mult, 3)
    cert_dm = fuzzy_kkt_dm(inst, x_bar, moved, m=3, eps=1e-3, M=5)

    slack = complementary_slackness(inst, x_bar, d_mult)

    checks = [
        cert_d.passed and cert_d.residual_minnorm <= 1e-10,
        points_exact,
        cert_dm.passed and cert_dm.residual_minnorm <= 1e-3,
        slack.max_violation == 0.0,
    ]
    detail = (f"d residual={cert_d.residual_minnorm:.2e} (<= 1e-10, points at "
              f"candidate: {points_exact}), dm residual="
              f"{cert_dm.residual_minnorm:.2e} at n={cert_dm.n} (<= 1e-3), "
              f"slackness={slack.max_violation} (= 0 exactly)")
    _report(5, all(checks), detail)


def test_criterion_6_minimax_identity():
    gaps = {}
    for name in ("minimax_abs", "karney"):
        res = minimax_check(builtin(name), N=32)
        gaps[name] = res["gap"]
    passed = all(g <= 1e-4 for g in gaps.values())
    _report(6, passed, f"|lhs - rhs|: minimax_abs = {gaps['minimax_abs']:.2e}, "
                       f"karney family = {gaps['karney']:.2e} (<= 1e-4)")


def test_criterion_7_decoupled_infimum_gap():
    n = 129
    spacing = 2.0 / (n - 1)
    i1 = BoxIndicator([spacing], [1.0])
    i2 = BoxIndicator([-1.0], [-spacing])
    est = uniform_infimum_estimate([i1, i2], ([-1.0], [1.0]), 4,
                                   [0.5, 0.25, 0.125], grid_n=n)
    passed = est.estimate <= 1e-9 and est.grid_inf_sum == math.inf
    _report(7, passed, f"decoupled estimate = {est.estimate:.2e} (<= 1e-9) while "
                       f"the grid infimum of the sum is {est.grid_inf_sum}")


def test_criterion_8_oracle_agreement():
    rng = np.random.default_rng(888)
    worst = 0.0
    for i in range(10):
        inst = random_instance(rng, name=f"o{i}")
        hor = 6 if inst.family.has_tail else inst.family.num_prefix
        sup = {int(k): float(rng.uniform(0, 1.5))
               for k in rng.integers(1, hor + 1, size=2)}
        mult = Multiplier("l1", sup, hor)
        from icvx.duals import assemble_lagrangian

        obj = assemble_lagrangian(inst, mult)
        rep = minimize_lagrangian(inst, obj, tol=1e-9)
        val, _ = grid_minimize(obj.value_many, inst.lo, inst.hi)
        worst = max(worst, abs(rep.value - val))

    scan = value_function_scan(builtin("karney"), [1.0, 0.5, 0.1, 0.01])
    vals = [v for _, v in scan["points"]]
    monotone = all(b >= a - 1e-9 for a, b in zip(vals, vals[1:]))
    limit_ok = abs(scan["limit"]) <= 1e-3
    passed = worst <= 1e-4 and monotone and limit_ok
    _report(8, passed, f"max |inner - grid| = {worst:.2e} (<= 1e-4), scan "
                       f"monotone: {monotone}, limit = {scan['limit']:.2e} (<= 1e-3)")
