"""Indicator-bearing constraints exercise the zero-weight domain convention
(0 * (+inf) = +inf) through assembly, inner solves and certificates."""

import math

import numpy as np
import pytest

from icvx.duals import Multiplier, assemble_lagrangian, dual_value
from icvx.functions import Affine, BoxIndicator
from icvx.infsum import ConstantTail, ConstraintFamily
from icvx.primal import Instance, slater_check, solve_primal
from icvx.verify import fuzzy_kkt_d, recheck_certificate


def indicator_instance():
    fam = ConstraintFamily(prefix=(BoxIndicator([0.0], [1.0]),))
    return Instance("ind", 1, [-2.0], [2.0], Affine([1.0], 0.0), fam)


def test_zero_weight_keeps_indicator_domain():
    inst = indicator_instance()
    obj = assemble_lagrangian(inst, Multiplier.zero("l1", 1))
    assert float(obj.value(np.array([0.5]))) == 0.5
    assert obj.value(np.array([1.5])).is_inf  # domain pinned at weight zero


def test_primal_and_zero_multiplier_dual_close_the_gap():
    inst = indicator_instance()
    rep = solve_primal(inst)
    assert rep.value == pytest.approx(0.0, abs=1e-9)
    g = dual_value(inst, Multiplier.zero("l1", 1))
    assert g.value == pytest.approx(0.0, abs=1e-9)


def test_slater_fails_for_indicator_constraints():
    # an indicator is never strictly negative
    ok, _, sup_min = slater_check(indicator_instance())
    assert not ok and sup_min >= -1e-9


def test_fuzzy_certificate_uses_normal_cone_for_zero_weight():
    # at the solution x = 0 the constraint's normal cone supplies the ray
    # -e1 that cancels the objective gradient, at multiplier weight zero
    inst = indicator_instance()
    cert = fuzzy_kkt_d(inst, np.array([0.0]), Multiplier.zero("l1", 1),
                       eps=1e-8, M=2)
    assert cert.passed
    assert cert.residual_minnorm <= 1e-9
    assert "slater_failed" in cert.flags
    assert "1" in cert.scales and cert.scales["1"] == 0.0
    rc = recheck_certificate(inst, cert)
    assert rc["minnorm_delta"] <= 1e-10


def test_constant_indicator_tail_level_term():
    # tail constraints are the same box indicator for every index: with a
    # positive bounded-form tail weight the series is the indicator of the
    # feasibility region of the tail
    fam = ConstraintFamily(prefix=(Affine([1.0], -1.0),),
                           tail=ConstantTail(BoxIndicator([-1.0], [0.5])))
    inst = Instance("level", 1, [-2.0], [2.0], Affine([-1.0], 0.0), fam)
    mult = Multiplier("linf", {}, 1, tail_value=1.0)
    rep = dual_value(inst, mult, m=0)
    # minimize -x over box intersected with [-1, 0.5]
    assert rep.value == pytest.approx(-0.5, abs=1e-9)
    zero = Multiplier("linf", {}, 1, tail_value=0.0)
    rep0 = dual_value(inst, zero, m=0)
    assert rep0.value == pytest.approx(-0.5, abs=1e-9)  # domain still pinned


def test_dm_split_index_capped_by_horizon(karney):
    from icvx.duals import solve_dual

    with pytest.raises(ValueError):
        solve_dual(karney, "dm", m=40, N=32)
