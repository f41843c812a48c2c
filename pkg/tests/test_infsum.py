import math

import numpy as np
import pytest

from icvx.extreal import ExtReal, INF
from icvx.functions import Affine, BoxIndicator, ConvexQuadratic
from icvx.infsum import (
    ConstantTail,
    ConstraintFamily,
    PositivePartTail,
    RationalAffineTail,
    TermSeries,
    firm_uls_estimate,
    harmonic,
    pospart_tail_sum,
    tail_limit_value,
    uniform_infimum_estimate,
    upper_sum,
)


def karney_family():
    return ConstraintFamily(
        prefix=(Affine([0.0, -1.0], -1.0), Affine([1.0, 0.0], 0.0)),
        tail=RationalAffineTail(c=[0.0, -1.0], d=[1.0, 0.0], e=0.0, g=0.0))


def test_member_resolution():
    fam = karney_family()
    assert float(fam.member(1).value([0.0, 0.0])) == -1.0
    assert float(fam.member(2).value([3.0, 0.0])) == 3.0
    assert float(fam.member(3).value([3.0, 0.0])) == pytest.approx(1.0)
    assert float(fam.member(10).value([10.0, 1.0])) == pytest.approx(0.0)


def test_finite_family_has_no_tail_members():
    fam = ConstraintFamily(prefix=(Affine([1.0], 0.0),))
    with pytest.raises(IndexError):
        fam.member(2)
    with pytest.raises(ValueError):
        fam.limit_fn()


def test_limit_value_karney():
    fam = karney_family()
    assert float(tail_limit_value(fam, [2.0, 5.0])) == -5.0


def test_limit_value_constant_tail():
    fam = ConstraintFamily(prefix=(), tail=ConstantTail(Affine([0.0], -1.0)))
    assert float(tail_limit_value(fam, [123.0])) == -1.0


def test_limit_value_rational_at_zero():
    fam = ConstraintFamily(prefix=(), tail=RationalAffineTail([1.0], [0.0], 0.0, -1.0))
    assert float(tail_limit_value(fam, [0.0])) == 0.0


def test_rational_tail_limit_rate():
    # |f_k(x) - limit(x)| <= (|<d,x>| + |g|)/k
    rng = np.random.default_rng(3)
    tail = RationalAffineTail(rng.normal(size=2), rng.normal(size=2),
                              rng.normal(), rng.normal())
    fam = ConstraintFamily(prefix=(), tail=tail)
    lim = fam.limit_fn()
    for _ in range(50):
        x = rng.uniform(-3, 3, size=2)
        bound = abs(float(tail.d @ x)) + abs(tail.g)
        for k in (1, 2, 7, 50, 1000):
            gap = abs(float(fam.member(k).value(x)) - float(lim.value(x)))
            assert gap <= bound / k + 1e-12


def test_limit_fn_is_affine_hence_linear_in_mixtures():
    fam = karney_family()
    lim = fam.limit_fn()
    rng = np.random.default_rng(4)
    for _ in range(30):
        x, y = rng.uniform(-5, 5, size=2), rng.uniform(-5, 5, size=2)
        a = rng.uniform()
        assert float(lim.value(a * x + (1 - a) * y)) == pytest.approx(
            a * float(lim.value(x)) + (1 - a) * float(lim.value(y)), abs=1e-12)


# ---------------------------------------------------------------------------
# upper sums
# ---------------------------------------------------------------------------


def test_upper_sum_finite_support():
    series = TermSeries(finite={1: ExtReal(-1.0)})
    assert float(upper_sum(series)) == -1.0


def test_upper_sum_empty_is_zero():
    assert float(upper_sum(TermSeries(finite={}))) == 0.0


def test_upper_sum_equals_plain_finite_sum():
    rng = np.random.default_rng(5)
    for _ in range(50):
        terms = {int(k): float(rng.normal()) for k in rng.integers(1, 30, size=6)}
        series = TermSeries(finite=terms)
        assert float(upper_sum(series)) == pytest.approx(sum(terms.values()), abs=1e-12)
        j = int(rng.integers(0, 10))
        assert float(upper_sum(series, j=j)) == pytest.approx(
            sum(v for k, v in terms.items() if k > j), abs=1e-12)


def test_upper_sum_infinite_term_dominates():
    assert upper_sum(TermSeries(finite={2: INF, 3: ExtReal(-5.0)})) == INF


def test_upper_sum_tail_zero_on_nonpositive_side():
    # terms (x - 1/k)^+ at x = 0 are all zero
    series = TermSeries(finite={}, tail=PositivePartTail(1.0, 0.0, -1.0, 1))
    assert float(upper_sum(series)) == 0.0
    # oracle: partial sums up to 1e6 are identically zero
    k = np.arange(1, 10**6)
    assert np.maximum(0.0 - 1.0 / k, 0.0).sum() == 0.0


def test_pospart_tail_closed_form_matches_brute_force():
    rng = np.random.default_rng(6)
    for _ in range(60):
        s = -rng.uniform(0.001, 2.0)
        t = rng.uniform(-2.0, 4.0)
        k0 = int(rng.integers(1, 9))
        exact = float(pospart_tail_sum(1.0, s, t, k0))
        kmax = 10000
        brute = sum(max(s + t / k, 0.0) for k in range(k0, kmax))
        assert exact == pytest.approx(brute, abs=1e-9)


def test_pospart_tail_divergence_cases():
    assert pospart_tail_sum(1.0, 0.5, 1.0, 4) == INF
    assert pospart_tail_sum(1.0, 0.0, 2.0, 4) == INF
    assert float(pospart_tail_sum(1.0, 0.0, -1.0, 4)) == 0.0
    assert float(pospart_tail_sum(0.0, 0.5, 1.0, 4)) == 0.0


def test_partial_sums_monotone_for_nonneg_terms():
    # with nonnegative terms the upper sum is the supremum of partial sums
    s, t, k0 = -0.01, 1.0, 3
    terms = [max(s + t / k, 0.0) for k in range(k0, 400)]
    partial = np.cumsum(terms)
    assert np.all(np.diff(partial) >= -1e-15)
    assert float(pospart_tail_sum(1.0, s, t, k0)) == pytest.approx(partial[-1], abs=1e-9)


def test_harmonic_accuracy():
    exact = sum(1.0 / k for k in range(1, 20001))
    assert harmonic(20000) == pytest.approx(exact, abs=1e-11)
    assert harmonic(0) == 0.0
    assert harmonic(3) == pytest.approx(1.0 + 0.5 + 1.0 / 3.0, abs=1e-15)


# ---------------------------------------------------------------------------
# grid diagnostics
# ---------------------------------------------------------------------------


def test_uniform_infimum_indicator_pair():
    # disjoint half-open-style intervals whose closures nearly meet: the
    # decoupled infimum is 0 while the plain sum is +inf everywhere
    n = 129
    spacing = 2.0 / (n - 1)
    i1 = BoxIndicator([spacing], [1.0])
    i2 = BoxIndicator([-1.0], [-spacing])
    est = uniform_infimum_estimate([i1, i2], ([-1.0], [1.0]), 4,
                                   [0.5, 0.25, 0.125], grid_n=n)
    assert est.estimate <= 1e-9
    assert est.grid_inf_sum == math.inf


def test_uniform_infimum_singleton_matches_plain_inf():
    f = ConvexQuadratic([[2.0]], [0.0], 0.25)
    est = uniform_infimum_estimate([f], ([-1.0], [1.0]), 4, [0.2, 0.1], grid_n=129)
    assert est.estimate == pytest.approx(0.25, abs=1e-3)


def test_uniform_infimum_quadratic_pair():
    # oracle: decoupled inf of x^2 + (y-1)^2 under |x - y| -> 0 equals 1/2
    f1 = ConvexQuadratic([[2.0]], [0.0], 0.0)
    f2 = ConvexQuadratic([[2.0]], [-2.0], 1.0)

    def oracle(h, n=4001):
        xs = np.linspace(0.0, 1.0, n)
        best = math.inf
        for x in xs:
            lo = np.searchsorted(xs, x - h)
            hi = np.searchsorted(xs, x + h, side="right")
            window = xs[lo:hi]
            best = min(best, x * x + ((window - 1.0) ** 2).min())
        return best

    o1, o0 = oracle(0.02), oracle(0.01)
    o_extrap = o0 - (o1 - o0) / (0.02 - 0.01) * 0.01
    assert o_extrap == pytest.approx(0.5, abs=2e-3)

    est = uniform_infimum_estimate([f1, f2], ([0.0], [1.0]), 4,
                                   [0.08, 0.04, 0.02], grid_n=257)
    assert est.estimate == pytest.approx(0.5, abs=5e-3)
    assert est.grid_inf_sum == pytest.approx(0.5, abs=1e-4)


def test_uniform_infimum_never_exceeds_grid_sum():
    rng = np.random.default_rng(7)
    for _ in range(10):
        fns = [Affine(rng.normal(size=1), rng.normal()) for _ in range(2)]
        est = uniform_infimum_estimate(fns, ([-1.0], [1.0]), 4, [0.4, 0.2], grid_n=65)
        assert est.estimate <= est.grid_inf_sum + 1e-9


def test_firm_estimate_singleton_zero():
    f = ConvexQuadratic([[2.0]], [0.0], 0.0)
    est = firm_uls_estimate([f], ([-1.0], [1.0]), 4, [0.2], grid_n=33)
    assert est.estimate == pytest.approx(0.0, abs=1e-9)


def test_firm_estimate_indicator_pair_blows_up():
    spacing = 2.0 / 32
    i1 = BoxIndicator([spacing], [1.0])
    i2 = BoxIndicator([-1.0], [-spacing])
    est = firm_uls_estimate([i1, i2], ([-1.0], [1.0]), 4, [0.25], grid_n=33)
    assert est.estimate == math.inf


def test_firm_estimate_identical_quadratics_vanish():
    f = ConvexQuadratic([[2.0]], [0.0], 0.0)
    est = firm_uls_estimate([f, f], ([-1.0], [1.0]), 4, [0.2, 0.1], grid_n=33)
    assert est.estimate <= 0.15  # shrinks with the diameter


def test_firm_estimate_lower_bounded_by_decoupling_gap():
    # the firm quantity dominates (inf of the sum) - (decoupled inf)
    cases = [
        [Affine([1.0], 0.0), Affine([-1.0], 0.0)],
        [ConvexQuadratic([[2.0]], [0.0], 0.0), ConvexQuadratic([[2.0]], [-2.0], 1.0)],
    ]
    for fns in cases:
        lam = uniform_infimum_estimate(fns, ([-1.0], [1.0]), 4, [0.2, 0.1], grid_n=65)
        firm = firm_uls_estimate(fns, ([-1.0], [1.0]), 4, [0.1], grid_n=33)
        assert firm.estimate >= lam.grid_inf_sum - lam.estimate - 0.05


def test_grid_diagnostics_reject_dim3():
    f = Affine([1.0, 0.0, 0.0], 0.0)
    with pytest.raises(ValueError):
        uniform_infimum_estimate([f], ([-1] * 3, [1] * 3), 2, [0.1])
    with pytest.raises(ValueError):
        uniform_infimum_estimate([Affine([1.0], 0.0)], ([-1.0], [1.0]), 2, [])
