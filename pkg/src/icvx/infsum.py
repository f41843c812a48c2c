"""Countable constraint families with analytic tails and their exact series.

A ConstraintFamily is a finite prefix of catalog functions plus an optional
tail describing f_k for every k beyond the prefix:

  * ConstantTail(f):          f_k = f for all tail indices,
  * RationalAffineTail:       f_k(x) = <c + d/k, x> + e + g/k.

Both tail classes give the limit function lim_k f_k and every weighted tail
series a closed form, so upper sums (limits of partial sums) are computed
exactly instead of being truncated numerically.

The module also carries the grid-based diagnostics for the decoupled
uniform-infimum of a finite collection and its firm variant.  Those two are
heuristic evidence producers (documented as such), not certified quantities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Union

import numpy as np
from scipy.ndimage import minimum_filter

from .extreal import INF, ExtReal, ext_sum
from .functions import Affine, ConvexFn, MaxAffine

__all__ = [
    "ConstantTail",
    "RationalAffineTail",
    "ConstraintFamily",
    "tail_limit_value",
    "PositivePartTail",
    "TermSeries",
    "upper_sum",
    "pospart_tail_sum",
    "harmonic",
    "uniform_infimum_estimate",
    "firm_uls_estimate",
    "GridEstimate",
]

DIVERGENCE_CAP = 1e12

_EULER_GAMMA = 0.5772156649015328606
_H_TABLE_SIZE = 4096
_H_TABLE = np.concatenate([[0.0], np.cumsum(1.0 / np.arange(1, _H_TABLE_SIZE + 1))])


def harmonic(n: int) -> float:
    """H_n = 1 + 1/2 + ... + 1/n, exact table for small n, asymptotic beyond."""
    if n < 0:
        raise ValueError("harmonic index must be nonnegative")
    if n <= _H_TABLE_SIZE:
        return float(_H_TABLE[n])
    ninv = 1.0 / n
    return math.log(n) + _EULER_GAMMA + 0.5 * ninv - ninv * ninv / 12.0 + ninv**4 / 120.0


@dataclass(frozen=True, eq=False)
class ConstantTail:
    """Tail f_k = fn for every index past the prefix."""

    fn: ConvexFn

    def member(self, k: int) -> ConvexFn:
        return self.fn

    def limit_fn(self, dim: int) -> ConvexFn:
        return self.fn

    def sup_fn(self, first_k: int) -> ConvexFn:
        return self.fn


@dataclass(frozen=True, eq=False)
class RationalAffineTail:
    """Tail f_k(x) = <c + d/k, x> + e + g/k."""

    c: np.ndarray
    d: np.ndarray
    e: float
    g: float

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float).reshape(-1)
        d = np.asarray(self.d, dtype=float).reshape(-1)
        if c.shape != d.shape:
            raise ValueError("c and d must have the same dimension")
        c.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "e", float(self.e))
        object.__setattr__(self, "g", float(self.g))

    def member(self, k: int) -> ConvexFn:
        return Affine(self.c + self.d / k, self.e + self.g / k)

    def limit_fn(self, dim: int) -> ConvexFn:
        return Affine(self.c, self.e)

    def sup_fn(self, first_k: int) -> ConvexFn:
        # sup over k >= first_k of s + t/k equals max(s, s + t/first_k):
        # the first member when t >= 0, the limit function when t < 0.
        return MaxAffine(((self.c, self.e), (self.c + self.d / first_k, self.e + self.g / first_k)))

    def limit_parts(self, x) -> tuple:
        """(s, t) with f_k(x) = s + t/k."""
        x = np.asarray(x, dtype=float).reshape(-1)
        return float(self.c @ x) + self.e, float(self.d @ x) + self.g


Tail = Union[ConstantTail, RationalAffineTail, None]


@dataclass(frozen=True, eq=False)
class ConstraintFamily:
    """Indexed family k -> f_k: explicit prefix for k <= P, analytic tail beyond.

    An empty family (no prefix, no tail) models an unconstrained problem and
    needs an explicit dimension hint."""

    prefix: tuple
    tail: Tail = None
    dim_hint: Optional[int] = None
    dim: int = field(init=False)

    def __post_init__(self):
        prefix = tuple(self.prefix)
        dims = {f.dim for f in prefix}
        if isinstance(self.tail, RationalAffineTail):
            dims.add(self.tail.c.shape[0])
        elif isinstance(self.tail, ConstantTail):
            dims.add(self.tail.fn.dim)
        if self.dim_hint is not None:
            dims.add(int(self.dim_hint))
        if len(dims) > 1:
            raise ValueError("family members disagree on dimension")
        if not dims:
            raise ValueError("an empty family needs a dimension hint")
        object.__setattr__(self, "prefix", prefix)
        object.__setattr__(self, "dim", dims.pop())

    @property
    def is_empty(self) -> bool:
        return not self.prefix and self.tail is None

    @property
    def num_prefix(self) -> int:
        return len(self.prefix)

    @property
    def has_tail(self) -> bool:
        return self.tail is not None

    def member(self, k: int) -> ConvexFn:
        if k < 1:
            raise IndexError("family indices start at 1")
        if k <= len(self.prefix):
            return self.prefix[k - 1]
        if self.tail is None:
            raise IndexError(f"finite family has no member {k}")
        return self.tail.member(k)

    def limit_fn(self) -> ConvexFn:
        if self.tail is None:
            raise ValueError("limit function undefined for a finite family")
        return self.tail.limit_fn(self.dim)

    def tail_sup_fn(self, after: Optional[int] = None) -> Optional[ConvexFn]:
        """Exact sup over tail indices k > max(after, prefix length)."""
        if self.tail is None:
            return None
        first = max(len(self.prefix), after or 0) + 1
        return self.tail.sup_fn(first)


def tail_limit_value(fam: ConstraintFamily, x) -> ExtReal:
    """lim sup_k f_k(x), exact for the tail catalog."""
    return fam.limit_fn().value(x)


# ---------------------------------------------------------------------------
# upper sums
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PositivePartTail:
    """Terms tau * max(s + t/k, 0) for k >= start, constant weight tau >= 0."""

    tau: float
    s: float
    t: float
    start: int

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("tail weight must be nonnegative")
        if self.start < 1:
            raise ValueError("tail start index must be >= 1")


@dataclass(frozen=True)
class TermSeries:
    """Indexed terms with finite support plus an optional analytic tail."""

    finite: Mapping[int, Union[float, ExtReal]]
    tail: Optional[PositivePartTail] = None


def pospart_tail_sum(tau: float, s: float, t: float, k0: int) -> ExtReal:
    """sum_{k >= k0} tau * max(s + t/k, 0) in closed form.

    Diverges (+inf) when the limit s is positive, or when s = 0 with t > 0
    (harmonic divergence); otherwise only finitely many terms are positive.
    """
    if tau == 0.0:
        return ExtReal(0.0)
    tol = 0.0
    if s > tol:
        return INF
    if s == 0.0:
        return INF if t > 0 else ExtReal(0.0)
    if t <= 0:
        return ExtReal(0.0)
    # s < 0 < t: terms positive for k < t / (-s)
    kmax = int(math.floor(t / (-s)))
    while kmax >= k0 and s + t / kmax <= 0.0:
        kmax -= 1
    if kmax < k0:
        return ExtReal(0.0)
    count = kmax - k0 + 1
    total = tau * (count * s + t * (harmonic(kmax) - harmonic(k0 - 1)))
    if total > DIVERGENCE_CAP:
        return INF
    return ExtReal(total)


def upper_sum(series: TermSeries, j: int = 0) -> ExtReal:
    """Upper limit of the partial sums sum_{k=j+1..n} as n grows.

    Finite-support parts are summed outright (the partial sums are eventually
    constant); the analytic tail uses its closed form.  Any +inf term makes
    the result +inf.
    """
    total = ext_sum(v for k, v in series.finite.items() if k > j)
    if series.tail is not None:
        tail = series.tail
        total = total + pospart_tail_sum(tail.tau, tail.s, tail.t, max(tail.start, j + 1))
    if total.is_finite and abs(total.value) > DIVERGENCE_CAP:
        return INF
    return total


# ---------------------------------------------------------------------------
# grid diagnostics for the decoupled (uniform) infimum and its firm variant
# ---------------------------------------------------------------------------


@dataclass
class GridEstimate:
    estimate: float  # +inf encoded as math.inf
    trace: list  # [(h, value)] per requested diameter
    grid_inf_sum: float  # plain grid infimum of the summed collection
    extrapolated: bool


def _grid_axes(lo, hi, n):
    return [np.linspace(lo[i], hi[i], n) for i in range(len(lo))]


def _grid_points(axes):
    if len(axes) == 1:
        return axes[0][:, None]
    A, B = np.meshgrid(axes[0], axes[1], indexing="ij")
    return np.stack([A.ravel(), B.ravel()], axis=1)


def uniform_infimum_estimate(fns, box, s_max: int, h_grid, grid_n: int = 65) -> GridEstimate:
    """Grid estimate of the decoupled infimum: each function is evaluated at
    its own point, the points constrained to lie within a common diameter h.

    Heuristic diagnostic (dimension <= 2): for each h the infimum over
    near-coincident tuples is lower-bounded on the grid by anchoring a window
    of radius h/2 at every grid point and summing per-function window minima.
    The headline estimate extrapolates the trace linearly to h = 0.
    """
    lo, hi = np.asarray(box[0], float).reshape(-1), np.asarray(box[1], float).reshape(-1)
    dim = lo.shape[0]
    if dim > 2:
        raise ValueError("grid diagnostics support dimension <= 2 only")
    if len(h_grid) == 0:
        raise ValueError("h_grid must be nonempty")
    fns = list(fns)[: max(1, s_max)]
    axes = _grid_axes(lo, hi, grid_n)
    pts = _grid_points(axes)
    spacing = max(float(a[1] - a[0]) for a in axes) if grid_n > 1 else 0.0

    shape = (grid_n,) * dim
    values = [f.value_many(pts).reshape(shape) for f in fns]

    summed = np.zeros(shape)
    for v in values:
        summed = summed + v
    grid_inf_sum = float(summed.min())
    if grid_inf_sum > DIVERGENCE_CAP:
        grid_inf_sum = math.inf

    trace = []
    effective = []
    for h in h_grid:
        if h < 0:
            raise ValueError("diameters must be nonnegative")
        r = int(math.floor((h / 2.0) / spacing + 1e-12)) if spacing > 0 else 0
        size = 2 * r + 1
        best = np.zeros(shape)
        for v in values:
            filt = minimum_filter(v, size=size, mode="nearest") if r > 0 else v
            best = best + filt
        val = float(best.min())
        trace.append((float(h), math.inf if val > DIVERGENCE_CAP else val))
        effective.append(2.0 * r * spacing)

    # extrapolate on the effective window diameters (the nominal h rounds
    # down to whole grid cells); the estimate can never exceed the plain
    # grid infimum of the summed collection
    estimate, extrapolated = _extrapolate(
        [(eff, v) for eff, (_, v) in zip(effective, trace)])
    if math.isfinite(grid_inf_sum):
        estimate = min(estimate, grid_inf_sum)
    return GridEstimate(estimate, trace, grid_inf_sum, extrapolated)


def firm_uls_estimate(fns, box, s_max: int, h_grid, grid_n: int = 33,
                      tuple_cap: int = 4000) -> GridEstimate:
    """Grid estimate of the firm decoupling gap of a finite collection.

    For each diameter h and each near-coincident tuple (x_t) on the grid the
    inner quantity is min over grid x of max(max_t |x - x_t|, sum_t f_t(x) -
    sum_t f_t(x_t)); the estimate takes the worst tuple.  Zero indicates the
    firm variant of uniform lower semicontinuity on the box.
    """
    lo, hi = np.asarray(box[0], float).reshape(-1), np.asarray(box[1], float).reshape(-1)
    dim = lo.shape[0]
    if dim > 2:
        raise ValueError("grid diagnostics support dimension <= 2 only")
    if len(h_grid) == 0:
        raise ValueError("h_grid must be nonempty")
    fns = list(fns)[: max(1, s_max)]
    axes = _grid_axes(lo, hi, grid_n)
    pts = _grid_points(axes)
    spacing = max(float(a[1] - a[0]) for a in axes) if grid_n > 1 else 0.0

    values = [f.value_many(pts) for f in fns]
    summed = np.zeros(pts.shape[0])
    for v in values:
        summed = summed + v

    grid_inf_sum = float(summed.min())
    if grid_inf_sum > DIVERGENCE_CAP:
        grid_inf_sum = math.inf

    trace = []
    for h in h_grid:
        r = (h / 2.0) + 1e-12
        worst = -math.inf
        for ci in range(pts.shape[0]):
            c = pts[ci]
            near = np.max(np.abs(pts - c), axis=1) <= r
            cand = [np.where(near & np.isfinite(v))[0] for v in values]
            if any(len(idx) == 0 for idx in cand):
                continue
            combos = [[idx[0] for idx in cand]]
            total = 1
            for idx in cand:
                total *= len(idx)
            if total <= tuple_cap:
                combos = _product(cand)
            for tup in combos:
                base = sum(float(values[t][i]) for t, i in enumerate(tup))
                dists = np.zeros(pts.shape[0])
                for t, i in enumerate(tup):
                    dists = np.maximum(dists, np.linalg.norm(pts - pts[i], axis=1))
                inner = float(np.min(np.maximum(dists, summed - base)))
                worst = max(worst, inner)
        if worst == -math.inf:
            worst = math.inf  # no admissible tuple: domains never meet
        trace.append((float(h), math.inf if worst > DIVERGENCE_CAP else worst))

    # the firm quantity is an upper limit as h -> 0: report the finest-h value
    estimate = trace[-1][1]
    return GridEstimate(estimate, trace, grid_inf_sum, extrapolated=False)


def _product(index_lists):
    combos = [[]]
    for idx in index_lists:
        combos = [c + [i] for c in combos for i in idx]
    return [tuple(c) for c in combos]


def _extrapolate(trace):
    finite = [(h, v) for h, v in trace if math.isfinite(v)]
    if finite and finite[-1][0] == 0.0:
        return finite[-1][1], False
    if len(finite) >= 2 and finite[-1][0] < finite[-2][0]:
        (h1, v1), (h0, v0) = finite[-2], finite[-1]
        slope = (v1 - v0) / (h1 - h0)
        return v0 - slope * h0, True
    if finite:
        return finite[-1][1], False
    return math.inf, False
