"""Extended-real scalars: finite floats together with +inf, never -inf.

Arithmetic follows the conventions used everywhere in this library:

    0 * (+inf) = +inf          (a zero weight does not rescue an infinite value)
    (+inf) - (+inf) = +inf     (flagged with a RuntimeWarning diagnostic)
    r + (+inf) = +inf          (finite r)
    r * (+inf) = +inf          (r > 0)

Aggregates adopt inf(empty) = +inf and sup(empty set of nonnegatives) = 0.

A computation whose exact value would be -inf raises MinusInfinityError.
Solvers report such outcomes at the operation level (a distinguished
"unbounded below" result) instead of storing a -inf scalar.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Iterable, Union

__all__ = [
    "ExtReal",
    "MinusInfinityError",
    "INF",
    "ZERO",
    "ext_sum",
    "inf_over",
    "sup_nonneg",
]

Real = Union[int, float]


class MinusInfinityError(ArithmeticError):
    """Raised when an exact extended-real operation would produce -inf."""


@dataclass(frozen=True, slots=True)
class ExtReal:
    """A finite real or +inf. NaN and -inf are rejected at construction."""

    value: float

    def __post_init__(self) -> None:
        v = float(self.value)
        if math.isnan(v):
            raise ValueError("ExtReal cannot hold NaN")
        if v == -math.inf:
            raise MinusInfinityError("ExtReal cannot hold -inf")
        object.__setattr__(self, "value", v)

    @property
    def is_inf(self) -> bool:
        return self.value == math.inf

    @property
    def is_finite(self) -> bool:
        return not self.is_inf

    def __float__(self) -> float:
        return self.value

    def __add__(self, other: "ExtReal | Real") -> "ExtReal":
        o = _coerce(other)
        if self.is_inf or o.is_inf:
            return INF
        return ExtReal(self.value + o.value)

    __radd__ = __add__

    def __sub__(self, other: "ExtReal | Real") -> "ExtReal":
        o = _coerce(other)
        if o.is_inf:
            if self.is_inf:
                warnings.warn(
                    "evaluating (+inf) - (+inf); convention yields +inf",
                    RuntimeWarning,
                    stacklevel=2,
                )
                return INF
            raise MinusInfinityError("finite - (+inf) is -inf")
        if self.is_inf:
            return INF
        return ExtReal(self.value - o.value)

    def scaled(self, c: Real) -> "ExtReal":
        """c * self with the 0 * (+inf) = +inf convention; c < 0 on +inf errors."""
        c = float(c)
        if math.isnan(c):
            raise ValueError("scale cannot be NaN")
        if self.is_inf:
            if c < 0:
                raise MinusInfinityError("negative scale on +inf is -inf")
            return INF
        return ExtReal(c * self.value)

    def __mul__(self, c: Real) -> "ExtReal":
        return self.scaled(c)

    __rmul__ = __mul__

    def __lt__(self, other: "ExtReal | Real") -> bool:
        return self.value < _coerce(other).value

    def __le__(self, other: "ExtReal | Real") -> bool:
        return self.value <= _coerce(other).value

    def __gt__(self, other: "ExtReal | Real") -> bool:
        return self.value > _coerce(other).value

    def __ge__(self, other: "ExtReal | Real") -> bool:
        return self.value >= _coerce(other).value

    def __repr__(self) -> str:
        return "ExtReal(+inf)" if self.is_inf else f"ExtReal({self.value!r})"


def _coerce(x: "ExtReal | Real") -> ExtReal:
    return x if isinstance(x, ExtReal) else ExtReal(float(x))


INF = ExtReal(math.inf)
ZERO = ExtReal(0.0)


def ext_sum(values: Iterable["ExtReal | Real"]) -> ExtReal:
    """Sum with extended-real conventions; the empty sum is 0."""
    total = ZERO
    for v in values:
        total = total + _coerce(v)
    return total


def inf_over(values: Iterable["ExtReal | Real"]) -> ExtReal:
    """Infimum of a finite collection; inf over the empty set is +inf."""
    best = INF
    for v in values:
        v = _coerce(v)
        if v < best:
            best = v
    return best


def sup_nonneg(values: Iterable["ExtReal | Real"]) -> ExtReal:
    """Supremum of a finite collection of nonnegative values; empty sup is 0."""
    best = ZERO
    for v in values:
        v = _coerce(v)
        if v.is_finite and v.value < 0:
            raise ValueError("sup_nonneg requires nonnegative values")
        if v > best:
            best = v
    return best
