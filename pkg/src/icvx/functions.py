"""Expression trees over a closed catalog of convex functions on R^n.

Leaves: Affine, ConvexQuadratic, MaxAffine, BoxIndicator.
Nodes: Scale (nonnegative), Sum, PositivePart, Shift.

Every represented function is proper convex; evaluation returns an ExtReal
and follows the 0 * (+inf) = +inf convention (a Scale(0, f) node is exactly
the indicator of dom f).  Subdifferentials are exact finitely generated sets

    conv(vertices) + cone(rays)

so stationarity certificates downstream need no numerical differentiation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import numpy as np

from .extreal import INF, ExtReal

__all__ = [
    "ConvexFn",
    "Affine",
    "ConvexQuadratic",
    "MaxAffine",
    "BoxIndicator",
    "Scale",
    "Sum",
    "PositivePart",
    "Shift",
    "Subdifferential",
]

# Scale-aware tolerance for deciding active pieces / zeros of positive parts.
ACTIVE_TOL = 1e-11
# Slack for box membership so solver iterates carrying float dust stay inside.
BOX_TOL = 1e-12

_SUBDIFF_VERTEX_CAP = 4096


@dataclass(frozen=True)
class Subdifferential:
    """V-representation conv(vertices) + cone(rays) of a subdifferential."""

    vertices: tuple
    rays: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(np.asarray(v, float) for v in self.vertices))
        object.__setattr__(self, "rays", tuple(np.asarray(r, float) for r in self.rays))


def _vec(a, dim=None) -> np.ndarray:
    a = np.asarray(a, dtype=float).reshape(-1)
    if dim is not None and a.shape[0] != dim:
        raise ValueError(f"expected vector of length {dim}, got {a.shape[0]}")
    a.setflags(write=False)
    return a


def _check_point(x, dim) -> np.ndarray:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != dim:
        raise ValueError(f"point has dimension {x.shape[0]}, function expects {dim}")
    return x


class ConvexFn:
    """Base class; concrete nodes implement the full oracle protocol."""

    dim: int

    # -- evaluation ---------------------------------------------------------
    def value(self, x) -> ExtReal:
        raise NotImplementedError

    def value_many(self, X: np.ndarray) -> np.ndarray:
        """Vectorized evaluation on rows of X; +inf entries use np.inf."""
        raise NotImplementedError

    # -- subdifferential calculus -------------------------------------------
    def subdiff(self, x) -> Subdifferential:
        """Exact subdifferential at x; requires value(x) finite."""
        x = _check_point(x, self.dim)
        if self.value(x).is_inf:
            raise ValueError("subdifferential requested outside the domain")
        return self._subdiff(x)

    def _subdiff(self, x) -> Subdifferential:
        raise NotImplementedError

    def any_subgradient(self, x) -> np.ndarray:
        """One subgradient at x, cheap selection used by cutting planes."""
        raise NotImplementedError

    def domain_rays(self, x) -> list:
        """Generators of the normal cone of dom f at x (empty if interior)."""
        return []

    def domain_cuts(self, x) -> list:
        """Affine cuts (a, b) with a.y <= b valid on dom f and violated at x."""
        return []

    @property
    def has_indicator(self) -> bool:
        return False

    def __call__(self, x) -> ExtReal:
        return self.value(x)


@dataclass(frozen=True, eq=False)
class Affine(ConvexFn):
    """f(x) = <a, x> + b."""

    a: np.ndarray
    b: float
    dim: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "a", _vec(self.a))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "dim", self.a.shape[0])

    def value(self, x) -> ExtReal:
        x = _check_point(x, self.dim)
        return ExtReal(float(self.a @ x) + self.b)

    def value_many(self, X):
        return X @ self.a + self.b

    def _subdiff(self, x):
        return Subdifferential((self.a,))

    def any_subgradient(self, x):
        return self.a


@dataclass(frozen=True, eq=False)
class ConvexQuadratic(ConvexFn):
    """f(x) = 0.5 x'Qx + <a, x> + b with Q symmetric PSD."""

    Q: np.ndarray
    a: np.ndarray
    b: float
    dim: int = field(init=False)

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError("Q must be a square matrix")
        if not np.allclose(Q, Q.T, atol=1e-10):
            raise ValueError("Q must be symmetric")
        eigs = np.linalg.eigvalsh(Q)
        if eigs.min() < -1e-9 * max(1.0, abs(eigs.max())):
            raise ValueError("Q is not positive semidefinite")
        Q.setflags(write=False)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "a", _vec(self.a, Q.shape[0]))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "dim", Q.shape[0])

    def value(self, x) -> ExtReal:
        x = _check_point(x, self.dim)
        return ExtReal(0.5 * float(x @ self.Q @ x) + float(self.a @ x) + self.b)

    def value_many(self, X):
        return 0.5 * np.einsum("mi,ij,mj->m", X, self.Q, X) + X @ self.a + self.b

    def _subdiff(self, x):
        return Subdifferential((self.Q @ x + self.a,))

    def any_subgradient(self, x):
        return self.Q @ x + self.a


@dataclass(frozen=True, eq=False)
class MaxAffine(ConvexFn):
    """f(x) = max_i (<a_i, x> + b_i) over a nonempty list of pieces."""

    pieces: tuple
    dim: int = field(init=False)

    def __post_init__(self):
        if len(self.pieces) == 0:
            raise ValueError("MaxAffine needs at least one piece")
        pieces = tuple((_vec(a), float(b)) for a, b in self.pieces)
        dims = {a.shape[0] for a, _ in pieces}
        if len(dims) != 1:
            raise ValueError("MaxAffine pieces disagree on dimension")
        object.__setattr__(self, "pieces", pieces)
        object.__setattr__(self, "dim", dims.pop())

    def _piece_values(self, x):
        return np.array([float(a @ x) + b for a, b in self.pieces])

    def value(self, x) -> ExtReal:
        x = _check_point(x, self.dim)
        return ExtReal(float(self._piece_values(x).max()))

    def value_many(self, X):
        vals = np.stack([X @ a + b for a, b in self.pieces], axis=0)
        return vals.max(axis=0)

    def _subdiff(self, x):
        vals = self._piece_values(x)
        top = vals.max()
        tol = ACTIVE_TOL * (1.0 + abs(top))
        verts = tuple(self.pieces[i][0] for i in range(len(self.pieces)) if top - vals[i] <= tol)
        return Subdifferential(verts)

    def any_subgradient(self, x):
        vals = self._piece_values(x)
        return self.pieces[int(np.argmax(vals))][0]


@dataclass(frozen=True, eq=False)
class BoxIndicator(ConvexFn):
    """Indicator of the box {lo <= x <= hi}: 0 inside, +inf outside."""

    lo: np.ndarray
    hi: np.ndarray
    dim: int = field(init=False)

    def __post_init__(self):
        lo = _vec(self.lo)
        hi = _vec(self.hi, lo.shape[0])
        if np.any(lo > hi):
            raise ValueError("box has lo > hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "dim", lo.shape[0])

    def _inside(self, x):
        tol = BOX_TOL * (1.0 + np.maximum(np.abs(self.lo), np.abs(self.hi)))
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def value(self, x) -> ExtReal:
        x = _check_point(x, self.dim)
        return ExtReal(0.0) if self._inside(x) else INF

    def value_many(self, X):
        tol = BOX_TOL * (1.0 + np.maximum(np.abs(self.lo), np.abs(self.hi)))
        inside = np.all(X >= self.lo - tol, axis=1) & np.all(X <= self.hi + tol, axis=1)
        return np.where(inside, 0.0, np.inf)

    def _subdiff(self, x):
        return Subdifferential((np.zeros(self.dim),), tuple(self.domain_rays(x)))

    def any_subgradient(self, x):
        return np.zeros(self.dim)

    def domain_rays(self, x):
        x = _check_point(x, self.dim)
        rays = []
        for i in range(self.dim):
            tol = ACTIVE_TOL * (1.0 + abs(self.hi[i]) + abs(self.lo[i]))
            e = np.zeros(self.dim)
            if x[i] >= self.hi[i] - tol:
                e_up = e.copy()
                e_up[i] = 1.0
                rays.append(e_up)
            if x[i] <= self.lo[i] + tol:
                e_dn = e.copy()
                e_dn[i] = -1.0
                rays.append(e_dn)
        return rays

    def domain_cuts(self, x):
        x = _check_point(x, self.dim)
        cuts = []
        for i in range(self.dim):
            e = np.zeros(self.dim)
            if x[i] > self.hi[i]:
                e[i] = 1.0
                cuts.append((e, float(self.hi[i])))
            elif x[i] < self.lo[i]:
                e[i] = -1.0
                cuts.append((e, -float(self.lo[i])))
        return cuts

    @property
    def has_indicator(self) -> bool:
        return True


@dataclass(frozen=True, eq=False)
class Scale(ConvexFn):
    """c * child for c >= 0; Scale(0, f) is the indicator of dom f."""

    c: float
    child: ConvexFn
    dim: int = field(init=False)

    def __post_init__(self):
        c = float(self.c)
        if c < 0:
            raise ValueError("Scale requires a nonnegative factor")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "dim", self.child.dim)

    def value(self, x) -> ExtReal:
        return self.child.value(x).scaled(self.c)

    def value_many(self, X):
        v = self.child.value_many(X)
        if self.c == 0.0:
            return np.where(np.isinf(v), np.inf, 0.0)
        return self.c * v

    def _subdiff(self, x):
        if self.c == 0.0:
            return Subdifferential((np.zeros(self.dim),), tuple(self.child.domain_rays(x)))
        sd = self.child.subdiff(x)
        return Subdifferential(tuple(self.c * v for v in sd.vertices), sd.rays)

    def any_subgradient(self, x):
        if self.c == 0.0:
            return np.zeros(self.dim)
        return self.c * self.child.any_subgradient(x)

    def domain_rays(self, x):
        return self.child.domain_rays(x)

    def domain_cuts(self, x):
        return self.child.domain_cuts(x)

    @property
    def has_indicator(self) -> bool:
        return self.child.has_indicator


@dataclass(frozen=True, eq=False)
class Sum(ConvexFn):
    """Sum of children (at least one, all with the same dimension)."""

    children: tuple
    dim: int = field(init=False)

    def __post_init__(self):
        children = tuple(self.children)
        if not children:
            raise ValueError("Sum needs at least one child")
        dims = {f.dim for f in children}
        if len(dims) != 1:
            raise ValueError("Sum children disagree on dimension")
        object.__setattr__(self, "children", children)
        object.__setattr__(self, "dim", dims.pop())

    def value(self, x) -> ExtReal:
        total = ExtReal(0.0)
        for f in self.children:
            total = total + f.value(x)
        return total

    def value_many(self, X):
        total = np.zeros(X.shape[0])
        for f in self.children:
            total = total + f.value_many(X)
        return total

    def _subdiff(self, x):
        verts = [np.zeros(self.dim)]
        rays = []
        for f in self.children:
            sd = f.subdiff(x)
            if len(verts) * len(sd.vertices) > _SUBDIFF_VERTEX_CAP:
                raise RuntimeError("subdifferential vertex count exceeds the desk-scale cap")
            verts = [v + w for v in verts for w in sd.vertices]
            rays.extend(sd.rays)
        return Subdifferential(tuple(verts), tuple(rays))

    def any_subgradient(self, x):
        g = np.zeros(self.dim)
        for f in self.children:
            g = g + f.any_subgradient(x)
        return g

    def domain_rays(self, x):
        rays = []
        for f in self.children:
            rays.extend(f.domain_rays(x))
        return rays

    def domain_cuts(self, x):
        cuts = []
        for f in self.children:
            if f.value(x).is_inf:
                cuts.extend(f.domain_cuts(x))
        return cuts

    @property
    def has_indicator(self) -> bool:
        return any(f.has_indicator for f in self.children)


@dataclass(frozen=True, eq=False)
class PositivePart(ConvexFn):
    """max(child, 0), exact: at a zero of the child the subdifferential is
    conv({0} U subdiff(child)), i.e. the [0,1]-scaled child subdifferential."""

    child: ConvexFn
    dim: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "dim", self.child.dim)

    def value(self, x) -> ExtReal:
        v = self.child.value(x)
        if v.is_inf:
            return INF
        return ExtReal(max(v.value, 0.0))

    def value_many(self, X):
        return np.maximum(self.child.value_many(X), 0.0)

    def _subdiff(self, x):
        v = float(self.child.value(x))
        tol = ACTIVE_TOL * (1.0 + abs(v))
        zero = np.zeros(self.dim)
        if v > tol:
            return self.child.subdiff(x)
        if v < -tol:
            return Subdifferential((zero,), tuple(self.child.domain_rays(x)))
        sd = self.child.subdiff(x)
        return Subdifferential(sd.vertices + (zero,), sd.rays)

    def any_subgradient(self, x):
        v = float(self.child.value(x))
        if v > ACTIVE_TOL * (1.0 + abs(v)):
            return self.child.any_subgradient(x)
        return np.zeros(self.dim)

    def domain_rays(self, x):
        return self.child.domain_rays(x)

    def domain_cuts(self, x):
        return self.child.domain_cuts(x)

    @property
    def has_indicator(self) -> bool:
        return self.child.has_indicator


@dataclass(frozen=True, eq=False)
class Shift(ConvexFn):
    """child + constant."""

    child: ConvexFn
    constant: float
    dim: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "constant", float(self.constant))
        object.__setattr__(self, "dim", self.child.dim)

    def value(self, x) -> ExtReal:
        return self.child.value(x) + self.constant

    def value_many(self, X):
        return self.child.value_many(X) + self.constant

    def _subdiff(self, x):
        return self.child.subdiff(x)

    def any_subgradient(self, x):
        return self.child.any_subgradient(x)

    def domain_rays(self, x):
        return self.child.domain_rays(x)

    def domain_cuts(self, x):
        return self.child.domain_cuts(x)

    @property
    def has_indicator(self) -> bool:
        return self.child.has_indicator


def zero_fn(dim: int) -> Affine:
    return Affine(np.zeros(dim), 0.0)
