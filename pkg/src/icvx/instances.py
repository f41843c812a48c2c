"""Built-in example instances, the JSON file format, and a random generator.

The file schema (documented in docs/format.md):

    {
      "name": str, "dim": int,
      "box": {"lo": [...], "hi": [...], "ambient": bool},
      "objective": <function spec>,
      "constraints": {"prefix": [<function spec>...],
                      "tail": {"kind": "none"}
                            | {"kind": "constant", "fn": <function spec>}
                            | {"kind": "rational_affine",
                               "c": [...], "d": [...], "e": r, "g": r}}
    }

Function specs mirror the expression-tree catalog; numbers are plain JSON
decimals (parsed to double precision), and infinity never appears in files:
indicators are expressed structurally through box_indicator nodes.
Serialization is canonical (fixed field order, dense arrays), so
parse(serialize(x)) is the identity on canonical form.
"""

from __future__ import annotations

import json

import numpy as np

from ._io import canonical_json
from .functions import (
    Affine,
    BoxIndicator,
    ConvexFn,
    ConvexQuadratic,
    MaxAffine,
    PositivePart,
    Scale,
    Shift,
    Sum,
)
from .infsum import ConstantTail, ConstraintFamily, RationalAffineTail
from .primal import Instance

__all__ = [
    "builtin",
    "builtin_names",
    "parse",
    "serialize",
    "InstanceFormatError",
    "random_instance",
    "SLATERLESS",
]

BUILTIN_NAMES = ("karney", "padded_finite_qp", "onedim_tail", "minimax_abs")
# builtins that deliberately violate the strict-feasibility condition
SLATERLESS = frozenset({"minimax_abs"})


class InstanceFormatError(ValueError):
    """Schema violation, carrying the JSON path of the offending field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


# ---------------------------------------------------------------------------
# built-in library
# ---------------------------------------------------------------------------


def builtin(name: str) -> Instance:
    if name == "karney":
        family = ConstraintFamily(
            prefix=(Affine([0.0, -1.0], -1.0), Affine([1.0, 0.0], 0.0)),
            tail=RationalAffineTail(c=[0.0, -1.0], d=[1.0, 0.0], e=0.0, g=0.0),
        )
        return Instance("karney", 2, [-100.0, -100.0], [100.0, 100.0],
                        Affine([0.0, 1.0], 0.0), family, ambient=True)
    if name == "padded_finite_qp":
        family = ConstraintFamily(
            prefix=(
                Affine([1.0, 1.0], -1.0),
                Affine([-1.0, 0.0], -2.0),
                Affine([0.0, 1.0], -2.0),
            ),
            tail=ConstantTail(Affine([0.0, 0.0], -1.0)),
        )
        f0 = ConvexQuadratic([[2.0, 0.5], [0.5, 1.0]], [-2.0, -1.0], 0.0)
        return Instance("padded_finite_qp", 2, [-10.0, -10.0], [10.0, 10.0],
                        f0, family)
    if name == "onedim_tail":
        family = ConstraintFamily(
            prefix=(),
            tail=RationalAffineTail(c=[1.0], d=[0.0], e=0.0, g=-1.0),
        )
        return Instance("onedim_tail", 1, [-2.0], [2.0],
                        ConvexQuadratic([[2.0]], [0.0], 0.0), family)
    if name == "minimax_abs":
        family = ConstraintFamily(
            prefix=(Affine([1.0], 0.0), Affine([-1.0], 0.0)),
            tail=ConstantTail(Affine([0.0], -1.0)),
        )
        return Instance("minimax_abs", 1, [-2.0], [2.0], Affine([0.0], 0.0), family)
    raise KeyError(f"unknown builtin instance {name!r}; see builtin_names()")


def builtin_names() -> tuple:
    return BUILTIN_NAMES


# ---------------------------------------------------------------------------
# function-spec codec
# ---------------------------------------------------------------------------


def _need(doc: dict, key: str, path: str):
    if key not in doc:
        raise InstanceFormatError(path, f"missing field {key!r}")
    return doc[key]


def _numbers(v, path: str) -> list:
    if not isinstance(v, list) or not all(isinstance(x, (int, float)) for x in v):
        raise InstanceFormatError(path, "expected an array of numbers")
    return [float(x) for x in v]


def _number(v, path: str) -> float:
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise InstanceFormatError(path, "expected a number")
    return float(v)


def fn_from_spec(doc, path: str = "fn") -> ConvexFn:
    if not isinstance(doc, dict):
        raise InstanceFormatError(path, "expected an object")
    kind = _need(doc, "kind", path)
    try:
        if kind == "affine":
            return Affine(_numbers(_need(doc, "a", path), f"{path}.a"),
                          _number(_need(doc, "b", path), f"{path}.b"))
        if kind == "quadratic":
            Q = _need(doc, "Q", path)
            if not isinstance(Q, list):
                raise InstanceFormatError(f"{path}.Q", "expected a matrix")
            rows = [_numbers(r, f"{path}.Q[{i}]") for i, r in enumerate(Q)]
            return ConvexQuadratic(rows, _numbers(_need(doc, "a", path), f"{path}.a"),
                                   _number(_need(doc, "b", path), f"{path}.b"))
        if kind == "max_affine":
            pieces = _need(doc, "pieces", path)
            if not isinstance(pieces, list) or not pieces:
                raise InstanceFormatError(f"{path}.pieces", "expected a nonempty array")
            parsed = []
            for i, p in enumerate(pieces):
                parsed.append((_numbers(_need(p, "a", f"{path}.pieces[{i}]"),
                                        f"{path}.pieces[{i}].a"),
                               _number(_need(p, "b", f"{path}.pieces[{i}]"),
                                       f"{path}.pieces[{i}].b")))
            return MaxAffine(tuple(parsed))
        if kind == "box_indicator":
            return BoxIndicator(_numbers(_need(doc, "lo", path), f"{path}.lo"),
                                _numbers(_need(doc, "hi", path), f"{path}.hi"))
        if kind == "scale":
            return Scale(_number(_need(doc, "c", path), f"{path}.c"),
                         fn_from_spec(_need(doc, "child", path), f"{path}.child"))
        if kind == "sum":
            children = _need(doc, "children", path)
            if not isinstance(children, list) or not children:
                raise InstanceFormatError(f"{path}.children", "expected a nonempty array")
            return Sum(tuple(fn_from_spec(ch, f"{path}.children[{i}]")
                             for i, ch in enumerate(children)))
        if kind == "positive_part":
            return PositivePart(fn_from_spec(_need(doc, "child", path), f"{path}.child"))
        if kind == "shift":
            return Shift(fn_from_spec(_need(doc, "child", path), f"{path}.child"),
                         _number(_need(doc, "constant", path), f"{path}.constant"))
    except InstanceFormatError:
        raise
    except ValueError as exc:
        raise InstanceFormatError(path, str(exc)) from exc
    raise InstanceFormatError(f"{path}.kind", f"unknown function kind {kind!r}")


def fn_to_spec(fn: ConvexFn) -> dict:
    if isinstance(fn, Affine):
        return {"kind": "affine", "a": list(map(float, fn.a)), "b": float(fn.b)}
    if isinstance(fn, ConvexQuadratic):
        return {"kind": "quadratic", "Q": [list(map(float, row)) for row in fn.Q],
                "a": list(map(float, fn.a)), "b": float(fn.b)}
    if isinstance(fn, MaxAffine):
        return {"kind": "max_affine",
                "pieces": [{"a": list(map(float, a)), "b": float(b)} for a, b in fn.pieces]}
    if isinstance(fn, BoxIndicator):
        return {"kind": "box_indicator", "lo": list(map(float, fn.lo)),
                "hi": list(map(float, fn.hi))}
    if isinstance(fn, Scale):
        return {"kind": "scale", "c": float(fn.c), "child": fn_to_spec(fn.child)}
    if isinstance(fn, Sum):
        return {"kind": "sum", "children": [fn_to_spec(ch) for ch in fn.children]}
    if isinstance(fn, PositivePart):
        return {"kind": "positive_part", "child": fn_to_spec(fn.child)}
    if isinstance(fn, Shift):
        return {"kind": "shift", "child": fn_to_spec(fn.child), "constant": float(fn.constant)}
    raise TypeError(f"cannot serialize function of type {type(fn).__name__}")


# ---------------------------------------------------------------------------
# instance codec
# ---------------------------------------------------------------------------


def parse(text: str) -> Instance:
    """Parse an instance document; schema violations carry field paths."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"line {exc.lineno}", exc.msg) from exc
    if not isinstance(doc, dict):
        raise InstanceFormatError("$", "expected a top-level object")
    name = _need(doc, "name", "$")
    if not isinstance(name, str):
        raise InstanceFormatError("$.name", "expected a string")
    dim = _need(doc, "dim", "$")
    if not isinstance(dim, int) or dim < 1:
        raise InstanceFormatError("$.dim", "expected a positive integer")
    box = _need(doc, "box", "$")
    lo = _numbers(_need(box, "lo", "$.box"), "$.box.lo")
    hi = _numbers(_need(box, "hi", "$.box"), "$.box.hi")
    ambient = bool(box.get("ambient", False))
    objective = fn_from_spec(_need(doc, "objective", "$"), "$.objective")
    cons = _need(doc, "constraints", "$")
    prefix_doc = _need(cons, "prefix", "$.constraints")
    if not isinstance(prefix_doc, list):
        raise InstanceFormatError("$.constraints.prefix", "expected an array")
    prefix = tuple(fn_from_spec(p, f"$.constraints.prefix[{i}]")
                   for i, p in enumerate(prefix_doc))
    tail_doc = _need(cons, "tail", "$.constraints")
    kind = _need(tail_doc, "kind", "$.constraints.tail")
    if kind == "none":
        tail = None
    elif kind == "constant":
        tail = ConstantTail(fn_from_spec(_need(tail_doc, "fn", "$.constraints.tail"),
                                         "$.constraints.tail.fn"))
    elif kind == "rational_affine":
        tail = RationalAffineTail(
            _numbers(_need(tail_doc, "c", "$.constraints.tail"), "$.constraints.tail.c"),
            _numbers(_need(tail_doc, "d", "$.constraints.tail"), "$.constraints.tail.d"),
            _number(_need(tail_doc, "e", "$.constraints.tail"), "$.constraints.tail.e"),
            _number(_need(tail_doc, "g", "$.constraints.tail"), "$.constraints.tail.g"),
        )
    else:
        raise InstanceFormatError("$.constraints.tail.kind", f"unknown tail kind {kind!r}")
    try:
        family = ConstraintFamily(prefix=prefix, tail=tail, dim_hint=dim)
        return Instance(name, dim, lo, hi, objective, family, ambient=ambient)
    except ValueError as exc:
        raise InstanceFormatError("$", str(exc)) from exc


def serialize(inst: Instance) -> str:
    """Canonical document: fixed field order, dense arrays, stable floats."""
    tail = inst.family.tail
    if tail is None:
        tail_doc = {"kind": "none"}
    elif isinstance(tail, ConstantTail):
        tail_doc = {"kind": "constant", "fn": fn_to_spec(tail.fn)}
    else:
        tail_doc = {"kind": "rational_affine", "c": list(map(float, tail.c)),
                    "d": list(map(float, tail.d)), "e": float(tail.e),
                    "g": float(tail.g)}
    doc = {
        "name": inst.name,
        "dim": int(inst.dim),
        "box": {"lo": list(map(float, inst.lo)), "hi": list(map(float, inst.hi)),
                "ambient": bool(inst.ambient)},
        "objective": fn_to_spec(inst.f0),
        "constraints": {
            "prefix": [fn_to_spec(f) for f in inst.family.prefix],
            "tail": tail_doc,
        },
    }
    return canonical_json(doc)


# ---------------------------------------------------------------------------
# random generator (test suites): Slater point enforced by construction
# ---------------------------------------------------------------------------


def random_instance(rng: np.random.Generator, dim: int = 2, name: str = "random",
                    polyhedral_only: bool = False, with_tail: bool = True) -> Instance:
    """A feasible catalog instance with an interior strictly feasible point.

    Constraints are shifted to be at most -margin at a sampled anchor, so the
    strict-feasibility condition holds by construction.  polyhedral_only
    restricts to affine/max-affine pieces (exact finite cutting-plane runs).
    """
    anchor = rng.uniform(-1.0, 1.0, size=dim)
    margin = rng.uniform(0.3, 1.0)

    def rand_affine():
        a = rng.uniform(-2.0, 2.0, size=dim)
        b = -float(a @ anchor) - margin * rng.uniform(1.0, 2.0)
        return Affine(a, b)

    def rand_maxaffine():
        pieces = []
        for _ in range(rng.integers(2, 4)):
            a = rng.uniform(-2.0, 2.0, size=dim)
            pieces.append((a, -float(a @ anchor) - margin * rng.uniform(1.0, 2.0)))
        return MaxAffine(tuple(pieces))

    def rand_quad_constraint():
        Mx = rng.uniform(-1.0, 1.0, size=(dim, dim))
        Q = Mx.T @ Mx + 0.1 * np.eye(dim)
        a = rng.uniform(-1.0, 1.0, size=dim)
        q0 = 0.5 * float(anchor @ Q @ anchor) + float(a @ anchor)
        return ConvexQuadratic(Q, a, -q0 - margin * rng.uniform(1.0, 2.0))

    if polyhedral_only:
        obj = rand_affine() if rng.random() < 0.5 else rand_maxaffine()
        makers = [rand_affine, rand_affine, rand_maxaffine]
    else:
        Mx = rng.uniform(-1.0, 1.0, size=(dim, dim))
        Q = Mx.T @ Mx + 0.5 * np.eye(dim)
        obj = ConvexQuadratic(Q, rng.uniform(-1.5, 1.5, size=dim), 0.0)
        makers = [rand_affine, rand_affine, rand_maxaffine, rand_quad_constraint]

    n_cons = int(rng.integers(2, 5))
    prefix = tuple(makers[int(rng.integers(0, len(makers)))]() for _ in range(n_cons))

    tail = None
    if with_tail:
        roll = rng.random()
        if roll < 0.4:
            tail = ConstantTail(Affine(np.zeros(dim), -margin))
        elif roll < 0.8:
            c = rng.uniform(-1.0, 1.0, size=dim)
            d = rng.uniform(-1.0, 1.0, size=dim)
            g = rng.uniform(-1.0, 1.0)
            t_anchor = float(d @ anchor) + g
            e = -float(c @ anchor) - max(t_anchor, 0.0) - margin
            tail = RationalAffineTail(c, d, float(e), float(g))
    family = ConstraintFamily(prefix=prefix, tail=tail)
    return Instance(name, dim, [-5.0] * dim, [5.0] * dim, obj, family)
