import itertools

import numpy as np
import pytest

from icvx.functions import Affine
from icvx.infsum import ConstantTail, ConstraintFamily
from icvx.instances import builtin
from icvx.primal import Instance


@pytest.fixture
def karney():
    return builtin("karney")


@pytest.fixture
def onedim_tail():
    return builtin("onedim_tail")


@pytest.fixture
def padded_qp():
    return builtin("padded_finite_qp")


def classical_qp_dual_value(Q, a, b, A, c):
    """Brute-force KKT enumeration for min 0.5 x'Qx + a'x + b s.t. Ax <= c.

    Enumerates every active set, solves the stationarity system, keeps the
    feasible solution with nonnegative multipliers.  Under strict convexity
    this is the optimum, and its value equals the classical dual value.
    """
    mm = A.shape[0]
    best = None
    for r in range(mm + 1):
        for S in itertools.combinations(range(mm), r):
            S = list(S)
            n = Q.shape[0]
            K = np.zeros((n + len(S), n + len(S)))
            K[:n, :n] = Q
            if S:
                K[:n, n:] = A[S].T
                K[n:, :n] = A[S]
            rhs = np.concatenate([-a, c[S]]) if S else -np.asarray(a, float)
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                continue
            x, mu = sol[:n], sol[n:]
            if np.any(mu < -1e-9):
                continue
            if np.any(A @ x - c > 1e-9):
                continue
            val = 0.5 * x @ Q @ x + a @ x + b
            if best is None or val < best[0]:
                best = (float(val), x, dict(zip(S, mu)))
    return best


def random_padded_qp(rng, name="qp"):
    """Feasible strictly convex QP with 3 affine constraints and a constant
    -1 tail; the anchor point is strictly feasible by construction."""
    dim = 2
    M = rng.uniform(-1.0, 1.0, size=(dim, dim))
    Q = M.T @ M + 0.5 * np.eye(dim)
    a = rng.uniform(-2.0, 2.0, size=dim)
    anchor = rng.uniform(-1.0, 1.0, size=dim)
    rows = []
    for _ in range(3):
        w = rng.uniform(-2.0, 2.0, size=dim)
        rows.append(Affine(w, -float(w @ anchor) - rng.uniform(0.3, 1.0)))
    from icvx.functions import ConvexQuadratic

    family = ConstraintFamily(prefix=tuple(rows),
                              tail=ConstantTail(Affine(np.zeros(dim), -1.0)))
    f0 = ConvexQuadratic(Q, a, 0.0)
    return Instance(name, dim, [-20.0, -20.0], [20.0, 20.0], f0, family)
