"""Minimum-norm point of a weighted Minkowski sum of polytope+cone sets.

The input is a list of Subdifferential sets S_i = conv(V_i) + cone(R_i) and
nonnegative scales c_i; the target set is

    M = sum_i ( c_i * conv(V_i) + cone(R_i) ).

Cones survive a zero scale: that is exactly the normal-cone convention for a
zero multiplier on an indicator-type constraint.  Rays are truncated at a
large radius and the result is checked to be interior to that truncation.

Solved by Wolfe's nearest-point algorithm driven by a linear minimization
oracle, which decomposes over the sum, so the vertex sets are never expanded
into a combinatorial product.  Ambient dimension here is tiny (<= 3), hence
the active set ("corral") never exceeds dim + 1 atoms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .functions import Subdifferential

__all__ = ["min_norm_point", "MinNormResult"]

RAY_BOUND = 1e6


@dataclass
class MinNormResult:
    point: np.ndarray
    norm: float
    vertex_weights: list  # per set: convex weights over its vertices
    ray_weights: list  # per set: nonnegative magnitudes per ray
    iterations: int
    gap: float
    flags: list = field(default_factory=list)

    def decompose(self, sets, scales):
        """Reassemble the point from the stored weights (feasibility check)."""
        total = np.zeros_like(self.point)
        for sd, c, w, mu in zip(sets, scales, self.vertex_weights, self.ray_weights):
            pt = np.zeros_like(self.point)
            for wi, v in zip(w, sd.vertices):
                pt = pt + wi * np.asarray(v, float)
            total = total + c * pt
            for mi, r in zip(mu, sd.rays):
                total = total + mi * np.asarray(r, float)
        return total


class _Atom:
    __slots__ = ("z", "choices", "ray_on")

    def __init__(self, z, choices, ray_on):
        self.z = z
        self.choices = choices  # per set: chosen vertex index
        self.ray_on = ray_on  # per set: tuple of 0/1 per ray


def _lmo(d, sets, scales, ray_bound):
    """argmin over M of <d, z>, decomposed set by set and ray by ray."""
    dim = d.shape[0]
    z = np.zeros(dim)
    choices = []
    ray_on = []
    for sd, c in zip(sets, scales):
        scores = [float(d @ v) for v in sd.vertices]
        j = int(np.argmin(scores))
        choices.append(j)
        z = z + c * sd.vertices[j]
        on = []
        for r in sd.rays:
            if float(d @ r) < 0.0:
                on.append(1)
                z = z + ray_bound * np.asarray(r, float)
            else:
                on.append(0)
        ray_on.append(tuple(on))
    return _Atom(z, tuple(choices), tuple(ray_on))


def _affine_min_norm(Z):
    """Coefficients (sum to one, free sign) minimizing ||Z' alpha||."""
    k = Z.shape[0]
    G = Z @ Z.T
    A = np.zeros((k + 1, k + 1))
    A[:k, :k] = G
    A[:k, k] = 1.0
    A[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[k] = 1.0
    try:
        sol = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError:
        sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
    return sol[:k]


def min_norm_point(sets, scales, tol: float = 1e-9, ray_bound: float = RAY_BOUND,
                   max_iter: int = 200):
    """Minimum-norm element of sum_i (scale_i conv(V_i) + cone(R_i)).

    Returns a MinNormResult carrying the point, its norm and an explicit
    decomposition into per-set convex combinations and ray magnitudes.
    """
    if len(sets) == 0:
        raise ValueError("min_norm_point needs at least one set")
    if len(scales) != len(sets):
        raise ValueError("scales and sets must have the same length")
    scales = [float(c) for c in scales]
    if any(c < 0 for c in scales):
        raise ValueError("scales must be nonnegative")
    for sd in sets:
        if len(sd.vertices) == 0:
            raise ValueError("every set needs at least one vertex")
    dim = np.asarray(sets[0].vertices[0], float).shape[0]

    atoms = [_lmo(np.zeros(dim), sets, scales, ray_bound)]
    alphas = np.array([1.0])
    x = atoms[0].z.copy()

    gap = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        new = _lmo(x, sets, scales, ray_bound)
        gap = float(x @ x) - float(x @ new.z)
        if gap <= max(tol * tol, tol * np.linalg.norm(x)):
            break
        if not any(np.allclose(new.z, a.z, atol=1e-14) for a in atoms):
            atoms.append(new)
            alphas = np.append(alphas, 0.0)
        else:
            break  # oracle repeats an atom: numerically converged

        # minor cycle: affine minimization over the corral, trimming
        # atoms whose coefficient would go negative
        while True:
            Z = np.stack([a.z for a in atoms])
            beta = _affine_min_norm(Z)
            if beta.min() >= -1e-12:
                alphas = np.maximum(beta, 0.0)
                alphas = alphas / alphas.sum()
                x = Z.T @ alphas
                break
            neg = beta < -1e-12
            denom = alphas[neg] - beta[neg]
            theta = float(np.min(alphas[neg] / denom))
            alphas = theta * beta + (1.0 - theta) * alphas
            keep = alphas > 1e-14
            if keep.all():
                keep[int(np.argmin(alphas))] = False
            atoms = [a for a, k in zip(atoms, keep) if k]
            alphas = alphas[keep]
            alphas = alphas / alphas.sum()
            x = np.stack([a.z for a in atoms]).T @ alphas

    # fold atom coefficients into per-set vertex weights and ray magnitudes
    vertex_weights = []
    ray_weights = []
    for i, sd in enumerate(sets):
        w = np.zeros(len(sd.vertices))
        mu = np.zeros(len(sd.rays))
        for alpha, atom in zip(alphas, atoms):
            w[atom.choices[i]] += alpha
            for r_idx, on in enumerate(atom.ray_on[i]):
                if on:
                    mu[r_idx] += alpha * ray_bound
        vertex_weights.append(w)
        ray_weights.append(mu)

    flags = []
    for mu in ray_weights:
        if len(mu) and mu.max() > 0.9 * ray_bound:
            flags.append("ray_truncation_active")
            break

    return MinNormResult(
        point=x,
        norm=float(np.linalg.norm(x)),
        vertex_weights=vertex_weights,
        ray_weights=ray_weights,
        iterations=it,
        gap=max(gap, 0.0),
        flags=flags,
    )
