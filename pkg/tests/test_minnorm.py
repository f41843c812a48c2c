import itertools

import numpy as np
import pytest

from icvx.functions import Subdifferential
from icvx.minnorm import min_norm_point


def brute_force_min_norm(sets, scales, grid=41, ray_probe=8.0):
    """Independent oracle: dense enumeration over convex/conic coefficients."""
    ticks = np.linspace(0.0, 1.0, grid)
    best = np.inf

    def points_of(sd, scale):
        pts = []
        verts = [np.asarray(v, float) for v in sd.vertices]
        if len(verts) == 1:
            combos = [verts[0]]
        elif len(verts) == 2:
            combos = [t * verts[0] + (1 - t) * verts[1] for t in ticks]
        else:
            combos = []
            for w in itertools.product(ticks, repeat=len(verts) - 1):
                if sum(w) <= 1.0 + 1e-12:
                    rest = 1.0 - sum(w)
                    combos.append(sum(wi * v for wi, v in zip(w, verts[:-1])) + rest * verts[-1])
        out = []
        for base in combos:
            base = scale * base
            if not sd.rays:
                out.append(base)
            else:
                for mu in np.linspace(0.0, ray_probe, grid):
                    for r in sd.rays:
                        out.append(base + mu * np.asarray(r, float))
        return out

    pools = [points_of(sd, c) for sd, c in zip(sets, scales)]
    for combo in itertools.product(*pools):
        z = sum(combo)
        best = min(best, float(np.linalg.norm(z)))
    return best


def test_two_singletons_cancel():
    res = min_norm_point([Subdifferential(([0.0, 1.0],)),
                          Subdifferential(([0.0, -1.0],))], [1.0, 1.0])
    assert np.allclose(res.point, [0.0, 0.0])
    assert res.norm == 0.0


def test_singleton():
    res = min_norm_point([Subdifferential(([2.0, 0.0],))], [1.0])
    assert np.allclose(res.point, [2.0, 0.0])
    assert res.norm == pytest.approx(2.0)


def test_segment_contains_zero():
    sd = Subdifferential(([1.0], [-1.0]))
    res = min_norm_point([sd], [1.0])
    assert res.norm <= 1e-9
    oracle = brute_force_min_norm([sd], [1.0])
    assert abs(res.norm - oracle) <= 1e-6


def test_against_brute_force_random():
    rng = np.random.default_rng(5)
    for _ in range(20):
        sets = []
        scales = []
        for _ in range(rng.integers(1, 4)):
            nv = int(rng.integers(1, 3))
            sets.append(Subdifferential(tuple(rng.uniform(-2, 2, size=2) for _ in range(nv))))
            scales.append(float(rng.uniform(0, 2)))
        res = min_norm_point(sets, scales)
        oracle = brute_force_min_norm(sets, scales, grid=81)
        assert res.norm <= oracle + 1e-6
        assert res.norm >= oracle - 0.1  # oracle grid is coarse from above


def test_decomposition_reassembles_point():
    rng = np.random.default_rng(6)
    for _ in range(20):
        sets = []
        scales = []
        for _ in range(rng.integers(1, 4)):
            nv = int(rng.integers(1, 4))
            rays = tuple(rng.uniform(-1, 1, size=2) for _ in range(rng.integers(0, 2)))
            sets.append(Subdifferential(tuple(rng.uniform(-2, 2, size=2) for _ in range(nv)), rays))
            scales.append(float(rng.uniform(0, 2)))
        res = min_norm_point(sets, scales)
        rebuilt = res.decompose(sets, scales)
        assert np.linalg.norm(rebuilt - res.point) <= 1e-9
        for w in res.vertex_weights:
            assert abs(w.sum() - 1.0) <= 1e-9 and np.all(w >= -1e-12)
        for mu in res.ray_weights:
            assert np.all(mu >= -1e-12)


def test_zero_scale_keeps_rays():
    # normal-cone convention: a zero multiplier does not drop the cone
    sd = Subdifferential((np.array([0.0, 0.0]),), (np.array([-1.0, 0.0]),))
    target = Subdifferential((np.array([3.0, 0.0]),))
    res = min_norm_point([sd, target], [0.0, 1.0])
    assert res.norm <= 1e-9  # ray (-1, 0) cancels the vertex (3, 0)


def test_empty_sets_rejected():
    with pytest.raises(ValueError):
        min_norm_point([], [])
    with pytest.raises(ValueError):
        min_norm_point([Subdifferential(([1.0],))], [-1.0])
