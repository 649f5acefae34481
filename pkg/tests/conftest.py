"""Shared fixtures: small oracle instances and independent reference
implementations used to cross-check the solvers."""

from __future__ import annotations

from itertools import combinations

import numpy as np
import pytest

from advdual.ground import GroundSet, build_ground, pair_distances
from advdual.measures import TwoClassMeasure


@pytest.fixture
def twopoint():
    """Two unit half-masses at 0 and 1 with a refinement midpoint; at
    epsilon 0.6 both classes can meet at 0.5."""
    g = build_ground(np.array([[0.0], [1.0], [0.5]]), "l2", 0.6)
    measure = TwoClassMeasure.build([0.5, 0.0, 0.0], [0.0, 0.5, 0.0])
    return g, measure


def _oracle_instances():
    out = []
    # the canonical contested-midpoint instance
    g = build_ground(np.array([[0.0], [1.0], [0.5]]), "l2", 0.6)
    out.append(("twopoint", g, TwoClassMeasure.build([0.5, 0, 0], [0, 0.5, 0])))
    # epsilon zero: no adversary, everything pointwise
    g = build_ground(np.array([[0.0], [0.3], [0.7]]), "l2", 0.0)
    out.append(("eps0", g,
                TwoClassMeasure.build([0.2, 0.2, 0.1], [0.1, 0.15, 0.25])))
    # two overlapping sources per class on a pair of points
    g = build_ground(np.array([[0.0], [0.5]]), "l2", 0.5)
    out.append(("pair2", g,
                TwoClassMeasure.build([0.3, 0.1], [0.1, 0.5])))
    # planar triangle, every point adjacent to every other
    pts = np.array([[0.0, 0.0], [0.5, 0.0], [0.25, 0.43]])
    g = build_ground(pts, "l2", 0.55)
    out.append(("tri2d", g, TwoClassMeasure.build([0.6, 0, 0], [0, 0.4, 0])))
    return out


@pytest.fixture(scope="session")
def oracle_instances():
    return _oracle_instances()


# ---------------------------------------------------------------------------
# independent infinity-Wasserstein reference (no flow solver involved)
# ---------------------------------------------------------------------------

def hall_feasible(dist: np.ndarray, p: np.ndarray, q: np.ndarray,
                  eps: float) -> bool:
    """Feasibility of moving p onto q within distance eps, decided by the
    marriage-theorem condition: every subset of target mass must be covered
    by the source mass that can reach it."""
    tgt = np.flatnonzero(q > 0)
    reach = dist <= eps + 1e-12
    for r in range(1, tgt.size + 1):
        for sub in combinations(tgt, r):
            need = q[list(sub)].sum()
            covers = reach[:, list(sub)].any(axis=1)
            if need > p[covers].sum() + 1e-9:
                return False
    return True


def hall_winf(g: GroundSet, p, q) -> float:
    """Exhaustive bottleneck distance via the subset condition; supports of
    at most ~6 points keep the enumeration tiny."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    dist = pair_distances(g.points, g.norm)
    cand = np.unique(dist[np.ix_(p > 0, q > 0)])
    for t in cand:
        if hall_feasible(dist, p, q, float(t)):
            return float(t)
    return float("inf")


def naive_window_max(values: np.ndarray, k: int) -> np.ndarray:
    out = np.empty_like(values)
    n = values.size
    for i in range(n):
        out[i] = values[max(0, i - k):min(n, i + k + 1)].max()
    return out
