"""Two-class finite measures, couplings in the epsilon edge set, and the
infinity-Wasserstein metric decided by bottleneck max-flow."""

from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
import numpy as np

from .errors import MassMismatch, NegativeMass, ValidationError
from .ground import GroundSet, ball_argmax

# absolute feasibility slack per unit of transported mass
FLOW_SLACK = 1e-10
TOTAL_TOL = 1e-9


def _check_mass(m, n: int, name: str) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.shape != (n,):
        raise ValidationError(f"{name} has shape {m.shape}, expected ({n},)")
    if not np.all(np.isfinite(m)):
        raise NegativeMass(f"{name} contains non-finite masses")
    bad = np.flatnonzero(m < 0)
    if bad.size:
        raise NegativeMass(f"{name}[{bad[0]}] is negative: {m[bad[0]]}")
    return m


@dataclass(frozen=True)
class TwoClassMeasure:
    """Nonnegative per-point masses for class 0 and class 1.

    Totals need not sum to one and the two classes need not balance.
    """

    mass0: np.ndarray
    mass1: np.ndarray

    @classmethod
    def build(cls, mass0, mass1) -> "TwoClassMeasure":
        m0 = np.asarray(mass0, dtype=float)
        m1 = np.asarray(mass1, dtype=float)
        if m0.shape != m1.shape or m0.ndim != 1:
            raise ValidationError("mass vectors must be 1-D and equally long")
        m0 = _check_mass(m0, m0.shape[0], "mass0")
        m1 = _check_mass(m1, m1.shape[0], "mass1")
        m0.setflags(write=False)
        m1.setflags(write=False)
        return cls(mass0=m0, mass1=m1)

    @property
    def n(self) -> int:
        return self.mass0.shape[0]

    @property
    def total0(self) -> float:
        return float(self.mass0.sum())

    @property
    def total1(self) -> float:
        return float(self.mass1.sum())

    @property
    def total(self) -> float:
        return self.total0 + self.total1


@dataclass(frozen=True)
class Coupling:
    """Sparse coupling: weight ``w[k]`` moves from point ``src[k]`` to
    ``dst[k]``.  Supported pairs must lie in the epsilon edge set of the
    ground the coupling was built on."""

    src: np.ndarray
    dst: np.ndarray
    w: np.ndarray
    n: int

    @classmethod
    def build(cls, src, dst, w, n: int) -> "Coupling":
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        w = np.asarray(w, dtype=float)
        if not (src.shape == dst.shape == w.shape) or src.ndim != 1:
            raise ValidationError("coupling triples must be parallel 1-D arrays")
        if np.any(w < 0):
            raise NegativeMass("coupling weights must be nonnegative")
        if src.size and (src.min() < 0 or src.max() >= n or dst.min() < 0 or dst.max() >= n):
            raise ValidationError("coupling indices out of range")
        for a in (src, dst, w):
            a.setflags(write=False)
        return cls(src=src, dst=dst, w=w, n=n)

    @classmethod
    def identity(cls, p) -> "Coupling":
        p = np.asarray(p, dtype=float)
        idx = np.flatnonzero(p > 0)
        return cls.build(idx, idx, p[idx], p.shape[0])

    def source_marginal(self) -> np.ndarray:
        return np.bincount(self.src, weights=self.w, minlength=self.n)

    def target_marginal(self) -> np.ndarray:
        return np.bincount(self.dst, weights=self.w, minlength=self.n)

    def total(self) -> float:
        return float(self.w.sum())

    def triples(self):
        return [(int(i), int(j), float(v)) for i, j, v in zip(self.src, self.dst, self.w)]


def pushforward(c: Coupling) -> np.ndarray:
    """Target marginal of a coupling; total mass is preserved exactly up to
    float summation order."""
    return c.target_marginal()


def coupling_in_delta(g: GroundSet, c: Coupling, epsilon: float | None = None,
                      tol: float = 1e-12) -> bool:
    """True when every supported pair lies within epsilon."""
    if c.src.size == 0:
        return True
    eps = g.epsilon if epsilon is None else float(epsilon)
    diff = g.points[c.src] - g.points[c.dst]
    if g.norm == "l1":
        d = np.abs(diff).sum(axis=1)
    elif g.norm == "l2":
        d = np.sqrt((diff * diff).sum(axis=1))
    else:
        d = np.abs(diff).max(axis=1)
    return bool(np.all(d[c.w > 0] <= eps + tol))


def winf_feasible(g: GroundSet, p, q, epsilon: float | None = None) -> bool:
    """Does a coupling from p to q supported on pairs within epsilon exist?

    Decided exactly (up to a per-unit-mass slack) by max-flow with source
    capacities ``p``, sink capacities ``q``, and uncapacitated edges between
    points at distance <= epsilon.
    """
    p = _check_mass(p, g.n, "p")
    q = _check_mass(q, g.n, "q")
    eps = g.epsilon if epsilon is None else float(epsilon)
    tp, tq = p.sum(), q.sum()
    if abs(tp - tq) > TOTAL_TOL * max(1.0, tp, tq):
        raise MassMismatch(f"total masses differ: {tp} vs {tq}")
    if tp == 0:
        return True
    srcs = np.flatnonzero(p > 0)
    dsts = np.flatnonzero(q > 0)
    d = _cross_distances(g, srcs, dsts)
    graph = nx.DiGraph()
    for i in srcs:
        graph.add_edge("S", ("p", int(i)), capacity=float(p[i]))
    for j in dsts:
        graph.add_edge(("q", int(j)), "T", capacity=float(q[j]))
    rows, cols = np.nonzero(d <= eps + 0.0)
    if rows.size == 0:
        return False
    for a, b in zip(rows, cols):
        graph.add_edge(("p", int(srcs[a])), ("q", int(dsts[b])))
    flow = nx.maximum_flow_value(graph, "S", "T")
    return flow >= tp - FLOW_SLACK * max(1.0, tp)


def _cross_distances(g: GroundSet, rows, cols) -> np.ndarray:
    diff = g.points[rows][:, None, :] - g.points[cols][None, :, :]
    if g.norm == "l1":
        return np.abs(diff).sum(axis=2)
    if g.norm == "l2":
        return np.sqrt((diff * diff).sum(axis=2))
    return np.abs(diff).max(axis=2)


def winf_distance(g: GroundSet, p, q) -> float:
    """Smallest pairwise-distance threshold at which transport is feasible.

    Binary search over the exact spectrum of source-target distances.
    """
    p = _check_mass(p, g.n, "p")
    q = _check_mass(q, g.n, "q")
    tp, tq = p.sum(), q.sum()
    if abs(tp - tq) > TOTAL_TOL * max(1.0, tp, tq):
        raise MassMismatch(f"total masses differ: {tp} vs {tq}")
    if tp == 0:
        return 0.0
    srcs = np.flatnonzero(p > 0)
    dsts = np.flatnonzero(q > 0)
    spectrum = np.unique(_cross_distances(g, srcs, dsts))
    lo, hi = 0, spectrum.size - 1
    # the complete bipartite graph at the largest distance is always feasible
    while lo < hi:
        mid = (lo + hi) // 2
        if winf_feasible(g, p, q, float(spectrum[mid])):
            hi = mid
        else:
            lo = mid + 1
    return float(spectrum[lo])


def greedy_attack(g: GroundSet, field, p) -> Coupling:
    """Send each source's full mass to the lowest-index ball maximizer of
    ``field``; attains sum(p * sup_ball(field)) exactly."""
    field = g.check_field(field)
    p = _check_mass(p, g.n, "p")
    srcs = np.flatnonzero(p > 0)
    targets = ball_argmax(g, field)[srcs]
    return Coupling.build(srcs, targets, p[srcs], g.n)


def transported_integral(g: GroundSet, field, c: Coupling) -> float:
    """sum over pairs of w(i, j) * field(j)."""
    field = g.check_field(field)
    return float(np.dot(c.w, field[c.dst]))
