"""Maximization of the dual objective over per-class couplings supported on
the epsilon edge set.

The objective sums, over ground points, the concave perspective of the
optimal conditional risk applied to the pushforward masses of the two
couplings.  The feasible set is a product of per-source simplices, so the
Frank-Wolfe linear subproblem decomposes: each source sends all of its mass
to its best target inside the epsilon-ball.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import combinations_with_replacement

import numpy as np

from .errors import InstanceTooLarge, NegativeMass
from .ground import GroundSet, ball_argmax, ball_argmin
from .losses import Loss, get_loss, mul0
from .measures import Coupling, TwoClassMeasure, greedy_attack, pushforward

# gradient shift keeping the square-root slope finite at the boundary,
# scaled by total mass inside the solver
BOUNDARY_DELTA = 1e-12


@dataclass
class DualConfig:
    tol: float = 1e-6
    max_iters: int = 20000
    seed: int = 0
    method: str = "best"        # fw | fw_away | attack_extract | best
    step_rule: str = "linesearch"   # linesearch | harmonic
    log_every: int = 50


@dataclass(frozen=True)
class DualSolution:
    coupling0: Coupling
    coupling1: Coupling
    m0: np.ndarray
    m1: np.ndarray
    objective: float
    iterations: int
    converged: bool
    history: list = field(repr=False, default_factory=list)

    def eta_star(self) -> np.ndarray:
        """m1 / (m0 + m1) where defined, 0.5 elsewhere (unused mass points)."""
        s = self.m0 + self.m1
        out = np.full_like(s, 0.5)
        mask = s > 0
        out[mask] = self.m1[mask] / s[mask]
        return out


def dual_objective(loss: Loss, m0, m1) -> float:
    """Sum over points of (m0 + m1) * cstar(m1 / (m0 + m1)); zero where both
    masses vanish.  Jointly concave in (m0, m1)."""
    m0 = np.asarray(m0, dtype=float)
    m1 = np.asarray(m1, dtype=float)
    if np.any(m0 < 0) or np.any(m1 < 0):
        raise NegativeMass("pushforward masses must be nonnegative")
    s = m0 + m1
    mask = s > 0
    if not np.any(mask):
        return 0.0
    eta = m1[mask] / s[mask]
    return float(np.dot(s[mask], loss.cstar(eta)))


def perspective_grads(loss: Loss, m0, m1, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """Supergradients of the perspective objective in (m0, m1), evaluated on
    delta-shifted arguments so the boundary slope stays finite."""
    a = np.asarray(m0, dtype=float) + delta
    b = np.asarray(m1, dtype=float) + delta
    eta = b / (a + b)
    c = loss.cstar(eta)
    gsup = loss.cstar_supergrad(eta)
    g0 = c - eta * gsup
    g1 = c + (1.0 - eta) * gsup
    return g0, g1


class _EdgeSet:
    """CSR edge layout for one class: one simplex per positive-mass source."""

    def __init__(self, g: GroundSet, p: np.ndarray):
        self.n = g.n
        self.sources = np.flatnonzero(p > 0)
        self.p = p[self.sources]
        segs = [g.neighbors(i) for i in self.sources]
        lens = np.array([len(s) for s in segs], dtype=np.int64)
        self.indptr = np.concatenate(([0], np.cumsum(lens)))
        self.dst = np.concatenate(segs) if segs else np.empty(0, dtype=np.int64)
        self.esrc = np.repeat(self.sources, lens)
        self.E = self.dst.size

    def uniform_start(self) -> np.ndarray:
        lens = np.diff(self.indptr)
        return np.repeat(self.p / lens, lens)

    def vertex_from_point_grad(self, grad_pts: np.ndarray) -> np.ndarray:
        """Per source, all mass to the neighbor with the largest gradient,
        ties to the lowest target index."""
        w = np.zeros(self.E)
        vals = grad_pts[self.dst]
        segmax = np.maximum.reduceat(vals, self.indptr[:-1]) if self.E else np.empty(0)
        widths = np.diff(self.indptr)
        hit = vals == np.repeat(segmax, widths)
        pos = np.where(hit, np.arange(self.E), self.E)
        first = np.minimum.reduceat(pos, self.indptr[:-1]) if self.E else np.empty(0, dtype=int)
        w[first] = self.p
        return w

    def away_vertex(self, grad_pts: np.ndarray, w: np.ndarray) -> np.ndarray:
        """Per source, all mass at the active edge with the smallest gradient."""
        vals = np.where(w > 0, grad_pts[self.dst], np.inf)
        segmin = np.minimum.reduceat(vals, self.indptr[:-1]) if self.E else np.empty(0)
        widths = np.diff(self.indptr)
        hit = vals == np.repeat(segmin, widths)
        pos = np.where(hit, np.arange(self.E), self.E)
        first = np.minimum.reduceat(pos, self.indptr[:-1]) if self.E else np.empty(0, dtype=int)
        a = np.zeros(self.E)
        a[first] = self.p
        return a

    def clean(self, w: np.ndarray) -> np.ndarray:
        """Zero out vanishing weights and rescale each source back to its
        marginal mass, so stray 1e-100-sized leftovers cannot throttle the
        step-size bound of later pairwise moves."""
        pe = np.repeat(self.p, np.diff(self.indptr))
        w = np.where(w < 1e-12 * pe, 0.0, w)
        seg = np.add.reduceat(w, self.indptr[:-1]) if self.E else np.empty(0)
        scale = np.divide(self.p, seg, out=np.ones_like(seg), where=seg > 0)
        return w * np.repeat(scale, np.diff(self.indptr))

    def restrict(self, score: np.ndarray, rel: float) -> "_EdgeSet":
        """Sub-polytope keeping, per source, only edges whose score is within
        a relative factor of the best reachable score."""
        vals = score[self.dst]
        segmax = np.maximum.reduceat(vals, self.indptr[:-1]) if self.E \
            else np.empty(0)
        keep = vals >= np.repeat(segmax, np.diff(self.indptr)) * (1.0 - rel)
        out = object.__new__(_EdgeSet)
        out.n, out.sources, out.p = self.n, self.sources, self.p
        lens = np.add.reduceat(keep.astype(np.int64), self.indptr[:-1]) \
            if self.E else np.zeros(0, dtype=np.int64)
        out.indptr = np.concatenate(([0], np.cumsum(lens)))
        out.dst = self.dst[keep]
        out.esrc = self.esrc[keep]
        out.E = out.dst.size
        return out

    def push(self, w: np.ndarray) -> np.ndarray:
        return np.bincount(self.dst, weights=w, minlength=self.n)

    def coupling(self, w: np.ndarray) -> Coupling:
        keep = w > 0
        return Coupling.build(self.esrc[keep], self.dst[keep], w[keep], self.n)

    def from_coupling(self, c: Coupling) -> np.ndarray:
        w = np.zeros(self.E)
        lut = {}
        for k in range(self.E):
            lut[(int(self.esrc[k]), int(self.dst[k]))] = k
        for i, j, v in zip(c.src, c.dst, c.w):
            w[lut[(int(i), int(j))]] += v
        return w


def _fast_objective(loss: Loss, m0: np.ndarray, m1: np.ndarray) -> float:
    """dual_objective without validation, for solver inner loops."""
    s = np.maximum(m0 + m1, 0.0)
    eta = np.divide(m1, s, out=np.zeros_like(s), where=s > 0)
    return float(np.dot(s, loss.cstar(np.clip(eta, 0.0, 1.0))))


def _line_search(loss: Loss, m0, m1, d0, d1, tmax: float = 1.0,
                 iters: int = 24) -> float:
    """Golden-section step in [0, tmax] along a feasible direction."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    lo, hi = 0.0, tmax

    def val(t):
        return _fast_objective(loss, m0 + t * d0, m1 + t * d1)

    v0 = val(0.0)
    vmax = val(tmax)
    for _ in range(iters):
        c = hi - invphi * (hi - lo)
        d = lo + invphi * (hi - lo)
        if val(c) >= val(d):
            hi = d
        else:
            lo = c
    t = 0.5 * (lo + hi)
    vt = val(t)
    if vmax >= vt and vmax >= v0:
        return tmax
    if vt >= v0:
        return t
    # golden section can miss a thin improvement region near zero when the
    # ascent direction is valid but the objective dips immediately after it;
    # scan a geometric ladder of tiny steps before conceding
    t = tmax
    for _ in range(40):
        t *= 0.25
        if val(t) > v0:
            return t
    return 0.0


def _max_step(w0, d0, w1, d1) -> float:
    """Largest t with w + t*d nonnegative in both classes."""
    tmax = np.inf
    for w, d in ((w0, d0), (w1, d1)):
        neg = d < 0
        if neg.any():
            tmax = min(tmax, float(np.min(w[neg] / -d[neg])))
    return 0.0 if not np.isfinite(tmax) else tmax


def _frank_wolfe(loss, e0, e1, w0, w1, cfg: DualConfig, delta: float,
                 history: list, use_away: bool):
    """Frank-Wolfe over the product of per-source simplices.

    A plain step mixes the whole iterate toward a vertex (step 2/(k+2) or a
    line search).  The away variant instead shifts mass, source by source,
    from the active target with the smallest gradient to the target with the
    largest gradient; such swap steps can empty bad edges in one move, which
    avoids the slow sublinear tail of the vanilla method.
    """
    best = (_fast_objective(loss, e0.push(w0), e1.push(w1)), w0.copy(), w1.copy())
    k_done = 0
    converged = False
    window = 25
    marks = [best[0]]
    for k in range(cfg.max_iters):
        k_done = k
        m0, m1 = e0.push(w0), e1.push(w1)
        obj = _fast_objective(loss, m0, m1)
        if obj > best[0]:
            best = (obj, w0.copy(), w1.copy())
        if k % cfg.log_every == 0:
            history.append(best[0])
        marks.append(best[0])
        if len(marks) > window:
            gain = marks[-1] - marks[-window - 1]
            del marks[:-window - 1]
            if gain <= cfg.tol * max(1.0, abs(best[0])):
                converged = True
                break
        g0, g1 = perspective_grads(loss, m0, m1, delta)
        v0 = e0.vertex_from_point_grad(g0)
        v1 = e1.vertex_from_point_grad(g1)
        fw_gap = float(np.dot(g0[e0.dst], v0 - w0) + np.dot(g1[e1.dst], v1 - w1))
        if fw_gap <= cfg.tol * max(1.0, abs(best[0])):
            converged = True
            break
        if use_away:
            a0 = e0.away_vertex(g0, w0)
            a1 = e1.away_vertex(g1, w1)
            d0, d1 = v0 - a0, v1 - a1
            tmax = _max_step(w0, d0, w1, d1)
            dm0, dm1 = e0.push(d0), e1.push(d1)
            if tmax > 0 and _fast_objective(loss, m0 + tmax * dm0,
                                            m1 + tmax * dm1) >= obj:
                t = tmax  # drop step: the away edge empties outright
            else:
                t = _line_search(loss, m0, m1, dm0, dm1, tmax)
            swap_val = _fast_objective(loss, m0 + t * dm0, m1 + t * dm1)
            if swap_val - obj <= 1e-9 * max(1.0, abs(obj)):
                # the swap direction only moves mass off a single active edge
                # per source and can stall while the vanilla direction still
                # climbs; price the plain step whenever the swap goes nowhere
                dp0, dp1 = v0 - w0, v1 - w1
                dpm0, dpm1 = e0.push(dp0), e1.push(dp1)
                tp = _line_search(loss, m0, m1, dpm0, dpm1, 1.0)
                if _fast_objective(loss, m0 + tp * dpm0,
                                   m1 + tp * dpm1) > swap_val:
                    d0, d1, t = dp0, dp1, tp
        else:
            d0, d1 = v0 - w0, v1 - w1
            if cfg.step_rule == "linesearch":
                t = _line_search(loss, m0, m1, e0.push(d0), e1.push(d1), 1.0)
            else:
                t = 2.0 / (k + 2.0)
        w0 = np.maximum(w0 + t * d0, 0.0)
        w1 = np.maximum(w1 + t * d1, 0.0)
        if use_away and k % 10 == 9:
            w0 = e0.clean(w0)
            w1 = e1.clean(w1)
    return best, k_done + 1, converged


def solve_dual(loss: Loss, g: GroundSet, measure: TwoClassMeasure,
               config: DualConfig | None = None, f_hint=None) -> DualSolution:
    """Maximize the dual objective over couplings supported in the epsilon
    edge set.

    ``f_hint`` (a score field) enables the attack-extraction route: couplings
    are read off the greedy ball attack on phi(f) and phi(-f), which
    complementary slackness predicts is optimal at a primal optimum.  The
    ``best`` method warm-starts Frank-Wolfe from whichever start is better.
    """
    cfg = config or DualConfig()
    p0, p1 = measure.mass0, measure.mass1
    e0, e1 = _EdgeSet(g, p0), _EdgeSet(g, p1)
    delta = BOUNDARY_DELTA * max(measure.total, 1e-300)
    history: list[float] = []

    attack_start = None
    if f_hint is not None and cfg.method in ("attack_extract", "best"):
        f_hint = np.asarray(f_hint, dtype=float)
        c1 = greedy_attack(g, loss.phi(f_hint), p1)
        c0 = greedy_attack(g, loss.phi(-f_hint), p0)
        attack_start = (e0.from_coupling(c0), e1.from_coupling(c1))

    if cfg.method == "attack_extract":
        if attack_start is None:
            raise ValueError("attack_extract needs a primal score field hint")
        w0, w1 = attack_start
        best = (_fast_objective(loss, e0.push(w0), e1.push(w1)), w0, w1)
        iters_total, converged = 0, True
        history.append(best[0])
    else:
        if attack_start is not None:
            w0, w1 = attack_start
            uni = (e0.uniform_start(), e1.uniform_start())
            if _fast_objective(loss, e0.push(uni[0]), e1.push(uni[1])) > \
                    _fast_objective(loss, e0.push(w0), e1.push(w1)):
                w0, w1 = uni
        else:
            w0, w1 = e0.uniform_start(), e1.uniform_start()
        best, iters_total, converged = _frank_wolfe(
            loss, e0, e1, w0, w1, cfg, delta, history,
            use_away=cfg.method in ("fw_away", "best"))

    if f_hint is not None and cfg.method == "best":
        # polish on the near-optimal support: at a primal optimum every
        # destination attains the ball supremum of the transported loss, so
        # rerunning from a dense start on edges scoring within 1% of that
        # supremum recovers the mass splits the greedy extraction misses
        r0 = e0.restrict(loss.phi(-f_hint), 1e-2)
        r1 = e1.restrict(loss.phi(f_hint), 1e-2)
        rcfg = replace(cfg, max_iters=min(cfg.max_iters, 2000))
        rbest, rit, rconv = _frank_wolfe(
            loss, r0, r1, r0.uniform_start(), r1.uniform_start(),
            rcfg, delta, history, use_away=True)
        iters_total += rit
        if rbest[0] > best[0]:
            best, e0, e1 = rbest, r0, r1
            converged = rconv

    obj, w0, w1 = best
    c0, c1 = e0.coupling(w0), e1.coupling(w1)
    m0, m1 = pushforward(c0), pushforward(c1)
    # recompute from the couplings actually returned
    obj = dual_objective(loss, m0, m1)
    history.append(obj)
    return DualSolution(coupling0=c0, coupling1=c1, m0=m0, m1=m1,
                        objective=obj, iterations=iters_total,
                        converged=converged, history=history)


# ---------------------------------------------------------------------------
# brute-force oracle
# ---------------------------------------------------------------------------

MAX_ORACLE_COMBOS = 60_000_000


def _simplex_grid(total: float, deg: int, steps: int) -> np.ndarray:
    """All ways to split ``total`` over ``deg`` slots in steps of total/steps."""
    out = []
    for cut in combinations_with_replacement(range(steps + 1), deg - 1):
        prev = 0
        row = []
        for c in cut:
            row.append(c - prev)
            prev = c
        row.append(steps - prev)
        out.append(row)
    return np.asarray(out, dtype=float) * (total / steps)


def _class_mass_grid(g: GroundSet, p: np.ndarray, steps: int) -> np.ndarray:
    """Candidate pushforward mass vectors for one class, exhaustively."""
    sources = np.flatnonzero(p > 0)
    if sources.size > 4:
        raise InstanceTooLarge("brute dual accepts at most 4 sources per class")
    grids = []
    for i in sources:
        neigh = g.neighbors(i)
        if neigh.size > 4:
            raise InstanceTooLarge("brute dual accepts at most 4 neighbors per source")
        splits = _simplex_grid(float(p[i]), neigh.size, steps)
        m = np.zeros((splits.shape[0], g.n))
        m[:, neigh] = splits
        grids.append(m)
    if not grids:
        return np.zeros((1, g.n))
    acc = grids[0]
    for m in grids[1:]:
        if acc.shape[0] * m.shape[0] > MAX_ORACLE_COMBOS:
            raise InstanceTooLarge("brute dual grid too large")
        acc = (acc[:, None, :] + m[None, :, :]).reshape(-1, g.n)
    return acc


def brute_dual(loss: Loss, g: GroundSet, measure: TwoClassMeasure,
               grid_steps: int = 50) -> float:
    """Exhaustive grid search over both coupling simplices; test oracle only."""
    m0s = _class_mass_grid(g, measure.mass0, grid_steps)
    m1s = _class_mass_grid(g, measure.mass1, grid_steps)
    if m0s.shape[0] * m1s.shape[0] > MAX_ORACLE_COMBOS:
        raise InstanceTooLarge("brute dual pairing too large")
    best = -np.inf
    chunk = max(1, 2_000_000 // max(1, m1s.shape[0]))
    for a in range(0, m0s.shape[0], chunk):
        blk = m0s[a:a + chunk]
        s = blk[:, None, :] + m1s[None, :, :]
        with np.errstate(invalid="ignore", divide="ignore"):
            eta = np.where(s > 0, m1s[None, :, :] / np.where(s > 0, s, 1.0), 0.0)
            vals = np.where(s > 0, s * loss.cstar(eta), 0.0).sum(axis=2)
        best = max(best, float(vals.max()))
    return best
