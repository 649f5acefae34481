import numpy as np
import pytest

from advdual.errors import MassMismatch, NegativeMass, ValidationError
from advdual.ground import build_ground, sup_ball
from advdual.measures import (
    Coupling,
    TwoClassMeasure,
    coupling_in_delta,
    greedy_attack,
    pushforward,
    transported_integral,
    winf_distance,
    winf_feasible,
)

from conftest import hall_winf


def test_two_class_measure_validation():
    m = TwoClassMeasure.build([0.25, 0.0], [0.5, 0.25])
    assert m.total == pytest.approx(1.0)
    with pytest.raises(NegativeMass):
        TwoClassMeasure.build([-0.1, 0.2], [0.1, 0.1])


def test_identity_pushforward():
    p = np.array([0.2, 0.0, 0.8])
    c = Coupling.identity(p)
    assert np.allclose(pushforward(c), p)


def test_split_pushforward():
    c = Coupling.build([0, 0], [0, 1], [0.5, 0.5], 2)
    assert np.allclose(pushforward(c), [0.5, 0.5])


def test_pushforward_conserves_total():
    rng = np.random.default_rng(2)
    src = rng.integers(0, 10, 30)
    dst = rng.integers(0, 10, 30)
    w = rng.uniform(0, 1, 30)
    c = Coupling.build(src, dst, w, 10)
    assert pushforward(c).sum() == pytest.approx(w.sum(), abs=1e-12)


def test_coupling_rejects_negative_weight():
    with pytest.raises(NegativeMass):
        Coupling.build([0], [0], [-0.1], 2)
    with pytest.raises(ValidationError):
        Coupling.build([0], [5], [0.1], 2)


def test_winf_feasible_single_edge():
    g = build_ground(np.array([[0.0], [1.0]]), "l2", 1.0)
    p = np.array([1.0, 0.0])
    q = np.array([0.0, 1.0])
    assert winf_feasible(g, p, q, 1.0)
    assert not winf_feasible(g, p, q, 0.9)
    assert winf_feasible(g, p, p, 0.0)


def test_winf_feasible_mass_mismatch():
    g = build_ground(np.array([[0.0], [1.0]]), "l2", 1.0)
    with pytest.raises(MassMismatch):
        winf_feasible(g, np.array([1.0, 0.0]), np.array([0.0, 0.5]), 1.0)


def test_winf_four_point_matching():
    pts = np.array([[0.0], [1.0], [0.4], [1.4]])
    g = build_ground(pts, "l2", 0.0)
    p = np.array([0.5, 0.5, 0.0, 0.0])
    q = np.array([0.0, 0.0, 0.5, 0.5])
    assert winf_feasible(g, p, q, 0.4)
    assert not winf_feasible(g, p, q, 0.39)
    assert winf_distance(g, p, q) == pytest.approx(0.4)


def test_winf_distance_basics():
    g = build_ground(np.array([[0.0], [1.0]]), "l2", 1.0)
    p = np.array([1.0, 0.0])
    q = np.array([0.0, 1.0])
    assert winf_distance(g, p, q) == pytest.approx(1.0)
    assert winf_distance(g, p, p) == 0.0


def test_winf_feasible_monotone_in_eps():
    rng = np.random.default_rng(6)
    g = build_ground(rng.uniform(0, 2, (6, 1)), "l2", 1.0)
    p = rng.uniform(0, 1, 6)
    q = rng.permutation(p)
    feas = [winf_feasible(g, p, q, e) for e in np.linspace(0, 2.5, 12)]
    assert feas == sorted(feas)


def test_winf_matches_hall_oracle():
    rng = np.random.default_rng(7)
    for _ in range(25):
        n = int(rng.integers(2, 7))
        g = build_ground(rng.uniform(0, 2, (n, 2)), "l2", 1.0)
        p = rng.uniform(0, 1, n)
        q = np.zeros(n)
        q[rng.permutation(n)] = p
        assert winf_distance(g, p, q) == hall_winf(g, p, q)


def test_greedy_attack_example(twopoint):
    g, _ = twopoint
    field = np.array([0.0, 2.0, 1.0])  # values at points 0, 1, 0.5
    p = np.array([1.0, 0.0, 0.0])
    c = greedy_attack(g, field, p)
    assert c.triples() == [(0, 2, 1.0)]


def test_greedy_attack_identity_at_eps_zero():
    g = build_ground(np.array([[0.0], [1.0]]), "l2", 0.0)
    p = np.array([0.3, 0.7])
    c = greedy_attack(g, np.array([5.0, -1.0]), p)
    assert np.allclose(pushforward(c), p)


def test_greedy_attack_exchange_identity():
    rng = np.random.default_rng(9)
    for _ in range(20):
        n = int(rng.integers(3, 25))
        g = build_ground(rng.uniform(0, 2, (n, 1)), "l2", 0.4)
        field = rng.normal(size=n)
        p = rng.uniform(0, 1, n)
        c = greedy_attack(g, field, p)
        expect = float((p * sup_ball(g, field)).sum())
        assert transported_integral(g, field, c) == pytest.approx(expect, abs=1e-12)


def test_greedy_attack_ties_lowest_index():
    g = build_ground(np.array([[0.0], [0.1], [0.2]]), "l2", 0.25)
    c = greedy_attack(g, np.zeros(3), np.array([0.0, 1.0, 0.0]))
    assert c.triples() == [(1, 0, 1.0)]


def test_coupling_stays_in_delta():
    g = build_ground(np.array([[0.0], [0.5], [1.0]]), "l2", 0.6)
    ok = Coupling.build([0], [1], [1.0], 3)
    bad = Coupling.build([0], [2], [1.0], 3)
    assert coupling_in_delta(g, ok)
    assert not coupling_in_delta(g, bad)


def test_coupling_pushforward_within_eps_of_source():
    rng = np.random.default_rng(10)
    g = build_ground(rng.uniform(0, 2, (8, 1)), "l2", 0.5)
    p = rng.uniform(0.1, 1, 8)
    c = greedy_attack(g, rng.normal(size=8), p)
    assert winf_distance(g, p, pushforward(c)) <= g.epsilon
