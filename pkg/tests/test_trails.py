import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from classcnet import fixtures, trails as tr
from classcnet.errors import (DegeneratePrefixError, NonProbabilisticNodeError, ParameterError,
                              ResourceError)
from classcnet.matrixkit import minor_det, random_orthogonal, rotation2
from classcnet.netgraph import Edge, NetworkGraph, Node


def brute_force_trails(g, start, stop=None):
    """All edge sequences (no repeats) following node connectivity; exponential."""
    found = []
    ids = g.edge_ids()

    def grow(path):
        tgt = g.edge(path[-1]).target
        if tgt is None:
            return
        node = tgt[0]
        for e in ids:
            src = g.edge(e).source
            if src is None or src[0] != node:
                continue
            if stop is None and e == start:
                found.append(tuple(path))
            elif stop is not None and e == stop:
                found.append(tuple(path + [e]))
            elif e not in path:
                grow(path + [e])

    grow([start])
    return found


def test_omega_single_passage_is_entry_squared():
    s = rotation2(0.3)
    for j, i in itertools.product((1, 2), repeat=2):
        assert tr.omega_value(s, [(j, i)]) == pytest.approx(s[i - 1, j - 1] ** 2)


def test_omega_report_fields():
    s = rotation2(0.3)
    rep = tr.omega(s, [(1, 2), (2, 1)])
    # pairing 1->2, 2->1 is odd; matched product S21 S12 = -sin^2; minor det S = 1
    assert rep.pairing_signature == -1
    assert rep.matched_product == pytest.approx(-np.sin(0.3) ** 2)
    assert rep.minor_value == pytest.approx(1.0)
    assert rep.omega == pytest.approx(np.sin(0.3) ** 2)
    assert rep.conditional_factors[1] == pytest.approx(1.0)
    assert rep.rows == (1, 2) and rep.cols == (1, 2)


def test_omega_rejects_bad_histories():
    s = rotation2(0.3)
    with pytest.raises(ParameterError):
        tr.omega_value(s, [(1, 1), (1, 2)])
    with pytest.raises(ParameterError):
        tr.omega_value(s, [(1, 3)])


@given(st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
@settings(max_examples=60, deadline=None)
def test_pairing_sum_is_minor_squared(n, seed):
    rng = np.random.default_rng(seed)
    s = random_orthogonal(n, rng)
    k = int(rng.integers(1, n + 1))
    rows = tuple(sorted(int(v) + 1 for v in rng.choice(n, k, replace=False)))
    cols = tuple(sorted(int(v) + 1 for v in rng.choice(n, k, replace=False)))
    assert tr.pairing_sum(s, rows, cols) == pytest.approx(minor_det(s, rows, cols) ** 2, abs=1e-10)


def test_full_pairing_sum_is_det_squared(rng):
    s = random_orthogonal(4, rng)
    full = (1, 2, 3, 4)
    assert tr.pairing_sum(s, full, full) == pytest.approx(1.0, abs=1e-12)


@given(st.integers(1, 6), st.integers(0, 2 ** 32 - 1))
@settings(max_examples=100, deadline=None)
def test_conditional_weights_normalize(n, seed):
    rng = np.random.default_rng(seed)
    s = random_orthogonal(n, rng)
    k = int(rng.integers(0, n))
    js = [int(v) + 1 for v in rng.permutation(n)[: k + 1]]
    is_ = [int(v) + 1 for v in rng.permutation(n)[:k]]
    prior = list(zip(js[:k], is_))
    if k and tr.omega_value(s, prior) == 0.0:
        return
    assert tr.normalization_sum(s, prior, js[k]) == pytest.approx(1.0, abs=1e-10)


def test_chain_rule_telescopes(rng):
    for _ in range(200):
        n = int(rng.integers(1, 7))
        s = random_orthogonal(n, rng)
        k = int(rng.integers(1, n + 1))
        visits = list(zip(rng.permutation(n)[:k] + 1, rng.permutation(n)[:k] + 1))
        rep = tr.omega(s, visits)
        assert np.prod(rep.conditional_factors) == pytest.approx(rep.omega, abs=1e-12)


def test_conditional_weight_after_zero_prefix():
    s = np.eye(2)
    with pytest.raises(DegeneratePrefixError):
        tr.conditional_weight(s, [(1, 2)], 2, 1)
    with pytest.raises(ZeroDivisionError):
        tr.conditional_weight(s, [(1, 2)], 2, 1)


def test_enumeration_matches_brute_force(rng):
    for _ in range(15):
        g = fixtures.random_closed_graph(rng, max_edges=7)
        e = int(rng.integers(g.n_edges))
        got = {t.edges: w for t, w in tr.enumerate_closed_trails(g, e)}
        expect = {p: tr.trail_weight(g, tr.Trail(p, True)) for p in brute_force_trails(g, e)}
        expect = {p: w for p, w in expect.items() if abs(w) > 0 or p in got}
        assert set(got) <= set(expect)
        for p, w in expect.items():
            assert got.get(p, 0.0) == pytest.approx(w, abs=1e-12)


def test_open_enumeration_matches_brute_force(rng):
    for _ in range(10):
        g, e_in, e_out = fixtures.random_open_fixture(rng, max_edges=7)
        got = {t.edges: w for t, w in tr.enumerate_open_trails(g, e_in, e_out)}
        for p in brute_force_trails(g, e_in, e_out):
            assert got.get(p, 0.0) == pytest.approx(tr.trail_weight(g, tr.Trail(p, False)), abs=1e-12)


def test_two_node_trails_by_hand():
    a, b = 0.3, 1.1
    ca, sa, cb, sb = np.cos(a) ** 2, np.sin(a) ** 2, np.cos(b) ** 2, np.sin(b) ** 2
    got = {t.edges: w for t, w in tr.enumerate_closed_trails(fixtures.two_node(a, b), 0)}
    assert got[(0, 2)] == pytest.approx(cb * ca)
    assert got[(0, 3)] == pytest.approx(sb * sa)
    assert got[(0, 2, 1, 3)] == pytest.approx(sa * cb)
    assert got[(0, 3, 1, 2)] == pytest.approx(ca * sb)
    assert sum(got.values()) == pytest.approx(1.0)


def test_closed_trail_weights_sum_to_one(rng):
    # the walk on a closed graph always returns to its start
    for _ in range(10):
        g = fixtures.random_closed_graph(rng, max_edges=8)
        e = int(rng.integers(g.n_edges))
        assert sum(w for _, w in tr.enumerate_closed_trails(g, e)) == pytest.approx(1.0, abs=1e-10)


def test_single_loop_classical_green():
    g = fixtures.single_loop()
    assert tr.classical_mean_trace_green(g, 0, 0.6) == pytest.approx(2 - 0.36, abs=1e-12)
    assert tr.classical_mean_trace_green(g, 0, 1.8) == pytest.approx(1.8 ** -2, abs=1e-12)
    with pytest.raises(ParameterError):
        tr.classical_mean_trace_green(g, 0, 1.0)


def test_conductance_fixtures():
    a, b = 0.3, 1.1
    g, e_in, e_out = fixtures.two_node_cut(a, b)
    assert tr.classical_mean_conductance(g, e_in, e_out) == pytest.approx(2 * np.cos(b) ** 2)
    g, e_in, e_out = fixtures.two_node_half_cut(a, b)
    expect = 2 * (np.cos(b) ** 2 + np.sin(b) ** 2 * np.cos(a) ** 2)
    assert tr.classical_mean_conductance(g, e_in, e_out) == pytest.approx(expect)
    g, e_in, e_out = fixtures.open_chain(4)
    assert tr.classical_mean_conductance(g, e_in, e_out) == pytest.approx(2.0)


def test_enumeration_argument_checks():
    g = fixtures.two_node(0.3, 1.1)
    with pytest.raises(ParameterError):
        tr.enumerate_closed_trails(g, 99)
    go, e_in, e_out = fixtures.two_node_cut(0.3, 1.1)
    with pytest.raises(ParameterError):
        tr.enumerate_closed_trails(go, e_in)
    with pytest.raises(ParameterError):
        tr.enumerate_open_trails(go, e_out, e_in)
    with pytest.raises(ParameterError):
        tr.trail_weight(g, tr.Trail((0, 0), True))
    with pytest.raises(ParameterError):
        tr.trail_weight(g, tr.Trail((0, 1), True))


def test_ceiling_raises_resource_error():
    from classcnet.netgraph import build_l_lattice
    g = build_l_lattice(6, 0.5)
    with pytest.raises(ResourceError):
        tr.enumerate_closed_trails(g, 0, ceiling=50)


def test_vanishing_entries_are_pruned():
    # S = identity: every passage goes straight through
    g = NetworkGraph([Node(0, np.eye(2))], [Edge(0, (0, 1), (0, 1)), Edge(1, (0, 2), (0, 2))])
    trails = tr.enumerate_closed_trails(g, 0)
    assert [t.edges for t, _ in trails] == [(0,)]


def test_walk_probability_equals_trail_weight(rng):
    from classcnet.netgraph import build_l_lattice
    g = build_l_lattice(4, 0.4)
    for _ in range(50):
        trail, diag = tr.sample_history_walk(g, int(rng.integers(g.n_edges)), rng)
        assert diag.closed
        assert diag.probability == pytest.approx(tr.trail_weight(g, trail), abs=1e-12)


def test_walk_on_two_node_fixture(rng):
    g = fixtures.two_node(0.3, 1.1)
    for _ in range(100):
        trail, diag = tr.sample_history_walk(g, 0, rng)
        assert trail.closed and trail.edges[0] == 0
        assert diag.probability == pytest.approx(tr.trail_weight(g, trail))
        assert all(w >= 0 for *_, w in diag.steps)


def test_open_walk_exits_on_a_lead(rng):
    g, e_in, _ = fixtures.two_node_half_cut(0.3, 1.1)
    for _ in range(50):
        trail, diag = tr.sample_history_walk(g, e_in, rng)
        assert not diag.closed and diag.exit_edge in g.leads_out


def test_walk_reports_negative_weight():
    # a zero-free O(3) node has mixed-sign weights; some history hits a negative one
    s = random_orthogonal(3, np.random.default_rng(1))
    g = NetworkGraph([Node(0, s)], [Edge(k, (0, k + 1), (0, k + 1)) for k in range(3)])
    with pytest.raises(NonProbabilisticNodeError) as info:
        for seed in range(200):
            tr.sample_history_walk(g, seed % 3, seed)
    assert info.value.node == 0 and min(info.value.weights.values()) < 0


def test_trails_csv():
    found = tr.enumerate_closed_trails(fixtures.two_node(0.3, 1.1), 0)
    text = tr.trails_csv(found)
    lines = text.splitlines()
    assert lines[0] == "trail_id,length,weight,edge_sequence"
    assert lines[1].startswith("0,2,") and lines[1].endswith(",0 2")
    assert float(lines[1].split(",")[2]) == found[0][1]
