import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from adaptive_deploy.consensus import (CommGraph, DisconnectedGraphError, NoObserverError, floodmin,
                                       floodmin_trace, winner)
from oracles import argmin_set, connected_graphs, graph_diameter, lowest_argmin

INF = math.inf


def test_floodmin_examples():
    path3 = CommGraph.path(3)
    assert path3.diam == 2
    assert floodmin([3, 1, 2], path3) == [False, True, False]
    assert floodmin([5, 5], CommGraph(2, ((0, 1),))) == [True, True]
    assert floodmin([INF, 4, INF], path3) == [False, True, False]


def test_winner_examples():
    assert winner([3, 1, 2]) == 1
    assert winner([5, 5]) == 0
    assert winner([INF, 2]) == 1
    assert winner([5, 5], CommGraph.path(2)) == 0


def test_no_observer():
    with pytest.raises(NoObserverError):
        floodmin([INF, INF], CommGraph.path(2))
    with pytest.raises(NoObserverError):
        winner([INF, INF, INF])


def test_graph_validation():
    with pytest.raises(DisconnectedGraphError):
        CommGraph(3, ((0, 1),))
    with pytest.raises(ValueError):
        CommGraph(3, ((0, 1), (1, 2)), diam=1)
    with pytest.raises(DisconnectedGraphError):
        CommGraph.disk([[0, 0], [0.1, 0], [5, 5]], 1.0)
    g = CommGraph.disk([[0, 0], [0.5, 0], [1.0, 0]], 0.6)
    assert g.edges == ((0, 1), (1, 2)) and g.diam == 2


def test_diameter_matches_floyd_warshall():
    for n in range(1, 6):
        for edges in connected_graphs(n):
            assert CommGraph(n, edges).diam == graph_diameter(n, edges)


def test_exhaustive_six_nodes_against_argmin():
    rng = np.random.default_rng(6)
    pool = [0.0, 1.0, 2.0, INF]
    graphs = list(connected_graphs(6))
    assert len(graphs) == 26704
    for edges in graphs:
        g = CommGraph(6, edges)
        vals = rng.choice(pool, size=6).tolist()
        if all(v == INF for v in vals):
            vals[int(rng.integers(6))] = 1.0
        assert floodmin(vals, g) == argmin_set(vals)


def test_trace_rounds_monotone_and_message_count():
    g = CommGraph(5, ((0, 1), (1, 2), (2, 3), (3, 4), (1, 3)))
    tr = floodmin_trace([4.0, 3.0, INF, 2.5, 7.0], g)
    rounds = np.array(tr.rounds)
    assert np.all(np.diff(rounds, axis=0) <= 0)
    assert np.all(rounds[-1] == 2.5)
    assert tr.messages == g.directed_edges * g.diam == 2 * 5 * 3
    assert tr.flags == floodmin([4.0, 3.0, INF, 2.5, 7.0], g)
    buf = io.StringIO()
    tr.write_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "round,agent,value"
    assert len(lines) == 1 + (g.diam + 1) * 5
    assert lines[1] == "0,0,4.0"


graph_strategy = st.integers(2, 6).flatmap(
    lambda n: st.tuples(st.just(n), st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)),
                                             min_size=n, max_size=15)))


@given(graph_strategy, st.data())
def test_relabeling_equivariance(spec, data):
    n, raw = spec
    edges = {(min(u, v), max(u, v)) for u, v in raw if u != v}
    edges |= {(i, i + 1) for i in range(n - 1)}  # keep it connected
    vals = data.draw(st.lists(st.sampled_from([0.0, 0.5, 1.0, INF]), min_size=n, max_size=n))
    if all(v == INF for v in vals):
        vals[0] = 0.5
    perm = data.draw(st.permutations(range(n)))
    g = CommGraph(n, tuple(edges))
    gp = CommGraph(n, tuple((perm[u], perm[v]) for u, v in edges))
    vp = [0.0] * n
    for i in range(n):
        vp[perm[i]] = vals[i]
    f, fp = floodmin(vals, g), floodmin(vp, gp)
    assert all(fp[perm[i]] == f[i] for i in range(n))
    assert winner(vals, g) == lowest_argmin(vals)
