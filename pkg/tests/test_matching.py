import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from builders import random_match_graph, stats
from cellpipe.tracking.matching import (
    APPEAR,
    DISAPPEAR,
    SINK,
    SOURCE,
    MatchGraph,
    TrackInput,
    build_graph,
    cand_node,
    matching_cost,
    ordered_pair,
    result_flows,
    solve_matching,
    split_condition,
    split_cost,
    track_node,
)
from oracles import brute_min_cost, enumerate_outcomes


def always(_):
    return True


def track(tid, pos, size=80, disappear=150.0, contains=always):
    return TrackInput(tid, tuple(float(v) for v in pos), size, contains, disappear)


def test_matching_cost_345():
    assert matching_cost((10, 10), stats(1, (13, 14), 5)) == 5.0


def test_matching_cost_zero_at_position():
    assert matching_cost((7.5, 3.25), stats(1, (7.5, 3.25), 5)) == 0.0


def test_matching_cost_3d():
    assert matching_cost((0, 0, 0), stats(1, (1, 2, 2), 5)) == pytest.approx(3.0, abs=0)


def test_ordered_pair():
    a, b = stats(1, (0, 0), 50), stats(2, (0, 0), 40)
    assert ordered_pair(a, b) == (b, a)
    c = stats(3, (0, 0), 40)
    assert ordered_pair(c, b) == (b, c)
    assert ordered_pair(b, c) == (b, c)


def test_split_condition_examples():
    n = stats(1, (0, 0), 40)
    k = stats(2, (0, 10), 50)
    assert split_condition(80, n, k)
    assert split_condition(80, k, n)
    assert not split_condition(80, stats(1, (0, 0), 10), k)
    assert not split_condition(80, n, stats(2, (0, 20), 50))


def test_split_condition_rejects_zero_size():
    with pytest.raises(ValueError):
        split_condition(0, stats(1, (0, 0), 1), stats(2, (0, 1), 1))


def test_split_cost_midpoint_and_penalty():
    n, k = stats(1, (10, 0), 40), stats(2, (10, 10), 50)
    assert split_cost((10, 5), 80, n, k, 150.0) == 0.0
    far = stats(2, (10, 30), 50)
    assert split_cost((10, 5), 80, n, far, 150.0) == 1500.0
    assert split_cost((13, 9), 80, n, k, 150.0) == 5.0


def test_graph_one_track_one_candidate():
    g = build_graph([track(1, (0, 0))], [stats(1, (3, 4), 50)])
    pairs = {(e.src, e.dst): e.cost for e in g.edges}
    assert pairs[(track_node(1), cand_node(1))] == 5.0
    assert pairs[(track_node(1), DISAPPEAR)] == 150.0
    assert pairs[(APPEAR, cand_node(1))] == 0.0
    assert g.split_nodes == []


def test_graph_split_node_has_two_outgoing_edges():
    g = build_graph([track(1, (0, 0))], [stats(1, (3, 4), 50), stats(2, (6, 8), 50)])
    (s,) = g.split_nodes
    assert sorted(e.dst for e in g.out_edges(s)) == [cand_node(1), cand_node(2)]


def test_graph_roi_gating():
    inside = stats(1, (3, 4), 50)
    outside = stats(2, (90, 90), 50)
    g = build_graph([track(1, (0, 0), contains=lambda p: p[0] < 50)], [inside, outside])
    dsts = {e.dst for e in g.out_edges(track_node(1))}
    assert cand_node(1) in dsts and cand_node(2) not in dsts
    assert g.split_nodes == []
    # the unreachable candidate can still appear
    assert any(e.src == APPEAR and e.dst == cand_node(2) for e in g.edges)


def test_graph_without_candidates():
    g = build_graph([track(1, (0, 0)), track(2, (5, 5))], [])
    result = solve_matching(g)
    assert result.disappeared == [1, 2]
    assert result.total_cost == 300.0


def test_graph_has_no_merge_nodes():
    g = build_graph([track(1, (0, 0)), track(2, (1, 1))], [stats(1, (0, 1), 40)])
    for e in g.edges:
        if e.dst[0] == "O" and e.dst[1] == "cand":
            assert e.src[0] in ("O", "S", "A")


def test_solver_dominant_diagonal():
    cands = [stats(1, (0, 0), 50), stats(2, (100, 100), 50)]
    g = build_graph([track(1, (0, 0)), track(2, (100, 100))], cands)
    # overwrite with the exact costs of the worked example
    costs = {(1, 1): 1.0, (1, 2): 9.0, (2, 1): 9.0, (2, 2): 1.0}
    edges = []
    for e in g.edges:
        if e.src[0] == "O" and e.src[1] == "track" and e.dst[0] == "O":
            e = type(e)(e.src, e.dst, costs[(e.src[2], e.dst[2])], e.capacity)
        elif e.src[0] == "O" and e.dst[0] == "S":
            e = type(e)(e.src, e.dst, 1500.0, e.capacity)
        edges.append(e)
    g = MatchGraph(g.tracks, g.candidates, edges)
    r = solve_matching(g)
    assert r.links == [(1, 1), (2, 2)]
    assert r.total_cost == 2.0


def test_solver_prefers_valid_split():
    cands = [stats(1, (20, 14), 40), stats(2, (20, 26), 40)]
    g = build_graph([track(1, (20, 20), size=80)], cands)
    r = solve_matching(g)
    assert r.splits == [(1, 1, 2)]
    assert r.total_cost == 0.0
    assert r.total_cost == brute_min_cost(g)
    # the next best outcome is a link (6) plus a free appearance
    costs = sorted(c for _, c in enumerate_outcomes(g))
    assert costs[:2] == [0.0, 6.0]


def test_solver_tie_prefers_link_over_split():
    # link and split both cost 0: the link wins
    cands = [stats(1, (20, 20), 40), stats(2, (20, 14), 30), stats(3, (20, 26), 30)]
    g = build_graph([track(1, (20, 20), size=60)], cands)
    r = solve_matching(g)
    assert r.links == [(1, 1)] and r.splits == []


def test_solver_tie_prefers_lower_candidate_id():
    # equidistant candidates; the size ratio 0.25 rules out a split
    cands = [stats(1, (20, 23), 40), stats(2, (20, 17), 10)]
    g = build_graph([track(1, (20, 20), size=50)], cands)
    assert solve_matching(g).links == [(1, 1)]


def test_solver_disappears_when_everything_is_far():
    g = build_graph([track(1, (0, 0), disappear=5.0)], [stats(1, (30, 40), 50)])
    r = solve_matching(g)
    assert r.disappeared == [1] and r.appeared == [1] and r.total_cost == 5.0


def check_conservation(graph, result):
    flow = result_flows(graph, result)
    assert len(result.links) + len(result.splits) + len(result.disappeared) == len(graph.tracks)
    used = [c for _, c in result.links] + [c for s in result.splits for c in s[1:]] + result.appeared
    assert sorted(used) == sorted(graph.candidates)
    for e in graph.edges:
        assert 0 <= flow[(e.src, e.dst)] <= e.capacity
    nodes = {n for pair in flow for n in pair}
    for node in nodes - {SOURCE, SINK}:
        inflow = sum(f for (a, b), f in flow.items() if b == node)
        outflow = sum(f for (a, b), f in flow.items() if a == node)
        if node[0] == "S" and len(node) == 3:
            assert outflow == 2 * inflow
        else:
            assert inflow == outflow
    src_out = sum(f for (a, _), f in flow.items() if a == SOURCE)
    sink_in = sum(f for (_, b), f in flow.items() if b == SINK)
    assert sink_in == src_out + len(result.splits)


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_solver_optimal_and_conserving(seed):
    g = random_match_graph(np.random.default_rng(seed))
    r = solve_matching(g)
    assert r.total_cost == brute_min_cost(g)
    check_conservation(g, r)


def test_solver_full_reach_six_by_six():
    rng = np.random.default_rng(7)
    cands = [stats(i + 1, rng.uniform(0, 40, 2), rng.integers(30, 60)) for i in range(6)]
    tracks = [track(j + 1, rng.uniform(0, 40, 2), size=int(rng.integers(60, 110)), disappear=60.0)
              for j in range(6)]
    g = build_graph(tracks, cands)
    assert len(g.split_nodes) == 15
    r = solve_matching(g)
    assert r.total_cost == brute_min_cost(g)
    check_conservation(g, r)


def test_solver_deterministic():
    g = random_match_graph(np.random.default_rng(99))
    assert solve_matching(g) == solve_matching(g)


def test_solver_total_is_exact_sum():
    g = random_match_graph(np.random.default_rng(3))
    r = solve_matching(g)
    chosen = []
    for e in g.edges:
        if e.src[0] == "O" and e.src[1] == "track":
            tid = e.src[2]
            if (tid, e.dst[-1]) in r.links and e.dst[1] == "cand":
                chosen.append(e.cost)
            elif e.dst == DISAPPEAR and tid in r.disappeared:
                chosen.append(e.cost)
            elif e.dst[0] == "S" and (tid, e.dst[1], e.dst[2]) in r.splits:
                chosen.append(e.cost)
    assert r.total_cost == math.fsum(chosen)
