"""Coupled minimum-cost flow matching between active tracks and new objects.

The graph follows the usual source/sink layout: every active track sends one
unit of flow either to a candidate object, to a split node (which forwards one
unit to each of its two candidates), or to the disappearance node. Candidates
not fed by a track are fed by the appearance node at zero cost. There is no
merge node.

Because appearance is free, a feasible flow is fully described by the choice
each track makes, subject to every candidate receiving at most one unit. The
solver runs a depth-first branch and bound over those choices and returns a
provably optimal selection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from ..core_image import ObjectStats

SOURCE = ("S-",)
SINK = ("S+",)
APPEAR = ("A",)
DISAPPEAR = ("D",)

# tie-break rank among equal-cost outcomes
_KIND_RANK = {"link": 0, "split": 1, "disappear": 2}


def track_node(track_id: int) -> tuple:
    return ("O", "track", track_id)


def cand_node(cand_id: int) -> tuple:
    return ("O", "cand", cand_id)


def split_node(n: int, k: int) -> tuple:
    return ("S", min(n, k), max(n, k))


def matching_cost(predicted_position, candidate: ObjectStats) -> float:
    """Distance between the track's predicted position and a candidate centroid."""
    diff = np.asarray(predicted_position, dtype=np.float64) - np.asarray(candidate.centroid)
    return float(math.sqrt(float(np.dot(diff, diff))))


def ordered_pair(cand_a: ObjectStats, cand_b: ObjectStats) -> tuple[ObjectStats, ObjectStats]:
    """Return (n, k) with V_k >= V_n; equal sizes put the lower ID first."""
    if (cand_a.size, cand_a.id) > (cand_b.size, cand_b.id):
        return cand_b, cand_a
    return cand_a, cand_b


def split_condition(track_size: int, cand_n: ObjectStats, cand_k: ObjectStats,
                    alpha: float = 0.5, beta: float = 1.2, gamma_factor: float = 2.0) -> bool:
    """Plausibility of (n, k) being the two daughters of an object of ``track_size``."""
    if track_size < 1:
        raise ValueError("predecessor size must be >= 1")
    n, k = ordered_pair(cand_n, cand_k)
    ndim = n.ndim
    gamma = gamma_factor * track_size ** (1.0 / ndim)
    dist = float(np.linalg.norm(np.subtract(n.centroid, k.centroid)))
    return n.size / k.size > alpha and (n.size + k.size) / track_size < beta and dist < gamma


def split_cost(predicted_position, track_size: int, cand_n: ObjectStats, cand_k: ObjectStats,
               disappearance_cost: float, alpha: float = 0.5, beta: float = 1.2,
               gamma_factor: float = 2.0, rho_multiplier: float = 10.0) -> float:
    if not split_condition(track_size, cand_n, cand_k, alpha, beta, gamma_factor):
        return rho_multiplier * disappearance_cost
    mid = 0.5 * (np.asarray(cand_n.centroid) + np.asarray(cand_k.centroid))
    diff = np.asarray(predicted_position, dtype=np.float64) - mid
    return float(math.sqrt(float(np.dot(diff, diff))))


@dataclass(frozen=True)
class Edge:
    src: tuple
    dst: tuple
    cost: float
    capacity: int = 1


@dataclass
class MatchGraph:
    tracks: list[int]
    candidates: list[int]
    edges: list[Edge] = field(default_factory=list)

    @property
    def nodes(self) -> list[tuple]:
        seen = {}
        for e in self.edges:
            seen.setdefault(e.src, None)
            seen.setdefault(e.dst, None)
        return list(seen)

    @property
    def split_nodes(self) -> list[tuple]:
        return [n for n in self.nodes if n[0] == "S"]

    def out_edges(self, node) -> list[Edge]:
        return [e for e in self.edges if e.src == node]


@dataclass(frozen=True)
class TrackInput:
    """What the graph needs to know about one active track."""

    id: int
    predicted_position: tuple[float, ...]
    size: int
    roi_contains: object  # callable(point) -> bool
    disappearance_cost: float


def build_graph(tracks: list[TrackInput], candidates: list[ObjectStats], alpha: float = 0.5,
                beta: float = 1.2, gamma_factor: float = 2.0, rho_multiplier: float = 10.0) -> MatchGraph:
    candidates = sorted(candidates, key=lambda c: c.id)
    graph = MatchGraph(tracks=[t.id for t in tracks], candidates=[c.id for c in candidates])
    edges = graph.edges
    edges.append(Edge(SOURCE, APPEAR, 0.0, len(candidates)))
    for c in candidates:
        edges.append(Edge(APPEAR, cand_node(c.id), 0.0))
        edges.append(Edge(cand_node(c.id), SINK, 0.0))
    splits_seen = set()
    for t in tracks:
        node = track_node(t.id)
        edges.append(Edge(SOURCE, node, 0.0))
        reachable = [c for c in candidates if t.roi_contains(c.centroid)]
        for c in reachable:
            edges.append(Edge(node, cand_node(c.id), matching_cost(t.predicted_position, c)))
        for a, b in combinations(reachable, 2):
            s = split_node(a.id, b.id)
            cost = split_cost(t.predicted_position, t.size, a, b, t.disappearance_cost,
                              alpha, beta, gamma_factor, rho_multiplier)
            edges.append(Edge(node, s, cost))
            if s not in splits_seen:
                splits_seen.add(s)
                edges.append(Edge(s, cand_node(s[1]), 0.0))
                edges.append(Edge(s, cand_node(s[2]), 0.0))
        edges.append(Edge(node, DISAPPEAR, t.disappearance_cost))
    edges.append(Edge(DISAPPEAR, SINK, 0.0, len(tracks)))
    return graph


@dataclass
class MatchResult:
    links: list[tuple[int, int]]
    splits: list[tuple[int, int, int]]
    disappeared: list[int]
    appeared: list[int]
    total_cost: float


@dataclass(frozen=True)
class Option:
    """One outcome available to a track: the candidates it consumes and its cost."""

    kind: str
    cands: tuple[int, ...]
    cost: float

    def sort_key(self):
        return (self.cost, _KIND_RANK[self.kind], self.cands)


def track_options(graph: MatchGraph) -> dict[int, list[Option]]:
    """Per-track outcome lists read off the graph's outgoing track edges."""
    opts: dict[int, list[Option]] = {t: [] for t in graph.tracks}
    for e in graph.edges:
        if e.src[0] != "O" or e.src[1] != "track":
            continue
        tid = e.src[2]
        if e.dst == DISAPPEAR:
            opts[tid].append(Option("disappear", (), e.cost))
        elif e.dst[0] == "S":
            opts[tid].append(Option("split", (e.dst[1], e.dst[2]), e.cost))
        else:
            opts[tid].append(Option("link", (e.dst[2],), e.cost))
    for tid in opts:
        opts[tid].sort(key=Option.sort_key)
    return opts


def _prune_dominated(options: list[Option]) -> list[Option]:
    # an outcome costlier than disappearing can never beat it: disappearing
    # frees the same candidates, which then appear at zero cost
    leave = min((o.cost for o in options if o.kind == "disappear"), default=math.inf)
    return [o for o in options if o.cost <= leave]


def solve_matching(graph: MatchGraph) -> MatchResult:
    options = {t: _prune_dominated(o) for t, o in track_options(graph).items()}
    for t, o in options.items():
        if not o:
            raise ValueError(f"track {t} has no outgoing edge; the graph is malformed")
    # branch on the most constrained tracks first; ID keeps the order deterministic
    order = sorted(options, key=lambda t: (len(options[t]), t))
    n = len(order)
    best_cost = math.inf
    best_choice: list[Option] | None = None
    choice: list[Option] = []
    used: set[int] = set()
    tol = 1e-9

    def bound(depth: int) -> float:
        total = 0.0
        for t in order[depth:]:
            total += next(o.cost for o in options[t] if not used.intersection(o.cands))
        return total

    def dfs(depth: int, partial: float) -> None:
        nonlocal best_cost, best_choice
        if depth == n:
            total = math.fsum(o.cost for o in choice)
            if total < best_cost:
                best_cost, best_choice = total, list(choice)
            return
        if partial + bound(depth) > best_cost + tol * max(1.0, abs(best_cost)):
            return
        for opt in options[order[depth]]:
            if used.intersection(opt.cands):
                continue
            if partial + opt.cost > best_cost + tol * max(1.0, abs(best_cost)):
                break
            choice.append(opt)
            used.update(opt.cands)
            dfs(depth + 1, partial + opt.cost)
            used.difference_update(opt.cands)
            choice.pop()

    dfs(0, 0.0)
    assert best_choice is not None
    links, splits, gone = [], [], []
    taken: set[int] = set()
    for tid, opt in sorted(zip(order, best_choice), key=lambda x: x[0]):
        if opt.kind == "link":
            links.append((tid, opt.cands[0]))
        elif opt.kind == "split":
            splits.append((tid, *opt.cands))
        else:
            gone.append(tid)
        taken.update(opt.cands)
    appeared = [c for c in graph.candidates if c not in taken]
    return MatchResult(links, splits, gone, appeared, best_cost if n else 0.0)


def result_flows(graph: MatchGraph, result: MatchResult) -> dict[tuple, int]:
    """Edge flows (keyed by (src, dst)) realizing a match result; used to check conservation."""
    flow = {(e.src, e.dst): 0 for e in graph.edges}

    def push(src, dst):
        if (src, dst) not in flow:
            raise ValueError(f"result uses missing edge {src} -> {dst}")
        flow[(src, dst)] += 1

    for tid, cid in result.links:
        push(SOURCE, track_node(tid))
        push(track_node(tid), cand_node(cid))
        push(cand_node(cid), SINK)
    for tid, a, b in result.splits:
        s = split_node(a, b)
        push(SOURCE, track_node(tid))
        push(track_node(tid), s)
        for c in (a, b):
            push(s, cand_node(c))
            push(cand_node(c), SINK)
    for tid in result.disappeared:
        push(SOURCE, track_node(tid))
        push(track_node(tid), DISAPPEAR)
        push(DISAPPEAR, SINK)
    for cid in result.appeared:
        push(SOURCE, APPEAR)
        push(APPEAR, cand_node(cid))
        push(cand_node(cid), SINK)
    return flow
