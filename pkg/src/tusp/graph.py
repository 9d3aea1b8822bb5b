"""Activity graphs of shunting plans and their node-feature matrices."""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable

import numpy as np

from .yard import Activity, Plan

EDGE_CLASSES = ("unit_order", "movement_order", "facility_order")
KIND_CODES = {
    "arrival": "A", "departure": "D", "movement": "M", "parking": "P", "service": "S",
    "split": "SPL", "combine": "CMB", "turn": "TRN",
}
UNKNOWN = "UNK"
N_TEMPORAL = 4


def node_label(act: Activity) -> str:
    code = KIND_CODES[act.kind]
    if act.kind == "parking":
        return f"P#{act.track_id}"
    if act.kind == "service":
        return f"S#{act.task_kind}#{act.track_id}"
    return code


@dataclass(frozen=True)
class Node:
    label: str
    start: int
    end: int
    unit_ids: tuple[int, ...]


@dataclass(frozen=True)
class ActivityGraph:
    nodes: tuple[Node, ...]
    edges: tuple[tuple[int, int, str], ...]

    @property
    def n(self) -> int:
        return len(self.nodes)

    @cached_property
    def adjacency(self) -> np.ndarray:
        """Symmetric 0/1 matrix with zero diagonal; direction and class ignored."""
        a = np.zeros((self.n, self.n))
        for i, j, _ in self.edges:
            if i != j:
                a[i, j] = a[j, i] = 1.0
        return a

    def edge_counts(self) -> dict[str, int]:
        counts = {c: 0 for c in EDGE_CLASSES}
        for _, _, c in self.edges:
            counts[c] += 1
        return counts

    def labeled_edges(self) -> frozenset:
        key = lambda k: (self.nodes[k].label, self.nodes[k].start, self.nodes[k].end, self.nodes[k].unit_ids)
        return frozenset((key(i), key(j), c) for i, j, c in self.edges)


def plan_to_graph(plan: Plan) -> ActivityGraph:
    """One node per activity; unit, movement and facility precedence edges.

    Nodes come out in topological order of the directed edges, ties broken by
    ``(start, label, lowest unit id)``. Plans with overlapping activities can
    induce cycles; the smallest pending node is then released regardless of
    its remaining predecessors, which keeps the order total and deterministic.
    """
    raw: list[tuple[tuple, Node, Activity]] = []
    for uid in sorted(plan.activities):
        for seq, act in enumerate(plan.activities[uid]):
            node = Node(node_label(act), act.start, act.end, (uid,))
            raw.append(((act.start, node.label, uid, seq), node, act))
    index = {r[0]: k for k, r in enumerate(raw)}
    by_seq = {(r[0][2], r[0][3]): k for k, r in enumerate(raw)}

    edges: list[tuple[int, int, str]] = []
    for uid in sorted(plan.activities):
        for seq in range(1, len(plan.activities[uid])):
            edges.append((by_seq[uid, seq - 1], by_seq[uid, seq], "unit_order"))
    moves = sorted(r[0] for r in raw if r[2].kind == "movement")
    edges += [(index[a], index[b], "movement_order") for a, b in zip(moves, moves[1:])]
    by_track: dict[int, list[tuple]] = {}
    for key, _, act in raw:
        if act.kind == "service":
            by_track.setdefault(act.track_id, []).append(key)
    for tid in sorted(by_track):
        keys = sorted(by_track[tid])
        edges += [(index[a], index[b], "facility_order") for a, b in zip(keys, keys[1:])]

    order = _topological(len(raw), edges, [r[0] for r in raw])
    pos = {old: new for new, old in enumerate(order)}
    nodes = tuple(raw[k][1] for k in order)
    new_edges = tuple(sorted((pos[i], pos[j], c) for i, j, c in edges))
    return ActivityGraph(nodes, new_edges)


def _topological(n: int, edges, keys) -> list[int]:
    indeg = [0] * n
    succ: list[list[int]] = [[] for _ in range(n)]
    for i, j, _ in edges:
        succ[i].append(j)
        indeg[j] += 1
    heap = [(keys[k], k) for k in range(n) if indeg[k] == 0]
    heapq.heapify(heap)
    done = [False] * n
    order = []
    while len(order) < n:
        if not heap:
            k = min((keys[k], k) for k in range(n) if not done[k])[1]
            indeg[k] = 0
            heap.append((keys[k], k))
        _, k = heapq.heappop(heap)
        if done[k]:
            continue
        done[k] = True
        order.append(k)
        for j in succ[k]:
            indeg[j] -= 1
            if indeg[j] == 0 and not done[j]:
                heapq.heappush(heap, (keys[j], j))
    return order


@dataclass(frozen=True)
class LabelAlphabet:
    labels: tuple[str, ...]

    def __post_init__(self):
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("alphabet labels must be distinct")
        if UNKNOWN not in self.labels:
            raise ValueError(f"alphabet must reserve {UNKNOWN!r}")

    @classmethod
    def from_graphs(cls, graphs: Iterable[ActivityGraph]) -> LabelAlphabet:
        seen = {node.label for g in graphs for node in g.nodes}
        seen.discard(UNKNOWN)
        return cls((UNKNOWN,) + tuple(sorted(seen)))

    @cached_property
    def index(self) -> dict[str, int]:
        return {lab: k for k, lab in enumerate(self.labels)}

    def lookup(self, label: str) -> int:
        return self.index.get(label, self.index[UNKNOWN])

    def __len__(self) -> int:
        return len(self.labels)


def extract_features(
    graph: ActivityGraph, alphabet: LabelAlphabet, horizon: int, temporal: bool = True,
) -> np.ndarray:
    """Node-feature matrix ``X``: one-hot label block, then (optionally)
    ``[x_s, x_e, x_d, x_a]`` scaled by ``horizon`` and clipped to [0, 1].

    ``x_s`` is the start time, ``x_e`` the time left until the end of the
    horizon, ``x_d`` the duration and ``x_a`` the mean absolute start-time
    gap to the node's neighbours (0 for isolated nodes).
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    n, c = graph.n, len(alphabet)
    X = np.zeros((n, c + (N_TEMPORAL if temporal else 0)))
    for i, node in enumerate(graph.nodes):
        X[i, alphabet.lookup(node.label)] = 1.0
    if temporal and n:
        start = np.array([node.start for node in graph.nodes], dtype=float)
        end = np.array([node.end for node in graph.nodes], dtype=float)
        A = graph.adjacency
        deg = A.sum(axis=1)
        gaps = (A * np.abs(start[None, :] - start[:, None])).sum(axis=1)
        x_a = np.divide(gaps, deg, out=np.zeros(n), where=deg > 0)
        cols = np.stack([start, horizon - end, end - start, x_a], axis=1) / horizon
        X[:, c:] = np.clip(cols, 0.0, 1.0)
    return X


def graph_to_dict(graph: ActivityGraph) -> dict:
    return {
        "nodes": [
            {"label": nd.label, "start": nd.start, "end": nd.end, "unit_ids": list(nd.unit_ids)}
            for nd in graph.nodes
        ],
        "edges": [[i, j, c] for i, j, c in graph.edges],
    }


def graph_from_dict(d: dict) -> ActivityGraph:
    return ActivityGraph(
        tuple(Node(nd["label"], nd["start"], nd["end"], tuple(nd["unit_ids"])) for nd in d["nodes"]),
        tuple((i, j, c) for i, j, c in d["edges"]),
    )
