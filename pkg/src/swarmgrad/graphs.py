"""Directed interaction networks, proximity graphs and clique enumeration.

Node ids are 0-based everywhere in memory; file formats are 1-based (see
`load_edge_list` / `save_edge_list`).  Directed edges are ordered pairs
(i, j) meaning "i senses j"; undirected edges are stored as (i, j) with
i < j.

Worst case: a graph on n nodes can have up to 3**(n//3) maximal cliques
(Moon-Moser), so `maximal_cliques` is exponential in the worst case.  The
intended regime is proximity graphs of a few dozen agents, where the count
stays small.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DirectedNetwork",
    "EdgeClassification",
    "UndirectedGraph",
    "classify_edges",
    "check_assumption1",
    "bidirectional_core",
    "undirected_closure",
    "proximity_graph",
    "two_range_digraph",
    "maximal_cliques",
    "cliques_containing",
    "local_subgraph",
    "generalized_partition",
    "load_edge_list",
    "save_edge_list",
    "load_graph_json",
    "save_graph_json",
]


def _check_nodes(n: int, pairs, allow_loops: bool = False) -> None:
    if n < 1:
        raise ValueError(f"need at least one node, got n={n}")
    for i, j in pairs:
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"edge ({i}, {j}) out of range for n={n}")
        if i == j and not allow_loops:
            raise ValueError(f"self-loop ({i}, {i}) not allowed")


@dataclass(frozen=True)
class DirectedNetwork:
    """Directed graph on nodes 0..n-1 with edge set of ordered pairs."""

    n: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self) -> None:
        object.__setattr__(self, "edges", frozenset(map(tuple, self.edges)))
        _check_nodes(self.n, self.edges)

    def out_neighbors(self, i: int) -> tuple[int, ...]:
        return tuple(sorted(j for (a, j) in self.edges if a == i))


@dataclass(frozen=True)
class UndirectedGraph:
    """Undirected graph; edges are (i, j) pairs with i < j.

    `nodes` is the set of nodes present.  It defaults to all of 0..n-1 and
    differs only for induced subgraphs (which keep original ids).
    """

    n: int
    edges: frozenset[tuple[int, int]]
    nodes: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        edges = frozenset(tuple(sorted(e)) for e in self.edges)
        object.__setattr__(self, "edges", edges)
        _check_nodes(self.n, edges)
        nodes = self.nodes if self.nodes else tuple(range(self.n))
        nodes = tuple(sorted(set(nodes)))
        object.__setattr__(self, "nodes", nodes)
        present = set(nodes)
        for i, j in edges:
            if i not in present or j not in present:
                raise ValueError(f"edge ({i}, {j}) touches a node outside {nodes}")

    def adjacency_masks(self) -> dict[int, int]:
        """Neighbor bitmasks keyed by node id (bit j set iff j adjacent)."""
        masks = {v: 0 for v in self.nodes}
        for i, j in self.edges:
            masks[i] |= 1 << j
            masks[j] |= 1 << i
        return masks

    def degree(self, i: int) -> int:
        return sum(1 for e in self.edges if i in e)


@dataclass(frozen=True)
class EdgeClassification:
    """Split of a directed edge set into bidirectional and one-way parts.

    e_ud: ordered pairs whose reverse is also an edge (closed under reversal).
    e_di: ordered pairs whose reverse is absent.
    v_t:  tail nodes, {i : (i, j) in e_di for some j}.
    v_h:  head nodes, {j : (i, j) in e_di for some i}.
    """

    e_ud: frozenset[tuple[int, int]]
    e_di: frozenset[tuple[int, int]]
    v_t: frozenset[int]
    v_h: frozenset[int]


def classify_edges(g: DirectedNetwork) -> EdgeClassification:
    e_ud = frozenset((i, j) for (i, j) in g.edges if (j, i) in g.edges)
    e_di = g.edges - e_ud
    v_t = frozenset(i for (i, _) in e_di)
    v_h = frozenset(j for (_, j) in e_di)
    return EdgeClassification(e_ud=e_ud, e_di=e_di, v_t=v_t, v_h=v_h)


def check_assumption1(g: DirectedNetwork) -> bool:
    """True iff no node is both a tail and a head of one-way edges."""
    c = classify_edges(g)
    return not (c.v_t & c.v_h)


def bidirectional_core(g: DirectedNetwork) -> UndirectedGraph:
    """Undirected graph of the mutually sensed pairs."""
    c = classify_edges(g)
    pairs = frozenset((i, j) for (i, j) in c.e_ud if i < j)
    return UndirectedGraph(g.n, pairs)


def undirected_closure(g: DirectedNetwork) -> UndirectedGraph:
    """Undirected graph of pairs sensed in at least one direction."""
    pairs = frozenset(tuple(sorted(e)) for e in g.edges)
    return UndirectedGraph(g.n, pairs)


def _pairwise_sq(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"state must be (d, n), got shape {x.shape}")
    diff = x[:, :, None] - x[:, None, :]
    return np.einsum("dij,dij->ij", diff, diff)


def proximity_graph(x: np.ndarray, delta: float) -> UndirectedGraph:
    """Graph with an edge iff the pair distance is <= delta (closed ball)."""
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    d2 = _pairwise_sq(x)
    n = d2.shape[0]
    lim = delta * delta
    edges = frozenset(
        (i, j) for i in range(n) for j in range(i + 1, n) if d2[i, j] <= lim
    )
    return UndirectedGraph(n, edges)


def adjacency_masks_from_state(x: np.ndarray, delta: float) -> list[int]:
    """Neighbor bitmasks of the delta-proximity graph (fast path).

    Equivalent to proximity_graph(x, delta).adjacency_masks() viewed as a
    list indexed by node.
    """
    d2 = _pairwise_sq(x)
    n = d2.shape[0]
    within = d2 <= delta * delta
    np.fill_diagonal(within, False)
    packed = np.packbits(within, axis=1, bitorder="little")
    row = packed.shape[1]
    raw = packed.tobytes()
    return [
        int.from_bytes(raw[i * row : (i + 1) * row], "little") for i in range(n)
    ]


def two_range_digraph(
    x: np.ndarray,
    group_a,
    delta_a: float,
    delta_b: float,
) -> DirectedNetwork:
    """Heterogeneous sensing network: group A sees to delta_a, B to delta_b.

    Edge (i, j) present iff i != j and the distance is within i's range.
    Requires delta_a > delta_b > 0.
    """
    if not (delta_a > delta_b > 0):
        raise ValueError(f"need delta_a > delta_b > 0, got {delta_a}, {delta_b}")
    d2 = _pairwise_sq(x)
    n = d2.shape[0]
    a = frozenset(group_a)
    if not a <= set(range(n)):
        raise ValueError("group_a contains out-of-range nodes")
    la, lb = delta_a * delta_a, delta_b * delta_b
    edges = set()
    for i in range(n):
        lim = la if i in a else lb
        for j in range(n):
            if i != j and d2[i, j] <= lim:
                edges.add((i, j))
    return DirectedNetwork(n, frozenset(edges))


def _bron_kerbosch(masks: list[int], cand: int, out: list[int]) -> None:
    # Iterative-friendly sizes here are tiny; plain recursion with pivoting.
    def expand(r: int, p: int, x: int) -> None:
        if p == 0 and x == 0:
            out.append(r)
            return
        px = p | x
        # pivot = vertex of p|x with most neighbors inside p
        best, pivot = -1, -1
        m = px
        while m:
            u = (m & -m).bit_length() - 1
            c = (p & masks[u]).bit_count()
            if c > best:
                best, pivot = c, u
            m &= m - 1
        ext = p & ~masks[pivot]
        while ext:
            low = ext & -ext
            v = low.bit_length() - 1
            expand(r | low, p & masks[v], x & masks[v])
            p &= ~low
            x |= low
            ext &= ~low

    expand(0, cand, 0)


def cliques_from_masks(masks: list[int], node_mask: int) -> list[tuple[int, ...]]:
    """Maximal cliques (as sorted id tuples) of the graph given by bitmasks.

    Only nodes with their bit set in node_mask participate.  Output is
    sorted lexicographically, so it is deterministic for a given graph.
    """
    raw: list[int] = []
    _bron_kerbosch(masks, node_mask, raw)
    cliques = []
    for m in raw:
        members = []
        while m:
            members.append((m & -m).bit_length() - 1)
            m &= m - 1
        cliques.append(tuple(members))
    cliques.sort()
    return cliques


def maximal_cliques(g: UndirectedGraph) -> tuple[tuple[int, ...], ...]:
    """All maximal cliques, each a sorted tuple, in lexicographic order.

    Isolated nodes appear as singleton cliques, so every node of g is
    covered.
    """
    masks_map = g.adjacency_masks()
    size = max(g.nodes) + 1 if g.nodes else 0
    masks = [0] * size
    node_mask = 0
    for v in g.nodes:
        masks[v] = masks_map[v]
        node_mask |= 1 << v
    return tuple(cliques_from_masks(masks, node_mask))


def cliques_containing(cliques, i: int) -> tuple[tuple[int, ...], ...]:
    return tuple(c for c in cliques if i in c)


def local_subgraph(x: np.ndarray, i: int, delta: float) -> UndirectedGraph:
    """Subgraph induced by agent i and its delta-neighbors (original ids).

    The maximal cliques of this subgraph that contain i are exactly the
    maximal cliques of the full proximity graph that contain i, which is
    what lets each agent enumerate its own cliques from local data.
    """
    d2 = _pairwise_sq(x)
    n = d2.shape[0]
    if not 0 <= i < n:
        raise ValueError(f"agent {i} out of range for n={n}")
    lim = delta * delta
    nodes = [j for j in range(n) if j == i or d2[i, j] <= lim]
    edges = frozenset(
        (a, b)
        for ai, a in enumerate(nodes)
        for b in nodes[ai + 1 :]
        if d2[a, b] <= lim
    )
    return UndirectedGraph(n, edges, nodes=tuple(nodes))


def generalized_partition(
    g: DirectedNetwork, n_a_hint=None
) -> tuple[frozenset[int], frozenset[int]]:
    """Split nodes into (N_A, N_B) for the projection controller.

    N_A = V_t union V_extra where V_extra is any subset of the nodes that
    are neither tails nor heads; n_a_hint proposes V_extra membership.
    Nodes in V_h can never be promoted.
    """
    c = classify_edges(g)
    if c.v_t & c.v_h:
        raise ValueError(
            f"tail/head overlap {sorted(c.v_t & c.v_h)}: no valid partition"
        )
    free = set(range(g.n)) - c.v_t - c.v_h
    if n_a_hint is None:
        extra = set()
    else:
        hint = set(n_a_hint)
        if hint & c.v_h:
            raise ValueError(
                f"hint promotes head nodes {sorted(hint & c.v_h)} into N_A"
            )
        extra = hint & free
    n_a = frozenset(c.v_t | extra)
    return n_a, frozenset(set(range(g.n)) - n_a)


def save_edge_list(g: DirectedNetwork, path) -> None:
    """Write one '<i> <j>' line per directed edge, 1-based, sorted."""
    lines = [f"{i + 1} {j + 1}" for i, j in sorted(g.edges)]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + ("\n" if lines else ""))


def load_edge_list(path, n: int | None = None) -> DirectedNetwork:
    """Read a 1-based '<i> <j>' edge list; n defaults to the max id seen."""
    edges = set()
    with open(path) as fh:
        for ln, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{ln}: expected 'i j', got {line!r}")
            i, j = int(parts[0]) - 1, int(parts[1]) - 1
            edges.add((i, j))
    if n is None:
        n = 1 + max((max(e) for e in edges), default=0)
    return DirectedNetwork(n, frozenset(edges))


def save_graph_json(g: DirectedNetwork, path) -> None:
    doc = {"n": g.n, "edges": [[i + 1, j + 1] for i, j in sorted(g.edges)]}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_graph_json(path) -> DirectedNetwork:
    with open(path) as fh:
        doc = json.load(fh)
    edges = frozenset((int(i) - 1, int(j) - 1) for i, j in doc["edges"])
    return DirectedNetwork(int(doc["n"]), edges)
