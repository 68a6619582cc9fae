"""Shared test helpers: independent oracles and random-instance generators.

Oracles here are deliberately written from first principles (subset scans,
pairwise loops, scipy optimizers) so they cannot share bugs with the library
implementations they check.
"""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from swarmgrad import DirectedNetwork, UndirectedGraph


def random_digraph(rng: np.random.Generator, n: int, p: float = 0.4) -> DirectedNetwork:
    """Random directed graph; ordered pairs included independently."""
    edges = {
        (i, j)
        for i in range(n)
        for j in range(n)
        if i != j and rng.random() < p
    }
    return DirectedNetwork(n=n, edges=frozenset(edges))


def random_undirected(rng: np.random.Generator, n: int, p: float = 0.5) -> UndirectedGraph:
    edges = {
        (i, j)
        for i in range(n)
        for j in range(i + 1, n)
        if rng.random() < p
    }
    return UndirectedGraph(n=n, edges=frozenset(edges))


def brute_maximal_cliques(g: UndirectedGraph) -> tuple[tuple[int, ...], ...]:
    """All maximal cliques by scanning every vertex subset (2^n oracle)."""
    adj = {i: set() for i in range(g.n)}
    for a, b in g.edges:
        adj[a].add(b)
        adj[b].add(a)

    def complete(sub: tuple[int, ...]) -> bool:
        return all(b in adj[a] for a, b in itertools.combinations(sub, 2))

    nodes = list(range(g.n))
    cliques = []
    for r in range(1, g.n + 1):
        for sub in itertools.combinations(nodes, r):
            if not complete(sub):
                continue
            sset = set(sub)
            if any(complete(tuple(sorted(sset | {v}))) for v in nodes if v not in sset):
                continue
            cliques.append(sub)
    return tuple(sorted(cliques))


def brute_min_injection(min_pts: np.ndarray, maj_pts: np.ndarray) -> float:
    """Minimum total squared distance over injective minority->majority maps."""
    m = min_pts.shape[1]
    best = np.inf
    for perm in itertools.permutations(range(maj_pts.shape[1]), m):
        cost = sum(
            float(np.sum((min_pts[:, k] - maj_pts[:, perm[k]]) ** 2))
            for k in range(m)
        )
        best = min(best, cost)
    return best


def scattered_state(rng: np.random.Generator, n: int, d: int = 2, box: float = 4.0) -> np.ndarray:
    return rng.uniform(-box, box, size=(d, n))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260819)
