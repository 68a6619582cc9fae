"""Team objectives: distance-based formation and clique-based matching.

States are column stacks x of shape (d, n); agent i's position is x[:, i].
Formation evaluation also accepts leading batch dimensions (..., d, n),
which the batch experiment runner relies on.

Both objectives expose value(x), gradient(x) and a fused evaluate(x) that
returns (value, gradient, curvature) where curvature is an upper bound on
the Hessian norm along the current configuration, used for the per-step
descent allowance in the simulator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assignment import (
    BRUTE_FORCE_LIMIT,
    AssignmentMap,
    AssignmentProblem,
    solve_brute_force,
    solve_hungarian,
)
from .graphs import adjacency_masks_from_state, cliques_from_masks

__all__ = [
    "FormationSpec",
    "FormationObjective",
    "MatchingSpec",
    "CliqueMatchingObjective",
    "minority_majority",
    "finite_difference_gradient",
]


@dataclass(frozen=True)
class FormationSpec:
    """Desired inter-agent distances on an undirected edge set."""

    n: int
    edges: tuple[tuple[int, int], ...]
    distances: tuple[float, ...]

    def __post_init__(self) -> None:
        edges = tuple(tuple(sorted(e)) for e in self.edges)
        if len(set(edges)) != len(edges):
            raise ValueError("duplicate edges in formation spec")
        if len(edges) != len(self.distances):
            raise ValueError("edge/distance count mismatch")
        order = sorted(range(len(edges)), key=lambda k: edges[k])
        object.__setattr__(self, "edges", tuple(edges[k] for k in order))
        object.__setattr__(
            self, "distances", tuple(float(self.distances[k]) for k in order)
        )
        for (i, j), d in zip(self.edges, self.distances):
            if not (0 <= i < j < self.n):
                raise ValueError(f"bad edge ({i}, {j}) for n={self.n}")
            if d <= 0:
                raise ValueError(f"desired distance must be positive, got {d}")

    @staticmethod
    def from_positions(n: int, edges, ref: np.ndarray) -> "FormationSpec":
        """Build a spec whose desired distances are read off a reference shape."""
        ref = np.asarray(ref, dtype=float)
        es = [tuple(sorted(e)) for e in edges]
        ds = [float(np.linalg.norm(ref[:, i] - ref[:, j])) for i, j in es]
        return FormationSpec(n=n, edges=tuple(es), distances=tuple(ds))


class FormationObjective:
    """V(x) = sum over ordered neighbor pairs of (||xi-xj||^2 - d_ij^2)^2 / 8.

    Each undirected edge is counted in both directions, so the value equals
    the unordered-edge sum of (||z||^2 - d^2)^2 / 4.
    """

    def __init__(self, spec: FormationSpec):
        self.spec = spec
        self._ei = np.array([e[0] for e in spec.edges], dtype=np.intp)
        self._ej = np.array([e[1] for e in spec.edges], dtype=np.intp)
        self._dd2 = np.array(spec.distances, dtype=float) ** 2
        incident: list[list[tuple[int, int, float]]] = [[] for _ in range(spec.n)]
        for (i, j), d2 in zip(spec.edges, self._dd2):
            incident[i].append((i, j, d2))
            incident[j].append((j, i, d2))
        self._incident = incident

    def evaluate(self, x: np.ndarray):
        x = np.asarray(x, dtype=float)
        z = x[..., :, self._ei] - x[..., :, self._ej]
        sq = np.einsum("...de,...de->...e", z, z)
        c = sq - self._dd2
        value = 0.25 * np.einsum("...e,...e->...", c, c)
        grad = np.zeros_like(x)
        for e in range(len(self._ei)):
            pull = c[..., e, None] * z[..., :, e]
            grad[..., :, self._ei[e]] += pull
            grad[..., :, self._ej[e]] -= pull
        curvature = np.einsum("...e->...", 2.0 * (3.0 * sq + self._dd2))
        return value, grad, curvature

    def value(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        z = x[..., :, self._ei] - x[..., :, self._ej]
        sq = np.einsum("...de,...de->...e", z, z)
        c = sq - self._dd2
        return 0.25 * np.einsum("...e,...e->...", c, c)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.evaluate(x)[1]

    def gradient_i(self, x: np.ndarray, i: int) -> np.ndarray:
        """Gradient block of one agent, computed from its own edges only."""
        x = np.asarray(x, dtype=float)
        g = np.zeros(x.shape[0])
        for a, b, d2 in self._incident[i]:
            z = x[:, a] - x[:, b]
            g += (z @ z - d2) * z
        return g


@dataclass(frozen=True)
class MatchingSpec:
    """Two agent groups and a sensing radius for the matching objective.

    tie_break picks the minority group inside a clique with equal counts:
    "A" treats the group-A members as the minority side, "B" the opposite.
    """

    n: int
    group_a: frozenset[int]
    delta: float
    tie_break: str = "A"

    def __post_init__(self) -> None:
        object.__setattr__(self, "group_a", frozenset(self.group_a))
        if not self.group_a <= set(range(self.n)):
            raise ValueError("group_a contains out-of-range agents")
        if self.delta <= 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.tie_break not in ("A", "B"):
            raise ValueError(f"tie_break must be 'A' or 'B', got {self.tie_break!r}")


def minority_majority(members, group_a, tie_break: str = "A"):
    """Split clique members into (minority, majority) tuples by group count."""
    ca = tuple(sorted(m for m in members if m in group_a))
    cb = tuple(sorted(m for m in members if m not in group_a))
    if len(ca) < len(cb):
        return ca, cb
    if len(cb) < len(ca):
        return cb, ca
    return (ca, cb) if tie_break == "A" else (cb, ca)


class CliqueMatchingObjective:
    """Sum over maximal cliques of half the squared minority-majority mismatch.

    For each maximal clique of the delta-proximity graph, the members of the
    locally smaller group are optimally matched (injectively) to members of
    the larger group and the clique contributes half the summed squared pair
    distances.  Cliques inside a single group contribute zero.
    """

    def __init__(self, spec: MatchingSpec):
        self.spec = spec
        self._ga = spec.group_a
        self._full_mask = (1 << spec.n) - 1

    def cliques_at(self, x: np.ndarray):
        masks = adjacency_masks_from_state(np.asarray(x, dtype=float), self.spec.delta)
        return cliques_from_masks(masks, self._full_mask)

    def _clique_assignment(self, x: np.ndarray, clique) -> AssignmentMap:
        mn, mj = minority_majority(clique, self._ga, self.spec.tie_break)
        if not mn:
            return AssignmentMap(pairs=(), cost=0.0)
        if len(mn) == 1:
            # nearest majority member; first minimum keeps the smallest id
            diff = x[:, list(mj)] - x[:, mn[0], None]
            d2 = np.einsum("dj,dj->j", diff, diff)
            k = int(np.argmin(d2))
            return AssignmentMap(pairs=((mn[0], mj[k]),), cost=float(d2[k]))
        prob = AssignmentProblem(
            minority_ids=mn,
            majority_ids=mj,
            minority_pts=x[:, list(mn)],
            majority_pts=x[:, list(mj)],
        )
        if len(clique) <= BRUTE_FORCE_LIMIT:
            return solve_brute_force(prob)
        return solve_hungarian(prob)

    def evaluate(self, x: np.ndarray, cliques=None):
        """Fused (value, gradient, curvature); pass cliques to hold the graph fixed."""
        x = np.asarray(x, dtype=float)
        if x.ndim != 2:
            raise ValueError(f"matching objective needs a (d, n) state, got {x.shape}")
        if cliques is None:
            cliques = self.cliques_at(x)
        value = 0.0
        grad = np.zeros_like(x)
        for clique in cliques:
            amap = self._clique_assignment(x, clique)
            value += 0.5 * amap.cost
            for a, b in amap.pairs:
                z = x[:, a] - x[:, b]
                grad[:, a] += z
                grad[:, b] -= z
        curvature = 2.0 * len(cliques)
        return value, grad, curvature

    def value(self, x: np.ndarray, cliques=None) -> float:
        return self.evaluate(x, cliques)[0]

    def gradient(self, x: np.ndarray, cliques=None) -> np.ndarray:
        return self.evaluate(x, cliques)[1]

    def gradient_i(self, x: np.ndarray, i: int, cliques=None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if cliques is None:
            cliques = self.cliques_at(x)
        g = np.zeros(x.shape[0])
        for clique in cliques:
            if i not in clique:
                continue
            amap = self._clique_assignment(x, clique)
            for a, b in amap.pairs:
                if a == i:
                    g += x[:, a] - x[:, b]
                elif b == i:
                    g -= x[:, a] - x[:, b]
        return g

    def structure_key(self, x: np.ndarray):
        """Cliques plus per-clique optimal pairs; changes only at switches."""
        cliques = self.cliques_at(x)
        pairs = tuple(self._clique_assignment(np.asarray(x, float), c).pairs for c in cliques)
        return tuple(cliques), pairs


def finite_difference_gradient(value_fn, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of a scalar field over a (d, n) state."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        xp = x.copy()
        xm = x.copy()
        xp[idx] += h
        xm[idx] -= h
        g[idx] = (value_fn(xp) - value_fn(xm)) / (2.0 * h)
    return g
