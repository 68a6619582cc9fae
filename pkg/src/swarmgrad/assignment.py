"""Minority-to-majority point assignment (injective, squared-distance cost).

Two independent solvers: an exhaustive one used for small instances and as
the reference in tests, and a Hungarian one (scipy) for larger instances.
Cost of a map is the sum of squared pair distances.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import linear_sum_assignment

__all__ = ["AssignmentProblem", "AssignmentMap", "solve_brute_force", "solve_hungarian"]

BRUTE_FORCE_LIMIT = 8


@dataclass(frozen=True)
class AssignmentProblem:
    """Match each minority point to a distinct majority point.

    minority_pts / majority_pts are (d, m) and (d, M) column stacks with
    m <= M; ids name the columns (agent ids, kept for reporting).
    """

    minority_ids: tuple[int, ...]
    majority_ids: tuple[int, ...]
    minority_pts: np.ndarray
    majority_pts: np.ndarray

    def __post_init__(self) -> None:
        mn = np.asarray(self.minority_pts, dtype=float)
        mj = np.asarray(self.majority_pts, dtype=float)
        object.__setattr__(self, "minority_pts", mn)
        object.__setattr__(self, "majority_pts", mj)
        if mn.ndim != 2 or mj.ndim != 2 or mn.shape[0] != mj.shape[0]:
            raise ValueError(f"point stacks must be (d, m)/(d, M), got {mn.shape}, {mj.shape}")
        if len(self.minority_ids) != mn.shape[1] or len(self.majority_ids) != mj.shape[1]:
            raise ValueError("id count does not match point count")
        if mn.shape[1] > mj.shape[1]:
            raise ValueError(
                f"minority larger than majority ({mn.shape[1]} > {mj.shape[1]})"
            )


@dataclass(frozen=True)
class AssignmentMap:
    """pairs: ((minority_id, majority_id), ...) sorted by minority id."""

    pairs: tuple[tuple[int, int], ...]
    cost: float

    def as_dict(self) -> dict[int, int]:
        return dict(self.pairs)


def _cost_matrix(p: AssignmentProblem) -> np.ndarray:
    diff = p.minority_pts[:, :, None] - p.majority_pts[:, None, :]
    return np.einsum("dij,dij->ij", diff, diff)


def _sorted_problem(p: AssignmentProblem):
    """Reorder both sides by ascending id so index order is id order."""
    mo = np.argsort(p.minority_ids, kind="stable")
    jo = np.argsort(p.majority_ids, kind="stable")
    mn_ids = tuple(p.minority_ids[k] for k in mo)
    mj_ids = tuple(p.majority_ids[k] for k in jo)
    return mn_ids, mj_ids, p.minority_pts[:, mo], p.majority_pts[:, jo]


@lru_cache(maxsize=256)
def _injection_table(m: int, big: int) -> np.ndarray:
    """All injections [m] -> [big] as a (count, m) int array, lexicographic."""
    count = 1
    for k in range(m):
        count *= big - k
    if count > 2_000_000:
        raise ValueError(f"{count} injections from {m} into {big}: too many")
    table = np.fromiter(
        itertools.chain.from_iterable(itertools.permutations(range(big), m)),
        dtype=np.intp,
        count=count * m,
    )
    return table.reshape(count, m)


def solve_brute_force(p: AssignmentProblem) -> AssignmentMap:
    """Exhaustive minimum over all injections.

    Ties go to the lexicographically smallest majority-id vector (minority
    taken in ascending id order).  Guarded to small minorities.
    """
    m = len(p.minority_ids)
    if m > BRUTE_FORCE_LIMIT:
        raise ValueError(f"brute force limited to {BRUTE_FORCE_LIMIT}, got {m}")
    if m == 0:
        return AssignmentMap(pairs=(), cost=0.0)
    mn_ids, mj_ids, mn, mj = _sorted_problem(p)
    cost = np.einsum(
        "dij,dij->ij", mn[:, :, None] - mj[:, None, :], mn[:, :, None] - mj[:, None, :]
    )
    table = _injection_table(m, len(mj_ids))
    totals = cost[np.arange(m)[None, :], table].sum(axis=1)
    best = int(np.argmin(totals))  # first minimum = lexicographically smallest
    pick = table[best]
    pairs = tuple((mn_ids[a], mj_ids[int(pick[a])]) for a in range(m))
    return AssignmentMap(pairs=pairs, cost=float(totals[best]))


def solve_hungarian(p: AssignmentProblem) -> AssignmentMap:
    """Polynomial-time exact solve; tie-breaking may differ from brute force."""
    if len(p.minority_ids) == 0:
        return AssignmentMap(pairs=(), cost=0.0)
    mn_ids, mj_ids, mn, mj = _sorted_problem(p)
    cost = np.einsum(
        "dij,dij->ij", mn[:, :, None] - mj[:, None, :], mn[:, :, None] - mj[:, None, :]
    )
    rows, cols = linear_sum_assignment(cost)
    pairs = tuple(
        sorted((mn_ids[int(r)], mj_ids[int(c)]) for r, c in zip(rows, cols))
    )
    return AssignmentMap(pairs=pairs, cost=float(cost[rows, cols].sum()))
