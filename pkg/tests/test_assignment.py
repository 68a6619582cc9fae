"""Injective point assignment: exhaustive and Hungarian solvers."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swarmgrad import AssignmentProblem, solve_brute_force, solve_hungarian
from swarmgrad.assignment import BRUTE_FORCE_LIMIT

from conftest import brute_min_injection


def make_problem(rng, m, big, d=2):
    return AssignmentProblem(
        minority_ids=tuple(range(m)),
        majority_ids=tuple(range(100, 100 + big)),
        minority_pts=rng.normal(size=(d, m)),
        majority_pts=rng.normal(size=(d, big)),
    )


class TestProblemValidation:
    def test_rejects_minority_larger_than_majority(self, rng):
        with pytest.raises(ValueError):
            make_problem(rng, 3, 2)

    def test_rejects_dimension_mismatch(self):
        with pytest.raises(ValueError):
            AssignmentProblem((0,), (1,), np.zeros((2, 1)), np.zeros((3, 1)))

    def test_rejects_id_count_mismatch(self):
        with pytest.raises(ValueError):
            AssignmentProblem((0, 1), (2,), np.zeros((2, 1)), np.zeros((2, 1)))


class TestBruteForce:
    def test_hand_instance(self):
        # minority at 0 and 10; majority at 1 and 9: the crossing-free map
        # (0->1, 10->9) costs 1+1=2, the crossed map costs 81+81
        p = AssignmentProblem(
            minority_ids=(0, 1),
            majority_ids=(2, 3),
            minority_pts=np.array([[0.0, 10.0]]),
            majority_pts=np.array([[1.0, 9.0]]),
        )
        a = solve_brute_force(p)
        assert a.pairs == ((0, 2), (1, 3))
        assert a.cost == pytest.approx(2.0)

    def test_unused_majority_allowed(self):
        p = AssignmentProblem(
            minority_ids=(5,),
            majority_ids=(7, 8),
            minority_pts=np.array([[0.0]]),
            majority_pts=np.array([[3.0, 0.5]]),
        )
        a = solve_brute_force(p)
        assert a.pairs == ((5, 8),)
        assert a.cost == pytest.approx(0.25)

    def test_empty_minority(self):
        p = AssignmentProblem((), (1, 2), np.zeros((2, 0)), np.zeros((2, 2)))
        assert solve_brute_force(p) == solve_hungarian(p)
        assert solve_brute_force(p).pairs == ()
        assert solve_brute_force(p).cost == 0.0

    def test_matches_permutation_oracle(self, rng):
        for _ in range(40):
            m = int(rng.integers(1, 5))
            big = int(rng.integers(m, 7))
            p = make_problem(rng, m, big)
            a = solve_brute_force(p)
            want = brute_min_injection(p.minority_pts, p.majority_pts)
            assert a.cost == pytest.approx(want, abs=1e-12)

    def test_tie_break_is_lexicographic(self):
        # two majority points equidistant from one minority point: pick the
        # smaller majority id
        p = AssignmentProblem(
            minority_ids=(0,),
            majority_ids=(9, 3),
            minority_pts=np.array([[0.0], [0.0]]),
            majority_pts=np.array([[1.0, -1.0], [0.0, 0.0]]),
        )
        assert solve_brute_force(p).pairs == ((0, 3),)

    def test_tie_break_square_is_deterministic(self):
        # unit square: minority on the left edge, majority on the right edge;
        # straight and crossed maps cost the same, lexicographic pick wins
        p = AssignmentProblem(
            minority_ids=(0, 1),
            majority_ids=(2, 3),
            minority_pts=np.array([[0.0, 0.0], [0.0, 1.0]]),
            majority_pts=np.array([[1.0, 1.0], [0.5, 0.5]]),
        )
        a = solve_brute_force(p)
        assert a.pairs == ((0, 2), (1, 3))

    def test_size_guard(self, rng):
        p = make_problem(rng, BRUTE_FORCE_LIMIT + 1, BRUTE_FORCE_LIMIT + 1)
        with pytest.raises(ValueError):
            solve_brute_force(p)


class TestHungarian:
    def test_cost_equals_brute_force(self, rng):
        for _ in range(60):
            m = int(rng.integers(1, 7))
            big = int(rng.integers(m, 9))
            p = make_problem(rng, m, big, d=int(rng.integers(1, 4)))
            assert solve_hungarian(p).cost == pytest.approx(
                solve_brute_force(p).cost, abs=1e-12
            )

    def test_resolves_scrambled_ids(self, rng):
        # ids arrive unsorted; pairs must come back keyed by the real ids
        p = AssignmentProblem(
            minority_ids=(4, 1),
            majority_ids=(8, 6),
            minority_pts=np.array([[0.0, 10.0]]),
            majority_pts=np.array([[0.1, 9.9]]),
        )
        for solve in (solve_brute_force, solve_hungarian):
            a = solve(p)
            assert dict(a.pairs) == {4: 8, 1: 6}
            assert a.pairs == tuple(sorted(a.pairs))

    def test_map_is_injective(self, rng):
        for _ in range(40):
            m = int(rng.integers(1, 7))
            p = make_problem(rng, m, int(rng.integers(m, 10)))
            a = solve_hungarian(p)
            used = [j for _, j in a.pairs]
            assert len(set(used)) == len(used)
            assert [i for i, _ in a.pairs] == sorted(p.minority_ids)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 2**28 - 1), st.integers(1, 6), st.integers(0, 3))
    def test_optimal_on_random_instances(self, seed, m, extra):
        rng = np.random.default_rng(seed)
        p = make_problem(rng, m, m + extra)
        h = solve_hungarian(p)
        b = solve_brute_force(p)
        assert h.cost == pytest.approx(b.cost, abs=1e-12)
        # any other injection costs at least as much
        assert h.cost <= brute_min_injection(p.minority_pts, p.majority_pts) + 1e-12
