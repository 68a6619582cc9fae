"""Simulation loop, run metrics, local-convergence radii, CSV export."""

from __future__ import annotations

import csv

import numpy as np
import pytest

from swarmgrad import (
    CliqueMatchingObjective,
    ControllerParams,
    FormationObjective,
    FormationSpec,
    GradientFlowController,
    MatchingSpec,
    ProposedController,
    SimConfig,
    epsilon_of_target,
    formation_error,
    global_assignment,
    input_norm,
    matched_pairs,
    sample_in_ball,
    simulate,
    trajectory_to_csv,
    zeta_rates,
)
from swarmgrad.control import StepEval

from conftest import scattered_state


def pair_controller(lam=1.2, eta=0.6, kappa=0.0, mu=0.6, delta_a=4.0, delta_b=1.5):
    """One informed agent (id 0) and one partner (id 1)."""
    group_a = frozenset({0})
    v_ud = CliqueMatchingObjective(MatchingSpec(2, group_a, delta_b))
    v_bar = CliqueMatchingObjective(MatchingSpec(2, group_a, delta_a))
    params = ControllerParams.uniform(2, group_a, lam, eta, kappa, mu)
    return ProposedController(params, v_ud, v_bar), params


class BlowUpController:
    """Doubles an exploding input every step until floats overflow."""

    def __init__(self):
        self.scale = 1e160

    def step_eval(self, x):
        self.scale *= 1e40
        return StepEval(np.full_like(x, self.scale), 0.0, 0.0, None)


class TestSimConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            SimConfig(t_final=0.0, dt=0.1)
        with pytest.raises(ValueError):
            SimConfig(t_final=1.0, dt=-0.1)
        with pytest.raises(ValueError):
            SimConfig(t_final=1.0, dt=0.1, integrator="heun")
        with pytest.raises(ValueError):
            SimConfig(t_final=1.0, dt=0.1, record_stride=0)
        with pytest.raises(ValueError):
            SimConfig(t_final=1e9, dt=1e-6)


class TestSimulate:
    def test_equilibrium_state_stays_put(self):
        ctrl, _ = pair_controller()
        x0 = np.array([[2.0, 2.0], [1.0, 1.0]])  # matched exactly
        traj = simulate(x0, ctrl, SimConfig(t_final=0.5, dt=0.01))
        assert not traj.diverged
        assert np.array_equal(traj.final_state, x0)
        assert np.allclose(traj.inputs, 0.0, atol=1e-15)

    def test_sampling_grid_and_stride(self):
        ctrl, _ = pair_controller()
        x0 = np.array([[0.0, 1.0], [0.0, 0.0]])
        traj = simulate(x0, ctrl, SimConfig(t_final=1.0, dt=0.1, record_stride=3))
        # steps 0..10: kept at k % 3 == 0 plus the forced final step
        assert traj.times == pytest.approx([0.0, 0.3, 0.6, 0.9, 1.0])
        assert traj.states.shape == (5, 2, 2)
        assert traj.inputs.shape == (5, 2, 2)
        assert traj.v_ud.shape == (5,)

    def test_divergence_flagged_not_raised(self):
        traj = simulate(
            np.ones((2, 3)), BlowUpController(), SimConfig(t_final=10.0, dt=0.1)
        )
        assert traj.diverged
        assert np.all(np.isfinite(traj.states))  # recorded states stay finite

    def test_rejects_flat_initial_state(self):
        ctrl, _ = pair_controller()
        with pytest.raises(ValueError):
            simulate(np.zeros(4), ctrl, SimConfig(t_final=0.1, dt=0.1))

    def test_pair_gap_decays_at_combined_rate(self):
        # matched pair inside the short range: the gap obeys
        # gap' = -(zeta_A + zeta_B) * gap with zeta_A + zeta_B = 1.5 here
        ctrl, params = pair_controller()
        x0 = np.array([[0.0, 0.4], [0.0, 0.0]])
        cfg = SimConfig(t_final=2.0, dt=1e-3, integrator="rk4", record_stride=100)
        traj = simulate(x0, ctrl, cfg)
        gaps = np.linalg.norm(traj.states[:, :, 0] - traj.states[:, :, 1], axis=1)
        slope = (np.log(gaps[-1]) - np.log(gaps[0])) / (traj.times[-1] - traj.times[0])
        rates = zeta_rates(x0, params, delta_a=4.0, delta_b=1.5)
        assert rates == pytest.approx([0.9, 0.6])
        assert slope == pytest.approx(-(rates[0] + rates[1]), rel=5e-2)

    def test_rk4_tracks_exact_solution(self):
        ctrl, _ = pair_controller()
        x0 = np.array([[0.0, 0.4], [0.0, 0.0]])
        cfg = SimConfig(t_final=1.0, dt=1e-2, integrator="rk4")
        traj = simulate(x0, ctrl, cfg)
        gap = float(np.linalg.norm(traj.final_state[:, 0] - traj.final_state[:, 1]))
        assert gap == pytest.approx(0.4 * np.exp(-1.5), rel=1e-6)

    def test_euler_error_shrinks_linearly(self):
        ctrl, _ = pair_controller()
        x0 = np.array([[0.0, 0.4], [0.0, 0.0]])
        exact = 0.4 * np.exp(-1.5)
        errs = []
        for dt in (1e-2, 5e-3, 2.5e-3):
            traj = simulate(x0, ctrl, SimConfig(t_final=1.0, dt=dt))
            gap = float(np.linalg.norm(traj.final_state[:, 0] - traj.final_state[:, 1]))
            errs.append(abs(gap - exact))
        assert errs[0] > errs[1] > errs[2]
        assert errs[0] / errs[1] == pytest.approx(2.0, rel=0.2)

    def test_descent_audit_clean_on_smooth_runs(self, rng):
        spec = FormationSpec(3, ((0, 1), (1, 2), (0, 2)), (1.0, 1.0, 1.0))
        v = FormationObjective(spec)
        ctrl = GradientFlowController(nu=np.full(3, 0.5), v_ud=v)
        for seed in range(3):
            x0 = np.random.default_rng(seed).uniform(-2, 2, size=(2, 3))
            traj = simulate(x0, ctrl, SimConfig(t_final=2.0, dt=1e-3))
            assert traj.descent_violations == 0
            assert traj.v_ud[-1] <= traj.v_ud[0]

    def test_matching_run_keeps_graph_keys(self):
        ctrl, _ = pair_controller()
        x0 = np.array([[0.0, 1.0], [0.0, 0.0]])
        traj = simulate(x0, ctrl, SimConfig(t_final=0.2, dt=0.1))
        assert traj.graph_keys is not None
        assert len(traj.graph_keys) == len(traj.times)


# ---------------------------------------------------------------------------
# metrics


class TestFormationError:
    def test_zero_at_reference(self):
        ref = np.array([[0.0, 1.0, 1.0, 0.0], [0.0, 0.0, 1.0, 1.0]])
        spec = FormationSpec.from_positions(4, ((0, 1), (1, 2), (2, 3)), ref)
        assert formation_error(ref, spec) == 0.0

    def test_sums_absolute_mismatches(self):
        spec = FormationSpec(3, ((0, 1), (1, 2)), (1.0, 2.0))
        x = np.array([[0.0, 2.0, 2.0], [0.0, 0.0, 3.0]])
        # |2 - 1| + |3 - 2| = 2
        assert formation_error(x, spec) == pytest.approx(2.0)


class TestInputNorm:
    def test_frobenius(self):
        assert input_norm(np.array([[3.0, 0.0], [0.0, 4.0]])) == pytest.approx(5.0)
        assert input_norm(np.zeros((2, 5))) == 0.0


class TestGlobalAssignment:
    def test_minority_side_selected_globally(self, rng):
        x = scattered_state(rng, 5)
        amap = global_assignment(x, group_a=[0, 1])  # 2 vs 3: group A is minority
        assert [i for i, _ in amap.pairs] == [0, 1]

    def test_counts_near_partners_strictly_inside_tol(self):
        x = np.array(
            [[0.0, 5.0, 10.0, 0.0, 5.005, 30.0], [0.0] * 6]
        )
        # minority 0,1,2; partners at 0 (exact), 5.005 (off by 5e-3), 30 (far)
        hits, amap = matched_pairs(x, group_a=[0, 1, 2], tol=1e-2)
        assert hits == 2
        assert dict(amap.pairs)[0] == 3

    def test_tol_boundary_excluded(self):
        x = np.array([[0.0, 0.01], [0.0, 0.0]])
        hits, _ = matched_pairs(x, group_a=[0], tol=1e-2)
        assert hits == 0  # strict inequality at exactly tol
        hits, _ = matched_pairs(x, group_a=[0], tol=1.1e-2)
        assert hits == 1


class TestZetaRates:
    def test_isolated_pair_hand_values(self):
        params = ControllerParams.uniform(2, {0}, lam=1.2, eta=0.6, kappa=0.0, mu=0.6)
        x = np.array([[0.0, 1.0], [0.0, 0.0]])
        z = zeta_rates(x, params, delta_a=4.0, delta_b=1.5)
        # informed: (1.2 * 1 + 0.6 * 1) / 2; partner: 0.6 * 1
        assert z == pytest.approx([0.9, 0.6])

    def test_kappa_contributes_twice(self):
        params = ControllerParams.uniform(2, {0}, lam=1.2, eta=0.6, kappa=0.5, mu=0.6)
        x = np.array([[0.0, 1.0], [0.0, 0.0]])
        z = zeta_rates(x, params, delta_a=4.0, delta_b=1.5)
        assert z[0] == pytest.approx(0.5 * (1.2 + (2 * 0.5 + 0.6)))

    def test_counts_cliques_per_graph(self, rng):
        # three agents in a short-range chain: middle agent belongs to two
        # short-range cliques
        params = ControllerParams.uniform(3, set(), lam=1.0, eta=1.0, kappa=0.0, mu=1.0)
        x = np.array([[0.0, 1.0, 2.0], [0.0, 0.0, 0.0]])
        z = zeta_rates(x, params, delta_a=5.0, delta_b=1.2)
        assert z == pytest.approx([1.0, 2.0, 1.0])


# ---------------------------------------------------------------------------
# attraction radii around matched targets


def two_matched_pairs(separation=6.0):
    """Minority agents 0, 2 sitting exactly on partners 1, 3."""
    return np.array(
        [[0.0, 0.0, separation, separation], [0.0, 0.0, 0.0, 0.0]]
    )


class TestEpsilonOfTarget:
    def test_hand_example(self):
        # pairs separated by 6 with ranges 3 / 1.5: cross distance 6 gives
        # eps0 = 1, eps_A = 1.5, eps_B = 2.25, capped by delta_B/2 = 0.75
        ball = epsilon_of_target(
            two_matched_pairs(), group_a=[0, 2], delta_a=3.0, delta_b=1.5
        )
        assert ball.eps0 == pytest.approx(1.0)
        assert ball.eps_a == pytest.approx(1.5)
        assert ball.eps_b == pytest.approx(2.25)
        assert ball.eps == pytest.approx(0.75)

    def test_rejects_unmatched_state(self):
        y = two_matched_pairs()
        y[0, 0] += 0.5  # minority agent pulled off its partner
        with pytest.raises(ValueError):
            epsilon_of_target(y, group_a=[0, 2], delta_a=3.0, delta_b=1.5)

    def test_coincident_majority_has_no_ball(self):
        # a third majority agent on top of a partner zeroes the cross distance
        y = np.array([[0.0, 0.0, 6.0, 6.0, 6.0], [0.0] * 5])
        ball = epsilon_of_target(y, group_a=[0, 2], delta_a=3.0, delta_b=1.5)
        assert ball.eps0 == 0.0
        assert ball.eps == 0.0

    def test_threshold_distance_has_no_ball(self):
        # non-partner pair exactly at the long range: no margin to perturb
        ball = epsilon_of_target(
            two_matched_pairs(separation=3.0), group_a=[0, 2], delta_a=3.0, delta_b=1.5
        )
        assert ball.eps_a == 0.0
        assert ball.eps == 0.0

    def test_single_pair_capped_by_short_range(self):
        y = np.array([[1.0, 1.0], [2.0, 2.0]])
        ball = epsilon_of_target(y, group_a=[0], delta_a=3.0, delta_b=1.5)
        assert ball.eps == pytest.approx(0.75)  # only the delta_B/2 cap binds
        assert ball.eps0 == np.inf

    def test_range_validation(self):
        with pytest.raises(ValueError):
            epsilon_of_target(two_matched_pairs(), [0, 2], delta_a=1.0, delta_b=1.5)


class TestSampleInBall:
    def test_samples_stay_within_radius(self, rng):
        ball = epsilon_of_target(
            two_matched_pairs(), group_a=[0, 2], delta_a=3.0, delta_b=1.5
        )
        for _ in range(20):
            x = sample_in_ball(ball, rng, frac=0.9)
            offsets = np.linalg.norm(x - ball.y, axis=0)
            assert np.all(offsets <= 0.9 * ball.eps + 1e-12)
            assert np.all(offsets > 0.0)

    def test_rejects_degenerate_ball(self, rng):
        y = np.array([[0.0, 0.0, 6.0, 6.0, 6.0], [0.0] * 5])
        ball = epsilon_of_target(y, group_a=[0, 2], delta_a=3.0, delta_b=1.5)
        with pytest.raises(ValueError):
            sample_in_ball(ball, rng)

    def test_frac_validation(self, rng):
        ball = epsilon_of_target(
            two_matched_pairs(), group_a=[0, 2], delta_a=3.0, delta_b=1.5
        )
        with pytest.raises(ValueError):
            sample_in_ball(ball, rng, frac=1.0)

    def test_deterministic_under_seed(self):
        ball = epsilon_of_target(
            two_matched_pairs(), group_a=[0, 2], delta_a=3.0, delta_b=1.5
        )
        a = sample_in_ball(ball, np.random.default_rng(7))
        b = sample_in_ball(ball, np.random.default_rng(7))
        assert np.array_equal(a, b)


# ---------------------------------------------------------------------------
# CSV export


class TestTrajectoryCsv:
    def test_header_and_rows_parse_back(self, tmp_path):
        ctrl, _ = pair_controller()
        x0 = np.array([[0.0, 1.0], [0.0, 0.0]])
        traj = simulate(x0, ctrl, SimConfig(t_final=0.3, dt=0.1))
        path = tmp_path / "run.csv"
        trajectory_to_csv(traj, path)
        with open(path) as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == [
            "t",
            "x1_1", "x1_2", "x2_1", "x2_2",
            "u1_1", "u1_2", "u2_1", "u2_2",
            "V_ud",
        ]
        assert len(rows) - 1 == len(traj.times)
        # values round-trip exactly through repr
        assert float(rows[1][1]) == traj.states[0, 0, 0]
        assert float(rows[-1][-1]) == traj.v_ud[-1]
