"""Single-integrator simulation loop, run metrics and local-convergence data.

The integrator re-evaluates the controller (and therefore any proximity
graph) at every derivative evaluation, including interior RK4 stages, so a
state-dependent network is never frozen across a step.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .assignment import AssignmentMap, AssignmentProblem, solve_brute_force, solve_hungarian
from .graphs import adjacency_masks_from_state, cliques_from_masks
from .objectives import FormationSpec, minority_majority

__all__ = [
    "SimConfig",
    "Trajectory",
    "simulate",
    "formation_error",
    "input_norm",
    "matched_pairs",
    "global_assignment",
    "zeta_rates",
    "AttractionBall",
    "epsilon_of_target",
    "sample_in_ball",
    "trajectory_to_csv",
]


@dataclass(frozen=True)
class SimConfig:
    """Integration horizon and scheme.

    record_stride thins the stored samples; the final state is always kept.
    track_descent enables the per-step objective-increase audit (allowed
    increase is second order in dt, and steps where the sensing graph
    changed are exempt because the clique objective jumps there).
    """

    t_final: float
    dt: float
    integrator: str = "euler"
    record_stride: int = 1
    track_descent: bool = True

    def __post_init__(self) -> None:
        if self.t_final <= 0 or self.dt <= 0:
            raise ValueError("t_final and dt must be positive")
        if self.integrator not in ("euler", "rk4"):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")
        if self.t_final / self.dt > 50_000_000:
            raise ValueError("step count too large")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    v_ud: np.ndarray
    graph_keys: list | None
    diverged: bool
    descent_violations: int
    meta: dict = field(default_factory=dict)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    @property
    def final_input(self) -> np.ndarray:
        return self.inputs[-1]


def simulate(x0: np.ndarray, controller, cfg: SimConfig) -> Trajectory:
    """Integrate x' = u(x) from x0 and record sampled states and inputs."""
    t_start = time.perf_counter()
    x = np.array(x0, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"x0 must be (d, n), got {x.shape}")
    n_steps = int(round(cfg.t_final / cfg.dt))
    times, states, inputs, values, keys = [], [], [], [], []
    diverged = False
    violations = 0
    prev = None  # (value, curvature, u_norm_sq, graph_key)
    track_keys = None

    for k in range(n_steps + 1):
        ev = controller.step_eval(x)
        if track_keys is None:
            track_keys = ev.graph_key is not None
        if cfg.track_descent and prev is not None:
            v0, c0, un0, key0 = prev
            if ev.graph_key == key0:
                order = 2.0 if cfg.integrator == "rk4" else 1.0
                allow = 1.5 * order * max(c0, ev.curvature) * un0 * cfg.dt**2
                if ev.v_ud > v0 + allow + 1e-9 * max(1.0, abs(v0)):
                    violations += 1
        if k % cfg.record_stride == 0 or k == n_steps:
            times.append(k * cfg.dt)
            states.append(x.copy())
            inputs.append(ev.u.copy())
            values.append(ev.v_ud)
            if track_keys:
                keys.append(ev.graph_key)
        if k == n_steps:
            break
        x_next = _advance(x, ev.u, controller, cfg)
        if not np.all(np.isfinite(x_next)):
            diverged = True
            break
        with np.errstate(over="ignore"):
            # near-overflow inputs push the allowance to inf, which correctly
            # disables the audit for that step
            prev = (ev.v_ud, ev.curvature, float(np.sum(ev.u * ev.u)), ev.graph_key)
        x = x_next

    return Trajectory(
        times=np.array(times),
        states=np.array(states),
        inputs=np.array(inputs),
        v_ud=np.array(values),
        graph_keys=keys if track_keys else None,
        diverged=diverged,
        descent_violations=violations,
        meta={
            "integrator": cfg.integrator,
            "dt": cfg.dt,
            "t_final": cfg.t_final,
            "wall_time": time.perf_counter() - t_start,
        },
    )


def _advance(x, u0, controller, cfg) -> np.ndarray:
    if cfg.integrator == "euler":
        return x + cfg.dt * u0
    h = cfg.dt
    k1 = u0
    k2 = controller.step_eval(x + 0.5 * h * k1).u
    k3 = controller.step_eval(x + 0.5 * h * k2).u
    k4 = controller.step_eval(x + h * k3).u
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def formation_error(x: np.ndarray, metric: FormationSpec) -> float:
    """Sum of absolute distance mismatches over the metric's edge set."""
    x = np.asarray(x, dtype=float)
    err = 0.0
    for (i, j), d in zip(metric.edges, metric.distances):
        err += abs(float(np.linalg.norm(x[:, i] - x[:, j])) - d)
    return err


def input_norm(u: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(u)))


def global_assignment(x: np.ndarray, group_a, tie_break: str = "A") -> AssignmentMap:
    """Optimal minority-to-majority map over the whole team."""
    x = np.asarray(x, dtype=float)
    n = x.shape[1]
    mn, mj = minority_majority(range(n), frozenset(group_a), tie_break)
    prob = AssignmentProblem(
        minority_ids=mn,
        majority_ids=mj,
        minority_pts=x[:, list(mn)],
        majority_pts=x[:, list(mj)],
    )
    if len(mn) <= 8:
        return solve_brute_force(prob)
    return solve_hungarian(prob)


def matched_pairs(
    x: np.ndarray, group_a, tie_break: str = "A", tol: float = 1e-2
) -> tuple[int, AssignmentMap]:
    """Count minority agents within tol of their optimally assigned partner."""
    amap = global_assignment(x, group_a, tie_break)
    x = np.asarray(x, dtype=float)
    hits = sum(
        1 for a, b in amap.pairs if float(np.linalg.norm(x[:, a] - x[:, b])) < tol
    )
    return hits, amap


def zeta_rates(
    x: np.ndarray, params, delta_a: float, delta_b: float
) -> np.ndarray:
    """Per-agent local convergence rates from clique membership counts.

    zeta_i = (lam_i * cA_i + (2 kappa_i + eta_i) * cB_i) / 2 on N_A and
    mu_i * cB_i on N_B, where cK_i counts the maximal cliques of the
    delta_K proximity graph at x containing i.
    """
    x = np.asarray(x, dtype=float)
    n = params.n
    full = (1 << n) - 1
    ca = np.zeros(n)
    cb = np.zeros(n)
    for c in cliques_from_masks(adjacency_masks_from_state(x, delta_a), full):
        for i in c:
            ca[i] += 1
    for c in cliques_from_masks(adjacency_masks_from_state(x, delta_b), full):
        for i in c:
            cb[i] += 1
    z = np.empty(n)
    for i in range(n):
        if i in params.n_a:
            z[i] = 0.5 * (params.lam[i] * ca[i] + (2.0 * params.kappa[i] + params.eta[i]) * cb[i])
        else:
            z[i] = params.mu[i] * cb[i]
    return z


@dataclass(frozen=True)
class AttractionBall:
    """Radius around a matched target inside which pairs decay exponentially."""

    y: np.ndarray
    eps: float
    eps0: float
    eps_a: float
    eps_b: float
    assignment: AssignmentMap


def epsilon_of_target(
    y: np.ndarray,
    group_a,
    delta_a: float,
    delta_b: float,
    tie_break: str = "A",
    zero_tol: float = 1e-9,
) -> AttractionBall:
    """Safe perturbation radius around a perfectly matched target state.

    Requires every minority agent to sit exactly on its assigned partner
    (within zero_tol).  The radius shrinks to zero when two majority agents
    coincide or some non-partner pair sits exactly on a sensing threshold;
    such targets have no attraction ball.
    """
    if not (delta_a > delta_b > 0):
        raise ValueError("need delta_a > delta_b > 0")
    y = np.asarray(y, dtype=float)
    amap = global_assignment(y, group_a, tie_break)
    if amap.cost > zero_tol:
        raise ValueError(f"state is not a matched target (residual {amap.cost:.3e})")
    partner = amap.as_dict()
    mn = sorted(partner)
    mj = sorted(minority_majority(range(y.shape[1]), frozenset(group_a), tie_break)[1])
    cross = [
        float(np.linalg.norm(y[:, i] - y[:, j]))
        for i in mn
        for j in mj
        if j != partner[i]
    ]
    if cross:
        eps0 = min(cross) / 6.0
        eps_a = 0.5 * min(abs(delta_a - c) for c in cross)
        eps_b = 0.5 * min(abs(delta_b - c) for c in cross)
    else:
        eps0 = eps_a = eps_b = float("inf")
    eps = min(eps0, eps_a, eps_b, delta_b / 2.0)
    return AttractionBall(y=y, eps=eps, eps0=eps0, eps_a=eps_a, eps_b=eps_b, assignment=amap)


def sample_in_ball(
    ball: AttractionBall, rng: np.random.Generator, frac: float = 0.9
) -> np.ndarray:
    """Random state with every agent inside frac * eps of its target spot."""
    if not 0 < frac < 1:
        raise ValueError("frac must be in (0, 1)")
    if ball.eps <= 1e-6:
        raise ValueError(f"target too degenerate to perturb (eps={ball.eps:.3e})")
    d, n = ball.y.shape
    x = ball.y.copy()
    for i in range(n):
        v = rng.normal(size=d)
        norm = float(np.linalg.norm(v))
        while norm == 0.0:
            v = rng.normal(size=d)
            norm = float(np.linalg.norm(v))
        r = frac * ball.eps * rng.uniform(0.0, 1.0) ** (1.0 / d)
        x[:, i] += (r / norm) * v
    return x


def trajectory_to_csv(traj: Trajectory, path) -> None:
    """Write sampled t, positions, inputs and objective value (1-based ids)."""
    t, s, u = traj.times, traj.states, traj.inputs
    _, d, n = s.shape
    header = ["t"]
    header += [f"x{i + 1}_{k + 1}" for i in range(n) for k in range(d)]
    header += [f"u{i + 1}_{k + 1}" for i in range(n) for k in range(d)]
    header += ["V_ud"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in range(len(t)):
            row = [repr(float(t[r]))]
            row += [repr(float(s[r, k, i])) for i in range(n) for k in range(d)]
            row += [repr(float(u[r, k, i])) for i in range(n) for k in range(d)]
            row.append(repr(float(traj.v_ud[r])))
            w.writerow(row)
