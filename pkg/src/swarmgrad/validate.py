"""Randomized self-check suites, runnable from the CLI.

Each suite draws fresh random instances, compares an implementation against
an independent reference (or a structural identity) and reports the first
counterexample.  The heavyweight versions of these checks live in the test
suite; these are sized to finish quickly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .assignment import AssignmentProblem, solve_brute_force, solve_hungarian
from .control import (
    ControllerParams,
    GradientFlowController,
    ProposedController,
    check_descent,
    g_bar_closed_form,
    g_bar_qp_oracle,
)
from .graphs import (
    UndirectedGraph,
    bidirectional_core,
    check_assumption1,
    classify_edges,
    maximal_cliques,
    proximity_graph,
    two_range_digraph,
    undirected_closure,
)
from .objectives import (
    CliqueMatchingObjective,
    FormationObjective,
    FormationSpec,
    MatchingSpec,
    finite_difference_gradient,
)
from .sim import (
    SimConfig,
    epsilon_of_target,
    sample_in_ball,
    simulate,
    zeta_rates,
)

__all__ = ["ValidationReport", "SUITES", "run_suite", "brute_force_cliques"]


@dataclass
class ValidationReport:
    name: str
    passed: bool
    checks: int
    details: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f" ({self.details})" if self.details else ""
        return f"{status} {self.name}: {self.checks} checks{extra}"


def brute_force_cliques(g: UndirectedGraph) -> tuple[tuple[int, ...], ...]:
    """Maximal cliques by exhaustive subset scan; exponential, oracle only."""
    nodes = list(g.nodes)
    adj = {v: set() for v in nodes}
    for i, j in g.edges:
        adj[i].add(j)
        adj[j].add(i)
    out = []
    m = len(nodes)
    for mask in range(1, 1 << m):
        sub = [nodes[k] for k in range(m) if mask >> k & 1]
        if not all(b in adj[a] for a, b in itertools.combinations(sub, 2)):
            continue
        ss = set(sub)
        if any(ss <= adj[v] for v in nodes if v not in ss):
            continue
        out.append(tuple(sub))
    return tuple(sorted(out))


def validate_gbar(samples: int = 2000, seed: int = 0) -> ValidationReport:
    """Closed-form projection against the active-set reference."""
    rng = np.random.Generator(np.random.Philox(seed))
    for k in range(samples):
        d = int(rng.choice([1, 2, 3, 5]))
        scale = 10.0 ** rng.uniform(-2, 2)
        a = rng.normal(size=d) * scale
        b = rng.normal(size=d) * scale
        if k % 17 == 0:
            a = np.zeros(d)
        if k % 23 == 0:
            b = np.zeros(d)
        lam, eta = rng.uniform(0.01, 5.0, size=2)
        got, _ = g_bar_closed_form(a, b, lam, eta)
        want = g_bar_qp_oracle(a, b, lam, eta)
        tol = 1e-8 * max(1.0, float(np.linalg.norm(want)))
        feas = -1e-12 * max(1.0, float(np.linalg.norm(a)) * float(np.linalg.norm(got)))
        if np.linalg.norm(got - want) > tol:
            return ValidationReport(
                "gbar", False, k + 1, f"mismatch at sample {k}: {got} vs {want}"
            )
        if float(got @ a) < feas or float(got @ b) < feas:
            return ValidationReport("gbar", False, k + 1, f"infeasible at sample {k}")
    return ValidationReport("gbar", True, samples)


def validate_graph(samples: int = 400, seed: int = 0) -> ValidationReport:
    """Two-range structure identities plus clique enumeration vs brute force."""
    rng = np.random.Generator(np.random.Philox(seed))
    for k in range(samples):
        n = int(rng.integers(2, 10))
        x = rng.uniform(-3, 3, size=(n, 2)).T
        db = float(rng.uniform(0.5, 2.0))
        da = db + float(rng.uniform(0.2, 2.0))
        ga = {i for i in range(n) if rng.uniform() < 0.5}
        g = two_range_digraph(x, ga, da, db)
        if not check_assumption1(g):
            return ValidationReport("graph", False, k + 1, f"assumption violated at {k}")
        cls = classify_edges(g)
        d2 = np.einsum(
            "dij,dij->ij", x[:, :, None] - x[:, None, :], x[:, :, None] - x[:, None, :]
        )
        expect_di = frozenset(
            (i, j)
            for i in ga
            for j in set(range(n)) - ga
            if i != j and db * db < d2[i, j] <= da * da
        )
        if cls.e_di != expect_di:
            return ValidationReport("graph", False, k + 1, f"one-way set wrong at {k}")
        e_b = proximity_graph(x, db).edges
        e_a = proximity_graph(x, da).edges
        if not e_b <= bidirectional_core(g).edges:
            return ValidationReport("graph", False, k + 1, f"core missing edges at {k}")
        bb = frozenset(
            (i, j)
            for i, j in e_a
            if i not in ga and j not in ga and d2[i, j] > db * db
        )
        if undirected_closure(g).edges != e_a - bb:
            return ValidationReport("graph", False, k + 1, f"closure identity fails at {k}")
        gb = proximity_graph(x, db)
        if maximal_cliques(gb) != brute_force_cliques(gb):
            return ValidationReport("graph", False, k + 1, f"cliques differ at {k}")
    return ValidationReport("graph", True, samples)


def _random_matching_objective(rng):
    n = int(rng.integers(4, 9))
    ga = frozenset(int(i) for i in rng.choice(n, size=max(1, n // 2), replace=False))
    delta = float(rng.uniform(0.8, 2.5))
    obj = CliqueMatchingObjective(MatchingSpec(n, ga, delta))
    x = rng.uniform(-2, 2, size=(n, 2)).T
    return obj, x


def validate_gradient(samples: int = 60, seed: int = 0, h: float = 1e-6) -> ValidationReport:
    """Analytic gradients against central differences (switch states skipped)."""
    rng = np.random.Generator(np.random.Philox(seed))
    done = 0
    for k in range(samples):
        if k % 2 == 0:
            n = int(rng.integers(3, 7))
            edges = [
                (i, j)
                for i in range(n)
                for j in range(i + 1, n)
                if rng.uniform() < 0.6
            ]
            if not edges:
                continue
            spec = FormationSpec(
                n=n,
                edges=tuple(edges),
                distances=tuple(float(rng.uniform(0.5, 2.0)) for _ in edges),
            )
            obj = FormationObjective(spec)
            x = rng.uniform(-2, 2, size=(n, 2)).T
            value_fn = obj.value
        else:
            obj, x = _random_matching_objective(rng)
            if not _fd_safe(obj, x, 2 * h):
                continue
            value_fn = obj.value
        fd = finite_difference_gradient(value_fn, x, h)
        an = obj.gradient(x)
        scale = max(1.0, float(np.linalg.norm(fd)))
        if np.linalg.norm(fd - an) / scale > 1e-5:
            return ValidationReport("gradient", False, done + 1, f"mismatch at {k}")
        done += 1
    return ValidationReport("gradient", True, done)


def _fd_safe(obj: CliqueMatchingObjective, x: np.ndarray, band: float) -> bool:
    """True when no clique or assignment switch happens within +-band."""
    base = obj.structure_key(x)
    for idx in np.ndindex(x.shape):
        for sign in (1.0, -1.0):
            xp = x.copy()
            xp[idx] += sign * band
            if obj.structure_key(xp) != base:
                return False
    return True


def validate_assignment(samples: int = 300, seed: int = 0) -> ValidationReport:
    rng = np.random.Generator(np.random.Philox(seed))
    for k in range(samples):
        m = int(rng.integers(1, 6))
        big = m + int(rng.integers(0, 3))
        prob = AssignmentProblem(
            minority_ids=tuple(range(m)),
            majority_ids=tuple(range(100, 100 + big)),
            minority_pts=rng.normal(size=(2, m)),
            majority_pts=rng.normal(size=(2, big)),
        )
        bf = solve_brute_force(prob)
        hg = solve_hungarian(prob)
        if abs(bf.cost - hg.cost) > 1e-12 * max(1.0, bf.cost):
            return ValidationReport("assignment", False, k + 1, f"cost gap at {k}")
    return ValidationReport("assignment", True, samples)


def validate_descent(samples: int = 200, seed: int = 0) -> ValidationReport:
    """Inner product of objective gradient and inputs is never positive."""
    rng = np.random.Generator(np.random.Philox(seed))
    for k in range(samples):
        if k % 2 == 0:
            n = 4
            spec = FormationSpec(
                n=n, edges=((0, 1), (2, 3), (0, 2)), distances=(1.0, 1.0, 1.0)
            )
            closure = FormationSpec(
                n=n,
                edges=((0, 1), (2, 3), (0, 2), (0, 3), (1, 2)),
                distances=(1.0, 1.0, 1.0, 1.0, 1.0),
            )
            v_ud = FormationObjective(spec)
            v_bar = FormationObjective(closure)
            params = ControllerParams.uniform(
                n, {0, 2}, lam=rng.uniform(0.1, 2), eta=rng.uniform(0.1, 2),
                kappa=rng.uniform(0, 1), mu=rng.uniform(0.1, 2),
            )
            x = rng.uniform(-3, 3, size=(n, 2)).T
        else:
            obj, x = _random_matching_objective(rng)
            n = obj.spec.n
            v_ud = obj
            v_bar = CliqueMatchingObjective(
                MatchingSpec(n, obj.spec.group_a, obj.spec.delta * 2.0)
            )
            params = ControllerParams.uniform(
                n, obj.spec.group_a, lam=1.2, eta=0.6, kappa=0.0, mu=0.6
            )
        ctrl = ProposedController(params, v_ud, v_bar)
        ev = ctrl.step_eval(x)
        grad = v_ud.gradient(x)
        if check_descent(grad, ev.u) > 1e-10 * max(1.0, float(np.sum(grad * grad))):
            return ValidationReport("descent", False, k + 1, f"ascent at {k}")
        flow = GradientFlowController(np.full(n, 0.7), v_ud)
        if check_descent(grad, flow.step_eval(x).u) > 1e-12:
            return ValidationReport("descent", False, k + 1, f"flow ascent at {k}")
    return ValidationReport("descent", True, samples)


def validate_attraction(samples: int = 3, seed: int = 0) -> ValidationReport:
    """Pairs inside the safe ball decay at the predicted exponential rate."""
    rng = np.random.Generator(np.random.Philox(seed))
    da, db = 3.0, 1.5
    done = 0
    for _ in range(samples):
        ball, params = _random_target(rng, da, db)
        if ball is None:
            continue
        x0 = sample_in_ball(ball, rng)
        n = ball.y.shape[1]
        v_ud = CliqueMatchingObjective(MatchingSpec(n, frozenset(range(0, n, 2)), db))
        v_bar = CliqueMatchingObjective(MatchingSpec(n, frozenset(range(0, n, 2)), da))
        ctrl = ProposedController(params, v_ud, v_bar)
        traj = simulate(x0, ctrl, SimConfig(t_final=6.0, dt=2e-3, integrator="rk4",
                                            record_stride=250))
        zr = zeta_rates(ball.y, params, da, db)
        for i, j in ball.assignment.pairs:
            rate = zr[i] + zr[j]
            d0 = np.linalg.norm(traj.states[0][:, i] - traj.states[0][:, j])
            d1 = np.linalg.norm(traj.states[-1][:, i] - traj.states[-1][:, j])
            if d0 <= 0 or d1 <= 0:
                continue
            slope = (np.log(d1) - np.log(d0)) / (traj.times[-1] - traj.times[0])
            if abs(slope + rate) > 0.05 * rate:
                return ValidationReport(
                    "attraction", False, done + 1,
                    f"slope {slope:.4f} vs -{rate:.4f}",
                )
        done += 1
    return ValidationReport("attraction", True, done)


def _random_target(rng, da, db):
    """Three co-located pairs, alternating groups; None if degenerate."""
    n = 6
    centers = rng.uniform(-4, 4, size=(2, 3))
    y = np.repeat(centers, 2, axis=1)
    ga = frozenset(range(0, n, 2))
    try:
        ball = epsilon_of_target(y, ga, da, db)
    except ValueError:
        return None, None
    if ball.eps <= 1e-3:
        return None, None
    params = ControllerParams.uniform(n, ga, lam=1.2, eta=0.6, kappa=0.0, mu=0.6)
    return ball, params


SUITES = {
    "gbar": validate_gbar,
    "graph": validate_graph,
    "gradient": validate_gradient,
    "assignment": validate_assignment,
    "descent": validate_descent,
    "attraction": validate_attraction,
}


def run_suite(name: str, **kwargs) -> ValidationReport:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; have {sorted(SUITES)}")
    return SUITES[name](**kwargs)
