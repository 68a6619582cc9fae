"""Control laws for single-integrator agents over directed sensing networks.

The proposed law steers the "informed" agents (set N_A, which contains every
tail of a one-way edge) with a projected combination of two objective
gradients, and the remaining agents (N_B) with a plain gradient flow:

    u_i = -gbar_i - kappa_i * grad_i V      (i in N_A)
    u_i = -mu_i * grad_i V                  (i in N_B)

where gbar_i is the closest vector to (lam_i grad_i Vbar + eta_i grad_i V)/2
whose inner products with both gradients are nonnegative.  That projection
has a closed form with three cases; the fourth sign pattern cannot occur and
is treated as an internal error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .graphs import adjacency_masks_from_state, cliques_from_masks
from .objectives import CliqueMatchingObjective, FormationObjective

__all__ = [
    "ControllerParams",
    "ControlOutput",
    "g_hat",
    "g_bar_closed_form",
    "g_bar_qp_oracle",
    "proposed_control",
    "gradient_flow_control",
    "naive_directed_control",
    "check_descent",
    "ProposedController",
    "GradientFlowController",
    "NaiveDirectedController",
    "StepEval",
]

_TINY = 1e-300

CASE_UNCONSTRAINED = "unconstrained"
CASE_PROJ_VBAR = "proj_vbar"
CASE_PROJ_VUD = "proj_vud"
CASE_ZERO = "zero"


@dataclass(frozen=True)
class ControllerParams:
    """Per-agent gains and the N_A / N_B split.

    Gain arrays have length n; entries are read only on the side that uses
    them (lam, eta, kappa on N_A; mu on N_B).
    """

    n: int
    n_a: frozenset[int]
    lam: np.ndarray
    eta: np.ndarray
    kappa: np.ndarray
    mu: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "n_a", frozenset(self.n_a))
        if not self.n_a <= set(range(self.n)):
            raise ValueError("n_a contains out-of-range agents")
        for name in ("lam", "eta", "kappa", "mu"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (self.n,):
                raise ValueError(f"{name} must have shape ({self.n},), got {arr.shape}")
            object.__setattr__(self, name, arr)
        a = sorted(self.n_a)
        if a and (np.any(self.lam[a] <= 0) or np.any(self.eta[a] <= 0)):
            raise ValueError("lam and eta must be positive on N_A")
        if a and np.any(self.kappa[a] < 0):
            raise ValueError("kappa must be nonnegative on N_A")
        b = sorted(self.n_b)
        if b and np.any(self.mu[b] <= 0):
            raise ValueError("mu must be positive on N_B")

    @property
    def n_b(self) -> frozenset[int]:
        return frozenset(set(range(self.n)) - self.n_a)

    @staticmethod
    def uniform(
        n: int, n_a, lam: float, eta: float, kappa: float, mu: float
    ) -> "ControllerParams":
        full = np.full(n, 1.0)
        return ControllerParams(
            n=n,
            n_a=frozenset(n_a),
            lam=lam * full,
            eta=eta * full,
            kappa=kappa * full,
            mu=mu * full,
        )


@dataclass(frozen=True)
class ControlOutput:
    """Stacked inputs plus the projection case taken by each N_A agent."""

    u: np.ndarray
    cases: dict[int, str]


def g_hat(grad_bar_i: np.ndarray, grad_ud_i: np.ndarray, lam: float, eta: float):
    return 0.5 * (lam * np.asarray(grad_bar_i, float) + eta * np.asarray(grad_ud_i, float))


def g_bar_closed_form(
    grad_bar_i: np.ndarray, grad_ud_i: np.ndarray, lam: float, eta: float
) -> tuple[np.ndarray, str]:
    """Projection of g_hat onto {g : g.grad_bar >= 0 and g.grad_ud >= 0}.

    Returns (gbar, case).  Sign tests are exact (no dead zone); the pattern
    with both inner products negative is infeasible for any valid input and
    raises.
    """
    a = np.asarray(grad_bar_i, dtype=float)
    b = np.asarray(grad_ud_i, dtype=float)
    gh = 0.5 * (lam * a + eta * b)
    s1 = float(gh @ a)
    s2 = float(gh @ b)
    if s1 >= 0.0 and s2 >= 0.0:
        case = CASE_ZERO if not gh.any() else CASE_UNCONSTRAINED
        return gh, case
    if s1 < 0.0 and s2 >= 0.0:
        den = float(a @ a)
        if den <= _TINY:
            raise AssertionError("projection onto a null gradient")
        return gh - (s1 / den) * a, CASE_PROJ_VBAR
    if s1 >= 0.0 and s2 < 0.0:
        den = float(b @ b)
        if den <= _TINY:
            raise AssertionError("projection onto a null gradient")
        return gh - (s2 / den) * b, CASE_PROJ_VUD
    raise AssertionError(
        f"infeasible sign pattern: g_hat against both gradients ({s1}, {s2})"
    )


def g_bar_batch(gb: np.ndarray, gu: np.ndarray, lam, eta) -> np.ndarray:
    """Vectorized closed form over leading batch axes; inputs (..., d)."""
    gh = 0.5 * (lam * gb + eta * gu)
    s1 = np.einsum("...d,...d->...", gh, gb)
    s2 = np.einsum("...d,...d->...", gh, gu)
    if np.any((s1 < 0.0) & (s2 < 0.0)):
        raise AssertionError("infeasible sign pattern in batched projection")
    case_b = (s1 < 0.0) & (s2 >= 0.0)
    case_c = (s1 >= 0.0) & (s2 < 0.0)
    den_b = np.einsum("...d,...d->...", gb, gb)
    den_c = np.einsum("...d,...d->...", gu, gu)
    if np.any(den_b[case_b] <= _TINY) or np.any(den_c[case_c] <= _TINY):
        raise AssertionError("projection onto a null gradient")
    coef_b = np.where(case_b, s1 / np.where(den_b > 0, den_b, 1.0), 0.0)
    coef_c = np.where(case_c, s2 / np.where(den_c > 0, den_c, 1.0), 0.0)
    return gh - coef_b[..., None] * gb - coef_c[..., None] * gu


def g_bar_qp_oracle(
    grad_bar_i: np.ndarray, grad_ud_i: np.ndarray, lam: float, eta: float
) -> np.ndarray:
    """Active-set reference for the projection, independent of the case logic.

    Enumerates the stationary point of every active set of the two
    constraints via least-squares projections and returns the feasible
    candidate closest to g_hat.
    """
    a = np.asarray(grad_bar_i, dtype=float)
    b = np.asarray(grad_ud_i, dtype=float)
    gh = 0.5 * (lam * a + eta * b)
    cands = [gh]
    for v in (a, b):
        nv = float(v @ v)
        if nv > 0.0:
            cands.append(gh - (float(gh @ v) / nv) * v)
    basis = np.stack([a, b], axis=1)
    if np.linalg.norm(basis) > 0.0:
        coef, *_ = np.linalg.lstsq(basis, gh, rcond=None)
        cands.append(gh - basis @ coef)
    slack = 1e-10 * max(1.0, float(np.linalg.norm(gh)))
    feasible = [
        c
        for c in cands
        if float(c @ a) >= -slack * max(1.0, float(np.linalg.norm(a)))
        and float(c @ b) >= -slack * max(1.0, float(np.linalg.norm(b)))
    ]
    dists = [float(np.linalg.norm(c - gh)) for c in feasible]
    return feasible[int(np.argmin(dists))]


def proposed_control(
    x: np.ndarray, params: ControllerParams, v_ud, v_bar
) -> ControlOutput:
    """Projected controller on N_A, scaled gradient flow on N_B."""
    x = np.asarray(x, dtype=float)
    _, grad_u, _ = v_ud.evaluate(x)
    _, grad_b, _ = v_bar.evaluate(x)
    return _assemble_proposed(x, params, grad_u, grad_b)


def _assemble_proposed(x, params, grad_u, grad_b) -> ControlOutput:
    u = np.zeros_like(x)
    cases: dict[int, str] = {}
    for i in sorted(params.n_a):
        gbar, case = g_bar_closed_form(
            grad_b[:, i], grad_u[:, i], params.lam[i], params.eta[i]
        )
        u[:, i] = -gbar - params.kappa[i] * grad_u[:, i]
        cases[i] = case
    for i in sorted(params.n_b):
        u[:, i] = -params.mu[i] * grad_u[:, i]
    return ControlOutput(u=u, cases=cases)


def gradient_flow_control(x: np.ndarray, nu: np.ndarray, v_ud) -> np.ndarray:
    """Baseline: u_i = -nu_i * grad_i V over the mutual-sensing objective."""
    x = np.asarray(x, dtype=float)
    nu = np.asarray(nu, dtype=float)
    if np.any(nu <= 0):
        raise ValueError("nu must be positive")
    return -nu[None, :] * v_ud.gradient(x)


def naive_directed_control(
    x: np.ndarray,
    nu: np.ndarray,
    v_ud: FormationObjective,
    di_edges,
    di_distances,
) -> np.ndarray:
    """Baseline that lets tails also chase their one-way neighbors.

    u_i = -nu_i * (grad_i V + sum over one-way edges (i, j) of the pair
    potential gradient), the pair term carrying its single-direction factor
    of one half.  Formation setting only.
    """
    x = np.asarray(x, dtype=float)
    nu = np.asarray(nu, dtype=float)
    g = v_ud.gradient(x)
    for (i, j), d in zip(di_edges, di_distances):
        z = x[:, i] - x[:, j]
        g[:, i] += 0.5 * (float(z @ z) - d * d) * z
    return -nu[None, :] * g


def check_descent(grad_ud: np.ndarray, u: np.ndarray) -> float:
    """Directional derivative of V along u; <= 0 for the provided laws."""
    return float(np.sum(np.asarray(grad_ud) * np.asarray(u)))


class StepEval(NamedTuple):
    u: np.ndarray
    v_ud: float
    curvature: float
    graph_key: object


def _matching_prep(x, objectives):
    """Shared proximity recomputation for clique objectives at one state."""
    cliques = {}
    key_parts = []
    for obj in objectives:
        masks = adjacency_masks_from_state(x, obj.spec.delta)
        cliques[id(obj)] = cliques_from_masks(masks, (1 << obj.spec.n) - 1)
        key_parts.append(tuple(masks))
    return cliques, tuple(key_parts)


class ProposedController:
    kind = "proposed"

    def __init__(self, params: ControllerParams, v_ud, v_bar):
        self.params = params
        self.v_ud = v_ud
        self.v_bar = v_bar
        self._matching = isinstance(v_ud, CliqueMatchingObjective)

    def step_eval(self, x: np.ndarray) -> StepEval:
        if self._matching:
            cliques, key = _matching_prep(x, (self.v_ud, self.v_bar))
            val, grad_u, curv_u = self.v_ud.evaluate(x, cliques[id(self.v_ud)])
            _, grad_b, curv_b = self.v_bar.evaluate(x, cliques[id(self.v_bar)])
        else:
            key = None
            val, grad_u, curv_u = self.v_ud.evaluate(x)
            _, grad_b, curv_b = self.v_bar.evaluate(x)
        out = _assemble_proposed(x, self.params, grad_u, grad_b)
        return StepEval(out.u, float(val), float(curv_u), key)

    def control(self, x: np.ndarray) -> ControlOutput:
        return proposed_control(x, self.params, self.v_ud, self.v_bar)


class GradientFlowController:
    kind = "gradient_flow"

    def __init__(self, nu: np.ndarray, v_ud):
        self.nu = np.asarray(nu, dtype=float)
        if np.any(self.nu <= 0):
            raise ValueError("nu must be positive")
        self.v_ud = v_ud
        self._matching = isinstance(v_ud, CliqueMatchingObjective)

    def step_eval(self, x: np.ndarray) -> StepEval:
        if self._matching:
            cliques, key = _matching_prep(x, (self.v_ud,))
            val, grad, curv = self.v_ud.evaluate(x, cliques[id(self.v_ud)])
        else:
            key = None
            val, grad, curv = self.v_ud.evaluate(x)
        return StepEval(-self.nu[None, :] * grad, float(val), float(curv), key)


class NaiveDirectedController:
    kind = "naive_directed"

    def __init__(self, nu: np.ndarray, v_ud: FormationObjective, di_edges, di_distances):
        self.nu = np.asarray(nu, dtype=float)
        self.v_ud = v_ud
        self.di_edges = tuple(tuple(e) for e in di_edges)
        self.di_distances = tuple(float(d) for d in di_distances)

    def step_eval(self, x: np.ndarray) -> StepEval:
        val, grad, curv = self.v_ud.evaluate(x)
        g = grad.copy()
        for (i, j), d in zip(self.di_edges, self.di_distances):
            z = x[:, i] - x[:, j]
            g[:, i] += 0.5 * (float(z @ z) - d * d) * z
        return StepEval(-self.nu[None, :] * g, float(val), float(curv), None)
