"""Gradient-based distributed coordination over directed sensing networks.

Agents are single integrators x_i' = u_i.  The package provides:

- directed-network structure tools (edge classification, two-range
  proximity graphs, maximal cliques),
- formation and clique-matching team objectives with analytic gradients,
- the projection-based controller that lets one-way "tail" agents exploit
  extra sensing without breaking gradient descent, plus two baselines,
- a simulator, run metrics, local-convergence analysis and batch
  experiment presets with reproducible summaries.
"""

from .assignment import AssignmentMap, AssignmentProblem, solve_brute_force, solve_hungarian
from .control import (
    ControllerParams,
    ControlOutput,
    GradientFlowController,
    NaiveDirectedController,
    ProposedController,
    check_descent,
    g_bar_closed_form,
    g_bar_qp_oracle,
    g_hat,
    gradient_flow_control,
    naive_directed_control,
    proposed_control,
)
from .experiments import (
    BatchSummary,
    ExperimentConfig,
    PRESETS,
    initial_state,
    load_config,
    preset,
    run_scenario,
)
from .graphs import (
    DirectedNetwork,
    EdgeClassification,
    UndirectedGraph,
    bidirectional_core,
    check_assumption1,
    classify_edges,
    cliques_containing,
    generalized_partition,
    load_edge_list,
    load_graph_json,
    local_subgraph,
    maximal_cliques,
    proximity_graph,
    save_edge_list,
    save_graph_json,
    two_range_digraph,
    undirected_closure,
)
from .objectives import (
    CliqueMatchingObjective,
    FormationObjective,
    FormationSpec,
    MatchingSpec,
    finite_difference_gradient,
    minority_majority,
)
from .sim import (
    AttractionBall,
    SimConfig,
    Trajectory,
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

__version__ = "0.1.0"
