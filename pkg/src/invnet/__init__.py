"""Agent-based simulator of wealth dynamics and trust-driven investment networks."""

from invnet.core_model import (
    AgentState,
    BehaviorParams,
    Population,
    ReputationReport,
    apply_wealth_update,
    compute_initiator_reputation,
    compute_investor_reputation,
    compute_payoff,
    decay_and_deposit_weight,
    new_weight_matrix,
    reputation_report,
)
from invnet.project_engine import (
    Project,
    ProjectOutcome,
    Settlement,
    acceptance_probability,
    form_project,
    roulette_accept,
    settle_project,
)
from invnet.rng import RandomStream
from invnet.sim_runner import RunResult, SimConfig, SimState, Snapshot, run, snapshot, step

__version__ = "0.1.0"

__all__ = [
    "AgentState",
    "BehaviorParams",
    "Population",
    "Project",
    "ProjectOutcome",
    "RandomStream",
    "ReputationReport",
    "RunResult",
    "Settlement",
    "SimConfig",
    "SimState",
    "Snapshot",
    "acceptance_probability",
    "apply_wealth_update",
    "compute_initiator_reputation",
    "compute_investor_reputation",
    "compute_payoff",
    "decay_and_deposit_weight",
    "form_project",
    "new_weight_matrix",
    "reputation_report",
    "roulette_accept",
    "run",
    "settle_project",
    "snapshot",
    "step",
]
