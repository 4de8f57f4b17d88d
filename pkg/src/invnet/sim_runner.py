"""Discrete-time driver: one project per step, income, global weight decay, snapshots."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Iterator

import numpy as np
from numpy.typing import NDArray

from invnet.core_model import (
    Population,
    wealth_update_unchecked,
    new_weight_matrix,
    reputation_report,
)
from invnet.project_engine import ProjectOutcome, Settlement, form_project, settle_project
from invnet.rng import RandomStream

RETURN_DISTRIBUTION = "uniform(-1,1)"
# what agents outside this step's project do with their budget
IDLE_MODES = ("market", "none")


@dataclass(frozen=True)
class SimConfig:
    """Full parameter set of a run. Defaults are the reference experiment."""

    num_investors: int = 10_000
    num_initiators: int = 100
    num_steps: int = 100_000
    threshold: float = 9.0
    invest_proportion: float = 0.5
    initial_budget: float = 1.0
    income: float = 0.5
    memory: float = 0.1
    greediness: float = 1.0
    rng_seed: int = 0
    snapshot_every: int = 10_000
    return_distribution: str = RETURN_DISTRIBUTION
    idle_investment: str = "market"

    def __post_init__(self) -> None:
        for name in ("num_investors", "num_initiators"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.num_steps < 0:
            raise ValueError(f"num_steps must be >= 0, got {self.num_steps}")
        if self.snapshot_every < 1:
            raise ValueError(f"snapshot_every must be >= 1, got {self.snapshot_every}")
        if not (math.isfinite(self.threshold) and self.threshold >= 0):
            raise ValueError(f"threshold must be finite and >= 0, got {self.threshold}")
        if not (math.isfinite(self.invest_proportion) and 0 <= self.invest_proportion <= 1):
            raise ValueError(f"invest_proportion must lie in [0, 1], got {self.invest_proportion}")
        if not (math.isfinite(self.initial_budget) and self.initial_budget >= 0):
            raise ValueError(f"initial_budget must be finite and >= 0, got {self.initial_budget}")
        if not (math.isfinite(self.income) and self.income >= 0):
            raise ValueError(f"income must be finite and >= 0, got {self.income}")
        if math.isnan(self.memory) or self.memory < 0:
            raise ValueError(f"memory must be >= 0, got {self.memory}")
        if not math.isfinite(self.greediness):
            raise ValueError(f"greediness must be finite, got {self.greediness}")
        if not 0 <= self.rng_seed < 2**64:
            raise ValueError(f"rng_seed must be an unsigned 64-bit integer, got {self.rng_seed}")
        if self.return_distribution != RETURN_DISTRIBUTION:
            raise ValueError(f"return_distribution must be {RETURN_DISTRIBUTION!r}, got {self.return_distribution!r}")
        if self.idle_investment not in IDLE_MODES:
            raise ValueError(f"idle_investment must be one of {IDLE_MODES}, got {self.idle_investment!r}")

    def replace(self, **changes) -> SimConfig:
        return SimConfig(**{**asdict(self), **changes})

    @classmethod
    def field_names(cls) -> list[str]:
        return [f.name for f in fields(cls)]


@dataclass
class StepEvent:
    step: int
    initiator: int
    contacted: int
    accepted: int
    total_committed: float
    status: str
    return_value: float | None
    # money gained by agents outside the project (market mode); not logged
    idle_payoff: float = 0.0


@dataclass
class SimState:
    step: int
    agents: Population
    weights: NDArray[np.float64]
    rng: RandomStream
    events: list[StepEvent] = field(default_factory=list)
    keep_events: bool = True

    @classmethod
    def initial(cls, config: SimConfig, rng=None) -> SimState:
        agents = Population(
            config.num_investors,
            config.num_initiators,
            initial_budget=config.initial_budget,
            invest_proportion=config.invest_proportion,
            income=config.income,
        )
        return cls(
            step=0,
            agents=agents,
            weights=new_weight_matrix(config.num_investors, config.num_initiators),
            rng=rng if rng is not None else RandomStream(config.rng_seed),
        )


@dataclass
class Snapshot:
    step: int
    investor_budgets: NDArray[np.float64]
    initiator_budgets: NDArray[np.float64]
    initiator_reputation: NDArray[np.float64]
    investor_reputation: NDArray[np.float64]
    edge_investors: NDArray[np.intp]
    edge_initiators: NDArray[np.intp]
    edge_weights: NDArray[np.float64]

    @property
    def num_edges(self) -> int:
        return int(self.edge_weights.size)

    def edges(self) -> set[tuple[int, int]]:
        return set(zip(self.edge_investors.tolist(), self.edge_initiators.tolist()))

    @property
    def budgets(self) -> NDArray[np.float64]:
        return np.concatenate((self.investor_budgets, self.initiator_budgets))


def snapshot(state: SimState) -> Snapshot:
    """Copy of budgets, reputations and positive-weight edges; state is untouched."""
    rep = reputation_report(state.weights)
    k, j = np.nonzero(state.weights > 0)
    return Snapshot(
        step=state.step,
        investor_budgets=state.agents.investor_budgets.copy(),
        initiator_budgets=state.agents.initiator_budgets.copy(),
        initiator_reputation=rep.initiator_reputation,
        investor_reputation=rep.investor_reputation,
        edge_investors=k,
        edge_initiators=j,
        edge_weights=state.weights[k, j],
    )


def step(state: SimState, config: SimConfig) -> StepEvent:
    """Advance the state by one time step and return the project event.

    Order: pick initiator, collect commitments, draw the return and settle if
    launched, update everyone outside the settled project, decay every weight
    and deposit this step's payoffs, advance the clock.

    Agents outside the project either invest their share at an independent
    uniform return (``idle_investment="market"``) or only collect income
    (``"none"``). Idle returns never touch the decision weights.
    """
    agents = state.agents
    rng = state.rng
    j = rng.initiator(config.num_initiators)
    outcome: ProjectOutcome = form_project(
        agents, state.weights, j, config.threshold, config.greediness, rng, project_id=state.step
    )
    project = outcome.project
    settlement: Settlement | None = None
    idle = np.ones(agents.size, dtype=bool)
    if project.status == "launched":
        settlement = settle_project(agents, project, rng.project_return())
        idle[settlement.investors] = False
        idle[agents.initiator_row(j)] = False

    idle_payoff = 0.0
    if config.idle_investment == "market":
        rows = np.flatnonzero(idle)
        r = rng.idle_returns(rows.size)
        x = agents.budget[rows]
        q = agents.invest_proportion[rows]
        idle_payoff = float(np.dot(x * q, r))
        agents.budget[rows] = wealth_update_unchecked(x, q, r, agents.income[rows])
    elif settlement is None:
        agents.budget += agents.income
    else:
        agents.budget[idle] += agents.income[idle]

    decay = math.exp(-config.memory)
    if decay == 0.0:
        state.weights.fill(0.0)
    elif decay != 1.0:
        state.weights *= decay
    if settlement is not None and settlement.investors.size:
        state.weights[settlement.investors, j] += settlement.payoffs

    event = StepEvent(
        step=state.step,
        initiator=j,
        contacted=outcome.contacted,
        accepted=outcome.accepted,
        total_committed=project.total_committed,
        status=project.status,
        return_value=project.return_value,
        idle_payoff=idle_payoff,
    )
    if state.keep_events:
        state.events.append(event)
    state.step += 1
    return event


def snapshot_steps(config: SimConfig) -> list[int]:
    steps = list(range(config.snapshot_every, config.num_steps + 1, config.snapshot_every))
    if not steps or steps[-1] != config.num_steps:
        steps.append(config.num_steps)
    return steps


def iter_run(
    config: SimConfig, on_event: Callable[[StepEvent], None] | None = None
) -> Iterator[tuple[Snapshot, SimState]]:
    """Yield (snapshot, live state) at every snapshot step of a fresh run."""
    state = SimState.initial(config)
    state.keep_events = False
    if config.num_steps == 0:
        yield snapshot(state), state
        return
    targets = set(snapshot_steps(config))
    while state.step < config.num_steps:
        event = step(state, config)
        if on_event is not None:
            on_event(event)
        if state.step in targets:
            yield snapshot(state), state


@dataclass
class RunResult:
    snapshots: list[Snapshot]
    state: SimState
    events: list[StepEvent]


def run(config: SimConfig) -> RunResult:
    """Run a full simulation in memory."""
    events: list[StepEvent] = []
    snaps: list[Snapshot] = []
    state = None
    for snap, state in iter_run(config, on_event=events.append):
        snaps.append(snap)
    assert state is not None
    return RunResult(snapshots=snaps, state=state, events=events)
