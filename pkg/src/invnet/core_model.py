"""Agent state and the deterministic arithmetic of the investment model.

Everything here is a pure function of its inputs. The scalar operations also
accept numpy arrays so the simulation loop can settle a whole project in one
call; validation is applied element-wise either way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from numpy.typing import ArrayLike, NDArray

Role = Literal["investor", "initiator"]


def _require_finite(name: str, value: ArrayLike) -> None:
    if not np.all(np.isfinite(value)):
        raise ValueError(f"{name} must be finite, got {value!r}")


def _require_proportion(q: ArrayLike) -> None:
    _require_finite("q", q)
    if np.any(np.asarray(q) < 0.0) or np.any(np.asarray(q) > 1.0):
        raise ValueError(f"invest proportion must lie in [0, 1], got {q!r}")


@dataclass
class AgentState:
    budget: float
    invest_proportion: float
    income: float
    role: Role = "investor"

    def __post_init__(self) -> None:
        _require_finite("budget", self.budget)
        if self.budget < 0:
            raise ValueError(f"budget must be nonnegative, got {self.budget}")
        _require_proportion(self.invest_proportion)
        if not math.isfinite(self.income) or self.income < 0:
            raise ValueError(f"income must be finite and nonnegative, got {self.income}")
        if self.role not in ("investor", "initiator"):
            raise ValueError(f"unknown role {self.role!r}")

    @property
    def commitment(self) -> float:
        return self.invest_proportion * self.budget


@dataclass(frozen=True)
class BehaviorParams:
    """Memory (per-step decay exponent) and greediness (inverse temperature)."""

    memory: float = 0.1
    greediness: float = 1.0

    def __post_init__(self) -> None:
        if math.isnan(self.memory) or self.memory < 0:
            raise ValueError(f"memory must be >= 0, got {self.memory}")
        if not math.isfinite(self.greediness):
            raise ValueError(f"greediness must be finite, got {self.greediness}")

    @property
    def decay_factor(self) -> float:
        return math.exp(-self.memory)


class Population:
    """Struct-of-arrays storage for N investors followed by J initiators.

    Row ``i < N`` is investor ``i``; row ``N + j`` is initiator ``j``.
    """

    def __init__(
        self,
        n_investors: int,
        n_initiators: int,
        initial_budget: float = 1.0,
        invest_proportion: float = 0.5,
        income: float = 0.5,
    ) -> None:
        if n_investors < 1 or n_initiators < 1:
            raise ValueError("need at least one investor and one initiator")
        AgentState(initial_budget, invest_proportion, income)  # validates the scalars
        total = n_investors + n_initiators
        self.n_investors = n_investors
        self.n_initiators = n_initiators
        self.budget = np.full(total, float(initial_budget))
        self.invest_proportion = np.full(total, float(invest_proportion))
        self.income = np.full(total, float(income))

    @classmethod
    def from_agents(cls, investors: list[AgentState], initiators: list[AgentState]) -> Population:
        pop = cls(len(investors), len(initiators))
        agents = list(investors) + list(initiators)
        pop.budget[:] = [a.budget for a in agents]
        pop.invest_proportion[:] = [a.invest_proportion for a in agents]
        pop.income[:] = [a.income for a in agents]
        return pop

    @property
    def size(self) -> int:
        return self.n_investors + self.n_initiators

    def initiator_row(self, j: int) -> int:
        if not 0 <= j < self.n_initiators:
            raise IndexError(f"initiator index {j} out of range [0, {self.n_initiators})")
        return self.n_investors + j

    @property
    def investor_budgets(self) -> NDArray[np.float64]:
        return self.budget[: self.n_investors]

    @property
    def initiator_budgets(self) -> NDArray[np.float64]:
        return self.budget[self.n_investors :]

    def agent(self, i: int) -> AgentState:
        role: Role = "investor" if i < self.n_investors else "initiator"
        return AgentState(
            float(self.budget[i]), float(self.invest_proportion[i]), float(self.income[i]), role
        )

    def copy(self) -> Population:
        other = Population.__new__(Population)
        other.n_investors = self.n_investors
        other.n_initiators = self.n_initiators
        other.budget = self.budget.copy()
        other.invest_proportion = self.invest_proportion.copy()
        other.income = self.income.copy()
        return other


def new_weight_matrix(n_investors: int, n_initiators: int) -> NDArray[np.float64]:
    """Decision weights w[k, j], all zero at t = 0."""
    return np.zeros((n_investors, n_initiators), dtype=np.float64)


def apply_wealth_update(x, q, r, a):
    """Budget after one step: ``x * (1 + r*q) + a``."""
    _require_finite("x", x)
    _require_finite("r", r)
    _require_finite("a", a)
    _require_proportion(q)
    return wealth_update_unchecked(x, q, r, a)


def wealth_update_unchecked(x, q, r, a):
    return x * (1.0 + r * q) + a


def compute_payoff(x, q, r):
    """Signed payoff ``x * q * r`` of committing a share q of budget x at return r."""
    _require_finite("x", x)
    _require_finite("q", q)
    _require_finite("r", r)
    return x * q * r


def decay_and_deposit_weight(w, p, gamma):
    """One memory step of a decision weight: ``p + w * exp(-gamma)``.

    ``gamma = inf`` is allowed and means no memory at all.
    """
    _require_finite("w", w)
    _require_finite("p", p)
    if np.any(np.isnan(gamma)) or np.any(np.asarray(gamma) < 0):
        raise ValueError(f"gamma must be >= 0, got {gamma!r}")
    return p + w * np.exp(-np.asarray(gamma, dtype=float))


def compute_initiator_reputation(weights: NDArray[np.float64], j: int) -> float:
    if not 0 <= j < weights.shape[1]:
        raise IndexError(f"initiator index {j} out of range [0, {weights.shape[1]})")
    return float(weights[:, j].sum())


def compute_investor_reputation(weights: NDArray[np.float64], k: int) -> float:
    if not 0 <= k < weights.shape[0]:
        raise IndexError(f"investor index {k} out of range [0, {weights.shape[0]})")
    return float(weights[k, :].sum())


@dataclass
class ReputationReport:
    initiator_reputation: NDArray[np.float64]
    investor_reputation: NDArray[np.float64]


def reputation_report(weights: NDArray[np.float64]) -> ReputationReport:
    """Column sums (initiators) and row sums (investors) of the weight matrix.

    Investor reputation is a diagnostic; nothing in the dynamics reads it.
    """
    return ReputationReport(
        initiator_reputation=weights.sum(axis=0),
        investor_reputation=weights.sum(axis=1),
    )
