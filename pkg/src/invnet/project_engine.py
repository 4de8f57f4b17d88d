"""Project lifecycle: solicitation, Boltzmann acceptance, launch test, settlement."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.typing import NDArray

from invnet.core_model import Population, wealth_update_unchecked

Status = Literal["collecting", "launched", "aborted", "settled"]

# first block of contacts evaluated at once; doubles on each further block
_FIRST_BLOCK = 64


@dataclass
class Project:
    id: int
    initiator: int
    threshold: float
    initiator_commitment: float = 0.0
    participants: list[tuple[int, float]] = field(default_factory=list)
    total_committed: float = 0.0
    status: Status = "collecting"
    return_value: float | None = None

    @property
    def size(self) -> int:
        """Participant count including the initiator."""
        return len(self.participants) + 1

    def investor_indices(self) -> NDArray[np.intp]:
        return np.fromiter((k for k, _ in self.participants), dtype=np.intp, count=len(self.participants))

    def commitments(self) -> NDArray[np.float64]:
        return np.fromiter((c for _, c in self.participants), dtype=np.float64, count=len(self.participants))


@dataclass
class ProjectOutcome:
    project: Project
    contacted: int
    accepted: int


@dataclass
class Settlement:
    project: Project
    return_value: float
    investors: NDArray[np.intp]
    payoffs: NDArray[np.float64]
    initiator_payoff: float

    @property
    def total_payoff(self) -> float:
        return math.fsum(self.payoffs) + self.initiator_payoff


def _softmax_column(rows: NDArray[np.float64], j: int, beta: float) -> NDArray[np.float64]:
    z = beta * rows
    z -= z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e[:, j] / e.sum(axis=1)


def acceptance_probability(weight_row, j: int, beta: float) -> float:
    """Probability that an investor with this weight row accepts initiator j.

    Boltzmann weighting ``exp(beta*w_j) / sum_i exp(beta*w_i)`` over all
    initiators, shifted by the row maximum so large weights cannot overflow.
    """
    row = np.asarray(weight_row, dtype=np.float64)
    if row.ndim != 1 or row.size == 0:
        raise ValueError("weight_row must be a nonempty 1-d array")
    if not np.all(np.isfinite(row)):
        raise ValueError("weight_row must be finite")
    if not 0 <= j < row.size:
        raise IndexError(f"initiator index {j} out of range [0, {row.size})")
    return float(_softmax_column(row[None, :], j, beta)[0])


def acceptance_probabilities(weights: NDArray[np.float64], rows, j: int, beta: float) -> NDArray[np.float64]:
    """Vectorised acceptance_probability for several investors at once."""
    block = weights[rows]
    if not np.all(np.isfinite(block)):
        raise ValueError("decision weights must be finite")
    return _softmax_column(block, j, beta)


def roulette_accept(tau, u):
    """Accept iff the draw u falls strictly inside the accepting slice of width tau."""
    tau_a = np.asarray(tau, dtype=float)
    u_a = np.asarray(u, dtype=float)
    if np.any(~np.isfinite(tau_a)) or np.any(tau_a < 0) or np.any(tau_a > 1):
        raise ValueError(f"tau must lie in [0, 1], got {tau!r}")
    if np.any(~np.isfinite(u_a)) or np.any(u_a <= 0) or np.any(u_a >= 1):
        raise ValueError(f"u must lie in (0, 1), got {u!r}")
    accepted = u_a < tau_a
    return bool(accepted) if accepted.ndim == 0 else accepted


def form_project(
    agents: Population,
    weights: NDArray[np.float64],
    j: int,
    threshold: float,
    beta: float,
    rng,
    project_id: int = 0,
) -> ProjectOutcome:
    """Collect commitments for initiator j's project until the threshold is met.

    The initiator commits its own share first. Investors are then asked in a
    fresh random order, each at most once, and each consumes exactly one
    acceptance draw. Contacts are evaluated in growing blocks; unused draws of
    the final block are handed back to the stream.
    """
    if threshold < 0 or not math.isfinite(threshold):
        raise ValueError(f"threshold must be finite and >= 0, got {threshold}")
    row = agents.initiator_row(j)
    own = float(agents.invest_proportion[row] * agents.budget[row])
    project = Project(id=project_id, initiator=j, threshold=threshold, initiator_commitment=own)
    project.total_committed = own
    if own >= threshold:
        project.status = "launched"
        return ProjectOutcome(project, contacted=0, accepted=0)

    n = agents.n_investors
    order = rng.permutation(n)
    total = own
    contacted = 0
    block = _FIRST_BLOCK
    launched = False
    while contacted < n:
        idx = order[contacted : contacted + block]
        u = rng.acceptance_draws(idx.size)
        tau = acceptance_probabilities(weights, idx, j, beta)
        accepted = u < tau
        offers = agents.invest_proportion[idx] * agents.budget[idx]
        running = np.cumsum(np.concatenate(([total], np.where(accepted, offers, 0.0))))[1:]
        hit = np.flatnonzero(running >= threshold)
        used = int(hit[0]) + 1 if hit.size else idx.size
        if used < idx.size:
            rng.release(idx.size - used)
        for pos in np.flatnonzero(accepted[:used]):
            project.participants.append((int(idx[pos]), float(offers[pos])))
        total = float(running[used - 1])
        contacted += used
        if hit.size:
            launched = True
            break
        block *= 2

    project.total_committed = total
    project.status = "launched" if launched else "aborted"
    return ProjectOutcome(project, contacted=contacted, accepted=len(project.participants))


def settle_project(agents: Population, project: Project, r: float) -> Settlement:
    """Apply return r to every participant, initiator included.

    Budgets move by the wealth update (income included); payoffs are computed
    from the pre-update budgets. Only investor payoffs become weight deposits;
    the initiator has no weight on itself.
    """
    if project.status != "launched":
        raise ValueError(f"can only settle a launched project, status is {project.status!r}")
    if not -1.0 <= r <= 1.0:
        raise ValueError(f"return must lie in [-1, 1], got {r}")
    investors = project.investor_indices()
    rows = np.append(investors, agents.initiator_row(project.initiator))
    x = agents.budget[rows]
    q = agents.invest_proportion[rows]
    payoffs = x * q * r
    agents.budget[rows] = wealth_update_unchecked(x, q, r, agents.income[rows])
    project.status = "settled"
    project.return_value = r
    return Settlement(
        project=project,
        return_value=r,
        investors=investors,
        payoffs=payoffs[:-1],
        initiator_payoff=float(payoffs[-1]),
    )
