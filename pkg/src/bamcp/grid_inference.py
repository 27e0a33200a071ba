"""Posterior sampling for the infinite grid's row and column parameters.

Cell ``(i, j)`` (column ``i``, row ``j``) pays 1 with probability
``p[i] * q[j]``.  Given observed cell rewards the posterior over ``p`` and
``q`` has no closed form, so it is explored with a Metropolis-Hastings
chain whose proposal redraws one column parameter and one row parameter
from Beta distributions built out of the observations on that column/row.
"""
from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .beliefs import StructuredGridPrior

Cell = tuple[int, int]

# effective counts in the proposal are capped so it cannot become too peaked
COUNT_CAP = 50.0


class GridObservations:
    """Observed rewards keyed by cell ``(i, j)``, indexed by column and by row."""

    def __init__(self, entries: dict[Cell, int] | None = None):
        self.entries: dict[Cell, int] = {}
        self.by_col: defaultdict[int, list[Cell]] = defaultdict(list)
        self.by_row: defaultdict[int, list[Cell]] = defaultdict(list)
        for cell, r in (entries or {}).items():
            self.add(cell[0], cell[1], r)

    def add(self, i: int, j: int, r: int) -> None:
        if (i, j) in self.entries:
            if self.entries[(i, j)] != r:
                raise ValueError(f"cell {(i, j)} already observed with reward {self.entries[(i, j)]}")
            return
        if r not in (0, 1):
            raise ValueError(f"grid rewards are 0 or 1, got {r}")
        self.entries[(i, j)] = int(r)
        self.by_col[i].append((i, j))
        self.by_row[j].append((i, j))

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, cell) -> bool:
        return cell in self.entries

    def cells(self) -> list[Cell]:
        return list(self.entries)


@dataclass
class GridChainState:
    """Last accepted parameters for every observed column (``p``) and row (``q``)."""

    p: dict[int, float] = field(default_factory=dict)
    q: dict[int, float] = field(default_factory=dict)
    accepted: int = 0

    def copy(self) -> "GridChainState":
        return GridChainState(dict(self.p), dict(self.q), self.accepted)


@dataclass(frozen=True)
class GridProposal:
    i: int
    j: int
    p_new: float
    q_new: float
    m1: float
    n1: float
    m2: float
    n2: float


def _clip_open(x: float) -> float:
    # Beta draws can round to exactly 0 or 1 in floating point
    return min(max(x, 1e-300), 1.0 - 1e-16)


def _beta(rng: np.random.Generator, a: float, b: float) -> float:
    return _clip_open(float(rng.beta(a, b)))


def proposal_counts(obs: GridObservations, i: int, j: int, prior: StructuredGridPrior) -> tuple[float, float, float, float]:
    """``(m1, n1, m2, n2)`` for a proposal at column ``i`` and row ``j``, capped."""
    col = [obs.entries[c] for c in obs.by_col.get(i, ())]
    row = [obs.entries[c] for c in obs.by_row.get(j, ())]
    m1 = float(sum(col))
    m2 = float(sum(row))
    # zeros on a column may be due to low row parameters, and vice versa
    n1 = (1.0 - prior.beta2 / (2.0 * (prior.alpha2 + prior.beta2))) * (len(col) - m1)
    n2 = (1.0 - prior.beta1 / (2.0 * (prior.alpha1 + prior.beta1))) * (len(row) - m2)
    return min(m1, COUNT_CAP), min(n1, COUNT_CAP), min(m2, COUNT_CAP), min(n2, COUNT_CAP)


def ensure_linked(state: GridChainState, obs: GridObservations, prior: StructuredGridPrior,
                  rng: np.random.Generator) -> GridChainState:
    """Give every observed column and row a parameter, drawing new ones from the prior."""
    for i in obs.by_col:
        if i not in state.p:
            state.p[i] = _beta(rng, prior.alpha1, prior.beta1)
    for j in obs.by_row:
        if j not in state.q:
            state.q[j] = _beta(rng, prior.alpha2, prior.beta2)
    return state


def mh_propose(state: GridChainState, obs: GridObservations, prior: StructuredGridPrior,
               rng: np.random.Generator) -> GridProposal | None:
    """Pick an observed cell uniformly and redraw its column and row parameters.

    Returns None when there is nothing observed: the posterior is then the
    prior and every parameter is drawn lazily from it.
    """
    if not len(obs):
        return None
    cells = obs.cells()
    i, j = cells[int(rng.integers(len(cells)))]
    m1, n1, m2, n2 = proposal_counts(obs, i, j, prior)
    p_new = _beta(rng, prior.alpha1 + m1, prior.beta1 + n1)
    q_new = _beta(rng, prior.alpha2 + m2, prior.beta2 + n2)
    return GridProposal(i, j, p_new, q_new, m1, n1, m2, n2)


def _cell_loglik(pq: float, r: int) -> float:
    return math.log(pq) if r else math.log1p(-pq)


def mh_log_ratio(state: GridChainState, prop: GridProposal, obs: GridObservations) -> float:
    """log A': target and proposal ratio, restricted to cells on the proposed row or column."""
    p, q = state.p[prop.i], state.q[prop.j]
    pn, qn = prop.p_new, prop.q_new
    log_a = (prop.m1 * (math.log(p) - math.log(pn))
             + prop.n1 * (math.log1p(-p) - math.log1p(-pn))
             + prop.m2 * (math.log(q) - math.log(qn))
             + prop.n2 * (math.log1p(-q) - math.log1p(-qn)))
    affected = set(obs.by_col.get(prop.i, ())) | set(obs.by_row.get(prop.j, ()))
    for (ci, cj) in affected:
        r = obs.entries[(ci, cj)]
        old_p, old_q = state.p[ci], state.q[cj]
        new_p = pn if ci == prop.i else old_p
        new_q = qn if cj == prop.j else old_q
        log_a += _cell_loglik(new_p * new_q, r) - _cell_loglik(old_p * old_q, r)
    return log_a


def mh_acceptance(state: GridChainState, prop: GridProposal, obs: GridObservations,
                  prior: StructuredGridPrior | None = None) -> float:
    """min(1, A'), with A' assembled in log space and exponentiated once."""
    log_a = mh_log_ratio(state, prop, obs)
    return 1.0 if log_a >= 0.0 else math.exp(log_a)


def mh_step(state: GridChainState, obs: GridObservations, prior: StructuredGridPrior,
            rng: np.random.Generator) -> GridChainState:
    """One MH transition; a rejection returns ``state`` itself, untouched."""
    ensure_linked(state, obs, prior, rng)
    prop = mh_propose(state, obs, prior, rng)
    if prop is None:
        return state
    accept = mh_acceptance(state, prop, obs, prior)
    if accept < 1.0 and rng.random() >= accept:
        return state
    new = state.copy()
    new.p[prop.i] = prop.p_new
    new.q[prop.j] = prop.q_new
    new.accepted += 1
    return new


class GridChain:
    """Persistent chain: advanced ``burn`` steps per search, then one step per draw."""

    def __init__(self, prior: StructuredGridPrior, burn: int = 50):
        if burn < 0:
            raise ValueError("burn must be non-negative")
        self.prior = prior
        self.burn = burn
        self.state = GridChainState()

    def advance(self, obs: GridObservations, rng: np.random.Generator, steps: int = 1) -> GridChainState:
        for _ in range(steps):
            self.state = mh_step(self.state, obs, self.prior, rng)
        return self.state

    def start_search(self, obs: GridObservations, rng: np.random.Generator) -> None:
        ensure_linked(self.state, obs, self.prior, rng)
        self.advance(obs, rng, self.burn)


class GridSample:
    """One root sample of the grid: chain parameters plus lazily drawn extras.

    Parameters of unobserved rows and columns, and rewards of unobserved
    cells, are drawn on first use and then kept for the life of the sample.
    """

    def __init__(self, state: GridChainState, obs: GridObservations, prior: StructuredGridPrior):
        self.state = state
        self.obs = obs
        self.prior = prior
        self.p_extra: dict[int, float] = {}
        self.q_extra: dict[int, float] = {}
        self.cells: dict[Cell, int] = {}

    def p(self, i: int, rng) -> float:
        v = self.state.p.get(i)
        if v is None:
            v = self.p_extra.get(i)
            if v is None:
                v = self.p_extra[i] = _beta(rng, self.prior.alpha1, self.prior.beta1)
        return v

    def q(self, j: int, rng) -> float:
        v = self.state.q.get(j)
        if v is None:
            v = self.q_extra.get(j)
            if v is None:
                v = self.q_extra[j] = _beta(rng, self.prior.alpha2, self.prior.beta2)
        return v


def lazy_grid_cell(sample: GridSample, i: int, j: int, rng: np.random.Generator) -> int:
    """Reward of cell ``(i, j)`` in the sample, drawn at most once."""
    r = sample.obs.entries.get((i, j))
    if r is not None:
        return r
    r = sample.cells.get((i, j))
    if r is None:
        r = sample.cells[(i, j)] = int(rng.random() < sample.p(i, rng) * sample.q(j, rng))
    return r


class GridSimModel:
    """Per-simulation grid dynamics: deterministic moves, rewards consumed once."""

    def __init__(self, sample: GridSample, consumed: set, rng: np.random.Generator):
        self.sample = sample
        self.consumed = consumed
        self.visited: set = set()
        self.rng = rng

    def step(self, pos, a):
        dx, dy = ((0, -1), (1, 0), (0, 1), (-1, 0))[a]
        nxt = (pos[0] + dx, pos[1] + dy)
        if nxt in self.consumed or nxt in self.visited:
            return nxt, 0.0
        self.visited.add(nxt)
        return nxt, float(lazy_grid_cell(self.sample, nxt[0], nxt[1], self.rng))

    rollout_step = step


class InfiniteGridProblem:
    """Planner problem: each simulation takes the next chain state as its root sample."""

    num_actions = 4

    def __init__(self, chain: GridChain, obs: GridObservations, consumed: set):
        self.chain = chain
        self.obs = obs
        self.consumed = consumed

    def root_model(self, rng, lazy=True):
        if not lazy:
            raise ValueError("the infinite grid has infinitely many parameters; use lazy sampling")
        state = self.chain.advance(self.obs, rng)
        return GridSimModel(GridSample(state, self.obs, self.chain.prior), self.consumed, rng)

    def bauct_model(self, rng):
        raise NotImplementedError("no collapsed sampler exists for the structured grid prior")
