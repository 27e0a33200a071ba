"""Benchmark environments and the priors the agent is given for each of them.

Tabular domains carry the true transition tensor ``P[s, a, s']`` and the
known reward ``R[s, a, s']``.  The agent only ever sees ``R`` and sampled
transitions.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .beliefs import (FAIL, SAFE, SUCCESS, BetaBernoulliArms, SparseDirichlet,
                      StructuredGridPrior, SymmetricDirichlet)

# cardinal moves as (dx, dy); y grows downwards
MOVES = ((0, -1), (1, 0), (0, 1), (-1, 0))
ACTION_NAMES = ("north", "east", "south", "west")


@dataclass
class TabularDomain:
    name: str
    P: np.ndarray
    R: np.ndarray
    reset: int
    episode_steps: int
    gamma: float = 0.95
    labels: list[str] | None = None

    def __post_init__(self):
        S, A, S2 = self.P.shape
        if S != S2 or self.R.shape != self.P.shape:
            raise ValueError(f"P and R must both be (S, A, S), got {self.P.shape} and {self.R.shape}")
        if not np.allclose(self.P.sum(axis=2), 1.0):
            raise ValueError("transition rows must sum to 1")
        self._cum = np.cumsum(self.P, axis=2)

    @property
    def num_states(self) -> int:
        return self.P.shape[0]

    @property
    def num_actions(self) -> int:
        return self.P.shape[1]

    @property
    def rmax(self) -> float:
        return float(np.abs(self.R).max()) or 1.0

    def step(self, s: int, a: int, rng: np.random.Generator) -> tuple[int, float]:
        if not 0 <= s < self.num_states:
            raise ValueError(f"state {s} outside [0, {self.num_states})")
        if not 0 <= a < self.num_actions:
            raise ValueError(f"action {a} outside [0, {self.num_actions})")
        cum = self._cum[s, a]
        s2 = min(int(np.searchsorted(cum, rng.random() * cum[-1], side="right")), self.num_states - 1)
        return s2, float(self.R[s, a, s2])


def env_step(env, s, a, rng):
    return env.step(s, a, rng)


# ---------------------------------------------------------------- double loop

def double_loop_table() -> dict[tuple[int, int], tuple[int, float]]:
    """Deterministic (state, action) -> (next state, reward) table.

    State 0 is shared.  Action 0 enters the right loop 1-2-3-4, where both
    actions advance and closing the loop pays 1.  Action 1 enters the left
    loop 5-6-7-8, where only action 1 advances, action 0 drops back to 0,
    and closing the loop pays 2.
    """
    t = {(0, 0): (1, 0.0), (0, 1): (5, 0.0)}
    for s in (1, 2, 3):
        t[(s, 0)] = t[(s, 1)] = (s + 1, 0.0)
    t[(4, 0)] = t[(4, 1)] = (0, 1.0)
    for s in (5, 6, 7):
        t[(s, 1)] = (s + 1, 0.0)
        t[(s, 0)] = (0, 0.0)
    t[(8, 1)] = (0, 2.0)
    t[(8, 0)] = (0, 0.0)
    return t


_OVERRIDE_LINE = re.compile(r"^\s*(\d+)\s+(\d+)\s*(?:->|→)\s*(\d+)\s+([-+0-9.eE]+)\s*$")


def parse_transition_file(text: str) -> dict[tuple[int, int], tuple[int, float]]:
    """Parse ``state action -> next_state reward`` lines; ``#`` starts a comment."""
    table = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _OVERRIDE_LINE.match(line)
        if m is None:
            raise ValueError(f"line {lineno}: expected 'state action -> state reward', got {raw!r}")
        s, a, s2 = int(m[1]), int(m[2]), int(m[3])
        if (s, a) in table:
            raise ValueError(f"line {lineno}: duplicate entry for state {s}, action {a}")
        table[(s, a)] = (s2, float(m[4]))
    return table


def deterministic_domain(name: str, table: dict, episode_steps: int, reset: int = 0,
                         gamma: float = 0.95) -> TabularDomain:
    S = 1 + max(max(s, s2) for (s, _), (s2, _) in table.items())
    A = 1 + max(a for _, a in table)
    P = np.zeros((S, A, S))
    R = np.zeros((S, A, S))
    for s in range(S):
        for a in range(A):
            if (s, a) not in table:
                raise ValueError(f"no transition given for state {s}, action {a}")
            s2, r = table[(s, a)]
            P[s, a, s2] = 1.0
            # rewards belong to (state, action), as the agent is told them
            R[s, a, :] = r
    return TabularDomain(name, P, R, reset, episode_steps, gamma)


def double_loop(override: str | Path | None = None, episode_steps: int = 1000) -> TabularDomain:
    """The 9-state, 2-action Double-loop; ``override`` is a transition file replacing the table."""
    table = double_loop_table() if override is None else parse_transition_file(Path(override).read_text("utf-8"))
    return deterministic_domain("double-loop", table, episode_steps)


# ---------------------------------------------------------------- grids

def _grid_move(cell, move, free):
    x, y = cell[0] + move[0], cell[1] + move[1]
    return (x, y) if (x, y) in free else cell


def _cardinal_domain(name, free: list, start, goal, success, episode_steps, flags=()):
    """States are (cell, held flags).

    Any action in the goal cell pays the number of flags held (1 when the
    domain has no flags) and returns the agent to the start with no flags.
    Elsewhere a move succeeds with probability ``success`` and otherwise
    leaves the agent in place; walls block movement and entering a flag
    cell picks the flag up.
    """
    if not 0.0 <= success <= 1.0:
        raise ValueError("success probability must lie in [0, 1]")
    free_set = set(free)
    nf = len(flags)
    index = {}
    labels = []
    for mask in range(2**nf):
        for cell in free:
            index[(cell, mask)] = len(labels)
            labels.append(f"{cell}/{mask:0{nf}b}" if nf else f"{cell}")
    S, A = len(labels), len(MOVES)
    P = np.zeros((S, A, S))
    R = np.zeros((S, A, S))
    reset = index[(start, 0)]
    for (cell, mask), s in index.items():
        for a, move in enumerate(MOVES):
            if cell == goal:
                P[s, a, reset] = 1.0
                R[s, a, :] = float(bin(mask).count("1")) if nf else 1.0
                continue
            for target, prob in ((_grid_move(cell, move, free_set), success), (cell, 1.0 - success)):
                new_mask = mask
                if target in flags:
                    new_mask |= 1 << flags.index(target)
                P[s, a, index[(target, new_mask)]] += prob
    return TabularDomain(name, P, R, reset, episode_steps, labels=labels)


def grid(size: int, success: float = 0.8, episode_steps: int | None = None) -> TabularDomain:
    """``size`` x ``size`` grid, reset in one corner and the reward cell in the opposite one.

    A move succeeds with probability ``success`` and otherwise leaves the
    agent in place.  Any action taken in the reward cell pays 1 and moves
    the agent back to the reset cell.
    """
    if size < 2:
        raise ValueError("grid size must be at least 2")
    if episode_steps is None:
        episode_steps = 1000 if size <= 5 else 2000
    free = [(x, y) for y in range(size) for x in range(size)]
    return _cardinal_domain(f"grid{size}", free, (0, 0), (size - 1, size - 1), success, episode_steps)


@dataclass
class MazeSpec:
    rows: list[str]
    free: list = field(default_factory=list)
    start: tuple = None
    goal: tuple = None
    flags: tuple = ()


def parse_maze(text: str) -> MazeSpec:
    rows = [line.rstrip("\r") for line in text.splitlines() if line.strip()]
    if not rows:
        raise ValueError("empty maze")
    spec = MazeSpec(rows)
    flags = []
    for y, row in enumerate(rows):
        for x, ch in enumerate(row):
            if ch not in "#.SGF":
                raise ValueError(f"unexpected character {ch!r} at row {y}, column {x}")
            if ch == "#":
                continue
            spec.free.append((x, y))
            if ch == "S":
                if spec.start is not None:
                    raise ValueError("more than one 'S'")
                spec.start = (x, y)
            elif ch == "G":
                if spec.goal is not None:
                    raise ValueError("more than one 'G'")
                spec.goal = (x, y)
            elif ch == "F":
                flags.append((x, y))
    if spec.start is None or spec.goal is None:
        raise ValueError("maze needs exactly one 'S' and one 'G'")
    if len(flags) > 3:
        raise ValueError(f"at most 3 flags are supported, found {len(flags)}")
    spec.flags = tuple(flags)
    return spec


def load_maze(text: str, success: float = 0.8, episode_steps: int = 20000) -> TabularDomain:
    """Maze over (cell, held flags); the goal pays the number of flags held and clears them."""
    spec = parse_maze(text)
    return _cardinal_domain("maze", spec.free, spec.start, spec.goal, success, episode_steps, spec.flags)


def default_maze_text() -> str:
    """Bundled layout: illustrative only, with the right size (33 cells, 3 flags), not a transcription."""
    return resources.files("bamcp").joinpath("data/maze.txt").read_text("utf-8")


# ---------------------------------------------------------------- bandits

def bandit(arms) -> TabularDomain:
    """Bernoulli bandit as a 3-state MDP.

    ``arms`` holds, per arm, either ``("bernoulli", p)`` for an arm paying 1
    with probability ``p`` or ``("fixed", r)`` for an arm always paying ``r``.
    """
    S, A = 3, len(arms)
    P = np.zeros((S, A, S))
    R = np.zeros((S, A, S))
    for a, (kind, v) in enumerate(arms):
        if kind == "bernoulli":
            P[:, a, SUCCESS] = v
            P[:, a, FAIL] = 1.0 - v
            R[:, a, SUCCESS] = 1.0
        elif kind == "fixed":
            P[:, a, SAFE] = 1.0
            R[:, a, SAFE] = v
        else:
            raise ValueError(f"unknown arm kind {kind!r}")
    return TabularDomain("bandit", P, R, SAFE, 1)


def bandit_reward(arms: BetaBernoulliArms, fixed: dict[int, float]) -> np.ndarray:
    """Known reward tensor for a bandit belief; ``fixed`` maps deterministic arms to payouts."""
    R = np.zeros((3, len(arms.arms), 3))
    for a, arm in enumerate(arms.arms):
        if arm is None:
            R[:, a, SAFE] = fixed[a]
        else:
            R[:, a, SUCCESS] = 1.0
    return R


# ---------------------------------------------------------------- infinite grid

class InfiniteGrid:
    """Unbounded grid; cell (i, j) pays 1 with probability p_i q_j, once.

    Parameters and cell rewards are drawn lazily from the generating prior.
    Moves are deterministic.  The start cell counts as visited from the
    outset, so its reward is observed but never paid.
    """

    num_actions = 4
    rmax = 1.0

    def __init__(self, prior: StructuredGridPrior, rng: np.random.Generator, episode_steps: int = 200,
                 gamma: float = 0.97):
        self.prior = prior
        self.rng = rng
        self.episode_steps = episode_steps
        self.gamma = gamma
        self.p: dict[int, float] = {}
        self.q: dict[int, float] = {}
        self.cells: dict[tuple[int, int], int] = {}
        self.intern: dict[tuple[int, int], int] = {}
        self.reset()

    def state_id(self, pos) -> int:
        sid = self.intern.get(pos)
        if sid is None:
            sid = self.intern[pos] = len(self.intern)
        return sid

    def cell_reward(self, i: int, j: int) -> int:
        r = self.cells.get((i, j))
        if r is None:
            if i not in self.p:
                self.p[i] = float(self.rng.beta(self.prior.alpha1, self.prior.beta1))
            if j not in self.q:
                self.q[j] = float(self.rng.beta(self.prior.alpha2, self.prior.beta2))
            r = self.cells[(i, j)] = int(self.rng.random() < self.p[i] * self.q[j])
        return r

    def reset(self):
        self.pos = (0, 0)
        self.consumed = {self.pos}
        self.state_id(self.pos)
        return self.pos

    def step(self, pos, a, rng=None):
        if not 0 <= a < 4:
            raise ValueError(f"action {a} outside [0, 4)")
        dx, dy = MOVES[a]
        nxt = (pos[0] + dx, pos[1] + dy)
        r = 0 if nxt in self.consumed else self.cell_reward(*nxt)
        self.consumed.add(nxt)
        self.state_id(nxt)
        self.pos = nxt
        return nxt, float(r)


# ---------------------------------------------------------------- priors

TABULAR_DOMAINS = ("double-loop", "grid5", "grid10", "maze")


def make_prior(tag: str, num_states: int | None = None, arms=None):
    """Prior handed to the agent for a domain tag."""
    if tag == "double-loop":
        n = num_states or 9
        return SymmetricDirichlet(1.0 / n, n)
    if tag in ("grid5", "grid10", "maze"):
        n = num_states or {"grid5": 25, "grid10": 100, "maze": 264}[tag]
        return SparseDirichlet(n)
    if tag == "bandit":
        return BetaBernoulliArms(tuple(arms or ()))
    if tag == "infinite-grid":
        return StructuredGridPrior()
    if tag == "infinite-grid-wrong":
        return StructuredGridPrior().swapped()
    raise ValueError(f"unknown domain tag {tag!r}")


def make_domain(tag: str, override: str | Path | None = None, maze_file: str | Path | None = None,
                success: float = 0.8) -> TabularDomain:
    if tag == "double-loop":
        return double_loop(override)
    if tag == "grid5":
        return grid(5, success)
    if tag == "grid10":
        return grid(10, success)
    if tag == "maze":
        text = Path(maze_file).read_text("utf-8") if maze_file else default_maze_text()
        return load_maze(text, success)
    raise ValueError(f"unknown tabular domain {tag!r}")
