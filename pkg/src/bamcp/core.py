"""MDP / BAMDP vocabulary: histories, transition counts, discounting."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

StateId = int
ActionId = int


@dataclass(frozen=True)
class DiscountSpec:
    """Discount factor, reward bound and the numerical precision of the search."""

    gamma: float = 0.95
    rmax: float = 1.0
    epsilon: float = 0.01

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.rmax <= 0.0:
            raise ValueError(f"rmax must be positive, got {self.rmax}")
        if self.epsilon <= 0.0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")

    def cutoff(self, depth: int) -> bool:
        """True when ``gamma**depth * rmax`` has fallen below the precision."""
        return self.gamma**depth * self.rmax < self.epsilon


@dataclass
class History:
    """Sequence of (state, action) pairs followed by the current state."""

    current: StateId
    steps: list[tuple[StateId, ActionId]] = field(default_factory=list)

    def append(self, action: ActionId, next_state: StateId) -> None:
        self.steps.append((self.current, action))
        self.current = next_state

    def transitions(self) -> Iterable[tuple[StateId, ActionId, StateId]]:
        for k, (s, a) in enumerate(self.steps):
            nxt = self.steps[k + 1][0] if k + 1 < len(self.steps) else self.current
            yield s, a, nxt

    def __len__(self) -> int:
        return len(self.steps)


class TransitionCounts(Counter):
    """Unordered (s, a, s') transition tallies: the sufficient statistic of a history."""

    def add(self, s: StateId, a: ActionId, s_next: StateId, n: int = 1) -> None:
        self[(s, a, s_next)] += n

    def total(self) -> int:  # Counter.total only exists from 3.10 on some builds
        return sum(self.values())

    def row(self, s: StateId, a: ActionId) -> dict[StateId, int]:
        """Successor counts observed after taking ``a`` in ``s``."""
        return {k[2]: v for k, v in self.items() if k[0] == s and k[1] == a and v > 0}

    def merged(self, other: "TransitionCounts") -> "TransitionCounts":
        out = TransitionCounts(self)
        out.update(other)
        return out


def counts_from_history(h: History) -> TransitionCounts:
    counts = TransitionCounts()
    for s, a, s_next in h.transitions():
        counts.add(s, a, s_next)
    return counts


def discounted_return(rewards: Sequence[float], spec: DiscountSpec | float) -> float:
    """Sum of ``gamma**k * r_k``, accumulated backwards (Horner form)."""
    gamma = spec.gamma if isinstance(spec, DiscountSpec) else float(spec)
    total = 0.0
    for r in reversed(rewards):
        total = r + gamma * total
    return total


def max_depth(spec: DiscountSpec) -> int:
    """Smallest depth ``d`` with ``gamma**d * rmax < epsilon``.

    A zero discount factor cuts every path after one step.
    """
    if spec.epsilon >= spec.rmax:
        return 0
    if spec.gamma == 0.0:
        return 1
    d = max(0, math.ceil(math.log(spec.epsilon / spec.rmax) / math.log(spec.gamma)) - 1)
    # the log estimate may be off by one in floating point; settle on the exact test
    while not spec.cutoff(d):
        d += 1
    while d > 0 and spec.cutoff(d - 1):
        d -= 1
    return d
