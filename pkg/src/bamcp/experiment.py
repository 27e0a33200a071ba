"""Seeded agent/environment loops, summaries and CSV output."""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .beliefs import StructuredGridPrior
from .core import DiscountSpec
from .domains import MOVES, TABULAR_DOMAINS, InfiniteGrid, make_domain, make_prior
from .grid_inference import GridChain, GridObservations, InfiniteGridProblem
from .planner import BAMCP, BAUCT, Planner, PlannerConfig, RolloutPolicy
from .tabular import TabularEncoding, tabular_search

CSV_HEADER = ["run", "step", "reward", "cum_reward", "cum_disc_reward", "plan_ms", "seed"]
GRID_DOMAINS = ("infinite-grid", "infinite-grid-wrong")


@dataclass
class ExperimentConfig:
    domain: str = "double-loop"
    algo: str = BAMCP
    sims: int = 1000
    steps: int | None = None
    runs: int = 1
    seed: int = 0
    gamma: float | None = None
    c: float = 3.0
    rollout_eps: float = 0.5
    lazy: bool = True
    rollout_learn: bool = True
    learning_rate: float = 0.1
    epsilon: float = 0.01
    out: str | None = None
    # infinite grid: generating parameters, also the agent's prior unless swapped
    alpha1: float = 1.0
    beta1: float = 2.0
    alpha2: float = 2.0
    beta2: float = 1.0
    mh_burn: int = 50
    override: str | None = None
    maze_file: str | None = None
    success: float = 0.8
    # wall-clock planning time in the output; off gives bitwise-reproducible CSVs
    timing: bool = True

    def __post_init__(self):
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if self.steps is not None and self.steps < 1:
            raise ValueError("steps must be at least 1")
        if self.sims < 1:
            raise ValueError("sims must be at least 1")
        if self.algo not in (BAMCP, BAUCT):
            raise ValueError(f"unknown algorithm {self.algo!r}")
        if self.domain not in TABULAR_DOMAINS + GRID_DOMAINS:
            raise ValueError(f"unknown domain {self.domain!r}")


@dataclass(frozen=True)
class StepRecord:
    run: int
    step: int
    reward: float
    cum_reward: float
    cum_disc_reward: float
    plan_ms: float
    seed: int


@dataclass
class ExperimentResult:
    records: list[StepRecord] = field(default_factory=list)
    gamma: float = 0.95

    def totals(self) -> list[float]:
        """Final cumulative undiscounted reward of each run, in run order."""
        last = {}
        for rec in self.records:
            last[rec.run] = rec.cum_reward
        return [last[k] for k in sorted(last)]


def _planner_config(cfg: ExperimentConfig, gamma: float, rmax: float) -> PlannerConfig:
    return PlannerConfig(
        exploration_c=cfg.c,
        num_simulations=cfg.sims,
        discount=DiscountSpec(gamma=gamma, rmax=rmax, epsilon=cfg.epsilon),
        rollout_epsilon=cfg.rollout_eps,
        lazy_sampling=cfg.lazy,
        mode=cfg.algo,
    )


def _records(run, seed, rewards, plan_ms, gamma):
    out = []
    cum = disc_cum = 0.0
    disc = 1.0
    for t, (r, ms) in enumerate(zip(rewards, plan_ms)):
        cum += r
        disc_cum += disc * r
        disc *= gamma
        out.append(StepRecord(run, t, r, cum, disc_cum, ms, seed))
    return out


def _run_tabular(cfg: ExperimentConfig, seed: int):
    domain = make_domain(cfg.domain, cfg.override, cfg.maze_file, cfg.success)
    gamma = domain.gamma if cfg.gamma is None else cfg.gamma
    steps = cfg.steps or domain.episode_steps
    pcfg = _planner_config(cfg, gamma, domain.rmax)
    plan_rng, env_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    enc = TabularEncoding(make_prior(cfg.domain, domain.num_states), domain.num_actions, domain.R)
    q_ro = np.zeros((domain.num_states, domain.num_actions))
    s = domain.reset
    rewards, plan_ms = [], []
    for _ in range(steps):
        t0 = time.perf_counter()
        a = tabular_search(enc, s, pcfg, plan_rng, q_ro).action
        plan_ms.append((time.perf_counter() - t0) * 1e3 if cfg.timing else 0.0)
        s2, r = domain.step(s, a, env_rng)
        enc.observe(s, a, s2)
        if cfg.rollout_learn:
            q_ro[s, a] += cfg.learning_rate * (r + gamma * q_ro[s2].max() - q_ro[s, a])
        rewards.append(r)
        s = s2
    return rewards, plan_ms, gamma


def _run_grid(cfg: ExperimentConfig, seed: int):
    truth = StructuredGridPrior(cfg.alpha1, cfg.beta1, cfg.alpha2, cfg.beta2)
    prior = truth.swapped() if cfg.domain == "infinite-grid-wrong" else truth
    if cfg.algo != BAMCP:
        raise ValueError("only BAMCP can plan on the infinite grid")
    plan_rng, env_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(2))
    env = InfiniteGrid(truth, env_rng)
    gamma = env.gamma if cfg.gamma is None else cfg.gamma
    steps = cfg.steps or env.episode_steps
    pcfg = _planner_config(cfg, gamma, env.rmax)
    obs = GridObservations()
    pos = env.reset()
    obs.add(pos[0], pos[1], env.cell_reward(*pos))
    chain = GridChain(prior, cfg.mh_burn)
    policy = RolloutPolicy(4, cfg.rollout_eps, cfg.learning_rate, gamma)
    planner = Planner(pcfg, policy)
    problem = InfiniteGridProblem(chain, obs, env.consumed)
    rewards, plan_ms = [], []
    for _ in range(steps):
        t0 = time.perf_counter()
        chain.start_search(obs, plan_rng)
        a = planner.search(pos, problem, plan_rng)
        plan_ms.append((time.perf_counter() - t0) * 1e3 if cfg.timing else 0.0)
        fresh = (pos[0] + MOVES[a][0], pos[1] + MOVES[a][1]) not in env.consumed
        nxt, r = env.step(pos, a)
        if fresh:
            obs.add(nxt[0], nxt[1], int(r))
        if cfg.rollout_learn:
            policy.update(pos, a, r, nxt)
        rewards.append(r)
        pos = nxt
    return rewards, plan_ms, gamma


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run ``cfg.runs`` independent seeded episodes; run ``k`` uses seed ``cfg.seed + k``."""
    result = ExperimentResult()
    for k in range(cfg.runs):
        seed = cfg.seed + k
        try:
            if cfg.domain in GRID_DOMAINS:
                rewards, plan_ms, gamma = _run_grid(cfg, seed)
            else:
                rewards, plan_ms, gamma = _run_tabular(cfg, seed)
        except (ValueError, OSError) as exc:
            raise type(exc)(f"run {k} on {cfg.domain}: {exc}") from exc
        result.gamma = gamma
        result.records.extend(_records(k, seed, rewards, plan_ms, gamma))
    return result


def summarize(result: ExperimentResult) -> dict[str, float]:
    """Mean total reward and the 95% normal-approximation half-width."""
    totals = result.totals()
    if not totals:
        raise ValueError("cannot summarise an empty result")
    n = len(totals)
    mean = sum(totals) / n
    if n == 1:
        return {"mean": mean, "half_width": 0.0}
    sd = math.sqrt(sum((x - mean) ** 2 for x in totals) / (n - 1))
    return {"mean": mean, "half_width": 1.96 * sd / math.sqrt(n)}


def _fmt(x) -> str:
    return str(x) if isinstance(x, int) else f"{x:.6g}"


def write_csv(result: ExperimentResult, path: str | Path) -> Path:
    path = Path(path)
    try:
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            for rec in sorted(result.records, key=lambda r: (r.run, r.step)):
                w.writerow([_fmt(rec.run), _fmt(rec.step), _fmt(rec.reward), _fmt(rec.cum_reward),
                            _fmt(rec.cum_disc_reward), _fmt(rec.plan_ms), _fmt(rec.seed)])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path: str | Path) -> ExperimentResult:
    result = ExperimentResult()
    with Path(path).open(encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            result.records.append(StepRecord(
                int(row["run"]), int(row["step"]), float(row["reward"]), float(row["cum_reward"]),
                float(row["cum_disc_reward"]), float(row["plan_ms"]), int(row["seed"])))
    return result
