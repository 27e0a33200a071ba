"""Command-line entry point: ``bamcp {run,sweep,gittins-eval,maze-ablate}``."""
from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from .experiment import ExperimentConfig, run_experiment, summarize, write_csv

SWEEP_SIMS = (10, 100, 1000, 10000)

ON_OFF = {"on": True, "off": False}


def _on_off(value: str) -> bool:
    try:
        return ON_OFF[value.strip().lower()]
    except KeyError:
        raise argparse.ArgumentTypeError(f"expected 'on' or 'off', got {value!r}") from None


# config-file key -> converter; keys are ExperimentConfig fields
CONVERTERS = {
    "domain": str, "algo": str, "sims": int, "steps": int, "runs": int, "seed": int,
    "gamma": float, "c": float, "rollout_eps": float, "lazy": _on_off, "rollout_learn": _on_off,
    "out": str, "alpha1": float, "beta1": float, "alpha2": float, "beta2": float, "mh_burn": int,
    "override": str, "maze_file": str, "success": float, "epsilon": float, "learning_rate": float,
    "timing": _on_off,
}


def read_config_file(path: str | Path) -> dict:
    """Flat ``key = value`` file; keys are flag names with or without dashes."""
    values = {}
    text = Path(path).read_text("utf-8")
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.lstrip("-").replace("-", "_")
        if key not in CONVERTERS:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = CONVERTERS[key](value)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise ValueError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return values


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value file; flags given on the command line win")
    p.add_argument("--domain", choices=["double-loop", "grid5", "grid10", "maze", "infinite-grid",
                                        "infinite-grid-wrong"])
    p.add_argument("--algo", choices=["bamcp", "bauct"])
    p.add_argument("--sims", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--runs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--gamma", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--rollout-eps", type=float)
    p.add_argument("--lazy", type=_on_off)
    p.add_argument("--rollout-learn", type=_on_off)
    p.add_argument("--out")
    p.add_argument("--alpha1", type=float)
    p.add_argument("--beta1", type=float)
    p.add_argument("--alpha2", type=float)
    p.add_argument("--beta2", type=float)
    p.add_argument("--mh-burn", type=int)
    p.add_argument("--override", help="Double-loop transition file")
    p.add_argument("--maze-file")
    p.add_argument("--success", type=float, help="probability that a move succeeds")
    p.add_argument("--timing", type=_on_off, help="record wall-clock planning time (default on)")


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    values = read_config_file(args.config) if getattr(args, "config", None) else {}
    for f in fields(ExperimentConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    return ExperimentConfig(**values)


def _report(label: str, result) -> None:
    s = summarize(result)
    print(f"{label}: mean total reward {s['mean']:.6g} +/- {s['half_width']:.3g}")


def cmd_run(args) -> None:
    cfg = build_config(args)
    result = run_experiment(cfg)
    if cfg.out:
        write_csv(result, cfg.out)
    _report(f"{cfg.domain} {cfg.algo} sims={cfg.sims}", result)


def _suffixed(out: str | None, tag: str) -> str | None:
    if not out:
        return None
    p = Path(out)
    return str(p.with_name(f"{p.stem}_{tag}{p.suffix or '.csv'}"))


def cmd_sweep(args) -> None:
    base = build_config(args)
    for sims in SWEEP_SIMS:
        cfg = replace(base, sims=sims)
        result = run_experiment(cfg)
        if base.out:
            write_csv(result, _suffixed(base.out, f"sims{sims}"))
        _report(f"sims={sims}", result)


def cmd_maze_ablate(args) -> None:
    base = build_config(args)
    if args.domain is None and "domain" not in (read_config_file(args.config) if args.config else {}):
        base = replace(base, domain="maze")
    for lazy in (True, False):
        for learn in (True, False):
            cfg = replace(base, lazy=lazy, rollout_learn=learn)
            result = run_experiment(cfg)
            tag = f"lazy-{'on' if lazy else 'off'}_learn-{'on' if learn else 'off'}"
            if base.out:
                write_csv(result, _suffixed(base.out, tag))
            ms = np.mean([r.plan_ms for r in result.records])
            _report(f"{tag} ({ms:.1f} ms/step)", result)


def cmd_gittins_eval(args) -> None:
    from .gittins import BetaArm, gittins_index
    from .experiment import _planner_config
    from .beliefs import BetaBernoulliArms
    from .domains import bandit_reward
    from .tabular import TabularEncoding, tabular_search

    pcfg = _planner_config(ExperimentConfig(sims=args.sims, c=args.c, rollout_eps=args.rollout_eps),
                           args.gamma, 1.0)
    rows = []
    for a in range(1, args.max_param + 1):
        line = []
        for b in range(1, args.max_param + 1):
            index = gittins_index(BetaArm(a, b), args.gamma)
            best = 1 if index > 0.5 else 0
            belief = BetaBernoulliArms((None, (float(a), float(b))))
            enc = TabularEncoding(belief, 2, bandit_reward(belief, {0: 0.5}))
            hits = 0
            for k in range(args.runs):
                rng = np.random.default_rng(args.seed + k)
                hits += tabular_search(enc, 2, pcfg, rng).action == best
            rows.append((a, b, index, best, hits / args.runs))
            line.append(f"{hits / args.runs:4.2f}")
        print(f"alpha={a:2d} " + " ".join(line), flush=True)
    if args.out:
        with open(args.out, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["alpha", "beta", "gittins_index", "optimal_arm", "fraction_correct"])
            for a, b, index, best, frac in rows:
                w.writerow([a, b, f"{index:.6g}", best, f"{frac:.6g}"])


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bamcp", description="Bayes-adaptive Monte-Carlo planning benchmarks")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run one experiment configuration")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("sweep", help="run with 10, 100, 1000 and 10000 simulations")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("maze-ablate", help="lazy sampling x rollout learning on/off matrix")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_maze_ablate)
    p = sub.add_parser("gittins-eval", help="BAMCP vs Gittins decisions over a grid of Beta posteriors")
    p.add_argument("--sims", type=int, default=10000)
    p.add_argument("--runs", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gamma", type=float, default=0.95)
    p.add_argument("--c", type=float, default=3.0)
    p.add_argument("--rollout-eps", type=float, default=0.5)
    p.add_argument("--max-param", type=int, default=20)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gittins_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (ValueError, OSError, NotImplementedError) as exc:
        print(f"bamcp: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
