"""Command-line front end.

Subcommands: simulate (emit a dataset CSV), learn (abstention learner on a
dataset CSV, emit policy JSON + diagnostics), spi (safe policy improvement
against a baseline policy JSON), margin (margin wrapper, FiniteD mode),
robust-check (worst-case-value identity sweep), experiment (full sweep from a
TOML/JSON config). Exit codes: 0 success, 2 input error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

import numpy as np

from . import dgp as dgp_mod
from .dgp import DgpSpec, DgpOracle, generate, stream_rng
from .errors import InputError
from .harness import (
    ExperimentConfig,
    aggregate_csv_string,
    run_experiment,
)
from .learner import LearnerConfig, learn_abstaining
from .margin import MarginConfig, margin_learn
from .model import Dataset, PolicyClass, policy_from_json
from .robust import GridRandomizingPolicy, check_shift_equivalence
from .safety import DEFAULT_BONUS_GRID, SpiConfig, safe_policy_improvement


def _parse_grid(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise InputError(f"cannot parse grid {text!r}: {exc}")


def _load_policy(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        return policy_from_json(json.load(fh))


def _load_class(path: str) -> PolicyClass:
    with open(path, "r", encoding="utf-8") as fh:
        obj = json.load(fh)
    if not isinstance(obj, dict) or "policies" not in obj:
        raise InputError("policy class JSON needs 'policies' and 'vc_dim'")
    policies = tuple(policy_from_json(p) for p in obj["policies"])
    return PolicyClass(policies, int(obj.get("vc_dim", 1)))


def _default_class_for(data: Dataset, thresholds: int = 19) -> PolicyClass:
    from .model import axis_threshold_class

    lo = float(np.quantile(data.x, 0.02))
    hi = float(np.quantile(data.x, 0.98))
    return axis_threshold_class(
        data.dim, np.linspace(lo, hi, thresholds),
        directions=("above", "below"), include_constants=True,
    )


def _write_out(path, text: str) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _cmd_simulate(args) -> None:
    spec = DgpSpec(
        family=args.family, dim=args.dim, noise_sigma=args.sigma,
        propensity_kind=args.propensity, reward_regime=args.regime,
        baseline_gap=args.gap, seed=args.seed,
    )
    data, _ = generate(spec, args.n, replication=args.replication)
    _write_out(args.out, data.to_csv_string())


def _cmd_learn(args) -> None:
    data = Dataset.from_csv(args.data, kappa=args.kappa, bounded_outcomes=args.bounded)
    pc = _load_class(args.policy_class) if args.policy_class else _default_class_for(data)
    config = LearnerConfig(
        bonus=args.bonus, delta=args.delta, kappa=args.kappa, seed=args.seed
    )
    fit = learn_abstaining(data, pc, config)
    _write_out(args.out, fit.to_json_string() + "\n")


def _cmd_spi(args) -> None:
    data = Dataset.from_csv(args.data, kappa=args.kappa, bounded_outcomes=args.bounded)
    baseline = _load_policy(args.baseline)
    pc = _load_class(args.policy_class) if args.policy_class else _default_class_for(data)
    config = SpiConfig(
        bonus_grid=_parse_grid(args.grid) if args.grid else DEFAULT_BONUS_GRID,
        delta=args.delta,
        train_fraction=args.train_fraction,
        learner=LearnerConfig(delta=args.delta, kappa=args.kappa, seed=args.seed),
    )
    outcome = safe_policy_improvement(data, pc, baseline, config)
    _write_out(args.out, outcome.to_json_string() + "\n")


def _cmd_margin(args) -> None:
    data = Dataset.from_csv(args.data, kappa=args.kappa, bounded_outcomes=args.bounded)
    pc = _load_class(args.policy_class) if args.policy_class else _default_class_for(data)
    mode = args.mode.lower()
    if mode in ("finited", "finite_d"):
        mode = "finite_d"
    elif mode in ("cateoracle", "cate_oracle", "cate-oracle"):
        raise InputError(
            "the CATE-oracle mode needs an in-process estimator; use the API"
        )
    config = MarginConfig(
        margin=args.margin, mode=mode, finite_d_cap=args.cap,
        learner=LearnerConfig(delta=args.delta, kappa=args.kappa, seed=args.seed),
    )
    policy = margin_learn(data, pc, config)
    _write_out(args.out, json.dumps(policy.to_json(), indent=2) + "\n")


def _cmd_robust_check(args) -> None:
    spec = DgpSpec(family=args.family, dim=args.dim, seed=args.seed)
    oracle = DgpOracle(spec)
    radii = _parse_grid(args.grid) if args.grid else (0.05, 0.1, 0.5)
    lines = ["radius,instances,max_gap,mean_gap"]
    for radius in radii:
        gaps = []
        for rep in range(args.instances):
            points = oracle.draw_covariates(args.points, rep, dgp_mod.STREAM_EVAL)
            rng = stream_rng(spec.seed, rep, 7)
            values = rng.choice(np.array([0.0, 0.5, 1.0]), size=args.points)
            policy = GridRandomizingPolicy(points=points, values=values)
            means = (oracle.mean_outcome(0, points), oracle.mean_outcome(1, points))
            gaps.append(check_shift_equivalence(policy, points, means, radius).gap)
        lines.append(
            f"{radius:.12g},{args.instances},{max(gaps):.3e},{float(np.mean(gaps)):.3e}"
        )
    _write_out(args.out, "\n".join(lines) + "\n")


def _load_config_file(path: str) -> dict:
    if path.endswith(".toml"):
        try:
            import tomllib  # py311+
        except ModuleNotFoundError:
            import tomli as tomllib
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _cmd_experiment(args) -> None:
    raw = _load_config_file(args.config)
    dgp_raw = raw.pop("dgp", {})
    spec = DgpSpec(**dgp_raw)
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    if args.delta is not None:
        raw["delta"] = args.delta
    if args.out is not None:
        raw["output_path"] = args.out
    for key in ("n_grid", "sweep_values", "methods", "bonus_grid"):
        if key in raw:
            raw[key] = tuple(raw[key])
    if "policy_class_spec" in raw and raw["policy_class_spec"] is not None:
        raw["policy_class_spec"] = dict(raw["policy_class_spec"])
    config = ExperimentConfig(dgp=spec, **raw)
    results = run_experiment(config)
    if config.output_path is None:
        sys.stdout.write(aggregate_csv_string(config, results))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="abstainlearn", description="Policy learning with abstention"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="emit a synthetic dataset CSV")
    p.add_argument("--family", default="spi", choices=("spi", "abstention"))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--dim", type=int, default=5)
    p.add_argument("--sigma", type=float, default=0.3)
    p.add_argument("--propensity", default="constant", choices=("constant", "logistic"))
    p.add_argument("--regime", default="linear", choices=("linear", "nonlinear", "complex"))
    p.add_argument("--gap", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--replication", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("learn", help="run the abstention learner on a dataset CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--policy-class", default=None, help="policy class JSON file")
    p.add_argument("--bonus", type=float, default=0.05)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--kappa", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bounded", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_learn)

    p = sub.add_parser("spi", help="safe policy improvement vs a baseline policy JSON")
    p.add_argument("--data", required=True)
    p.add_argument("--baseline", required=True)
    p.add_argument("--policy-class", default=None)
    p.add_argument("--grid", default=None, help="comma-separated bonus grid")
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--kappa", type=float, default=0.1)
    p.add_argument("--train-fraction", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bounded", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_spi)

    p = sub.add_parser("margin", help="margin wrapper (FiniteD mode)")
    p.add_argument("--data", required=True)
    p.add_argument("--policy-class", default=None)
    p.add_argument("--margin", type=float, required=True)
    p.add_argument("--mode", default="finite_d")
    p.add_argument("--cap", type=int, default=12)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--kappa", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bounded", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_margin)

    p = sub.add_parser("robust-check", help="worst-case-value identity sweep")
    p.add_argument("--family", default="spi", choices=("spi", "abstention"))
    p.add_argument("--dim", type=int, default=5)
    p.add_argument("--points", type=int, default=50)
    p.add_argument("--instances", type=int, default=100)
    p.add_argument("--grid", default=None, help="comma-separated radii")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_robust_check)

    p = sub.add_parser("experiment", help="full sweep from a TOML/JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--delta", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_experiment)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except (TypeError, KeyError, json.JSONDecodeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
