"""Seeded replication sweeps reproducing the desk-scale experiment protocol.

Scenarios (one aggregate CSV schema for all of them; a row per
(method, n, sweep_value) with columns mean_gain, se_gain, mistake_rate,
improvement_rate, mean_abstention, reps):

- spi_noise_sweep / spi_gap_sweep: safe policy improvement against a fixed
  baseline while sweeping the outcome noise or the baseline-optimal value
  gap. Gains are true values on a shared oracle evaluation grid, so a
  rejected run (policy == baseline) has gain exactly 0.
- abstention_sweep: the abstention learner against plain EWM; gain is
  V^(p)(learned) - V(EWM) on the shared grid, improvement_rate is the win
  rate.
- rate_check: median abstaining regret against the in-class optimum per
  sample size (rows 'algo1'), plus the classical regret of the fair-coin
  conversion of the same fitted policies (rows 'algo1_coin'). For these rows
  mean_gain carries the median regret and se_gain a normal-approximation
  standard error of the median.
- robust_check: worst-case-value identity gaps on random {0, 1/2, 1}
  instances; n is the instance grid size, sweep_value the ambiguity radius,
  mean_gain the mean gap and se_gain the max gap.

Replication r uses seed stream r throughout, datasets are shared by all
methods within a replication (method order cannot change per-seed results),
and the CSV is byte-identical across reruns of the same config. Cells
(n, sweep_value) may run in a process pool; row order is canonical (sorted
by method, n, sweep_value, seed) regardless of completion order.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .dgp import (
    KAPPA,
    STREAM_EVAL,
    DgpOracle,
    DgpSpec,
    default_policy_class,
    generate,
    spi_baseline,
    stream_rng,
)
from .errors import InputError
from .learner import LearnerConfig, ewm, learn_abstaining
from .model import ImputedPolicy, PolicyClass, axis_threshold_class
from .robust import GridRandomizingPolicy, check_shift_equivalence
from .safety import (
    DEFAULT_BONUS_GRID,
    SpiConfig,
    SpiOutcome,
    hcpi,
    safe_ewm,
    safe_policy_improvement,
    split_train_test,
)

__all__ = [
    "ExperimentConfig",
    "ReplicationResult",
    "run_experiment",
    "aggregate_results",
    "write_aggregate_csv",
    "fit_loglog_slope",
    "AGGREGATE_COLUMNS",
]

SCENARIOS = (
    "spi_noise_sweep",
    "spi_gap_sweep",
    "abstention_sweep",
    "rate_check",
    "robust_check",
)
METHODS = ("algo2", "safe_ewm", "hcpi_t", "hcpi_ci", "ewm_plain")
AGGREGATE_COLUMNS = (
    "method",
    "n",
    "sweep_value",
    "mean_gain",
    "se_gain",
    "mistake_rate",
    "improvement_rate",
    "mean_abstention",
    "reps",
)

_ROBUST_STREAM = 7


@dataclass(frozen=True)
class ExperimentConfig:
    """A declarative experiment: scenario, DGP template, grids, methods.

    Replications default to 100 per sweep cell; the Type-I error audit runs
    at 500 (see the acceptance suite). Both are configurable down for quick
    desk runs.
    """

    scenario: str
    dgp: DgpSpec
    n_grid: tuple
    sweep_values: tuple
    replications: int = 100
    delta: float = 0.05
    methods: tuple = ("algo2", "safe_ewm", "hcpi_t", "hcpi_ci")
    output_path: Optional[str] = None
    bonus_grid: tuple = DEFAULT_BONUS_GRID
    bonus: float = 0.05
    train_fraction: float = 0.5
    thresholds_per_feature: int = 19
    policy_class_spec: Optional[dict] = None
    radius_constant: float = 1.0
    eval_draws: int = 200_000
    workers: int = 1

    def __post_init__(self) -> None:
        if self.scenario not in SCENARIOS:
            raise InputError(f"scenario must be one of {SCENARIOS}")
        if self.replications < 1:
            raise InputError("replications must be >= 1")
        if not self.n_grid:
            raise InputError("n_grid must be nonempty")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise InputError(f"unknown methods: {sorted(unknown)}")
        object.__setattr__(self, "n_grid", tuple(int(n) for n in self.n_grid))
        object.__setattr__(
            self, "sweep_values", tuple(float(v) for v in self.sweep_values)
        )
        object.__setattr__(self, "methods", tuple(self.methods))


@dataclass(frozen=True)
class ReplicationResult:
    """Per-replication metrics; mistake and improvement are never both true."""

    method: str
    n: int
    sweep_value: float
    seed: int
    true_value_gain: float
    mistake: bool
    improvement: bool
    abstention_rate: float
    accepted: bool
    wallclock_ms: float

    def __post_init__(self) -> None:
        if self.mistake and self.improvement:
            raise InputError("a result cannot be both a mistake and an improvement")


def _sort_key(r: ReplicationResult):
    return (r.method, r.n, r.sweep_value, r.seed)


def _cell_spec(config: ExperimentConfig, sweep: float) -> DgpSpec:
    if config.scenario in ("spi_noise_sweep", "abstention_sweep"):
        return replace(config.dgp, noise_sigma=sweep)
    if config.scenario == "spi_gap_sweep":
        return replace(config.dgp, baseline_gap=sweep)
    return config.dgp


def _build_class(config: ExperimentConfig, spec: DgpSpec) -> PolicyClass:
    cs = config.policy_class_spec
    if cs is None:
        return default_policy_class(spec, config.thresholds_per_feature)
    thresholds = cs["thresholds"]
    if isinstance(thresholds, dict):
        thresholds = np.linspace(
            float(thresholds["lo"]), float(thresholds["hi"]), int(thresholds["count"])
        )
    return axis_threshold_class(
        spec.dim,
        thresholds,
        directions=tuple(cs.get("directions", ("above",))),
        features=cs.get("features"),
        include_constants=bool(cs.get("include_constants", False)),
        vc_dim=cs.get("vc_dim"),
    )


def _grid_value(labels: np.ndarray, mu0: np.ndarray, mu1: np.ndarray) -> float:
    return float(np.where(labels == 1, mu1, mu0).mean())


def _abstaining_grid_value(
    base_labels: np.ndarray,
    member_labels: np.ndarray,
    mu0: np.ndarray,
    mu1: np.ndarray,
    bonus: float,
) -> float:
    agree = base_labels == member_labels
    committed = np.where(base_labels == 1, mu1, mu0)
    return float(np.where(agree, committed, 0.5 * (mu0 + mu1) + bonus).mean())


def _run_spi_cell(config: ExperimentConfig, n: int, sweep: float) -> list:
    spec = _cell_spec(config, sweep)
    oracle = DgpOracle(spec)
    grid = oracle.draw_covariates(config.eval_draws, 0, STREAM_EVAL)
    mu0 = oracle.mean_outcome(0, grid)
    mu1 = oracle.mean_outcome(1, grid)
    baseline = spi_baseline(spec)
    pc = _build_class(config, spec)
    baseline_value = _grid_value(baseline.decide(grid), mu0, mu1)

    rows = []
    for rep in range(config.replications):
        data, _ = generate(spec, n, replication=rep)
        for method in config.methods:
            t0 = time.perf_counter()
            learner = LearnerConfig(
                delta=config.delta,
                kappa=KAPPA,
                radius_constant=config.radius_constant,
                seed=rep,
            )
            try:
                if method == "algo2":
                    outcome = safe_policy_improvement(
                        data, pc, baseline,
                        SpiConfig(
                            bonus_grid=config.bonus_grid,
                            delta=config.delta,
                            train_fraction=config.train_fraction,
                            estimator="ipw",
                            learner=learner,
                        ),
                    )
                elif method == "safe_ewm":
                    outcome = safe_ewm(
                        data, pc, baseline, config.delta,
                        train_fraction=config.train_fraction, seed=rep,
                    )
                elif method in ("hcpi_t", "hcpi_ci"):
                    outcome = hcpi(
                        data, pc, baseline, config.delta,
                        variant="t_test" if method == "hcpi_t" else "clipped_ci",
                        train_fraction=config.train_fraction, seed=rep,
                    )
                else:  # ewm_plain: deploy the EWM candidate unconditionally
                    train, _ = split_train_test(data, config.train_fraction, rep)
                    outcome = SpiOutcome(
                        accepted=True, policy=ewm(train, pc),
                        accepted_bonus=None, lcb_trace=(),
                    )
            except Exception as exc:
                raise RuntimeError(
                    f"replication panic (method={method!r}, seed={rep}): {exc}"
                ) from exc
            ms = (time.perf_counter() - t0) * 1000.0
            value = _grid_value(outcome.policy.decide(grid), mu0, mu1)
            gain = value - baseline_value
            abst = 0.0
            if isinstance(outcome.policy, ImputedPolicy):
                abst = float(outcome.policy.decision.abstains(grid).mean())
            rows.append(
                ReplicationResult(
                    method=method, n=n, sweep_value=sweep, seed=rep,
                    true_value_gain=gain, mistake=gain < 0, improvement=gain > 0,
                    abstention_rate=abst, accepted=outcome.accepted,
                    wallclock_ms=ms,
                )
            )
    return rows


def _run_abstention_cell(config: ExperimentConfig, n: int, sweep: float) -> list:
    spec = _cell_spec(config, sweep)
    oracle = DgpOracle(spec)
    grid = oracle.draw_covariates(config.eval_draws, 0, STREAM_EVAL)
    mu0 = oracle.mean_outcome(0, grid)
    mu1 = oracle.mean_outcome(1, grid)
    pc = _build_class(config, spec)

    rows = []
    for rep in range(config.replications):
        data, _ = generate(spec, n, replication=rep)
        t0 = time.perf_counter()
        cfg = LearnerConfig(
            bonus=config.bonus, delta=config.delta, kappa=KAPPA,
            radius_constant=config.radius_constant, seed=rep,
        )
        try:
            fit = learn_abstaining(data, pc, cfg)
            ewm_policy = ewm(data, pc)
        except Exception as exc:
            raise RuntimeError(
                f"replication panic (method='algo1', seed={rep}): {exc}"
            ) from exc
        ms = (time.perf_counter() - t0) * 1000.0
        base_lab = fit.result.base.decide(grid)
        mem_lab = fit.result.member.decide(grid)
        v_abstain = _abstaining_grid_value(base_lab, mem_lab, mu0, mu1, config.bonus)
        v_ewm = _grid_value(ewm_policy.decide(grid), mu0, mu1)
        gain = v_abstain - v_ewm
        rows.append(
            ReplicationResult(
                method="algo1", n=n, sweep_value=sweep, seed=rep,
                true_value_gain=gain, mistake=gain < 0, improvement=gain > 0,
                abstention_rate=float((base_lab != mem_lab).mean()),
                accepted=True, wallclock_ms=ms,
            )
        )
    return rows


def _run_rate_cell(config: ExperimentConfig, n: int, sweep: float) -> list:
    spec = config.dgp
    oracle = DgpOracle(spec)
    grid = oracle.draw_covariates(config.eval_draws, 0, STREAM_EVAL)
    mu0 = oracle.mean_outcome(0, grid)
    mu1 = oracle.mean_outcome(1, grid)
    pc = _build_class(config, spec)
    gain_vec = mu1 - mu0
    mu0_mean = float(mu0.mean())
    best_value = -np.inf
    for policy in pc.policies:  # in-class optimum on the shared grid
        v = mu0_mean + float(gain_vec[policy.decide(grid) == 1].sum()) / grid.shape[0]
        best_value = max(best_value, v)

    rows = []
    for rep in range(config.replications):
        data, _ = generate(spec, n, replication=rep)
        t0 = time.perf_counter()
        cfg = LearnerConfig(
            bonus=sweep, delta=config.delta, kappa=KAPPA,
            radius_constant=config.radius_constant, seed=rep,
        )
        try:
            fit = learn_abstaining(data, pc, cfg)
        except Exception as exc:
            raise RuntimeError(
                f"replication panic (method='algo1', seed={rep}): {exc}"
            ) from exc
        ms = (time.perf_counter() - t0) * 1000.0
        base_lab = fit.result.base.decide(grid)
        mem_lab = fit.result.member.decide(grid)
        v_p = _abstaining_grid_value(base_lab, mem_lab, mu0, mu1, sweep)
        v_coin = _abstaining_grid_value(base_lab, mem_lab, mu0, mu1, 0.0)
        abst = float((base_lab != mem_lab).mean())
        for method, value in (("algo1", v_p), ("algo1_coin", v_coin)):
            gain = value - best_value
            rows.append(
                ReplicationResult(
                    method=method, n=n, sweep_value=sweep, seed=rep,
                    true_value_gain=gain, mistake=gain < 0, improvement=gain > 0,
                    abstention_rate=abst, accepted=True, wallclock_ms=ms,
                )
            )
    return rows


def _run_robust_cell(config: ExperimentConfig, n: int, sweep: float) -> list:
    spec = config.dgp
    oracle = DgpOracle(spec)
    rows = []
    for rep in range(config.replications):
        t0 = time.perf_counter()
        points = oracle.draw_covariates(n, rep, STREAM_EVAL)
        rng = stream_rng(spec.seed, rep, _ROBUST_STREAM)
        values = rng.choice(np.array([0.0, 0.5, 1.0]), size=n)
        policy = GridRandomizingPolicy(points=points, values=values)
        means = (oracle.mean_outcome(0, points), oracle.mean_outcome(1, points))
        check = check_shift_equivalence(policy, points, means, sweep)
        ms = (time.perf_counter() - t0) * 1000.0
        violated = check.gap > 1e-12
        rows.append(
            ReplicationResult(
                method="prop3", n=n, sweep_value=sweep, seed=rep,
                true_value_gain=check.gap, mistake=violated, improvement=False,
                abstention_rate=float((values == 0.5).mean()),
                accepted=not violated, wallclock_ms=ms,
            )
        )
    return rows


_CELL_RUNNERS = {
    "spi_noise_sweep": _run_spi_cell,
    "spi_gap_sweep": _run_spi_cell,
    "abstention_sweep": _run_abstention_cell,
    "rate_check": _run_rate_cell,
    "robust_check": _run_robust_cell,
}


def _run_cell(args) -> list:
    config, n, sweep = args
    return _CELL_RUNNERS[config.scenario](config, n, sweep)


def run_experiment(config: ExperimentConfig) -> list:
    """Run all (n, sweep_value, replication) cells and return the canonical
    result list; writes the aggregate CSV when output_path is set."""
    cells = [(config, n, sweep) for n in config.n_grid for sweep in config.sweep_values]
    if config.workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            chunks = list(pool.map(_run_cell, cells))
    else:
        chunks = [_run_cell(c) for c in cells]
    results = sorted((r for chunk in chunks for r in chunk), key=_sort_key)
    if config.output_path is not None:
        try:
            with open(config.output_path, "w", newline="", encoding="utf-8") as fh:
                fh.write(aggregate_csv_string(config, results))
        except OSError as exc:
            raise OSError(f"cannot write aggregate CSV to {config.output_path}: {exc}")
    return results


def aggregate_results(config: ExperimentConfig, results: Sequence[ReplicationResult]) -> list[dict]:
    """One aggregate row per (method, n, sweep_value)."""
    groups: dict[tuple, list[ReplicationResult]] = {}
    for r in results:
        groups.setdefault((r.method, r.n, r.sweep_value), []).append(r)
    rows = []
    for (method, n, sweep), rs in sorted(groups.items()):
        gains = np.array([r.true_value_gain for r in rs])
        reps = len(rs)
        if config.scenario == "rate_check":
            regrets = -gains
            mean_gain = float(np.median(regrets))
            se_gain = (
                float(1.2533 * regrets.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
            )
        elif config.scenario == "robust_check":
            mean_gain = float(gains.mean())
            se_gain = float(gains.max())
        else:
            mean_gain = float(gains.mean())
            se_gain = float(gains.std(ddof=1) / math.sqrt(reps)) if reps > 1 else 0.0
        rows.append(
            {
                "method": method,
                "n": n,
                "sweep_value": sweep,
                "mean_gain": mean_gain,
                "se_gain": se_gain,
                "mistake_rate": sum(r.mistake for r in rs) / reps,
                "improvement_rate": sum(r.improvement for r in rs) / reps,
                "mean_abstention": float(np.mean([r.abstention_rate for r in rs])),
                "reps": reps,
            }
        )
    return rows


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".12g")
    return str(value)


def aggregate_csv_string(
    config: ExperimentConfig, results: Sequence[ReplicationResult]
) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(AGGREGATE_COLUMNS)
    for row in aggregate_results(config, results):
        writer.writerow([_fmt(row[c]) for c in AGGREGATE_COLUMNS])
    return buf.getvalue()


def write_aggregate_csv(
    config: ExperimentConfig, results: Sequence[ReplicationResult], path: str
) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(aggregate_csv_string(config, results))


def replication_csv_string(results: Sequence[ReplicationResult]) -> str:
    """Per-replication rows (canonical order), for archival."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        [
            "method", "n", "sweep_value", "seed", "true_value_gain",
            "mistake", "improvement", "abstention_rate", "accepted", "wallclock_ms",
        ]
    )
    for r in sorted(results, key=_sort_key):
        writer.writerow(
            [
                r.method, r.n, _fmt(r.sweep_value), r.seed, _fmt(r.true_value_gain),
                int(r.mistake), int(r.improvement), _fmt(r.abstention_rate),
                int(r.accepted), _fmt(round(r.wallclock_ms, 3)),
            ]
        )
    return buf.getvalue()


def fit_loglog_slope(ns: Sequence[int], values: Sequence[float]) -> float:
    """Least-squares slope of log(values) against log(ns)."""
    ns_arr = np.asarray(ns, dtype=np.float64)
    vals = np.asarray(values, dtype=np.float64)
    if ns_arr.shape != vals.shape or ns_arr.size < 2:
        raise InputError("need matching grids with at least two points")
    if np.any(vals <= 0) or np.any(ns_arr <= 0):
        raise InputError("log-log fit needs strictly positive values")
    return float(np.polyfit(np.log(ns_arr), np.log(vals), 1)[0])
