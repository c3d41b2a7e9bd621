"""Safe policy improvement with abstention, plus comparison baselines.

``safe_policy_improvement`` runs the abstention learner over an ascending
grid of bonuses on a train split, imputes abstentions with the baseline, and
deploys the first candidate whose one-sided lower confidence bound on the
value improvement (Bonferroni-adjusted for the full grid size) exceeds zero.
Failing every test, it returns the baseline.

Baselines:

- ``safe_ewm``: plain EWM candidate, one LCB test at level delta (k = 1).
- ``hcpi``: simplified high-confidence policy improvement. The candidate is
  picked on the train split by maximizing the variant's own lower bound,
  rescaled to the test-split size; the safety test repeats it on the test
  split. Variants: 't_test' (Student-t LCB on per-unit IPW differences) and
  'clipped_ci' (per-unit returns clipped to [-b, b], empirical-Bernstein
  lower bound).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import stats

from .errors import InputError
from .learner import LearnerConfig, learn_abstaining
from .model import (
    AbstainingPolicy,
    BinaryPolicy,
    Dataset,
    ImputedPolicy,
    NuisanceModel,
    PolicyClass,
)
from .values import lcb_difference

__all__ = [
    "SpiConfig",
    "SpiOutcome",
    "impute_baseline",
    "split_train_test",
    "safe_policy_improvement",
    "safe_ewm",
    "hcpi",
]

DEFAULT_BONUS_GRID = (0.0, 0.01, 0.05, 0.10, 0.20)


@dataclass(frozen=True)
class SpiConfig:
    """Configuration for safe policy improvement.

    The bonus grid must be strictly increasing and nonnegative; every LCB in
    a run uses the same Bonferroni k = len(bonus_grid) regardless of how many
    candidates end up being tested before the early exit.
    """

    bonus_grid: tuple = DEFAULT_BONUS_GRID
    delta: float = 0.05
    train_fraction: float = 0.5
    estimator: str = "ipw"
    learner: LearnerConfig = field(default_factory=LearnerConfig)

    def __post_init__(self) -> None:
        grid = tuple(float(p) for p in self.bonus_grid)
        if len(grid) < 1:
            raise InputError("bonus grid must contain at least one value")
        if any(p < 0 for p in grid):
            raise InputError("bonuses must be >= 0")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise InputError("bonus grid must be strictly increasing")
        if not (0.0 < self.delta < 1.0):
            raise InputError("delta must lie in (0, 1)")
        if not (0.0 < self.train_fraction < 1.0):
            raise InputError("train_fraction must lie in (0, 1)")
        if self.estimator not in ("ipw", "dr"):
            raise InputError("estimator must be 'ipw' or 'dr'")
        object.__setattr__(self, "bonus_grid", grid)


@dataclass(frozen=True)
class SpiOutcome:
    """Result of a safety-gated policy search.

    ``policy`` is the accepted candidate, or exactly the baseline when no
    candidate passed. ``lcb_trace`` records (bonus, LCB) for every test
    actually performed, in the order performed (a prefix of the grid).
    """

    accepted: bool
    policy: BinaryPolicy
    accepted_bonus: Optional[float]
    lcb_trace: tuple

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "lcb_trace",
            tuple((b, float(l)) for b, l in self.lcb_trace),
        )

    def to_json(self) -> dict:
        return {
            "accepted": self.accepted,
            "policy": self.policy.to_json(),
            "accepted_bonus": self.accepted_bonus,
            "lcb_trace": [[b, l] for b, l in self.lcb_trace],
        }

    def to_json_string(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    def trace_csv_rows(self) -> list[tuple]:
        """(bonus, lcb, accepted) rows for CSV export."""
        return [
            (b, l, self.accepted and b == self.accepted_bonus)
            for b, l in self.lcb_trace
        ]


def impute_baseline(
    abstaining: AbstainingPolicy, baseline: BinaryPolicy
) -> BinaryPolicy:
    """Binary policy equal to the baseline wherever the input abstains."""
    return ImputedPolicy(decision=abstaining, fallback=baseline)


def split_train_test(
    data: Dataset, train_fraction: float, seed: int
) -> tuple[Dataset, Dataset]:
    """Seeded shuffle, first ceil(n * fraction) rows to train."""
    if not (0.0 < train_fraction < 1.0):
        raise InputError("train_fraction must lie in (0, 1)")
    perm = np.random.default_rng(seed).permutation(data.n)
    n_train = int(math.ceil(data.n * train_fraction))
    if n_train == data.n:
        n_train = data.n - 1
    return data.subset(perm[:n_train]), data.subset(perm[n_train:])


def safe_policy_improvement(
    data: Dataset,
    policy_class: PolicyClass,
    baseline: BinaryPolicy,
    config: SpiConfig,
    nuisance: Optional[NuisanceModel] = None,
) -> SpiOutcome:
    """Bonus-grid search with a Bonferroni-gated safety test per candidate.

    Candidates are tested in ascending bonus order and the first one with
    LCB > 0 is returned; one train/test split is drawn up front and reused
    for every bonus. A candidate that matches the baseline pointwise on the
    test split is still tested (its LCB is 0 and fails), keeping the
    Bonferroni accounting honest.
    """
    train, test = split_train_test(data, config.train_fraction, config.learner.seed)
    k = len(config.bonus_grid)
    trace: list[tuple] = []
    for bonus in config.bonus_grid:
        fit = learn_abstaining(
            train, policy_class, config.learner.with_bonus(bonus), nuisance
        )
        candidate = impute_baseline(fit.result, baseline)
        lcb = lcb_difference(
            candidate, baseline, test, config.delta, k=k,
            estimator=config.estimator, nuisance=nuisance,
        )
        trace.append((bonus, lcb))
        if lcb > 0:
            return SpiOutcome(
                accepted=True,
                policy=candidate,
                accepted_bonus=bonus,
                lcb_trace=tuple(trace),
            )
    return SpiOutcome(
        accepted=False, policy=baseline, accepted_bonus=None, lcb_trace=tuple(trace)
    )


def safe_ewm(
    data: Dataset,
    policy_class: PolicyClass,
    baseline: BinaryPolicy,
    delta: float,
    estimator: str = "ipw",
    nuisance: Optional[NuisanceModel] = None,
    train_fraction: float = 0.5,
    seed: int = 0,
) -> SpiOutcome:
    """EWM candidate tested against the baseline exactly like the grid method
    but with a single test (k = 1)."""
    from .learner import ewm as _ewm

    train, test = split_train_test(data, train_fraction, seed)
    candidate = _ewm(train, policy_class, objective=estimator, nuisance=nuisance)
    lcb = lcb_difference(
        candidate, baseline, test, delta, k=1, estimator=estimator, nuisance=nuisance
    )
    if lcb > 0:
        return SpiOutcome(
            accepted=True, policy=candidate, accepted_bonus=None,
            lcb_trace=((None, lcb),),
        )
    return SpiOutcome(
        accepted=False, policy=baseline, accepted_bonus=None, lcb_trace=((None, lcb),)
    )


def _t_test_bound(mean: float, sd: float, n: int, delta: float) -> float:
    if sd == 0.0:
        return mean
    t = float(stats.t.ppf(1.0 - delta, df=n - 1))
    return mean - t * sd / math.sqrt(n)


def _empirical_bernstein_bound(
    mean: float, var: float, n: int, delta: float, value_range: float
) -> float:
    # Maurer-Pontil: E[X] >= mean - sqrt(2 v ln(2/delta) / n) - 7 R ln(2/delta) / (3 (n-1))
    log_term = math.log(2.0 / delta)
    return (
        mean
        - math.sqrt(2.0 * var * log_term / n)
        - 7.0 * value_range * log_term / (3.0 * (n - 1))
    )


def hcpi(
    data: Dataset,
    policy_class: PolicyClass,
    baseline: BinaryPolicy,
    delta: float,
    variant: str = "t_test",
    clip_cap: Optional[float] = None,
    train_fraction: float = 0.5,
    seed: int = 0,
) -> SpiOutcome:
    """Simplified high-confidence policy improvement (IPW-based).

    The candidate maximizes the variant's predicted lower bound on the train
    split (computed as if the test split's sample size were available); the
    safety test recomputes the bound on the test split and accepts iff > 0.
    """
    if variant not in ("t_test", "clipped_ci"):
        raise InputError("variant must be 't_test' or 'clipped_ci'")
    if data.propensity is None:
        raise InputError("hcpi requires known propensities")
    train, test = split_train_test(data, train_fraction, seed)
    if test.n < 2:
        raise InputError("hcpi needs at least two test samples")
    if clip_cap is None:
        clip_cap = 1.0 / data.kappa

    def unit_diffs(split: Dataset) -> np.ndarray:
        d = split.d.astype(np.float64)
        gamma1 = split.y * d / split.propensity
        gamma0 = split.y * (1.0 - d) / (1.0 - split.propensity)
        if variant == "clipped_ci":
            gamma1 = np.clip(gamma1, -clip_cap, clip_cap)
            gamma0 = np.clip(gamma0, -clip_cap, clip_cap)
        labels = policy_class.label_matrix(split.x).astype(np.float64)
        scores = labels * gamma1 + (1.0 - labels) * gamma0
        base = baseline.decide(split.x).astype(np.float64)
        base_scores = base * gamma1 + (1.0 - base) * gamma0
        return scores - base_scores

    diffs_train = unit_diffs(train)
    n_test = test.n
    means = diffs_train.mean(axis=1)
    if variant == "t_test":
        sds = diffs_train.std(axis=1, ddof=1)
        t = float(stats.t.ppf(1.0 - delta, df=n_test - 1))
        predicted = means - t * sds / math.sqrt(n_test)
    else:
        variances = diffs_train.var(axis=1, ddof=1)
        log_term = math.log(2.0 / delta)
        predicted = (
            means
            - np.sqrt(2.0 * variances * log_term / n_test)
            - 7.0 * (2.0 * clip_cap) * log_term / (3.0 * (n_test - 1))
        )
    candidate = policy_class[int(np.argmax(predicted))]

    diffs_test = unit_diffs(test)[int(np.argmax(predicted))]
    mean = float(diffs_test.mean())
    if variant == "t_test":
        bound = _t_test_bound(mean, float(diffs_test.std(ddof=1)), n_test, delta)
    else:
        bound = _empirical_bernstein_bound(
            mean, float(diffs_test.var(ddof=1)), n_test, delta, 2.0 * clip_cap
        )
    if bound > 0:
        return SpiOutcome(
            accepted=True, policy=candidate, accepted_bonus=None,
            lcb_trace=((None, bound),),
        )
    return SpiOutcome(
        accepted=False, policy=baseline, accepted_bonus=None,
        lcb_trace=((None, bound),),
    )
