"""Two-stage learner for treatment policies that may abstain.

Pipeline (known propensities; the DR variant swaps the objective):

1. Split the data into halves D1, D2 (seeded shuffle, first ceil(n/2) to D1).
2. EWM on D1: pick the class member maximizing the empirical value.
3. Near-optimal set on D1: keep every member whose value deficit to the EWM
   winner is within (c/kappa) * (alpha^2 + alpha * sqrt(m)), where alpha is
   the complexity radius sqrt((d log(n1/d) + log(1/delta)) / n1) and m is the
   empirical score distance to the winner (disagreement mass in DR mode, with
   alpha enlarged by the nuisance product-error bound).
4. Project each near-optimal member onto the winner: abstain exactly where
   they disagree.
5. On D2, return the projection maximizing the abstaining empirical value at
   the configured bonus.

All argmax steps break ties by lowest class index, so the result is a pure
function of (data, class, config, nuisance); per-policy evaluations are
vectorized and order-independent.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import InputError
from .model import AbstainingPolicy, BinaryPolicy, Dataset, NuisanceModel, PolicyClass
from .values import pseudo_outcome_arrays

__all__ = [
    "LearnerConfig",
    "AbstentionFit",
    "complexity_radius",
    "split_halves",
    "ewm",
    "near_optimal_set",
    "learn_abstaining",
]


@dataclass(frozen=True)
class LearnerConfig:
    """Knobs for the two-stage abstention learner.

    Args:
        bonus: Additive abstention reward p >= 0.
        delta: Confidence level in (0, 1).
        kappa: Overlap bound used in the selection radius and score distance.
        vc_dim: Declared VC dimension d; None takes the policy class's value.
        radius_constant: The unnamed constant c in the near-optimal radius.
        dr_mode: Use doubly-robust objectives (requires a nuisance model).
        err_dr: Upper bound on the nuisance product error (DR mode); None
            falls back to the nuisance model's own bound.
        seed: Seed for the D1/D2 split.
    """

    bonus: float = 0.05
    delta: float = 0.05
    kappa: float = 0.1
    vc_dim: Optional[int] = None
    radius_constant: float = 1.0
    dr_mode: bool = False
    err_dr: Optional[float] = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.bonus < 0:
            raise InputError("bonus must be >= 0")
        if not (0.0 < self.delta < 1.0):
            raise InputError("delta must lie in (0, 1)")
        if not (0.0 < self.kappa <= 0.5):
            raise InputError("kappa must lie in (0, 0.5]")
        if self.radius_constant <= 0:
            raise InputError("radius_constant must be > 0")
        if self.err_dr is not None and self.err_dr < 0:
            raise InputError("err_dr must be >= 0")

    def with_bonus(self, bonus: float) -> "LearnerConfig":
        return replace(self, bonus=bonus)


@dataclass(frozen=True)
class AbstentionFit:
    """Everything the learner produced, for inspection and serialization."""

    pi_hat: BinaryPolicy
    near_optimal: tuple
    result: AbstainingPolicy
    alpha: float
    n_near_optimal: int
    abstention_rate: float
    n_first_stage: int
    n_second_stage: int

    def to_json(self) -> dict:
        return {
            "pi_hat": self.pi_hat.to_json(),
            "near_optimal": [p.to_json() for p in self.near_optimal],
            "result": self.result.to_json(),
            "alpha": self.alpha,
            "n_near_optimal": self.n_near_optimal,
            "abstention_rate": self.abstention_rate,
            "n_first_stage": self.n_first_stage,
            "n_second_stage": self.n_second_stage,
        }

    def to_json_string(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def complexity_radius(n: int, vc_dim: int, delta: float) -> float:
    """alpha = sqrt((d log(n/d) + log(1/delta)) / n), natural logs.

    n is the size of the split the radius is used on. Raises when the
    expression under the root is not strictly positive (sample too small for
    the declared VC dimension).
    """
    if n < 1 or vc_dim < 1:
        raise InputError("n and vc_dim must be >= 1")
    if not (0.0 < delta < 1.0):
        raise InputError("delta must lie in (0, 1)")
    val = (vc_dim * math.log(n / vc_dim) + math.log(1.0 / delta)) / n
    if not (val > 0.0) or not math.isfinite(val):
        raise InputError(
            f"complexity radius is not positive for n={n}, d={vc_dim}, delta={delta}"
        )
    return math.sqrt(val)


def split_halves(data: Dataset, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded shuffle, then contiguous halves; odd n gives D1 the extra sample."""
    perm = np.random.default_rng(seed).permutation(data.n)
    n1 = (data.n + 1) // 2
    return perm[:n1], perm[n1:]


def _arm_terms(
    data: Dataset, dr_mode: bool, nuisance: Optional[NuisanceModel]
) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample (arm-1 term, arm-0 term) under the configured objective."""
    if dr_mode:
        if nuisance is None:
            raise InputError("DR mode requires a nuisance model")
        return pseudo_outcome_arrays(nuisance, data)
    if data.propensity is None:
        raise InputError("IPW objective requires known propensities")
    d = data.d.astype(np.float64)
    return data.y * d / data.propensity, data.y * (1.0 - d) / (1.0 - data.propensity)


def _binary_values(labels: np.ndarray, term1: np.ndarray, term0: np.ndarray) -> np.ndarray:
    """Empirical values for every labeling row, shape (K,)."""
    lab = labels.astype(np.float64)
    return (lab @ (term1 - term0) + term0.sum()) / labels.shape[1]


def ewm(
    data: Dataset,
    policy_class: PolicyClass,
    objective: str = "ipw",
    nuisance: Optional[NuisanceModel] = None,
) -> BinaryPolicy:
    """Empirical welfare maximizer over the class; ties by lowest index."""
    if objective not in ("ipw", "dr"):
        raise InputError(f"objective must be 'ipw' or 'dr', got {objective!r}")
    term1, term0 = _arm_terms(data, objective == "dr", nuisance)
    values = _binary_values(policy_class.label_matrix(data.x), term1, term0)
    return policy_class[int(np.argmax(values))]


def _near_optimal_mask(
    labels: np.ndarray,
    best: int,
    term1: np.ndarray,
    term0: np.ndarray,
    alpha_eff: float,
    config: LearnerConfig,
    dr_mode: bool,
) -> np.ndarray:
    """Members within the selection radius of the empirical maximizer.

    IPW mode measures separation by the empirical score distance
    E_n |f_best - f_pi|; DR mode by the disagreement mass E_n |best - pi|.
    """
    values = _binary_values(labels, term1, term0)
    gap = values[best] - values
    disagree = labels != labels[best]
    n = labels.shape[1]
    if dr_mode:
        m = disagree.mean(axis=1)
    else:
        weight = config.kappa * np.abs(term1 - term0)
        m = (disagree @ weight) / n
    radius = (config.radius_constant / config.kappa) * (
        alpha_eff**2 + alpha_eff * np.sqrt(m)
    )
    return gap <= radius


def near_optimal_set(
    data: Dataset,
    policy_class: PolicyClass,
    pi_hat: BinaryPolicy,
    config: LearnerConfig,
    nuisance: Optional[NuisanceModel] = None,
) -> list[BinaryPolicy]:
    """Class members whose empirical value is within the selection radius of
    pi_hat's. pi_hat must label the data like some class member."""
    labels = policy_class.label_matrix(data.x)
    ref = pi_hat.decide(data.x)
    matches = np.nonzero((labels == ref).all(axis=1))[0]
    if matches.size == 0:
        raise InputError("pi_hat does not match any class member on this data")
    best = int(matches[0])
    term1, term0 = _arm_terms(data, config.dr_mode, nuisance)
    alpha_eff = _effective_alpha(data.n, policy_class, config, nuisance)
    mask = _near_optimal_mask(
        labels, best, term1, term0, alpha_eff, config, config.dr_mode
    )
    return [policy_class[i] for i in np.nonzero(mask)[0]]


def _effective_alpha(
    n: int,
    policy_class: PolicyClass,
    config: LearnerConfig,
    nuisance: Optional[NuisanceModel],
) -> float:
    d = config.vc_dim if config.vc_dim is not None else policy_class.vc_dim
    alpha = complexity_radius(n, d, config.delta)
    if not config.dr_mode:
        return alpha
    err = config.err_dr
    if err is None and nuisance is not None:
        err = nuisance.err_dr_bound
    if err is None:
        raise InputError(
            "DR mode needs err_dr (config or nuisance.err_dr_bound); "
            "compute it against the simulation truth or supply a bound"
        )
    return alpha + err


def learn_abstaining(
    data: Dataset,
    policy_class: PolicyClass,
    config: LearnerConfig,
    nuisance: Optional[NuisanceModel] = None,
) -> AbstentionFit:
    """Run the full two-stage learner and return the abstaining policy.

    The class is deduplicated on the first-stage split (lowest-index
    representative kept) before EWM; projected policies with identical
    (label, abstain) patterns on the second-stage split are likewise
    deduplicated before the abstaining EWM.
    """
    if data.n < 4:
        raise InputError("learner needs at least 4 samples")
    if config.dr_mode:
        if nuisance is None:
            raise InputError("DR mode requires a nuisance model")
        if (
            nuisance.source_tag is not None
            and data.tag is not None
            and nuisance.source_tag == data.tag
        ):
            raise InputError(
                "nuisance model was fitted on the learning data; "
                "fit it on a disjoint split"
            )
    idx1, idx2 = split_halves(data, config.seed)
    d1, d2 = data.subset(idx1), data.subset(idx2)

    # One labeling pass over both splits, then dedup rows on the D1 labels
    # (keeping the lowest-index representative of each labeling).
    labels_all = policy_class.label_matrix(np.vstack([d1.x, d2.x]))
    seen: dict[bytes, int] = {}
    keep: list[int] = []
    for i in range(labels_all.shape[0]):
        key = labels_all[i, : d1.n].tobytes()
        if key not in seen:
            seen[key] = i
            keep.append(i)
    keep_arr = np.array(keep, dtype=np.intp)
    dedup = PolicyClass(
        tuple(policy_class.policies[i] for i in keep), policy_class.vc_dim
    )
    labels1 = labels_all[keep_arr][:, : d1.n]
    labels2 = labels_all[keep_arr][:, d1.n :]

    term1, term0 = _arm_terms(d1, config.dr_mode, nuisance)
    values1 = _binary_values(labels1, term1, term0)
    best = int(np.argmax(values1))

    alpha_eff = _effective_alpha(d1.n, dedup, config, nuisance)
    alpha = complexity_radius(
        d1.n, config.vc_dim if config.vc_dim is not None else dedup.vc_dim, config.delta
    )
    mask = _near_optimal_mask(
        labels1, best, term1, term0, alpha_eff, config, config.dr_mode
    )
    near_idx = np.nonzero(mask)[0]

    # Second stage: abstaining EWM over projections onto the winner.
    s1, s0 = _arm_terms(d2, config.dr_mode, nuisance)
    base_row = labels2[best]
    cand = labels2[near_idx]
    agree = cand == base_row
    lab = cand.astype(np.float64)
    abstain_score = 0.5 * (s1 + s0) + config.bonus
    scores = np.where(agree, lab * s1 + (1.0 - lab) * s0, abstain_score)

    # Dedup projections by (label, abstain) pattern on D2, keeping class order.
    pattern = np.where(agree, cand, np.int8(2))
    seen_patterns: set[bytes] = set()
    proj_keep: list[int] = []
    for j in range(pattern.shape[0]):
        key = pattern[j].tobytes()
        if key not in seen_patterns:
            seen_patterns.add(key)
            proj_keep.append(j)
    proj_arr = np.array(proj_keep, dtype=np.intp)
    v2 = scores[proj_arr].mean(axis=1)
    chosen = int(near_idx[proj_arr[int(np.argmax(v2))]])

    pi_hat = dedup[best]
    result = AbstainingPolicy(base=pi_hat, member=dedup[chosen])
    abstention_rate = float((labels2[chosen] != base_row).mean())
    return AbstentionFit(
        pi_hat=pi_hat,
        near_optimal=tuple(dedup[i] for i in near_idx),
        result=result,
        alpha=alpha,
        n_near_optimal=int(near_idx.size),
        abstention_rate=abstention_rate,
        n_first_stage=d1.n,
        n_second_stage=d2.n,
    )
