"""Margin-condition wrapper: abstain first, then resolve the abstention region.

Runs the abstention learner with bonus h/2 on the first two thirds of the
data, takes the region where the learned policy abstains, and resolves it on
the last third either by exhaustive labeling search over the distinct
abstention-region points (FiniteD mode) or by the sign of a CATE estimate
(CATE-oracle mode). The output splices the abstaining policy's labels off the
region with the resolution on it.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import CapacityError, InputError
from .learner import LearnerConfig, learn_abstaining
from .model import (
    BinaryPolicy,
    Dataset,
    NuisanceModel,
    PolicyClass,
    SplicedPolicy,
    TablePolicy,
    _as_matrix,
)

__all__ = ["MarginConfig", "CatePolicy", "margin_learn"]


@dataclass(frozen=True)
class MarginConfig:
    """Wrapper configuration.

    Args:
        margin: The assumed CATE margin h > 0; the abstention stage runs with
            bonus h/2.
        mode: 'finite_d' (labeling enumeration) or 'cate_oracle'.
        finite_d_cap: Max distinct abstention-region points the enumeration
            will handle; exceeding it raises CapacityError, never truncates.
        learner: Configuration for the abstention stage.
    """

    margin: float
    mode: str = "finite_d"
    finite_d_cap: int = 12
    learner: LearnerConfig = field(default_factory=LearnerConfig)

    def __post_init__(self) -> None:
        if self.margin <= 0:
            raise InputError("margin must be > 0")
        if self.mode not in ("finite_d", "cate_oracle"):
            raise InputError("mode must be 'finite_d' or 'cate_oracle'")
        if self.finite_d_cap < 1:
            raise InputError("finite_d_cap must be >= 1")


@dataclass(frozen=True)
class CatePolicy(BinaryPolicy):
    """Treat iff a CATE estimate is positive. In-process only (the estimate is
    a callable), so JSON serialization raises."""

    cate_fn: Callable[[np.ndarray], np.ndarray]

    kind = "cate_sign"

    def decide(self, x: np.ndarray) -> np.ndarray:
        x = _as_matrix(x)
        tau = np.asarray(self.cate_fn(x), dtype=np.float64).ravel()
        return (tau > 0).astype(np.int8)

    def to_json(self) -> dict:
        raise InputError("CATE-oracle-backed policies are in-process only")


def _split_thirds(n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded shuffle into (first two thirds, last third); remainders go to
    the earlier parts."""
    perm = np.random.default_rng(seed).permutation(n)
    m = n // 3
    sizes = [m + (1 if r < n % 3 else 0) for r in range(3)]
    cut = sizes[0] + sizes[1]
    return perm[:cut], perm[cut:]


def margin_learn(
    data: Dataset,
    policy_class: PolicyClass,
    config: MarginConfig,
    cate_oracle: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    nuisance: Optional[NuisanceModel] = None,
) -> BinaryPolicy:
    """Abstain with bonus h/2, then resolve the abstention region on held-out
    data; returns the spliced binary policy.

    FiniteD mode enumerates all labelings of the distinct held-out points in
    the abstention region and keeps the one maximizing the empirical
    conditional value there (ties to the lowest labeling index); points of
    the region unseen in the held-out split fall back to the first-stage EWM
    policy. CATE-oracle mode labels the region by the sign of the estimate.
    """
    if data.n < 6:
        raise InputError("margin wrapper needs at least 6 samples (three-way split)")
    if config.mode == "cate_oracle" and cate_oracle is None:
        raise InputError("cate_oracle mode requires a CATE estimator")
    idx12, idx3 = _split_thirds(data.n, config.learner.seed)
    d12, d3 = data.subset(idx12), data.subset(idx3)

    stage = replace(config.learner, bonus=config.margin / 2.0)
    fit = learn_abstaining(d12, policy_class, stage, nuisance)
    pi_tilde = fit.result

    if config.mode == "cate_oracle":
        return SplicedPolicy(decision=pi_tilde, refine=CatePolicy(cate_oracle))

    in_region = pi_tilde.abstains(d3.x)
    if not np.any(in_region):
        return SplicedPolicy(decision=pi_tilde, refine=fit.pi_hat)

    sub = d3.subset(np.nonzero(in_region)[0])
    points, point_of = np.unique(sub.x, axis=0, return_inverse=True)
    m = points.shape[0]
    if m > config.finite_d_cap:
        raise CapacityError(
            f"abstention region has {m} distinct held-out points, "
            f"over the enumeration cap {config.finite_d_cap}"
        )
    if sub.propensity is None:
        raise InputError("finite_d refinement requires known propensities")
    d = sub.d.astype(np.float64)
    gamma1 = sub.y * d / sub.propensity
    gamma0 = sub.y * (1.0 - d) / (1.0 - sub.propensity)

    # All 2^m labelings; bit j of labeling L is the label of distinct point j.
    codes = np.arange(2**m, dtype=np.uint32)
    bits = ((codes[:, None] >> np.arange(m)) & 1).astype(np.float64)  # (2^m, m)
    per_sample = bits[:, point_of]  # (2^m, |sub|)
    cond_values = (per_sample * gamma1 + (1.0 - per_sample) * gamma0).mean(axis=1)
    best = int(np.argmax(cond_values))
    table = TablePolicy(
        points=points, labels=((best >> np.arange(m)) & 1).astype(np.int8)
    )
    return SplicedPolicy(decision=pi_tilde, refine=table, fallback=fit.pi_hat)
