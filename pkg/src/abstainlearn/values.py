"""Value functionals and scores for off-policy estimation.

Provides, for a binary policy pi on logged data (x, d, y) with known
propensity p_o(x):

- ``ipw_value``: the inverse-propensity-weighted empirical value,
  mean of pi(x) * y*d/p_o(x) + (1-pi(x)) * y*(1-d)/(1-p_o(x)).
- ``normalized_score``: the per-sample contribution scaled by kappa, which is
  uniformly in [0, 1] for bounded outcomes and valid propensities, and whose
  expectation is kappa times the policy value.
- ``score_distance``: empirical mean absolute difference of two policies'
  normalized scores.
- ``ipw_value_abstain`` / ``dr_value_abstain``: abstaining values where an
  abstention sample contributes the average of both arms' terms plus a bonus.
- ``dr_pseudo_outcome`` / ``dr_value``: doubly-robust pseudo-outcomes
  g_hat(a,x) + 1{d=a} * (y - g_hat(a,x)) / q and the value built from them.
- ``lcb_difference``: the one-sided normal lower confidence bound on the mean
  per-sample score difference between a candidate and a baseline policy, with
  a Bonferroni-adjusted quantile z_{1 - delta/k}.

Nuisances are always supplied externally; this module never fits them.
All functions are pure over immutable inputs; per-unit score vectors are
freshly allocated per call.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtri

from .errors import InputError
from .model import (
    ABSTAIN,
    AbstainingPolicy,
    BinaryPolicy,
    Dataset,
    NuisanceModel,
    Sample,
)

__all__ = [
    "ValueEstimate",
    "ipw_value",
    "normalized_score",
    "score_distance",
    "ipw_value_abstain",
    "dr_pseudo_outcome",
    "dr_value",
    "dr_value_abstain",
    "lcb_difference",
    "normal_quantile",
]


@dataclass(frozen=True)
class ValueEstimate:
    """A value estimate with the per-sample contributions it averaged."""

    value: float
    n: int
    per_unit_scores: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        if self.per_unit_scores is not None:
            scores = np.asarray(self.per_unit_scores, dtype=np.float64)
            scores.setflags(write=False)
            object.__setattr__(self, "per_unit_scores", scores)

    def se(self) -> float:
        """Standard error of the mean (per-unit scores must be retained)."""
        if self.per_unit_scores is None:
            raise InputError("per-unit scores were not retained")
        if self.n < 2:
            raise InputError("standard error needs at least two samples")
        return float(np.std(self.per_unit_scores, ddof=1) / np.sqrt(self.n))


def _require_propensity(data: Dataset) -> np.ndarray:
    if data.propensity is None:
        raise InputError("this estimator requires known propensities")
    return data.propensity


def _arm_terms(data: Dataset) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample IPW terms (gamma1, gamma0) = (y*d/p, y*(1-d)/(1-p))."""
    prop = _require_propensity(data)
    d = data.d.astype(np.float64)
    gamma1 = data.y * d / prop
    gamma0 = data.y * (1.0 - d) / (1.0 - prop)
    return gamma1, gamma0


def _ipw_unit_scores(labels: np.ndarray, data: Dataset) -> np.ndarray:
    gamma1, gamma0 = _arm_terms(data)
    lab = labels.astype(np.float64)
    return lab * gamma1 + (1.0 - lab) * gamma0


def ipw_value(policy: BinaryPolicy, data: Dataset) -> ValueEstimate:
    """IPW empirical value of a binary policy; retains per-unit scores.

    Requires known propensities on every sample.
    """
    scores = _ipw_unit_scores(policy.decide(data.x), data)
    return ValueEstimate(value=float(scores.mean()), n=data.n, per_unit_scores=scores)


def normalized_score(policy: BinaryPolicy, sample: Sample, kappa: float) -> float:
    """kappa-scaled IPW contribution of one sample under a policy.

    With outcomes in [0, 1] and the propensity in [kappa, 1-kappa] the result
    lies in [0, 1].
    """
    if sample.propensity is None:
        raise InputError("normalized score requires a known propensity")
    label = float(policy.decide(sample.x.reshape(1, -1))[0])
    term1 = sample.y * sample.d / sample.propensity
    term0 = sample.y * (1 - sample.d) / (1.0 - sample.propensity)
    return float(kappa * (label * term1 + (1.0 - label) * term0))


def score_distance(
    p1: BinaryPolicy, p2: BinaryPolicy, data: Dataset, kappa: float
) -> float:
    """Empirical mean of |f_p1(z) - f_p2(z)| over the dataset.

    The pointwise difference is nonzero only where the policies disagree, so
    this is a data-weighted disagreement measure.
    """
    gamma1, gamma0 = _arm_terms(data)
    l1 = p1.decide(data.x).astype(np.float64)
    l2 = p2.decide(data.x).astype(np.float64)
    return float(np.mean(np.abs(kappa * (l1 - l2) * (gamma1 - gamma0))))


def ipw_value_abstain(
    policy: AbstainingPolicy, data: Dataset, bonus: float
) -> ValueEstimate:
    """Abstaining IPW value: binary IPW score off the abstention region,
    y*d/(2 p_o) + y*(1-d)/(2 (1-p_o)) + bonus on it."""
    if bonus < 0:
        raise InputError("abstention bonus must be >= 0")
    gamma1, gamma0 = _arm_terms(data)
    labels = policy.decide(data.x)
    abstain = labels == ABSTAIN
    lab = np.where(abstain, 0, labels).astype(np.float64)
    scores = np.where(
        abstain,
        0.5 * (gamma1 + gamma0) + bonus,
        lab * gamma1 + (1.0 - lab) * gamma0,
    )
    return ValueEstimate(value=float(scores.mean()), n=data.n, per_unit_scores=scores)


# ---------------------------------------------------------------------------
# Doubly-robust values
# ---------------------------------------------------------------------------


def dr_pseudo_outcome(nuisance: NuisanceModel, sample: Sample, arm: int) -> float:
    """AIPW pseudo-outcome for one sample and one queried arm.

    phi_hat(x, arm) = g_hat(arm, x) + 1{d = arm} * (y - g_hat(arm, x)) / q,
    with q = p_hat(x) for arm 1 and 1 - p_hat(x) for arm 0. When the realized
    treatment differs from the queried arm the correction term vanishes.
    """
    if arm not in (0, 1):
        raise InputError("arm must be 0 or 1")
    x2d = sample.x.reshape(1, -1)
    g = float(nuisance.g(arm, x2d)[0])
    if sample.d != arm:
        return g
    p = float(nuisance.p(x2d)[0])
    q = p if arm == 1 else 1.0 - p
    return g + (sample.y - g) / q


def pseudo_outcome_arrays(
    nuisance: NuisanceModel, data: Dataset
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized pseudo-outcomes (phi1, phi0) for every sample."""
    g1 = nuisance.g(1, data.x)
    g0 = nuisance.g(0, data.x)
    p = nuisance.p(data.x)
    d = data.d.astype(np.float64)
    phi1 = g1 + d * (data.y - g1) / p
    phi0 = g0 + (1.0 - d) * (data.y - g0) / (1.0 - p)
    return phi1, phi0


def _dr_unit_scores(
    labels: np.ndarray, data: Dataset, nuisance: NuisanceModel
) -> np.ndarray:
    phi1, phi0 = pseudo_outcome_arrays(nuisance, data)
    lab = labels.astype(np.float64)
    return lab * phi1 + (1.0 - lab) * phi0


def dr_value(
    policy: BinaryPolicy, data: Dataset, nuisance: NuisanceModel
) -> ValueEstimate:
    """Doubly-robust empirical value; propensities may be unknown."""
    scores = _dr_unit_scores(policy.decide(data.x), data, nuisance)
    return ValueEstimate(value=float(scores.mean()), n=data.n, per_unit_scores=scores)


def dr_value_abstain(
    policy: AbstainingPolicy, data: Dataset, nuisance: NuisanceModel, bonus: float
) -> ValueEstimate:
    """Abstaining DR value: abstention samples contribute the average of the
    two pseudo-outcomes plus the bonus."""
    if bonus < 0:
        raise InputError("abstention bonus must be >= 0")
    phi1, phi0 = pseudo_outcome_arrays(nuisance, data)
    labels = policy.decide(data.x)
    abstain = labels == ABSTAIN
    lab = np.where(abstain, 0, labels).astype(np.float64)
    scores = np.where(
        abstain,
        0.5 * (phi1 + phi0) + bonus,
        lab * phi1 + (1.0 - lab) * phi0,
    )
    return ValueEstimate(value=float(scores.mean()), n=data.n, per_unit_scores=scores)


# ---------------------------------------------------------------------------
# Safety LCB
# ---------------------------------------------------------------------------


def normal_quantile(q: float) -> float:
    """Standard-normal quantile, accurate to well below 1e-8."""
    if not (0.0 < q < 1.0):
        raise InputError(f"quantile level must lie in (0, 1), got {q}")
    return float(ndtri(q))


def per_unit_scores(
    policy: BinaryPolicy,
    data: Dataset,
    estimator: str = "ipw",
    nuisance: Optional[NuisanceModel] = None,
) -> np.ndarray:
    """Per-sample value contributions under the chosen estimator."""
    if estimator == "ipw":
        return _ipw_unit_scores(policy.decide(data.x), data)
    if estimator == "dr":
        if nuisance is None:
            raise InputError("dr estimator requires a nuisance model")
        return _dr_unit_scores(policy.decide(data.x), data, nuisance)
    raise InputError(f"estimator must be 'ipw' or 'dr', got {estimator!r}")


def lcb_difference(
    candidate: BinaryPolicy,
    baseline: BinaryPolicy,
    data: Dataset,
    delta: float,
    k: int = 1,
    estimator: str = "ipw",
    nuisance: Optional[NuisanceModel] = None,
) -> float:
    """One-sided (1 - delta) lower confidence bound on V(candidate) - V(baseline).

    Returns Dbar - z_{1 - delta/k} * sigma_hat / sqrt(n), where Dbar is the
    mean of per-sample score differences, sigma_hat their Bessel-corrected
    standard deviation, and k the Bonferroni correction. Identical per-sample
    scores (sigma_hat = 0) yield LCB = Dbar, so a candidate equal to the
    baseline yields exactly 0 and fails a strict LCB > 0 test.
    """
    if not (0.0 < delta < 1.0):
        raise InputError(f"delta must lie in (0, 1), got {delta}")
    if k < 1:
        raise InputError("k must be >= 1")
    if delta / k >= 1.0:
        raise InputError("delta / k must be < 1")
    if data.n < 2:
        raise InputError("LCB needs at least two samples")
    diffs = per_unit_scores(candidate, data, estimator, nuisance) - per_unit_scores(
        baseline, data, estimator, nuisance
    )
    mean = float(diffs.mean())
    sd = float(np.std(diffs, ddof=1))
    if sd == 0.0:
        return mean
    z = normal_quantile(1.0 - delta / k)
    return mean - z * sd / np.sqrt(data.n)
