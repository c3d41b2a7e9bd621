"""Synthetic data-generating processes, ground-truth oracles, nuisance fits.

Two families:

- "spi": X ~ U[0,1]^dim (dim >= 3), CATE tau(x) = 2 (x1 + x2 - 1), potential
  outcomes Y(0) = x3 + eps, Y(1) = Y(0) + tau(x) with eps ~ N(0, sigma^2)
  shared across arms; outcomes are not clipped. Propensity is constant 0.5 or
  logistic in x1, clipped to [0.1, 0.9].
- "abstention": X ~ N(0, I_dim), logistic (or constant) propensity clipped to
  [0.1, 0.9], outcomes Y(d) = clip(g0 + d * tau(x) + eps, 0, 1). The reward
  regime fixes tau: 'linear' (affine in x1), 'nonlinear' (sinusoidal),
  'complex' (piecewise with a zero-CATE plateau). Oracle conditional means
  use the exact clipped-normal closed form, so the plateau stays exactly
  zero-CATE after clipping.

Randomness is counter-based (Philox keyed by master seed, replication index
and stream tag), so every replication and stream is independently
reproducible with no shared generator state.
"""

from __future__ import annotations


import math
from dataclasses import dataclass
from typing import Mapping, Optional, Union

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import expit, ndtr

from .errors import FittingError, InputError
from .model import (
    AbstainingPolicy,
    AxisThresholdPolicy,
    BinaryPolicy,
    Dataset,
    NuisanceModel,
    PolicyClass,
    axis_threshold_class,
)

__all__ = [
    "DgpSpec",
    "DgpOracle",
    "generate",
    "true_value",
    "fit_nuisance",
    "oracle_nuisance",
    "product_error",
    "spi_baseline",
    "default_policy_class",
    "clipped_normal_mean",
    "KAPPA",
]

#: Overlap bound shared by both families (propensities live in [0.1, 0.9]).
KAPPA = 0.1

# Stream tags for the counter-based generator.
STREAM_X = 1
STREAM_D = 2
STREAM_NOISE = 3
STREAM_EVAL = 4
STREAM_POTENTIAL = 5

_REGIME_DEFAULTS = {
    "linear": {"slope": 0.25},
    "nonlinear": {"amplitude": 0.3, "frequency": 2.0},
    "complex": {"plus": 0.4, "minus": -0.4, "lo": -0.3, "hi": 0.8},
}


def stream_rng(seed: int, replication: int, tag: int) -> np.random.Generator:
    """Independent generator for (master seed, replication, stream tag)."""
    key = np.array(
        [np.uint64(seed % (1 << 64)), np.uint64((replication << 8) + tag)],
        dtype=np.uint64,
    )
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class DgpSpec:
    """Declarative scenario description for a synthetic DGP."""

    family: str = "spi"
    dim: int = 5
    noise_sigma: float = 0.3
    propensity_kind: str = "constant"
    reward_regime: str = "linear"
    regime_params: Optional[Mapping[str, float]] = None
    baseline_gap: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.family not in ("spi", "abstention"):
            raise InputError("family must be 'spi' or 'abstention'")
        if self.family == "spi" and self.dim < 3:
            raise InputError("spi family needs dim >= 3")
        if self.dim < 1:
            raise InputError("dim must be >= 1")
        if self.noise_sigma < 0:
            raise InputError("noise_sigma must be >= 0")
        if self.propensity_kind not in ("constant", "logistic"):
            raise InputError("propensity_kind must be 'constant' or 'logistic'")
        if self.reward_regime not in _REGIME_DEFAULTS:
            raise InputError(
                f"reward_regime must be one of {sorted(_REGIME_DEFAULTS)}"
            )
        if self.regime_params is not None:
            object.__setattr__(self, "regime_params", dict(self.regime_params))

    def regime(self) -> dict:
        params = dict(_REGIME_DEFAULTS[self.reward_regime])
        if self.regime_params:
            unknown = set(self.regime_params) - set(params)
            if unknown:
                raise InputError(f"unknown regime params: {sorted(unknown)}")
            params.update(self.regime_params)
        return params


def clipped_normal_mean(
    mu: Union[float, np.ndarray], sigma: float, lo: float = 0.0, hi: float = 1.0
) -> np.ndarray:
    """E[clip(W, lo, hi)] for W ~ N(mu, sigma^2), exact."""
    mu = np.asarray(mu, dtype=np.float64)
    if sigma == 0.0:
        return np.clip(mu, lo, hi)
    a = (lo - mu) / sigma
    b = (hi - mu) / sigma
    phi_a = np.exp(-0.5 * a * a) / math.sqrt(2.0 * math.pi)
    phi_b = np.exp(-0.5 * b * b) / math.sqrt(2.0 * math.pi)
    return (
        lo * ndtr(a)
        + hi * (1.0 - ndtr(b))
        + mu * (ndtr(b) - ndtr(a))
        + sigma * (phi_a - phi_b)
    )


@dataclass(frozen=True)
class DgpOracle:
    """Exact ground truth for a DGP spec: tau, conditional means, propensity,
    fresh draws, and Monte-Carlo policy values."""

    spec: DgpSpec
    kappa: float = KAPPA

    # -- structural functions ------------------------------------------------

    def _tau_latent(self, x: np.ndarray) -> np.ndarray:
        """Pre-clipping CATE (equals the true CATE for the spi family)."""
        x1 = x[:, 0]
        if self.spec.family == "spi":
            return 2.0 * (x[:, 0] + x[:, 1] - 1.0)
        params = self.spec.regime()
        regime = self.spec.reward_regime
        if regime == "linear":
            return params["slope"] * x1
        if regime == "nonlinear":
            return params["amplitude"] * np.sin(params["frequency"] * x1)
        tau = np.where(x1 < params["lo"], params["plus"], params["minus"])
        return np.where(x1 >= params["hi"], 0.0, tau)

    def _mean_latent(self, arm: int, x: np.ndarray) -> np.ndarray:
        """Pre-clipping conditional mean of Y(arm)."""
        if self.spec.family == "spi":
            base = x[:, 2]
        else:
            base = np.full(x.shape[0], 0.5)
        return base + arm * self._tau_latent(x)

    def mean_outcome(self, arm: int, x: np.ndarray) -> np.ndarray:
        """True E[Y(arm)|X=x] (post-clipping for the abstention family)."""
        if arm not in (0, 1):
            raise InputError("arm must be 0 or 1")
        x = np.asarray(x, dtype=np.float64)
        latent = self._mean_latent(arm, x)
        if self.spec.family == "spi":
            return latent
        return clipped_normal_mean(latent, self.spec.noise_sigma)

    def cate(self, x: np.ndarray) -> np.ndarray:
        return self.mean_outcome(1, x) - self.mean_outcome(0, x)

    def propensity(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.spec.propensity_kind == "constant":
            return np.full(x.shape[0], 0.5)
        shift = 0.5 if self.spec.family == "spi" else 0.0
        return np.clip(expit(x[:, 0] - shift), self.kappa, 1.0 - self.kappa)

    # -- draws ---------------------------------------------------------------

    def draw_covariates(
        self, n: int, replication: int = 0, tag: int = STREAM_X
    ) -> np.ndarray:
        rng = stream_rng(self.spec.seed, replication, tag)
        if self.spec.family == "spi":
            return rng.random((n, self.spec.dim))
        return rng.standard_normal((n, self.spec.dim))

    def draw_potential(
        self, x: np.ndarray, replication: int = 0, tag: int = STREAM_POTENTIAL
    ) -> tuple[np.ndarray, np.ndarray]:
        """Fresh potential-outcome pair (Y(0), Y(1)) at the given covariates;
        noise is shared across arms."""
        x = np.asarray(x, dtype=np.float64)
        rng = stream_rng(self.spec.seed, replication, tag)
        eps = rng.normal(0.0, self.spec.noise_sigma, size=x.shape[0])
        y0 = self._mean_latent(0, x) + eps
        y1 = self._mean_latent(1, x) + eps
        if self.spec.family == "abstention":
            y0 = np.clip(y0, 0.0, 1.0)
            y1 = np.clip(y1, 0.0, 1.0)
        return y0, y1

    # -- evaluation ----------------------------------------------------------

    def conditional_values(
        self,
        policy: Union[BinaryPolicy, AbstainingPolicy],
        x: np.ndarray,
        bonus: float = 0.0,
    ) -> np.ndarray:
        """Per-point true value contributions v(policy, x) (abstentions get
        the arm average plus the bonus)."""
        x = np.asarray(x, dtype=np.float64)
        mu0 = self.mean_outcome(0, x)
        mu1 = self.mean_outcome(1, x)
        labels = policy.decide(x)
        if isinstance(policy, AbstainingPolicy):
            abstain = labels == -1
            lab = np.where(abstain, 0, labels).astype(np.float64)
            return np.where(
                abstain, 0.5 * (mu0 + mu1) + bonus, lab * mu1 + (1.0 - lab) * mu0
            )
        lab = labels.astype(np.float64)
        return lab * mu1 + (1.0 - lab) * mu0

    def true_value(
        self,
        policy: Union[BinaryPolicy, AbstainingPolicy],
        bonus: float = 0.0,
        mc_n: int = 200_000,
        replication: int = 0,
    ) -> tuple[float, float]:
        """Fresh-draw Monte-Carlo value with its standard error."""
        if mc_n < 1000:
            raise InputError("mc_n must be >= 1000")
        x = self.draw_covariates(mc_n, replication, STREAM_EVAL)
        vals = self.conditional_values(policy, x, bonus)
        return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(mc_n))


def generate(spec: DgpSpec, n: int, replication: int = 0) -> tuple[Dataset, DgpOracle]:
    """Draw a logged dataset and its ground-truth oracle.

    Propensities are recorded in the dataset. The abstention family clips
    outcomes to [0, 1] and sets bounded_outcomes; the spi family does not.
    """
    if n < 1:
        raise InputError("n must be >= 1")
    oracle = DgpOracle(spec)
    x = oracle.draw_covariates(n, replication, STREAM_X)
    prop = oracle.propensity(x)
    rng_d = stream_rng(spec.seed, replication, STREAM_D)
    d = (rng_d.random(n) < prop).astype(np.int8)
    rng_e = stream_rng(spec.seed, replication, STREAM_NOISE)
    eps = rng_e.normal(0.0, spec.noise_sigma, size=n)
    y = oracle._mean_latent(0, x) + d * oracle._tau_latent(x) + eps
    bounded = spec.family == "abstention"
    if bounded:
        y = np.clip(y, 0.0, 1.0)
    tag = f"{spec.family}:{spec.seed}:{replication}:{n}"
    data = Dataset(
        x=x, d=d, y=y, kappa=KAPPA, propensity=prop,
        bounded_outcomes=bounded, tag=tag,
    )
    return data, oracle


def true_value(
    policy: Union[BinaryPolicy, AbstainingPolicy],
    oracle: DgpOracle,
    bonus: float = 0.0,
    mc_n: int = 200_000,
) -> tuple[float, float]:
    """Module-level convenience for DgpOracle.true_value."""
    return oracle.true_value(policy, bonus=bonus, mc_n=mc_n)


def spi_baseline(spec: DgpSpec) -> BinaryPolicy:
    """Baseline for spi experiments: the optimal x1 threshold (0.5) shifted
    by the spec's baseline_gap."""
    return AxisThresholdPolicy(0, 0.5 + spec.baseline_gap, "above")


def default_policy_class(
    spec: DgpSpec, thresholds_per_feature: int = 19
) -> PolicyClass:
    """Axis-threshold grid (both directions) plus constants, spanning the
    covariate support of the family."""
    if spec.family == "spi":
        grid = np.linspace(0.05, 0.95, thresholds_per_feature)
    else:
        grid = np.linspace(-2.0, 2.0, thresholds_per_feature)
    return axis_threshold_class(
        spec.dim, grid, directions=("above", "below"), include_constants=True
    )


# ---------------------------------------------------------------------------
# Nuisance fitting (artifact plumbing; fits stay numpy/scipy only)
# ---------------------------------------------------------------------------


def oracle_nuisance(oracle: DgpOracle, err_dr_bound: float = 0.0) -> NuisanceModel:
    """Nuisance model backed by the exact DGP truth (Err_DR = 0)."""
    return NuisanceModel(
        outcome_fn=oracle.mean_outcome,
        propensity_fn=oracle.propensity,
        kappa=oracle.kappa,
        err_dr_bound=err_dr_bound,
        source_tag=None,
    )


def _check_arms(data: Dataset) -> None:
    n1 = int(data.d.sum())
    if n1 == 0 or n1 == data.n:
        raise FittingError("cannot fit nuisances: one arm has no samples")


def _fit_histogram(data: Dataset, n_bins: int) -> NuisanceModel:
    edges = np.linspace(data.x[:, 0].min(), data.x[:, 0].max(), n_bins + 1)
    inner = edges[1:-1]

    def bin_of(x: np.ndarray) -> np.ndarray:
        return np.digitize(x[:, 0], inner)

    bins = bin_of(data.x)
    g = np.empty((2, n_bins))
    p = np.empty(n_bins)
    arm_means = [data.y[data.d == a].mean() for a in (0, 1)]
    overall = data.d.mean()
    for b in range(n_bins):
        hit = bins == b
        p[b] = data.d[hit].mean() if hit.any() else overall
        for a in (0, 1):
            sub = hit & (data.d == a)
            g[a, b] = data.y[sub].mean() if sub.any() else arm_means[a]

    return NuisanceModel(
        outcome_fn=lambda arm, x: g[arm, bin_of(np.asarray(x, dtype=np.float64))],
        propensity_fn=lambda x: p[bin_of(np.asarray(x, dtype=np.float64))],
        kappa=data.kappa,
        source_tag=data.tag,
    )


def _fit_logistic_irls(data: Dataset, max_iter: int, ridge: float) -> NuisanceModel:
    n = data.n
    design = np.column_stack([np.ones(n), data.x])
    beta = np.zeros(design.shape[1])
    target = data.d.astype(np.float64)
    for _ in range(max_iter):
        eta = design @ beta
        mu = expit(eta)
        w = np.maximum(mu * (1.0 - mu), 1e-6)
        z = eta + (target - mu) / w
        wd = design * w[:, None]
        h = design.T @ wd + ridge * np.eye(design.shape[1])
        new = np.linalg.solve(h, design.T @ (w * z))
        if np.max(np.abs(new - beta)) < 1e-10:
            beta = new
            break
        beta = new

    coefs = []
    for a in (0, 1):
        sub = data.d == a
        xa = np.column_stack([np.ones(int(sub.sum())), data.x[sub]])
        gram = xa.T @ xa + ridge * np.eye(xa.shape[1])
        coefs.append(np.linalg.solve(gram, xa.T @ data.y[sub]))
    coefs_arr = np.stack(coefs)

    def outcome(arm: int, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return np.column_stack([np.ones(x.shape[0]), x]) @ coefs_arr[arm]

    def propensity(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return expit(np.column_stack([np.ones(x.shape[0]), x]) @ beta)

    return NuisanceModel(
        outcome_fn=outcome, propensity_fn=propensity, kappa=data.kappa,
        source_tag=data.tag,
    )


def _fit_knn(data: Dataset, k: int) -> NuisanceModel:
    trees = {}
    ys = {}
    for a in (0, 1):
        sub = data.d == a
        trees[a] = cKDTree(data.x[sub])
        ys[a] = data.y[sub]
    tree_all = cKDTree(data.x)
    d_all = data.d.astype(np.float64)

    def outcome(arm: int, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        kk = min(k, ys[arm].shape[0])
        _, idx = trees[arm].query(x, k=kk)
        return ys[arm][idx.reshape(x.shape[0], -1)].mean(axis=1)

    def propensity(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        kk = min(k, data.n)
        _, idx = tree_all.query(x, k=kk)
        return d_all[idx.reshape(x.shape[0], -1)].mean(axis=1)

    return NuisanceModel(
        outcome_fn=outcome, propensity_fn=propensity, kappa=data.kappa,
        source_tag=data.tag,
    )


def fit_nuisance(data: Dataset, method: str = "histogram", **params) -> NuisanceModel:
    """Fit (g_hat, p_hat) on the given data.

    Methods: 'histogram' (per-arm bin means on the first feature, n_bins),
    'logistic_irls' (IRLS logistic propensity + per-arm ridge OLS outcomes),
    'knn' (k-nearest-neighbor means, scipy cKDTree). The returned model
    carries the dataset's tag; learners refuse nuisances fitted on their own
    learning data.
    """
    _check_arms(data)
    if method == "histogram":
        return _fit_histogram(data, n_bins=int(params.pop("n_bins", 10)))
    if method == "logistic_irls":
        return _fit_logistic_irls(
            data,
            max_iter=int(params.pop("max_iter", 50)),
            ridge=float(params.pop("ridge", 1e-8)),
        )
    if method == "knn":
        return _fit_knn(data, k=int(params.pop("k", 25)))
    raise InputError("method must be 'histogram', 'logistic_irls' or 'knn'")


def _mix64(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; uint64 arithmetic wraps modulo 2^64
    z = (z + np.uint64(0x9E3779B97F4A7C15)).astype(np.uint64)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def noisy_cate_oracle(true_cate, scale: float, seed: int = 0):
    """Synthetic CATE estimator: the truth plus Gaussian noise of the given
    magnitude, drawn deterministically per covariate point (integer hash of
    the coordinate bits and the seed), so the estimate is a fixed function
    within a replication."""

    seed64 = np.uint64(seed % (1 << 64))

    def estimate(x: np.ndarray) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=np.float64)
        acc = np.full(x.shape[0], seed64, dtype=np.uint64)
        for j in range(x.shape[1]):
            acc = _mix64(acc ^ x[:, j].view(np.uint64))
        h1 = _mix64(acc)
        h2 = _mix64(acc ^ np.uint64(0xD6E8FEB86659FD93))
        u1 = np.maximum((h1 >> np.uint64(11)) / float(1 << 53), 1e-12)
        u2 = (h2 >> np.uint64(11)) / float(1 << 53)
        normal = np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * math.pi * u2)
        return np.asarray(true_cate(x), dtype=np.float64).ravel() + scale * normal

    return estimate


def product_error(
    nuisance: NuisanceModel,
    oracle: DgpOracle,
    mc_n: int = 100_000,
    replication: int = 0,
) -> float:
    """Monte-Carlo estimate of the DR product-error moment
    E[(p_hat - p_o)^2 * sum_d (g_hat(d,.) - g_o(d,.))^2]^(1/2) against the
    simulation truth."""
    x = oracle.draw_covariates(mc_n, replication, STREAM_EVAL)
    dp2 = (nuisance.p(x) - oracle.propensity(x)) ** 2
    dg2 = sum(
        (nuisance.g(a, x) - oracle.mean_outcome(a, x)) ** 2 for a in (0, 1)
    )
    return float(np.sqrt(np.mean(dp2 * dg2)))
