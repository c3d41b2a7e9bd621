"""Margin wrapper: abstain first, then resolve the abstention region.

Under a hard margin (|CATE| >= h everywhere) the abstention stage with bonus
h/2 fences off the genuinely uncertain covariate points; a final stage then
labels just those points, either by exhaustive search over labelings
(FiniteD) or by the sign of a CATE estimate (CATE oracle).
"""

import numpy as np

from abstainlearn import (
    Dataset,
    DgpOracle,
    DgpSpec,
    LearnerConfig,
    MarginConfig,
    PolicyClass,
    TablePolicy,
    axis_threshold_class,
    generate,
    margin_learn,
)
from abstainlearn.dgp import noisy_cate_oracle, stream_rng

# --- FiniteD mode on a finite covariate support -------------------------

H = 0.5
N_S = 5
s_points = np.arange(N_S, dtype=float).reshape(-1, 1)
raw = 0.5 ** (np.arange(N_S) + 1)
masses_s = 0.5 * raw / raw.sum()
support = np.vstack([[-1.0], s_points])
masses = np.concatenate([[0.5], masses_s])
tau = np.concatenate([[-H], H * np.where(np.arange(N_S) % 2 == 0, 1.0, -1.0)])
print("finite support:", support.ravel())
print("CATE per point:", tau, "(hard margin", H, ")")

codes = np.arange(1 << N_S)
bits = ((codes[:, None] >> np.arange(N_S)) & 1).astype(np.int8)
policy_class = PolicyClass(
    tuple(TablePolicy(points=s_points, labels=bits[c], default=0)
          for c in range(1 << N_S)),
    vc_dim=N_S,
)
print(f"class: all {len(policy_class)} labelings of the last {N_S} points "
      f"(combinatorial diameter {N_S})")

rng = stream_rng(3, 0, 21)
n = 600
z = rng.choice(len(masses), size=n, p=masses)
d = (rng.random(n) < 0.5).astype(np.int8)
y = 0.5 + d * tau[z] + rng.normal(0, 0.25, n)
data = Dataset(x=support[z], d=d, y=y, kappa=0.5, propensity=np.full(n, 0.5))

final = margin_learn(
    data, policy_class,
    MarginConfig(margin=H, mode="finite_d", finite_d_cap=12,
                 learner=LearnerConfig(kappa=0.5, seed=0)),
)
bayes = (tau[1:] > 0).astype(np.int8)
labels = final.decide(s_points)
print("final labels on the labeling points:", labels)
print("Bayes labels:                       ", bayes)
wrong_mass = masses_s[labels != bayes].sum()
print(f"classical regret of the splice: {H * wrong_mass:.5f}")
if isinstance(final.refine, TablePolicy) and final.refine.default is None:
    print(f"abstention region resolved by enumeration over "
          f"{final.refine.points.shape[0]} points")

# --- CATE-oracle mode on a continuous problem ---------------------------

spec = DgpSpec(
    family="abstention", dim=1, noise_sigma=0.1, propensity_kind="logistic",
    reward_regime="complex",
    regime_params={"plus": 0.4, "minus": -0.4, "lo": -0.3, "hi": 50.0},
    seed=42,
)
cdata, oracle = generate(spec, 1500)
thresholds = axis_threshold_class(
    1, np.linspace(-2.4, 2.4, 241), directions=("below",), vc_dim=1
)
estimate = noisy_cate_oracle(oracle.cate, scale=4.0 / np.sqrt(cdata.n), seed=0)
final_c = margin_learn(
    cdata, thresholds,
    MarginConfig(margin=0.35, mode="cate_oracle", learner=LearnerConfig(seed=0)),
    cate_oracle=estimate,
)
grid = np.linspace(-2.5, 2.5, 2001).reshape(-1, 1)
region = final_c.decision.abstains(grid)
agree = np.mean(final_c.decide(grid) == (oracle.cate(grid) > 0))
print(f"\ncontinuous problem: abstention slab covers {region.mean():.3f} of the "
      f"grid around the decision boundary")
print(f"final policy matches the Bayes rule on {agree:.3f} of the grid")
