"""Learning a treatment policy that knows when to defer.

Walks through the two-stage learner on a synthetic problem whose CATE is
exactly zero on half the covariate space: the learner should commit where the
effect is clear and abstain on the zero-effect plateau, where the abstention
bonus beats any forced guess.
"""

import numpy as np

from abstainlearn import (
    DgpOracle,
    DgpSpec,
    LearnerConfig,
    axis_threshold_class,
    ewm,
    generate,
    learn_abstaining,
)

# tau = +0.4 below x = 0, exactly 0 above: committing left is easy,
# committing right is pointless.
spec = DgpSpec(
    family="abstention", dim=1, noise_sigma=0.2, propensity_kind="logistic",
    reward_regime="complex",
    regime_params={"plus": 0.4, "minus": -0.4, "lo": 0.0, "hi": 0.0},
    seed=7,
)
data, oracle = generate(spec, 2000)
print(f"logged data: n={data.n}, treated fraction {data.d.mean():.2f}, "
      f"outcomes in [{data.y.min():.2f}, {data.y.max():.2f}]")

# Threshold policies "treat iff x <= t" on a fine grid.
policy_class = axis_threshold_class(
    1, np.linspace(-2.5, 2.5, 101), directions=("below",), vc_dim=1
)

config = LearnerConfig(bonus=0.05, delta=0.05, kappa=data.kappa, seed=0)
fit = learn_abstaining(data, policy_class, config)
print(f"\nfirst-stage winner: treat iff x <= {fit.pi_hat.threshold:.2f}")
print(f"near-optimal set: {fit.n_near_optimal} of {len(policy_class)} policies "
      f"(selection radius alpha = {fit.alpha:.3f})")
print(f"chosen member: treat iff x <= {fit.result.member.threshold:.2f} "
      f"-> abstain on the slab between the two thresholds")

# Where does the learned policy abstain, and is that where it should?
grid = oracle.draw_covariates(20_000, 0, 9)
abstains = fit.result.abstains(grid)
plateau = grid[:, 0] >= 0.0
print(f"\nabstention rate on the zero-CATE plateau: "
      f"{abstains[plateau].mean():.2f}")
print(f"abstention rate where the effect is strong: "
      f"{abstains[~plateau].mean():.3f}")

# Value comparison against plain empirical welfare maximization.
ewm_policy = ewm(data, policy_class)
v_abstain = oracle.conditional_values(fit.result, grid, bonus=config.bonus).mean()
v_ewm = oracle.conditional_values(ewm_policy, grid).mean()
print(f"\ntrue abstaining value (bonus {config.bonus}): {v_abstain:.4f}")
print(f"true value of plain EWM:                  {v_ewm:.4f}")
print(f"gain from knowing when to defer:          {v_abstain - v_ewm:+.4f}")
