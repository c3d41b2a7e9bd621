"""Margin wrapper: splice structure, FiniteD enumeration, regret rates."""

import numpy as np
import pytest

from abstainlearn import (
    CapacityError,
    Dataset,
    DgpOracle,
    DgpSpec,
    InputError,
    LearnerConfig,
    MarginConfig,
    PolicyClass,
    SplicedPolicy,
    TablePolicy,
    axis_threshold_class,
    generate,
    margin_learn,
)
from abstainlearn.dgp import STREAM_EVAL, noisy_cate_oracle, stream_rng
from abstainlearn.harness import fit_loglog_slope
from abstainlearn.margin import _split_thirds


def discrete_setup(n_s=5, h=0.5, sigma=0.25, seed=7):
    """Finite-support DGP: an off point (mass 1/2, tau = -h, fixed label 0)
    plus n_s labeling points with geometric masses and alternating tau."""
    s_points = np.arange(n_s, dtype=float).reshape(-1, 1)
    raw = 0.5 ** (np.arange(n_s) + 1)
    masses_s = 0.5 * raw / raw.sum()
    support = np.vstack([[-1.0], s_points])
    masses = np.concatenate([[0.5], masses_s])
    tau = np.concatenate([[-h], h * np.where(np.arange(n_s) % 2 == 0, 1.0, -1.0)])
    codes = np.arange(1 << n_s, dtype=np.uint32)
    bits = ((codes[:, None] >> np.arange(n_s)) & 1).astype(np.int8)
    pc = PolicyClass(
        tuple(
            TablePolicy(points=s_points, labels=bits[c], default=0)
            for c in range(1 << n_s)
        ),
        vc_dim=n_s,
    )

    def draw(n, rep):
        rng = stream_rng(seed, rep, 21)
        z = rng.choice(len(masses), size=n, p=masses)
        d = (rng.random(n) < 0.5).astype(np.int8)
        y = 0.5 + d * tau[z] + rng.normal(0, sigma, n)
        return Dataset(x=support[z], d=d, y=y, kappa=0.5, propensity=np.full(n, 0.5))

    bayes = (tau[1:] > 0).astype(np.int8)
    return s_points, masses_s, tau, bayes, pc, draw


class TestSpliceStructure:
    def test_final_matches_abstaining_policy_off_region(self):
        _, _, _, _, pc, draw = discrete_setup()
        data = draw(600, rep=0)
        config = MarginConfig(margin=0.5, learner=LearnerConfig(kappa=0.5, seed=0))
        pol = margin_learn(data, pc, config)
        assert isinstance(pol, SplicedPolicy)
        grid = np.vstack([[-1.0]] + [[float(j)] for j in range(5)])
        raw = pol.decision.decide(grid)
        final = pol.decide(grid)
        committed = raw != -1
        assert np.array_equal(final[committed], raw[committed])

    def test_empty_region_returns_stage_one_labels(self):
        # Singleton class: the abstaining stage can never abstain.
        _, _, _, _, _, draw = discrete_setup()
        data = draw(120, rep=1)
        pc = PolicyClass(
            (TablePolicy(points=np.arange(5, dtype=float).reshape(-1, 1),
                         labels=[1, 0, 1, 0, 1], default=0),),
            vc_dim=1,
        )
        pol = margin_learn(
            data, pc, MarginConfig(margin=0.5, learner=LearnerConfig(kappa=0.5, seed=1))
        )
        assert not np.any(pol.decision.abstains(data.x))
        assert np.array_equal(pol.decide(data.x), pol.decision.base.decide(data.x))

    def test_region_unseen_in_third_split_falls_back_to_stage_one(self):
        # All third-split points sit far left where every threshold policy
        # agrees, so the refinement has no samples and falls back to the
        # stage-one EWM policy.
        rng = np.random.default_rng(3)
        n = 90
        idx12, idx3 = _split_thirds(n, seed=4)
        x = np.empty((n, 1))
        x[idx12, 0] = rng.uniform(-1.0, 1.0, idx12.size)
        x[idx3, 0] = -5.0
        d = rng.integers(0, 2, n)
        y = 0.4 + 0.3 * d * np.sign(-x[:, 0]) + rng.normal(0, 0.3, n)
        data = Dataset(x=x, d=d, y=y, kappa=0.5, propensity=np.full(n, 0.5))
        pc = axis_threshold_class(
            1, np.linspace(-1.0, 1.0, 21), directions=("below",), vc_dim=1
        )
        pol = margin_learn(
            data, pc, MarginConfig(margin=0.4, learner=LearnerConfig(kappa=0.5, seed=4))
        )
        assert not isinstance(pol.refine, TablePolicy)
        region = pol.decision.abstains(data.x)
        if region.any():
            assert np.array_equal(
                pol.decide(data.x[region]), pol.refine.decide(data.x[region])
            )


class TestFiniteD:
    def test_chosen_labeling_beats_exhaustive_alternatives(self):
        s_points, _, _, _, pc, draw = discrete_setup()
        checked = 0
        for rep in range(8):
            data = draw(400, rep=rep)
            pol = margin_learn(
                data, pc,
                MarginConfig(margin=0.5, learner=LearnerConfig(kappa=0.5, seed=rep)),
            )
            # enumeration tables carry no default; class-member fallbacks do
            if not isinstance(pol.refine, TablePolicy) or pol.refine.default is not None:
                continue
            checked += 1
            _, idx3 = _split_thirds(data.n, seed=rep)
            d3 = data.subset(idx3)
            region = pol.decision.abstains(d3.x)
            sub = d3.subset(np.nonzero(region)[0])
            points = pol.refine.points
            lut = {points[i].tobytes(): i for i in range(points.shape[0])}
            point_of = np.array(
                [lut[sub.x[i].tobytes()] for i in range(sub.n)], dtype=int
            )
            m = points.shape[0]
            gamma1 = sub.y * sub.d / sub.propensity
            gamma0 = sub.y * (1 - sub.d) / (1 - sub.propensity)

            def cond_value(labels):
                lab = labels[point_of].astype(float)
                return float((lab * gamma1 + (1 - lab) * gamma0).mean())

            chosen = cond_value(np.asarray(pol.refine.labels))
            for code in range(1 << m):
                alt = (code >> np.arange(m)) & 1
                assert chosen >= cond_value(alt) - 1e-12
        assert checked >= 4

    def test_two_point_region_matches_brute_force(self):
        s_points, _, _, _, pc, draw = discrete_setup()
        for rep in range(30):
            data = draw(300, rep=100 + rep)
            pol = margin_learn(
                data, pc,
                MarginConfig(
                    margin=0.5, learner=LearnerConfig(kappa=0.5, seed=100 + rep)
                ),
            )
            if (
                isinstance(pol.refine, TablePolicy)
                and pol.refine.default is None
                and pol.refine.points.shape[0] == 2
            ):
                # exhaustively checked above; here just confirm the shape
                assert pol.refine.labels.shape == (2,)
                return
        pytest.skip("no replication produced a two-point region")

    def test_capacity_error(self):
        # Continuous covariates: every region sample is a distinct point.
        spec = DgpSpec(family="spi", noise_sigma=0.8, seed=5)
        data, _ = generate(spec, 300)
        pc = axis_threshold_class(5, np.linspace(0.1, 0.9, 9))
        with pytest.raises(CapacityError):
            margin_learn(
                data, pc,
                MarginConfig(margin=0.2, finite_d_cap=2, learner=LearnerConfig(seed=2)),
            )

    def test_preconditions(self):
        _, _, _, _, pc, draw = discrete_setup()
        tiny = draw(5, rep=0)
        with pytest.raises(InputError):
            margin_learn(tiny, pc, MarginConfig(margin=0.5))
        data = draw(60, rep=0)
        with pytest.raises(InputError):
            margin_learn(data, pc, MarginConfig(margin=0.5, mode="cate_oracle"))
        with pytest.raises(InputError):
            MarginConfig(margin=-1.0)


class TestCateOracleMode:
    def test_exact_oracle_gives_bayes_on_region(self):
        spec = DgpSpec(
            family="abstention", dim=1, noise_sigma=0.2,
            reward_regime="complex", seed=9,
        )
        data, oracle = generate(spec, 900)
        pc = axis_threshold_class(
            1, np.linspace(-2, 2, 41), directions=("below",), vc_dim=1
        )
        pol = margin_learn(
            data, pc,
            MarginConfig(margin=0.3, mode="cate_oracle", learner=LearnerConfig(seed=9)),
            cate_oracle=oracle.cate,
        )
        grid = np.linspace(-2.5, 2.5, 501).reshape(-1, 1)
        region = pol.decision.abstains(grid)
        if region.any():
            bayes = (oracle.cate(grid[region]) > 0).astype(np.int8)
            assert np.array_equal(pol.decide(grid[region]), bayes)

    def test_cate_policy_not_serializable(self):
        _, _, _, _, pc, draw = discrete_setup()
        data = draw(120, rep=2)
        pol = margin_learn(
            data, pc,
            MarginConfig(
                margin=0.5, mode="cate_oracle", learner=LearnerConfig(kappa=0.5, seed=2)
            ),
            cate_oracle=lambda x: np.ones(x.shape[0]),
        )
        with pytest.raises(InputError):
            pol.to_json()


class TestRegretRates:
    def test_finite_diameter_fast_rate(self):
        # Hard margin (|tau| = 0.5 everywhere), diameter-10 class of table
        # labelings with geometric point masses; median classical regret over
        # 200 replications decays ~1/n (pilot slope -1.10).
        n_s = 10
        s_points, masses_s, tau, bayes, pc, draw = discrete_setup(n_s=n_s)
        ns = (250, 500, 1000, 2000, 4000)
        medians = []
        for n in ns:
            regrets = np.empty(200)
            for rep in range(200):
                data = draw(n, rep)
                pol = margin_learn(
                    data, pc,
                    MarginConfig(
                        margin=0.5, finite_d_cap=12,
                        learner=LearnerConfig(kappa=0.5, seed=rep),
                    ),
                )
                wrong = pol.decide(s_points) != bayes
                regrets[rep] = 0.5 * masses_s[wrong].sum()
            medians.append(float(np.median(regrets)))
        assert all(m > 0 for m in medians)
        assert fit_loglog_slope(ns, medians) <= -0.75

    def test_cate_oracle_rate_strong_and_weak(self):
        # Strong oracle (error ~ 4 n^{-1/2}): mean regret slope passes the
        # fast-rate bar. Weak oracle (4 n^{-1/4}): slope recorded only; its
        # sign flips persist and the decay visibly degrades (pilot: -1.11 vs
        # -0.35). Mean rather than median: with the Bayes rule in class the
        # regret is nonnegative with an atom at exactly zero.
        spec = DgpSpec(
            family="abstention", dim=1, noise_sigma=0.1,
            propensity_kind="logistic", reward_regime="complex",
            regime_params={"plus": 0.4, "minus": -0.4, "lo": -0.3, "hi": 50.0},
            seed=42,
        )
        oracle = DgpOracle(spec)
        pc = axis_threshold_class(
            1, np.linspace(-2.4, 2.4, 241), directions=("below",), vc_dim=1
        )
        grid = oracle.draw_covariates(100_000, 0, STREAM_EVAL)
        mu0 = oracle.mean_outcome(0, grid)
        diff = oracle.mean_outcome(1, grid) - mu0
        base_term = float(mu0.mean())
        best = max(
            base_term + float(diff[p.decide(grid) == 1].sum()) / grid.shape[0]
            for p in pc.policies
        )
        ns = (250, 500, 1000, 2000, 4000)
        slopes = {}
        for beta in (0.5, 0.25):
            means = []
            for n in ns:
                regrets = np.empty(200)
                for rep in range(200):
                    data, _ = generate(spec, n, replication=rep)
                    est = noisy_cate_oracle(
                        oracle.cate, scale=4.0 * float(n) ** (-beta), seed=rep
                    )
                    pol = margin_learn(
                        data, pc,
                        MarginConfig(
                            margin=0.35, mode="cate_oracle",
                            learner=LearnerConfig(kappa=0.1, seed=rep),
                        ),
                        cate_oracle=est,
                    )
                    lab = pol.decide(grid)
                    value = base_term + float(diff[lab == 1].sum()) / grid.shape[0]
                    regrets[rep] = best - value
                assert regrets.min() >= -1e-12
                means.append(float(regrets.mean()))
            slopes[beta] = fit_loglog_slope(ns, means)
        assert slopes[0.5] <= -0.75
        print(f"cate-oracle regret slopes: beta=1/2 {slopes[0.5]:.3f}, "
              f"beta=1/4 {slopes[0.25]:.3f} (recorded)")
