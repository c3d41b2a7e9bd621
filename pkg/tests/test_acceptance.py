"""Acceptance suite: one test per primary criterion, at its stated tolerance.

Run with `pytest tests/test_acceptance.py -s` to see one pass line per
criterion. Desk-scale: the full module runs in about two minutes.
"""

import json

import numpy as np
import pytest
from scipy.integrate import dblquad

from abstainlearn import (
    AbstainingPolicy,
    AxisThresholdPolicy,
    ConstantPolicy,
    Dataset,
    DgpOracle,
    DgpSpec,
    GridRandomizingPolicy,
    LearnerConfig,
    LinearThresholdPolicy,
    MarginConfig,
    NuisanceModel,
    PolicyClass,
    SpiConfig,
    TablePolicy,
    axis_threshold_class,
    check_shift_equivalence,
    default_policy_class,
    ewm,
    generate,
    hcpi,
    ipw_value,
    learn_abstaining,
    lcb_difference,
    margin_learn,
    normalized_score,
    safe_ewm,
    safe_policy_improvement,
    spi_baseline,
    split_halves,
)
from abstainlearn.dgp import STREAM_EVAL, stream_rng
from abstainlearn.harness import _abstaining_grid_value, fit_loglog_slope
from abstainlearn.margin import _split_thirds
from abstainlearn.values import (
    dr_value_abstain,
    ipw_value_abstain,
    per_unit_scores,
)


def report(name: str, detail: str) -> None:
    print(f"[PASS] {name}: {detail}")


def grid_values(policy, grid, mu0, mu1):
    return float(np.where(policy.decide(grid) == 1, mu1, mu0).mean())


# ---------------------------------------------------------------------------
# 1. Type-I error control
# ---------------------------------------------------------------------------


def test_type_one_error_control():
    reps = 500
    spec = DgpSpec(family="spi", noise_sigma=0.3, baseline_gap=0.0, seed=2024)
    oracle = DgpOracle(spec)
    pc = default_policy_class(spec)
    baseline = spi_baseline(spec)
    grid = oracle.draw_covariates(200_000, 0, STREAM_EVAL)
    mu0, mu1 = oracle.mean_outcome(0, grid), oracle.mean_outcome(1, grid)
    base_value = grid_values(baseline, grid, mu0, mu1)
    mistakes = 0
    for rep in range(reps):
        data, _ = generate(spec, 1000, replication=rep)
        out = safe_policy_improvement(
            data, pc, baseline,
            SpiConfig(delta=0.05, learner=LearnerConfig(delta=0.05, seed=rep)),
        )
        mistakes += grid_values(out.policy, grid, mu0, mu1) < base_value
    rate = mistakes / reps
    bound = 0.05 + 2 * np.sqrt(0.05 * 0.95 / reps)
    assert rate <= bound
    report("type-I error control", f"mistake rate {rate:.4f} <= {bound:.4f}")


# ---------------------------------------------------------------------------
# 2 + 3. Fast rate (bonus 0.05) and slow-rate fallback (fair-coin at p = 0)
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def rate_curves():
    spec = DgpSpec(
        family="abstention", dim=1, noise_sigma=0.1, propensity_kind="logistic",
        reward_regime="complex",
        regime_params={"plus": 0.4, "minus": -0.4, "lo": -0.2983, "hi": 1.0},
        seed=77,
    )
    oracle = DgpOracle(spec)
    # Threshold grid capped at the plateau edge: no class pair disagrees
    # inside the zero-CATE plateau, so the best abstaining value equals the
    # best binary value and the regret stays positive.
    pc = axis_threshold_class(
        1, np.linspace(-2.6, 0.96, 891), directions=("below",), vc_dim=1
    )
    grid = oracle.draw_covariates(400_000, 0, STREAM_EVAL)
    mu0 = oracle.mean_outcome(0, grid)
    mu1 = oracle.mean_outcome(1, grid)
    diff = mu1 - mu0
    base_term = float(mu0.mean())
    best = max(
        base_term + float(diff[p.decide(grid) == 1].sum()) / grid.shape[0]
        for p in pc.policies
    )
    ns = (250, 500, 1000, 2000, 4000)
    bonus = 0.05
    med_abstain, med_coin = [], []
    for n in ns:
        regret_p = np.empty(200)
        regret_coin = np.empty(200)
        for rep in range(200):
            data, _ = generate(spec, n, replication=rep)
            fit = learn_abstaining(
                data, pc, LearnerConfig(bonus=bonus, delta=0.05, seed=rep)
            )
            base_lab = fit.result.base.decide(grid)
            mem_lab = fit.result.member.decide(grid)
            v_p = _abstaining_grid_value(base_lab, mem_lab, mu0, mu1, bonus)
            # fair-coin conversion: expected value over the coin, exactly the
            # abstaining value at bonus 0
            v_coin = _abstaining_grid_value(base_lab, mem_lab, mu0, mu1, 0.0)
            regret_p[rep] = best - v_p
            regret_coin[rep] = best - v_coin
        med_abstain.append(float(np.median(regret_p)))
        med_coin.append(float(np.median(regret_coin)))
    return ns, med_abstain, med_coin


def test_fast_rate_abstaining_regret(rate_curves):
    ns, med_abstain, _ = rate_curves
    assert all(m > 0 for m in med_abstain)
    slope = fit_loglog_slope(ns, med_abstain)
    assert slope <= -0.75
    report("fast-rate check", f"median abstaining-regret slope {slope:.3f} <= -0.75")


def test_slow_rate_fallback(rate_curves):
    ns, _, med_coin = rate_curves
    assert all(m > 0 for m in med_coin)
    slope = fit_loglog_slope(ns, med_coin)
    assert slope <= -0.4
    report("slow-rate fallback", f"median classical-regret slope {slope:.3f} <= -0.4")


# ---------------------------------------------------------------------------
# 4. DR equivalence at oracle nuisances
# ---------------------------------------------------------------------------


def test_dr_equivalence_at_oracle_nuisances():
    # Per-sample equality of the IPW and DR objectives requires the exact
    # outcome regression to vanish, and identical selection radii require
    # kappa * |y| * (d/p + (1-d)/(1-p)) = 1 per sample. Rademacher outcomes
    # (y = +-1, so g_o == 0) with constant propensity 1/2 and kappa = 1/2
    # satisfy both exactly, so the two argmax sequences provably coincide
    # while the near-optimal filter still prunes on most seeds.
    def rademacher_data(n, rep):
        rng = stream_rng(909, rep, 1)
        x = rng.standard_normal((n, 1))
        d = (rng.random(n) < 0.5).astype(np.int8)
        y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
        return Dataset(
            x=x, d=d, y=y, kappa=0.5, propensity=np.full(n, 0.5), tag=f"rad{rep}"
        )

    nuisance = NuisanceModel(
        outcome_fn=lambda arm, x: np.zeros(x.shape[0]),     # exact g_o
        propensity_fn=lambda x: np.full(x.shape[0], 0.5),   # exact p_o
        kappa=0.5,
        err_dr_bound=0.0,
    )
    pc = axis_threshold_class(
        1, np.linspace(-1.5, 1.5, 25), directions=("above", "below"),
        include_constants=True, vc_dim=2,
    )
    bonus = 0.05
    max_dev = 0.0
    pruned_seeds = 0
    for seed in range(50):
        data = rademacher_data(1200, seed)
        ipw_cfg = LearnerConfig(bonus=bonus, kappa=0.5, radius_constant=0.35, seed=seed)
        dr_cfg = LearnerConfig(
            bonus=bonus, kappa=0.5, radius_constant=0.35, seed=seed,
            dr_mode=True, err_dr=0.0,
        )
        fit_ipw = learn_abstaining(data, pc, ipw_cfg)
        fit_dr = learn_abstaining(data, pc, dr_cfg, nuisance)
        assert json.dumps(fit_ipw.to_json()) == json.dumps(fit_dr.to_json())
        pruned_seeds += fit_ipw.n_near_optimal < len(pc)

        idx1, idx2 = split_halves(data, seed)
        d1, d2 = data.subset(idx1), data.subset(idx2)
        for policy in pc.policies:
            for split in (d1, d2):
                a = per_unit_scores(policy, split, "ipw")
                b = per_unit_scores(policy, split, "dr", nuisance)
                max_dev = max(max_dev, float(np.abs(a - b).max()))
        for member in fit_ipw.near_optimal:
            proj = AbstainingPolicy(base=fit_ipw.pi_hat, member=member)
            a = ipw_value_abstain(proj, d2, bonus).per_unit_scores
            b = dr_value_abstain(proj, d2, nuisance, bonus).per_unit_scores
            max_dev = max(max_dev, float(np.abs(a - b).max()))
    assert max_dev <= 1e-9
    assert pruned_seeds >= 25  # the filter does real work on most seeds
    report(
        "DR equivalence at oracle nuisances",
        f"50/50 identical argmax sequences, max per-sample deviation {max_dev:.1e}",
    )


# ---------------------------------------------------------------------------
# 5. Worst-case-value identity
# ---------------------------------------------------------------------------


def test_shift_identity_battery():
    oracle = DgpOracle(DgpSpec(family="spi", seed=1))
    rng = np.random.default_rng(606)
    worst = 0.0
    instances = 0
    for trial in range(334):
        n_points = int(rng.integers(20, 80))
        x = oracle.draw_covariates(n_points, trial, STREAM_EVAL)
        mu0, mu1 = oracle.mean_outcome(0, x), oracle.mean_outcome(1, x)
        policy = GridRandomizingPolicy(
            points=x, values=rng.choice([0.0, 0.5, 1.0], size=n_points)
        )
        for radius in (float(rng.uniform(0, 0.05)), float(rng.uniform(0.05, 0.3)),
                       float(rng.uniform(0.3, 1.0))):
            check = check_shift_equivalence(policy, x, (mu0, mu1), radius)
            worst = max(worst, check.gap)
            instances += 1
    assert instances >= 1000
    assert worst <= 1e-12
    report("shift-identity battery", f"{instances} instances, max gap {worst:.1e}")


# ---------------------------------------------------------------------------
# 6. EWM brute-force oracle
# ---------------------------------------------------------------------------


def test_ewm_matches_brute_force_on_random_instances():
    rng = np.random.default_rng(42)
    for trial in range(100):
        n = int(rng.integers(4, 31))
        dim = int(rng.integers(1, 4))
        kappa = float(rng.uniform(0.05, 0.5))
        data = Dataset(
            x=rng.normal(size=(n, dim)),
            d=rng.integers(0, 2, n),
            y=rng.normal(size=n),
            kappa=kappa,
            propensity=rng.uniform(kappa, 1 - kappa, n),
        )
        k = int(rng.integers(2, 51))
        policies = []
        for _ in range(k):
            kind = rng.integers(0, 3)
            if kind == 0:
                policies.append(ConstantPolicy(int(rng.integers(0, 2))))
            elif kind == 1:
                policies.append(
                    AxisThresholdPolicy(
                        int(rng.integers(0, dim)), float(rng.normal()),
                        "above" if rng.random() < 0.5 else "below",
                    )
                )
            else:
                policies.append(
                    LinearThresholdPolicy(
                        weights=rng.normal(size=dim), intercept=float(rng.normal())
                    )
                )
        pc = PolicyClass(tuple(policies), vc_dim=max(1, dim))
        # independent oracle: plain loop with strict-improvement argmax
        best, best_value = 0, -np.inf
        for i, policy in enumerate(pc.policies):
            v = ipw_value(policy, data).value
            if v > best_value:
                best, best_value = i, v
        assert ewm(data, pc) is pc[best]
    report("EWM brute-force oracle", "100/100 random instances matched exactly")


# ---------------------------------------------------------------------------
# 7. FiniteD wrapper optimality
# ---------------------------------------------------------------------------


def test_finite_d_labeling_optimality():
    n_s = 5
    s_points = np.arange(n_s, dtype=float).reshape(-1, 1)
    raw = 0.5 ** (np.arange(n_s) + 1)
    masses_s = 0.5 * raw / raw.sum()
    support = np.vstack([[-1.0], s_points])
    masses = np.concatenate([[0.5], masses_s])
    tau = np.concatenate([[-0.5], 0.5 * np.where(np.arange(n_s) % 2 == 0, 1.0, -1.0)])
    codes = np.arange(1 << n_s, dtype=np.uint32)
    bits = ((codes[:, None] >> np.arange(n_s)) & 1).astype(np.int8)
    pc = PolicyClass(
        tuple(TablePolicy(points=s_points, labels=bits[c], default=0)
              for c in range(1 << n_s)),
        vc_dim=n_s,
    )
    checked = 0
    for seed in range(50):
        rng = stream_rng(4242, seed, 21)
        n = 400
        z = rng.choice(len(masses), size=n, p=masses)
        d = (rng.random(n) < 0.5).astype(np.int8)
        y = 0.5 + d * tau[z] + rng.normal(0, 0.25, n)
        data = Dataset(
            x=support[z], d=d, y=y, kappa=0.5, propensity=np.full(n, 0.5)
        )
        pol = margin_learn(
            data, pc,
            MarginConfig(margin=0.5, finite_d_cap=12,
                         learner=LearnerConfig(kappa=0.5, seed=seed)),
        )
        # enumeration tables carry no default; an empty abstention region
        # falls back to the stage-one policy (here a class member table
        # with default 0)
        if not isinstance(pol.refine, TablePolicy) or pol.refine.default is not None:
            continue
        checked += 1
        _, idx3 = _split_thirds(data.n, seed=seed)
        d3 = data.subset(idx3)
        region = pol.decision.abstains(d3.x)
        sub = d3.subset(np.nonzero(region)[0])
        points = pol.refine.points
        m = points.shape[0]
        assert m <= 12
        lut = {points[i].tobytes(): i for i in range(m)}
        point_of = np.array([lut[sub.x[i].tobytes()] for i in range(sub.n)])
        gamma1 = sub.y * sub.d / sub.propensity
        gamma0 = sub.y * (1 - sub.d) / (1 - sub.propensity)

        def cond_value(labels):
            lab = labels[point_of].astype(float)
            return float((lab * gamma1 + (1 - lab) * gamma0).mean())

        chosen = cond_value(np.asarray(pol.refine.labels))
        for code in range(1 << m):
            assert chosen >= cond_value((code >> np.arange(m)) & 1) - 1e-12
    assert checked >= 30
    report(
        "FiniteD wrapper optimality",
        f"{checked} seeds with enumerable regions, all exhaustively optimal",
    )


# ---------------------------------------------------------------------------
# 8. Monte-Carlo ground truth
# ---------------------------------------------------------------------------


def test_monte_carlo_ground_truth():
    # Independent integration: E[tau 1{tau > 0}] = 2 * int int (u+v-1)+ du dv.
    integral, _ = dblquad(lambda v, u: max(u + v - 1.0, 0.0), 0, 1, 0, 1)
    bayes_value = 0.5 + 2.0 * integral  # = 0.5 + 1/3
    assert bayes_value == pytest.approx(0.5 + 1.0 / 3.0, abs=1e-6)

    oracle = DgpOracle(DgpSpec(family="spi", seed=31))
    # 1{tau > 0} = 1{2 x1 + 2 x2 - 2 > 0}: an in-family linear policy.
    bayes = LinearThresholdPolicy(weights=[2.0, 2.0, 0.0, 0.0, 0.0], intercept=-2.0)
    v_star, se_star = oracle.true_value(bayes, mc_n=1_000_000)
    assert abs(v_star - bayes_value) < 3 * se_star
    v0, se0 = oracle.true_value(ConstantPolicy(0), mc_n=1_000_000)
    assert abs(v0 - 0.5) < 3 * se0
    report(
        "Monte-Carlo ground truth",
        f"V(bayes) = {v_star:.5f} (target {bayes_value:.5f} +- {3 * se_star:.5f}), "
        f"V(const0) = {v0:.5f}",
    )


# ---------------------------------------------------------------------------
# 9. Comparative power at n = 2000
# ---------------------------------------------------------------------------


def test_comparative_power():
    reps = 100
    spec = DgpSpec(family="spi", noise_sigma=0.3, baseline_gap=0.15, seed=501)
    oracle = DgpOracle(spec)
    pc = default_policy_class(spec)
    baseline = spi_baseline(spec)
    grid = oracle.draw_covariates(200_000, 0, STREAM_EVAL)
    mu0, mu1 = oracle.mean_outcome(0, grid), oracle.mean_outcome(1, grid)
    base_value = grid_values(baseline, grid, mu0, mu1)
    improvement = {}
    for method in ("algo2", "safe_ewm", "hcpi_t", "hcpi_ci"):
        wins = 0
        for rep in range(reps):
            data, _ = generate(spec, 2000, replication=rep)
            if method == "algo2":
                out = safe_policy_improvement(
                    data, pc, baseline,
                    SpiConfig(delta=0.05, learner=LearnerConfig(delta=0.05, seed=rep)),
                )
            elif method == "safe_ewm":
                out = safe_ewm(data, pc, baseline, 0.05, seed=rep)
            else:
                out = hcpi(
                    data, pc, baseline, 0.05,
                    variant="t_test" if method == "hcpi_t" else "clipped_ci",
                    seed=rep,
                )
            wins += grid_values(out.policy, grid, mu0, mu1) > base_value
        improvement[method] = wins / reps
    for other in ("safe_ewm", "hcpi_t", "hcpi_ci"):
        assert improvement["algo2"] >= improvement[other] - 0.05
    report(
        "comparative power",
        "improvement rates "
        + ", ".join(f"{m}={v:.2f}" for m, v in improvement.items()),
    )


# ---------------------------------------------------------------------------
# 10. Value-estimation invariant batteries (>= 1e4 randomized cases each)
# ---------------------------------------------------------------------------


def test_property_battery_normalized_score_boundedness():
    from abstainlearn import Sample

    rng = np.random.default_rng(314)
    cases = 0
    while cases < 10_000:
        kappa = float(rng.uniform(0.05, 0.5))
        policy = AxisThresholdPolicy(
            int(rng.integers(0, 2)), float(rng.normal()),
            "above" if rng.random() < 0.5 else "below",
        )
        for _ in range(50):
            s = Sample(
                x=rng.normal(size=2),
                d=int(rng.integers(0, 2)),
                y=float(rng.random()),  # bounded outcome in [0, 1]
                propensity=float(rng.uniform(kappa, 1 - kappa)),
            )
            f = normalized_score(policy, s, kappa)
            assert 0.0 <= f <= 1.0 + 1e-12
            cases += 1
    report("boundedness battery", f"{cases} cases, every score in [0, 1]")


def test_property_battery_abstention_value_linearity():
    rng = np.random.default_rng(2718)
    cases = 0
    while cases < 10_000:
        n = int(rng.integers(5, 40))
        kappa = float(rng.uniform(0.05, 0.5))
        data = Dataset(
            x=rng.normal(size=(n, 1)),
            d=rng.integers(0, 2, n),
            y=rng.normal(size=n),
            kappa=kappa,
            propensity=rng.uniform(kappa, 1 - kappa, n),
        )
        policy = AbstainingPolicy(
            base=AxisThresholdPolicy(0, float(rng.normal())),
            member=AxisThresholdPolicy(0, float(rng.normal())),
        )
        frac = float(policy.abstains(data.x).mean())
        v0 = ipw_value_abstain(policy, data, 0.0).value
        for _ in range(25):
            bonus = float(rng.uniform(0, 2))
            got = ipw_value_abstain(policy, data, bonus).value
            assert got == pytest.approx(v0 + bonus * frac, abs=1e-10)
            cases += 1
    report("abstention-linearity battery", f"{cases} cases, exact linearity")


def test_property_battery_lcb_monotonicity():
    rng = np.random.default_rng(161803)
    cases = 0
    while cases < 10_000:
        n = int(rng.integers(5, 30))
        kappa = float(rng.uniform(0.05, 0.5))
        data = Dataset(
            x=rng.normal(size=(n, 1)),
            d=rng.integers(0, 2, n),
            y=rng.normal(size=n) + 0.5,
            kappa=kappa,
            propensity=rng.uniform(kappa, 1 - kappa, n),
        )
        candidate = AxisThresholdPolicy(0, float(rng.normal()))
        baseline = ConstantPolicy(int(rng.integers(0, 2)))
        diffs_sd = np.std(
            per_unit_scores(candidate, data)
            - per_unit_scores(baseline, data),
            ddof=1,
        )
        for _ in range(20):
            delta = float(rng.uniform(0.005, 0.4))
            k1 = int(rng.integers(1, 10))
            k2 = k1 + int(rng.integers(1, 10))
            lcb1 = lcb_difference(candidate, baseline, data, delta, k=k1)
            lcb2 = lcb_difference(candidate, baseline, data, delta, k=k2)
            if diffs_sd > 0:
                assert lcb2 < lcb1  # strictly decreasing in k
            else:
                assert lcb2 == lcb1
            delta2 = float(rng.uniform(delta, 0.5))
            if delta2 > delta and diffs_sd > 0:
                assert lcb_difference(candidate, baseline, data, delta2, k=k1) > lcb1
            cases += 1
    report("LCB-monotonicity battery", f"{cases} cases, monotone in k and delta")
