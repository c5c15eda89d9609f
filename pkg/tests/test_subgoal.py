import numpy as np
import pytest
from scipy import stats

from geaps_lab import density, subgoal
from geaps_lab.subgoal import (
    OmegaParams,
    SuccessTable,
    goid_select,
    kl_desired_vs_achieved,
    mega_select,
    omega_alpha,
    omega_select,
    skewfit_select,
    uniform_select,
)


def two_cluster_model():
    # dense cluster near the origin, single far goal: far goal has low density
    goals = [(0.0, 0.0)] * 9 + [(5.0, 5.0)]
    return density.fit_kde(goals, 0.1), goals


def test_mega_selects_minimum_density_goal():
    model, goals = two_cluster_model()
    rng = np.random.default_rng(0)
    assert mega_select(goals, model, rng) == (5.0, 5.0)


def test_mega_empty_buffer_raises():
    model, _ = two_cluster_model()
    with pytest.raises(density.EmptyBufferError):
        mega_select([], model, np.random.default_rng(0))


def test_mega_tie_break_uniform():
    # all goals identical densities -> selection uniform over buffer entries
    goals = [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]
    model = density.fit_kde(goals, 0.4)
    rng = np.random.default_rng(1)
    counts = {g: 0 for g in goals}
    n = 10_000
    for _ in range(n):
        counts[mega_select(goals, model, rng)] += 1
    chi2 = stats.chisquare(list(counts.values()))
    assert chi2.pvalue > 0.01


def test_mega_subsampling_stays_in_low_density_tail():
    rng = np.random.default_rng(2)
    # 20k goals with density gradient: x ~ exponential-ish lattice
    xs = rng.normal(0, 1.0, size=20_000)
    goals = np.stack([xs, np.zeros_like(xs)], axis=1)
    model = density.fit_kde(goals[rng.choice(20_000, 5_000, replace=False)], 0.1)
    logp_full = density.log_density_many(model, goals)
    cutoff = np.quantile(logp_full, 0.01)
    picks_ok = 0
    trials = 20
    for _ in range(trials):
        g = mega_select(goals, model, rng)
        picks_ok += int(density.log_density_many(model, [g])[0] <= cutoff)
    assert picks_ok >= trials - 1


def test_mega_output_density_is_minimal_on_full_scan():
    model, goals = two_cluster_model()
    rng = np.random.default_rng(3)
    g = mega_select(goals, model, rng)
    logp = density.log_density_many(model, goals)
    assert density.log_density_many(model, [g])[0] <= logp.min() + 1e-12


def test_omega_alpha_values():
    assert omega_alpha(0.0, -3.0) == pytest.approx(1.0)
    assert omega_alpha(6.0, -3.0) == pytest.approx(1.0 / 3.0)
    assert omega_alpha(10.0, -3.0) == pytest.approx(1.0 / 7.0)


def test_omega_alpha_clamps_negative_kl():
    assert omega_alpha(-5.0, -3.0) == 1.0


def test_omega_alpha_monotone_and_bounded():
    kls = np.linspace(0, 50, 200)
    alphas = [omega_alpha(k, -3.0) for k in kls]
    assert all(0 < a <= 1 for a in alphas)
    assert all(a >= b for a, b in zip(alphas, alphas[1:]))


def test_omega_select_alpha_one_always_desired():
    model, goals = two_cluster_model()
    rng = np.random.default_rng(4)
    params = OmegaParams(b=-3.0, alpha=1.0)
    desired = lambda r: (9.0, 9.0)
    for _ in range(50):
        assert omega_select(params, desired, goals, model, rng) == (9.0, 9.0)


def test_omega_select_alpha_zero_is_mega():
    model, goals = two_cluster_model()
    rng = np.random.default_rng(5)
    params = OmegaParams(b=-3.0, alpha=0.0)
    desired = lambda r: (9.0, 9.0)
    for _ in range(20):
        assert omega_select(params, desired, goals, model, rng) == (5.0, 5.0)


def test_omega_select_mixture_frequency():
    model, goals = two_cluster_model()
    rng = np.random.default_rng(6)
    params = OmegaParams(b=-3.0, alpha=0.3)
    desired = lambda r: (9.0, 9.0)
    n = 10_000
    hits = sum(
        omega_select(params, desired, goals, model, rng) == (9.0, 9.0) for _ in range(n)
    )
    assert hits / n == pytest.approx(0.3, abs=0.02)


def test_kl_estimate_nonnegative_and_shrinks_with_overlap():
    rng = np.random.default_rng(7)
    desired = rng.normal((9.0, 9.0), 0.05, size=(256, 2))
    far = density.fit_kde(rng.normal((0.0, 0.0), 0.5, size=(500, 2)), 0.1)
    near = density.fit_kde(rng.normal((9.0, 9.0), 0.5, size=(500, 2)), 0.1)
    kl_far = kl_desired_vs_achieved(desired, far, 0.1)
    kl_near = kl_desired_vs_achieved(desired, near, 0.1)
    assert kl_far > kl_near >= 0.0


def test_skewfit_zero_exponent_uniform():
    goals = [(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)]
    model = density.fit_kde(goals, 0.3)
    rng = np.random.default_rng(8)
    counts = {g: 0 for g in goals}
    n = 9_000
    for _ in range(n):
        counts[skewfit_select(goals, model, 0.0, rng)] += 1
    assert stats.chisquare(list(counts.values())).pvalue > 0.01


def test_skewfit_matches_skew_weights_frequencies():
    # densities {0.2, 0.8} at exponent -1 -> sampling weights {0.8, 0.2}
    goals_fit = [(0.0, 0.0)] * 8 + [(1.0, 1.0)] * 2
    model = density.fit_histogram(goals_fit, 1.0)
    buffer_goals = [(1.0, 1.0), (0.0, 0.0)]
    rng = np.random.default_rng(9)
    n = 10_000
    first = sum(skewfit_select(buffer_goals, model, -1.0, rng) == (1.0, 1.0) for _ in range(n))
    assert first / n == pytest.approx(0.8, abs=0.02)


def test_skewfit_negative_exponent_oversamples_low_density():
    rng = np.random.default_rng(10)
    goals = np.concatenate([
        rng.normal(0.0, 0.3, size=(900, 2)),
        rng.normal(4.0, 0.3, size=(100, 2)),
    ])
    model = density.fit_kde(goals, 0.1)
    logp = density.log_density_many(model, goals)
    decile = np.quantile(logp, 0.1)
    picks = [skewfit_select(goals, model, -2.5, rng) for _ in range(400)]
    frac = np.mean([density.log_density_many(model, [g])[0] <= decile for g in picks])
    assert frac > 0.2  # well above the uniform 0.1 rate


def test_skewfit_empty_buffer_raises():
    model, _ = two_cluster_model()
    with pytest.raises(density.EmptyBufferError):
        skewfit_select([], model, -1.0, np.random.default_rng(0))


def test_uniform_select_covers_space():
    rng = np.random.default_rng(11)
    space = [(0, 0), (1, 0), (2, 0)]
    counts = {g: 0 for g in space}
    for _ in range(9_000):
        counts[uniform_select(space, rng)] += 1
    assert stats.chisquare(list(counts.values())).pvalue > 0.01


def test_goid_selects_intermediate_band():
    table = SuccessTable()
    for _ in range(10):
        table.record((0, 0), False)  # 0.0
    for _ in range(10):
        table.record((1, 0), True)  # 1.0
    for _ in range(5):
        table.record((2, 0), True)
    for _ in range(5):
        table.record((2, 0), False)  # 0.5
    rng = np.random.default_rng(12)
    for _ in range(20):
        assert goid_select(table, 0.25, 0.75, rng) == (2, 0)


def test_goid_mixed_band_rates():
    # estimates {0.1, 0.5, 0.9}: only the 0.5 bin falls inside [0.25, 0.75]
    table = SuccessTable()
    for i in range(10):
        table.record((0, 0), i < 1)
        table.record((1, 0), i < 5)
        table.record((2, 0), i < 9)
    rng = np.random.default_rng(13)
    for _ in range(20):
        assert goid_select(table, 0.25, 0.75, rng) == (1, 0)


def test_goid_fallback_closest_to_half():
    table = SuccessTable()
    for i in range(20):
        table.record((0, 0), i < 1)  # 0.05
    rng = np.random.default_rng(14)
    assert goid_select(table, 0.25, 0.75, rng) == (0, 0)


def test_goid_frequency_ordering():
    # estimates {0.3, 0.5, 0.7}: the 0.5 bin is sampled most often
    table = SuccessTable()
    for i in range(10):
        table.record((0, 0), i < 3)
        table.record((1, 0), i < 5)
        table.record((2, 0), i < 7)
    rng = np.random.default_rng(15)
    counts = {(0, 0): 0, (1, 0): 0, (2, 0): 0}
    for _ in range(10_000):
        counts[goid_select(table, 0.25, 0.75, rng)] += 1
    assert counts[(1, 0)] > counts[(0, 0)]
    assert counts[(1, 0)] > counts[(2, 0)]


def test_goid_never_leaves_band_when_nonempty():
    table = SuccessTable()
    for i in range(10):
        table.record((0, 0), i < 1)  # 0.1 outside
        table.record((1, 0), i < 4)  # 0.4 inside
        table.record((2, 0), i < 6)  # 0.6 inside
    rng = np.random.default_rng(16)
    for _ in range(200):
        assert goid_select(table, 0.25, 0.75, rng) in {(1, 0), (2, 0)}


def test_goid_empty_table_raises():
    with pytest.raises(density.EmptyBufferError):
        goid_select(SuccessTable(), 0.25, 0.75, np.random.default_rng(0))


def test_success_table_window_slides():
    table = SuccessTable(window=5)
    for _ in range(5):
        table.record((0, 0), False)
    for _ in range(5):
        table.record((1, 1), True)
    stats_now = table.estimates()
    assert (0, 0) not in stats_now
    assert stats_now[(1, 1)] == (5, 5)


def test_selectors_deterministic_given_stream():
    model, goals = two_cluster_model()
    a = skewfit_select(goals, model, -2.5, np.random.default_rng(42))
    b = skewfit_select(goals, model, -2.5, np.random.default_rng(42))
    assert a == b
