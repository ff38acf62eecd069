import logging
from fractions import Fraction

import numpy as np
import pytest

from abcengine import DEFAULT_WEIGHTS, Particle, PosteriorSet, Scoring, assign_pair, \
    default_hybrid_size, hybrid_depth, merge_hybrid, pairwise_comparison, pairwise_from_posteriors, \
    pairwise_matrix, posterior_summary, run_abc_rs, sample_posterior, score_particle, \
    score_particle_all, simulate_stochastic
from cfmodel import ModelParams
from models import MODELS, make_params
from priors import PriorBounds
from simulator import Rollout
from trajectory import Dataset

NULL_PRIORS = PriorBounds({"NULL": {"c": [0, 1]}})


def rollout_of(pair, offsets=(0.0, 0.0, 0.0), aborted=False):
    follower = pair.follower
    return Rollout(np.array([follower.positions + offsets[0]]),
                   np.array([follower.speeds + offsets[1]]),
                   np.array([follower.accelerations + offsets[2]]),
                   np.zeros(1, dtype=bool), np.zeros(1, dtype=bool), np.array([aborted]))


def bucketed(model_id, scores_by_pair, n_keep=None):
    """A posterior with the given scores, draw indices in listing order"""
    buckets, index = {}, 0
    for pair_id, scores in scores_by_pair.items():
        buckets[pair_id] = []
        for score in scores:
            buckets[pair_id].append(Particle(model_id, None, pair_id, float(score), index))
            index += 1
    n_keep = n_keep or max(len(scores) for scores in scores_by_pair.values())
    return PosteriorSet(model_id, n_keep, buckets)


def test_default_weights():
    assert DEFAULT_WEIGHTS == (0.5, 0.3, 0.2)
    assert Scoring().weights == DEFAULT_WEIGHTS


@pytest.mark.parametrize("weights", [(0.5, 0.5, 0.5), (1.2, -0.1, -0.1), (0.5, 0.5)])
def test_weights_must_be_a_convex_combination(weights):
    with pytest.raises(ValueError):
        Scoring(weights)


def test_identical_follower_scores_zero(make_pair):
    pair = make_pair()
    scoring = Scoring()
    assert scoring.combine(scoring.channel_norms(rollout_of(pair), pair))[0] == 0.0


def test_constant_position_offset_scores_its_weighted_size(make_pair):
    pair = make_pair()
    scoring = Scoring((0.5, 0.3, 0.2))
    norms = scoring.channel_norms(rollout_of(pair, (2.0, 0.0, 0.0)), pair)
    np.testing.assert_allclose(norms[0], [2.0, 0.0, 0.0])
    assert scoring.combine(norms)[0] == pytest.approx(1.0)
    mae = Scoring(norm="mae").channel_norms(rollout_of(pair, (0.0, -3.0, 0.0)), pair)
    np.testing.assert_allclose(mae[0], [0.0, 3.0, 0.0])


def test_aborted_roll_out_scores_infinity(make_pair):
    pair = make_pair()
    scoring = Scoring((1.0, 0.0, 0.0))
    assert scoring.combine(scoring.channel_norms(rollout_of(pair, aborted=True), pair))[0] == np.inf


def test_score_particle_of_a_perfect_and_a_lagging_follower(null_model, make_pair):
    particle = Particle("NULL", ModelParams("NULL", {"c": 0.0}))
    assert score_particle(particle, make_pair()) == 0.0
    # the observed follower accelerates at 0.5 while the null model cruises
    pair = make_pair(follower_accel=0.5, steps=101)
    t = 0.1 * np.arange(101)
    expected = 0.5 * np.sqrt(np.mean((0.25 * t ** 2) ** 2)) \
        + 0.3 * np.sqrt(np.mean((0.5 * t) ** 2)) + 0.2 * 0.5
    assert score_particle(particle, pair) == pytest.approx(expected, rel=1e-9)
    dataset = Dataset((make_pair("a"), pair))
    assert score_particle_all(particle, dataset, (1.0, 0.0, 0.0)) == pytest.approx(
        np.sqrt(np.mean((0.25 * t ** 2) ** 2)) / 2, rel=1e-9)


def test_assign_pair(make_pair):
    single = Dataset((make_pair("only", steps=5),))
    assert assign_pair(np.random.default_rng(0), single) == "only"
    dataset = Dataset(tuple(make_pair("p%d" % number, steps=5) for number in range(10)))
    first = [assign_pair(np.random.default_rng(3), dataset) for _ in range(3)]
    assert len(set(first)) == 1
    rng = np.random.default_rng(4)
    draws = [assign_pair(rng, dataset) for _ in range(100000)]
    for pair_id in dataset.pair_ids:
        assert 0.08 <= draws.count(pair_id) / len(draws) <= 0.12


def check_posterior(posterior, n_keep):
    for pair_id, bucket in posterior.buckets.items():
        scores = [particle.score for particle in bucket]
        assert len(bucket) <= n_keep
        assert scores == sorted(scores)
        assert all(np.isfinite(scores))
        if bucket:
            assert max(scores) <= posterior.rejected_floor[pair_id]
        assert all(particle.assigned_pair == pair_id for particle in bucket)


def test_run_abc_rs_keeps_the_best_per_pair(synth_dataset):
    dataset = synth_dataset("IDM", n_pairs=3, horizon=8.0)
    posterior = run_abc_rs("IDM", dataset, 300, 5, seed=9, batch_size=64)
    check_posterior(posterior, 5)
    assert sum(posterior.evaluated.values()) == 300
    assert len(posterior) == 15
    again = run_abc_rs("IDM", dataset, 300, 5, seed=9, batch_size=64)
    assert again.all_particles() == posterior.all_particles()
    other = run_abc_rs("IDM", dataset, 300, 5, seed=10, batch_size=64)
    assert other.all_particles() != posterior.all_particles()


def test_worker_count_does_not_change_the_posterior(synth_dataset):
    dataset = synth_dataset("OVM", n_pairs=2, horizon=5.0)
    serial = run_abc_rs("OVM", dataset, 256, 3, seed=1, batch_size=64, n_jobs=1)
    parallel = run_abc_rs("OVM", dataset, 256, 3, seed=1, batch_size=64, n_jobs=2)
    assert parallel.all_particles() == serial.all_particles()


def test_more_particles_never_worsen_a_bucket(synth_dataset):
    dataset = synth_dataset("LLCS", n_pairs=2, horizon=5.0)
    small = run_abc_rs("IDM", dataset, 128, 4, seed=2, batch_size=64)
    large = run_abc_rs("IDM", dataset, 256, 4, seed=2, batch_size=64)
    for pair_id in dataset.pair_ids:
        for kept_small, kept_large in zip(small.buckets[pair_id], large.buckets[pair_id]):
            assert kept_large.score <= kept_small.score


def test_without_rejection_pressure_every_particle_is_kept(null_model, make_pair):
    dataset = Dataset((make_pair("only", steps=20),))
    posterior = run_abc_rs("NULL", dataset, 5, 5, seed=0, priors=NULL_PRIORS, batch_size=2)
    assert len(posterior) == 5
    assert [particle.index for particle in posterior.all_particles()] == [0, 1, 2, 3, 4]
    assert all(particle.score == 0.0 for particle in posterior.all_particles())


def test_under_sampling_and_empty_buckets_are_logged(null_model, make_pair, caplog):
    dataset = Dataset((make_pair("a", steps=20), make_pair("b", steps=20)))
    with caplog.at_level(logging.WARNING):
        posterior = run_abc_rs("NULL", dataset, 4, 5, seed=0, priors=NULL_PRIORS,
                               threshold=-1.0)
    assert len(posterior) == 0
    assert "under-full" in caplog.text
    assert "no finite-scored particle" in caplog.text


def test_truncate_keeps_the_best_and_raises_the_floor():
    posterior = bucketed("IDM", {"a": [0.1, 0.2, 0.3], "b": [0.5]})
    truncated = posterior.truncate(1)
    assert [p.score for p in truncated.all_particles()] == [0.1, 0.5]
    assert truncated.rejected_floor == {"a": 0.2, "b": np.inf}
    with pytest.raises(ValueError):
        truncated.truncate(2)


def test_single_model_hybrid_is_the_truncated_posterior():
    posterior = bucketed("OVM", {"a": [1.0, 2.0, 3.0], "b": [0.5, 0.7, 0.9]}, n_keep=3)
    hybrid = merge_hybrid([posterior], n_hybrid=4)
    assert hybrid.shares == {"OVM": 1}
    assert list(hybrid.particles) == posterior.truncate(2).all_particles()


def test_dominating_model_takes_every_share():
    good = bucketed("GFM", {"a": [0.1, 0.2], "b": [0.3, 0.4]})
    bad = bucketed("MPC", {"a": [5.0, 6.0], "b": [7.0, 8.0]})
    hybrid = merge_hybrid([good, bad])
    assert len(hybrid) == default_hybrid_size(2, 2, 2) == 4
    assert hybrid.shares == {"GFM": Fraction(1), "MPC": Fraction(0)}
    assert pairwise_from_posteriors(bad, good) == (0, 1)


def test_hybrid_depth_lets_one_model_fill_the_quota():
    assert default_hybrid_size(8, 5, 30) == 600
    assert hybrid_depth(8, 5, 30) == 20
    assert hybrid_depth(2, 5, 30) == 5
    assert hybrid_depth(1, 5, 30) == 5
    assert hybrid_depth(8, 5, 30, n_hybrid=60) == 5


def test_deep_pools_let_a_dominating_model_take_the_hybrid():
    good = bucketed("GFM", {"a": [0.1, 0.2, 0.3, 0.4], "b": [0.5, 0.6, 0.7, 0.8]})
    others = [bucketed(model_id, {"a": [5.0 + step for step in range(4)],
                                  "b": [6.0 + step for step in range(4)]})
              for model_id in ("OVM", "IDM", "MPC")]
    pools = [good] + others
    assert hybrid_depth(4, 2, 2) == 4
    deep = merge_hybrid(pools, n_hybrid=default_hybrid_size(4, 2, 2))
    assert len(deep) == 8
    assert deep.shares["GFM"] == 1
    shallow = merge_hybrid([posterior.truncate(2) for posterior in pools])
    assert shallow.shares["GFM"] == Fraction(1, 2)


def test_short_pools_are_logged_and_the_actual_size_is_kept(caplog):
    posterior = bucketed("OVM", {"a": [1.0, 2.0], "b": [1.0]})
    with caplog.at_level(logging.WARNING):
        hybrid = merge_hybrid([posterior], n_hybrid=6)
    assert len(hybrid) == 3 and hybrid.n_hybrid == 3
    assert "exceeds the pooled particles of 2 pairs" in caplog.text
    with caplog.at_level(logging.WARNING):
        pooled = merge_hybrid([posterior], n_hybrid=6, mode="global")
    assert pooled.n_hybrid == 3
    assert "exceeds the 3 pooled particles" in caplog.text


def test_balanced_and_global_selection_differ():
    first = bucketed("OVM", {"a": [0.1, 0.2], "b": [5.0, 6.0]})
    second = bucketed("IDM", {"a": [0.3, 0.4], "b": [1.0, 2.0]})
    balanced = merge_hybrid([first, second], n_hybrid=4)
    assert balanced.shares == {"OVM": Fraction(1, 2), "IDM": Fraction(1, 2)}
    pooled = merge_hybrid([first, second], n_hybrid=4, mode="global")
    assert sorted(p.score for p in pooled.particles) == [0.1, 0.2, 0.3, 0.4]
    assert pooled.shares["OVM"] == Fraction(1, 2)
    assert sum(pooled.shares.values()) == 1


def test_quota_rounding_is_logged(caplog):
    posterior = bucketed("OVM", {"a": [1.0, 2.0], "b": [1.0, 2.0], "c": [1.0, 2.0]})
    with caplog.at_level(logging.INFO):
        hybrid = merge_hybrid([posterior], n_hybrid=5)
    assert hybrid.n_hybrid == 6 and len(hybrid) == 6
    assert "not a multiple" in caplog.text


def test_ties_break_by_model_order_then_draw_index():
    late = bucketed("IDM", {"a": [1.0]})
    early = bucketed("OVM", {"a": [1.0]})
    hybrid = merge_hybrid([late, early], n_hybrid=1)
    assert hybrid.particles[0].model_id == "OVM"


def test_pairwise_matrix_shares_are_complementary():
    posteriors = [bucketed(model_id, {"a": [0.1 * (rank + 1) + 0.01 * step for step in range(3)],
                                      "b": [1.0 / (rank + 1) + 0.01 * step for step in range(3)]})
                  for rank, model_id in enumerate(MODELS)]
    shares = pairwise_matrix(posteriors)
    assert len(shares) == 2 * 28
    for (row, col), share in shares.items():
        assert share + shares[(col, row)] == 1
        assert 0 <= share <= 1
    hybrid = merge_hybrid(posteriors)
    assert sum(hybrid.shares.values()) == 1


def test_each_model_enters_a_hybrid_once():
    posterior = bucketed("OVM", {"a": [1.0]})
    with pytest.raises(ValueError):
        merge_hybrid([posterior, posterior])


def test_sample_posterior():
    single = bucketed("OVM", {"a": [1.0]})
    assert sample_posterior(single, np.random.default_rng(0)) is single.buckets["a"][0]
    with pytest.raises(ValueError):
        sample_posterior(bucketed("OVM", {"a": []}, n_keep=1), np.random.default_rng(0))
    posterior = bucketed("OVM", {"a": [1.0, 2.0], "b": [3.0, 4.0]})
    first = [sample_posterior(posterior, np.random.default_rng(8)).index for _ in range(2)]
    assert first[0] == first[1]
    rng = np.random.default_rng(6)
    counts = np.bincount([sample_posterior(posterior, rng).index for _ in range(100000)])
    assert np.all(np.abs(counts / 100000 - 0.25) < 0.01)


def test_stochastic_reproduction(null_model, make_pair):
    pair = make_pair(steps=20)
    posterior = PosteriorSet("NULL", 1, {pair.pair_id: [
        Particle("NULL", ModelParams("NULL", {"c": 0.5}), pair.pair_id, 0.0, 0)]})
    particle, simulated = simulate_stochastic(posterior, pair, np.random.default_rng(0))
    assert particle.index == 0
    np.testing.assert_allclose(simulated.portfolio.positions, pair.follower.positions, atol=1e-9)


def test_posterior_summary():
    particles = [Particle("LLCS", make_params("LLCS", {"s0": s0, "k_s": 1.0, "k_v": 2.0}), "a", 0.0, i)
                 for i, s0 in enumerate([10.0, 20.0])]
    summary = posterior_summary(PosteriorSet("LLCS", 2, {"a": particles}))
    s0 = summary.set_index("parameter").loc["s0"]
    assert s0["count"] == 2 and s0["mean"] == 15.0 and s0["std"] == 5.0
    assert list(summary["parameter"]) == ["s0", "k_s", "k_v"]


def test_pairwise_comparison_of_two_models(synth_dataset):
    dataset = synth_dataset("IDM", n_pairs=2, horizon=4.0)
    share_a, share_b = pairwise_comparison("OVM", "IDM", dataset, 100, 2, 5, batch_size=50)
    assert share_a + share_b == 1
    assert (share_b, share_a) == pairwise_comparison("IDM", "OVM", dataset, 100, 2, 5, batch_size=50)
    with pytest.raises(ValueError):
        pairwise_comparison("IDM", "IDM", dataset, 100, 2, 5)
