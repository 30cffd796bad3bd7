import math
from dataclasses import replace

import numpy as np
import pytest

from topospec import drift, metrics, sim
from topospec.drift import NoiseSpec
from topospec.sim import SimConfig
from topospec.task import DEFAULT_INITIAL, TaskState, tau, trajectory

S = TaskState(50.0, "A", 3)


def cfg(**kw):
    kw.setdefault("seed", 7)
    kw.setdefault("trials", 20)
    return SimConfig(**kw)


def test_run_agent_noiseless():
    assert sim.run_agent(S, NoiseSpec(sigma=0), np.random.default_rng(0)) == tau(S)


def test_run_agent_recorded_draw():
    out = sim.run_agent(S, NoiseSpec(sigma=1.0), np.random.default_rng(123))
    z = np.random.default_rng(123).standard_normal(2)  # systemic (zero weight), then idiosyncratic
    assert out.value == tau(S).value + z[1]
    assert (out.parity, out.level) == (tau(S).parity, tau(S).level)


def test_fully_systemic_noise_is_shared():
    c = cfg(topology="star", noise=NoiseSpec(sigma=1.0, rho_c=1.0))
    r = sim.run_trial(c, 0)
    assert all(d == 0 for d in r.disagreement)
    m = cfg(topology="mesh", noise=NoiseSpec(sigma=1.0, rho_c=1.0))
    assert all(d == 0 for d in sim.run_trial(m, 0).disagreement)


def test_config_validation():
    with pytest.raises(Exception):
        SimConfig(topology="ring")
    with pytest.raises(Exception):
        SimConfig(trials=0)
    with pytest.raises(Exception):
        SimConfig(epsilon=-1)
    with pytest.raises(Exception):
        SimConfig(topology="star", agents=1)
    assert SimConfig(topology="chain", agents=9).agents == 1
    assert SimConfig(topology="mesh").agents == 4


def test_config_dict_round_trip_and_hash():
    c = cfg(topology="star", noise=NoiseSpec(sigma=0.5, rho_c=0.2))
    assert SimConfig.from_dict(c.to_dict()) == c
    assert c.config_hash() == SimConfig.from_dict(c.to_dict()).config_hash()
    assert c.config_hash() != replace(c, seed=8).config_hash()
    with pytest.raises(Exception):
        SimConfig.from_dict({"bogus": 1})


@pytest.mark.parametrize("topology", sim.TOPOLOGIES)
def test_trial_runners_check_topology(topology):
    runners = {"chain": sim.run_chain_trial, "star": sim.run_star_trial, "mesh": sim.run_mesh_trial}
    c = cfg(topology=topology)
    rec = runners[topology](c, np.random.default_rng(0))
    assert len(rec.truth) == c.steps + 1
    other = [t for t in sim.TOPOLOGIES if t != topology][0]
    with pytest.raises(Exception):
        runners[other](c, np.random.default_rng(0))


def test_noiseless_collapse():
    truth = trajectory(DEFAULT_INITIAL, 12)
    moved = trajectory(DEFAULT_INITIAL.with_value(65.0), 12)
    expected_fps = abs(moved[-1].value - truth[-1].value)
    for t in sim.TOPOLOGIES:
        b = sim.run_batch(cfg(topology=t, noise=NoiseSpec(sigma=0.0)))
        assert b.summary["E_ceg"] == {"mean": 0.0, "std": 0.0}
        assert b.summary["R_cdr"] == {"mean": 0.0, "std": 0.0}
        assert b.summary["F_ps"]["mean"] == pytest.approx(expected_fps, abs=1e-9)
        assert all(r.estimate == r.truth for r in b.records)


def test_chain_disagreement_is_tracking_error():
    r = sim.run_trial(cfg(topology="chain"), 3)
    np.testing.assert_array_equal(r.disagreement, r.errors())


def test_star_disagreement_is_leaf_spread():
    c = cfg(topology="star")
    rng = sim.trial_rng(c.seed, 0)
    draws = sim._draw_trial_noise(c, rng)
    r = sim.run_trial(c, 0)
    # leaves share the same rule output, so their spread is the spread of the draws
    for t in range(c.steps):
        assert r.disagreement[t] == pytest.approx(metrics.pairwise_disagreement(draws.eta1[t]), abs=1e-9)


def test_reproducible():
    c = cfg(topology="mesh", trials=30)
    a, b = sim.run_batch(c), sim.run_batch(c)
    assert a.records == b.records and a.summary == b.summary and a.median_series == b.median_series


def test_parallel_matches_serial(monkeypatch):
    monkeypatch.delenv(sim.THREADS_ENV, raising=False)
    c = cfg(topology="star", trials=12)
    assert sim.run_batch(c, workers=3).records == sim.run_batch(c, workers=1).records


def test_threads_env_caps_workers(monkeypatch):
    monkeypatch.setenv(sim.THREADS_ENV, "2")
    assert sim.resolve_workers(8) == 2
    assert sim.resolve_workers() == 2
    monkeypatch.delenv(sim.THREADS_ENV)
    assert sim.resolve_workers() == 1


def test_single_trial_batch():
    b = sim.run_batch(cfg(trials=1))
    assert len(b.records) == 1
    assert b.summary["E_ceg"]["std"] == 0.0


def test_trial_streams_depend_only_on_seed_and_index():
    c = cfg(topology="star", trials=10)
    b = sim.run_batch(c)
    assert b.records[4] == sim.run_trial(replace(c, trials=50), 4)


def test_common_random_numbers_at_zero_noise():
    vals = {
        sim.run_batch(cfg(noise=NoiseSpec(sigma=0.0), seed=s, trials=n)).summary["F_ps"]["mean"]
        for s in (0, 1, 99) for n in (1, 5)
    }
    assert len(vals) == 1


def test_perturbed_twin_shares_noise():
    # with the identity rule the twin is the base path shifted by epsilon exactly
    c = cfg(topology="star", rule="identity", epsilon=15.0)
    for r in sim.run_batch(c).records:
        assert r.perturbed_final - r.estimate[-1] == pytest.approx(15.0, abs=1e-9)


def _step_variance(topology, **kw):
    c = SimConfig(topology=topology, rule="identity", steps=1, trials=4000, seed=11, **kw)
    b = sim.run_batch(c)
    return np.var([r.estimate[1] - r.truth[1] for r in b.records])


def test_star_mean_divides_variance_by_k():
    assert _step_variance("star") == pytest.approx(0.25, rel=0.1)
    assert _step_variance("chain") == pytest.approx(1.0, rel=0.1)


def test_mesh_step_variance():
    assert _step_variance("mesh", mesh_round2_scale=0.0) == pytest.approx(0.25, rel=0.1)
    assert _step_variance("mesh") == pytest.approx(0.25 + 0.1 / 4, rel=0.1)


def test_uniform_noise_has_requested_variance():
    assert _step_variance("chain", noise=NoiseSpec(sigma=2.0, distribution="uniform")) == pytest.approx(4.0, rel=0.1)


def test_median_aggregator():
    c = cfg(topology="star", aggregator="median", trials=5)
    assert len(sim.run_batch(c).records) == 5


def test_judge_majority_and_tie():
    cur = TaskState(50.0, "A", 3)
    props = [TaskState(70.0, "B", 2), TaskState(70.2, "B", 2), TaskState(69.8, "A", 2)]
    out = sim.judge(props, cur)
    assert (out.value, out.parity, out.level) == (pytest.approx(70.0), "B", 2)
    tie = [TaskState(71.0, "B", 2), TaskState(68.0, "A", 5)]
    out = sim.judge(tie, cur)
    # mean 69.5 < 70 -> A; level recomputed from Rule 3 with V >= 60 -> 3 + 2
    assert (out.parity, out.level) == ("A", 5)


def test_categorical_flips():
    c = cfg(topology="star", p_flip=1.0, trials=3)
    r = sim.run_batch(c).records[0]
    assert len(r.categorical_disagreement) == c.steps
    noflip = sim.run_batch(cfg(topology="star", trials=3)).records[0]
    assert all(x == 0 for x in noflip.categorical_disagreement)


def test_median_series_shapes():
    b = sim.run_batch(cfg(topology="chain", trials=15))
    for key in ("error", "cumulative_error", "disagreement"):
        assert len(b.median_series[key]) == 12
    assert all(np.diff(b.median_series["cumulative_error"]) >= 0)


# Monte-Carlo checks on the identity surrogate, where the rule is exactly
# Lipschitz-1 and the affine-noise assumptions hold by construction.

def _mean_ceg(topology, rule="identity", trials=2000, **kw):
    c = SimConfig(topology=topology, rule=rule, trials=trials, seed=42, **kw)
    return sim.run_batch(c).summary["E_ceg"]["mean"]


@pytest.mark.slow
def test_surrogate_sqrt_k_ratio():
    chain = _mean_ceg("chain")
    assert 1.8 <= chain / _mean_ceg("star") <= 2.2
    assert 1.8 <= chain / _mean_ceg("mesh", mesh_round2_scale=0.0) <= 2.2


@pytest.mark.slow
def test_surrogate_time_scaling_matches_random_walk_oracle():
    Ts = [4, 8, 16, 32]
    # E|e_t| = sqrt(2t/pi) for a Gaussian random walk
    oracle = [sum(math.sqrt(2 * t / math.pi) for t in range(1, T + 1)) for T in Ts]
    sims = [_mean_ceg("chain", steps=T) for T in Ts]
    np.testing.assert_allclose(sims, oracle, rtol=0.05)
    assert abs(drift.loglog_slope(Ts, sims) - drift.loglog_slope(Ts, oracle)) < 0.05
    assert abs(drift.loglog_slope(Ts, sims) - 1.5) < 0.1


@pytest.mark.slow
def test_surrogate_correlation_kill_switch():
    n = NoiseSpec(sigma=1.0, rho_c=1.0)
    assert 0.9 <= _mean_ceg("chain", noise=n) / _mean_ceg("star", noise=n) <= 1.1


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="the exact rule scales as T**1.76, so a T**1.5 fit misses T = 12 by 15.1%")
def test_exact_rule_calibrated_prediction_at_twelve_steps():
    Ts = [4, 8, 16, 32]
    c = drift.fit_calibration(Ts, [_mean_ceg("chain", "exact", 1000, steps=T) for T in Ts], 1.0)
    observed = _mean_ceg("chain", "exact", 1000, steps=12)
    assert abs(observed / drift.predict_ceg(1.0, 1, 12, c) - 1) <= 0.15
