"""Batch harness: scenarios, episode logs, error detection, ROC plumbing."""

import json

import numpy as np
import pytest

from tomcom.harness import (
    EpisodeSpec,
    HarnessParams,
    InjectionSpec,
    RocPoint,
    _fire_ticks_dev,
    _fire_ticks_threshold,
    _fire_ticks_tomcom,
    auc,
    detect_errors,
    error_windows,
    generate_scenarios,
    log_bytes,
    read_log,
    report,
    run_episode,
    write_log,
)

FAST = HarnessParams(tracker_samples=32, comm_rollouts=4, comm_horizon=4, n_rollout_samples=4)


def test_generate_scenarios_is_deterministic(reduced):
    a = generate_scenarios(reduced, 5, ticks=40, seed=3)
    b = generate_scenarios(reduced, 5, ticks=40, seed=3)
    assert [s.to_json() for s in a] == [s.to_json() for s in b]
    assert all(s.ticks == 40 for s in a)
    assert len({s.seed for s in a}) == 5
    for s in a:
        assert all(j.onset_tick < 40 for j in s.injections)


def test_episode_spec_json_roundtrip():
    spec = EpisodeSpec(7, 3, 50, [InjectionSpec("recipe_salmon_nigiri", 1, 4)])
    assert EpisodeSpec.from_json(spec.to_json()).to_json() == spec.to_json()


def test_run_episode_rejects_unknown_concept(reduced):
    with pytest.raises(ValueError):
        run_episode(reduced, EpisodeSpec(0, 0, 1), "wizard", FAST)


def test_run_episode_log_shape(reduced):
    spec = EpisodeSpec(seed=1, order_seed=1, ticks=8)
    log = run_episode(reduced, spec, "none", FAST)
    assert log["meta"]["concept"] == "none"
    assert len(log["ticks"]) == 8
    rec = log["ticks"][0]
    assert set(rec) == {
        "tick", "state", "attention", "human_action", "robot_action",
        "human_degraded", "plan_delta", "served", "comm", "proposal",
        "diagnostics", "injections_active",
    }
    assert {"orders_served", "signals", "errors"} <= set(log["summary"])


def test_run_episode_is_byte_deterministic(reduced):
    spec = EpisodeSpec(seed=2, order_seed=2, ticks=6, injections=[InjectionSpec("recipe_salmon_nigiri", 1, 1)])
    for concept in ("none", "tomcom", "tom_threshold", "dev"):
        a = run_episode(reduced, spec, concept, FAST)
        b = run_episode(reduced, spec, concept, FAST)
        assert log_bytes(a) == log_bytes(b), concept


def test_log_file_roundtrip(tmp_path, reduced):
    log = run_episode(reduced, EpisodeSpec(0, 0, 5), "none", FAST)
    path = tmp_path / "ep.jsonl"
    write_log(log, path)
    back = read_log(path)
    assert log_bytes(back) == log_bytes(log)
    # line-delimited JSON with self-describing records
    lines = path.read_text().splitlines()
    kinds = [json.loads(l)["type"] for l in lines]
    assert kinds[0] == "meta" and kinds[-1] == "summary"
    assert kinds.count("tick") == 5


def test_detect_errors_attributes_injected_mistakes(reduced):
    spec = EpisodeSpec(
        seed=5, order_seed=0, ticks=25,
        injections=[InjectionSpec("recipe_salmon_nigiri", 1, 2)],
    )
    log = run_episode(reduced, spec, "none", FAST)
    errors, sequences = detect_errors(reduced, log)
    for e in errors:
        assert e.plan_delta > 0
        assert e.cause in ("inj0", "unattributed")
    for s in sequences:
        assert s.first_error_tick <= s.last_error_tick
        assert s.length >= 1
    # windows nest inside the episode and start no later than the first error
    for lo, hi in error_windows(reduced, log):
        assert 0 <= lo <= hi < spec.ticks


def test_injection_free_episodes_have_few_errors(reduced):
    total_errors = 0
    total_actions = 0
    for seed in range(5):
        log = run_episode(reduced, EpisodeSpec(seed, seed, 40), "none", FAST)
        errors, _ = detect_errors(reduced, log)
        total_errors += len(errors)
        total_actions += sum(
            1 for r in log["ticks"] if not r["human_action"].startswith("human:noop")
        )
    assert total_errors / total_actions < 0.02


def test_fire_tick_extremes_anchor_the_roc():
    trace = {"max_dev": [0.9] * 10, "benefit": [5.0] * 10, "error_ticks": list(range(10)), "n_ticks": 10}
    assert _fire_ticks_tomcom(trace, cost=1e9, gate=0.45, cooldown=3) == set()
    assert _fire_ticks_tomcom(trace, cost=0.0, gate=0.45, cooldown=3) == set(range(10))
    assert _fire_ticks_threshold(trace, 0.4, 1) == set(range(10))
    assert _fire_ticks_threshold(trace, 0.99, 1) == set()
    quiet = {"max_dev": [0.0] * 10, "benefit": [0.0] * 10, "error_ticks": [], "n_ticks": 10}
    assert _fire_ticks_threshold(quiet, 0.4, 3) == set()
    assert _fire_ticks_dev(quiet, 3) == set()
    assert _fire_ticks_dev(trace, 1) == set(range(10))


def test_auc_anchors_and_ordering():
    # a single perfect point gives area ~1; a diagonal point gives 0.5
    perfect = [RocPoint("x", 1.0, 1.0, 0.0, 1)]
    assert auc(perfect) == pytest.approx(1.0)
    diagonal = [RocPoint("x", 1.0, 0.5, 0.5, 1)]
    assert auc(diagonal) == pytest.approx(0.5)
    assert auc([]) == pytest.approx(0.5)


def test_report_writes_tables_and_histogram_conserves_counts(tmp_path, reduced):
    logs = [run_episode(reduced, EpisodeSpec(s, s, 15), "none", FAST) for s in range(2)]
    result = report(reduced, {"none": logs}, None, tmp_path)
    assert (tmp_path / "summary.csv").exists()
    assert (tmp_path / "summary.json").exists()
    row = result["conditions"]["none"]
    assert row["episodes"] == 2
    hist = (tmp_path / "sequence_lengths.csv").read_text().splitlines()[1:]
    counted = sum(int(line.split(",")[2]) for line in hist)
    assert counted == row["sequences"]


def test_report_rejects_empty_batch(tmp_path, reduced):
    with pytest.raises(ValueError, match="empty batch"):
        report(reduced, {}, None, tmp_path)
