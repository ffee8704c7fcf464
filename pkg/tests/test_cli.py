import dataclasses
import json
import xml.dom.minidom

import numpy as np
import pytest

import uedmaze.oracle as oracle
from uedmaze.cli import main
from uedmaze.config import RunConfig, dump_config, load_preset, parse_config
from uedmaze.env import ACTION_FORWARD, NUM_ACTIONS
from uedmaze.errors import ConfigError
from uedmaze.harness import (
    emit_report,
    evaluate_policy,
    load_buffer_snapshot,
    load_checkpoint,
    load_suite,
    run_experiment,
    save_buffer_snapshot,
)
from uedmaze.levels import Level
from uedmaze.nn import FlatParams

DESK_MICRO = dict(
    grid_width=7,
    grid_height=7,
    max_episode_steps=20,
    max_blocks=6,
    dir_embed_dim=2,
    trunk_hidden=(12,),
    head_hidden=(8,),
    dynamics_hidden=(12,),
    rollout_length=16,
    ppo_epochs=1,
    num_workers=2,
    buffer_size=8,
    batch_size=2,
    num_mutations=1,
    total_updates=8,
    eval_episodes=2,
)


def micro_config(**overrides):
    return RunConfig(**{**DESK_MICRO, **overrides})


# ---------------------------------------------------------------------------
# configuration


def test_config_round_trip():
    cfg = micro_config(seed=5, mode="accel", temperature=0.7)
    assert parse_config(dump_config(cfg)) == cfg


def test_presets_parse_and_differ():
    full = load_preset("full15")
    desk = load_preset("desk11")
    assert full.grid_width == 15 and full.buffer_size == 4000
    assert desk.grid_width == 11 and desk.num_mutations < desk.batch_size
    assert full.gamma == desk.gamma == 0.995


def test_unknown_keys_and_sections_rejected():
    with pytest.raises(ConfigError):
        parse_config("[run]\nmode = traced\nbogus = 1\n")
    with pytest.raises(ConfigError):
        parse_config("[nosuch]\nmode = traced\n")
    with pytest.raises(ConfigError):
        parse_config("[ppo]\ngamma = not_a_number\n")


def test_validation_catches_bad_values():
    with pytest.raises(ConfigError):
        parse_config("[run]\nmode = bogus\n")
    with pytest.raises(ConfigError):
        parse_config("[env]\ngrid_width = 8\n")  # must be odd
    with pytest.raises(ConfigError):
        parse_config("[teacher]\nreplay_rate = 1.5\n")
    with pytest.raises(ConfigError):
        parse_config("[ppo]\nreturn_normalization = true\n")
    with pytest.raises(ConfigError):
        parse_config("[teacher]\nbatch_size = 10\nbuffer_size = 4\n")
    with pytest.raises(ConfigError):
        parse_config("[env]\nmin_blocks = 30\nmax_blocks = 20\n")


# ---------------------------------------------------------------------------
# run artifacts


@pytest.fixture(scope="module")
def micro_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("runs") / "micro"
    cfg = micro_config(seed=11, eval_suite="desk11", checkpoint_every=4, eval_every=4)
    summary = run_experiment(cfg, out)
    return cfg, out, summary


def test_run_writes_all_artifacts(micro_run):
    cfg, out, summary = micro_run
    for name in ("config.ini", "logs.csv", "eval_final.json", "checkpoint_final.json", "buffer.json", "summary.json"):
        assert (out / name).exists(), name
    assert (out / "checkpoint_000004.json").exists()
    assert (out / "eval_000004.json").exists()
    assert summary["updates"] == cfg.total_updates
    header = (out / "logs.csv").read_text().splitlines()[0]
    assert header == "t,phase,task_id,pvl,atpl,combined,colearnability,priority_prob,shortest_path_len,num_blocks"


def test_config_echo_reparses_to_same_config(micro_run):
    cfg, out, _ = micro_run
    assert parse_config((out / "config.ini").read_text()) == cfg


def test_checkpoint_round_trip(micro_run):
    cfg, out, _ = micro_run
    loaded_cfg, student, predictor, update = load_checkpoint(out / "checkpoint_final.json")
    assert loaded_cfg == cfg
    assert update == cfg.total_updates
    assert student.params.theta.shape == (student.policy.net.size,)
    assert predictor.params.theta.shape == (predictor.model.net.size,)
    assert np.all(np.isfinite(student.params.theta))


def test_checkpoint_rejects_unknown_version(micro_run, tmp_path):
    _, out, _ = micro_run
    data = json.loads((out / "checkpoint_final.json").read_text())
    data["format_version"] = 999
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(data))
    with pytest.raises(ValueError):
        load_checkpoint(bad)


def test_buffer_snapshot_round_trip(micro_run, tmp_path):
    cfg, out, _ = micro_run
    state = load_buffer_snapshot(out / "buffer.json", cfg, cfg.mode)
    assert len(state.buffer) >= 1
    again = tmp_path / "again.json"
    save_buffer_snapshot(again, state)
    assert json.loads(again.read_text()) == json.loads((out / "buffer.json").read_text())


def test_report_outputs_are_well_formed(micro_run):
    _, out, _ = micro_run
    result = emit_report(out, window=2)
    for name in ("complexity.csv", "solved_rate.csv", "complexity.svg", "solved_rate.svg"):
        path = out / "report" / name
        assert path.exists(), name
        if name.endswith(".svg"):
            xml.dom.minidom.parse(str(path))  # raises on malformed XML
    lines = (out / "report" / "complexity.csv").read_text().splitlines()
    assert lines[0] == "window,t_start,t_end,replay_rows,mean_shortest_path,mean_num_blocks"
    assert result["window"] == 2


# ---------------------------------------------------------------------------
# evaluation


class ScriptedForward:
    """Always walks forward; stands in for a policy network in evaluation."""

    def forward(self, theta, obs):
        n = len(obs)
        logits = np.zeros((n, NUM_ACTIONS))
        logits[:, ACTION_FORWARD] = 50.0
        return logits, np.zeros(n), None


def test_scripted_optimal_policy_solves_a_corridor():
    level = Level(5, 5, frozenset(), (1, 1), 1, (3, 1)).validate()
    report = evaluate_policy(
        ScriptedForward(),
        FlatParams(np.zeros(1)),
        [("corridor", level)],
        episodes=4,
        max_episode_steps=30,
        rng=np.random.default_rng(0),
        greedy=True,
    )
    assert report["levels"]["corridor"]["solved_rate"] == 1.0
    assert report["levels"]["corridor"]["mean_return"] == pytest.approx(1 - 2 / 30)
    assert report["aggregate_solved_rate"] == 1.0


def test_forward_only_policy_fails_a_blocked_corridor():
    level = Level(5, 5, frozenset({(2, 1)}), (1, 1), 1, (3, 1)).validate()
    report = evaluate_policy(
        ScriptedForward(),
        FlatParams(np.zeros(1)),
        [("blocked", level)],
        episodes=2,
        max_episode_steps=10,
        rng=np.random.default_rng(0),
        greedy=True,
    )
    assert report["levels"]["blocked"]["solved_rate"] == 0.0


def test_bundled_suites_load_and_validate():
    for name, expected_size in (("desk11", 11), ("full15", 15)):
        suite = load_suite(name)
        assert len(suite) == 6
        for _, level in suite:
            level.validate()
            assert level.width == expected_size


def test_missing_suite_raises_config_error():
    with pytest.raises(ConfigError):
        load_suite("nonexistent-suite")


# ---------------------------------------------------------------------------
# command line


def test_cli_run_and_report(tmp_path, capsys):
    cfg_path = tmp_path / "micro.ini"
    cfg_path.write_text(dump_config(micro_config(seed=2, eval_episodes=1)))
    out = tmp_path / "run"
    assert main(["run", "--config", str(cfg_path), "--out", str(out), "--updates", "6"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["updates"] == 6
    assert main(["report", str(out)]) == 0
    assert (out / "report" / "complexity.svg").exists()
    capsys.readouterr()


def test_cli_mode_override_is_recorded(tmp_path, capsys):
    cfg_path = tmp_path / "micro.ini"
    cfg_path.write_text(dump_config(micro_config(seed=2)))
    out = tmp_path / "dr-run"
    assert main(["run", "--config", str(cfg_path), "--out", str(out), "--mode", "dr", "--updates", "4"]) == 0
    echoed = parse_config((out / "config.ini").read_text())
    assert echoed.mode == "dr"
    assert json.loads((out / "summary.json").read_text())["phase_counts"] == {"dr": 4}
    capsys.readouterr()


def test_cli_evaluate_reads_checkpoints(tmp_path, capsys):
    cfg_path = tmp_path / "micro.ini"
    cfg_path.write_text(dump_config(micro_config(seed=4, eval_episodes=1)))
    out = tmp_path / "run"
    main(["run", "--config", str(cfg_path), "--out", str(out), "--updates", "5"])
    capsys.readouterr()
    report_path = tmp_path / "eval.json"
    code = main(
        [
            "evaluate",
            "--checkpoint",
            str(out / "checkpoint_final.json"),
            "--episodes",
            "1",
            "--greedy",
            "--out",
            str(report_path),
        ]
    )
    assert code == 0
    printed = capsys.readouterr().out
    report = json.loads(report_path.read_text())
    assert report == json.loads(printed)
    assert report["greedy"] is True
    assert set(report["levels"]) == {n for n, _ in load_suite("desk11")}


def test_cli_bad_config_exits_2(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[run]\nmode = bogus\n")
    assert main(["run", "--config", str(bad)]) == 2
    assert main(["run", "--config", "not-a-preset"]) == 2
    err = capsys.readouterr().err
    assert "config error" in err


def test_cli_verify_passes(capsys):
    assert main(["verify"]) == 0
    out = capsys.readouterr().out
    assert "all 7 checks passed" in out
    assert out.count("PASS") == 7


def test_cli_verify_fails_on_broken_oracle(monkeypatch, capsys):
    healthy = oracle.naive_pvl
    monkeypatch.setattr(oracle, "naive_pvl", lambda d, g, l: -healthy(d, g, l))
    assert main(["verify"]) == 1
    out = capsys.readouterr().out
    assert "FAIL" in out and "gae_pvl_vs_naive_oracle" in out
