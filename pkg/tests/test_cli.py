import json

import pytest

from beamra.cli import main
from beamra.config import ConfigError, RunConfig, load_config

SMALL = {"lambda_total": 30.0, "rho": 2.0, "hidden": [8, 8], "batch_size": 8,
         "replay_capacity": 64}


def _write(path, data):
    path.write_text(json.dumps(data))
    return str(path)


def test_empty_file_gives_defaults(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("")
    cfg = load_config(p)
    assert cfg == RunConfig()
    assert (cfg.epsilon_min, cfg.epsilon_decay, cfg.learning_rate) == (0.01, 0.99, 0.001)
    assert (cfg.replay_capacity, cfg.batch_size, cfg.target_sync, cfg.discount) == (1200, 64, 16, 1.0)
    assert (cfg.p_t_dbm, cfg.g_r_dbi, cfg.sigma_shadow_db, cfg.gamma_db, cfg.n_preambles) == (23, 18, 8, -110, 48)


def test_override_one_key(tmp_path):
    cfg = load_config(_write(tmp_path / "c.json", {"gamma_db": 3.0}))
    assert cfg.gamma_db == 3.0
    assert cfg.replace(gamma_db=-110.0) == RunConfig()


@pytest.mark.parametrize("data, match", [
    ({"epsilon_decay": 1.5}, "epsilon_decay"),
    ({"not_a_key": 1}, "not_a_key"),
    ({"batch_size": 2.5}, "batch_size"),
    ({"rho": -1.0}, "rho"),
    ({"action_space": [[{"phi_rad": 0.0, "theta_rad": 1.0}]]}, "C1"),
])
def test_invalid_configs_named(tmp_path, data, match):
    with pytest.raises(ConfigError, match=match):
        load_config(_write(tmp_path / "c.json", data))


def test_cli_flags_beat_file(tmp_path):
    cfg = load_config(_write(tmp_path / "c.json", {"seed": 4}), {"seed": 9, "episodes": None})
    assert cfg.seed == 9


def test_action_space_file_is_inlined(tmp_path):
    from beamra.geometry import builtin_action_space
    _write(tmp_path / "a.json", builtin_action_space().to_json())
    cfg = load_config(_write(tmp_path / "c.json", {"action_space": "a.json"}))
    assert isinstance(cfg.action_space, list) and len(cfg.action_space) == 3


def _run(args):
    return main([str(a) for a in args])


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_train_evaluate_compare_reproducible(tmp_path):
    conf = _write(tmp_path / "c.json", SMALL)
    outs = []
    for k in range(2):
        t = tmp_path / f"train{k}"
        assert _run(["train", "--config", conf, "--seed", 5, "--episodes", 4, "--out", t]) == 0
        c = tmp_path / f"cmp{k}"
        assert _run(["compare", "--config", conf, "--seed", 5, "--episodes", 6,
                     "--checkpoint", t / "checkpoint.json", "--out", c]) == 0
        outs.append((_files(t), _files(c)))
    assert outs[0] == outs[1]
    train_files, cmp_files = outs[0]
    assert set(train_files) == {"config.json", "checkpoint.json", "training_log.csv",
                                "loss_curve.csv", "action_value_curve.csv"}
    assert {"comparison.csv", "config.json", "delay_stats_static.json", "cdf_ddqn.csv"} <= set(cmp_files)
    # re-running from the echoed config reproduces the run
    echoed = tmp_path / "train0" / "config.json"
    t2 = tmp_path / "again"
    assert _run(["train", "--config", echoed, "--out", t2]) == 0
    assert _files(t2) == train_files


def test_evaluate_static_needs_no_checkpoint(tmp_path, capsys):
    conf = _write(tmp_path / "c.json", SMALL)
    assert _run(["evaluate", "--config", conf, "--scheme", "static", "--episodes", 3,
                 "--out", tmp_path / "e"]) == 0
    assert "Static-BE" in capsys.readouterr().out
    assert (tmp_path / "e" / "delay_stats_static.json").exists()


def test_evaluate_ddqn_without_checkpoint_fails(tmp_path, capsys):
    assert _run(["evaluate", "--scheme", "ddqn", "--out", tmp_path]) == 1
    assert "checkpoint" in capsys.readouterr().err


def test_checkpoint_shape_mismatch(tmp_path, capsys):
    conf = _write(tmp_path / "c.json", SMALL)
    t = tmp_path / "t"
    assert _run(["train", "--config", conf, "--episodes", 1, "--out", t]) == 0
    other = _write(tmp_path / "o.json", {**SMALL, "hidden": [4]})
    assert _run(["evaluate", "--config", other, "--scheme", "ddqn", "--checkpoint",
                 t / "checkpoint.json", "--out", tmp_path / "e"]) == 1
    assert "do not match" in capsys.readouterr().err


def test_beam_pattern(tmp_path, capsys):
    assert _run(["beam-pattern", "--action-id", 1, "--points", 8]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "action_id,beam_id,theta_rad,amplitude,gain_db"
    assert len(lines) == 1 + 6 * 8
    out = tmp_path / "bp"
    assert _run(["beam-pattern", "--out", out, "--points", 8]) == 0
    first = (out / "beam_pattern.csv").read_bytes()
    assert _run(["beam-pattern", "--out", out, "--points", 8]) == 0
    assert (out / "beam_pattern.csv").read_bytes() == first


def test_beam_pattern_bad_action(capsys):
    assert _run(["beam-pattern", "--action-id", 7]) == 1
    assert "3 actions" in capsys.readouterr().err


def test_bad_config_exit_code(tmp_path, capsys):
    conf = _write(tmp_path / "c.json", {"epsilon_decay": 1.5})
    assert _run(["train", "--config", conf, "--out", tmp_path]) == 1
    assert "epsilon_decay" in capsys.readouterr().err


def test_io_failure_exit_code(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert _run(["beam-pattern", "--points", 4, "--out", blocker / "sub"]) == 2


def test_missing_config_is_validation_error(tmp_path):
    assert _run(["beam-pattern", "--config", tmp_path / "nope.json"]) == 1
