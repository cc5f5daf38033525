import json
import os

import pytest

from irsa_rl.cli import main
from irsa_rl.config import build_sweep_spec, build_train_config, parse_config_file
from irsa_rl.env import ConfigurationError


def write_config(tmp_path, text):
    path = tmp_path / "run.cfg"
    path.write_text(text)
    return str(path)


# --- config files ------------------------------------------------------------


def test_parse_config_roundtrip(tmp_path):
    path = write_config(
        tmp_path,
        """
        # comment line
        n_slots = 10
        load = 0.7
        buffer = 5
        window = 4
        max_replicas = 4
        epsilon = 0.05
        gamma = 0.98
        episodes = 5
        iters_per_episode = 30
        virtual_experience = true
        arrival_kind = bernoulli
        arrival_param = 0.5
        seed = 9
        loads = 0.2, 0.5
        variants = slotted_aloha, vanilla_irsa
        repetitions = 3
        trials = 40
        """,
    )
    values = parse_config_file(path)
    cfg = build_train_config(values)
    assert cfg.load == 0.7
    assert cfg.params.d == 4
    assert cfg.virtual_experience is True
    assert cfg.seed == 9
    spec = build_sweep_spec(values)
    assert spec.loads == (0.2, 0.5)
    assert spec.variants == ("slotted_aloha", "vanilla_irsa")
    assert spec.repetitions == 3


def test_parse_config_rejects_unknown_key(tmp_path):
    path = write_config(tmp_path, "wibble = 3\n")
    with pytest.raises(ConfigurationError):
        parse_config_file(path)


def test_parse_config_rejects_bad_syntax(tmp_path):
    path = write_config(tmp_path, "load 0.5\n")
    with pytest.raises(ConfigurationError):
        parse_config_file(path)


def test_parse_config_rejects_bad_value(tmp_path):
    path = write_config(tmp_path, "load = fast\n")
    with pytest.raises(ConfigurationError):
        build_train_config(parse_config_file(path))


def test_config_seed_override(tmp_path):
    path = write_config(tmp_path, "seed = 5\n")
    cfg = build_train_config(parse_config_file(path), seed=77)
    assert cfg.seed == 77


# --- CLI ------------------------------------------------------------------------


def test_cli_train_then_eval(tmp_path, capsys):
    cfg = write_config(tmp_path, "load = 0.5\nepisodes = 3\nseed = 1\n")
    out = str(tmp_path / "run")
    assert main(["train", "--config", cfg, "--out", out]) == 0
    assert os.path.exists(os.path.join(out, "node_000.qtable"))
    assert os.path.exists(os.path.join(out, "trace.csv"))
    header = open(os.path.join(out, "trace.csv")).readline().strip()
    assert header == "trial,episode,iteration,mean_reward,throughput,resets"

    code = main(
        ["eval", "--config", cfg, "--qtables", out, "--trials", "200", "--out", out]
    )
    assert code == 0
    printed = capsys.readouterr().out
    assert "throughput" in printed


def test_cli_eval_named_variant(tmp_path, capsys):
    cfg = write_config(tmp_path, "load = 0.5\n")
    assert main(["eval", "--config", cfg, "--variant", "vanilla_irsa",
                 "--trials", "300", "--out", str(tmp_path)]) == 0
    assert "throughput" in capsys.readouterr().out


def test_cli_sweep_writes_csv(tmp_path):
    cfg = write_config(
        tmp_path,
        "loads = 0.4\nvariants = slotted_aloha, random_strategy\n"
        "repetitions = 2\ntrials = 30\n",
    )
    out = str(tmp_path / "sweep")
    assert main(["sweep", "--config", cfg, "--out", out, "--seed", "3"]) == 0
    lines = open(os.path.join(out, "sweep.csv")).read().splitlines()
    assert len(lines) == 3  # header + 2 variants x 1 load


def test_cli_sweep_reproducible(tmp_path):
    cfg = write_config(
        tmp_path,
        "loads = 0.5\nvariants = random_strategy\nrepetitions = 2\ntrials = 25\n",
    )
    outs = []
    for name in ("a", "b"):
        out = str(tmp_path / name)
        assert main(["sweep", "--config", cfg, "--out", out, "--seed", "11"]) == 0
        outs.append(open(os.path.join(out, "sweep.csv"), "rb").read())
    assert outs[0] == outs[1]


def test_cli_unknown_variant_is_config_error(tmp_path, capsys):
    cfg = write_config(tmp_path, "variants = hovercraft\nloads = 0.5\n")
    code = main(["sweep", "--config", cfg, "--out", str(tmp_path / "x")])
    assert code == 2
    err = capsys.readouterr().err.strip()
    payload = json.loads(err.splitlines()[-1])
    assert payload["kind"] == "configuration"
    assert "hovercraft" in payload["error"]


def test_cli_missing_config_file(tmp_path, capsys):
    code = main(["sweep", "--config", str(tmp_path / "nope.cfg"),
                 "--out", str(tmp_path / "x")])
    assert code == 2
    payload = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert payload["kind"] == "configuration"


def test_cli_baseline_small(tmp_path, capsys):
    out = str(tmp_path / "bl")
    assert main(["baseline", "--trials", "4000", "--seed", "5", "--out", out]) == 0
    text = open(os.path.join(out, "summary.txt")).read()
    assert "check slotted_aloha_G0.2_within_2pct: PASS" in text


def test_cli_waterfall_small(tmp_path):
    cfg = write_config(
        tmp_path,
        "loads = 0.3\nepisodes = 4\nrepetitions = 2\ntrials = 40\n",
    )
    out = str(tmp_path / "wf")
    assert main(["waterfall", "--config", cfg, "--out", out, "--reps", "2",
                 "--trials", "40"]) == 0
    lines = open(os.path.join(out, "waterfall.csv")).read().splitlines()
    assert len(lines) == 1 + 4  # header + 3 schemes + envelope
