import csv
import json
from pathlib import Path

import numpy as np
import pytest

from beamsched.cli import main
from beamsched.config import SystemConfig, load_config, paper_config
from beamsched.errors import ConfigurationError


def write_tiny_config(path, **over):
    base = dict(users=4, n_max=3, n_rf=3, n_az=4, n_el=2, steps=6, n_s=3,
                episodes=3, train_episodes=3, hidden1=8, hidden2=6, epochs=2)
    base.update(over)
    lines = []
    for key, val in base.items():
        if isinstance(val, str):
            lines.append(f'{key} = "{val}"')
        elif isinstance(val, bool):
            lines.append(f"{key} = {str(val).lower()}")
        else:
            lines.append(f"{key} = {val}")
    Path(path).write_text("\n".join(lines) + "\n")
    return str(path)


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def strip_timing(rows):
    header = rows[0]
    keep = [i for i, name in enumerate(header) if "time" not in name]
    return [[row[i] for i in keep] for row in rows]


# --- config loading -----------------------------------------------------------

def test_default_config_matches_reference_setup():
    cfg = paper_config()
    assert cfg.users == 20
    assert cfg.n_max == 10
    assert cfg.n_az * cfg.n_el == 256
    assert cfg.power_w == 2.0
    assert cfg.noise_w == 1e-15
    assert cfg.ema_delta == 0.1
    assert (cfg.n_x, cfg.n_y) == (8, 2)
    assert cfg.n_s == 40 and cfg.steps == 120


def test_config_extends_chain(tmp_path):
    base = tmp_path / "base.toml"
    write_tiny_config(base, users=6)
    child = tmp_path / "child.toml"
    child.write_text(f'extends = "{base.name}"\nusers = 5\n')
    cfg = load_config(child)
    assert cfg.users == 5
    assert cfg.n_max == 3          # inherited


def test_config_extends_packaged_default(tmp_path):
    child = tmp_path / "override.toml"
    child.write_text('extends = "paper.toml"\nepisodes = 7\n')
    cfg = load_config(child)
    assert cfg.users == 20
    assert cfg.episodes == 7


def test_config_rejects_unknown_keys(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("usrs = 4\n")
    with pytest.raises(ConfigurationError):
        load_config(bad)


def test_config_rejects_bad_values():
    with pytest.raises(ConfigurationError):
        SystemConfig(users=0).validate()
    with pytest.raises(ConfigurationError):
        SystemConfig(n_max=11, n_rf=10).validate()
    with pytest.raises(ConfigurationError):
        SystemConfig(ema_delta=1.5).validate()


# --- simulate -----------------------------------------------------------------

def test_simulate_deterministic_outputs(tmp_path):
    cfg = write_tiny_config(tmp_path / "cfg.toml")
    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        rc = main(["simulate", "--config", cfg, "--scheduler", "greedy",
                   "--episodes", "3", "--seed", "1", "--out", str(out)])
        assert rc == 0
        outs.append(out)
    for name in ("cdf_greedy.csv", "episodes_greedy.csv", "summary.csv"):
        rows_a = strip_timing(read_csv(outs[0] / name))
        rows_b = strip_timing(read_csv(outs[1] / name))
        assert rows_a == rows_b, name


def test_simulate_writes_manifest_and_perslot(tmp_path):
    cfg = write_tiny_config(tmp_path / "cfg.toml")
    out = tmp_path / "out"
    rc = main(["simulate", "--config", cfg, "--scheduler", "top1",
               "--episodes", "2", "--out", str(out), "--perslot"])
    assert rc == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["users"] == 4
    assert manifest["master_seed"] == manifest["config"]["seed"]
    assert len(manifest["config_sha256"]) == 64
    assert manifest["kernel_backend"] in ("compiled", "pure-python")
    rows = read_csv(out / "perslot_top1.csv")
    assert rows[0][:4] == ["episode", "t", "scheduler", "n_selected"]
    assert len(rows) == 1 + 2 * 6   # episodes * steps


def test_simulate_exhaustive_at_paper_scale_refused(tmp_path):
    out = tmp_path / "out"
    rc = main(["simulate", "--scheduler", "exhaustive", "--episodes", "1",
               "--out", str(out)])       # default config: I=20
    assert rc == 3


def test_simulate_bad_config_path(tmp_path):
    rc = main(["simulate", "--config", str(tmp_path / "missing.toml")])
    assert rc == 2


def test_simulate_ml_requires_model(tmp_path):
    cfg = write_tiny_config(tmp_path / "cfg.toml")
    rc = main(["simulate", "--config", cfg, "--scheduler", "ml",
               "--out", str(tmp_path / "o")])
    assert rc == 2


def test_simulate_parallel_jobs_match_serial(tmp_path):
    cfg = write_tiny_config(tmp_path / "cfg.toml")
    out1, out2 = tmp_path / "serial", tmp_path / "parallel"
    assert main(["simulate", "--config", cfg, "--episodes", "4", "--seed", "5",
                 "--out", str(out1)]) == 0
    assert main(["simulate", "--config", cfg, "--episodes", "4", "--seed", "5",
                 "--jobs", "2", "--out", str(out2)]) == 0
    a = strip_timing(read_csv(out1 / "episodes_greedy.csv"))
    b = strip_timing(read_csv(out2 / "episodes_greedy.csv"))
    assert a == b


# --- gen-dataset / train / evaluate -------------------------------------------

def test_dataset_train_evaluate_pipeline(tmp_path):
    cfg = write_tiny_config(tmp_path / "cfg.toml")
    ds_path = tmp_path / "data.npz"
    rc = main(["gen-dataset", "--config", cfg, "--episodes", "3",
               "--out", str(ds_path)])
    assert rc == 0
    from beamsched.ml import SlotDataset

    ds = SlotDataset.load(ds_path)
    assert len(ds) == 3 * 6        # N_e * T rows

    model_path = tmp_path / "model.npz"
    rc = main(["train", "--config", cfg, "--dataset", str(ds_path),
               "--epochs", "2", "--out", str(model_path)])
    assert rc == 0
    assert model_path.exists()
    curve = read_csv(tmp_path / "model_curve.csv")
    assert curve[0] == ["epoch", "train_loss", "val_loss", "val_accuracy"]
    assert len(curve) == 3

    out = tmp_path / "eval"
    rc = main(["evaluate", "--config", cfg, "--model", str(model_path),
               "--episodes", "2", "--out", str(out)])
    assert rc == 0
    acc_rows = read_csv(out / "accuracy.csv")
    assert 0.0 <= float(acc_rows[1][2]) <= 1.0


def test_train_resume_continues_from_parameters(tmp_path):
    cfg = write_tiny_config(tmp_path / "cfg.toml", train_episodes=6)
    ds_path = tmp_path / "data.npz"
    assert main(["gen-dataset", "--config", cfg, "--episodes", "6",
                 "--out", str(ds_path)]) == 0

    def first_epoch_loss(curve_path):
        return float(read_csv(curve_path)[1][1])

    cold = tmp_path / "cold.npz"
    assert main(["train", "--config", cfg, "--dataset", str(ds_path),
                 "--epochs", "6", "--out", str(cold)]) == 0
    cold_first = first_epoch_loss(tmp_path / "cold_curve.csv")

    resumed = tmp_path / "resumed.npz"
    assert main(["train", "--config", cfg, "--dataset", str(ds_path),
                 "--epochs", "2", "--resume", str(cold), "--out", str(resumed)]) == 0
    resumed_first = first_epoch_loss(tmp_path / "resumed_curve.csv")
    assert resumed_first < cold_first


def test_compare_single_scheduler_single_row(tmp_path):
    cfg = write_tiny_config(tmp_path / "cfg.toml")
    out = tmp_path / "cmp"
    rc = main(["compare", "--config", cfg, "--schedulers", "top1",
               "--episodes", "2", "--out", str(out)])
    assert rc == 0
    rows = read_csv(out / "summary.csv")
    assert len(rows) == 2
    assert rows[1][0] == "top1"


def test_compare_shared_seeds_greedy_beats_top1(tmp_path):
    cfg = write_tiny_config(tmp_path / "cfg.toml", users=6, n_max=4, n_rf=4,
                            steps=20, n_s=10)
    out = tmp_path / "cmp"
    rc = main(["compare", "--config", cfg, "--schedulers", "greedy,top1",
               "--episodes", "6", "--seed", "3", "--out", str(out)])
    assert rc == 0
    greedy = {r[0]: float(r[1]) for r in read_csv(out / "episodes_greedy.csv")[1:]}
    top1 = {r[0]: float(r[1]) for r in read_csv(out / "episodes_top1.csv")[1:]}
    assert greedy.keys() == top1.keys()
    wins = sum(greedy[e] >= top1[e] for e in greedy)
    assert wins >= 0.95 * len(greedy)


def test_compare_rejects_unknown_scheduler(tmp_path):
    cfg = write_tiny_config(tmp_path / "cfg.toml")
    rc = main(["compare", "--config", cfg, "--schedulers", "greedy,magic",
               "--out", str(tmp_path / "o")])
    assert rc == 2


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
