import json
from pathlib import Path

import numpy as np
import pytest

from steersman import cli, harness
from steersman.agent import EpochMetrics
from steersman.harness import (ConfigError, ExperimentConfig, config_digest,
                               load_config, moving_average, parse_config,
                               plot_metrics, read_metrics_csv, run_eval,
                               run_train, write_metrics_csv)

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def tiny_raw(output_dir="runs/test", **agent):
    return {
        "plate": {"length": 0.4, "width": 0.12, "thickness": 0.003,
                  "clamp_depth": 0.04, "density": 2700.0,
                  "youngs_modulus": 70e9, "poisson_ratio": 0.33,
                  "grid_cols": 6, "grid_rows": 3},
        "conditions": [{"label": "healthy", "masses": []}],
        "env": {"sensors": 2, "modes": 2, "episode_length": 30,
                "observe_condition": True},
        "agent": dict({"epochs": 1, "epoch_steps": 200, "warmup_steps": 40,
                       "hidden": [8, 8], "buffer_capacity": 500,
                       "checkpoint_period": 1, "precision": "float32"},
                      **agent),
        "output_dir": output_dir,
        "seed": 0,
    }


class TestConfigParsing:
    def test_round_trip_values(self):
        cfg = parse_config(tiny_raw())
        assert cfg.plate.grid_cols == 6
        assert cfg.env.sensors == 2
        assert cfg.env.observe_condition is True
        assert cfg.agent.epochs == 1
        assert cfg.agent.seed == 0
        assert cfg.digest == config_digest(tiny_raw())

    def test_unknown_keys_rejected(self):
        raw = tiny_raw()
        raw["bogus"] = 1
        raw["env"]["mystery"] = 2
        with pytest.raises(ConfigError) as err:
            parse_config(raw)
        msg = str(err.value)
        assert "bogus" in msg and "mystery" in msg  # all violations listed

    def test_missing_fields_rejected(self):
        raw = tiny_raw()
        del raw["plate"], raw["seed"]
        with pytest.raises(ConfigError) as err:
            parse_config(raw)
        msg = str(err.value)
        assert "plate" in msg and "seed" in msg

    def test_sensor_count_vs_columns(self):
        raw = tiny_raw()
        raw["env"]["sensors"] = 7
        with pytest.raises(ConfigError, match="exceed"):
            parse_config(raw)

    def test_duplicate_condition_labels(self):
        raw = tiny_raw()
        raw["conditions"].append({"label": "healthy", "masses": []})
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config(raw)

    def test_empty_conditions(self):
        raw = tiny_raw()
        raw["conditions"] = []
        with pytest.raises(ConfigError):
            parse_config(raw)

    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.cfg"
        path.write_text("")
        with pytest.raises(ConfigError, match="empty"):
            load_config(path)

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.cfg"
        path.write_text("{nope")
        with pytest.raises(ConfigError, match="JSON"):
            load_config(path)

    def test_digest_stable_under_key_order(self):
        raw = tiny_raw()
        reordered = dict(reversed(list(raw.items())))
        assert config_digest(raw) == config_digest(reordered)


class TestBundledConfigs:
    def test_case1(self):
        cfg = load_config(CONFIG_DIR / "case1.cfg")
        assert cfg.env.sensors == 3
        assert cfg.agent.learning_rate == pytest.approx(6.25e-5)
        assert cfg.agent.priority_alpha == 0.5
        assert cfg.agent.multi_step == 3
        assert cfg.agent.hidden == (256, 128)
        assert cfg.plate.grid_cols * cfg.plate.grid_rows == 1462
        assert cfg.env.delta == pytest.approx(0.42981)

    def test_case2(self):
        cfg = load_config(CONFIG_DIR / "case2.cfg")
        assert cfg.env.sensors == 4
        assert cfg.agent.learning_rate == pytest.approx(1.25e-4)
        assert cfg.agent.priority_alpha == 0.7
        assert cfg.agent.multi_step == 5
        assert cfg.agent.hidden == (128, 128)
        assert cfg.agent.epochs == 200

    def test_desk(self):
        cfg = load_config(CONFIG_DIR / "desk.cfg")
        assert (cfg.plate.grid_cols, cfg.plate.grid_rows) == (15, 5)
        assert cfg.env.sensors == 2
        assert cfg.env.modes == 2
        assert len(cfg.conditions) == 2
        assert cfg.agent.epochs * cfg.agent.epoch_steps >= 1_000_000

    def test_shared_defaults(self):
        for name in ("case1.cfg", "case2.cfg", "desk.cfg"):
            cfg = load_config(CONFIG_DIR / name)
            assert cfg.agent.gamma == 0.9
            assert cfg.agent.target_sync_period == 3200
            assert cfg.agent.epsilon_final == 0.01
            assert cfg.agent.epoch_steps == 10_000


class TestMetricsIO:
    def records(self):
        return [EpochMetrics(epoch=k, mean_episode_reward=0.1 * k,
                             reward_std=0.01, final_score=0.2 * k,
                             episode_score_sum=3.0 * k, epsilon=1.0 / (k + 1),
                             wall_time=1.5 * k) for k in range(1, 6)]

    def test_csv_round_trip(self, tmp_path):
        path = tmp_path / "metrics.csv"
        records = self.records()
        write_metrics_csv(records, path)
        loaded = read_metrics_csv(path)
        assert loaded == records

    def test_header_checked(self, tmp_path):
        path = tmp_path / "metrics.csv"
        path.write_text("foo,bar\n1,2\n")
        with pytest.raises(ConfigError):
            read_metrics_csv(path)

    def test_full_precision(self, tmp_path):
        path = tmp_path / "metrics.csv"
        rec = EpochMetrics(epoch=1, mean_episode_reward=1 / 3, reward_std=0.0,
                           final_score=2 / 7, episode_score_sum=1e-17,
                           epsilon=0.1, wall_time=0.0)
        write_metrics_csv([rec], path)
        loaded = read_metrics_csv(path)[0]
        assert loaded.mean_episode_reward == rec.mean_episode_reward
        assert loaded.final_score == rec.final_score
        assert loaded.episode_score_sum == rec.episode_score_sum

    def test_moving_average(self):
        values = [1.0, 2.0, 3.0, 4.0]
        out = moving_average(values, window=2)
        assert np.allclose(out, [1.0, 1.5, 2.5, 3.5])
        const = moving_average([2.0] * 8)
        assert np.allclose(const, 2.0)

    def test_plot_metrics(self, tmp_path):
        write_metrics_csv(self.records(), tmp_path / "metrics.csv")
        produced = plot_metrics(tmp_path)
        names = {p.name for p in produced}
        assert names == {"reward.svg", "final_score.svg", "score_sum.svg"}
        for p in produced:
            assert p.stat().st_size > 0

    def test_plot_metrics_missing_csv(self, tmp_path):
        with pytest.raises(ConfigError):
            plot_metrics(tmp_path)


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("tiny_run")
    cfg = parse_config(tiny_raw(output_dir=str(out)))
    artifacts = run_train(cfg)
    return cfg, artifacts


class TestRunTrain:
    def test_artifacts_exist(self, tiny_run):
        cfg, artifacts = tiny_run
        assert artifacts["metrics_csv"].exists()
        assert len(artifacts["checkpoints"]) == 1
        assert len(artifacts["plots"]) == 3
        loaded = read_metrics_csv(artifacts["metrics_csv"])
        assert [m.epoch for m in loaded] == [1]

    def test_run_eval(self, tiny_run):
        cfg, artifacts = tiny_run
        out = run_eval(artifacts["checkpoints"][-1], cfg, steps=20,
                       random_seeds=2)
        assert out["comparison_csv"].exists()
        assert out["snapshots"].exists()
        result = out["results"]["healthy"]
        assert len(result["agent_scores"]) == 20
        assert len(result["random_mean"]) == 20
        assert result["efi_score"] > 0
        snapshots = json.loads(out["snapshots"].read_text())
        assert "0" in snapshots["healthy"]

    def test_eval_rejects_foreign_checkpoint(self, tiny_run, tmp_path):
        cfg, artifacts = tiny_run
        other = parse_config(tiny_raw(output_dir=str(tmp_path), epochs=2))
        with pytest.raises(ConfigError, match="digest"):
            run_eval(artifacts["checkpoints"][-1], other, steps=5)


class TestCli:
    def write_config(self, tmp_path, **agent):
        path = tmp_path / "tiny.cfg"
        path.write_text(json.dumps(tiny_raw(output_dir=str(tmp_path / "run"),
                                            **agent)))
        return path

    def test_model_build(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path)
        out = tmp_path / "basis.json"
        code = cli.main(["model", "build", "--config", str(cfg),
                         "--condition", "healthy", "--out", str(out)])
        assert code == 0
        from steersman.plate import load_basis
        basis = load_basis(out)
        assert basis.phi.shape == (18, 2)

    def test_baseline_and_oracle(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path)
        for args in (["baseline", "--method", "efi", "--config", str(cfg),
                      "--condition", "healthy"],
                     ["baseline", "--method", "fssp", "--config", str(cfg),
                      "--condition", "healthy"],
                     ["baseline", "--method", "random", "--config", str(cfg),
                      "--condition", "healthy", "--steps", "10"],
                     ["oracle", "--config", str(cfg),
                      "--condition", "healthy"]):
            assert cli.main(args) == 0
        captured = capsys.readouterr().out
        assert "method=efi" in captured
        assert "method=oracle" in captured
        assert "final_score=" in captured

    def test_train_eval_metrics(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path)
        assert cli.main(["train", "--config", str(cfg)]) == 0
        run_dir = tmp_path / "run"
        assert (run_dir / "metrics.csv").exists()
        checkpoint = sorted(run_dir.glob("checkpoint_*.npz"))[-1]
        assert cli.main(["eval", "--config", str(cfg), "--checkpoint",
                         str(checkpoint), "--steps", "10"]) == 0
        assert (run_dir / "eval" / "comparison.csv").exists()
        assert cli.main(["metrics", "--run", str(run_dir)]) == 0

    def test_error_exit_code_and_message(self, tmp_path, capsys):
        missing = tmp_path / "missing.cfg"
        code = cli.main(["train", "--config", str(missing)])
        assert code == 1
        err = capsys.readouterr().err
        assert err.startswith("error:")

    def test_invalid_config_reported(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        raw = tiny_raw()
        raw["env"]["sensors"] = 10
        bad.write_text(json.dumps(raw))
        code = cli.main(["baseline", "--method", "efi", "--config", str(bad),
                         "--condition", "healthy"])
        assert code == 1
        assert "error: ConfigError" in capsys.readouterr().err

    def test_seed_override(self, tmp_path):
        cfg_path = self.write_config(tmp_path)
        config = harness.load_config(cfg_path)
        assert config.seed == 0

        class Args:
            seed = 11
            out = None
            config = str(cfg_path)

        loaded = cli._load(Args())
        assert loaded.seed == 11
        assert loaded.agent.seed == 11
