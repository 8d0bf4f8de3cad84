"""CLI contract: subcommands, exit codes, reproducibility, CSV outputs."""
import json

import pytest

from pulselabel.cli import main
from pulselabel.simulator import read_dataset

CFG_SMALL = {"N_initial": 10, "K_regions": 3, "quota": 50, "seed": 5,
             "checkpoint_every": 20, "store_raw": False}


@pytest.fixture()
def workdir(tmp_path):
    cfg = tmp_path / "config.json"
    cfg.write_text(json.dumps(CFG_SMALL))
    return tmp_path, str(cfg)


def run(argv):
    return main([str(a) for a in argv])


class TestSimulate:
    def test_writes_replay_compatible_dataset(self, workdir, capsys):
        tmp, cfg = workdir
        out = tmp / "sim.jsonl"
        code = run(["--config", cfg, "simulate", "--subjects", 2,
                    "--days", 0.25, "--out", out])
        assert code == 0
        meta = next(read_dataset(out))
        assert meta["format"] == "pulselabel-dataset"
        header = capsys.readouterr().out
        assert "seed: 5" in header and '"n_initial": 10' in header

    def test_unknown_flag_exits_2(self, workdir):
        with pytest.raises(SystemExit) as exc:
            run(["simulate", "--bogus"])
        assert exc.value.code == 2


class TestReplayAndReports:
    @pytest.fixture()
    def replayed(self, workdir):
        tmp, cfg = workdir
        sim = tmp / "sim.jsonl"
        assert run(["--config", cfg, "simulate", "--subjects", 2,
                    "--days", 1.0, "--out", sim]) == 0
        data = tmp / "data"
        assert run(["--config", cfg, "replay", "--input", sim,
                    "--data-dir", data]) == 0
        return tmp, cfg, data

    def test_replay_then_coverage_csv(self, replayed):
        tmp, cfg, data = replayed
        reports = tmp / "reports"
        code = run(["--config", cfg, "report", "coverage",
                    "--data-dir", data, "--subject", "S01",
                    "--out-dir", reports])
        assert code == 0
        lines = (reports / "fig3_coverage.csv").read_text().splitlines()
        assert lines[0] == "subject_id,label_index,coverage"
        values = [float(line.split(",")[2]) for line in lines[1:]]
        assert len(values) >= 1
        assert all(a >= b - 1e-12 for a, b in zip(values, values[1:]))

    def test_all_reports_emit_csvs(self, replayed):
        tmp, cfg, data = replayed
        reports = tmp / "reports"
        for name, files in (
                ("temporal", ["fig4_temporal_activity.csv", "fig5_temporal_stress.csv"]),
                ("quality", ["fig6_sqi_activity.csv"]),
                ("response", ["fig7_response_cdf.csv", "fig8_response_rate.csv"])):
            assert run(["--config", cfg, "report", name, "--data-dir", data,
                        "--out-dir", reports]) == 0
            for f in files:
                assert (reports / f).exists(), f

    def test_identical_runs_byte_identical_outputs(self, workdir):
        tmp, cfg = workdir
        sim = tmp / "sim.jsonl"
        run(["--config", cfg, "simulate", "--subjects", 1, "--days", 1.0,
             "--out", sim])
        outputs = []
        for tag in ("a", "b"):
            data = tmp / f"data_{tag}"
            run(["--config", cfg, "replay", "--input", sim, "--data-dir", data])
            reports = tmp / f"reports_{tag}"
            run(["--config", cfg, "report", "response", "--data-dir", data,
                 "--out-dir", reports])
            outputs.append((reports / "fig8_response_rate.csv").read_bytes())
        assert outputs[0] == outputs[1]

    def test_report_without_data_exits_1(self, workdir, capsys):
        tmp, cfg = workdir
        code = run(["--config", cfg, "report", "coverage",
                    "--data-dir", tmp / "nothing", "--out-dir", tmp / "r"])
        assert code == 1
        assert "no samples" in capsys.readouterr().err

    def test_missing_input_exits_1(self, workdir, capsys):
        tmp, cfg = workdir
        code = run(["--config", cfg, "replay", "--input", tmp / "absent.jsonl",
                    "--data-dir", tmp / "d"])
        assert code == 1
        assert "absent.jsonl" in capsys.readouterr().err


class TestActivityCommands:
    def test_train_and_eval(self, workdir, capsys):
        tmp, cfg = workdir
        model = tmp / "model.json"
        code = run(["--config", cfg, "train-activity", "--subjects", 3,
                    "--windows", 2, "--trees", 15, "--out", model])
        assert code == 0
        assert model.exists()
        out = capsys.readouterr().out
        assert "digest" in out
        code = run(["--config", cfg, "eval-activity", "--subjects", 3,
                    "--windows", 2, "--trees", 15, "--k", 1])
        assert code == 0
        out = capsys.readouterr().out
        assert "mean accuracy" in out


class TestCheckpoint:
    def test_checkpoint_writes_engine_files(self, workdir):
        tmp, cfg = workdir
        sim = tmp / "sim.jsonl"
        run(["--config", cfg, "simulate", "--subjects", 1, "--days", 0.5,
             "--out", sim])
        data = tmp / "data"
        run(["--config", cfg, "replay", "--input", sim, "--data-dir", data])
        code = run(["--config", cfg, "checkpoint", "--data-dir", data])
        assert code == 0
        assert (data / "engines" / "S01.json").exists()
