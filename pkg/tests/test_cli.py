import json

import numpy as np
import pytest

from rvehom.cli import main
from rvehom.report import read_csv


def run(argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def small_realization(tmp_path_factory):
    out = tmp_path_factory.mktemp("gen")
    config = out / "config.json"
    config.write_text(json.dumps({
        "rve": {"spec": {"sphere_count": 2, "sphere_fraction": 0.08}},
        "out": str(out),
        "seed": 5,
    }))
    assert run(["generate", "--config", config]) == 0
    return out / "custom.json"


class TestGenerate:
    def test_preset_writes_json(self, tmp_path, capsys):
        code = run(["generate", "--preset", "rve2", "--seed", 42,
                    "--out", tmp_path])
        assert code == 0
        capture = capsys.readouterr()
        assert "ellipsoid" in capture.out
        path = tmp_path / "rve2.json"
        doc = json.loads(path.read_text())
        assert len(doc["inclusions"]) == 10

    def test_jamming_exit_code(self, tmp_path):
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({
            "rve": {"spec": {"sphere_count": 80, "sphere_fraction": 0.34}},
            "generation": {"max_attempts": 20},
            "out": str(tmp_path),
        }))
        code = run(["generate", "--config", config])
        assert code == 4

    def test_config_error_exit_code(self, tmp_path):
        code = run(["sweep", "--preset", "rve2", "--models", "bogus",
                    "--out", tmp_path])
        assert code == 2

    def test_missing_rve_is_config_error(self, tmp_path):
        assert run(["sweep", "--out", tmp_path]) == 2


class TestVoxelizeCommand:
    def test_writes_raw_and_sidecar(self, small_realization, tmp_path):
        code = run(["voxelize", "--realization", small_realization,
                    "--resolution", 16, "--out", tmp_path])
        assert code == 0
        raw = tmp_path / "custom_n16.raw"
        assert raw.exists()
        sidecar = json.loads((tmp_path / "custom_n16.raw.json").read_text())
        assert sidecar["n"] == 16
        assert raw.stat().st_size == 16**3


class TestFftCommand:
    def test_moduli_table_and_logs(self, small_realization, tmp_path, capsys):
        code = run([
            "fft", "--realization", small_realization, "--resolution", 16,
            "--contrasts", "5", "--csv", "--log-convergence",
            "--out", tmp_path,
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "custom fft 5" in out
        logs = list(tmp_path.glob("*_convergence.csv"))
        assert len(logs) == 6
        header = logs[0].read_text().splitlines()[0]
        assert header == "iteration,residual"

    def test_all_contrasts_failing_exit_code(self, small_realization,
                                             tmp_path):
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({
            "solver": {"tolerance": 1e-14, "max_iterations": 5},
        }))
        code = run([
            "fft", "--realization", small_realization, "--resolution", 16,
            "--contrasts", "50", "--config", config, "--out", tmp_path,
        ])
        assert code == 3


class TestMeanfieldCommand:
    def test_models_table(self, small_realization, tmp_path, capsys):
        code = run([
            "meanfield", "--realization", small_realization,
            "--models", "mt,lielens", "--contrasts", "10", "--out", tmp_path,
        ])
        assert code == 0
        out = capsys.readouterr().out
        assert "custom mt 10" in out
        assert "custom lielens 10" in out


class TestSweep:
    def test_contrast_one_all_deltas_zero(self, small_realization, tmp_path,
                                          capsys):
        code = run([
            "sweep", "--realization", small_realization, "--resolution", 16,
            "--contrasts", "1", "--out", tmp_path,
        ])
        assert code == 0
        rows = read_csv(tmp_path / "custom_sweep.csv")
        assert len(rows) == 4
        for row in rows:
            assert abs(float(row["deltaK_pct"])) <= 0.1
            assert abs(float(row["deltaMu_pct"])) <= 0.1
            assert abs(float(row["deltaE_pct"])) <= 0.1
            assert float(row["K_norm"]) == pytest.approx(1.0, abs=1e-4)

    def test_csv_deterministic_and_figures(self, small_realization, tmp_path):
        args = [
            "sweep", "--realization", small_realization, "--resolution", 16,
            "--contrasts", "1,5", "--models", "fft,mt",
        ]
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        assert run(args + ["--out", out_a]) == 0
        assert run(args + ["--out", out_b, "--no-figures"]) == 0
        csv_a = (out_a / "custom_sweep.csv").read_bytes()
        csv_b = (out_b / "custom_sweep.csv").read_bytes()
        assert csv_a == csv_b
        assert (out_a / "custom_moduli.png").exists()
        assert (out_a / "custom_deviations.png").exists()
        assert not (out_b / "custom_moduli.png").exists()

    def test_rows_ordered_by_contrast_then_model(self, small_realization,
                                                 tmp_path):
        assert run([
            "sweep", "--realization", small_realization, "--resolution", 16,
            "--contrasts", "5,1", "--models", "mt,fft,lielens",
            "--out", tmp_path, "--no-figures",
        ]) == 0
        rows = read_csv(tmp_path / "custom_sweep.csv")
        keys = [(float(r["contrast"]), r["model"]) for r in rows]
        assert keys == [(1.0, "fft"), (1.0, "mt"), (1.0, "lielens"),
                        (5.0, "fft"), (5.0, "mt"), (5.0, "lielens")]


class TestValidate:
    def test_validate_passes(self, capsys):
        assert run(["validate"]) == 0
        out = capsys.readouterr().out
        assert out.count("PASS") == 4
        assert "max deviation" in out

    def test_degraded_quadrature_fails_sphere_check(self, capsys):
        assert run(["validate", "--quadrature", "4"]) == 1
        out = capsys.readouterr().out
        assert "FAIL sphere-eshelby" in out
