import json
from pathlib import Path

import numpy as np
import pytest

from momenta.cli import ExperimentConfig, main, strip_timing, summarize
from momenta.poly import Polynomial
from momenta.relax import Pop


@pytest.fixture
def pop_file(tmp_path):
    x = Polynomial.variable(1, 0)
    pop = Pop(1, x * x, inequalities=[x - 1])
    path = tmp_path / "pop.json"
    path.write_text(json.dumps(pop.to_json()))
    return path


class TestSolvePop:
    def test_exit_code_and_payload(self, pop_file, tmp_path):
        out = tmp_path / "result.json"
        code = main(["solve-pop", str(pop_file), "--out", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["solution"]["objective"] == pytest.approx(1.0, abs=1e-6)
        assert payload["config"]["task"] == "pop"
        assert payload["config"]["seed"] == 0

    def test_malformed_input_exit_2(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["solve-pop", str(bad)]) == 2

    def test_missing_file_exit_2(self):
        assert main(["solve-pop", "/nonexistent/path.json"]) == 2


class TestSynthDeterminism:
    def test_byte_identical_reruns(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["synth", "rigid", "--n", "8", "--seed", "3", "-o", str(a)]) == 0
        assert main(["synth", "rigid", "--n", "8", "--seed", "3", "-o", str(b)]) == 0
        assert (a / "correspondences.csv").read_bytes() == \
            (b / "correspondences.csv").read_bytes()
        assert (a / "ground_truth.json").read_bytes() == \
            (b / "ground_truth.json").read_bytes()

    def test_fundamentals_and_quartics(self, tmp_path):
        assert main(["synth", "fundamentals", "--n", "4", "--seed", "1",
                     "-o", str(tmp_path / "f")]) == 0
        assert (tmp_path / "f" / "fundamentals.json").exists()
        assert main(["synth", "quartics", "--n", "3", "--seed", "1",
                     "-o", str(tmp_path / "q")]) == 0
        assert (tmp_path / "q" / "quartics.json").exists()


class TestSweepAndVerify:
    def test_rigid_sweep_files(self, tmp_path):
        code = main(["rigid", "--minimal", "--noise", "0:1:1", "--trials", "2",
                     "--seed", "5", "-o", str(tmp_path)])
        assert code == 0
        results = json.loads((tmp_path / "rigid_results.json").read_text())
        assert len(results["trials"]) == 4  # 2 noise levels x 2 trials
        assert results["config"]["seed"] == 5
        assert (tmp_path / "rigid_summary.csv").exists()

    def test_verify_ok_and_mismatch(self, tmp_path):
        main(["rigid", "--minimal", "--noise", "0:1:1", "--trials", "2",
              "--seed", "5", "-o", str(tmp_path)])
        res = tmp_path / "rigid_results.json"
        csv = tmp_path / "rigid_summary.csv"
        assert main(["verify", str(res), str(csv)]) == 0
        tampered = csv.read_text().replace("0", "9", 1)
        csv.write_text(tampered)
        assert main(["verify", str(res), str(csv)]) == 2


class TestConfigValidation:
    def test_empty_sweep_rejected(self):
        with pytest.raises(ValueError):
            ExperimentConfig("rigid", sweep={"noise": []})

    def test_trials_positive(self):
        with pytest.raises(ValueError):
            ExperimentConfig("rigid", trials=0)

    def test_strip_timing(self):
        obj = {"a": 1, "timing": {"seconds": 2}, "b": [{"elapsed": 3, "c": 4}]}
        assert strip_timing(obj) == {"a": 1, "b": [{"c": 4}]}


class TestConsensusCli:
    def test_planted_autocalib(self, tmp_path):
        code = main(["consensus", "--task", "autocalib", "--inliers", "4",
                     "--outliers", "2", "--seed", "1", "-o", str(tmp_path)])
        assert code == 0
        payload = json.loads((tmp_path / "consensus_result.json").read_text())
        assert payload["result"]["certified"]
        assert payload["planted_recovered"]

    def test_requires_task_or_file(self):
        assert main(["consensus"]) == 2
