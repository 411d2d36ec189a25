import json
import math
import subprocess
import sys

import numpy as np
import pytest

from airs.cli import RunConfig, main, run
from airs.exceptions import InstanceError
from airs.model import validate_instance
from airs.reporting import dumps, format_float, to_csv
from airs.verification import CHECKS, verify_instance

from conftest import INSTANCE_B, SINGLE


def run_cli(*args):
    return subprocess.run([sys.executable, "-m", "airs", *map(str, args)],
                          capture_output=True, text=True)


class TestReporting:
    def test_float_format(self):
        assert format_float(1.0) == "1.0"
        assert format_float(0.1) == "0.10000000000000001"
        assert format_float(float("inf")) == "null"
        assert float(format_float(1 / 3)) == 1 / 3

    def test_dumps_round_trip(self):
        obj = {"a": [1, 2.5, np.float64(1e-300)], "b": {"c": True, "d": None},
               "e": np.array([0.1, 0.2]), "f": [], "g": {}}
        back = json.loads(dumps(obj))
        assert back["a"] == [1, 2.5, 1e-300] and back["e"] == [0.1, 0.2]
        assert back["b"] == {"c": True, "d": None}

    def test_csv(self):
        text = to_csv(["x", "y"], [(1, 0.5), (True, float("nan"))])
        assert text == "x,y\n1,0.5\ntrue,\n"


class TestRunConfig:
    @pytest.mark.parametrize("kw", [
        {"command": "nope", "input": "x"},
        {"command": "solve-airs"},
        {"command": "solve-airs", "input": "x", "tolerance": 0.0},
        {"command": "solve-airs", "input": "x", "seed": 2 ** 64},
        {"command": "solve-airs", "input": "x", "format": "xml"},
        {"command": "reduce-subset-sum", "weights": (1, 2)},
    ])
    def test_invalid(self, kw):
        with pytest.raises(InstanceError):
            RunConfig(**kw)


class TestCommands:
    def test_solve_airs(self, write_json, tmp_path):
        out = tmp_path / "r.json"
        assert main(["solve-airs", "--input", str(write_json("b.json", INSTANCE_B)),
                     "--output", str(out)]) == 0
        rep = json.loads(out.read_text())
        assert rep["solution"]["gross"] == pytest.approx(2.5820, abs=1e-4)
        assert rep["solution"]["spend"] == pytest.approx(5.0, abs=1e-8)
        assert rep["solution"]["lambda"] == pytest.approx(1 / math.sqrt(15), rel=1e-8)

    def test_solve_airs_csv(self, write_json, capsys):
        assert main(["solve-airs", "--input", str(write_json("b.json", INSTANCE_B)),
                     "--format", "csv"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[0] == "type,weight,h,action,reward" and len(lines) == 3

    def test_solve_linear(self, write_json, capsys):
        assert main(["solve-linear", "--input", str(write_json("s.json", SINGLE))]) == 0
        rep = json.loads(capsys.readouterr().out)
        assert rep["solution"]["price"] == pytest.approx(math.sqrt(2), rel=1e-9)

    def test_solve_prop(self, write_json, capsys):
        agents = {"agent_types": [0.1, 10], "h": {"family": "reciprocal"},
                  "cost": {"family": "power", "exponent": 1}, "budget": 1}
        assert main(["solve-prop", "--input", str(write_json("a.json", agents))]) == 0
        rep = json.loads(capsys.readouterr().out)
        assert rep["equilibrium"]["gross"] == pytest.approx(1 / 10.1, rel=1e-9)
        assert rep["dominating_airs"]["available"]
        assert rep["dominating_airs"]["spend"] < 1

    def test_compare_single_type(self, write_json, capsys):
        assert main(["compare", "--input", str(write_json("s.json", SINGLE))]) == 0
        rep = json.loads(capsys.readouterr().out)
        assert rep["schemes"]["linear"]["ratio"] == pytest.approx(0.7071, abs=1e-4)
        # a single agent cannot play the proportional scheme
        assert rep["schemes"]["proportional"]["applicable"] is False
        assert rep["reward_steps_csv"].startswith("scheme,x,reward\n")

    def test_compare_includes_proportional(self, write_json, capsys):
        assert main(["compare", "--input", str(write_json("b.json", INSTANCE_B))]) == 0
        rep = json.loads(capsys.readouterr().out)
        prop = rep["schemes"]["proportional"]
        assert prop["applicable"] and 0 < prop["ratio"] <= 1
        assert max(prop["foc_residuals"]) <= 1e-8

    def test_compare_csv(self, write_json, capsys):
        assert main(["compare", "--input", str(write_json("b.json", INSTANCE_B)),
                     "--format", "csv"]) == 0
        rows = capsys.readouterr().out.splitlines()
        assert rows[0] == "scheme,x,reward"
        assert {r.split(",")[0] for r in rows[1:]} >= {"airs", "linear"}

    def test_compare_byte_identical(self, write_json, tmp_path):
        path = write_json("b.json", INSTANCE_B)
        outs = []
        for i in range(2):
            out = tmp_path / f"c{i}.json"
            assert main(["compare", "--input", str(path), "--seed", "42",
                         "--output", str(out)]) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_verify_passes(self, write_json, capsys):
        assert main(["verify", "--input", str(write_json("b.json", INSTANCE_B))]) == 0
        rep = json.loads(capsys.readouterr().out)
        assert rep["passed"] and len(rep["checks"]) == len(CHECKS)

    def test_reduce_subset_sum(self, capsys):
        assert main(["reduce-subset-sum", "--weights", "1,2,3", "--target", "4"]) == 0
        rep = json.loads(capsys.readouterr().out)
        assert rep["instance"] == {"types": [1, 2, 3], "budget": 4.0, "target": 7.0}
        assert rep["subset_sum"] and rep["general_cost"]

    def test_reduce_space_separated(self, capsys):
        assert main(["reduce-subset-sum", "--weights", "2", "2", "--target", "3"]) == 0
        rep = json.loads(capsys.readouterr().out)
        assert rep["subset_sum"] is False and rep["general_cost"] is False


class TestExitCodes:
    def test_malformed_input(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{")
        out = tmp_path / "out.json"
        r = run_cli("solve-airs", "--input", bad, "--output", out)
        assert r.returncode == 1 and not out.exists()
        assert "invalid input" in r.stderr

    def test_invalid_instance(self, write_json):
        r = run_cli("solve-airs", "--input", write_json("x.json", dict(INSTANCE_B, h=[1, 2])))
        assert r.returncode == 1 and "h not decreasing" in r.stderr

    def test_missing_argument(self):
        assert run_cli("solve-airs").returncode == 1

    def test_bad_weights(self):
        assert run_cli("reduce-subset-sum", "--weights", "0,1", "--target", "1").returncode == 1

    def test_nonconvergence(self, write_json):
        r = run_cli("solve-airs", "--input", write_json("b.json", INSTANCE_B),
                    "--max-iter", "1", "--tolerance", "1e-15")
        assert r.returncode == 2 and "did not converge" in r.stderr

    def test_verify_failure(self, write_json, monkeypatch, capsys):
        import airs.verification as verification
        monkeypatch.setitem(verification.CHECKS, "always_fails",
                            lambda inst, sol, rng: (False, "forced"))
        cfg = RunConfig("verify", input=write_json("b.json", INSTANCE_B))
        assert run(cfg) == 3
        rep = json.loads(capsys.readouterr().out)
        assert not rep["passed"]

    def test_log_level_env(self, write_json):
        import os
        env = dict(os.environ, AIRS_LOG_LEVEL="INFO")
        r = subprocess.run([sys.executable, "-m", "airs", "verify", "--input",
                            str(write_json("b.json", INSTANCE_B))],
                           capture_output=True, text=True, env=env)
        assert r.returncode == 0 and "PASS kkt_residuals" in r.stderr


class TestVerification:
    def test_crashing_check_counts_as_failure(self, instance_b, monkeypatch):
        import airs.verification as verification

        def boom(inst, sol, rng):
            raise RuntimeError("bad")
        monkeypatch.setitem(verification.CHECKS, "boom", boom)
        checks = {c.name: c for c in verify_instance(instance_b)}
        assert not checks["boom"].passed and "RuntimeError" in checks["boom"].detail

    def test_larger_instance_skips_oracle(self):
        rng = np.random.default_rng(5)
        inst = validate_instance(types=list(range(1, 11)), weights=rng.uniform(0.5, 2, 10),
                                 h=np.linspace(5, 0.5, 10), cost={"family": "power", "exponent": 1.5},
                                 budget=3.0)
        checks = {c.name: c for c in verify_instance(inst)}
        assert all(c.passed for c in checks.values())
        assert checks["oracle_p2_agreement"].detail.startswith("skipped")
