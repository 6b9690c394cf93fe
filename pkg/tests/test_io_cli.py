import json
import math
import os

import numpy as np
import pytest

from bolzadual import (Box, ProblemFileError, WholeSpace, load_problem,
                       problem_from_dict, problem_to_dict, save_problem)
from bolzadual.cli import main
from conftest import make_problem


def worked_dict():
    return {
        "horizon": 1,
        "stages": [{
            "A": [[0.0]], "B": [[1.0]], "phi": [0.0],
            "Q": [[0.0]], "R": [[1.0]],
            "stateSet": {"type": "all", "dim": 1},
            "controlSet": {"type": "all", "dim": 1},
        }],
        "terminal": {"Qf": [[1.0]], "set": {"type": "all", "dim": 1}},
    }


@pytest.fixture
def worked_file(tmp_path):
    path = tmp_path / "worked.json"
    path.write_text(json.dumps(worked_dict()))
    return str(path)


class TestProblemFiles:
    def test_round_trip(self, tmp_path):
        prob = make_problem([[0.1]], [[1.0]], [0.3], [[1.0]], [[2.0]],
                            Box([-1.0], [np.inf]), WholeSpace(1), [[1.0]],
                            Box([-2.0], [2.0]), T=2)
        path = tmp_path / "prob.json"
        save_problem(prob, path)
        back = load_problem(path)
        assert back.horizon == 2
        assert back.stage(0).R[0, 0] == 2.0
        assert back.stage(1).state_set.upper[0] == math.inf
        assert back.terminal.set.interval() == (-2.0, 2.0)

    def test_unknown_field_rejected(self):
        data = worked_dict()
        data["stages"][0]["extra"] = 1
        with pytest.raises(ProblemFileError, match="unknown fields"):
            problem_from_dict(data)

    def test_missing_field_rejected(self):
        data = worked_dict()
        del data["stages"][0]["phi"]
        with pytest.raises(ProblemFileError, match="missing fields"):
            problem_from_dict(data)

    def test_horizon_mismatch_rejected(self):
        data = worked_dict()
        data["horizon"] = 2
        with pytest.raises(ProblemFileError, match="horizon"):
            problem_from_dict(data)

    def test_bad_bound_string(self):
        data = worked_dict()
        data["stages"][0]["stateSet"] = {"type": "box", "lower": ["low"],
                                         "upper": [1.0]}
        with pytest.raises(ProblemFileError, match="bad bound"):
            problem_from_dict(data)

    def test_unknown_set_type(self):
        data = worked_dict()
        data["terminal"]["set"] = {"type": "ball", "dim": 1}
        with pytest.raises(ProblemFileError, match="unknown set type"):
            problem_from_dict(data)

    def test_mixed_round_trip(self, tmp_path):
        data = worked_dict()
        data["stages"][0]["mixed"] = {
            "constraint": {"type": "quad", "P": [[0.0, 0.0], [0.0, 2.0]],
                           "q": [0.0, 0.0], "r": -1.0},
            "runningCost": {"type": "quad", "P": [[0.0, 0.0], [0.0, 0.0]],
                            "q": [0.0, 0.0], "r": 0.0}}
        prob = problem_from_dict(data)
        assert prob.stage(0).mixed is not None
        assert problem_to_dict(prob)["stages"][0]["mixed"]["constraint"]["r"] == -1.0


class TestCLI:
    def test_solve_worked(self, worked_file, tmp_path):
        out = str(tmp_path / "o")
        code = main(["solve", "--problem", worked_file, "--tau", "0",
                     "--xi", "1", "--out", out])
        assert code == 0
        txt = (tmp_path / "o" / "solve_primal.txt").read_text()
        assert "value=0.25" in txt
        csv = (tmp_path / "o" / "solve_primal.csv").read_text().splitlines()
        assert csv[0] == "t,x0,u0,p0"
        assert csv[1].startswith("0,1,-0.5")

    def test_check_duality_exit_codes(self, worked_file, tmp_path):
        out = str(tmp_path / "o")
        ok = main(["check-duality", "--problem", worked_file, "--tau", "0",
                   "--xi", "1", "--eta", "0.5", "--out", out])
        assert ok == 0
        bad = main(["check-duality", "--problem", worked_file, "--tau", "0",
                    "--xi", "1", "--eta", "0", "--out", out])
        assert bad == 2

    def test_characteristics_exit_codes(self, worked_file, tmp_path):
        out = str(tmp_path / "o")
        assert main(["characteristics", "--problem", worked_file, "--tau",
                     "0", "--xi", "1", "--eta", "0.5", "--out", out]) == 0
        assert main(["characteristics", "--problem", worked_file, "--tau",
                     "0", "--xi", "1", "--eta", "0", "--out", out]) == 2
        csv = (tmp_path / "o" / "characteristic.csv").read_text().splitlines()
        assert csv[0] == "t,x0,p0,hamResidual,elResidual"

    def test_qualify_failing_instance(self, tmp_path):
        data = worked_dict()
        data["stages"][0]["B"] = [[0.0]]
        data["stages"][0]["R"] = [[0.0]]
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(data))
        code = main(["qualify", "--problem", str(path), "--out",
                     str(tmp_path / "o")])
        assert code == 2
        report = (tmp_path / "o" / "qualification_report.txt").read_text()
        assert "CQ[stage 0] Fails" in report

    def test_qualify_good_instance(self, worked_file, tmp_path):
        assert main(["qualify", "--problem", worked_file, "--out",
                     str(tmp_path / "o")]) == 0

    def test_sweep_deterministic_and_svg(self, worked_file, tmp_path):
        out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
        args = ["sweep", "--problem", worked_file, "--tau", "0",
                "--grid=-2:2:21", "--seed", "7"]
        assert main(args + ["--out", out1]) == 0
        assert main(args + ["--out", out2, "--jobs", "3"]) == 0
        c1 = (tmp_path / "a" / "sweep.csv").read_bytes()
        c2 = (tmp_path / "b" / "sweep.csv").read_bytes()
        assert c1 == c2
        assert (tmp_path / "a" / "sweep.svg").exists()

    def test_oracle_tables(self, worked_file, tmp_path):
        out = str(tmp_path / "o")
        assert main(["oracle", "--problem", worked_file, "--grid=-3:3:61",
                     "--out", out]) == 0
        head = (tmp_path / "o" / "theta_tau_0.csv").read_text().splitlines()
        assert head[0].startswith("# source=DP kind=primal tau=0")
        assert head[1] == "x0,value,is_finite"

    def test_dualize_probe_tables(self, worked_file, tmp_path):
        out = str(tmp_path / "o")
        assert main(["dualize", "--problem", worked_file, "--out", out]) == 0
        assert (tmp_path / "o" / "dual_stage_probes.csv").exists()
        assert (tmp_path / "o" / "dual_terminal_probes.csv").exists()

    def test_parse_error_exit_code(self, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        assert main(["solve", "--problem", str(bad), "--xi", "0"]) == 1

    def test_solver_nonoptimal_exit_code(self, tmp_path):
        data = worked_dict()
        data["stages"][0]["controlSet"] = {"type": "box", "lower": [-1.0],
                                           "upper": [1.0]}
        data["terminal"]["set"] = {"type": "box", "lower": [3.0],
                                   "upper": [4.0]}
        path = tmp_path / "infeas.json"
        path.write_text(json.dumps(data))
        code = main(["solve", "--problem", str(path), "--tau", "0",
                     "--xi", "0", "--out", str(tmp_path / "o")])
        assert code == 3

    def test_outdir_env_var(self, worked_file, tmp_path, monkeypatch):
        monkeypatch.setenv("BOLZADUAL_OUTDIR", str(tmp_path / "env_out"))
        assert main(["solve", "--problem", worked_file, "--xi", "1"]) == 0
        assert (tmp_path / "env_out" / "solve_primal.csv").exists()
