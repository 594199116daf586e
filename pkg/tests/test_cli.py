import json

import numpy as np
import pytest
from numpy.testing import assert_allclose

from polycov.cli import (
    EXIT_EMPTY,
    EXIT_INPUT,
    EXIT_NOT_INFORMATIVE,
    EXIT_OK,
    EXIT_UNSUPPORTED,
    EXIT_VERIFY_FAIL,
    main,
)
from polycov.data import save_bounds, CrossCovBounds
from polycov.reproduce import EXAMPLE1_U, EXAMPLE1_X

EX1_CSV = "\n".join(
    ["t,x1,u1"]
    + [f"{t},{EXAMPLE1_X[0][t]},{EXAMPLE1_U[0][t]}" for t in range(4)]
    + ["4,4.25,", ""]
)


def write(path, text):
    path.write_text(text)
    return str(path)


@pytest.fixture
def ex1(tmp_path):
    data = write(tmp_path / "data.csv", EX1_CSV)
    instr = write(tmp_path / "instr.json", '{"kind": "lagged_input", "lags": 1}')
    save_bounds(CrossCovBounds(C_l=[[-0.25]], C_u=[[0.25]]), tmp_path / "bounds.json")
    return {"data": data, "instr": instr, "bounds": str(tmp_path / "bounds.json"), "dir": tmp_path}


class TestDatagen:
    def test_shapes_and_noise_file(self, tmp_path):
        out = tmp_path / "d.csv"
        rc = main(["datagen", "--A", "1.5", "--B", "1", "--N", "10",
                   "--noise-sq-bound", "0.2", "--seed", "7", "--out", str(out)])
        assert rc == EXIT_OK
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 12  # header + 11 state rows
        assert (tmp_path / "d.noise.csv").exists()

    def test_zero_noise_bound(self, tmp_path):
        out = tmp_path / "d.csv"
        main(["datagen", "--A", "0.5", "--B", "1", "--N", "5", "--seed", "1", "--out", str(out)])
        noise = (tmp_path / "d.noise.csv").read_text().strip().splitlines()[1:]
        assert all(float(row.split(",")[1]) == 0.0 for row in noise)

    def test_same_seed_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        args = ["datagen", "--A", "1.5", "--B", "1", "--N", "10", "--noise-sq-bound", "0.2", "--seed", "3"]
        main(args + ["--out", str(a)])
        main(args + ["--out", str(b)])
        assert a.read_bytes() == b.read_bytes()

    def test_explicit_input(self, tmp_path):
        out = tmp_path / "d.csv"
        rc = main(["datagen", "--A", "1.5", "--B", "1", "--input", "1,1,-0.5,-2", "--out", str(out)])
        assert rc == EXIT_OK
        assert out.read_text().splitlines()[1].startswith("0,0.0,1.0")


class TestSet:
    def test_scalar_example_unbounded(self, ex1, tmp_path):
        out = tmp_path / "set.json"
        rc = main(["set", "--data", ex1["data"], "-n", "1", "-m", "1",
                   "--instruments", ex1["instr"], "--bounds", ex1["bounds"], "--out", str(out)])
        assert rc == EXIT_OK
        doc = json.loads(out.read_text())
        assert doc["bounded"] == "unbounded"
        assert_allclose(doc["G"], [[-4.25], [3.125]])

    def test_bounded_writes_vertices(self, ex1, tmp_path):
        instr2 = write(tmp_path / "i2.json", '{"kind": "lagged_input", "lags": 2}')
        save_bounds(CrossCovBounds(C_l=-0.25 * np.ones((2, 1)), C_u=0.25 * np.ones((2, 1))),
                    tmp_path / "b2.json")
        out = tmp_path / "set2.json"
        rc = main(["set", "--data", ex1["data"], "-n", "1", "-m", "1",
                   "--instruments", instr2, "--bounds", str(tmp_path / "b2.json"), "--out", str(out)])
        assert rc == EXIT_OK
        vdoc = json.loads((tmp_path / "set2.vertices.json").read_text())
        assert vdoc["L"] >= 1

    def test_crossed_bounds_exit_2(self, ex1, tmp_path):
        bad = write(tmp_path / "bad.json", '{"M": 1, "n": 1, "C_l": [[0.3]], "C_u": [[-0.3]]}')
        rc = main(["set", "--data", ex1["data"], "-n", "1", "-m", "1",
                   "--instruments", ex1["instr"], "--bounds", bad, "--out", str(tmp_path / "s.json")])
        assert rc == EXIT_INPUT

    def test_empty_set_exit_3(self, ex1, tmp_path):
        # R2 = -R1 with one-sided windows that cannot hold simultaneously
        U = EXAMPLE1_U[0]
        instr = write(
            tmp_path / "ie.json",
            json.dumps({"kind": "explicit", "R_minus": [U, [-u for u in U]]}),
        )
        save_bounds(CrossCovBounds(C_l=0.1 * np.ones((2, 1)), C_u=0.2 * np.ones((2, 1))),
                    tmp_path / "be.json")
        rc = main(["set", "--data", ex1["data"], "-n", "1", "-m", "1",
                   "--instruments", instr, "--bounds", str(tmp_path / "be.json"),
                   "--out", str(tmp_path / "se.json")])
        assert rc == EXIT_EMPTY


def build_ex1_set(ex1, tmp_path):
    out = tmp_path / "set.json"
    main(["set", "--data", ex1["data"], "-n", "1", "-m", "1",
          "--instruments", ex1["instr"], "--bounds", ex1["bounds"], "--out", str(out)])
    return str(out)


class TestSynthAndVerify:
    def test_scalar_strip_gain(self, ex1, tmp_path):
        sp = build_ex1_set(ex1, tmp_path)
        ctrl = tmp_path / "ctrl.json"
        rc = main(["synth", "--set", sp, "--objective", "stab", "--out", str(ctrl)])
        assert rc == EXIT_OK
        doc = json.loads(ctrl.read_text())
        assert abs(doc["K"][0][0] + 0.7353) < 1e-3

    def test_hinf_on_unbounded_unsupported(self, ex1, tmp_path):
        sp = build_ex1_set(ex1, tmp_path)
        perf = write(tmp_path / "perf.json", '{"C": [[1.0]], "D": [[0.0]]}')
        rc = main(["synth", "--set", sp, "--objective", "hinf", "--gamma", "2.0",
                   "--perf", perf, "--out", str(tmp_path / "c.json")])
        assert rc == EXIT_UNSUPPORTED

    def test_not_informative_exit_4(self, tmp_path):
        # a box of systems containing the uncontrollable unstable pair (2, 0)
        from polycov.feasible import FeasibleSet, RowPolyhedron, save_set

        row = RowPolyhedron(G=np.eye(2), lo=[1.8, -0.1], hi=[2.2, 0.1])
        save_set(FeasibleSet(n=1, m=1, rows=[row], bounded="bounded"), tmp_path / "s.json")
        rc = main(["synth", "--set", str(tmp_path / "s.json"), "--objective", "stab",
                   "--out", str(tmp_path / "c.json")])
        assert rc == EXIT_NOT_INFORMATIVE
        assert json.loads((tmp_path / "c.json").read_text())["status"] == "not_informative"

    def test_verify_against_true_system(self, ex1, tmp_path):
        sp = build_ex1_set(ex1, tmp_path)
        ctrl = tmp_path / "ctrl.json"
        main(["synth", "--set", sp, "--objective", "stab", "--out", str(ctrl)])
        sysf = write(tmp_path / "sys.json", '{"A": [[1.5]], "B": [[1.0]]}')
        rep = tmp_path / "rep.json"
        rc = main(["verify", "--controller", str(ctrl), "--set", sp,
                   "--true-system", sysf, "--out", str(rep)])
        assert rc == EXIT_OK
        doc = json.loads(rep.read_text())
        assert abs(doc["true_system"]["spectral_radius"] - 0.7647) < 1e-3
        assert doc["set"]["stable"]

    def test_verify_zero_gain_fails(self, ex1, tmp_path):
        sp = build_ex1_set(ex1, tmp_path)
        ctrl = write(tmp_path / "zero.json", '{"K": [[0.0]], "certificates": {}, "status": "feasible"}')
        rc = main(["verify", "--controller", ctrl, "--set", sp, "--out", str(tmp_path / "r.json")])
        assert rc == EXIT_VERIFY_FAIL

    def test_pipeline_end_to_end(self, tmp_path):
        data = tmp_path / "d.csv"
        main(["datagen", "--A", "1.5", "--B", "1", "--N", "10", "--noise-sq-bound", "0.2",
              "--input-scale", "0.5", "--seed", "58", "--out", str(data)])
        instr = write(tmp_path / "i.json", '{"kind": "lagged_input", "lags": 5}')
        save_bounds(CrossCovBounds(C_l=-0.1 * np.ones((5, 1)), C_u=0.1 * np.ones((5, 1))),
                    tmp_path / "b.json")
        sp = tmp_path / "s.json"
        assert main(["set", "--data", str(data), "-n", "1", "-m", "1", "--instruments", instr,
                     "--bounds", str(tmp_path / "b.json"), "--out", str(sp)]) == EXIT_OK
        ctrl = tmp_path / "c.json"
        assert main(["synth", "--set", str(sp), "--objective", "stab", "--out", str(ctrl)]) == EXIT_OK
        sysf = write(tmp_path / "sys.json", '{"A": [[1.5]], "B": [[1.0]]}')
        assert main(["verify", "--controller", str(ctrl), "--set", str(sp), "--true-system", sysf,
                     "--samples", "20", "--out", str(tmp_path / "r.json")]) == EXIT_OK

    def test_minimize_gamma_round_trip(self, tmp_path):
        data = tmp_path / "d.csv"
        main(["datagen", "--A", "1.5", "--B", "1", "--N", "10", "--noise-sq-bound", "0.2",
              "--input-scale", "0.5", "--seed", "58", "--out", str(data)])
        instr = write(tmp_path / "i.json", '{"kind": "lagged_input", "lags": 5}')
        save_bounds(CrossCovBounds(C_l=-0.1 * np.ones((5, 1)), C_u=0.1 * np.ones((5, 1))),
                    tmp_path / "b.json")
        sp = tmp_path / "s.json"
        main(["set", "--data", str(data), "-n", "1", "-m", "1", "--instruments", instr,
              "--bounds", str(tmp_path / "b.json"), "--out", str(sp)])
        perf = write(tmp_path / "p.json", '{"C": [[1.0]], "D": [[0.0]]}')
        ctrl = tmp_path / "c.json"
        rc = main(["synth", "--set", str(sp), "--objective", "hinf", "--minimize-gamma",
                   "--perf", perf, "--out", str(ctrl)])
        assert rc == EXIT_OK
        doc = json.loads(ctrl.read_text())
        assert doc["gamma"] is not None and doc["gamma"] > 1.0
        rc = main(["verify", "--controller", str(ctrl), "--set", str(sp), "--criterion", "hinf",
                   "--perf", perf, "--samples", "2", "--out", str(tmp_path / "r.json")])
        assert rc == EXIT_OK

    def test_hinf_controller_respects_level(self, tmp_path):
        data = tmp_path / "d.csv"
        main(["datagen", "--A", "1.5", "--B", "1", "--N", "10", "--noise-sq-bound", "0.2",
              "--input-scale", "0.5", "--seed", "58", "--out", str(data)])
        instr = write(tmp_path / "i.json", '{"kind": "lagged_input", "lags": 4}')
        save_bounds(CrossCovBounds(C_l=-0.1 * np.ones((4, 1)), C_u=0.1 * np.ones((4, 1))),
                    tmp_path / "b.json")
        sp = tmp_path / "s.json"
        main(["set", "--data", str(data), "-n", "1", "-m", "1", "--instruments", instr,
              "--bounds", str(tmp_path / "b.json"), "--out", str(sp)])
        perf = write(tmp_path / "p.json", '{"C": [[1.0]], "D": [[0.0]]}')
        ctrl = tmp_path / "c.json"
        assert main(["synth", "--set", str(sp), "--objective", "hinf", "--gamma", "3.0",
                     "--perf", perf, "--out", str(ctrl)]) == EXIT_OK
        rep = tmp_path / "r.json"
        rc = main(["verify", "--controller", str(ctrl), "--set", str(sp), "--criterion", "hinf",
                   "--perf", perf, "--samples", "3", "--out", str(rep)])
        assert rc == EXIT_OK
        doc = json.loads(rep.read_text())
        assert doc["set"]["worst_value"] <= 3.0 * (1 + 1e-6)


class TestReproduce:
    def test_example1_passes(self, capsys):
        assert main(["reproduce", "example1"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "PASS" in out and "FAIL" not in out.replace("PASS", "")

    def test_example2_passes_and_is_deterministic(self, capsys, tmp_path):
        assert main(["reproduce", "example2", "--out", str(tmp_path / "r1.json")]) == EXIT_OK
        first = capsys.readouterr().out
        assert main(["reproduce", "example2", "--out", str(tmp_path / "r2.json")]) == EXIT_OK
        second = capsys.readouterr().out
        assert first.replace("r1.json", "") == second.replace("r2.json", "")
        doc = json.loads((tmp_path / "r1.json").read_text())
        assert doc["passed"]
        assert all(doc["per_m"][m]["status"] == "feasible" for m in ("2", "3", "4", "5"))

    def test_missing_file_exit_2(self, tmp_path):
        rc = main(["set", "--data", str(tmp_path / "nope.csv"), "-n", "1", "-m", "1",
                   "--instruments", str(tmp_path / "nope.json"), "--bounds", str(tmp_path / "nb.json"),
                   "--out", str(tmp_path / "s.json")])
        assert rc == EXIT_INPUT


class TestReproduceRobustness:
    def test_bad_seed_degrades_gracefully(self, capsys):
        # a realization violating the bounds may give empty or uninformative sets;
        # the command must report FAIL rather than crash
        from polycov.cli import EXIT_VERIFY_FAIL

        rc = main(["reproduce", "example2", "--seed", "17"])
        assert rc == EXIT_VERIFY_FAIL
        out = capsys.readouterr().out
        assert "FAIL" in out
