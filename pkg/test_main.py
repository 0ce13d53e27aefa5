import json

import numpy as np
import pytest

from experiment import TrialRecord, read_records, write_records
from instances import parameter_grid
from main import EXIT_INPUT, EXIT_NOT_FOUND, EXIT_OK, main
from stats import PUBLISHED_MODEL, simulate_outcomes


def record(i, cell, ok, N=8, variant="plain"):
    m, n, k, l, M = cell
    return TrialRecord(seed=i, N=N, m=m, n=n, k=k, l=l, M=M, variant=variant, success=ok, rank=int(ok),
                       steps=n, halt_reason="fixed_steps", multiplications=0, length_evals=0, wall_time_ms=0.0)


def simulated_records():
    cells = parameter_grid(M=(2, 8, 32, 128, 512))
    rows = simulate_outcomes(PUBLISHED_MODEL, [(p.m, p.n, p.k, p.l, p.M) for p in cells], 8,
                             np.random.Generator(np.random.PCG64(5)))
    return [record(i, cell, ok) for i, (cell, ok) in enumerate(rows)]


def write_json(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture
def membership_file(tmp_path):
    return write_json(tmp_path / "member.json", {
        "kind": "membership", "N": 5,
        "generators": [[1, 2], [3, -2]],
        "equations": [{"b": [2, -3]}],
    })


@pytest.fixture
def equations_file(tmp_path):
    # X = a1·a2 with a1 = s1, a2 = s2 s3; W = s3
    return write_json(tmp_path / "eq.json", {
        "N": 4,
        "generators": [[1], [2, 3]],
        "equations": [{"b": [1, 2, 3, 3]}],
        "truth": [[1, 1], [2, 1]],
    })


class TestWordCommands:
    def test_normal_form(self, capsys):
        assert main(["nf", "1", "2", "1", "--N", "3"]) == EXIT_OK
        assert capsys.readouterr().out.strip() == "D^-0 | 3 2 1"

    def test_length_of_an_inverse_letter(self, capsys):
        assert main(["len", "-1", "--N", "8"]) == EXIT_OK
        assert capsys.readouterr().out.strip() == "1"
        assert main(["len", "-1", "--N", "8", "--kind", "naive"]) == EXIT_OK
        assert capsys.readouterr().out.strip() == "55"

    def test_empty_word(self, capsys):
        assert main(["len"]) == EXIT_OK
        assert capsys.readouterr().out.strip() == "0"

    def test_bad_letter(self, capsys):
        assert main(["len", "9", "--N", "4"]) == EXIT_INPUT
        assert capsys.readouterr().out.startswith("❌")


class TestPredict:
    def test_published_model(self, capsys):
        assert main(["predict", "16", "128", "8", "8", "1024"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "p = 0.668" in out
        assert "multiplies M by 8.92" in out

    def test_fitted_model_file(self, tmp_path, capsys):
        doc = {"intercept": 0.0, "coefficients": [0.0, 0.0, 0.0, 0.0, 1.0]}
        path = write_json(tmp_path / "model.json", doc)
        assert main(["predict", "2", "16", "1", "4", "1", "--model", path]) == EXIT_OK
        out = capsys.readouterr().out
        assert "p = 0.500" in out
        assert "even odds: 1.00" in out


class TestSolveCommands:
    def test_membership_prints_the_presentation(self, membership_file, capsys):
        assert main(["membership", membership_file, "--M", "8"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "presentation: 2:-1" in out
        assert "identity_residual" in out

    def test_solve_with_exhaustive_beam(self, equations_file, tmp_path, capsys):
        out_path = tmp_path / "result.json"
        assert main(["solve", equations_file, "--M", "64", "--out", str(out_path)]) == EXIT_OK
        assert "truth rank:" in capsys.readouterr().out
        result = json.loads(out_path.read_text())
        assert result["halted_at_step"] == 2
        assert result["truth_rank"] >= 1
        assert len(result["trace"]) == 2

    def test_solve_with_backtracking_flag(self, equations_file):
        assert main(["solve", equations_file, "--M", "64", "--backtrack", "1,2"]) == EXIT_OK

    def test_element_outside_the_subgroup(self, tmp_path, capsys):
        path = write_json(tmp_path / "outside.json", {
            "kind": "membership", "N": 5,
            "generators": [[1, 2], [3, -2]],
            "equations": [{"b": [4, 4, 4]}],
        })
        assert main(["membership", path, "--M", "4", "--steps", "2"]) == EXIT_NOT_FOUND
        assert "nothing found" in capsys.readouterr().out

    def test_malformed_instance(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text("{")
        assert main(["solve", str(path)]) == EXIT_INPUT
        assert "❌" in capsys.readouterr().out

    def test_missing_instance(self, tmp_path):
        assert main(["membership", str(tmp_path / "nowhere.json")]) == EXIT_INPUT

    def test_bad_backtrack_argument(self, equations_file):
        with pytest.raises(SystemExit):
            main(["solve", equations_file, "--backtrack", "4"])


class TestExperimentCommands:
    def test_experiment_from_grid_file(self, tmp_path, capsys):
        grid = write_json(tmp_path / "grid.json", {
            "N": [4], "m": [2], "n": [2], "k": [1], "l": [2], "M": [4],
            "variants": ["plain", "membership"], "trials": 2, "gen_len": 5,
        })
        out = tmp_path / "results.csv"
        argv = ["experiment", "--grid", grid, "--out", str(out), "--no-timing", "--threads", "1"]
        assert main(argv) == EXIT_OK
        assert "4 rows" in capsys.readouterr().out
        first = out.read_bytes()
        assert main(argv) == EXIT_OK
        assert out.read_bytes() == first
        assert {r.variant for r in read_records(out)} == {"plain", "membership"}

    def test_fit_writes_a_model(self, tmp_path, capsys):
        records = simulated_records()
        csv_path = tmp_path / "results.csv"
        write_records(csv_path, records)
        model_path = tmp_path / "model.json"
        assert main(["fit", str(csv_path), "--out", str(model_path)]) == EXIT_OK
        assert "intercept" in capsys.readouterr().out
        model = json.loads(model_path.read_text())
        assert model["coefficients"][4] > 0
        assert main(["predict", "2", "16", "1", "4", "16", "--model", str(model_path)]) == EXIT_OK

    def test_fit_only_uses_the_chosen_variant(self, tmp_path):
        plain = simulated_records()
        extra = [record(len(plain) + i, (r.m, r.n, r.k, r.l, r.M), True, variant="backtracking")
                 for i, r in enumerate(plain)]
        models = []
        for name, records in (("plain", plain), ("mixed", plain + extra)):
            csv_path = tmp_path / f"{name}.csv"
            write_records(csv_path, records)
            model_path = tmp_path / f"{name}.json"
            assert main(["fit", str(csv_path), "--out", str(model_path)]) == EXIT_OK
            models.append(json.loads(model_path.read_text()))
        assert models[0] == models[1]
        assert main(["fit", str(tmp_path / "mixed.csv"), "--variant", "backtracking"]) == EXIT_INPUT


class TestPlots:
    def test_predicted_memory_curves(self, tmp_path, capsys):
        out = tmp_path / "memory.svg"
        assert main(["plot", "memory", "--model", "--out", str(out)]) == EXIT_OK
        svg = out.read_text()
        assert svg.startswith("<svg")
        assert svg.count("<polyline") == 10

    def test_trace_plot(self, equations_file, tmp_path):
        result = tmp_path / "result.json"
        main(["solve", equations_file, "--M", "64", "--out", str(result)])
        out = tmp_path / "trace.svg"
        assert main(["plot", "trace", str(result), "--out", str(out)]) == EXIT_OK
        assert "Normalised mean score" in out.read_text()

    def test_memory_plot_needs_input(self, tmp_path):
        assert main(["plot", "memory", "--out", str(tmp_path / "x.svg")]) == EXIT_INPUT

    def test_observed_memory_curves(self, tmp_path):
        records = [record(i, (2, n, 1, 4, M), i % 3 > 0)
                   for i, (n, M) in enumerate((n, M) for n in (16, 32) for M in (2, 8, 32) for _ in range(3))]
        csv_path = tmp_path / "results.csv"
        write_records(csv_path, records)
        out = tmp_path / "memory.svg"
        assert main(["plot", "memory", str(csv_path), "--out", str(out)]) == EXIT_OK
        svg = out.read_text()
        assert svg.count("<polyline") == 3
        assert all(f">M={M}<" in svg for M in (2, 8, 32))
        assert ">0.00<" in svg and ">1.00<" in svg

    def test_strand_sweep_curves(self, tmp_path):
        records = [record(i, (2, 16, 8, 8, 2), i % 2 == 0, N=N, variant=variant)
                   for i, (N, variant) in enumerate((N, v) for N in (8, 16) for v in ("plain", "membership"))]
        csv_path = tmp_path / "sweep.csv"
        write_records(csv_path, records)
        out = tmp_path / "sweep.svg"
        assert main(["plot", "sweep", str(csv_path), "--out", str(out)]) == EXIT_OK
        svg = out.read_text()
        assert svg.count("<polyline") == 2
        assert ">plain<" in svg and ">membership<" in svg
        assert ">0.00<" in svg and ">1.00<" in svg

    @pytest.mark.parametrize("kind", ["memory", "sweep"])
    def test_empty_results_file(self, kind, tmp_path, capsys):
        csv_path = tmp_path / "empty.csv"
        write_records(csv_path, [])
        assert main(["plot", kind, str(csv_path), "--out", str(tmp_path / "x.svg")]) == EXIT_INPUT
        assert "No data" in capsys.readouterr().out
