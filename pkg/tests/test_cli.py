from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from bapsolver import (
    EXIT_INPUT_ERROR,
    EXIT_NOT_CONVERGED,
    EXIT_OK,
    EXIT_SOLVER_ERROR,
    DimensionMismatch,
    SchemaError,
    load_problem,
    main,
    parse_problem,
    save_problem,
)

TWO_HALFSPACES = {
    "dimension": 2,
    "point": [1.0, 1.0],
    "sets": [
        {"type": "halfspace", "normal": [1.0, 0.0], "offset": 0.0},
        {"type": "halfspace", "normal": [0.0, 1.0], "offset": 0.0},
    ],
}


def _write(tmp_path: Path, doc, name="problem.json") -> str:
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def test_parse_problem_builds_all_set_types() -> None:
    doc = {
        "point": [0.0, 0.0],
        "sets": [
            {"type": "halfspace", "normal": [1.0, 0.0], "offset": 1.0},
            {"type": "hyperplane", "normal": [0.0, 1.0], "offset": 0.0},
            {"type": "box", "lo": [-1.0, -1.0], "hi": [1.0, 1.0]},
            {"type": "ball", "center": [0.0, 0.0], "radius": 2.0},
            {"type": "affine", "point": [0.0, 0.0], "directions": [[1.0, 0.0]]},
            {
                "type": "polyhedron",
                "halfspaces": [{"normal": [1.0, 1.0], "offset": 1.0}],
            },
        ],
    }
    problem, opts = parse_problem(doc)
    assert problem.m == 6
    assert problem.n == 2
    assert opts.algorithm == "dykstra"


def test_schema_errors_name_the_offending_field() -> None:
    with pytest.raises(SchemaError) as e:
        parse_problem({"point": [1.0], "sets": [{"type": "teapot"}]})
    assert "$.sets[0].type" in str(e.value)
    with pytest.raises(DimensionMismatch) as e:
        parse_problem(
            {
                "point": [1.0, 2.0],
                "sets": [{"type": "halfspace", "normal": [1.0], "offset": 0.0}],
            }
        )
    assert "$.sets[0].normal" in str(e.value)
    with pytest.raises(SchemaError) as e:
        parse_problem({"sets": []})
    assert "$.point" in str(e.value)
    with pytest.raises(SchemaError):
        parse_problem(dict(TWO_HALFSPACES, weights=[0.5, 0.6]))
    with pytest.raises(SchemaError) as e:
        parse_problem(
            dict(TWO_HALFSPACES, options={"warmstart": [[1.0, 0.0], [0.0]]})
        )
    assert "$.options.warmstart[1]" in str(e.value)


def test_round_trip_save_and_load(tmp_path: Path) -> None:
    doc = dict(
        TWO_HALFSPACES,
        algorithm="extended",
        oracle=[0.0, 0.0],
        options={"tolerance": 1e-9, "buffer_capacity": 8, "seed": 7, "warmstart": "random"},
    )
    problem, opts = parse_problem(doc)
    out = tmp_path / "saved.json"
    save_problem(problem, opts, str(out))
    problem2, opts2 = load_problem(str(out))
    assert np.allclose(problem.d, problem2.d)
    assert problem.m == problem2.m
    assert opts2.algorithm == "extended"
    assert opts2.tolerance == 1e-9
    assert opts2.buffer_capacity == 8
    assert opts2.seed == 7
    assert opts2.random_warmstart


def test_main_solves_and_writes_trace_and_report(tmp_path: Path) -> None:
    problem_file = _write(tmp_path, TWO_HALFSPACES)
    trace_file = tmp_path / "trace.csv"
    report_file = tmp_path / "report.json"
    code = main(
        [problem_file, "--trace-out", str(trace_file), "--report-out", str(report_file)]
    )
    assert code == EXIT_OK
    report = json.loads(report_file.read_text())
    assert report["converged"] is True
    assert np.allclose(report["primal"], [0.0, 0.0], atol=1e-10)
    with open(trace_file) as f:
        rows = list(csv.reader(f))
    assert rows[0][:6] == [
        "sweep",
        "h",
        "h_k",
        "primal_residual",
        "max_dual_norm",
        "v_monitor",
    ]
    assert rows[0][6:] == ["block_change_norm_1", "block_change_norm_2"]
    assert int(rows[1][0]) == 1


def test_exit_codes_for_bad_inputs(tmp_path: Path) -> None:
    assert main([str(tmp_path / "missing.json")]) == EXIT_INPUT_ERROR
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main([str(bad)]) == EXIT_INPUT_ERROR
    schema_bad = _write(tmp_path, {"point": [1.0], "sets": "nope"}, "schema.json")
    assert main([schema_bad]) == EXIT_INPUT_ERROR


def test_exit_code_when_budget_exhausted(tmp_path: Path) -> None:
    doc = dict(TWO_HALFSPACES, options={"max_sweeps": 1, "dual_tolerance": 1e-300})
    problem_file = _write(tmp_path, doc)
    assert main([problem_file]) == EXIT_NOT_CONVERGED


def test_exit_code_on_infeasible_instance(tmp_path: Path) -> None:
    doc = {
        "point": [0.0],
        "sets": [
            {
                "type": "polyhedron",
                "halfspaces": [
                    {"normal": [1.0], "offset": -1.0},
                    {"normal": [-1.0], "offset": -1.0},
                ],
            }
        ],
    }
    problem_file = _write(tmp_path, doc)
    assert main([problem_file, "--algorithm", "extended"]) == EXIT_SOLVER_ERROR


def test_random_warmstart_is_deterministic_under_a_seed(tmp_path: Path) -> None:
    doc = dict(TWO_HALFSPACES, options={"warmstart": "random", "seed": 7})
    problem_file = _write(tmp_path, doc)
    t1, t2 = tmp_path / "t1.csv", tmp_path / "t2.csv"
    assert main([problem_file, "--trace-out", str(t1)]) == EXIT_OK
    assert main([problem_file, "--trace-out", str(t2)]) == EXIT_OK
    assert t1.read_text() == t2.read_text()
    t3 = tmp_path / "t3.csv"
    assert main([problem_file, "--seed", "8", "--trace-out", str(t3)]) == EXIT_OK
    assert t1.read_text() != t3.read_text()


def test_report_carries_oracle_gap_and_apg_threshold(tmp_path: Path) -> None:
    doc = dict(
        TWO_HALFSPACES,
        algorithm="apg",
        oracle=[0.0, 0.0],
        options={"epsilon": 1e-2, "dual_tolerance": 1e-6},
    )
    problem_file = _write(tmp_path, doc)
    report_file = tmp_path / "report.json"
    code = main([problem_file, "--report-out", str(report_file)])
    assert code in (EXIT_OK, EXIT_NOT_CONVERGED)
    report = json.loads(report_file.read_text())
    assert report["algorithm"] == "apg"
    assert report["optimality_gap"] >= -1e-12
    assert isinstance(report["apg_threshold_index"], int)


def test_tree_algorithm_from_file(tmp_path: Path) -> None:
    doc = dict(
        TWO_HALFSPACES,
        algorithm="tree",
        tree={"children": [{"set": 0}, {"set": 1}], "shqp": True},
    )
    problem_file = _write(tmp_path, doc)
    report_file = tmp_path / "report.json"
    assert main([problem_file, "--report-out", str(report_file)]) == EXIT_OK
    report = json.loads(report_file.read_text())
    assert np.allclose(report["primal"], [0.0, 0.0], atol=1e-6)


def test_warmstart_file_override(tmp_path: Path) -> None:
    problem_file = _write(tmp_path, TWO_HALFSPACES)
    ws = tmp_path / "ws.json"
    ws.write_text(json.dumps([[0.5, 0.0], [0.0, 0.5]]))
    assert main([problem_file, "--warmstart-file", str(ws)]) == EXIT_OK
    bad = tmp_path / "ws_bad.json"
    bad.write_text(json.dumps([[0.5, 0.0]]))
    assert main([problem_file, "--warmstart-file", str(bad)]) == EXIT_INPUT_ERROR
