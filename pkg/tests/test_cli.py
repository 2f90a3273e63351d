import json

import numpy as np
import pytest

from c11interp.cli import (
    EXIT_DEGENERATE,
    EXIT_OK,
    EXIT_SOLVER,
    EXIT_VALIDATION,
    ParseError,
    bench_instance,
    ingest,
    main,
    run_bench,
    run_check,
)
from c11interp.core import FunctionData, OneField


def write_json(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


def field_doc():
    return {"dim": 1, "sites": [[0.0], [1.0]], "values": [0.0, 1.0],
            "gradients": [[0.0], [0.0]]}


def test_ingest_selects_problem_kind(tmp_path):
    p = write_json(tmp_path / "f.json", field_doc())
    assert isinstance(ingest(p), OneField)
    doc = field_doc()
    del doc["gradients"]
    p2 = write_json(tmp_path / "g.json", doc)
    assert isinstance(ingest(p2), FunctionData)


def test_ingest_single_site(tmp_path):
    p = write_json(tmp_path / "one.json",
                   {"dim": 2, "sites": [[0.0, 0.0]], "values": [1.0],
                    "gradients": [[0.5, 0.5]]})
    f = ingest(p)
    assert isinstance(f, OneField)
    assert f.num_sites == 1


def test_ingest_ragged_sites(tmp_path):
    p = write_json(tmp_path / "bad.json",
                   {"dim": 2, "sites": [[0.0, 0.0], [1.0]], "values": [0.0, 1.0]})
    with pytest.raises(ParseError):
        ingest(p)


def test_ingest_missing_field(tmp_path):
    p = write_json(tmp_path / "bad.json", {"dim": 1, "sites": [[0.0]]})
    with pytest.raises(ParseError):
        ingest(p)


def test_ingest_bad_json_reports_line(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{\n  broken\n}")
    with pytest.raises(ParseError) as err:
        ingest(str(p))
    assert "line" in str(err.value)


def test_gamma1_command(tmp_path, capsys):
    p = write_json(tmp_path / "f.json", field_doc())
    assert main(["gamma1", p]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["gamma1"] == pytest.approx(4.0)


def test_gamma1_approx_mode(tmp_path, capsys):
    p = write_json(tmp_path / "f.json", field_doc())
    assert main(["gamma1", p, "--mode", "approx"]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["gamma1_upper"] >= 4.0


def test_build_query_pipeline(tmp_path, capsys):
    data = write_json(tmp_path / "f.json", field_doc())
    model_path = str(tmp_path / "model.json")
    assert main(["build", data, "-o", model_path]) == EXIT_OK
    queries = tmp_path / "q.csv"
    queries.write_text("0.75\n0.0\n1.0\n")
    assert main(["query", model_path, str(queries)]) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 3
    v, g, cid = lines[0].split(",")
    assert float(v) == pytest.approx(0.875)
    assert float(g) == pytest.approx(1.0)
    assert main(["query", model_path, str(queries), "--tree"]) == EXIT_OK


def test_build_with_M_override(tmp_path):
    data = write_json(tmp_path / "f.json", field_doc())
    out = str(tmp_path / "m.json")
    assert main(["build", data, "--M", "8.0", "-o", out]) == EXIT_OK
    doc = json.loads(open(out).read())
    assert doc["M"] == 8.0


def test_build_inadmissible_M_is_solver_failure(tmp_path):
    data = write_json(tmp_path / "f.json", field_doc())
    assert main(["build", data, "--M", "3.0"]) == EXIT_SOLVER


def test_validation_exit_code(tmp_path):
    doc = field_doc()
    doc["sites"] = [[0.0], [0.0]]
    p = write_json(tmp_path / "dup.json", doc)
    assert main(["gamma1", p]) == EXIT_VALIDATION


def test_degenerate_exit_code(tmp_path):
    # Cocircular d=2 sites with equal jets: copower-degenerate lift.
    theta = np.linspace(0, 2 * np.pi, 5, endpoint=False)
    doc = {"dim": 2,
           "sites": np.column_stack([np.cos(theta), np.sin(theta)]).tolist(),
           "values": [1.0, 0.0, 0.0, 0.0, 0.0],
           "gradients": [[0.0, 0.0]] * 5}
    p = write_json(tmp_path / "deg.json", doc)
    assert main(["build", p]) == EXIT_DEGENERATE
    # jitter flag restores general position
    assert main(["build", p, "--jitter", "-o", str(tmp_path / "m.json")]) == EXIT_OK


def test_fit_then_query_reproduces_values(tmp_path, capsys):
    doc = {"dim": 1, "sites": [[0.0], [1.0], [2.0]], "values": [0.0, 1.0, 0.0]}
    data = write_json(tmp_path / "f.json", doc)
    model_path = str(tmp_path / "model.json")
    assert main(["fit", data, "--epsilon", "1e-5", "-o", model_path]) == EXIT_OK
    q = tmp_path / "q.csv"
    q.write_text("0.0\n1.0\n2.0\n")
    assert main(["query", model_path, str(q)]) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    got = [float(line.split(",")[0]) for line in lines]
    assert got == pytest.approx([0.0, 1.0, 0.0], abs=1e-10)


def test_check_command_passes_on_good_data(tmp_path):
    rng = np.random.default_rng(0)
    sites = rng.uniform(0, 5, size=(8, 2))
    doc = {"dim": 2, "sites": sites.tolist(),
           "values": rng.normal(size=8).tolist(),
           "gradients": rng.normal(size=(8, 2)).tolist()}
    p = write_json(tmp_path / "f.json", doc)
    assert main(["check", p]) == EXIT_OK


def test_check_affine_function_data(tmp_path):
    sites = np.array([[0.0], [1.0], [2.5]])
    doc = {"dim": 1, "sites": sites.tolist(),
           "values": (sites.ravel() * 2 + 1).tolist()}
    p = write_json(tmp_path / "aff.json", doc)
    assert main(["check", p, "--epsilon", "1e-5"]) == EXIT_OK


def test_check_d1_worked_example(tmp_path):
    p = write_json(tmp_path / "f.json", field_doc())
    assert main(["check", p]) == EXIT_OK


def test_corrupted_model_file(tmp_path):
    data = write_json(tmp_path / "f.json", field_doc())
    model_path = str(tmp_path / "model.json")
    main(["build", data, "-o", model_path])
    text = open(model_path).read().replace('"schema_version": 1',
                                           '"schema_version": 7')
    open(model_path, "w").write(text)
    q = tmp_path / "q.csv"
    q.write_text("0.5\n")
    assert main(["query", model_path, str(q)]) == EXIT_VALIDATION


def test_bench_deterministic_modulo_timing(tmp_path):
    rows1 = run_bench([16], 2, seed=42, num_queries=32, out=open(tmp_path / "a", "w"))
    rows2 = run_bench([16], 2, seed=42, num_queries=32, out=open(tmp_path / "b", "w"))
    keep = ("N", "d", "seed", "num_cells", "errors")
    assert [{k: r[k] for k in keep} for r in rows1] == \
        [{k: r[k] for k in keep} for r in rows2]
    assert rows1[0]["errors"] == 0


def test_bench_instance_recipe():
    rng = np.random.default_rng(0)
    f = bench_instance(64, 2, rng)
    side = 64.0  # N^(2/d) with N=64, d=2
    assert np.all(f.sites >= 0) and np.all(f.sites <= side)
    mags = np.abs(np.concatenate([f.values, f.gradients.ravel()]))
    assert np.all((mags >= 0.9) & (mags <= 1.1))


def test_bench_command_csv(tmp_path):
    out = str(tmp_path / "bench.csv")
    assert main(["bench", "--sizes", "16", "--dim", "2", "--seed", "1",
                 "-o", out]) == EXIT_OK
    lines = open(out).read().strip().splitlines()
    assert lines[0].startswith("N,d,seed,t_gamma")
    assert len(lines) == 2
