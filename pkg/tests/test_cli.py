import json

import jsonschema
import numpy as np
import pytest

from graphdetect.cli import EXIT_INPUT_ERROR, EXIT_NOT_DETECTABLE, EXIT_OK, main, write_atomic
from graphdetect.graph import parse_graph
from graphdetect.report import ReportDocument, load_schema

from conftest import FIXTURES, GOLDEN, run_golden_case


def run(capsys, *argv):
    capsys.readouterr()
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.mark.parametrize("name, expected_code", [("p3", EXIT_OK), ("disconnected", EXIT_NOT_DETECTABLE)])
def test_golden_reports(capsys, name, expected_code):
    code, text = run_golden_case(name, capsys)
    assert code == expected_code
    assert text == (GOLDEN / f"{name}.json").read_text()


@pytest.mark.parametrize("argv, expected", [
    (["--graph", FIXTURES / "p3.txt", "--dt", "0.1", "--measure", "1"], EXIT_OK),
    (["--graph", FIXTURES / "disconnected.txt", "--dt", "0.1", "--measure", "1"], EXIT_NOT_DETECTABLE),
    (["--graph", FIXTURES / "p3.txt", "--dt", "0.1", "--c-matrix", FIXTURES / "c_diff.txt"], EXIT_NOT_DETECTABLE),
    (["--graph", FIXTURES / "p3.txt", "--dt", "0", "--measure", "1"], EXIT_INPUT_ERROR),
    (["--graph", FIXTURES / "p3.txt", "--dt", "-1", "--measure", "1"], EXIT_INPUT_ERROR),
    (["--graph", FIXTURES / "missing.txt", "--dt", "0.1", "--measure", "1"], EXIT_INPUT_ERROR),
    (["--graph", FIXTURES / "c_diff.txt", "--dt", "0.1", "--measure", "1"], EXIT_INPUT_ERROR),
    (["--graph", FIXTURES / "p3.txt", "--dt", "0.1"], EXIT_INPUT_ERROR),
    (["--graph", FIXTURES / "p3.txt", "--dt", "0.1", "--measure", "4"], EXIT_INPUT_ERROR),
    (["--graph", FIXTURES / "p3.txt", "--generate", "path:n=3", "--dt", "0.1", "--measure", "1"],
     EXIT_INPUT_ERROR),
    (["--generate", "random:n=5,seed=2,lo=0.1,hi=5", "--dt", "0.1", "--measure", "2"], EXIT_OK),
    (["--schedule", FIXTURES / "schedule_periodic.json", "--measure", "1"], EXIT_OK),
    (["--schedule", FIXTURES / "schedule_broken.json", "--measure", "1"], EXIT_OK),
    (["--dt", "0.1", "--measure", "1"], EXIT_INPUT_ERROR),
])
def test_exit_codes(capsys, argv, expected):
    code, out, err = run(capsys, "analyze", *argv)
    assert code == expected
    if expected == EXIT_INPUT_ERROR:
        assert out == "" and err.startswith("error:")


def test_dt_message(capsys):
    _, _, err = run(capsys, "analyze", "--graph", FIXTURES / "p3.txt", "--dt", "0", "--measure", "1")
    assert "dt must be positive" in err


def test_unknown_flag(capsys):
    assert main(["analyze", "--bogus"]) == EXIT_INPUT_ERROR


def test_reports_validate_and_round_trip(capsys):
    schema = load_schema()
    cases = [
        ["--graph", FIXTURES / "p3.txt", "--dt", "0.1", "--measure", "1"],
        ["--graph", FIXTURES / "disconnected.txt", "--dt", "0.1", "--measure", "1,3"],
        ["--graph", FIXTURES / "p3.txt", "--dt", "0.1", "--c-matrix", FIXTURES / "c_diff.txt",
         "--b-matrix", FIXTURES / "b_e1.txt"],
        ["--schedule", FIXTURES / "schedule_periodic.json", "--measure", "1"],
        ["--generate", "cycle:n=4,directed=true", "--dt", "1", "--measure", "1"],
    ]
    for argv in cases:
        _, out, _ = run(capsys, "analyze", *argv)
        doc = json.loads(out)
        jsonschema.validate(doc, schema)
        assert ReportDocument.from_json(out).to_json() == out


def test_report_content(capsys):
    _, out, _ = run(capsys, "analyze", "--graph", FIXTURES / "disconnected.txt", "--dt", "0.1", "--measure", "1")
    doc = json.loads(out)
    det = doc["detectability"]
    assert det["certificate_applicable"] is False and det["numeric_detectable"] is False
    assert doc["laplacian"]["strongly_connected"] is False
    assert doc["spectral"]["positive"] is False


def test_stabilizability_section(capsys):
    _, out, _ = run(capsys, "analyze", "--graph", FIXTURES / "p3.txt", "--dt", "0.1", "--measure", "1",
                    "--b-matrix", FIXTURES / "b_e1.txt")
    stab = json.loads(out)["stabilizability"]
    assert stab["certificate_applicable"] and stab["certificate_stabilizable"] and stab["numeric_stabilizable"]
    assert stab["uncontrollable_dimension"] == 0


def test_csv_report(capsys):
    code, out, _ = run(capsys, "analyze", "--graph", FIXTURES / "p3.txt", "--dt", "0.1", "--measure", "1",
                       "--format", "csv")
    assert code == EXIT_OK
    rows = dict(line.split(",", 1) for line in out.splitlines()[1:])
    assert out.startswith("key,value\n")
    assert rows["detectability.certificate_detectable"] == "True"


def test_out_file(tmp_path, capsys):
    target = tmp_path / "r.json"
    code, out, _ = run(capsys, "analyze", "--graph", FIXTURES / "p3.txt", "--dt", "0.1", "--measure", "1",
                       "--out", target)
    assert code == EXIT_OK and out == ""
    assert json.loads(target.read_text())["schema_version"] == 1
    assert [p.name for p in tmp_path.iterdir()] == ["r.json"]


def test_unwritable_out_leaves_nothing(tmp_path, capsys):
    code, _, err = run(capsys, "analyze", "--graph", FIXTURES / "p3.txt", "--dt", "0.1", "--measure", "1",
                       "--out", tmp_path / "nope" / "r.json")
    assert code == EXIT_INPUT_ERROR and "cannot write" in err


def test_write_atomic_replaces(tmp_path):
    target = tmp_path / "f.txt"
    target.write_text("old")
    write_atomic(target, "new")
    assert target.read_text() == "new"
    assert len(list(tmp_path.iterdir())) == 1


class TestBatch:
    def test_batch(self, tmp_path, capsys):
        src = tmp_path / "in"
        src.mkdir()
        for name in ("p3.txt", "disconnected.txt"):
            (src / name).write_text((FIXTURES / name).read_text())
        out_dir = tmp_path / "out"
        code, out, _ = run(capsys, "analyze", "--batch", src, "--dt", "0.1", "--measure", "1", "--out", out_dir)
        assert code == EXIT_NOT_DETECTABLE
        assert sorted(p.name for p in out_dir.iterdir()) == ["disconnected.json", "p3.json"]
        assert "p3.txt\t0\tdetectable" in out
        p3 = json.loads((out_dir / "p3.json").read_text())
        assert p3["detectability"]["certificate_detectable"] is True

    def test_batch_needs_out(self, tmp_path, capsys):
        code, _, err = run(capsys, "analyze", "--batch", tmp_path, "--dt", "0.1", "--measure", "1")
        assert code == EXIT_INPUT_ERROR and "--out" in err

    def test_batch_bad_file(self, tmp_path, capsys):
        (tmp_path / "bad.txt").write_text("oops")
        code, out, _ = run(capsys, "analyze", "--batch", tmp_path, "--dt", "0.1", "--measure", "1",
                           "--out", tmp_path / "o")
        assert code == EXIT_INPUT_ERROR and "bad.txt\t1" in out


class TestGenerate:
    def test_path(self, tmp_path, capsys):
        target = tmp_path / "p3.txt"
        assert main(["generate", "path", "--n", "3", "--out", str(target)]) == EXIT_OK
        assert parse_graph(target.read_text()) == parse_graph((FIXTURES / "p3.txt").read_text())

    def test_random_deterministic(self, tmp_path):
        a, b = tmp_path / "a.txt", tmp_path / "b.txt"
        for target in (a, b):
            assert main(["generate", "random", "--n", "6", "--seed", "7", "--out", str(target)]) == EXIT_OK
        assert a.read_bytes() == b.read_bytes()

    def test_grid(self, tmp_path):
        target = tmp_path / "grid.txt"
        assert main(["generate", "grid", "--rows", "2", "--cols", "3", "--out", str(target)]) == EXIT_OK
        g = parse_graph(target.read_text())
        assert g.n == 6 and g.edge_count == 7

    def test_invalid(self, capsys):
        code, _, err = run(capsys, "generate", "path", "--n", "0")
        assert code == EXIT_INPUT_ERROR and err


class TestSimulate:
    def test_consensus_to_average(self, capsys):
        code, out, _ = run(capsys, "simulate", "--graph", FIXTURES / "p3.txt", "--dt", "1",
                           "--x0", "1,0,0", "--steps", "50")
        assert code == EXIT_OK
        lines = out.splitlines()
        assert lines[0] == "t,x_1,x_2,x_3" and len(lines) == 52
        final = np.array([float(v) for v in lines[-1].split(",")[1:]])
        np.testing.assert_allclose(final, np.full(3, 1 / 3), atol=1e-6)

    def test_zero_steps(self, capsys):
        code, out, _ = run(capsys, "simulate", "--graph", FIXTURES / "p3.txt", "--dt", "0.1",
                           "--steps", "0", "--measure", "2")
        assert code == EXIT_OK
        assert out.splitlines() == ["t,x_1,x_2,x_3,y_1", "0.0,1.0,0.0,0.0,0.0"]

    def test_json_format(self, capsys):
        _, out, _ = run(capsys, "simulate", "--graph", FIXTURES / "p3.txt", "--dt", "0.1", "--steps", "2",
                        "--format", "json")
        assert len(json.loads(out)["x"]) == 3

    def test_bad_x0(self, capsys):
        code, _, err = run(capsys, "simulate", "--graph", FIXTURES / "p3.txt", "--dt", "0.1", "--x0", "1,0")
        assert code == EXIT_INPUT_ERROR and "--x0" in err


class TestEstimate:
    def test_bounded_trace(self, capsys):
        code, out, _ = run(capsys, "estimate", "--graph", FIXTURES / "p3.txt", "--dt", "0.1",
                           "--measure", "1", "--steps", "1000", "--seed", "3")
        assert code == EXIT_OK
        lines = out.splitlines()
        assert lines[0] == "k,trace_P,err_norm" and len(lines) == 1001
        traces = [float(line.split(",")[1]) for line in lines[1:]]
        assert max(traces[99:]) <= 10 * traces[99]

    def test_deterministic(self, capsys):
        argv = ["estimate", "--graph", FIXTURES / "p3.txt", "--dt", "0.1", "--measure", "1",
                "--steps", "20", "--seed", "5"]
        assert run(capsys, *argv)[1] == run(capsys, *argv)[1]

    def test_schedule(self, capsys):
        code, out, _ = run(capsys, "estimate", "--schedule", FIXTURES / "schedule_periodic.json",
                           "--measure", "1", "--steps", "10")
        assert code == EXIT_OK and len(out.splitlines()) == 11

    def test_needs_output(self, capsys):
        code, _, _ = run(capsys, "estimate", "--graph", FIXTURES / "p3.txt", "--dt", "0.1")
        assert code == EXIT_INPUT_ERROR
