import io
import json

import pytest

from vgplan.cli import SUMMARY_COLUMNS, main
from vgplan.planner import save_graph
from vgplan.scenarios import rect
from vgplan.vgraph import VGraph


def run(argv):
    buf = io.StringIO()
    code = main(argv, buf)
    return code, buf.getvalue()


@pytest.fixture
def square_world(tmp_path):
    p = tmp_path / "square.world"
    p.write_text("bounds -2 -5 12 5\npoly 4 4 -1 6 -1 6 1 4 1\n")
    return p


def test_plan_prints_waypoints_and_length(square_world):
    code, out = run(["plan", str(square_world), "--start", "0", "0", "--goal", "10", "0"])
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "waypoint 0 0.000000 0.000000"
    assert "length 10.246211" in lines
    assert "via_unknown 0" in lines and lines[-1].startswith("search_ms ")


def test_plan_from_saved_graph(tmp_path):
    g = tmp_path / "g.vgraph"
    g.write_bytes(save_graph(VGraph.from_polygons([rect(4, -1, 6, 1)])))
    code, out = run(["plan", "--graph", str(g), "--start", "0", "0", "--goal", "10", "0"])
    assert code == 0 and "length 10.246211" in out


def test_plan_exit_codes(tmp_path, square_world, capsys):
    code, _ = run(["plan", str(square_world), "--start", "0", "0", "--goal", "5", "0"])
    assert code == 1 and "terminal_in_obstacle" in capsys.readouterr().err
    sealed = tmp_path / "sealed.world"
    sealed.write_text("bounds -10 -10 10 10\n"
                      "poly 4 -3 -3 3 -3 3 -2 -3 -2\npoly 4 -3 2 3 2 3 3 -3 3\n"
                      "poly 4 -3 -2.5 -2 -2.5 -2 2.5 -3 2.5\npoly 4 2 -2.5 3 -2.5 3 2.5 2 2.5\n"
                      "poly 4 -0.5 1 0.5 1 0.5 1.5 -0.5 1.5\n")
    code, _ = run(["plan", str(sealed), "--start", "-8", "0", "--goal", "0", "0"])
    assert code == 2 and "no_path: no_route" in capsys.readouterr().err


def test_bad_inputs_exit_one(tmp_path, capsys):
    bad = tmp_path / "bad.world"
    bad.write_text("bounds 0 0 10 10\npoly 3 0 0 1\n")
    assert run(["plan", str(bad), "--start", "1", "1", "--goal", "2", "2"])[0] == 1
    assert "bad.world:2" in capsys.readouterr().err
    assert run(["plan", str(tmp_path / "nope.world"), "--start", "1", "1", "--goal", "2", "2"])[0] == 1
    corrupt = tmp_path / "g.vgraph"
    corrupt.write_text("vgraph 1\nV 0 zero 0 0 - - free 0\n")
    assert run(["plan", "--graph", str(corrupt), "--start", "1", "1", "--goal", "2", "2"])[0] == 1
    assert "line 2" in capsys.readouterr().err
    with pytest.raises(SystemExit) as err:
        main(["plan", "--start", "1"])
    assert err.value.code == 1


def test_simulate_is_deterministic(tmp_path):
    argv = ["simulate", "builtin:cup", "--seed", "7", "--noise", "0.02"]
    code, a = run(argv)
    assert code == 0
    assert a == run(argv)[1]
    assert a.splitlines()[0].startswith("planner,setting,seed,row")
    svg = tmp_path / "run.svg"
    out = tmp_path / "run.csv"
    assert run(argv + ["--out", str(out), "--render", str(svg)])[0] == 0
    assert out.read_text() == a and svg.read_text().startswith("<svg")


def test_simulate_world_file(square_world):
    code, out = run(["simulate", str(square_world), "--start", "0", "0", "--goal", "10", "0", "--timing"])
    assert code == 0
    assert "search_ms" in out.splitlines()[0]
    assert ",goal,0,,,10.000000,0.000000,reached," in out


def test_benchmark_rows_per_map(tmp_path, square_world):
    suite = tmp_path / "suite.json"
    suite.write_text(json.dumps({"maps": [
        {"world": square_world.name, "start": [0, 0], "goals": [[10, 0], [0, 3]], "name": "sq"},
        {"world": "builtin:cup", "planners": ["vgraph"], "settings": ["accumulate"]},
    ]}))
    summary = tmp_path / "summary.csv"
    code, table = run(["benchmark", str(suite), "--out", str(summary)])
    assert code == 0
    rows = summary.read_text().splitlines()
    assert rows[0].split(",") == SUMMARY_COLUMNS
    # three planners by two settings on the first map, one cell on the second
    assert len(rows) == 1 + 6 + 1
    assert all(r.split(",")[4] == "0" for r in rows[1:])
    assert table.splitlines()[0].split() == SUMMARY_COLUMNS


def test_benchmark_empty_suite(tmp_path):
    suite = tmp_path / "empty.json"
    suite.write_text(json.dumps({"maps": []}))
    assert run(["benchmark", str(suite)])[0] == 1
