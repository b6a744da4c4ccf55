from __future__ import annotations

import json
import math

import numpy as np
import pytest

from conftest import CROSS, GENERIC_TRIPLE
from soliton_networks.cli import main
from soliton_networks.flow import WorldSheet, blowup_lift
from soliton_networks.io import load_network, read_csv
from soliton_networks.plotting import EDGE_COLOR, network_figure
from soliton_networks.steiner import solve_expander


def _rays(angles) -> str:
    return ",".join(repr(a) for a in angles)


@pytest.fixture(scope="module")
def solved(tmp_path_factory):
    out = tmp_path_factory.mktemp("solve")
    assert main(["solve", "--rays", _rays(GENERIC_TRIPLE), "--out-dir", str(out)]) == 0
    return out


def test_solve_writes_one_document(solved):
    docs = sorted(p.name for p in solved.glob("solution_*.json"))
    assert docs == ["solution_00.json"]
    header, rows = read_csv(solved / "solutions.csv")
    assert header[0] == "index" and len(rows) == 1
    assert read_csv(solved / "failures.csv")[1] == []
    manifest = json.loads((solved / "manifest.json").read_text())
    assert manifest["counts"]["solutions"] == 1
    assert set(manifest["outputs"]) <= {p.name for p in solved.iterdir()}
    assert (solved / "solutions.svg").read_text().startswith("<?xml")


def test_solve_cross_finds_two(tmp_path):
    assert main(["solve", "--rays", _rays(CROSS), "--out-dir", str(tmp_path)]) == 0
    assert len(list(tmp_path.glob("solution_*.json"))) == 2


@pytest.mark.parametrize("argv", [
    ["solve", "--rays", "0,0", "--out-dir", "{out}"],
    ["solve", "--rays", "0,1,x", "--out-dir", "{out}"],
    ["solve", "--rays", "0,2,4", "--tol", "speed=1", "--out-dir", "{out}"],
    ["solve", "--rays", "0,2,4", "--R-schedule", "8,4", "--out-dir", "{out}"],
])
def test_bad_input_exits_with_two(tmp_path, argv, capsys):
    assert main([a.format(out=tmp_path) for a in argv]) == 2
    assert capsys.readouterr().err.startswith("error:")


def test_flow_frames_are_dilations(solved, tmp_path):
    doc = solved / "solution_00.json"
    assert main(["flow", str(doc), "--times", "0.5,2", "--out-dir", str(tmp_path)]) == 0
    base = load_network(doc)
    _, rows = read_csv(tmp_path / "trajectories.csv")
    pos = {float(t): np.array([float(x), float(y)]) for t, _v, x, y in rows}
    assert np.array_equal(pos[0.5], base.vertex_positions[0])
    assert np.allclose(pos[2.0], 2.0 * base.vertex_positions[0], rtol=0, atol=1e-15)
    _, frames = read_csv(tmp_path / "frames.csv")
    first = [r for r in frames if float(r[0]) == 0.5 and r[1] == "0"]
    samples = base.edges[0].arc.points()
    assert np.array_equal(np.array([[float(r[2]), float(r[3])] for r in first]), samples)


def test_flow_check_reports_small_deviation(solved, tmp_path, capsys):
    doc = solved / "solution_00.json"
    assert main(["flow", str(doc), "--times", "1", "--check", "--t-end", "1.0", "--h", "0.05",
                 "--out-dir", str(tmp_path)]) == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["max_deviation"] <= 1e-2
    assert "deviation.csv" in manifest["outputs"]
    assert "direct flow check" in capsys.readouterr().out


@pytest.mark.parametrize("chart", ["plane", "ball", "blowup"])
def test_render_is_byte_identical(solved, tmp_path, chart):
    doc = str(solved / "solution_00.json")
    a, b = tmp_path / "a.svg", tmp_path / "b.svg"
    assert main(["render", doc, "--chart", chart, "--out", str(a)]) == 0
    assert main(["render", doc, "--chart", chart, "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_render_rejects_unknown_chart(solved, tmp_path):
    assert main(["render", str(solved / "solution_00.json"), "--chart", "polar",
                 "--out", str(tmp_path / "x.svg")]) == 2


def test_ball_chart_draws_a_line_as_a_diameter():
    (net,) = solve_expander((0.3, 0.3 + math.pi), "matchings").networks
    fig = network_figure(net, "ball")
    d = np.array([math.cos(0.3), math.sin(0.3)])
    curves = [ln.get_xydata() for ln in fig.axes[0].get_lines()
              if ln.get_color() == EDGE_COLOR and ln.get_marker() in ("None", "", None)]
    (P,) = curves
    assert np.max(np.abs(P[:, 0] * d[1] - P[:, 1] * d[0])) <= 1e-12
    ends = sorted(float(P[i] @ d) for i in (0, -1))
    assert ends == pytest.approx([-1.0, 1.0], abs=1e-12)


def test_blowup_chart_marks_the_corners(cross_solutions):
    net = cross_solutions.connected[0]
    fig = network_figure(net, "blowup", lift=blowup_lift(WorldSheet(net, np.array([0.5, 1.0]))))
    for ax in fig.axes:
        (dots,) = [ln for ln in ax.get_lines() if ln.get_marker() == "o"]
        assert len(dots.get_xydata()) == 4
