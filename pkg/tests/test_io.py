from __future__ import annotations

import json

import numpy as np
import pytest

from soliton_networks.io import (
    SCHEMA,
    DocumentError,
    config_hash,
    load_network,
    read_csv,
    save_network,
    write_csv,
    write_manifest,
)


def test_round_trip_is_exact(generic_triod, tmp_path):
    path = save_network(generic_triod, tmp_path / "net.json")
    again = load_network(path)
    assert np.array_equal(again.vertex_positions, generic_triod.vertex_positions)
    assert again.status == "regular"
    assert again.topology == generic_triod.topology
    for a, b in zip(again.samples(), generic_triod.samples()):
        assert np.array_equal(a, b)
    assert save_network(again, tmp_path / "again.json").read_text() == path.read_text()


def _tamper(path, edit):
    doc = json.loads(path.read_text())
    edit(doc)
    path.write_text(json.dumps(doc))
    return path


@pytest.mark.parametrize("edit", [
    lambda d: d["vertices"][0].__setitem__(0, d["vertices"][0][0] + 1e-3),
    lambda d: d["verification"].__setitem__("renormalized_length", 0.0),
    lambda d: d["verification"].__setitem__("hull_check", False),
    lambda d: d["edges"][0]["samples"][3].__setitem__(1, 7.0),
])
def test_tampered_documents_are_rejected(generic_triod, tmp_path, edit):
    path = _tamper(save_network(generic_triod, tmp_path / "net.json"), edit)
    with pytest.raises(DocumentError):
        load_network(path)


def test_unverified_load_skips_the_checks(generic_triod, tmp_path):
    path = _tamper(save_network(generic_triod, tmp_path / "net.json"),
                   lambda d: d["verification"].__setitem__("renormalized_length", 0.0))
    assert load_network(path, verify=False).topology == generic_triod.topology


def test_schema_and_shape_errors(generic_triod, tmp_path):
    path = save_network(generic_triod, tmp_path / "net.json")
    assert json.loads(path.read_text())["schema"] == SCHEMA

    def edited(name, edit):
        copy = tmp_path / name
        copy.write_text(path.read_text())
        return _tamper(copy, edit)

    with pytest.raises(DocumentError, match="schema"):
        load_network(edited("a.json", lambda d: d.__setitem__("schema", "other/1")))
    with pytest.raises(DocumentError, match="vertex count"):
        load_network(edited("b.json", lambda d: d["vertices"].append([0.0, 0.0])))


def test_csv_round_trip(tmp_path):
    rows = [[0.1, 1, "a"], [np.float64(1.0 / 3.0), 2, "b"]]
    write_csv(tmp_path / "t.csv", ["x", "n", "s"], rows)
    header, back = read_csv(tmp_path / "t.csv")
    assert header == ["x", "n", "s"]
    assert float(back[1][0]) == 1.0 / 3.0
    assert back[0] == ["0.1", "1", "a"]


def test_config_hash_is_order_independent():
    a = config_hash({"rays": [0.0, 1.0], "mode": "connected"})
    b = config_hash({"mode": "connected", "rays": [0.0, 1.0]})
    assert a == b
    assert a != config_hash({"mode": "forests", "rays": [0.0, 1.0]})


def test_manifest(tmp_path):
    write_manifest(tmp_path / "m.json", "solve", {"x": 1}, ["b.csv", "a.json"], counts={"n": 2})
    m = json.loads((tmp_path / "m.json").read_text())
    assert m["outputs"] == ["a.json", "b.csv"]
    assert m["config_hash"] == config_hash({"x": 1})
    assert m["counts"] == {"n": 2}
