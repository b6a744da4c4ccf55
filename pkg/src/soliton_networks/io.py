"""JSON network documents, run manifests and CSV tables.

A document stores the boundary, the topology and the vertex coordinates,
which determine everything else, together with the edge samples and a
verification block. Loading recomputes the network from the geometric fields
and refuses documents whose verification block does not match.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from . import __version__
from .geometry import IdealPoint
from .steiner.network import Network, assemble, certify
from .steiner.topology import Topology

SCHEMA = "soliton-network/1"
# absolute slack when comparing recomputed verification numbers with stored ones
VERIFY_SLACK = 1e-9


class DocumentError(ValueError):
    pass


def _real(x: float):
    """JSON has no infinities; they are written as strings."""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return float(x)


def _unreal(x) -> float:
    return float(x)


def verification_block(net: Network) -> dict:
    d = net.diagnostics
    return {
        "status": net.status,
        "n_interior": net.topology.n_interior,
        "n_edges": len(net.edges),
        "max_soliton_residual": float(d.get("max_soliton_residual", math.nan)),
        "max_balance_defect": float(d.get("max_balance_defect", math.nan)),
        "max_angle_error": float(d.get("max_angle_error", math.nan)),
        "hull_check": bool(d.get("hull_check", False)),
        "embedded": bool(d.get("embedded", False)),
        "renormalized_length": float(d.get("renormalized_length", math.nan)),
    }


def network_to_dict(net: Network, *, far_radius: float = 12.0, tolerances: dict | None = None) -> dict:
    edges = []
    for e in net.edges:
        c = e.connection
        edges.append({
            "u": e.u, "v": e.v, "kind": c.kind, "theta0": c.theta0, "r0": c.r0,
            "param1": _real(c.param1), "param2": _real(c.param2), "length": e.length,
            "samples": e.arc.points().tolist(),
        })
    return {
        "schema": SCHEMA,
        "boundary": [p.angle for p in net.boundary],
        "topology": {
            "k": net.topology.k,
            "n_interior": net.topology.n_interior,
            "edges": [list(e) for e in net.topology.edges],
            "components": [list(c) for c in net.topology.components],
            "label": net.topology.label(),
        },
        "vertices": np.asarray(net.vertex_positions, dtype=float).reshape(-1, 2).tolist(),
        "far_radius": far_radius,
        "tolerances": dict(tolerances or {}),
        "edges": edges,
        "verification": verification_block(net),
    }


def dumps(obj) -> str:
    # repr-exact floats; NaN and infinities are never written bare
    return json.dumps(obj, indent=1, allow_nan=False) + "\n"


def save_network(net: Network, path, **kwargs) -> Path:
    path = Path(path)
    path.write_text(dumps(network_to_dict(net, **kwargs)))
    return path


def _topology_from(doc: dict) -> Topology:
    t = doc["topology"]
    topo = Topology(int(t["k"]), int(t["n_interior"]), tuple(tuple(int(x) for x in e) for e in t["edges"]),
                    tuple(tuple(int(x) for x in c) for c in t["components"]))
    topo.validate()
    return topo


def network_from_dict(doc: dict, *, verify: bool = True) -> Network:
    """Rebuild a network from its geometric fields; with ``verify`` check the stored claims."""
    if doc.get("schema") != SCHEMA:
        raise DocumentError(f"unsupported schema {doc.get('schema')!r}")
    topo = _topology_from(doc)
    boundary = tuple(IdealPoint(float(a)) for a in doc["boundary"])
    X = np.array(doc["vertices"], dtype=float).reshape(-1, 2)
    if len(X) != topo.n_interior:
        raise DocumentError("vertex count does not match the topology")
    net = assemble(topo, boundary, X, r_max=float(doc.get("far_radius", 12.0)))
    if not verify:
        return net
    tol = {"balance_tol": 1e-6, "angle_tol": 1e-4, "residual_tol": 1e-6}
    tol.update({k: float(v) for k, v in doc.get("tolerances", {}).items() if k in tol})
    certify(net, **tol)
    _compare(doc, net)
    return net


def _compare(doc: dict, net: Network) -> None:
    claimed = doc["verification"]
    actual = verification_block(net)
    bad = []
    for key, want in claimed.items():
        got = actual.get(key)
        if isinstance(want, (bool, str, int)) and not isinstance(want, float):
            if got != want:
                bad.append(f"{key}: stored {want!r}, recomputed {got!r}")
        elif not (abs(float(want) - float(got)) <= VERIFY_SLACK * max(1.0, abs(float(want)))):
            bad.append(f"{key}: stored {want!r}, recomputed {got!r}")
    if len(doc["edges"]) != len(net.edges):
        bad.append("edge count differs")
    else:
        for i, (stored, e) in enumerate(zip(doc["edges"], net.edges)):
            S = np.array(stored["samples"], dtype=float)
            P = e.arc.points()
            if S.shape != P.shape or not np.allclose(S, P, rtol=0.0, atol=1e-9):
                bad.append(f"edge {i} samples differ from the recomputed arc")
    if bad:
        raise DocumentError("verification block does not match the geometry:\n  " + "\n  ".join(bad))


def load_network(path, *, verify: bool = True) -> Network:
    return network_from_dict(json.loads(Path(path).read_text()), verify=verify)


# -- manifests and tables -------------------------------------------------------------


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, allow_nan=False).encode()
    return hashlib.sha256(blob).hexdigest()


def write_manifest(path, command: str, config: dict, outputs: list[str], **extra) -> Path:
    body = {
        "tool": "soliton-networks",
        "version": __version__,
        "command": command,
        "config": config,
        "config_hash": config_hash(config),
        "outputs": sorted(outputs),
    }
    body.update(extra)
    path = Path(path)
    path.write_text(dumps(body))
    return path


def write_csv(path, header: list[str], rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]
