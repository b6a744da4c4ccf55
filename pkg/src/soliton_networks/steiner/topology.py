"""Noncrossing combinatorial types on ``k`` cyclically ordered boundary slots.

Leaves are numbered ``0..k-1`` in counter-clockwise order and interior
vertices ``k, k+1, ...``. A connected trivalent tree whose leaf splits are all
cyclic intervals is the dual tree of a triangulation of a ``k``-gon whose
sides stand for the leaves, which is how they are generated here.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, Sequence

MODES = ("connected", "matchings", "forests")


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class Topology:
    k: int
    n_interior: int
    edges: tuple[tuple[int, int], ...]
    components: tuple[tuple[int, ...], ...]

    @property
    def leaves(self) -> range:
        return range(self.k)

    @property
    def interior(self) -> range:
        return range(self.k, self.k + self.n_interior)

    @property
    def n_nodes(self) -> int:
        return self.k + self.n_interior

    @property
    def is_connected(self) -> bool:
        return len(self.components) == 1

    @cached_property
    def adjacency(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {v: [] for v in range(self.n_nodes)}
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return adj

    def valence(self, node: int) -> int:
        return len(self.adjacency[node])

    def incident_edges(self, node: int) -> list[int]:
        return [i for i, e in enumerate(self.edges) if node in e]

    def leaves_beyond(self, u: int, v: int) -> frozenset[int]:
        """Leaves reachable from ``v`` without passing through ``u``."""
        seen = {u, v}
        stack = [v]
        out = set()
        while stack:
            x = stack.pop()
            if x < self.k:
                out.add(x)
            for y in self.adjacency[x]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        return frozenset(out)

    def splits(self) -> tuple[tuple[int, ...], ...]:
        """Canonical leaf splits of the interior edges (side without the block's first leaf)."""
        out = []
        for u, v in self.edges:
            if u < self.k or v < self.k:
                continue
            side = self.leaves_beyond(u, v)
            block = next(c for c in self.components if set(c) >= side)
            if block[0] in side:
                side = frozenset(block) - side
            out.append(tuple(sorted(side)))
        return tuple(sorted(out))

    def key(self) -> tuple:
        return (self.components, self.splits())

    def label(self) -> str:
        """Short human-readable name, e.g. ``[0 1 2 3]{1,2}``."""
        parts = []
        for comp in self.components:
            parts.append("[" + " ".join(str(i) for i in comp) + "]")
        sp = ",".join("{" + ",".join(str(i) for i in s) + "}" for s in self.splits())
        return "".join(parts) + (sp if sp else "")

    def validate(self) -> None:
        """Check valences, the Euler relations per component, and noncrossing splits."""
        for leaf in self.leaves:
            if self.valence(leaf) != 1:
                raise TopologyError(f"leaf {leaf} has valence {self.valence(leaf)}")
        for v in self.interior:
            if self.valence(v) != 3:
                raise TopologyError(f"interior vertex {v} has valence {self.valence(v)}")
        covered = sorted(i for c in self.components for i in c)
        if covered != list(self.leaves):
            raise TopologyError("components must partition the leaves")
        for comp in self.components:
            m = len(comp)
            if m < 2:
                raise TopologyError("blocks need at least two leaves")
            nodes = self._component_nodes(comp[0])
            ell = sum(1 for x in nodes if x >= self.k)
            e = sum(1 for (u, v) in self.edges if u in nodes)
            if ell != m - 2 or 3 * ell + m != 2 * e or ell + m != e + 1:
                raise TopologyError(f"component {comp} violates the Euler relations")
            if set(x for x in nodes if x < self.k) != set(comp):
                raise TopologyError(f"component {comp} is not connected as declared")
        for s in self.splits():
            if not is_cyclic_interval(s, self._block_of(s[0])):
                raise TopologyError(f"split {s} crosses")
        if not components_noncrossing(self.components):
            raise TopologyError("blocks cross")

    def _component_nodes(self, start: int) -> set[int]:
        seen = {start}
        stack = [start]
        while stack:
            x = stack.pop()
            for y in self.adjacency[x]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        return seen

    def _block_of(self, leaf: int) -> tuple[int, ...]:
        return next(c for c in self.components if leaf in c)


def is_cyclic_interval(subset: Sequence[int], order: Sequence[int]) -> bool:
    """True if ``subset`` is a contiguous run of the cyclic sequence ``order``."""
    s = set(subset)
    if not s or len(s) == len(order):
        return True
    flags = [x in s for x in order]
    starts = sum(1 for i in range(len(flags)) if flags[i] and not flags[i - 1])
    return starts == 1


def chords_cross(a: tuple[int, int], b: tuple[int, int]) -> bool:
    a0, a1 = sorted(a)
    inside = [a0 < x < a1 for x in b]
    return inside[0] != inside[1] and not (set(a) & set(b))


def components_noncrossing(blocks: Sequence[Sequence[int]]) -> bool:
    for i, p in enumerate(blocks):
        for q in blocks[i + 1:]:
            for x in p:
                for y in p:
                    if x >= y:
                        continue
                    for u in q:
                        for w in q:
                            if u < w and chords_cross((x, y), (u, w)):
                                return False
    return True


# -- generation ---------------------------------------------------------------


def _triangulations(corners: tuple[int, ...]) -> list[tuple[tuple[int, int, int], ...]]:
    n = len(corners)
    if n < 3:
        return [()]
    out = []
    first, last = corners[0], corners[-1]
    for j in range(1, n - 1):
        tri = (first, corners[j], last)
        for left in _triangulations(corners[: j + 1]):
            for right in _triangulations(corners[j:]):
                out.append((tri,) + left + right)
    return out


def _block_trees(block: tuple[int, ...], next_id: int) -> list[tuple[list[tuple[int, int]], int]]:
    """All noncrossing trivalent trees on a block; returns (edges, number of interior vertices)."""
    m = len(block)
    if m == 2:
        return [([(block[0], block[1])], 0)]
    # polygon corner i sits between leaves block[i-1] and block[i]; side (i, i+1) is leaf block[i]
    result = []
    for tris in _triangulations(tuple(range(m))):
        tris = sorted(tuple(sorted(t)) for t in tris)
        ids = {t: next_id + i for i, t in enumerate(tris)}
        side_owner: dict[tuple[int, int], list[int]] = {}
        for t in tris:
            a, b, c = t
            for side in ((a, b), (b, c), (a, c)):
                side_owner.setdefault(side, []).append(ids[t])
        edges = []
        for (a, b), owners in sorted(side_owner.items()):
            if len(owners) == 2:
                edges.append(tuple(sorted(owners)))
            elif b - a == 1:
                edges.append((block[a], owners[0]))
            elif (a, b) == (0, m - 1):
                edges.append((block[m - 1], owners[0]))
            else:
                raise AssertionError("unpaired diagonal")
        result.append((edges, len(tris)))
    return result


def noncrossing_partitions(items: Sequence[int], min_block: int = 1) -> Iterator[list[tuple[int, ...]]]:
    """Noncrossing set partitions of ``items`` (taken in the given cyclic order)."""
    items = tuple(items)

    def rec(seq):
        if not seq:
            yield []
            return
        first, rest = seq[0], seq[1:]
        for block, parts in _grow([first], rest):
            yield [tuple(block)] + parts

    def _grow(block, remaining):
        for p in rec(remaining):
            yield block, p
        for i in range(len(remaining)):
            for gap in rec(remaining[:i]):
                for blk, tail in _grow(block + [remaining[i]], remaining[i + 1:]):
                    yield blk, gap + tail

    for part in rec(items):
        if all(len(b) >= min_block for b in part):
            yield sorted(part)


def _assemble(k: int, blocks: Sequence[tuple[int, ...]]) -> list[Topology]:
    out: list[Topology] = []

    def rec(i, next_id, edges):
        if i == len(blocks):
            topo = Topology(k, next_id - k, tuple(sorted(edges)), tuple(blocks))
            out.append(topo)
            return
        for b_edges, n_int in _block_trees(blocks[i], next_id):
            rec(i + 1, next_id + n_int, edges + b_edges)

    rec(0, k, [])
    return out


def enumerate_topologies(k: int, mode: str = "connected") -> list[Topology]:
    """All noncrossing topologies of the requested mode, in canonical order."""
    if mode not in MODES:
        raise TopologyError(f"unknown mode {mode!r}; expected one of {MODES}")
    if k < 2:
        raise TopologyError("need at least two boundary points")
    if mode == "connected":
        if k < 3:
            raise TopologyError("connected mode needs k >= 3")
        parts = [[tuple(range(k))]]
    elif mode == "matchings":
        if k % 2:
            raise TopologyError("matchings need an even number of boundary points")
        parts = [p for p in noncrossing_partitions(range(k), 2) if all(len(b) == 2 for b in p)]
    else:
        parts = list(noncrossing_partitions(range(k), 2))
    topos = {}
    for blocks in parts:
        for t in _assemble(k, blocks):
            topos.setdefault(t.key(), t)
    return [topos[key] for key in sorted(topos, key=lambda kk: (len(kk[0]), kk))]


def catalan(n: int) -> int:
    c = 1
    for i in range(n):
        c = c * 2 * (2 * i + 1) // (i + 2)
    return c
