"""Hardware lattice and logical graph construction.

Builds the Pegasus qubit lattice P_M, derives the degree-5 logical
graph induced by grouping physical qubits into triple-redundancy cells,
and provides plain-text serialization plus structural validation.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

# Per-orientation internal-coupler offsets for Pegasus.  Index k is the
# qubit's own k; the value controls which perpendicular qubits it crosses.
_OFFSETS_VERT = (2, 2, 2, 2, 10, 10, 10, 10, 6, 6, 6, 6)
_OFFSETS_HORIZ = (6, 6, 6, 6, 2, 2, 2, 2, 10, 10, 10, 10)


@dataclass(eq=False)
class Graph:
    """Minimal undirected graph: nodes 0..n_nodes-1, edge array (E, 2)."""

    n_nodes: int
    edges: np.ndarray
    coords: np.ndarray | None = None

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int32).reshape(-1, 2)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    def degrees(self) -> np.ndarray:
        deg = np.zeros(self.n_nodes, dtype=np.int64)
        np.add.at(deg, self.edges[:, 0], 1)
        np.add.at(deg, self.edges[:, 1], 1)
        return deg

    def adjacency_lists(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n_nodes)]
        for a, b in self.edges:
            adj[a].append(int(b))
            adj[b].append(int(a))
        return adj


@dataclass(eq=False)
class PegasusGraph(Graph):
    """Pegasus lattice P_m over working qubits.

    Nodes are indexed 0..n-1; `qubit_coords[i]` is the native
    (u, w, k, z) coordinate.  `defect_mask[i_all]` marks dead qubits in
    the defect-free enumeration; dead qubits and their couplers are
    dropped from the working graph.
    """

    m: int = 0
    qubit_coords: list = field(default_factory=list)
    coord_to_id: dict = field(default_factory=dict)
    edge_tags: np.ndarray | None = None


def _pegasus_coords(m: int):
    out = []
    for u in range(2):
        for w in range(m):
            for k in range(12):
                for z in range(m - 1):
                    out.append((u, w, k, z))
    return out


def _pegasus_coord_edges(m: int):
    """All couplers of defect-free P_m as coordinate pairs with a tag."""
    edges = []
    # external: along a wire, adjacent z
    for u in range(2):
        for w in range(m):
            for k in range(12):
                for z in range(m - 2):
                    edges.append(((u, w, k, z), (u, w, k, z + 1), "ext"))
    # odd: k = 2j and 2j+1 on the same wire position
    for u in range(2):
        for w in range(m):
            for j in range(6):
                for z in range(m - 1):
                    edges.append(((u, w, 2 * j, z), (u, w, 2 * j + 1, z), "odd"))
    # internal: vertical (0, W, k, Z) crosses horizontal (1, w', k', z') iff
    #   w' = Z + (k' < O_vert[k])  and  z' = W - 1 + (k >= O_horiz[k'])
    for W in range(m):
        for k in range(12):
            for Z in range(m - 1):
                for kp in range(12):
                    wp = Z + (1 if kp < _OFFSETS_VERT[k] else 0)
                    zp = W - 1 + (1 if k >= _OFFSETS_HORIZ[kp] else 0)
                    if 0 <= wp < m and 0 <= zp < m - 1:
                        edges.append(((0, W, k, Z), (1, wp, kp, zp), "int"))
    return edges


def build_pegasus(m: int, defect_mask=None) -> PegasusGraph:
    """Construct P_m, optionally dropping qubits flagged in defect_mask.

    defect_mask: boolean array over the defect-free node enumeration
    (length 24*m*(m-1)); True marks a dead qubit.
    """
    if m < 2:
        raise ValueError(f"Pegasus size m must be >= 2, got {m}")
    coords = _pegasus_coords(m)
    n_all = len(coords)
    if defect_mask is None:
        defect_mask = np.zeros(n_all, dtype=bool)
    else:
        defect_mask = np.asarray(defect_mask, dtype=bool)
        if defect_mask.shape != (n_all,):
            raise ValueError(
                f"defect_mask length {defect_mask.shape} != {n_all}")
    all_id = {c: i for i, c in enumerate(coords)}
    live = [c for i, c in enumerate(coords) if not defect_mask[i]]
    cid = {c: i for i, c in enumerate(live)}
    edges = []
    tags = []
    tag_code = {"ext": 0, "odd": 1, "int": 2}
    for a, b, tag in _pegasus_coord_edges(m):
        if defect_mask[all_id[a]] or defect_mask[all_id[b]]:
            continue
        ia, ib = cid[a], cid[b]
        if ia > ib:
            ia, ib = ib, ia
        edges.append((ia, ib))
        tags.append(tag_code[tag])
    g = PegasusGraph(
        n_nodes=len(live),
        edges=np.array(edges, dtype=np.int32),
        m=m,
        qubit_coords=live,
        coord_to_id=cid,
        edge_tags=np.array(tags, dtype=np.int8),
    )
    return g


def square_lattice(side: int, periodic: bool = False) -> Graph:
    """Open (or periodic) square lattice with raster-ordered nodes.

    Node (x, y) gets id x*side + y; coords carry the (x, y) layout so
    the patchwork solver can form coordinate blocks.
    """
    if side < 1:
        raise ValueError("side must be >= 1")
    edges = []
    for x in range(side):
        for y in range(side):
            i = x * side + y
            if y + 1 < side:
                edges.append((i, i + 1))
            elif periodic and side > 2:
                edges.append((x * side, i))
            if x + 1 < side:
                edges.append((i, i + side))
            elif periodic and side > 2:
                edges.append((y, i))
    edges = [(a, b) if a < b else (b, a) for a, b in edges]
    edges.sort()
    coords = np.array([(x, y) for x in range(side) for y in range(side)],
                      dtype=np.int32)
    return Graph(n_nodes=side * side,
                 edges=np.array(edges, dtype=np.int32).reshape(-1, 2),
                 coords=coords)


def _chimera_cells(m: int):
    """The three interleaved K4,4 sheets hiding inside P_m.

    Returns cells[t][(x, y)] = (V, H): four vertical and four horizontal
    qubit coordinates forming a complete bipartite cell.  Sheets t=0,1,2
    each tile an (m-1) x (m-1) grid.
    """
    cells = [dict() for _ in range(3)]
    for x in range(m - 1):
        for y in range(m - 1):
            spec = {
                0: (((0, x + 1, k, y) for k in range(0, 4)),
                    ((1, y, k, x) for k in range(8, 12))),
                1: (((0, x, k, y) for k in range(8, 12)),
                    ((1, y + 1, k, x) for k in range(0, 4))),
                2: (((0, x, k, y) for k in range(4, 8)),
                    ((1, y + 1, k, x) for k in range(4, 8))),
            }
            for t in range(3):
                V, H = spec[t]
                cells[t][(x, y)] = (tuple(V), tuple(H))
    return cells


@dataclass(eq=False)
class LogicalGraph(Graph):
    """Degree-5 logical graph with its physical embedding.

    data_qubits[i] lists the three physical ids carrying copies of
    logical spin i (index = copy number); penalty_qubit[i] is the
    physical id of its penalty partner.  support[e] counts how many of
    the three copies of logical edge e exist physically (1..3); edges
    with support < 3 are kept and flagged rather than dropped.
    """

    L: int = 0
    m: int = 0
    support: np.ndarray | None = None
    data_qubits: np.ndarray | None = None
    penalty_qubit: np.ndarray | None = None
    cell_coords: np.ndarray | None = None  # (n, 4): sheet, x, y, slot


def build_qac_logical(pegasus: PegasusGraph, L: int) -> LogicalGraph:
    """Derive the logical graph for an L x L cell window of `pegasus`.

    Each K4,4 cell hosts two logical qubits built from 3 data + 1
    penalty physical qubits:

      slot 0: data = first vertical odd pair (copies 1, 2) plus one of
              the first horizontal odd pair (copy 0); the other member
              of that pair is the penalty.  Which member carries data
              alternates with cell column x, which severs same-copy
              horizontal wiring so slot-0 chains run vertically.
      slot 1: data = last two horizontal qubits (copies 0, 2) plus one
              of the last vertical odd pair (copy 1), data/penalty
              alternating with cell row y; chains run horizontally.

    The staggered copy indices (slot 0 keeps copy 0 on its horizontal
    qubit, slot 1 keeps copy 1 on its vertical one) cancel every
    same-copy coupling between same-slot neighbours of adjacent sheets,
    leaving each bulk node exactly five logical edges: two along its
    chain, one to its cellmate, and one diagonal to each neighbouring
    sheet.  The result is non-bipartite with shortest odd loops of
    length 5.

    A logical qubit is dropped when any of its four physical qubits or
    any of its three penalty couplers is missing; the giant component
    of what remains is returned.  Logical edges missing some of their
    three same-copy couplers are kept with reduced support.
    """
    m = pegasus.m
    if not 1 <= L <= m - 1:
        raise ValueError(f"window side L={L} outside 1..{m - 1} for P_{m}")
    cells = _chimera_cells(m)
    cid = pegasus.coord_to_id
    live_edge = set()
    for a, b in pegasus.edges:
        live_edge.add((int(a), int(b)) if a < b else (int(b), int(a)))

    def coupler(i: int, j: int) -> bool:
        return ((i, j) if i < j else (j, i)) in live_edge

    qubit_role: dict[int, tuple[int, int]] = {}  # phys id -> (lid, copy)
    groups = []  # per lid: (data0, data1, data2, pen, t, x, y, slot)
    for t in range(3):
        for x in range(L):
            for y in range(L):
                V, H = cells[t][(x, y)]
                da, db = x % 2, y % 2
                for slot, (d0, d1, d2, pen) in enumerate((
                        (H[da], V[0], V[1], H[1 - da]),
                        (H[2], V[2 + db], H[3], V[3 - db]))):
                    quad = (d0, d1, d2, pen)
                    if any(q not in cid for q in quad):
                        continue
                    ids = tuple(cid[q] for q in quad)
                    if not all(coupler(ids[3], ids[c]) for c in range(3)):
                        continue
                    lid = len(groups)
                    for c in range(3):
                        qubit_role[ids[c]] = (lid, c)
                    qubit_role[ids[3]] = (lid, -1)
                    groups.append(ids + (t, x, y, slot))
    support_map: dict[tuple[int, int], int] = {}
    for a, b in pegasus.edges:
        ra = qubit_role.get(int(a))
        rb = qubit_role.get(int(b))
        if ra is None or rb is None:
            continue
        (la, ca), (lb, cb) = ra, rb
        if la == lb or ca < 0 or cb < 0 or ca != cb:
            continue
        key = (la, lb) if la < lb else (lb, la)
        support_map[key] = support_map.get(key, 0) + 1
    # keep the giant component
    n = len(groups)
    adj: list[list[int]] = [[] for _ in range(n)]
    for a, b in support_map:
        adj[a].append(b)
        adj[b].append(a)
    comp = np.full(n, -1, dtype=np.int64)
    sizes = []
    for s in range(n):
        if comp[s] >= 0:
            continue
        c = len(sizes)
        stack = [s]
        comp[s] = c
        size = 1
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if comp[v] < 0:
                    comp[v] = c
                    size += 1
                    stack.append(v)
        sizes.append(size)
    keep_c = int(np.argmax(sizes)) if sizes else -1
    old_to_new = np.full(n, -1, dtype=np.int64)
    kept = [i for i in range(n) if comp[i] == keep_c]
    for new, old in enumerate(kept):
        old_to_new[old] = new
    edges = []
    support = []
    for (a, b), sup in sorted(support_map.items()):
        if old_to_new[a] >= 0 and old_to_new[b] >= 0:
            edges.append((old_to_new[a], old_to_new[b]))
            support.append(sup)
    order = sorted(range(len(edges)), key=lambda i: edges[i])
    edges = [edges[i] for i in order]
    support = [support[i] for i in order]
    nk = len(kept)
    data = np.zeros((nk, 3), dtype=np.int32)
    pen = np.zeros(nk, dtype=np.int32)
    cc = np.zeros((nk, 4), dtype=np.int32)
    for new, old in enumerate(kept):
        g = groups[old]
        data[new] = g[0:3]
        pen[new] = g[3]
        cc[new] = g[4:8]
    return LogicalGraph(
        n_nodes=nk,
        edges=np.array(edges, dtype=np.int32).reshape(-1, 2),
        coords=cc[:, 1:3].copy(),
        L=L,
        m=m,
        support=np.array(support, dtype=np.int8),
        data_qubits=data,
        penalty_qubit=pen,
        cell_coords=cc,
    )


def save_logical_graph(graph: LogicalGraph, path_or_file) -> None:
    """Write the plain-text logical graph format.

    Header `#logical L=<L> N=<N>`, then one `n` line per node with its
    three data qubit ids and penalty id, then one `e` line per edge with
    its support count.
    """
    own = isinstance(path_or_file, str)
    f = open(path_or_file, "w", encoding="utf-8") if own else path_or_file
    try:
        f.write(f"#logical L={graph.L} N={graph.n_nodes}\n")
        for i in range(graph.n_nodes):
            d = graph.data_qubits[i]
            p = graph.penalty_qubit[i]
            f.write(f"n {i} {d[0]} {d[1]} {d[2]} {p}\n")
        for e in range(graph.n_edges):
            a, b = graph.edges[e]
            f.write(f"e {a} {b} {graph.support[e]}\n")
    finally:
        if own:
            f.close()


class LogicalGraphFormatError(ValueError):
    """Raised on malformed logical graph files; message names the line."""


def load_logical_graph(path_or_file) -> LogicalGraph:
    """Parse the plain-text format written by save_logical_graph."""
    own = isinstance(path_or_file, str)
    f = open(path_or_file, "r", encoding="utf-8") if own else path_or_file
    try:
        lines = f.read().splitlines()
    finally:
        if own:
            f.close()
    if not lines or not lines[0].startswith("#logical"):
        raise LogicalGraphFormatError("line 1: missing #logical header")
    header = lines[0].split()
    kv = {}
    for tok in header[1:]:
        if "=" not in tok:
            raise LogicalGraphFormatError(f"line 1: bad header token {tok!r}")
        k, v = tok.split("=", 1)
        kv[k] = v
    try:
        L = int(kv["L"])
        n = int(kv["N"])
    except (KeyError, ValueError) as exc:
        raise LogicalGraphFormatError(f"line 1: bad header: {exc}") from exc
    data = np.full((n, 3), -1, dtype=np.int32)
    pen = np.full(n, -1, dtype=np.int32)
    seen_nodes = np.zeros(n, dtype=bool)
    edges = []
    support = []
    seen_edges = set()
    for ln, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "n":
            if len(parts) != 6:
                raise LogicalGraphFormatError(
                    f"line {ln}: n record needs 5 fields, got {len(parts) - 1}")
            try:
                i, d0, d1, d2, p = (int(x) for x in parts[1:])
            except ValueError as exc:
                raise LogicalGraphFormatError(f"line {ln}: {exc}") from exc
            if not 0 <= i < n:
                raise LogicalGraphFormatError(
                    f"line {ln}: node id {i} out of range 0..{n - 1}")
            if seen_nodes[i]:
                raise LogicalGraphFormatError(f"line {ln}: duplicate node {i}")
            seen_nodes[i] = True
            data[i] = (d0, d1, d2)
            pen[i] = p
        elif parts[0] == "e":
            if len(parts) != 4:
                raise LogicalGraphFormatError(
                    f"line {ln}: e record needs 3 fields, got {len(parts) - 1}")
            try:
                a, b, sup = (int(x) for x in parts[1:])
            except ValueError as exc:
                raise LogicalGraphFormatError(f"line {ln}: {exc}") from exc
            if not (0 <= a < n and 0 <= b < n) or a == b:
                raise LogicalGraphFormatError(
                    f"line {ln}: bad edge endpoints {a} {b}")
            key = (a, b) if a < b else (b, a)
            if key in seen_edges:
                raise LogicalGraphFormatError(
                    f"line {ln}: duplicate edge {a} {b}")
            seen_edges.add(key)
            if not 1 <= sup <= 3:
                raise LogicalGraphFormatError(
                    f"line {ln}: support {sup} outside 1..3")
            edges.append((a, b))
            support.append(sup)
        else:
            raise LogicalGraphFormatError(
                f"line {ln}: unknown record type {parts[0]!r}")
    if not seen_nodes.all():
        missing = int(np.flatnonzero(~seen_nodes)[0])
        raise LogicalGraphFormatError(f"node {missing} missing from file")
    return LogicalGraph(
        n_nodes=n,
        edges=np.array(edges, dtype=np.int32).reshape(-1, 2),
        L=L,
        support=np.array(support, dtype=np.int8),
        data_qubits=data,
        penalty_qubit=pen,
    )


def _odd_girth(adj: list[list[int]], roots, cap: int = 32) -> int | None:
    """Length of the shortest odd cycle through any root, None if acyclic."""
    best = None
    for src in roots:
        dist = {src: 0}
        frontier = [src]
        while frontier:
            nxt = []
            for u in frontier:
                for v in adj[u]:
                    if v not in dist:
                        dist[v] = dist[u] + 1
                        nxt.append(v)
            frontier = nxt
        for u, du in dist.items():
            for v in adj[u]:
                if dist.get(v) == du:
                    cyc = 2 * du + 1
                    if best is None or cyc < best:
                        best = cyc
        if best is not None and best <= 5 and len(dist) > cap:
            break
    return best


def validate_logical(graph: LogicalGraph) -> dict:
    """Structural report: degrees, components, odd 5-cycles, support."""
    deg = graph.degrees()
    hist = {}
    for d in deg:
        hist[int(d)] = hist.get(int(d), 0) + 1
    adj = graph.adjacency_lists()
    seen = np.zeros(graph.n_nodes, dtype=bool)
    n_comp = 0
    giant = 0
    for s in range(graph.n_nodes):
        if seen[s]:
            continue
        n_comp += 1
        stack = [s]
        seen[s] = True
        size = 1
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    size += 1
                    stack.append(v)
        giant = max(giant, size)
    roots = list(np.argsort(deg)[::-1][:24])
    og = _odd_girth(adj, roots)
    sup_hist = {}
    if graph.support is not None:
        for s in graph.support:
            sup_hist[int(s)] = sup_hist.get(int(s), 0) + 1
    return {
        "n_nodes": graph.n_nodes,
        "n_edges": graph.n_edges,
        "degree_histogram": dict(sorted(hist.items())),
        "n_components": n_comp,
        "giant_component": giant,
        "odd_girth": og,
        "has_five_cycles": og == 5,
        "support_histogram": dict(sorted(sup_hist.items())),
    }
