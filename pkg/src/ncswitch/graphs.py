"""Conflict graphs for multicast switch traffic.

The enhanced conflict graph has one vertex per subflow; two subflows
conflict iff they target the same output, or start at the same input and
belong to different flows.  Stable sets of this graph are exactly the valid
coded switch configurations.  The flow conflict graph is the coarser
no-splitting variant with one vertex per flow.

Adjacency is kept as per-vertex bitmasks, which keeps the exponential
enumeration routines (cliques, odd holes, induced subgraph search) fast at
desk scale.  All outputs are deterministic: vertices are ordered by their
labels and searches scan in index order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Optional, Sequence

from .errors import GraphSizeLimitError, PatternFormatError
from .traffic import SubflowId, TrafficPattern

CLIQUE_LIMIT = 40
PERFECT_LIMIT = 24
PATTERN_LIMIT = 12


@dataclass(frozen=True)
class ConflictGraph:
    """Undirected graph over hashable vertex labels, bitmask adjacency."""

    vertices: tuple
    adj: tuple[int, ...]  # adj[i] has bit j set iff i and j are adjacent

    def __post_init__(self):
        n = len(self.vertices)
        for i, mask in enumerate(self.adj):
            if mask & (1 << i):
                raise PatternFormatError(f"self-loop at vertex {i}")
            if mask >> n:
                raise PatternFormatError(f"adjacency bits out of range at vertex {i}")
        for i in range(n):
            for j in range(i + 1, n):
                if bool(self.adj[i] & (1 << j)) != bool(self.adj[j] & (1 << i)):
                    raise PatternFormatError("adjacency is not symmetric")

    @property
    def n(self) -> int:
        return len(self.vertices)

    def edge_count(self) -> int:
        return sum(bin(m).count("1") for m in self.adj) // 2

    def edges(self) -> list[tuple[int, int]]:
        return [
            (i, j)
            for i in range(self.n)
            for j in range(i + 1, self.n)
            if self.adj[i] & (1 << j)
        ]

    def has_edge(self, i: int, j: int) -> bool:
        return bool(self.adj[i] & (1 << j))

    def complement(self) -> "ConflictGraph":
        full = (1 << self.n) - 1
        return ConflictGraph(
            self.vertices,
            tuple((full & ~m & ~(1 << i)) for i, m in enumerate(self.adj)),
        )

    def induced(self, keep: Sequence[int]) -> "ConflictGraph":
        """Subgraph induced by the given vertex indices (order preserved)."""
        pos = {v: k for k, v in enumerate(keep)}
        verts = tuple(self.vertices[v] for v in keep)
        adj = []
        for v in keep:
            mask = 0
            for w in keep:
                if w != v and self.adj[v] & (1 << w):
                    mask |= 1 << pos[w]
            adj.append(mask)
        return ConflictGraph(verts, tuple(adj))


def graph_from_edges(n: int, edges: Iterable[tuple[int, int]], labels=None) -> ConflictGraph:
    adj = [0] * n
    for u, v in edges:
        if u == v:
            raise PatternFormatError(f"self-loop {u}")
        adj[u] |= 1 << v
        adj[v] |= 1 << u
    return ConflictGraph(tuple(labels) if labels else tuple(range(n)), tuple(adj))


def cycle_graph(n: int) -> ConflictGraph:
    return graph_from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def complete_graph(n: int) -> ConflictGraph:
    return graph_from_edges(n, [(i, j) for i in range(n) for j in range(i + 1, n)])


def path_graph(n: int) -> ConflictGraph:
    return graph_from_edges(n, [(i, i + 1) for i in range(n - 1)])


def co_p3() -> ConflictGraph:
    """Three vertices, exactly one edge: the complement of the 3-path."""
    return graph_from_edges(3, [(0, 1)])


def build_enhanced_conflict_graph(tp: TrafficPattern) -> ConflictGraph:
    """One vertex per subflow; conflict iff same output, or same input with
    different fanouts."""
    subs = tp.subflows()
    n = len(subs)
    adj = [0] * n
    for a in range(n):
        sa = subs[a]
        for b in range(a + 1, n):
            sb = subs[b]
            if sa.output == sb.output or (
                sa.input == sb.input and sa.fanout != sb.fanout
            ):
                adj[a] |= 1 << b
                adj[b] |= 1 << a
    return ConflictGraph(tuple(subs), tuple(adj))


def build_flow_conflict_graph(tp: TrafficPattern) -> ConflictGraph:
    """No-splitting variant: one vertex per flow; conflict iff same input or
    overlapping fanouts."""
    flows = sorted(tp.flows)
    keys = [f.key for f in flows]
    n = len(flows)
    adj = [0] * n
    for a in range(n):
        for b in range(a + 1, n):
            fa, fb = flows[a], flows[b]
            if fa.input == fb.input or set(fa.fanout) & set(fb.fanout):
                adj[a] |= 1 << b
                adj[b] |= 1 << a
    return ConflictGraph(tuple(keys), tuple(adj))


def _bron_kerbosch(adj: Sequence[int], r: int, p: int, x: int, out: list[int]):
    if p == 0 and x == 0:
        out.append(r)
        return
    pivot_pool = p | x
    pivot = (pivot_pool & -pivot_pool).bit_length() - 1
    best = -1
    scan = pivot_pool
    while scan:
        v = (scan & -scan).bit_length() - 1
        scan &= scan - 1
        deg = bin(p & adj[v]).count("1")
        if deg > best:
            best, pivot = deg, v
    cand = p & ~adj[pivot]
    while cand:
        v = (cand & -cand).bit_length() - 1
        bit = 1 << v
        cand &= cand - 1
        _bron_kerbosch(adj, r | bit, p & adj[v], x & adj[v], out)
        p &= ~bit
        x |= bit


def _mask_to_sorted(mask: int) -> tuple[int, ...]:
    out = []
    while mask:
        v = (mask & -mask).bit_length() - 1
        out.append(v)
        mask &= mask - 1
    return tuple(out)


def maximal_cliques(g: ConflictGraph, limit: int = CLIQUE_LIMIT) -> list[tuple[int, ...]]:
    """All maximal cliques as sorted index tuples, deterministically ordered."""
    if g.n > limit:
        raise GraphSizeLimitError(g.n, limit, "clique enumeration")
    if g.n == 0:
        return []
    found: list[int] = []
    _bron_kerbosch(g.adj, 0, (1 << g.n) - 1, 0, found)
    return sorted(_mask_to_sorted(m) for m in found)


def maximal_stable_sets(g: ConflictGraph, limit: int = CLIQUE_LIMIT) -> list[tuple[int, ...]]:
    """Maximal stable sets, i.e. maximal cliques of the complement."""
    return maximal_cliques(g.complement(), limit)


def is_stable_set(g: ConflictGraph, members: Iterable[int]) -> bool:
    members = list(members)
    for a in range(len(members)):
        for b in range(a + 1, len(members)):
            if g.has_edge(members[a], members[b]):
                return False
    return True


def find_odd_hole(g: ConflictGraph, max_length: Optional[int] = None) -> Optional[list[int]]:
    """Shortest induced odd cycle of length >= 5, or None.

    Searches lengths 5, 7, ... in increasing order and returns the first
    chordless cycle found, as a vertex list in cycle order.  Cycles are
    rooted at their smallest vertex with the smaller neighbor second, so the
    result is deterministic.
    """
    if max_length is None:
        max_length = g.n if g.n % 2 else g.n - 1
    if max_length < 5:
        return None
    if max_length % 2 == 0:
        raise PatternFormatError("max_length must be odd")
    n = g.n
    adj = g.adj

    for length in range(5, max_length + 1, 2):
        for root in range(n):
            above = ((1 << n) - 1) & ~((1 << (root + 1)) - 1)
            result = _hole_dfs(adj, root, length, above)
            if result is not None:
                return result
    return None


def _hole_dfs(adj, root, length, above):
    """Chordless cycle of exactly `length` vertices rooted at its minimum.

    The path grows through vertices above the root.  `forbidden` collects
    neighbors of interior path vertices; touching one would create a chord.
    Root adjacency is handled separately: interior vertices must avoid the
    root's neighborhood, the closing vertex must lie in it.
    """
    path = [root]

    def extend(v, used, forbidden, depth):
        cand = adj[v] & above & ~used & ~forbidden
        if depth == length - 1:
            cand &= adj[root]
            # canonical orientation: second vertex below the closing vertex
            cand &= ~((1 << (path[1] + 1)) - 1)
        elif depth >= 2:
            cand &= ~adj[root]  # interior vertices must avoid the root
        scan = cand
        while scan:
            w = (scan & -scan).bit_length() - 1
            bit = 1 << w
            scan &= scan - 1
            path.append(w)
            if depth == length - 1:
                return True
            new_forbidden = forbidden if v == root else forbidden | (adj[v] & ~bit)
            if extend(w, used | bit, new_forbidden, depth + 1):
                return True
            path.pop()
        return False

    if extend(root, 1 << root, 0, 1):
        return path
    return None


def has_odd_hole(g: ConflictGraph) -> bool:
    return find_odd_hole(g) is not None


def is_perfect(g: ConflictGraph, limit: int = PERFECT_LIMIT) -> bool:
    """Decide perfection via the odd hole / odd antihole characterization."""
    if g.n > limit:
        raise GraphSizeLimitError(g.n, limit, "perfection test")
    return not has_odd_hole(g) and not has_odd_hole(g.complement())


def contains_induced(g: ConflictGraph, pattern: ConflictGraph) -> bool:
    """True iff some vertex subset of g induces a graph isomorphic to pattern.

    Exact backtracking over candidate images; edges and non-edges must both
    match, so this is induced-subgraph isomorphism, not subgraph containment.
    """
    if pattern.n > PATTERN_LIMIT:
        raise GraphSizeLimitError(pattern.n, PATTERN_LIMIT, "pattern graph")
    if pattern.n > g.n:
        return False
    if pattern.n == 0:
        return True

    # order pattern vertices so each one (after the first) touches a prior one
    # when possible; improves pruning on connected patterns
    p_order: list[int] = []
    remaining = set(range(pattern.n))
    degs = [bin(m).count("1") for m in pattern.adj]
    while remaining:
        connected = [
            v for v in remaining
            if any(pattern.has_edge(v, u) for u in p_order)
        ]
        pool = connected or sorted(remaining)
        v = max(pool, key=lambda x: (degs[x], -x))
        p_order.append(v)
        remaining.remove(v)

    g_degs = [bin(m).count("1") for m in g.adj]
    mapping = [-1] * pattern.n  # pattern vertex -> host vertex

    def extend(k: int, used: int) -> bool:
        if k == pattern.n:
            return True
        pv = p_order[k]
        for hv in range(g.n):
            bit = 1 << hv
            if used & bit or g_degs[hv] < degs[pv]:
                continue
            ok = True
            for prev in p_order[:k]:
                if pattern.has_edge(pv, prev) != g.has_edge(hv, mapping[prev]):
                    ok = False
                    break
            if ok:
                mapping[pv] = hv
                if extend(k + 1, used | bit):
                    return True
                mapping[pv] = -1
        return False

    return extend(0, 0)


def is_isomorphic(a: ConflictGraph, b: ConflictGraph) -> bool:
    return (
        a.n == b.n
        and a.edge_count() == b.edge_count()
        and contains_induced(a, b)
    )


def mycielskian(g: ConflictGraph) -> ConflictGraph:
    """Standard Mycielski construction: shadow vertices plus an apex.

    Preserves clique number while increasing chromatic number by one; the
    apex is the last vertex.
    """
    n = g.n
    edges = list(g.edges())
    new_edges = []
    new_edges.extend(edges)
    for v in range(n):
        mask = g.adj[v]
        while mask:
            u = (mask & -mask).bit_length() - 1
            mask &= mask - 1
            new_edges.append((n + v, u))  # shadow of v sees v's neighbors
    apex = 2 * n
    new_edges.extend((n + v, apex) for v in range(n))
    labels = (
        tuple(g.vertices)
        + tuple(("shadow", v) for v in g.vertices)
        + (("apex",),)
    )
    return graph_from_edges(2 * n + 1, new_edges, labels)


def grotzsch_graph() -> ConflictGraph:
    return mycielskian(cycle_graph(5))


def clique_number(g: ConflictGraph) -> int:
    if g.n == 0:
        return 0
    return max(len(c) for c in maximal_cliques(g))


def chromatic_number(g: ConflictGraph) -> int:
    """Exact chromatic number by branch and bound; small graphs only."""
    if g.n == 0:
        return 0
    lo = clique_number(g)
    for k in range(lo, g.n + 1):
        if _colorable(g, k):
            return k
    return g.n


def _colorable(g: ConflictGraph, k: int) -> bool:
    colors = [-1] * g.n
    order = sorted(range(g.n), key=lambda v: -bin(g.adj[v]).count("1"))

    def assign(idx: int) -> bool:
        if idx == g.n:
            return True
        v = order[idx]
        used = set()
        mask = g.adj[v]
        while mask:
            u = (mask & -mask).bit_length() - 1
            mask &= mask - 1
            if colors[u] >= 0:
                used.add(colors[u])
        cap = min(k, max([colors[order[i]] for i in range(idx)], default=-1) + 2)
        for c in range(cap):
            if c not in used:
                colors[v] = c
                if assign(idx + 1):
                    return True
                colors[v] = -1
        return False

    return assign(0)


def parse_graph_file(text: str) -> ConflictGraph:
    """Plain-text edge list: first line 'n m', then m lines 'u v', 0-indexed."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise PatternFormatError("graph file is empty")
    head = lines[0].split()
    if len(head) != 2:
        raise PatternFormatError("graph file must start with 'n m'")
    n, m = int(head[0]), int(head[1])
    if len(lines) - 1 != m:
        raise PatternFormatError(f"expected {m} edge lines, found {len(lines) - 1}")
    edges = []
    for ln in lines[1:]:
        u, v = (int(x) for x in ln.split())
        if not (0 <= u < n and 0 <= v < n):
            raise PatternFormatError(f"edge {u} {v} out of range for n={n}")
        edges.append((u, v))
    return graph_from_edges(n, edges)


def serialize_graph(g: ConflictGraph) -> str:
    edges = g.edges()
    lines = [f"{g.n} {len(edges)}"]
    lines += [f"{u} {v}" for u, v in edges]
    return "\n".join(lines) + "\n"


def load_bundled_graph(name: str) -> ConflictGraph:
    """Load one of the pattern graphs shipped as editable data files."""
    from importlib import resources

    ref = resources.files("ncswitch.data").joinpath(f"{name}.txt")
    return parse_graph_file(ref.read_text("utf-8"))


def webbed_claw() -> ConflictGraph:
    return load_bundled_graph("webbed_claw")


def connected_double_diamond() -> ConflictGraph:
    return load_bundled_graph("connected_double_diamond")
