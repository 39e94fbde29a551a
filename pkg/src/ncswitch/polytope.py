"""Exact stable-set-polytope machinery for switch rate regions.

Everything here is exact rational arithmetic.  The central operation is the
fractional weighted chromatic number: the minimum total coefficient mass
needed to dominate a weight vector by stable sets.  Membership in the
clique-relaxation polytope (QSTAB) corresponds to admissibility of a
traffic pattern; membership in the stable set polytope (STAB) corresponds
to achievability with fanout splitting and intra-flow coding; the ratio of
the two regions bounds the switch speedup that coding cannot eliminate.

The chromatic LP is solved as a covering problem over maximal stable sets
(restricting to maximal sets cannot hurt a covering optimum), and the
surplus is trimmed afterwards by deleting vertices from chosen sets, which
keeps every set stable and recovers the exact-equality decomposition.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Optional, Sequence

from .errors import DimensionLimitError, InadmissiblePatternError, NcswitchError
from .graphs import (
    ConflictGraph,
    build_enhanced_conflict_graph,
    is_perfect,
    is_stable_set,
    maximal_cliques,
    maximal_stable_sets,
)
from .simplex import lp_max, matrix_rank, solve_square
from .traffic import (
    SubflowId,
    TrafficPattern,
    enhanced_rate_vector,
    is_admissible,
    unicasts_and_broadcast_2xN,
)

ZERO = Fraction(0)
ONE = Fraction(1)

QSTAB_VERTEX_LIMIT = 14
SPEEDUP_FLOW_LIMIT = 10

WeightVector = Sequence[Fraction]


@dataclass
class StableSetDecomposition:
    """Weighted list of stable sets; `total` is the coefficient mass."""

    terms: list[tuple[Fraction, tuple[int, ...]]]
    total: Fraction

    def combination(self, n: int) -> list[Fraction]:
        out = [ZERO] * n
        for lam, members in self.terms:
            for v in members:
                out[v] += lam
        return out

    def dominates(self, w: WeightVector) -> bool:
        comb = self.combination(len(w))
        return all(a >= b for a, b in zip(comb, w))

    def equals(self, w: WeightVector) -> bool:
        return self.combination(len(w)) == [Fraction(v) for v in w]


@dataclass
class SpeedupReport:
    value: Fraction
    witness: Optional[StableSetDecomposition] = None
    violated_clique: Optional[tuple[int, ...]] = None
    worst_weights: Optional[list[Fraction]] = None


def _as_weights(g: ConflictGraph, w) -> list[Fraction]:
    if isinstance(w, dict):
        missing = [v for v in g.vertices if v not in w]
        if missing:
            raise NcswitchError(f"weight vector misses vertices {missing[:3]}")
        vec = [Fraction(w[v]) for v in g.vertices]
    else:
        vec = [Fraction(v) for v in w]
        if len(vec) != g.n:
            raise NcswitchError(f"weight vector has length {len(vec)}, expected {g.n}")
    if any(v < 0 for v in vec):
        raise NcswitchError("weights must be nonnegative")
    return vec


def qstab_membership(g: ConflictGraph, w) -> tuple[bool, Optional[tuple[int, ...]]]:
    """Check all maximal clique inequalities; on failure return the clique
    with the largest violation (ties broken lexicographically)."""
    vec = _as_weights(g, w)
    worst = None
    worst_excess = ZERO
    for clique in maximal_cliques(g):
        excess = sum((vec[v] for v in clique), ZERO) - 1
        if excess > worst_excess:
            worst_excess = excess
            worst = clique
    return (worst is None, worst)


def trim_decomposition(
    dec: StableSetDecomposition, w: WeightVector
) -> StableSetDecomposition:
    """Remove per-vertex surplus by deleting vertices from (copies of) sets.

    Subsets of stable sets are stable, so the result is a valid
    decomposition with an unchanged total that matches `w` exactly.
    """
    w = [Fraction(v) for v in w]
    n = len(w)
    surplus = [a - b for a, b in zip(dec.combination(n), w)]
    if any(s < 0 for s in surplus):
        raise NcswitchError("decomposition does not dominate the weight vector")
    terms = [(lam, tuple(members)) for lam, members in dec.terms]
    for v in range(n):
        need = surplus[v]
        if need == 0:
            continue
        new_terms = []
        for lam, members in terms:
            if need > 0 and v in members:
                reduced = tuple(x for x in members if x != v)
                if lam <= need:
                    need -= lam
                    new_terms.append((lam, reduced))
                else:
                    new_terms.append((lam - need, members))
                    new_terms.append((need, reduced))
                    need = ZERO
            else:
                new_terms.append((lam, members))
        terms = new_terms
    out = StableSetDecomposition(terms, dec.total)
    if not out.equals(w):
        raise NcswitchError("trimming failed to reach exact equality")
    return out


@dataclass
class FractionalColoring:
    value: Fraction
    decomposition: StableSetDecomposition


def fractional_chromatic(g: ConflictGraph, w) -> FractionalColoring:
    """Exact optimum of  min sum(lambda)  s.t.  sum lambda_S X^S >= w.

    Solved through the packing dual (max w.y over the stable set
    inequalities), whose slack reduced costs give the optimal covering
    coefficients.  The returned decomposition is trimmed to equality.
    """
    vec = _as_weights(g, w)
    if all(v == 0 for v in vec):
        return FractionalColoring(ZERO, StableSetDecomposition([], ZERO))
    sets = maximal_stable_sets(g)
    A = []
    for s in sets:
        row = [ZERO] * g.n
        for v in s:
            row[v] = ONE
        A.append(row)
    b = [ONE] * len(sets)
    res = lp_max(A, b, vec)
    terms = [
        (lam, sets[i]) for i, lam in enumerate(res.duals) if lam > 0
    ]
    dec = StableSetDecomposition(terms, sum((t[0] for t in terms), ZERO))
    if dec.total != res.value:
        raise NcswitchError("LP duality mismatch in fractional coloring")
    if not dec.dominates(vec):
        raise NcswitchError("covering decomposition fails to dominate weights")
    dec = trim_decomposition(dec, vec)
    return FractionalColoring(res.value, dec)


def stab_membership(
    g: ConflictGraph, w
) -> tuple[bool, Optional[StableSetDecomposition], Fraction]:
    """Rate-region membership: inside iff the coloring optimum is <= 1."""
    col = fractional_chromatic(g, w)
    if col.value <= 1:
        return True, col.decomposition, col.value
    return False, None, col.value


def pattern_weights(tp: TrafficPattern, g: Optional[ConflictGraph] = None):
    g = g or build_enhanced_conflict_graph(tp)
    e = enhanced_rate_vector(tp)
    return g, [e[s] for s in g.vertices]


def speedup_for_rate(tp: TrafficPattern) -> SpeedupReport:
    """Minimum speedup for one admissible rate vector: the fractional
    weighted chromatic number of its enhanced conflict graph."""
    if not is_admissible(tp):
        raise InadmissiblePatternError("speedup_for_rate needs an admissible pattern")
    g, vec = pattern_weights(tp)
    col = fractional_chromatic(g, vec)
    return SpeedupReport(value=col.value, witness=col.decomposition)


def enumerate_vertices(
    rows: Sequence[tuple[Sequence[Fraction], Fraction]], dim: int
) -> list[tuple[Fraction, ...]]:
    """Vertices of {x : a.x <= b for all rows} by brute force.

    Takes every dim-subset of constraints, solves it as an equality system
    and keeps feasible unique solutions.  Exponential; callers gate size.
    """
    verts: set[tuple[Fraction, ...]] = set()
    for subset in combinations(range(len(rows)), dim):
        A = [rows[i][0] for i in subset]
        b = [rows[i][1] for i in subset]
        sol = solve_square(A, b)
        if sol is None:
            continue
        if all(
            sum((a * x for a, x in zip(row, sol)), ZERO) <= rhs
            for row, rhs in rows
        ):
            verts.add(tuple(sol))
    return sorted(verts)


def admissible_region_rows(tp: TrafficPattern):
    """Port-load constraints of the admissible region, in flow space."""
    flows = sorted(tp.flows)
    d = len(flows)
    rows: list[tuple[list[Fraction], Fraction]] = []
    for i in range(1, tp.num_inputs + 1):
        coeff = [ONE if f.input == i else ZERO for f in flows]
        if any(coeff):
            rows.append((coeff, ONE))
    for j in range(1, tp.num_outputs + 1):
        coeff = [ONE if j in f.fanout else ZERO for f in flows]
        if any(coeff):
            rows.append((coeff, ONE))
    for k in range(d):
        coeff = [ZERO] * d
        coeff[k] = -ONE
        rows.append((coeff, ZERO))
    return flows, rows


def min_speedup_exact(tp_shape: TrafficPattern) -> SpeedupReport:
    """Minimum speedup covering the whole admissible region of a flow shape.

    The coloring optimum is a convex function of the weight vector (it is a
    maximum of linear duals), so its maximum over the admissible polytope is
    attained at a vertex; we enumerate the vertices exactly.
    """
    flows, rows = admissible_region_rows(tp_shape)
    d = len(flows)
    if d > SPEEDUP_FLOW_LIMIT:
        raise DimensionLimitError(
            f"{d} flows exceed the exact-region limit of {SPEEDUP_FLOW_LIMIT}"
        )
    g = build_enhanced_conflict_graph(tp_shape)
    order = {f.key: k for k, f in enumerate(flows)}
    best = SpeedupReport(value=ZERO)
    for vert in enumerate_vertices(rows, d):
        vec = [vert[order[(s.input, s.fanout)]] for s in g.vertices]
        col = fractional_chromatic(g, vec)
        if col.value > best.value:
            best = SpeedupReport(
                value=col.value, witness=col.decomposition, worst_weights=list(vec)
            )
    return best


def imperfection_ratio(g: ConflictGraph, limit: int = QSTAB_VERTEX_LIMIT) -> Fraction:
    """max over QSTAB extreme points of the fractional chromatic number."""
    if g.n > limit:
        raise DimensionLimitError(
            f"imperfection ratio limited to {limit} vertices, got {g.n}"
        )
    rows: list[tuple[list[Fraction], Fraction]] = []
    for clique in maximal_cliques(g):
        coeff = [ZERO] * g.n
        for v in clique:
            coeff[v] = ONE
        rows.append((coeff, ONE))
    for v in range(g.n):
        coeff = [ZERO] * g.n
        coeff[v] = -ONE
        rows.append((coeff, ZERO))
    best = ZERO
    for vert in enumerate_vertices(rows, g.n):
        value = fractional_chromatic(g, list(vert)).value
        if value > best:
            best = value
    return best


def perfect_cover_bound(
    g: ConflictGraph, family: Sequence[Sequence[int]]
) -> Fraction:
    """Imperfection bound p/q from a family of induced perfect subgraphs
    covering every vertex exactly q times."""
    if not family:
        raise NcswitchError("cover family is empty")
    coverage = [0] * g.n
    for idx, members in enumerate(family):
        sub = g.induced(list(members))
        if not is_perfect(sub):
            raise NcswitchError(f"cover member #{idx} induces an imperfect graph")
        for v in members:
            coverage[v] += 1
    q = coverage[0]
    if q == 0 or any(c != q for c in coverage):
        raise NcswitchError(f"family does not cover evenly: counts {sorted(set(coverage))}")
    return Fraction(len(family), q)


def _knn_vertex_classes(g: ConflictGraph):
    unicasts: dict[int, list[int]] = {}
    broadcasts: dict[int, list[int]] = {}
    out_unicasts: dict[int, list[int]] = {}
    out_broadcasts: dict[int, list[int]] = {}
    for idx, s in enumerate(g.vertices):
        if not isinstance(s, SubflowId):
            raise NcswitchError("cover constructors need an enhanced conflict graph")
        box = unicasts if len(s.fanout) == 1 else broadcasts
        box.setdefault(s.input, []).append(idx)
        obox = out_unicasts if len(s.fanout) == 1 else out_broadcasts
        obox.setdefault(s.output, []).append(idx)
    return unicasts, broadcasts, out_unicasts, out_broadcasts


def input_cover_family(g: ConflictGraph) -> list[list[int]]:
    """K-1 copies of the all-unicast subgraph plus, per input i, the
    subgraph of all broadcast subflows together with input i's unicasts.

    Covers every vertex exactly K times with 2K-1 perfect members.
    """
    unicasts, broadcasts, _, _ = _knn_vertex_classes(g)
    K = max(unicasts) if unicasts else 0
    all_uni = sorted(v for vs in unicasts.values() for v in vs)
    all_bc = sorted(v for vs in broadcasts.values() for v in vs)
    family = [list(all_uni) for _ in range(K - 1)]
    for i in sorted(unicasts):
        family.append(sorted(all_bc + unicasts[i]))
    return family


def output_cover_family(g: ConflictGraph) -> list[list[int]]:
    """Per output i, the broadcast subflows plus output i's unicasts, and
    the unicasts plus output i's broadcast subflows.

    Covers every vertex exactly N+1 times with 2N perfect members.
    """
    _, _, out_unicasts, out_broadcasts = _knn_vertex_classes(g)
    all_uni = sorted(v for vs in out_unicasts.values() for v in vs)
    all_bc = sorted(v for vs in out_broadcasts.values() for v in vs)
    family = []
    for i in sorted(out_unicasts):
        family.append(sorted(all_bc + out_unicasts.get(i, [])))
        family.append(sorted(all_uni + out_broadcasts.get(i, [])))
    return family


def fs_region_check(N: int, r0: Fraction, r: Sequence[Fraction]) -> bool:
    """Exact fanout-splitting-without-coding region for the benefit shape:
    nonnegativity, port loads, and the fanout cut 2*r0 + sum(r) <= 2."""
    r0 = Fraction(r0)
    rs = [Fraction(x) for x in r]
    if len(rs) != N:
        raise NcswitchError(f"expected {N} unicast rates")
    if r0 < 0 or any(x < 0 for x in rs):
        return False
    total = sum(rs, ZERO)
    if total > 1:
        return False
    if any(r0 + x > 1 for x in rs):
        return False
    return 2 * r0 + total <= 2


def fs_min_scaling_at(N: int, r0: Fraction, r: Sequence[Fraction]) -> Fraction:
    """Smallest s >= 1 with (r0, r)/s inside the fanout-splitting region."""
    r0 = Fraction(r0)
    rs = [Fraction(x) for x in r]
    total = sum(rs, ZERO)
    candidates = [ONE, total, (2 * r0 + total) / 2]
    candidates += [r0 + x for x in rs]
    return max(candidates)


def fs_min_scaling(N: int) -> Fraction:
    """Speedup the special rate point needs under fanout splitting alone;
    evaluates to 3/2 - 1/N."""
    if N < 3:
        raise NcswitchError("defined for N >= 3")
    r0 = 1 - Fraction(1, N)
    rs = [Fraction(1, N)] * N
    return fs_min_scaling_at(N, r0, rs)


# ---------------------------------------------------------------------------
# 2 x N corner points of the admissible polytope


@dataclass
class CornerPoint:
    m: int
    U: tuple[int, ...]
    V: tuple[int, ...]
    weights: dict[SubflowId, Fraction]
    rank: int
    expected_rank: int

    @property
    def extreme(self) -> bool:
        return self.rank == self.expected_rank


def _corner_graph(N: int) -> ConflictGraph:
    return build_enhanced_conflict_graph(unicasts_and_broadcast_2xN(N))


def corner_point_weights(N: int, m: int, U: Sequence[int], V: Sequence[int]):
    """The fractional corner point v(m, U, V): u_1m = 1/|U|, b_1j = 1 - 1/|U|
    on V, u_2j = 1/|U| on U, zero elsewhere."""
    U = tuple(sorted(U))
    V = tuple(sorted(V))
    if not (2 <= len(U) <= N - 1):
        raise NcswitchError("need 2 <= |U| <= N-1")
    if m in U or not (1 <= m <= N):
        raise NcswitchError("m must lie outside U")
    if not set(U) <= set(V) or not set(V) <= set(range(1, N + 1)):
        raise NcswitchError("need U  subset of V subset of outputs")
    u = Fraction(1, len(U))
    fan = tuple(range(1, N + 1))
    w: dict[SubflowId, Fraction] = {}
    for j in range(1, N + 1):
        w[SubflowId(1, (j,), j)] = u if j == m else ZERO
        w[SubflowId(1, fan, j)] = (1 - u) if j in V else ZERO
        w[SubflowId(2, (j,), j)] = u if j in U else ZERO
    return w


def _corner_tight_rows(N: int, m: int, U: tuple[int, ...], V: tuple[int, ...], g):
    """The 3N constraints of the admissible polytope that are tight at
    v(m, U, V), as rows over the graph's vertex order."""
    index = {s: k for k, s in enumerate(g.vertices)}
    fan = tuple(range(1, N + 1))
    rows: list[list[Fraction]] = []

    def unit(s):
        row = [ZERO] * g.n
        row[index[s]] = ONE
        return row

    for j in range(1, N + 1):
        if j != m:
            rows.append(unit(SubflowId(1, (j,), j)))
    for j in range(1, N + 1):
        if j not in V:
            rows.append(unit(SubflowId(1, fan, j)))
    for j in range(1, N + 1):
        if j not in U:
            rows.append(unit(SubflowId(2, (j,), j)))
    for j in V:
        row = [ZERO] * g.n
        row[index[SubflowId(1, fan, j)]] = ONE
        for k in range(1, N + 1):
            row[index[SubflowId(1, (k,), k)]] = ONE
        rows.append(row)
    row = [ZERO] * g.n
    for j in range(1, N + 1):
        row[index[SubflowId(2, (j,), j)]] = ONE
    rows.append(row)
    for j in U:
        row = [ZERO] * g.n
        for s in (SubflowId(1, (j,), j), SubflowId(2, (j,), j), SubflowId(1, fan, j)):
            row[index[s]] = ONE
        rows.append(row)
    return rows


def qstab_corner_points_2xN(N: int) -> list[CornerPoint]:
    """Enumerate the fractional corner points v(m, U, V) of the 2 x N
    unicasts-plus-broadcast admissible polytope and verify extremality.

    Each point must make 3N linearly independent constraints tight; a rank
    deficit is reported on the point rather than silently dropped.
    """
    if not (3 <= N <= 8):
        raise NcswitchError("corner enumeration supported for 3 <= N <= 8")
    g = _corner_graph(N)
    outputs = list(range(1, N + 1))
    points = []
    for usize in range(2, N):
        for U in combinations(outputs, usize):
            rest = [j for j in outputs if j not in U]
            for m in rest:
                for vextra in range(0, len(outputs) - usize + 1):
                    for extra in combinations([j for j in outputs if j not in U], vextra):
                        V = tuple(sorted(U + extra))
                        w = corner_point_weights(N, m, U, V)
                        rows = _corner_tight_rows(N, m, tuple(sorted(U)), V, g)
                        rank = matrix_rank(rows)
                        points.append(
                            CornerPoint(
                                m=m,
                                U=tuple(sorted(U)),
                                V=V,
                                weights=w,
                                rank=rank,
                                expected_rank=3 * N,
                            )
                        )
    return points


def cornerpoint_decomposition(
    N: int, m: int, U: Sequence[int], V: Sequence[int]
) -> StableSetDecomposition:
    """The closed-form three-row decomposition of v(m, U, V).

    |U| pairs {u_1m, u_2j}; |U| sets pairing u_2j with the broadcast
    subflows away from j; one all-broadcast set.  The coefficient mass is
    1 + 1/|U| - 1/|U|^2, and after trimming the combination matches the
    corner point exactly.
    """
    g = _corner_graph(N)
    U = tuple(sorted(U))
    V = tuple(sorted(V))
    w = corner_point_weights(N, m, U, V)
    index = {s: k for k, s in enumerate(g.vertices)}
    fan = tuple(range(1, N + 1))
    u = Fraction(1, len(U))
    lam1 = u * u
    lam23 = u - u * u

    terms: list[tuple[Fraction, tuple[int, ...]]] = []
    u1m = index[SubflowId(1, (m,), m)]
    for j in U:
        terms.append((lam1, tuple(sorted((u1m, index[SubflowId(2, (j,), j)])))))
    for j in U:
        members = [index[SubflowId(2, (j,), j)]]
        members += [index[SubflowId(1, fan, k)] for k in V if k != j]
        terms.append((lam23, tuple(sorted(members))))
    terms.append((lam23, tuple(sorted(index[SubflowId(1, fan, k)] for k in V))))

    for lam, members in terms:
        if not is_stable_set(g, members):
            raise NcswitchError(f"constructed set {members} is not stable")
    total = sum((lam for lam, _ in terms), ZERO)
    expect = 1 + u - u * u
    if total != expect:
        raise NcswitchError(f"coefficient mass {total} != {expect}")
    dec = StableSetDecomposition(terms, total)
    vec = [w[s] for s in g.vertices]
    if not dec.dominates(vec):
        raise NcswitchError("corner decomposition fails to dominate the point")
    return trim_decomposition(dec, vec)
