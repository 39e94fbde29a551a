"""Finite-field machinery for intra-flow network coding.

Provides GF(2^m) arithmetic (log/antilog tables, XOR addition), row-reduced
knowledge spaces with innovation tests, a deterministic picker for
combinations that are simultaneously innovative to several receivers, a
systematic Vandermonde MDS erasure code used by frame schedules, and the
N-slot XOR broadcast schedule.

Packets are opaque byte strings; a coded packet applies the same field
element to every byte position, so payload coding always runs over
GF(2^8) regardless of the coefficient field used for scheduling tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .errors import CodingError, ImpossibleReceiverError, LengthMismatchError

# primitive reduction polynomials per degree (bit i = coefficient of x^i)
REDUCTION_POLY = {
    1: 0b11,
    2: 0b111,
    3: 0b1011,
    4: 0b10011,
    5: 0b100101,
    6: 0b1000011,
    7: 0b10000011,
    8: 0b100011101,  # x^8 + x^4 + x^3 + x^2 + 1
}


class GF:
    """GF(2^m) with table-based multiplication; elements are plain ints."""

    def __init__(self, m: int = 8):
        if m not in REDUCTION_POLY:
            raise CodingError(f"unsupported field degree {m}")
        self.m = m
        self.q = 1 << m
        self.poly = REDUCTION_POLY[m]
        self._exp = [1] * (2 * self.q)
        self._log = [0] * self.q
        x = 1
        for i in range(self.q - 1):
            self._exp[i] = x
            self._log[x] = i
            x <<= 1
            if x & self.q:
                x ^= self.poly
        for i in range(self.q - 1, 2 * self.q):
            self._exp[i] = self._exp[i - (self.q - 1)]

    def add(self, a: int, b: int) -> int:
        return a ^ b

    sub = add

    def mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return self._exp[self._log[a] + self._log[b]]

    def inv(self, a: int) -> int:
        if a == 0:
            raise CodingError("zero has no inverse")
        return self._exp[(self.q - 1) - self._log[a]]

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def pow(self, a: int, e: int) -> int:
        if a == 0:
            return 0 if e else 1
        return self._exp[(self._log[a] * e) % (self.q - 1)]

    def elements(self) -> range:
        return range(self.q)

    def __repr__(self):
        return f"GF(2^{self.m})"


GF2 = GF(1)
GF256 = GF(8)


def field_for_fanout(max_fanout: int) -> GF:
    """Smallest supported power-of-two field strictly larger than the
    fanout size, which keeps every scheduled combination innovative."""
    m = 1
    while (1 << m) <= max_fanout:
        m += 1
    return GF(m)


class KnowledgeSpace:
    """Row space of received coefficient vectors, kept in reduced
    row-echelon form.  Mutable and single-owner by design."""

    def __init__(self, field: GF, length: int):
        self.field = field
        self.length = length
        self.rows: list[list[int]] = []
        self.pivots: list[int] = []

    @property
    def dimension(self) -> int:
        return len(self.rows)

    def extend_length(self, new_length: int):
        if new_length < self.length:
            raise LengthMismatchError("knowledge spaces cannot shrink")
        pad = new_length - self.length
        if pad:
            for row in self.rows:
                row.extend([0] * pad)
            self.length = new_length

    def _reduce(self, v: Sequence[int]) -> list[int]:
        f = self.field
        work = list(v)
        for row, p in zip(self.rows, self.pivots):
            c = work[p]
            if c:
                for i in range(p, self.length):
                    if row[i]:
                        work[i] ^= f.mul(c, row[i])
        return work

    def contains(self, v: Sequence[int]) -> bool:
        if len(v) != self.length:
            raise LengthMismatchError(
                f"vector length {len(v)} != ambient length {self.length}"
            )
        return not any(self._reduce(v))

    def insert(self, v: Sequence[int]) -> bool:
        """Add a coefficient vector; True iff it was innovative."""
        if len(v) != self.length:
            raise LengthMismatchError(
                f"vector length {len(v)} != ambient length {self.length}"
            )
        f = self.field
        work = self._reduce(v)
        pivot = next((i for i, c in enumerate(work) if c), None)
        if pivot is None:
            return False
        inv = f.inv(work[pivot])
        if inv != 1:
            work = [f.mul(inv, c) for c in work]
        for row in self.rows:
            c = row[pivot]
            if c:
                for i in range(pivot, self.length):
                    if work[i]:
                        row[i] ^= f.mul(c, work[i])
        at = next(
            (k for k, p in enumerate(self.pivots) if p > pivot), len(self.pivots)
        )
        self.rows.insert(at, work)
        self.pivots.insert(at, pivot)
        return True

    def basis(self) -> list[list[int]]:
        return [list(r) for r in self.rows]

    def copy(self) -> "KnowledgeSpace":
        out = KnowledgeSpace(self.field, self.length)
        out.rows = [list(r) for r in self.rows]
        out.pivots = list(self.pivots)
        return out

    @classmethod
    def spanned_by(cls, field: GF, length: int, vectors: Iterable[Sequence[int]]):
        out = cls(field, length)
        for v in vectors:
            out.insert(v)
        return out

    @classmethod
    def full(cls, field: GF, length: int) -> "KnowledgeSpace":
        out = cls(field, length)
        for i in range(length):
            e = [0] * length
            e[i] = 1
            out.insert(e)
        return out


@dataclass
class UncoveredReport:
    """Outcome of the subspace-covering question.

    `exists` is authoritative when `exhaustive` or `by_counting` is set;
    otherwise the counting bound was inconclusive and no search was
    feasible.
    """

    exists: bool
    exhaustive: bool
    by_counting: bool

    def __bool__(self):
        return self.exists


SEARCH_LIMIT = 1 << 16


def exists_uncovered_vector(
    field: GF, n: int, subspaces: Sequence[KnowledgeSpace]
) -> UncoveredReport:
    """Is there a vector of the n-dimensional space outside every given
    proper subspace?

    Counting answers yes outright when the field is larger than the number
    of subspaces; otherwise the space is searched exhaustively when small
    enough.
    """
    for s in subspaces:
        if s.dimension >= n:
            raise CodingError("subspaces must be proper (dimension < n)")
    k = len(subspaces)
    if field.q > k:
        return UncoveredReport(exists=True, exhaustive=False, by_counting=True)
    if field.q ** n <= SEARCH_LIMIT:
        for idx in range(1, field.q ** n):
            vec = _unrank(field, idx, n)
            if not any(s.contains(vec) for s in subspaces):
                return UncoveredReport(exists=True, exhaustive=True, by_counting=False)
        return UncoveredReport(exists=False, exhaustive=True, by_counting=False)
    return UncoveredReport(exists=False, exhaustive=False, by_counting=False)


def _unrank(field: GF, idx: int, n: int) -> list[int]:
    out = []
    for _ in range(n):
        out.append(idx % field.q)
        idx //= field.q
    return out


def _intersection_in_coords(inp: KnowledgeSpace, recv: KnowledgeSpace) -> KnowledgeSpace:
    """span(inp) intersect span(recv), expressed in inp's basis coordinates.

    Zassenhaus: reduce rows [b | b] for the input basis and [r | 0] for the
    receiver basis; rows whose left half vanishes carry an intersection
    vector in the right half.  With the input basis in RREF, coordinates
    are read off at its pivot columns.
    """
    f = inp.field
    L = inp.length
    work: list[list[int]] = []

    def reduce_into(v: list[int]):
        for row in work:
            p = next(i for i, c in enumerate(row) if c)
            c = v[p]
            if c:
                for i in range(p, 2 * L):
                    if row[i]:
                        v[i] ^= f.mul(c, row[i])
        if any(v):
            p = next(i for i, c in enumerate(v) if c)
            inv = f.inv(v[p])
            if inv != 1:
                v = [f.mul(inv, c) for c in v]
            work.append(v)
            work.sort(key=lambda r: next(i for i, c in enumerate(r) if c))

    for b in inp.rows:
        reduce_into(list(b) + list(b))
    for r in recv.rows:
        reduce_into(list(r) + [0] * L)
    inter_vectors = [row[L:] for row in work if not any(row[:L])]

    coords = KnowledgeSpace(f, inp.dimension)
    for v in inter_vectors:
        coords.insert([v[p] for p in inp.pivots])
    return coords


def innovative_combination(
    input_space: KnowledgeSpace, receiver_spaces: Sequence[KnowledgeSpace]
) -> list[int]:
    """Deterministically pick a vector in the sender's span that is
    innovative for every receiver.

    Works in sender-basis coordinates and extends the candidate one
    coordinate at a time, always taking the smallest field element that
    leaves some completion outside all receiver subspaces.  Feasible
    whenever the field is larger than the number of receivers and every
    receiver still misses part of the sender's span.
    """
    f = input_space.field
    n = input_space.dimension
    if n == 0:
        raise ImpossibleReceiverError("sender knows nothing to combine")
    coords: list[KnowledgeSpace] = []
    for r in receiver_spaces:
        inter = _intersection_in_coords(input_space, r)
        if inter.dimension >= n:
            raise ImpossibleReceiverError(
                "a targeted receiver already spans the sender's knowledge"
            )
        coords.append(inter)
    if not coords:
        coords = [KnowledgeSpace(f, n)]  # only the zero vector is stale
    if f.q <= len(coords):
        raise CodingError(
            f"field of size {f.q} cannot dodge {len(coords)} receiver spaces"
        )

    def tail_in(space: KnowledgeSpace, t: int) -> bool:
        for i in range(t + 1, n):
            e = [0] * n
            e[i] = 1
            if not space.contains(e):
                return False
        return True

    prefix: list[int] = []
    for t in range(n):
        chosen = None
        for a in range(f.q):
            point = prefix + [a] + [0] * (n - t - 1)
            safe = True
            for space in coords:
                # the affine slab {prefix + a + anything} sits inside the
                # subspace iff the zero-padded point does and every later
                # unit vector does
                if space.contains(point) and tail_in(space, t):
                    safe = False
                    break
            if safe:
                chosen = a
                break
        if chosen is None:
            raise CodingError("no safe coordinate extension exists")
        prefix.append(chosen)

    # map back to ambient coordinates through the sender basis
    out = [0] * input_space.length
    for x, row in zip(prefix, input_space.rows):
        if x:
            for i, c in enumerate(row):
                if c:
                    out[i] ^= f.mul(x, c)
    return out


# ---------------------------------------------------------------------------
# Systematic Vandermonde MDS code over GF(2^8)


@dataclass
class MdsCode:
    """(n, k) erasure code: any k of the n coded symbols reconstruct the
    data.  Systematic: the first k symbols are the data itself."""

    n: int
    k: int
    field: GF
    matrix: list[list[int]]  # k x n generator, identity in the first k cols


def mds_code(k: int, n: int, field: GF = GF256) -> MdsCode:
    if k < 1 or n < k:
        raise CodingError(f"need 1 <= k <= n, got k={k} n={n}")
    if field.q < n + k:
        raise CodingError(
            f"field size {field.q} too small for an ({n},{k}) code (needs >= n+k)"
        )
    # Vandermonde on distinct points, then normalize the left block to I
    V = [[field.pow(x, r) for x in range(n)] for r in range(k)]
    left = [row[:k] for row in V]
    inv = _invert(field, left)
    G = [
        [_dot(field, [inv[r][j] for j in range(k)], [V[j][c] for j in range(k)]) for c in range(n)]
        for r in range(k)
    ]
    for r in range(k):
        for c in range(k):
            if G[r][c] != (1 if r == c else 0):
                raise CodingError("systematic normalization failed")
    return MdsCode(n=n, k=k, field=field, matrix=G)


def _dot(field: GF, a: Sequence[int], b: Sequence[int]) -> int:
    acc = 0
    for x, y in zip(a, b):
        if x and y:
            acc ^= field.mul(x, y)
    return acc


def _invert(field: GF, M: Sequence[Sequence[int]]) -> list[list[int]]:
    k = len(M)
    A = [list(row) + [1 if i == j else 0 for j in range(k)] for i, row in enumerate(M)]
    for col in range(k):
        piv = next((r for r in range(col, k) if A[r][col]), None)
        if piv is None:
            raise CodingError("matrix is singular")
        A[col], A[piv] = A[piv], A[col]
        inv = field.inv(A[col][col])
        A[col] = [field.mul(inv, v) for v in A[col]]
        for r in range(k):
            if r != col and A[r][col]:
                c = A[r][col]
                A[r] = [v ^ field.mul(c, p) for v, p in zip(A[r], A[col])]
    return [row[k:] for row in A]


def mds_encode(code: MdsCode, data: Sequence[bytes]) -> list[bytes]:
    """Encode k equal-length packets into n coded symbols."""
    if len(data) != code.k:
        raise CodingError(f"expected {code.k} packets, got {len(data)}")
    if len({len(p) for p in data}) > 1:
        raise CodingError("packets must have equal length")
    width = len(data[0]) if data else 0
    f = code.field
    out = []
    for c in range(code.n):
        sym = bytearray(width)
        for r in range(code.k):
            coeff = code.matrix[r][c]
            if coeff:
                packet = data[r]
                for i in range(width):
                    if packet[i]:
                        sym[i] ^= f.mul(coeff, packet[i])
        out.append(bytes(sym))
    return out


def mds_decode(
    code: MdsCode, symbols: Sequence[bytes], positions: Sequence[int]
) -> list[bytes]:
    """Recover the k data packets from any k coded symbols."""
    if len(symbols) != len(positions):
        raise CodingError("symbols and positions differ in length")
    if len(set(positions)) != len(positions):
        raise CodingError("repeated symbol positions")
    if len(symbols) < code.k:
        raise CodingError(
            f"need at least {code.k} symbols to decode, got {len(symbols)}"
        )
    pos = list(positions[: code.k])
    syms = list(symbols[: code.k])
    if any(not 0 <= p < code.n for p in pos):
        raise CodingError("symbol position out of range")
    f = code.field
    sub = [[code.matrix[r][p] for p in pos] for r in range(code.k)]
    inv = _invert(f, sub)  # right-inverse: data = symbols . inv
    width = len(syms[0]) if syms else 0
    if len({len(s) for s in syms}) > 1:
        raise CodingError("symbols must have equal length")
    out = []
    for r in range(code.k):
        packet = bytearray(width)
        for j in range(code.k):
            coeff = inv[j][r]
            if coeff:
                sym = syms[j]
                for i in range(width):
                    if sym[i]:
                        packet[i] ^= f.mul(coeff, sym[i])
        out.append(bytes(packet))
    return out


# ---------------------------------------------------------------------------
# The N-slot XOR broadcast schedule


@dataclass
class BroadcastSlot:
    occupied_output: int
    targets: tuple[int, ...]
    combination: tuple[int, ...]  # GF(2) coefficients over the N-1 packets


def xor_broadcast_schedule(N: int) -> list[BroadcastSlot]:
    """Serve N-1 broadcast packets in N slots while one output per slot is
    busy elsewhere: fresh packet to the idle majority each slot, then one
    XOR of everything to mop up."""
    if N < 3:
        raise CodingError("XOR broadcast schedule needs N >= 3")
    slots = []
    for t in range(1, N):
        comb = tuple(1 if i == t - 1 else 0 for i in range(N - 1))
        targets = tuple(j for j in range(1, N + 1) if j != t)
        slots.append(BroadcastSlot(occupied_output=t, targets=targets, combination=comb))
    slots.append(
        BroadcastSlot(
            occupied_output=N,
            targets=tuple(range(1, N)),
            combination=tuple([1] * (N - 1)),
        )
    )
    return slots


def simulate_broadcast_reception(N: int) -> dict[int, KnowledgeSpace]:
    """Run the XOR schedule through per-output knowledge spaces."""
    spaces = {j: KnowledgeSpace(GF2, N - 1) for j in range(1, N + 1)}
    for slot in xor_broadcast_schedule(N):
        for j in slot.targets:
            spaces[j].insert(list(slot.combination))
    return spaces
