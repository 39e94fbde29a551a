"""Switch schedules: offline frames, online max-weight stable set policies,
the uncoded fanout-splitting baseline, and batching.

A switch configuration grants each input at most one flow and a subset of
that flow's fanout, with no output granted twice.  Offline schedules
realize a stable set decomposition of the enhanced rate vector as a
periodic frame plus per-flow MDS erasure codes; online policies pick a
stable set per slot from virtual queue weights.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from . import coding
from .coding import GF, GF256, KnowledgeSpace, MdsCode, innovative_combination
from .errors import (
    BatchingError,
    GraphSizeLimitError,
    NcswitchError,
    NotInStabError,
    ScheduleError,
)
from .graphs import ConflictGraph, build_enhanced_conflict_graph, maximal_stable_sets
from .polytope import StableSetDecomposition, fractional_chromatic, pattern_weights
from .traffic import Flow, SubflowId, TrafficPattern, enhanced_rate_vector

FlowKey = tuple[int, tuple[int, ...]]

MWSS_EXACT_LIMIT = 24


@dataclass(frozen=True)
class Grant:
    input: int
    flow: FlowKey
    outputs: tuple[int, ...]


@dataclass(frozen=True)
class SwitchConfiguration:
    grants: tuple[Grant, ...]

    def served_subflows(self) -> list[SubflowId]:
        out = []
        for g in self.grants:
            out.extend(SubflowId(g.input, g.flow[1], j) for j in g.outputs)
        return out


IDLE = SwitchConfiguration(grants=())


def validate_configuration(config: SwitchConfiguration, tp: Optional[TrafficPattern] = None):
    """Enforce the two fabric constraints: one flow per input, outputs
    disjoint, and served outputs inside the granted flow's fanout."""
    seen_inputs = set()
    seen_outputs: set[int] = set()
    for g in config.grants:
        if g.input in seen_inputs:
            raise ScheduleError(f"input {g.input} granted twice")
        seen_inputs.add(g.input)
        if g.flow[0] != g.input:
            raise ScheduleError(f"grant input {g.input} serves foreign flow {g.flow}")
        if not set(g.outputs) <= set(g.flow[1]):
            raise ScheduleError(
                f"grant for flow {g.flow} targets outputs {g.outputs} outside its fanout"
            )
        overlap = seen_outputs & set(g.outputs)
        if overlap:
            raise ScheduleError(f"outputs {sorted(overlap)} granted twice")
        seen_outputs.update(g.outputs)
    if tp is not None:
        keys = {f.key for f in tp.flows}
        for g in config.grants:
            if g.flow not in keys:
                raise ScheduleError(f"grant references unknown flow {g.flow}")


def stable_set_to_configuration(g: ConflictGraph, members: Iterable[int]) -> SwitchConfiguration:
    """Group a stable set's subflows by flow; one grant per flow."""
    per_flow: dict[FlowKey, list[int]] = {}
    for v in members:
        s = g.vertices[v]
        per_flow.setdefault((s.input, s.fanout), []).append(s.output)
    grants = tuple(
        Grant(input=k[0], flow=k, outputs=tuple(sorted(outs)))
        for k, outs in sorted(per_flow.items())
    )
    return SwitchConfiguration(grants=grants)


# ---------------------------------------------------------------------------
# Offline frame schedules


@dataclass
class FrameSchedule:
    frame_size: int
    runs: list[tuple[SwitchConfiguration, int]]  # configuration, slot count
    code_specs: dict[FlowKey, tuple[int, int]]  # flow -> (T, k)
    coded: bool = True

    def total_slots(self) -> int:
        return sum(count for _, count in self.runs)

    def slots(self) -> Iterable[SwitchConfiguration]:
        for config, count in self.runs:
            for _ in range(count):
                yield config

    def subflow_service_counts(self) -> dict[SubflowId, int]:
        counts: dict[SubflowId, int] = {}
        for config, count in self.runs:
            for s in config.served_subflows():
                counts[s] = counts.get(s, 0) + count
        return counts


def _lcm_many(values: Iterable[int]) -> int:
    out = 1
    for v in values:
        out = math.lcm(out, v)
    return out


def offline_schedule(tp: TrafficPattern) -> FrameSchedule:
    """Frame schedule realizing the rates through a stable set decomposition.

    The frame size is the least common multiple of all rate and coefficient
    denominators, so every per-subflow service count lands on an integer.
    Fails with the coloring optimum attached when the enhanced rate vector
    is outside the stable set polytope; callers wanting speedup s should
    rescale the pattern by 1/s and retry.
    """
    g, vec = pattern_weights(tp)
    col = fractional_chromatic(g, vec)
    if col.value > 1:
        raise NotInStabError(col.value)
    dec = col.decomposition
    denoms = [f.rate.denominator for f in tp.flows]
    denoms += [lam.denominator for lam, _ in dec.terms]
    F = _lcm_many(denoms or [1])
    runs = []
    for lam, members in dec.terms:
        count = lam * F
        if count.denominator != 1:
            raise ScheduleError("frame size failed to clear a coefficient")
        if members and count:
            runs.append((stable_set_to_configuration(g, members), int(count)))
    used = sum(c for _, c in runs)
    if used > F:
        raise ScheduleError("decomposition mass exceeds one frame")
    if used < F:
        runs.append((IDLE, F - used))

    # per-flow code spec: T slots with any service, k = rate * F data packets
    specs: dict[FlowKey, tuple[int, int]] = {}
    for f in tp.flows:
        T = 0
        for config, count in runs:
            if any(gr.flow == f.key and gr.outputs for gr in config.grants):
                T += count
        k = f.rate * F
        assert k.denominator == 1
        specs[f.key] = (T, int(k))

    sched = FrameSchedule(frame_size=F, runs=runs, code_specs=specs, coded=True)
    _check_frame_invariants(sched, tp)
    return sched


def _check_frame_invariants(sched: FrameSchedule, tp: TrafficPattern):
    counts = sched.subflow_service_counts()
    for f in tp.flows:
        expect = f.rate * sched.frame_size
        for j in f.fanout:
            got = counts.get(SubflowId(f.input, f.fanout, j), 0)
            if got != expect:
                raise ScheduleError(
                    f"subflow ({f.input},{list(f.fanout)},{j}) served {got} of "
                    f"{expect} slots per frame"
                )
        T, k = sched.code_specs[f.key]
        if sched.coded and T < k:
            raise ScheduleError(f"flow {f.key} has T={T} < k={k}")
    for config, _ in sched.runs:
        validate_configuration(config, tp)


def _payload(flow: FlowKey, seq: int, width: int = 16) -> bytes:
    raw = f"{flow[0]}|{','.join(map(str, flow[1]))}|{seq}".encode()
    return raw[:width].ljust(width, b"\0")


@dataclass
class FrameServiceReport:
    ok: bool
    deficits: dict[FlowKey, int]
    indicators: list[list[SubflowId]]  # per-slot innovative service


def verify_frame_service(
    sched: FrameSchedule,
    tp: TrafficPattern,
    queue_sizes: dict[FlowKey, int],
    field: GF = GF256,
) -> FrameServiceReport:
    """Execute one frame with the MDS coding layer and check that every
    flow delivers its oldest min(q, rF) packets to the whole fanout.

    Dummy all-zero packets pad short queues; a two-byte leading counter on
    every symbol tells receivers how many decoded packets are real.
    """
    packets: dict[FlowKey, list[bytes]] = {}
    codewords: dict[FlowKey, list[bytes]] = {}
    true_counts: dict[FlowKey, int] = {}
    for f in tp.flows:
        T, k = sched.code_specs[f.key]
        q = queue_sizes.get(f.key, 0)
        real = min(q, k)
        data = [_payload(f.key, i) for i in range(real)]
        data += [bytes(16)] * (k - real)
        packets[f.key] = data
        true_counts[f.key] = real
        if k == 0 or T == 0:
            codewords[f.key] = []
            continue
        code = coding.mds_code(k, T, field)
        header = real.to_bytes(2, "big")
        codewords[f.key] = [header + sym for sym in coding.mds_encode(code, data)]

    sent: dict[FlowKey, int] = {key: 0 for key in packets}
    received: dict[tuple[FlowKey, int], list[tuple[int, bytes]]] = {}
    indicators: list[list[SubflowId]] = []
    for config in sched.slots():
        served: list[SubflowId] = []
        for gr in config.grants:
            if not gr.outputs:
                continue
            idx = sent[gr.flow]
            sent[gr.flow] += 1
            syms = codewords[gr.flow]
            if idx >= len(syms):
                raise ScheduleError(f"flow {gr.flow} ran out of codeword symbols")
            for j in gr.outputs:
                received.setdefault((gr.flow, j), []).append((idx, syms[idx]))
                served.append(SubflowId(gr.input, gr.flow[1], j))
        indicators.append(served)

    deficits: dict[FlowKey, int] = {}
    for f in tp.flows:
        T, k = sched.code_specs[f.key]
        want = true_counts[f.key]
        worst = 0
        for j in f.fanout:
            got = received.get((f.key, j), [])
            if k == 0:
                continue
            if len(got) < k:
                worst = max(worst, want)
                continue
            positions = [p for p, _ in got[:k]]
            header = got[0][1][:2]
            real = int.from_bytes(header, "big")
            code = coding.mds_code(k, T, field)
            decoded = coding.mds_decode(code, [s[2:] for _, s in got[:k]], positions)
            good = decoded[:real] == packets[f.key][:real] and real == want
            if not good:
                worst = max(worst, want)
        if worst:
            deficits[f.key] = worst
    return FrameServiceReport(ok=not deficits, deficits=deficits, indicators=indicators)


# ---------------------------------------------------------------------------
# Max weight stable set policies


def mwss_exact(
    g: ConflictGraph, weights: Sequence, sets: Optional[list[tuple[int, ...]]] = None
) -> tuple[int, ...]:
    """Maximum-weight stable set; zero-weight vertices are dropped from the
    returned set.  Ties break toward the lexicographically smallest set.

    With nonnegative weights some maximal stable set attains the optimum,
    so the search runs over the (cacheable) maximal-set list.
    """
    if g.n > MWSS_EXACT_LIMIT:
        raise GraphSizeLimitError(g.n, MWSS_EXACT_LIMIT, "exact MWSS")
    w = list(weights)
    best: tuple = ()
    best_w = 0
    for members in sets if sets is not None else maximal_stable_sets(g):
        total = sum(w[v] for v in members)
        trimmed = tuple(v for v in members if w[v] > 0)
        if total > best_w or (total == best_w and trimmed < best):
            best_w = total
            best = trimmed
    return best


def random_maximal_stable_set(g: ConflictGraph, rng: random.Random) -> tuple[int, ...]:
    """Greedy closure of a uniformly shuffled vertex order."""
    order = list(range(g.n))
    rng.shuffle(order)
    chosen_mask = 0
    chosen = []
    for v in order:
        if not (g.adj[v] & chosen_mask):
            chosen.append(v)
            chosen_mask |= 1 << v
    return tuple(sorted(chosen))


def maximalize(g: ConflictGraph, members: Iterable[int]) -> tuple[int, ...]:
    """Extend a stable set to a maximal one, adding vertices in index order."""
    chosen_mask = 0
    chosen = set()
    for v in members:
        if g.adj[v] & chosen_mask:
            raise ScheduleError("previous configuration is no longer a stable set")
        chosen.add(v)
        chosen_mask |= 1 << v
    for v in range(g.n):
        if v not in chosen and not (g.adj[v] & chosen_mask):
            chosen.add(v)
            chosen_mask |= 1 << v
    return tuple(sorted(chosen))


def mwss_randomized(
    g: ConflictGraph,
    weights: Sequence,
    previous: Iterable[int],
    candidates: int,
    rng: random.Random,
) -> tuple[int, ...]:
    """Best of the re-maximalized previous set and `candidates` random
    maximal stable sets.  Deterministic for a given generator state; never
    worse than the previous configuration."""
    if candidates < 1:
        raise ScheduleError("need at least one candidate")
    w = list(weights)
    pool = [maximalize(g, previous)]
    pool.extend(random_maximal_stable_set(g, rng) for _ in range(candidates))
    best = pool[0]
    best_w = sum(w[v] for v in best)
    for cand in pool[1:]:
        total = sum(w[v] for v in cand)
        if total > best_w:
            best, best_w = cand, total
    return tuple(v for v in best if w[v] > 0)


# ---------------------------------------------------------------------------
# Online coded switch state


class CountingFlowState:
    """Per-flow virtual queue ledger that trusts the innovation guarantee.

    Tracks the sender dimension and per-output received dimensions as
    integers.  `TrackedFlowState` is the drop-in variant that carries real
    coefficient vectors for cross-checking.
    """

    tracked = False

    def __init__(self, flow: Flow):
        self.flow = flow
        self.outputs = list(flow.fanout)
        self.m = 0
        self.dims = {j: 0 for j in self.outputs}

    def arrive(self, count: int = 1):
        self.m += count

    def vq(self, j: int) -> int:
        return self.m - self.dims[j]

    def total_vq(self) -> int:
        return sum(self.m - d for d in self.dims.values())

    def max_vq(self) -> int:
        if not self.outputs:
            return 0
        return self.m - min(self.dims.values())

    def transmit(self, targets: Sequence[int]):
        for j in targets:
            if self.dims[j] >= self.m:
                raise ScheduleError(
                    f"transmit to output {j} of flow {self.flow.key} with empty queue"
                )
            self.dims[j] += 1

    def fully_served(self) -> bool:
        return all(d == self.m for d in self.dims.values())

    def reset(self):
        self.m = 0
        for j in self.dims:
            self.dims[j] = 0


class TrackedFlowState:
    """Flow state carrying actual GF coefficient vectors.

    The sender's knowledge space is the full space over the packets that
    arrived; each output's space collects the combinations it received.
    Virtual queues are genuine dimension differences, recomputed from the
    bases on every use.
    """

    tracked = True

    def __init__(self, flow: Flow, field: GF = GF256):
        self.flow = flow
        self.field = field
        self.outputs = list(flow.fanout)
        self.input_space = KnowledgeSpace(field, 0)
        self.spaces = {j: KnowledgeSpace(field, 0) for j in self.outputs}

    @property
    def m(self) -> int:
        return self.input_space.dimension

    def arrive(self, count: int = 1):
        new_len = self.input_space.length + count
        self.input_space.extend_length(new_len)
        for _ in range(count):
            e = [0] * new_len
            e[self.input_space.dimension] = 1
            self.input_space.insert(e)
        for s in self.spaces.values():
            s.extend_length(new_len)

    def vq(self, j: int) -> int:
        return self.input_space.dimension - self.spaces[j].dimension

    def total_vq(self) -> int:
        return sum(self.vq(j) for j in self.outputs)

    def max_vq(self) -> int:
        return max((self.vq(j) for j in self.outputs), default=0)

    def transmit(self, targets: Sequence[int]):
        combo = innovative_combination(
            self.input_space, [self.spaces[j] for j in targets]
        )
        for j in targets:
            if not self.spaces[j].insert(combo):
                raise ScheduleError(
                    f"combination was stale for output {j} of flow {self.flow.key}"
                )

    def fully_served(self) -> bool:
        return all(self.vq(j) == 0 for j in self.outputs)

    def reset(self):
        self.input_space = KnowledgeSpace(self.field, 0)
        self.spaces = {j: KnowledgeSpace(self.field, 0) for j in self.outputs}


class CodedSwitchState:
    """Graph, per-flow coding states, and the vertex bookkeeping MWSS needs."""

    def __init__(self, tp: TrafficPattern, tracked: bool = False, field: GF = GF256):
        self.pattern = tp
        self.graph = build_enhanced_conflict_graph(tp)
        cls = TrackedFlowState if tracked else CountingFlowState
        self.flows: dict[FlowKey, CountingFlowState | TrackedFlowState] = {}
        for f in sorted(tp.flows):
            self.flows[f.key] = cls(f, field) if tracked else cls(f)
        self.vertex_flow: list[FlowKey] = []
        self.vertex_output: list[int] = []
        for s in self.graph.vertices:
            self.vertex_flow.append((s.input, s.fanout))
            self.vertex_output.append(s.output)
        self._stable_sets: Optional[list[tuple[int, ...]]] = None

    @property
    def stable_sets(self) -> list[tuple[int, ...]]:
        if self._stable_sets is None:
            self._stable_sets = maximal_stable_sets(self.graph)
        return self._stable_sets

    def weights(self) -> list[int]:
        return [
            self.flows[self.vertex_flow[v]].vq(self.vertex_output[v])
            for v in range(self.graph.n)
        ]

    def total_vq(self) -> int:
        return sum(st.total_vq() for st in self.flows.values())

    def max_vq(self) -> int:
        return max((st.max_vq() for st in self.flows.values()), default=0)


def online_step(
    state: CodedSwitchState,
    kind: str = "mwss_exact",
    rng: Optional[random.Random] = None,
    candidates: int = 10,
    previous: tuple[int, ...] = (),
) -> tuple[SwitchConfiguration, list[tuple[FlowKey, tuple[int, ...]]], tuple[int, ...]]:
    """One scheduling decision plus its transmissions.

    Picks a stable set from the virtual queue weights, sends one innovative
    combination per chosen flow to all of that flow's chosen outputs, and
    decrements exactly those virtual queues.  Returns the configuration,
    the (flow, outputs) transmissions, and the chosen set for reuse as the
    next step's `previous`.
    """
    weights = state.weights()
    if kind == "mwss_exact":
        chosen = mwss_exact(state.graph, weights, state.stable_sets)
    elif kind == "mwss_randomized":
        if rng is None:
            raise ScheduleError("randomized MWSS needs an rng")
        chosen = mwss_randomized(state.graph, weights, previous, candidates, rng)
    else:
        raise ScheduleError(f"unknown scheduler kind {kind!r}")

    per_flow: dict[FlowKey, list[int]] = {}
    for v in chosen:
        per_flow.setdefault(state.vertex_flow[v], []).append(state.vertex_output[v])
    transmissions = []
    for key, outputs in sorted(per_flow.items()):
        state.flows[key].transmit(outputs)
        transmissions.append((key, tuple(sorted(outputs))))
    config = stable_set_to_configuration(state.graph, chosen)
    validate_configuration(config, state.pattern)
    return config, transmissions, chosen


# ---------------------------------------------------------------------------
# Uncoded fanout-splitting baseline


class UncodedFlowQueue:
    """FIFO of packets, each with the set of outputs it still owes."""

    def __init__(self, flow: Flow):
        self.flow = flow
        self.packets: list[list] = []  # [arrival_slot, residual set]
        self.head = 0
        self.residual_count = {j: 0 for j in flow.fanout}

    def backlog(self) -> int:
        return len(self.packets) - self.head

    def arrive(self, slot: int):
        self.packets.append([slot, set(self.flow.fanout)])
        for j in self.flow.fanout:
            self.residual_count[j] += 1

    def hol(self):
        return self.packets[self.head] if self.head < len(self.packets) else None

    def serve(self, outputs: Iterable[int], slot: int) -> Optional[int]:
        """Deliver the head packet to `outputs`; arrival slot when it departs."""
        pkt = self.hol()
        if pkt is None:
            raise ScheduleError("serving an empty uncoded queue")
        for j in outputs:
            if j not in pkt[1]:
                raise ScheduleError(f"output {j} already has the head packet")
            pkt[1].discard(j)
            self.residual_count[j] -= 1
        if not pkt[1]:
            self.head += 1
            if self.head > 4096 and self.head * 2 > len(self.packets):
                del self.packets[: self.head]
                self.head = 0
            return pkt[0]
        return None

    def total_vq(self) -> int:
        return sum(self.residual_count.values())

    def max_vq(self) -> int:
        return max(self.residual_count.values(), default=0)


class UncodedSwitchState:
    def __init__(self, tp: TrafficPattern):
        self.pattern = tp
        self.queues: dict[FlowKey, UncodedFlowQueue] = {
            f.key: UncodedFlowQueue(f) for f in sorted(tp.flows)
        }
        self.by_input: dict[int, list[FlowKey]] = {}
        for f in sorted(tp.flows):
            self.by_input.setdefault(f.input, []).append(f.key)

    def total_vq(self) -> int:
        return sum(q.total_vq() for q in self.queues.values())

    def max_vq(self) -> int:
        return max((q.max_vq() for q in self.queues.values()), default=0)


DepartureVector = tuple[tuple[FlowKey, tuple[int, ...]], ...]


# queue backlogs dominate the departure-vector weight; the number of
# outputs covered only breaks ties.  Weighting by per-output residual
# instead would let a fat multicast grant outweigh keeping another input
# busy, which overshoots the fanout-splitting region on broadcast traffic.
_COVER_WEIGHT = 1
_BACKLOG_WEIGHT = 1 << 20


def _grant_weight(q: UncodedFlowQueue, outs: tuple[int, ...]) -> int:
    return q.backlog() * _BACKLOG_WEIGHT + _COVER_WEIGHT * len(outs)


def _greedy_departure_vector(
    state: UncodedSwitchState, input_order: Sequence[int], flow_orders: dict[int, Sequence[FlowKey]]
) -> DepartureVector:
    occupied: set[int] = set()
    grants = []
    for i in input_order:
        best_key = None
        best_outputs: tuple[int, ...] = ()
        best_w = 0
        for key in flow_orders[i]:
            q = state.queues[key]
            pkt = q.hol()
            if pkt is None:
                continue
            outs = tuple(sorted(j for j in pkt[1] if j not in occupied))
            if not outs:
                continue
            w = _grant_weight(q, outs)
            if w > best_w:
                best_w = w
                best_key = key
                best_outputs = outs
        if best_key is not None:
            grants.append((best_key, best_outputs))
            occupied.update(best_outputs)
    return tuple(sorted(grants))


def _departure_weight(state: UncodedSwitchState, vec: DepartureVector) -> int:
    return sum(_grant_weight(state.queues[key], outs) for key, outs in vec)


def _revalidate_departure(state: UncodedSwitchState, vec: DepartureVector) -> DepartureVector:
    """Clamp a previous departure vector to the current head packets."""
    occupied: set[int] = set()
    grants = []
    for key, _ in vec:
        q = state.queues[key]
        pkt = q.hol()
        if pkt is None:
            continue
        outs = tuple(sorted(j for j in pkt[1] if j not in occupied))
        if outs:
            grants.append((key, outs))
            occupied.update(outs)
    return tuple(sorted(grants))


def fanout_splitting_step(
    state: UncodedSwitchState,
    rng: random.Random,
    candidates: int = 8,
    previous: DepartureVector = (),
) -> tuple[SwitchConfiguration, list[tuple[FlowKey, tuple[int, ...], Optional[int]]], DepartureVector]:
    """One slot of the uncoded baseline.

    Each input may send the head packet of one of its flows to any subset
    of that packet's residual fanout; candidates are greedy closures of
    shuffled input and flow orders, weighted by residual backlog, compared
    against the previous slot's vector.  A packet departs when its residual
    fanout empties.
    """
    pool = [_revalidate_departure(state, previous)]
    inputs = sorted(state.by_input)
    for _ in range(candidates):
        order = list(inputs)
        rng.shuffle(order)
        flow_orders = {}
        for i in inputs:
            keys = list(state.by_input[i])
            rng.shuffle(keys)
            flow_orders[i] = keys
        pool.append(_greedy_departure_vector(state, order, flow_orders))
    best = pool[0]
    best_w = _departure_weight(state, best)
    for cand in pool[1:]:
        w = _departure_weight(state, cand)
        if w > best_w:
            best, best_w = cand, w

    deliveries = []
    grants = []
    for key, outs in best:
        departed = state.queues[key].serve(outs, slot=0)
        deliveries.append((key, outs, departed))
        grants.append(Grant(input=key[0], flow=key, outputs=outs))
    config = SwitchConfiguration(grants=tuple(sorted(grants, key=lambda g: g.input)))
    validate_configuration(config, state.pattern)
    return config, deliveries, best


# ---------------------------------------------------------------------------
# Uncoded frame schedule for the broadcast-plus-unicasts shape


def _perfect_matching(support: list[list[bool]]) -> list[Optional[int]]:
    """Kuhn's algorithm; support is square and comes from a matrix with
    equal positive line sums, so a perfect matching always exists."""
    n = len(support)
    match_row_of_col: list[Optional[int]] = [None] * n

    def try_row(r: int, visited: set) -> bool:
        for c in range(n):
            if support[r][c] and c not in visited:
                visited.add(c)
                if match_row_of_col[c] is None or try_row(match_row_of_col[c], visited):
                    match_row_of_col[c] = r
                    return True
        return False

    for r in range(n):
        if not try_row(r, set()):
            raise ScheduleError("no perfect matching on padded support")
    out: list[Optional[int]] = [None] * n
    for c, r in enumerate(match_row_of_col):
        out[r] = c
    return out


def _iterated_matching_slots(n_rows: int, n_cols: int, demand: list[list[int]]):
    """Serve an integer demand matrix one unit-per-line per slot.

    Each slot pads the matrix to equal line sums and extracts a perfect
    matching; every critical row and column loses one unit per slot, so the
    number of slots equals the maximum line load exactly.
    """
    slots = []
    size = max(n_rows, n_cols)
    while True:
        rowsum = [sum(row) for row in demand]
        colsum = [sum(demand[r][c] for r in range(n_rows)) for c in range(n_cols)]
        T = max(rowsum + colsum)
        if T == 0:
            break
        pad = [[0] * size for _ in range(size)]
        for r in range(n_rows):
            for c in range(n_cols):
                pad[r][c] = demand[r][c]
        prow = [sum(row) for row in pad]
        pcol = [sum(pad[r][c] for r in range(size)) for c in range(size)]
        for r in range(size):
            for c in range(size):
                add = min(T - prow[r], T - pcol[c])
                if add > 0:
                    pad[r][c] += add
                    prow[r] += add
                    pcol[c] += add
        match = _perfect_matching([[v > 0 for v in row] for row in pad])
        served = []
        for r in range(n_rows):
            c = match[r]
            if c is not None and c < n_cols and demand[r][c] > 0:
                demand[r][c] -= 1
                served.append((r, c))
        slots.append(served)
    return slots


def appendix_fs_schedule(N: int, r0, r) -> FrameSchedule:
    """Uncoded frame schedule achieving any point of the fanout-splitting
    region of the broadcast-plus-unicasts shape.

    Broadcast packets are split into per-output groups sized by a fraction
    `a = min(r0/S, 1/2)` of each unicast's load.  A first phase broadcasts
    the ungrouped remainder to everyone; N paired phases broadcast group j
    to everything except output j while input 2 serves unicast j; a final
    phase clears the leftover single-output demands with iterated
    matchings, whose makespan equals the maximum port load.  The total
    never exceeds the frame.
    """
    from .polytope import fs_region_check

    r0 = Fraction(r0)
    rates = [Fraction(x) for x in r]
    if len(rates) != N:
        raise ScheduleError(f"expected {N} unicast rates")
    if not fs_region_check(N, r0, rates):
        raise ScheduleError("rates are outside the fanout-splitting region")
    S = sum(rates, Fraction(0))
    a = Fraction(1, 2) if S == 0 else min(r0 / S, Fraction(1, 2))
    denoms = [r0.denominator] + [x.denominator for x in rates]
    denoms += [(a * x).denominator for x in rates]
    denoms += [((1 - a) * x).denominator for x in rates]
    denoms.append((r0 - a * S).denominator)
    F = _lcm_many(denoms)

    fan = tuple(range(1, N + 1))
    bcast: FlowKey = (1, fan)
    uni = {j: (2, (j,)) for j in range(1, N + 1)}

    def whole(x: Fraction) -> int:
        if x.denominator != 1:
            raise ScheduleError(f"frame size {F} does not clear {x}")
        return x.numerator

    runs: list[tuple[SwitchConfiguration, int]] = []
    count0 = whole((r0 - a * S) * F)
    if count0:
        runs.append(
            (SwitchConfiguration((Grant(1, bcast, fan),)), count0)
        )
    for j in range(1, N + 1):
        count = whole(a * rates[j - 1] * F)
        if not count:
            continue
        others = tuple(k for k in fan if k != j)
        grants = [Grant(2, uni[j], (j,))]
        if others:
            grants.insert(0, Grant(1, bcast, others))
        runs.append((SwitchConfiguration(tuple(grants)), count))

    # leftover phase: group j still owes output j, unicast j owes (1-a) r_j F
    demand = [
        [whole(a * rates[j - 1] * F) for j in range(1, N + 1)],
        [whole((1 - a) * rates[j - 1] * F) for j in range(1, N + 1)],
    ]
    for served in _iterated_matching_slots(2, N, demand):
        grants = []
        for row, col in served:
            j = col + 1
            if row == 0:
                grants.append(Grant(1, bcast, (j,)))
            else:
                grants.append(Grant(2, uni[j], (j,)))
        runs.append((SwitchConfiguration(tuple(grants)), 1))

    used = sum(c for _, c in runs)
    if used > F:
        raise ScheduleError(f"schedule uses {used} slots, frame is only {F}")
    if used < F:
        runs.append((IDLE, F - used))

    flows = [Flow(1, fan, r0)] + [Flow(2, (j,), rates[j - 1]) for j in range(1, N + 1)]
    tp = TrafficPattern(2, N, tuple(flows))
    specs: dict[FlowKey, tuple[int, int]] = {}
    for f in tp.flows:
        T = sum(
            count
            for config, count in runs
            if any(gr.flow == f.key and gr.outputs for gr in config.grants)
        )
        specs[f.key] = (T, int(f.rate * F))
    sched = FrameSchedule(frame_size=F, runs=runs, code_specs=specs, coded=False)
    _check_frame_invariants(sched, tp)
    return sched


def busy_slots(sched: FrameSchedule) -> int:
    return sum(count for config, count in sched.runs if config.grants)


# ---------------------------------------------------------------------------
# Batching


@dataclass(frozen=True)
class BatchPolicy:
    """Arrival windows of delta*(1+eps) slots.

    A window's arrivals form one coding generation per flow.  Generations
    are served oldest-first and a generation can be decoded (hence flushed)
    no earlier than its window boundary, when its content is final.
    """

    delta: int
    eps: Fraction
    clearing: int
    window: int

    def batch_of_slot(self, t: int) -> int:
        return t // self.window

    def flush_slot(self, batch: int) -> int:
        """First slot at which the batch is complete and may decode."""
        return (batch + 1) * self.window

    def serviceable_batch(self, t: int) -> int:
        """Newest batch a flow may be working on in slot t (older unfinished
        generations always take precedence)."""
        return self.batch_of_slot(t)


def batch_controller(delta: int, eps) -> BatchPolicy:
    if delta < 1:
        raise BatchingError("delta must be at least 1")
    eps = Fraction(eps)
    if eps <= 0:
        raise BatchingError("eps must be positive")
    clearing = math.ceil(delta * eps)
    return BatchPolicy(delta=delta, eps=eps, clearing=clearing, window=delta + clearing)
