"""Discrete-time switch simulation.

Bernoulli arrivals per flow, a pluggable per-slot scheduler (exact or
randomized max-weight stable set with coding, or the uncoded
fanout-splitting baseline), optional arrival batching, and
delay/throughput/stability metrics.  Runs are bit-deterministic for a
given config and seed.

With batching, arrivals are grouped into windows of delta*(1+eps) slots;
each batch is served during the following window and a packet counts as
delivered when every output in its flow's fanout can decode it, i.e. when
the flow's virtual queues for that batch all reach zero.  Without
batching the coded scheduler runs on a rolling generation per flow that
flushes at every full-decode instant.

Rates offered to the arrival process are decimals (`alpha` times the
pattern rates); exact rationals are only used upstream for region
membership, never inside the loop.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .errors import BatchingError, NcswitchError
from .scheduler import (
    CodedSwitchState,
    UncodedSwitchState,
    batch_controller,
    fanout_splitting_step,
    mwss_randomized,
)
from .traffic import TrafficPattern

SCHEDULERS = ("mwss_exact", "mwss_randomized", "fanout_splitting")


@dataclass
class SimConfig:
    pattern: TrafficPattern
    alpha: float = 1.0
    scheduler: str = "mwss_exact"
    candidates: int = 10
    delta: Optional[int] = None
    eps: Fraction = Fraction(1, 200)
    horizon: int = 100_000
    seed: int = 0
    speedup: Fraction = Fraction(1)
    clip_admissible: bool = False
    tracked_coding: bool = False
    check_invariants: bool = False
    trace: bool = False

    def __post_init__(self):
        if self.scheduler not in SCHEDULERS:
            raise NcswitchError(f"unknown scheduler {self.scheduler!r}")
        if self.alpha < 0:
            raise NcswitchError("alpha must be nonnegative")
        if self.horizon < 1:
            raise NcswitchError("horizon must be positive")
        if Fraction(self.speedup) < 1:
            raise NcswitchError("speedup must be at least 1")
        if self.delta is not None and self.horizon < (1 + self.eps) * self.delta:
            raise BatchingError("horizon shorter than one batching window")


@dataclass
class SimMetrics:
    mean_delay: Optional[float]
    per_flow_throughput: dict[str, float]
    throughput: float
    max_vq: int
    avg_vq: float
    empty_visits: int
    stable: bool
    arrivals: int
    delivered: int
    horizon: int
    trace_csv: Optional[str] = None


def _flow_label(key) -> str:
    return f"{key[0]}->{{{','.join(map(str, key[1]))}}}"


def _speedup_pattern(speedup: Fraction) -> tuple[int, list[int]]:
    """Per-slot configuration counts realizing a rational speedup: floor(s)
    configurations always, one extra in a fraction of slots, round-robin."""
    s = Fraction(speedup)
    base = s.numerator // s.denominator
    frac = s - base
    period = frac.denominator
    extras = []
    acc = Fraction(0)
    for _ in range(period):
        nxt = acc + frac
        extras.append(int(nxt) - int(acc))
        acc = nxt
    return base, extras


class _StabilityWindows:
    """Compares the final 10% mean total queue to the middle 10% mean.

    A backlog growing linearly from the start shows a final/middle ratio of
    about 0.95/0.50, so the cutoff must sit below 1.9; 1.5 separates that
    cleanly from the ~1.0 ratio of a stationary queue.
    """

    RATIO = 1.5

    def __init__(self, horizon: int):
        self.mid = (int(horizon * 0.45), int(horizon * 0.55))
        self.fin = (int(horizon * 0.90), horizon)
        self.mid_sum = 0
        self.fin_sum = 0

    def record(self, t: int, total_vq: int):
        if self.mid[0] <= t < self.mid[1]:
            self.mid_sum += total_vq
        elif self.fin[0] <= t < self.fin[1]:
            self.fin_sum += total_vq

    def stable(self) -> bool:
        mid = self.mid_sum / max(1, self.mid[1] - self.mid[0])
        fin = self.fin_sum / max(1, self.fin[1] - self.fin[0])
        return fin <= self.RATIO * mid + 1.0


def run(config: SimConfig) -> SimMetrics:
    alpha = config.alpha
    if config.clip_admissible and alpha > 0:
        loads = _port_loads(config.pattern)
        worst = max(loads) if loads else Fraction(0)
        if worst > 0:
            alpha = min(alpha, float(1 / worst))
    if config.scheduler == "fanout_splitting":
        return _run_uncoded(config, alpha)
    return _run_coded(config, alpha)


def _port_loads(tp: TrafficPattern) -> list[Fraction]:
    loads: dict = {}
    for f in tp.flows:
        loads[("i", f.input)] = loads.get(("i", f.input), Fraction(0)) + f.rate
        for j in f.fanout:
            loads[("o", j)] = loads.get(("o", j), Fraction(0)) + f.rate
    return list(loads.values())


class _Generation:
    """One coding generation of a flow: the packets of one arrival window."""

    __slots__ = ("idx", "m", "sum_arr", "rem", "dims", "input_space", "spaces")

    def __init__(self, idx: int, n_outputs: int):
        self.idx = idx
        self.m = 0
        self.sum_arr = 0
        self.rem = 0
        self.dims = [0] * n_outputs
        self.input_space = None
        self.spaces = None


class _Lane:
    """Per-flow queue of open generations with per-output service pointers.

    Arrivals extend the newest generation.  Every output receives its dofs
    oldest-generation-first, so an output's lagging generations always form
    a suffix.  A transmission serves exactly one generation (coding never
    mixes windows): requested outputs are grouped by the generation their
    pointer sits on and the group with the highest age-weighted score wins,
    which keeps slots efficient while guaranteeing stragglers finish within
    about a fanout's worth of windows.  In tracked mode each generation
    carries real coefficient vectors and the counting ledger is checked
    against the actual ranks on every operation.
    """

    def __init__(self, key, outputs, tracked: bool, field=None):
        self.key = key
        self.outputs = list(outputs)
        self.n_out = len(self.outputs)
        self.pos = {j: p for p, j in enumerate(self.outputs)}
        self.gens: list[_Generation] = []
        self.ptr = [0] * self.n_out  # per-output index of oldest lagging gen
        self.tracked = tracked
        self.field = field
        self.next_idx = 0  # rolling mode generation counter

    def arrive(self, t: int, gen_idx: Optional[int]):
        if self.gens and (gen_idx is None or self.gens[-1].idx == gen_idx):
            g = self.gens[-1]
        else:
            if gen_idx is None:
                gen_idx = self.next_idx
                self.next_idx += 1
            g = _Generation(gen_idx, self.n_out)
            self._init_tracking(g)
            self.gens.append(g)
        g.m += 1
        g.sum_arr += t
        g.rem += self.n_out
        tail = len(self.gens) - 1
        for p in range(self.n_out):
            if self.ptr[p] > tail:  # the open generation lags again
                self.ptr[p] = tail
        if self.tracked:
            new_len = g.input_space.length + 1
            g.input_space.extend_length(new_len)
            unit = [0] * new_len
            unit[new_len - 1] = 1
            g.input_space.insert(unit)
            for s in g.spaces:
                s.extend_length(new_len)

    def _init_tracking(self, g: _Generation):
        if self.tracked:
            from .coding import KnowledgeSpace

            g.input_space = KnowledgeSpace(self.field, 0)
            g.spaces = [KnowledgeSpace(self.field, 0) for _ in self.outputs]

    def transmit(self, positions) -> list[int]:
        """Send one combination to a subset of `positions`; returns the
        positions actually served."""
        gens = self.gens
        count = len(gens)
        groups: dict[int, list[int]] = {}
        for p in positions:
            gi = self.ptr[p]
            while gi < count and gens[gi].dims[p] >= gens[gi].m:
                gi += 1
            self.ptr[p] = gi
            if gi < count:
                groups.setdefault(gi, []).append(p)
        if not groups:
            raise NcswitchError("transmit scheduled with no lagging generation")
        newest = count - 1
        best_gi = -1
        best_score = -1
        for gi, members in groups.items():
            score = len(members) * (1 + newest - gi)
            if score > best_score or (score == best_score and gi < best_gi):
                best_score = score
                best_gi = gi
        g = gens[best_gi]
        served = groups[best_gi]
        if self.tracked:
            from .coding import innovative_combination

            combo = innovative_combination(
                g.input_space, [g.spaces[p] for p in served]
            )
            for p in served:
                if not g.spaces[p].insert(combo):
                    raise NcswitchError("scheduled combination was not innovative")
        for p in served:
            g.dims[p] += 1
            if self.tracked and g.spaces[p].dimension != g.dims[p]:
                raise NcswitchError("rank drifted from the virtual queue ledger")
        g.rem -= len(served)
        return served

    def pop_flushable(self, t: int, window: Optional[int]) -> list[_Generation]:
        """Remove finished generations from the front: fully served and
        (under batching) past their window boundary so content is final."""
        out = []
        while self.gens:
            g = self.gens[0]
            if g.rem != 0 or g.m == 0:
                break
            if window is not None and t < (g.idx + 1) * window:
                break
            out.append(self.gens.pop(0))
            for p in range(self.n_out):
                if self.ptr[p] > 0:
                    self.ptr[p] -= 1
        return out

    def backlog(self) -> int:
        return sum(g.m for g in self.gens)


def _run_coded(config: SimConfig, alpha: float) -> SimMetrics:
    from .coding import GF256
    from .graphs import build_enhanced_conflict_graph
    from .graphs import maximal_stable_sets

    pattern = config.pattern
    graph = build_enhanced_conflict_graph(pattern)
    keys = sorted({(s.input, s.fanout) for s in graph.vertices})
    lanes = {
        k: _Lane(k, k[1], config.tracked_coding, GF256 if config.tracked_coding else None)
        for k in keys
    }
    vertex_lane = []
    vertex_pos = []
    for s in graph.vertices:
        lane = lanes[(s.input, s.fanout)]
        vertex_lane.append(lane)
        vertex_pos.append(lane.pos[s.output])
    lane_vertices = {k: [] for k in keys}
    for v, s in enumerate(graph.vertices):
        lane_vertices[(s.input, s.fanout)].append(v)

    probs = [alpha * float(pattern.flow_rate(k)) for k in keys]
    rng = random.Random(config.seed)
    arr_rng = random.Random(rng.randrange(1 << 62))
    sched_rng = random.Random(rng.randrange(1 << 62))

    policy = batch_controller(config.delta, config.eps) if config.delta else None
    window = policy.window if policy else None

    n = graph.n
    w = [0] * n  # full per-subflow backlog, the MWSS weights
    arrivals = {k: 0 for k in keys}
    delivered = {k: 0 for k in keys}
    delay_sum = 0
    delay_count = 0
    total_vq = 0
    vq_accum = 0
    max_vq = 0
    empty_visits = 0
    windows = _StabilityWindows(config.horizon)
    base_cfgs, extras = _speedup_pattern(config.speedup)
    period = len(extras)
    previous: tuple[int, ...] = ()
    trace_rows = [] if config.trace else None
    sets = maximal_stable_sets(graph) if config.scheduler == "mwss_exact" else None

    def flush_lane(lane, t):
        nonlocal delay_sum, delay_count
        for g in lane.pop_flushable(t, window):
            delivered[lane.key] += g.m
            if policy is None or g.idx >= 1:  # first batch is decode warm-up
                delay_sum += g.m * t - g.sum_arr
                delay_count += g.m

    for t in range(config.horizon):
        gen_idx = (t // window) if policy is not None else None
        for i, key in enumerate(keys):
            p = probs[i]
            if p > 0 and arr_rng.random() < p:
                arrivals[key] += 1
                lanes[key].arrive(t, gen_idx)
                for v in lane_vertices[key]:
                    w[v] += 1
                total_vq += lanes[key].n_out

        if policy is not None and t % window == 0:
            for lane in lanes.values():
                flush_lane(lane, t)

        if total_vq:
            reps = base_cfgs + extras[t % period]
            for _ in range(reps):
                # a vertex with positive total backlog always has a lagging
                # generation, so the chosen set needs no further filtering
                chosen = _pick_set(config, sets, graph, w, previous, sched_rng)
                previous = chosen
                if not chosen:
                    break
                per_lane = {}
                for v in chosen:
                    per_lane.setdefault(vertex_lane[v].key, []).append(v)
                for key, verts in per_lane.items():
                    lane = lanes[key]
                    pos_of = {vertex_pos[v]: v for v in verts}
                    served = lane.transmit(list(pos_of))
                    for p in served:
                        w[pos_of[p]] -= 1
                    total_vq -= len(served)
                    flush_lane(lane, t)

        if config.check_invariants:
            _check_coded_invariants(lanes, lane_vertices, w, arrivals, delivered, total_vq)

        vq_accum += total_vq
        windows.record(t, total_vq)
        if total_vq == 0:
            empty_visits += 1
        slot_max = max(w)
        if slot_max > max_vq:
            max_vq = slot_max
        if trace_rows is not None:
            trace_rows.append(
                f"{t},{total_vq},{sum(arrivals.values())},{sum(delivered.values())}"
            )

    return _metrics(
        config, arrivals, delivered, delay_sum, delay_count,
        max_vq, vq_accum, empty_visits, windows, trace_rows,
    )


def _pick_set(config, sets, graph, weights, previous, sched_rng):
    if config.scheduler == "mwss_exact":
        return _argmax_set(sets, weights)
    return mwss_randomized(graph, weights, previous, config.candidates, sched_rng)


def _argmax_set(sets, weights):
    best = ()
    best_w = 0
    for members in sets:
        total = 0
        for v in members:
            total += weights[v]
        if total > best_w:
            best_w = total
            best = tuple(v for v in members if weights[v] > 0)
        elif total == best_w and total:
            trimmed = tuple(v for v in members if weights[v] > 0)
            if trimmed < best:
                best = trimmed
    return best


def _check_coded_invariants(lanes, lane_vertices, w, arrivals, delivered, total_vq):
    recount = 0
    for key, lane in lanes.items():
        per_out = [0] * lane.n_out
        for g in lane.gens:
            for p in range(lane.n_out):
                per_out[p] += g.m - g.dims[p]
        for v, pos_vq in zip(lane_vertices[key], per_out):
            if w[v] != pos_vq:
                raise NcswitchError(f"virtual queue ledger drift on flow {key}")
        recount += sum(per_out)
        if arrivals[key] != delivered[key] + lane.backlog():
            raise NcswitchError(f"conservation violated for flow {key}")
    if recount != total_vq:
        raise NcswitchError("total virtual queue drifted")


def _run_uncoded(config: SimConfig, alpha: float) -> SimMetrics:
    pattern = config.pattern
    state = UncodedSwitchState(pattern)
    keys = list(state.queues)
    probs = {k: alpha * float(pattern.flow_rate(k)) for k in keys}
    fanout_size = {k: len(k[1]) for k in keys}

    rng = random.Random(config.seed)
    arr_rng = random.Random(rng.randrange(1 << 62))
    sched_rng = random.Random(rng.randrange(1 << 62))

    arrivals = {k: 0 for k in keys}
    delivered = {k: 0 for k in keys}
    delay_sum = 0
    delay_count = 0
    total_vq = 0
    vq_accum = 0
    max_vq = 0
    empty_visits = 0
    windows = _StabilityWindows(config.horizon)
    base_cfgs, extras = _speedup_pattern(config.speedup)
    previous = ()
    trace_rows = [] if config.trace else None

    for t in range(config.horizon):
        for key in keys:
            p = probs[key]
            if p > 0 and arr_rng.random() < p:
                arrivals[key] += 1
                state.queues[key].arrive(t)
                total_vq += fanout_size[key]
        reps = base_cfgs + extras[t % len(extras)]
        for _ in range(reps):
            if total_vq == 0:
                break
            config_slot, deliveries, previous = fanout_splitting_step(
                state, sched_rng, config.candidates, previous
            )
            if not deliveries:
                break
            for key, outs, departed_arrival in deliveries:
                total_vq -= len(outs)
                if departed_arrival is not None:
                    delivered[key] += 1
                    delay_sum += t - departed_arrival
                    delay_count += 1

        vq_accum += total_vq
        windows.record(t, total_vq)
        if total_vq == 0:
            empty_visits += 1
        slot_max = state.max_vq()
        if slot_max > max_vq:
            max_vq = slot_max
        if trace_rows is not None:
            trace_rows.append(f"{t},{total_vq},{sum(arrivals.values())},{sum(delivered.values())}")

    return _metrics(
        config, arrivals, delivered, delay_sum, delay_count,
        max_vq, vq_accum, empty_visits, windows, trace_rows,
    )


def _metrics(
    config, arrivals, delivered, delay_sum, delay_count,
    max_vq, vq_accum, empty_visits, windows, trace_rows,
) -> SimMetrics:
    horizon = config.horizon
    per_flow = {
        _flow_label(k): delivered[k] / horizon for k in sorted(delivered)
    }
    trace_csv = None
    if trace_rows is not None:
        trace_csv = "slot,total_vq,arrivals,delivered\n" + "\n".join(trace_rows) + "\n"
    return SimMetrics(
        mean_delay=(delay_sum / delay_count) if delay_count else None,
        per_flow_throughput=per_flow,
        throughput=sum(delivered.values()) / horizon,
        max_vq=max_vq,
        avg_vq=vq_accum / horizon,
        empty_visits=empty_visits,
        stable=windows.stable(),
        arrivals=sum(arrivals.values()),
        delivered=sum(delivered.values()),
        horizon=horizon,
        trace_csv=trace_csv,
    )


# ---------------------------------------------------------------------------
# Load sweeps


CSV_HEADER = "alpha,scheduler,mean_delay,throughput,max_vq,stable"


@dataclass
class SweepRow:
    alpha: float
    scheduler: str
    mean_delay: Optional[float]
    throughput: float
    max_vq: int
    stable: bool

    def csv(self) -> str:
        delay = "" if self.mean_delay is None else f"{self.mean_delay:.3f}"
        return (
            f"{self.alpha:g},{self.scheduler},{delay},"
            f"{self.throughput:.6f},{self.max_vq},{int(self.stable)}"
        )


def sweep(config: SimConfig, alphas: list[float]) -> tuple[list[SweepRow], str]:
    """One run per grid point; seeds derive from the base seed and index so
    points stay independent but reproducible."""
    if sorted(alphas) != list(alphas):
        raise NcswitchError("alpha grid must be sorted ascending")
    rows = []
    for idx, a in enumerate(alphas):
        cfg = SimConfig(
            pattern=config.pattern,
            alpha=a,
            scheduler=config.scheduler,
            candidates=config.candidates,
            delta=config.delta,
            eps=config.eps,
            horizon=config.horizon,
            seed=config.seed + idx,
            speedup=config.speedup,
            clip_admissible=config.clip_admissible,
            tracked_coding=config.tracked_coding,
        )
        m = run(cfg)
        rows.append(
            SweepRow(
                alpha=a,
                scheduler=config.scheduler,
                mean_delay=m.mean_delay,
                throughput=m.throughput,
                max_vq=m.max_vq,
                stable=m.stable,
            )
        )
    csv = CSV_HEADER + "\n" + "\n".join(r.csv() for r in rows) + "\n"
    return rows, csv


def alpha_grid(spec: str) -> list[float]:
    """Parse 'start:stop:step' into an inclusive, drift-free grid."""
    try:
        start_s, stop_s, step_s = spec.split(":")
        start, stop, step = (
            Fraction(start_s),
            Fraction(stop_s),
            Fraction(step_s),
        )
    except ValueError as exc:
        raise NcswitchError(f"bad alpha grid {spec!r}; want start:stop:step") from exc
    if step <= 0:
        raise NcswitchError("grid step must be positive")
    out = []
    a = start
    while a <= stop:
        out.append(float(a))
        a += step
    return out


# ---------------------------------------------------------------------------
# Empty-state recurrence probe


@dataclass
class StabilityReport:
    visits: int
    mean_gap: Optional[float]
    max_gap: Optional[int]
    physical_consistent: bool
    horizon: int


def stability_probe(config: SimConfig) -> StabilityReport:
    """Run the unbatched coded scheduler and report how often the system
    returns to the all-queues-empty state.

    At every such instant each output has decoded everything its flow sent,
    so the physical queues are empty too; the run asserts that consistency
    through the conservation ledger.
    """
    if config.scheduler == "fanout_splitting":
        raise NcswitchError("the recurrence probe is about the coded scheduler")
    cfg = SimConfig(
        pattern=config.pattern,
        alpha=config.alpha,
        scheduler=config.scheduler,
        candidates=config.candidates,
        delta=None,
        horizon=config.horizon,
        seed=config.seed,
        speedup=config.speedup,
        tracked_coding=config.tracked_coding,
        check_invariants=True,
        trace=True,
    )
    metrics = run(cfg)
    gaps = []
    last = None
    for line in metrics.trace_csv.splitlines()[1:]:
        slot_s, vq_s, _, _ = line.split(",")
        if vq_s == "0":
            slot = int(slot_s)
            if last is not None and slot > last + 1:
                gaps.append(slot - last)
            last = slot
    return StabilityReport(
        visits=metrics.empty_visits,
        mean_gap=(sum(gaps) / len(gaps)) if gaps else None,
        max_gap=max(gaps) if gaps else None,
        physical_consistent=True,
        horizon=config.horizon,
    )
