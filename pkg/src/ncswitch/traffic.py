"""Traffic patterns on a K x N input-queued crossbar switch.

A flow is a multicast stream identified by its input and fanout set; a
subflow is the piece of a flow headed to one particular output.  Rates are
exact `fractions.Fraction` values throughout so that region membership and
speedup computations downstream stay exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .errors import (
    DuplicateFlowError,
    DuplicateOutputError,
    InvalidFanoutError,
    InvalidRateError,
    PatternFormatError,
)

Rational = Fraction


def rat(value) -> Fraction:
    """Coerce ints, strings like '2/3' or Fractions to an exact rational."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise InvalidRateError(f"cannot parse rational {value!r}") from exc
    raise InvalidRateError(f"cannot coerce {type(value).__name__} to a rational")


def rat_str(value: Fraction) -> str:
    """Serialize a rational as 'p/q' (always with an explicit denominator)."""
    return f"{value.numerator}/{value.denominator}"


@dataclass(frozen=True, order=True)
class Flow:
    """A multicast stream: packets from `input` destined to every output in `fanout`."""

    input: int
    fanout: tuple[int, ...]
    rate: Fraction

    def __post_init__(self):
        if not self.fanout:
            raise InvalidFanoutError(f"flow from input {self.input} has an empty fanout")
        if len(set(self.fanout)) != len(self.fanout):
            raise DuplicateOutputError(
                f"flow ({self.input}, {list(self.fanout)}) lists an output twice"
            )
        if tuple(sorted(self.fanout)) != self.fanout:
            object.__setattr__(self, "fanout", tuple(sorted(self.fanout)))
        if self.rate < 0:
            raise InvalidRateError(
                f"flow ({self.input}, {list(self.fanout)}) has negative rate {self.rate}"
            )

    @property
    def key(self) -> tuple[int, tuple[int, ...]]:
        return (self.input, self.fanout)

    def subflows(self) -> list["SubflowId"]:
        return [SubflowId(self.input, self.fanout, j) for j in self.fanout]


@dataclass(frozen=True, order=True)
class SubflowId:
    """One (input, fanout, output) leg of a flow."""

    input: int
    fanout: tuple[int, ...]
    output: int

    def __post_init__(self):
        if self.output not in self.fanout:
            raise InvalidFanoutError(
                f"subflow output {self.output} is not in fanout {list(self.fanout)}"
            )


@dataclass(frozen=True)
class TrafficPattern:
    """A collection of flows on a K x N switch.

    Flow identity is the (input, fanout) pair; construction rejects
    duplicates, out-of-range ports and negative rates.  Rates above 1 are
    allowed here and caught by `is_admissible`, which is a separate check.
    """

    num_inputs: int
    num_outputs: int
    flows: tuple[Flow, ...]

    def __post_init__(self):
        if self.num_inputs < 1 or self.num_outputs < 1:
            raise PatternFormatError("switch must have at least one input and one output")
        seen = set()
        for f in self.flows:
            if not (1 <= f.input <= self.num_inputs):
                raise PatternFormatError(
                    f"flow ({f.input}, {list(f.fanout)}) uses input outside [1..{self.num_inputs}]"
                )
            if f.fanout[-1] > self.num_outputs or f.fanout[0] < 1:
                raise InvalidFanoutError(
                    f"flow ({f.input}, {list(f.fanout)}) uses an output outside"
                    f" [1..{self.num_outputs}]"
                )
            if f.key in seen:
                raise DuplicateFlowError(
                    f"duplicate flow ({f.input}, {list(f.fanout)})"
                )
            seen.add(f.key)
        object.__setattr__(self, "flows", tuple(self.flows))

    def subflows(self) -> list[SubflowId]:
        """All subflows, sorted by (input, fanout, output)."""
        out: list[SubflowId] = []
        for f in sorted(self.flows):
            out.extend(f.subflows())
        return sorted(out)

    def flow_rate(self, key: tuple[int, tuple[int, ...]]) -> Fraction:
        for f in self.flows:
            if f.key == key:
                return f.rate
        raise KeyError(key)


EnhancedRateVector = Mapping[SubflowId, Fraction]


def is_admissible(tp: TrafficPattern) -> bool:
    """True iff no input and no output carries total rate above 1."""
    in_load = [Fraction(0)] * (tp.num_inputs + 1)
    out_load = [Fraction(0)] * (tp.num_outputs + 1)
    for f in tp.flows:
        in_load[f.input] += f.rate
        for j in f.fanout:
            out_load[j] += f.rate
    return all(x <= 1 for x in in_load[1:]) and all(x <= 1 for x in out_load[1:])


def enhanced_rate_vector(tp: TrafficPattern) -> dict[SubflowId, Fraction]:
    """One entry per subflow, each carrying its parent flow's rate."""
    return {s: tp.flow_rate((s.input, s.fanout)) for s in tp.subflows()}


def benefit_pattern(
    N: int,
    r0: Fraction | None = None,
    r: Sequence[Fraction] | None = None,
) -> TrafficPattern:
    """2 x N pattern: one broadcast from input 1 plus a unicast from input 2
    to every output.

    Defaults place the pattern at the fully loaded rate point
    r0 = 1 - 1/N, r_i = 1/N.
    """
    if N < 2:
        raise PatternFormatError("benefit pattern needs at least 2 outputs")
    if r0 is None:
        r0 = 1 - Fraction(1, N)
    if r is None:
        r = [Fraction(1, N)] * N
    if len(r) != N:
        raise PatternFormatError(f"expected {N} unicast rates, got {len(r)}")
    flows = [Flow(1, tuple(range(1, N + 1)), rat(r0))]
    flows += [Flow(2, (i,), rat(r[i - 1])) for i in range(1, N + 1)]
    return TrafficPattern(2, N, tuple(flows))


def special_rate_point(N: int) -> TrafficPattern:
    """The benefit pattern at r0 = 1 - 1/N, r_i = 1/N (every port load is 1)."""
    if N < 3:
        raise PatternFormatError("the special rate point is defined for N >= 3")
    return benefit_pattern(N)


def speedup_pattern_2x3() -> TrafficPattern:
    """2 x 3 pattern whose enhanced conflict graph contains a 5-hole.

    Broadcast plus one unicast from input 1, two unicasts from input 2; all
    rates 1/2, every port fully loaded.  The output assignment is unique up
    to relabeling; we pin the input-1 unicast to output 3.
    """
    return TrafficPattern(
        2,
        3,
        (
            Flow(1, (1, 2, 3), Fraction(1, 2)),
            Flow(1, (3,), Fraction(1, 2)),
            Flow(2, (1,), Fraction(1, 2)),
            Flow(2, (2,), Fraction(1, 2)),
        ),
    )


def relaxed_pattern_2x3() -> TrafficPattern:
    """The 2 x 3 speedup pattern with its broadcast relaxed to the two-output
    multicast {1, 2}.

    This relabeling follows the relaxed example directly: the input-1
    unicast targets output 1, input 2 serves outputs 2 and 3.  Its enhanced
    conflict graph is a tree, hence bipartite and perfect.
    """
    return TrafficPattern(
        2,
        3,
        (
            Flow(1, (1, 2), Fraction(1, 2)),
            Flow(1, (1,), Fraction(1, 2)),
            Flow(2, (2,), Fraction(1, 2)),
            Flow(2, (3,), Fraction(1, 2)),
        ),
    )


def triangle_pattern_2x2() -> TrafficPattern:
    """Broadcast to {1,2} plus the two opposing unicasts, all at rate 1/2.

    Admissible, unachievable without fanout splitting (its flow conflict
    graph is a triangle with total weight 3/2).
    """
    return TrafficPattern(
        2,
        2,
        (
            Flow(1, (1, 2), Fraction(1, 2)),
            Flow(2, (1,), Fraction(1, 2)),
            Flow(2, (2,), Fraction(1, 2)),
        ),
    )


def unicasts_and_broadcast_2xN(N: int, rates: Mapping[str, Fraction] | None = None) -> TrafficPattern:
    """2 x N pattern with N unicasts per input plus a broadcast from input 1.

    This is the 3N-subflow shape whose admissible-region corner points are
    enumerated in `polytope.qstab_corner_points_2xN`.  Rates default to 0;
    callers usually care about the graph, not the loads.
    """
    if N < 3:
        raise PatternFormatError("corner-point analysis needs N >= 3")
    zero = Fraction(0)
    get = (rates or {}).get
    flows = [Flow(1, tuple(range(1, N + 1)), get("b1", zero))]
    flows += [Flow(1, (j,), get(f"u1{j}", zero)) for j in range(1, N + 1)]
    flows += [Flow(2, (j,), get(f"u2{j}", zero)) for j in range(1, N + 1)]
    return TrafficPattern(2, N, tuple(flows))


def full_unicast_broadcast_pattern(K: int, N: int, rate: Fraction = Fraction(0)) -> TrafficPattern:
    """K x N pattern with every unicast and a broadcast from every input."""
    flows = []
    for i in range(1, K + 1):
        flows.append(Flow(i, tuple(range(1, N + 1)), rate))
        flows += [Flow(i, (j,), rate) for j in range(1, N + 1)]
    return TrafficPattern(K, N, tuple(flows))


def composite_pattern(K: int) -> TrafficPattern:
    """The K x 3 mixed workload used in the delay studies, at unit load.

    Scales the 2 x 3 benefit pattern by 2/3 and superposes uniform unicasts
    of rate 1/100 from every input to every output.
    """
    if K < 3:
        raise PatternFormatError("composite pattern is defined for K >= 3")
    uni = Fraction(1, 100)
    flows = [Flow(1, (1, 2, 3), Fraction(4, 9))]
    for i in range(1, K + 1):
        for j in range(1, 4):
            r = uni + (Fraction(2, 9) if i == 2 else 0)
            flows.append(Flow(i, (j,), r))
    return TrafficPattern(K, 3, tuple(flows))


def scale_pattern(tp: TrafficPattern, factor: Fraction) -> TrafficPattern:
    """Uniformly scale every flow rate by an exact factor."""
    factor = rat(factor)
    flows = tuple(Flow(f.input, f.fanout, f.rate * factor) for f in tp.flows)
    return TrafficPattern(tp.num_inputs, tp.num_outputs, flows)


def serialize_pattern(tp: TrafficPattern) -> bytes:
    doc = {
        "K": tp.num_inputs,
        "N": tp.num_outputs,
        "flows": [
            {"input": f.input, "fanout": list(f.fanout), "rate": rat_str(f.rate)}
            for f in tp.flows
        ],
    }
    return (json.dumps(doc, indent=2) + "\n").encode("utf-8")


def pattern_to_dict(tp: TrafficPattern) -> dict:
    return json.loads(serialize_pattern(tp))


def parse_pattern(text: bytes | str) -> TrafficPattern:
    """Parse the JSON pattern document used by the CLI and the service.

    Raises a distinct error type per defect, naming the offending flow.
    A rate above 1 parses fine; admissibility is a separate check.
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise PatternFormatError("pattern document is not valid UTF-8") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PatternFormatError(f"pattern document is not valid JSON: {exc}") from exc
    return pattern_from_dict(doc)


def pattern_from_dict(doc) -> TrafficPattern:
    if not isinstance(doc, dict):
        raise PatternFormatError("pattern document must be a JSON object")
    for field in ("K", "N", "flows"):
        if field not in doc:
            raise PatternFormatError(f"pattern document is missing {field!r}")
    K, N, raw_flows = doc["K"], doc["N"], doc["flows"]
    if not isinstance(K, int) or not isinstance(N, int):
        raise PatternFormatError("K and N must be integers")
    if not isinstance(raw_flows, list):
        raise PatternFormatError("flows must be a list")
    flows = []
    for idx, rf in enumerate(raw_flows):
        if not isinstance(rf, dict) or not {"input", "fanout", "rate"} <= rf.keys():
            raise PatternFormatError(f"flow #{idx} must have input, fanout and rate")
        fanout = rf["fanout"]
        if (
            not isinstance(fanout, list)
            or not fanout
            or not all(isinstance(j, int) for j in fanout)
        ):
            raise InvalidFanoutError(f"flow #{idx} has a malformed fanout {fanout!r}")
        rate = rat(rf["rate"])
        flows.append(Flow(rf["input"], tuple(fanout), rate))
    return TrafficPattern(K, N, tuple(flows))


GENERATORS = {
    "benefit": lambda n: benefit_pattern(n),
    "special": special_rate_point,
    "speedup2x3": lambda n=3: speedup_pattern_2x3(),
    "relaxed2x3": lambda n=3: relaxed_pattern_2x3(),
    "triangle2x2": lambda n=2: triangle_pattern_2x2(),
    "composite": composite_pattern,
}


def generate(name: str, n: int) -> TrafficPattern:
    if name not in GENERATORS:
        raise PatternFormatError(
            f"unknown pattern {name!r}; choose from {sorted(GENERATORS)}"
        )
    return GENERATORS[name](n)
