"""Ion-trap technology model.

Physical error rates and latencies, logical-to-physical expansion counts for a
single level of the Steane [[7,1,3]] code, ancilla factories, routers and EPR
purification, and macroblock geometry.  All constants can be overridden from a
JSON technology file (see :func:`load_tech`).
"""
from __future__ import annotations

import dataclasses
import enum
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .circuit import GateKind

CODE_SIZE = 7  # physical qubits per logical qubit
TECH_ENV = "QCAD_TECH_FILE"


@dataclass(frozen=True)
class ErrorSet:
    """Failure probability per physical operation and its latency in µs.

    ``p_idle`` is a rate per µs; moves are per straight macroblock segment.
    """

    name: str
    p_1q: float
    p_2q: float
    p_meas: float
    p_prep: float
    p_move: float
    p_turn: float
    p_idle: float
    t_1q: float = 1.0
    t_2q: float = 10.0
    t_meas: float = 50.0
    t_prep: float = 51.0
    t_move: float = 1.0
    t_turn: float = 10.0

    def __post_init__(self):
        for f in ("p_1q", "p_2q", "p_meas", "p_prep", "p_move", "p_turn", "p_idle"):
            v = getattr(self, f)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{f}={v} is not a probability")
        for f in ("t_1q", "t_2q", "t_meas", "t_prep", "t_move", "t_turn"):
            if getattr(self, f) <= 0:
                raise ValueError(f"{f} must be positive")


ERROR_SET_1 = ErrorSet("1", 1e-6, 1e-6, 1e-6, 1e-6, 1e-8, 1e-8, 1e-10)
ERROR_SET_2 = ErrorSet("2", 1e-4, 1e-4, 1e-4, 1e-4, 1e-6, 1e-6, 1e-8)
ERROR_SETS = {"1": ERROR_SET_1, "2": ERROR_SET_2}


def error_set(name: str | int) -> ErrorSet:
    try:
        return ERROR_SETS[str(name)]
    except KeyError:
        raise ValueError(f"unknown error set {name!r}; choose 1 or 2") from None


class PhysOp(enum.Enum):
    ONE_Q = "one_q"
    TWO_Q = "two_q"
    MEAS = "meas"
    PREP = "prep"


@dataclass(frozen=True)
class PhysBundle:
    """Physical operation counts for one logical operation.

    ``zero_blocks``/``t_blocks`` are encoded ancilla blocks consumed, and
    ``factory_ops`` the physical operations spent inside factories making them.
    """

    one_q: int = 0
    two_q: int = 0
    meas: int = 0
    prep: int = 0
    zero_blocks: int = 0
    t_blocks: int = 0
    factory_ops: int = 0

    def __post_init__(self):
        if min(dataclasses.astuple(self)) < 0:
            raise ValueError("bundle counts must be non-negative")

    @property
    def data_ops(self) -> int:
        """Operations touching the data block (each is an error event)."""
        return self.one_q + self.two_q + self.meas + self.prep

    @property
    def total(self) -> int:
        return self.data_ops + self.factory_ops

    def pairs(self) -> list[tuple[PhysOp, int]]:
        return [
            (PhysOp.ONE_Q, self.one_q),
            (PhysOp.TWO_Q, self.two_q),
            (PhysOp.MEAS, self.meas),
            (PhysOp.PREP, self.prep),
        ]

    def __add__(self, other: "PhysBundle") -> "PhysBundle":
        return PhysBundle(*(a + b for a, b in zip(dataclasses.astuple(self), dataclasses.astuple(other))))

    def scaled(self, k: int) -> "PhysBundle":
        return PhysBundle(*(k * a for a in dataclasses.astuple(self)))


def _default_bundles() -> dict[str, PhysBundle]:
    n = CODE_SIZE
    t_gate = PhysBundle(one_q=n, two_q=n, meas=n, t_blocks=1)
    return {
        "x": PhysBundle(one_q=n),
        "z": PhysBundle(one_q=n),
        "h": PhysBundle(one_q=n),
        "s": PhysBundle(one_q=n),
        "t": t_gate,
        "cnot": PhysBundle(two_q=n),
        # 6 CNOT + 2 H + 7 T of the Clifford+T network
        "toffoli": PhysBundle(two_q=6 * n).__add__(PhysBundle(one_q=2 * n)).__add__(t_gate.scaled(7)),
        "prepz": PhysBundle(one_q=3, two_q=9, prep=n),
        "measure": PhysBundle(meas=n),
    }


@dataclass(frozen=True)
class GateCostTable:
    """Logical-to-physical expansion.

    The correction bundle extracts X and Z syndromes with one encoded zero
    block each: 2x7 transversal CNOTs and 2x7 ancilla measurements, plus the
    factory work for the two blocks.  ``zero_block_ops`` is sized so that a
    correction totals 3032 physical operations.
    """

    bundles: Mapping[str, PhysBundle] = field(default_factory=_default_bundles)
    zero_block_ops: int = 1502
    t_block_ops: int = 1600
    correction_two_q: int = 2 * CODE_SIZE
    correction_meas: int = 2 * CODE_SIZE
    teleport: PhysBundle = PhysBundle(one_q=CODE_SIZE, two_q=CODE_SIZE, meas=2 * CODE_SIZE)

    @property
    def correction(self) -> PhysBundle:
        return PhysBundle(
            two_q=self.correction_two_q,
            meas=self.correction_meas,
            zero_blocks=2,
            factory_ops=2 * self.zero_block_ops,
        )


def physical_cost(kind: GateKind, table: GateCostTable, inverse: bool = False) -> PhysBundle:
    """Physical bundle for one logical gate (T-ancilla factory work included)."""
    if kind is GateKind.CORRECT:
        return table.correction
    b = table.bundles[kind.value]
    if b.t_blocks:
        b = dataclasses.replace(b, factory_ops=b.factory_ops + b.t_blocks * table.t_block_ops)
    return b


class FactoryKind(enum.Enum):
    QLA_BASIC = "qla-basic"
    LQLA_OPTIMIZED = "lqla-optimized"
    QALYPSO_PIPELINED = "qalypso-pipelined"


@dataclass(frozen=True)
class AncillaFactory:
    kind: FactoryKind
    area_mb: float
    latency_us: float
    throughput_per_us: float
    infidelity: float

    def __post_init__(self):
        if self.area_mb <= 0:
            raise ValueError("factory area must be positive")
        if self.throughput_per_us < 1.0 / self.latency_us - 1e-15:
            raise ValueError("throughput must be at least one block per latency")


@dataclass(frozen=True)
class FactoryParams:
    """Defaults in units of a gate-time (the zero-prepare latency)."""

    basic_area_mb: float = 49.0
    basic_latency_gate_times: float = 6.0
    basic_infidelity_factor: float = 10.0
    lqla_latency_factor: float = 0.75
    lqla_infidelity_factor: float = 0.5
    pipelined_copies: int = 3
    pipelined_infidelity_factor: float = 0.3
    # T-ancilla factories: area and latency multiples of the zero factory
    t_area_factor: float = 1.5
    t_latency_factor: float = 2.0


def make_factory(kind: FactoryKind, es: ErrorSet, fp: FactoryParams, t_ancilla: bool = False) -> AncillaFactory:
    gate_time = es.t_prep
    area = fp.basic_area_mb
    latency = fp.basic_latency_gate_times * gate_time
    infid = fp.basic_infidelity_factor * es.p_2q
    throughput = 1.0 / latency
    if kind is FactoryKind.LQLA_OPTIMIZED:
        latency *= fp.lqla_latency_factor
        infid *= fp.lqla_infidelity_factor
        throughput = 1.0 / latency
    elif kind is FactoryKind.QALYPSO_PIPELINED:
        area *= fp.pipelined_copies
        infid *= fp.pipelined_infidelity_factor
        throughput = 1.0 / gate_time
    if t_ancilla:
        area *= fp.t_area_factor
        latency *= fp.t_latency_factor
        # extra stages deepen a pipeline without slowing its issue rate
        if kind is not FactoryKind.QALYPSO_PIPELINED:
            throughput /= fp.t_latency_factor
    return AncillaFactory(kind, area, latency, throughput, min(1.0, infid))


@dataclass(frozen=True)
class RouterModel:
    base_mb: float = 36.0
    per_load_mb: float = 9.0
    fixed_capacity: int = 2
    purification_rounds: int = 1
    #: raw EPR fidelity; ``None`` derives it from the error set (prep, H, CNOT)
    epr_base_fidelity: float | None = None
    #: link length between neighbouring routers, in straight macroblocks
    hop_straights: int = 12
    hop_turns: int = 1

    def __post_init__(self):
        if self.base_mb <= 0 or self.per_load_mb < 0:
            raise ValueError("router areas must be positive")
        if self.purification_rounds < 0:
            raise ValueError("purification rounds must be non-negative")

    def area(self, load: int) -> float:
        return self.base_mb + self.per_load_mb * max(0, load)


@dataclass(frozen=True)
class Geometry:
    """Macroblock geometry.  One macroblock is ``pitch_um`` on a side."""

    pitch_um: float = 90.0
    data_slot_mb: float = 9.0
    memory_slot_mb: float = 9.0
    #: inter-region channel area charged per grid link, in macroblocks
    channel_mb: float = 12.0
    #: extra straights per shuttle to a gate location beyond the region side
    shuttle_extra: int = 2
    shuttle_turns: int = 2
    #: published QLA element area (2 slots, 2 basic factories, fixed router)
    qla_element_mb: float = 9.0 * 2 + 49.0 * 2 + 36.0 + 9.0 * 2

    @property
    def mm2_per_mb(self) -> float:
        return (self.pitch_um * 1e-3) ** 2

    def mm2(self, mb: float) -> float:
        return mb * self.mm2_per_mb


@dataclass(frozen=True)
class TechModel:
    """Everything the flow needs to know about the substrate."""

    errors: ErrorSet = ERROR_SET_1
    costs: GateCostTable = field(default_factory=GateCostTable)
    factories: FactoryParams = field(default_factory=FactoryParams)
    router: RouterModel = field(default_factory=RouterModel)
    geometry: Geometry = field(default_factory=Geometry)
    #: syndrome decode plus correction application after the last measurement
    decode_us: float = 10.0
    #: move idle qubits to memory after this many average gate latencies
    relocation_factor: float = 4.0

    def with_errors(self, es: ErrorSet | str | int) -> "TechModel":
        es = es if isinstance(es, ErrorSet) else error_set(es)
        return dataclasses.replace(self, errors=es)

    def factory(self, kind: FactoryKind, t_ancilla: bool = False) -> AncillaFactory:
        return make_factory(kind, self.errors, self.factories, t_ancilla)

    # latencies -----------------------------------------------------------
    def shuttle(self, slots: int) -> tuple[int, int]:
        """Straights and turns to bring a block to a gate location in a region."""
        side = math.ceil(math.sqrt(max(1, slots)))
        return side + self.geometry.shuttle_extra, self.geometry.shuttle_turns

    def shuttle_us(self, slots: int) -> float:
        s, t = self.shuttle(slots)
        return s * self.errors.t_move + t * self.errors.t_turn

    def gate_latency(self, kind: GateKind) -> float:
        """Latency of the physical operations of one logical gate (no movement)."""
        e = self.errors
        if kind in (GateKind.X, GateKind.Z, GateKind.H, GateKind.S):
            return e.t_1q
        if kind is GateKind.T:
            return e.t_2q + e.t_meas + e.t_1q
        if kind is GateKind.CNOT:
            return e.t_2q
        if kind is GateKind.TOFFOLI:
            return toffoli_latency(self)
        if kind is GateKind.PREPZ:
            return e.t_prep + 3 * e.t_2q
        if kind is GateKind.MEASURE:
            return e.t_meas
        if kind is GateKind.CORRECT:
            return self.correction_latency()
        raise ValueError(kind)

    def correction_latency(self) -> float:
        """Bit-flip then phase-flip syndrome half-steps, each a transversal CNOT
        plus ancilla readout, then decode and the Pauli fix-up."""
        e = self.errors
        return 2 * (e.t_2q + e.t_meas) + self.decode_us + e.t_1q

    def teleport_latency(self) -> float:
        """Data-visible part of a teleport: Bell measurement plus Pauli fix-up."""
        e = self.errors
        return e.t_2q + e.t_1q + e.t_meas + e.t_1q

    def epr_latency(self) -> float:
        """Generating, distributing and purifying one EPR pair over a hop."""
        e = self.errors
        r = self.router
        dist = r.hop_straights * e.t_move + r.hop_turns * e.t_turn
        one = e.t_prep + e.t_1q + e.t_2q + dist
        return one * (1 + r.purification_rounds) + r.purification_rounds * (e.t_2q + e.t_meas)

    # EPR fidelity --------------------------------------------------------
    def epr_raw_fidelity(self, hops: int) -> float:
        """Fidelity of an end-to-end pair over ``hops`` router links before purification."""
        e = self.errors
        r = self.router
        if r.epr_base_fidelity is not None:
            base = r.epr_base_fidelity
        else:
            base = 1.0 - (2 * e.p_prep + e.p_1q + e.p_2q)
        link = base * (1.0 - channel_errors(r.hop_straights, r.hop_turns, 0.0, e).probability)
        # entanglement swapping of Werner pairs composes the depolarized parts
        w = (4.0 * link - 1.0) / 3.0
        return 0.25 + 0.75 * w ** max(1, hops)

    def teleport_error(self, hops: int) -> float:
        """Per-code-position failure probability of one logical teleport."""
        e = self.errors
        f = purify(self.epr_raw_fidelity(hops), self.router.purification_rounds)
        tb = self.costs.teleport
        bundle = (tb.one_q * e.p_1q + tb.two_q * e.p_2q + tb.meas * e.p_meas + tb.prep * e.p_prep) / CODE_SIZE
        return min(1.0, (1.0 - f) + bundle)


def toffoli_latency(tech: TechModel) -> float:
    """Critical path of the Clifford+T Toffoli network (operands co-located)."""
    from .circuit import toffoli_network

    ready = [0.0, 0.0, 0.0]
    for kind, ops, _ in toffoli_network(0, 1, 2):
        start = max(ready[q] for q in ops)
        end = start + tech.gate_latency(kind)
        for q in ops:
            ready[q] = end
    return max(ready)


def purify(fidelity: float, rounds: int) -> float:
    """Iterate F <- F^2 / (F^2 + (1-F)^2) ``rounds`` times."""
    if not 0.5 < fidelity <= 1.0:
        raise ValueError(f"purification needs 0.5 < F <= 1, got {fidelity}")
    if rounds < 0:
        raise ValueError("rounds must be non-negative")
    f = fidelity
    for _ in range(rounds):
        f = f * f / (f * f + (1.0 - f) * (1.0 - f))
    return f


@dataclass(frozen=True)
class ChannelEvent:
    probability: float
    latency_us: float


def channel_errors(straights: int, turns: int, idle_us: float, es: ErrorSet) -> ChannelEvent:
    """Aggregate failure probability and latency of a ballistic channel."""
    if straights < 0 or turns < 0 or idle_us < 0:
        raise ValueError("channel counts must be non-negative")
    log_ok = (
        straights * math.log1p(-es.p_move)
        + turns * math.log1p(-es.p_turn)
        + math.ceil(idle_us) * math.log1p(-es.p_idle)
    )
    return ChannelEvent(-math.expm1(log_ok), straights * es.t_move + turns * es.t_turn)


# ---------------------------------------------------------------------------
# technology files


def _override(obj, data: Mapping[str, Any], where: str):
    if not isinstance(data, Mapping):
        raise ValueError(f"{where}: expected a table of overrides")
    names = {f.name: f for f in dataclasses.fields(obj)}
    changes = {}
    for key, val in data.items():
        if key not in names:
            raise ValueError(f"{where}: unknown key {key!r}")
        cur = getattr(obj, key)
        if dataclasses.is_dataclass(cur):
            changes[key] = _override(cur, val, f"{where}.{key}")
        elif key == "bundles":
            merged = dict(cur)
            for k, v in val.items():
                merged[k] = PhysBundle(**v)
            changes[key] = merged
        else:
            changes[key] = val
    return dataclasses.replace(obj, **changes)


def load_tech(path: str | os.PathLike | None = None, base: TechModel | None = None) -> TechModel:
    """Technology model with overrides from a JSON file.

    Without ``path`` the ``QCAD_TECH_FILE`` environment variable is consulted.
    The file mirrors the dataclass nesting, for example::

        {"errors": {"p_2q": 1e-5}, "router": {"purification_rounds": 2},
         "error_set": 2}

    ``error_set`` selects a default set before field overrides apply.
    """
    tech = base or TechModel()
    if path is None:
        path = os.environ.get(TECH_ENV) or None
    if path is None:
        return tech
    data = json.loads(Path(path).read_text())
    if "error_set" in data:
        data = dict(data)
        tech = tech.with_errors(data.pop("error_set"))
    return _override(tech, data, Path(path).name)


def tech_to_dict(tech: TechModel) -> dict:
    """JSON-serializable view (used for manifests and hashing)."""

    def conv(v):
        if dataclasses.is_dataclass(v):
            return {f.name: conv(getattr(v, f.name)) for f in dataclasses.fields(v)}
        if isinstance(v, Mapping):
            return {k: conv(x) for k, x in sorted(v.items())}
        if isinstance(v, enum.Enum):
            return v.value
        return v

    return conv(tech)
