"""Error-event traces and Monte Carlo estimation of success probability.

A trace is one sequential list of error points in dataflow order.  Gates in a
region expand into one event per physical operation via the gate cost table;
channels (ballistic moves, idling, teleports) become aggregate events, one per
code position.  :func:`mc_run` samples the trace with a deterministic
per-trial random stream and propagates X/Z errors through transversal gates.
"""
from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import kernels as K
from ._jit import HAVE_NUMBA
from .circuit import Circuit, GateKind
from .tech import CODE_SIZE, PhysBundle, TechModel, physical_cost

WILSON_Z = 1.959963984540054
DEFAULT_CHUNK = 2048


class EventKind(enum.Enum):
    GATE = "gate"
    MOVE = "move"
    IDLE = "idle"
    TELEPORT = "teleport-channel"
    BALLISTIC = "ballistic-channel"


_KIND_CODE = {k: i for i, k in enumerate(EventKind)}
_CODE_KIND = list(EventKind)


class Pauli(enum.IntEnum):
    """Which errors an event may apply."""

    ANY = K.R_DEPOL
    X = K.R_X
    Z = K.R_Z


@dataclass(frozen=True)
class ErrorEvent:
    qubit: int
    #: code position 0..6, or -1 when the position is drawn at random
    position: int
    kind: EventKind
    probability: float
    multiplicity: int = 1
    timestamp: float = 0.0
    pauli: Pauli = Pauli.ANY
    #: second block for two-qubit gate events (error lands on one of the two)
    partner: int = -1

    def __post_init__(self):
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError(f"event probability {self.probability} outside [0, 1]")
        if self.multiplicity < 1:
            raise ValueError("multiplicity must be >= 1")


def aggregate(p: float, multiplicity: int) -> float:
    """Probability that at least one of ``multiplicity`` independent ops fails.

    An aggregate event that fires leaves a single error on its position; the
    rarer cancellation of two errors on one position is ignored, which can only
    lower the estimated success probability.
    """
    if multiplicity == 1:
        return p
    return -math.expm1(multiplicity * math.log1p(-p)) if p < 1.0 else 1.0


@dataclass
class ErrorTrace:
    """Compiled trace: rows of (opcode, a, b, c) with per-row metadata."""

    ops: np.ndarray
    probs: np.ndarray
    kinds: np.ndarray  # event kind code, -1 for propagation/check rows
    mult: np.ndarray
    times: np.ndarray
    n_qubits: int

    def __len__(self) -> int:
        return int(self.ops.shape[0])

    @property
    def n_events(self) -> int:
        return int(np.count_nonzero(self.kinds >= 0))

    @property
    def n_corrections(self) -> int:
        return int(np.count_nonzero(self.ops[:, 0] == K.OP_CHECK))

    def expected_faults(self) -> float:
        return float(self.probs[self.kinds >= 0].sum())

    def events(self) -> list[ErrorEvent]:
        out = []
        for (op, a, b, c), p, k, m, t in zip(self.ops, self.probs, self.kinds, self.mult, self.times):
            if k < 0:
                continue
            kind = _CODE_KIND[k]
            if op == K.EV_POS:
                out.append(ErrorEvent(int(a), int(b), kind, float(p), int(m), float(t), Pauli(int(c))))
            elif op == K.EV_PAIR:
                out.append(ErrorEvent(int(a), int(c), kind, float(p), int(m), float(t), Pauli.ANY, int(b)))
            else:
                out.append(ErrorEvent(int(a), -1, kind, float(p), int(m), float(t), Pauli(int(c))))
        return out

    def kind_counts(self) -> dict[str, int]:
        codes, counts = np.unique(self.kinds[self.kinds >= 0], return_counts=True)
        return {_CODE_KIND[c].value: int(n) for c, n in zip(codes, counts)}


class TraceBuilder:
    def __init__(self, n_qubits: int):
        self.n_qubits = n_qubits
        self._rows: list[tuple[int, int, int, int]] = []
        self._p: list[float] = []
        self._k: list[int] = []
        self._m: list[int] = []
        self._t: list[float] = []

    def _row(self, row, p=0.0, kind=-1, mult=1, time=0.0):
        self._rows.append(row)
        self._p.append(p)
        self._k.append(kind)
        self._m.append(mult)
        self._t.append(time)

    # events ---------------------------------------------------------------
    def at(self, q: int, pos: int, p: float, kind=EventKind.GATE, pauli=Pauli.ANY, mult=1, time=0.0):
        if p > 0.0:
            self._row((K.EV_POS, q, pos, int(pauli)), min(1.0, p), _KIND_CODE[kind], mult, time)

    def pair(self, q1: int, q2: int, pos: int, p: float, kind=EventKind.GATE, mult=1, time=0.0):
        if p > 0.0:
            self._row((K.EV_PAIR, q1, q2, pos), min(1.0, p), _KIND_CODE[kind], mult, time)

    def block(self, q: int, p: float, kind=EventKind.GATE, pauli=Pauli.ANY, mult=1, time=0.0):
        if p > 0.0:
            self._row((K.EV_BLOCK, q, -1, int(pauli)), min(1.0, p), _KIND_CODE[kind], mult, time)

    def channel(self, q: int, p: float, kind: EventKind, mult: int = 1, time: float = 0.0):
        """A channel acts on every physical qubit of the block: one event per position."""
        for pos in range(CODE_SIZE):
            self.at(q, pos, p, kind, Pauli.ANY, mult, time)

    # propagation and checks -------------------------------------------------
    def cnot(self, c: int, t: int):
        self._row((K.OP_CNOT, c, t, 0))

    def toffoli(self, a: int, b: int, t: int):
        self._row((K.OP_TOFFOLI, a, b, t))

    def h(self, q: int):
        self._row((K.OP_H, q, 0, 0))

    def s(self, q: int):
        self._row((K.OP_S, q, 0, 0))

    def check(self, q: int, time: float = 0.0):
        self._row((K.OP_CHECK, q, 0, 0), time=time)

    def reset(self, q: int):
        self._row((K.OP_RESET, q, 0, 0))

    def measure(self, q: int, time: float = 0.0):
        self._row((K.OP_MEASURE, q, 0, 0), time=time)

    def build(self) -> ErrorTrace:
        n = len(self._rows)
        ops = np.array(self._rows, dtype=np.int64).reshape(n, 4)
        return ErrorTrace(
            ops,
            np.array(self._p, dtype=np.float64),
            np.array(self._k, dtype=np.int8),
            np.array(self._m, dtype=np.int64),
            np.array(self._t, dtype=np.float64),
            self.n_qubits,
        )


def bundle_events(b: PhysBundle) -> int:
    """Error events one logical operation contributes: its data-block ops plus consumed ancillas."""
    return b.data_ops + b.zero_blocks + b.t_blocks


_MEAS_PAULI = {GateKind.MEASURE: Pauli.X, GateKind.T: Pauli.Z, GateKind.TOFFOLI: Pauli.Z}
_PAIRS = {GateKind.CNOT: ((0, 1),), GateKind.TOFFOLI: ((0, 2), (1, 2), (0, 1))}


def expand_gate(
    tb: TraceBuilder,
    kind: GateKind,
    operands: tuple[int, ...],
    tech: TechModel,
    zero_infidelity: float,
    t_infidelity: float,
    time: float = 0.0,
    inverse: bool = False,
):
    """Append one logical gate: its propagation row, then one event per physical op."""
    es = tech.errors
    b = physical_cost(kind, tech.costs, inverse)
    ops = operands
    if kind is GateKind.CNOT:
        tb.cnot(*ops)
    elif kind is GateKind.TOFFOLI:
        tb.toffoli(*ops)
    elif kind is GateKind.H:
        tb.h(ops[0])
    elif kind is GateKind.S:
        tb.s(ops[0])
    elif kind is GateKind.PREPZ:
        tb.reset(ops[0])

    def cyc(i):  # operand and position for the i-th op of a bundle
        return ops[(i // CODE_SIZE) % len(ops)], i % CODE_SIZE

    pairs = _PAIRS.get(kind)
    for i in range(b.two_q):
        if pairs:
            x, y = pairs[(i // CODE_SIZE) % len(pairs)]
            tb.pair(ops[x], ops[y], i % CODE_SIZE, es.p_2q, time=time)
        else:
            tb.at(*cyc(i), es.p_2q, time=time)
    for i in range(b.one_q):
        tb.at(*cyc(i), es.p_1q, time=time)
    for i in range(b.meas):
        if kind is GateKind.CORRECT:
            pauli = Pauli.X if i < b.meas // 2 else Pauli.Z
        else:
            pauli = _MEAS_PAULI.get(kind, Pauli.ANY)
        tb.at(*cyc(i), es.p_meas, pauli=pauli, time=time)
    for i in range(b.prep):
        tb.at(*cyc(i), es.p_prep, pauli=Pauli.X, time=time)
    for i in range(b.zero_blocks):
        tb.block(ops[i % len(ops)], zero_infidelity, time=time)
    for i in range(b.t_blocks):
        tb.block(ops[i % len(ops)], t_infidelity, time=time)
    if kind is GateKind.CORRECT:
        tb.check(ops[0], time)
    elif kind is GateKind.MEASURE:
        tb.measure(ops[0], time)


def gate_trace(
    c: Circuit,
    tech: TechModel | None = None,
    zero_infidelity: float | None = None,
    t_infidelity: float | None = None,
) -> ErrorTrace:
    """Trace of gate errors only (no movement or idling), in stored gate order.

    Correct gates in ``c`` become noisy corrections that close a window.
    Ancilla infidelities default to the pipelined factory of ``tech``.
    """
    from .tech import FactoryKind

    tech = tech or TechModel()
    if zero_infidelity is None:
        zero_infidelity = tech.factory(FactoryKind.QALYPSO_PIPELINED).infidelity
    if t_infidelity is None:
        t_infidelity = tech.factory(FactoryKind.QALYPSO_PIPELINED, t_ancilla=True).infidelity
    tb = TraceBuilder(c.n_qubits)
    for g in c.gates:
        expand_gate(tb, g.kind, g.operands, tech, zero_infidelity, t_infidelity, inverse=g.inverse)
    return tb.build()


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass(frozen=True)
class McResult:
    p_success: float
    ci_low: float
    ci_high: float
    trials: int
    successes: int
    seed: int

    def as_dict(self) -> dict:
        return {
            "p_success": self.p_success,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "trials": self.trials,
            "successes": self.successes,
            "seed": self.seed,
        }


def wilson_interval(successes: int, trials: int, z: float = WILSON_Z) -> tuple[float, float]:
    if trials <= 0:
        return 0.0, 1.0
    p = successes / trials
    denom = 1.0 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == trials else min(1.0, centre + half)
    return lo, hi


def _chunks(trials: int, chunk: int) -> list[tuple[int, int]]:
    return [(s, min(chunk, trials - s)) for s in range(0, trials, chunk)]


def mc_run(
    trace: ErrorTrace,
    trials: int,
    seed: int = 0,
    workers: int = 1,
    chunk: int = DEFAULT_CHUNK,
    backend: str | None = None,
) -> McResult:
    """Estimate the success probability of ``trace``.

    Trial ``i`` draws from a xoshiro256** stream keyed by ``(seed, i)``, so the
    success count does not depend on ``workers``, ``chunk`` or the backend.
    ``backend`` is "numba" or "numpy" (default: numba when available).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    if backend is None:
        backend = "numba" if HAVE_NUMBA else "numpy"
    if backend not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not HAVE_NUMBA:
        raise ValueError("numba backend requested but numba is unavailable or disabled")
    fn = K.mc_trials if backend == "numba" else K.mc_trials_numpy
    if len(trace) == 0:
        lo, hi = wilson_interval(trials, trials)
        return McResult(1.0, lo, hi, trials, trials, seed)

    def job(span):
        return int(fn(trace.ops, trace.probs, trace.n_qubits, np.uint64(seed), span[0], span[1]))

    spans = _chunks(trials, chunk)
    if workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            wins = sum(ex.map(job, spans))
    else:
        wins = sum(job(s) for s in spans)
    lo, hi = wilson_interval(wins, trials)
    return McResult(wins / trials, lo, hi, trials, wins, seed)


def default_workers() -> int:
    return max(1, min(8, os.cpu_count() or 1))


# ---------------------------------------------------------------------------
# traces from mapped schedules


def build_error_trace(s, tech: TechModel | None = None) -> ErrorTrace:
    """Dataflow-ordered trace of a mapped schedule.

    Gates expand exactly through the cost table.  Before each gate, every
    operand gets one aggregate channel per code position covering its idle
    time since its last activity plus the shuttle to the gate location.
    Teleports become per-position events with the purified-EPR failure
    probability; idle memory residency is cut by the scheduled memory
    corrections.  A final idle stretch runs to the end of the schedule.
    """
    from .tech import channel_errors

    tech = tech or TechModel()
    es = tech.errors
    L = s.layout
    c = s.circuit
    zero_inf = L.zero_factory.infidelity
    t_inf = L.t_factory.infidelity if L.t_factory is not None else zero_inf
    slots = L.config.Dq
    straights, turns = tech.shuttle(slots)
    tb = TraceBuilder(c.n_qubits)
    actions = []
    for g in c.gates:
        rec = s.gates[g.id]
        actions.append((rec.start + rec.stall, 2, g.id, "gate"))
    for i, mv in enumerate(s.moves):
        actions.append((mv.depart, 1, i, "move"))
    for i, (q, r, tm) in enumerate(s.memory_corrections):
        actions.append((tm, 0, i, "memec"))
    actions.sort()
    last = [0.0] * c.n_qubits

    def idle(q: int, until: float, shuttle: bool):
        gap = max(0.0, until - last[q])
        if shuttle:
            ev = channel_errors(straights, turns, gap, es)
            tb.channel(q, ev.probability, EventKind.MOVE, time=until)
        elif gap >= 1.0:
            ev = channel_errors(0, 0, gap, es)
            tb.channel(q, ev.probability, EventKind.IDLE, mult=math.ceil(gap), time=until)

    for tm, _, idx, what in actions:
        if what == "gate":
            g = c.gates[idx]
            rec = s.gates[idx]
            for q in g.operands:
                idle(q, tm, shuttle=True)
            expand_gate(tb, g.kind, g.operands, tech, zero_inf, t_inf, tm, g.inverse)
            for q in g.operands:
                last[q] = rec.end
        elif what == "move":
            mv = s.moves[idx]
            idle(mv.qubit, tm, shuttle=False)
            p = tech.teleport_error(max(1, mv.hops))
            tb.channel(mv.qubit, p, EventKind.TELEPORT, time=tm)
            last[mv.qubit] = mv.arrive
        else:
            q, r, _ = s.memory_corrections[idx]
            idle(q, tm, shuttle=False)
            expand_gate(tb, GateKind.CORRECT, (q,), tech, zero_inf, t_inf, tm)
            last[q] = max(last[q], tm)
    end = s.makespan
    for q in range(c.n_qubits):
        idle(q, end, shuttle=False)
    return tb.build()
