"""Logical circuit IR: qubits, gates, hierarchical modules and flattening."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence


class CircuitError(ValueError):
    """Structural problem with a circuit (bad operand, arity, recursion...)."""


class QubitKind(enum.Enum):
    DATA = "data"
    ZERO_ANCILLA = "zero-ancilla"
    T_ANCILLA = "t-ancilla"


class GateKind(enum.Enum):
    X = "x"
    Z = "z"
    H = "h"
    S = "s"
    T = "t"
    CNOT = "cnot"
    TOFFOLI = "toffoli"
    PREPZ = "prepz"
    MEASURE = "measure"
    CORRECT = "correct"

    @property
    def arity(self) -> int:
        return _ARITY[self]

    @property
    def classical(self) -> bool:
        """True for gates that map basis states to basis states."""
        return self in (GateKind.X, GateKind.CNOT, GateKind.TOFFOLI)


_ARITY = {k: 1 for k in GateKind}
_ARITY[GateKind.CNOT] = 2
_ARITY[GateKind.TOFFOLI] = 3


@dataclass(frozen=True)
class Qubit:
    id: int
    kind: QubitKind = QubitKind.DATA
    name: str | None = None

    @property
    def label(self) -> str:
        return self.name if self.name is not None else f"q{self.id}"


@dataclass(frozen=True)
class Gate:
    id: int
    kind: GateKind
    operands: tuple[int, ...]
    inverse: bool = False
    tag: str | None = None

    def __post_init__(self):
        if len(self.operands) != self.kind.arity:
            raise CircuitError(
                f"gate {self.id}: {self.kind.value} takes {self.kind.arity} operand(s), got {len(self.operands)}"
            )
        if len(set(self.operands)) != len(self.operands):
            raise CircuitError(f"gate {self.id}: repeated operand in {self.operands}")
        if self.inverse and self.kind is not GateKind.T:
            raise CircuitError(f"gate {self.id}: only T carries an inverse flag")

    @property
    def mnemonic(self) -> str:
        return "tdag" if self.inverse else self.kind.value


@dataclass(frozen=True)
class GateStmt:
    """Gate statement inside a module body or the top-level body; args are names."""

    kind: GateKind
    args: tuple[str, ...]
    inverse: bool = False


@dataclass(frozen=True)
class InstStmt:
    module: str
    args: tuple[str, ...]


Stmt = GateStmt | InstStmt


@dataclass(frozen=True)
class ModuleDef:
    name: str
    ports: tuple[str, ...]
    body: tuple[Stmt, ...]


@dataclass(frozen=True)
class Circuit:
    """Immutable logical circuit.

    ``gates`` is the flat gate list in stored topological order; gate ids equal
    list positions.  Circuits parsed from hierarchical netlists additionally keep
    ``modules`` and the top-level ``body`` so they can be re-emitted as written.
    """

    qubits: tuple[Qubit, ...]
    gates: tuple[Gate, ...]
    modules: tuple[ModuleDef, ...] = ()
    body: tuple[Stmt, ...] | None = None
    _by_label: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        for i, q in enumerate(self.qubits):
            if q.id != i:
                raise CircuitError(f"qubit ids must be dense: position {i} holds id {q.id}")
        n = len(self.qubits)
        for i, g in enumerate(self.gates):
            if g.id != i:
                raise CircuitError(f"gate ids must be dense: position {i} holds id {g.id}")
            for q in g.operands:
                if not 0 <= q < n:
                    raise CircuitError(f"gate {g.id} references unknown qubit {q}")

    # construction helpers -------------------------------------------------
    @classmethod
    def from_ops(
        cls,
        n_qubits: int | Sequence[Qubit],
        ops: Iterable[tuple],
        tags: Iterable[str | None] | None = None,
    ) -> "Circuit":
        """Build a flat circuit from ``(kind, operands[, inverse])`` tuples.

        ``kind`` may be a :class:`GateKind` or a netlist mnemonic such as ``"tdag"``.
        """
        if isinstance(n_qubits, int):
            qubits = tuple(Qubit(i, name=f"q{i}") for i in range(n_qubits))
        else:
            qubits = tuple(n_qubits)
        tag_iter = iter(tags) if tags is not None else None
        gates = []
        for i, op in enumerate(ops):
            kind, operands = op[0], op[1]
            inverse = bool(op[2]) if len(op) > 2 else False
            if isinstance(kind, str):
                kind, inv = parse_kind(kind)
                inverse = inverse or inv
            tag = next(tag_iter) if tag_iter is not None else None
            gates.append(Gate(i, kind, tuple(int(q) for q in operands), inverse, tag))
        return cls(qubits, tuple(gates))

    def with_gates(self, gates: Iterable[Gate]) -> "Circuit":
        """Flat copy with a new gate list; ids are renumbered densely."""
        out = []
        for i, g in enumerate(gates):
            out.append(g if g.id == i else Gate(i, g.kind, g.operands, g.inverse, g.tag))
        return Circuit(self.qubits, tuple(out))

    # queries ---------------------------------------------------------------
    @property
    def n_qubits(self) -> int:
        return len(self.qubits)

    @property
    def n_gates(self) -> int:
        return len(self.gates)

    @property
    def is_flat(self) -> bool:
        return self.body is None

    def qubit_by_label(self, label: str) -> Qubit:
        if self._by_label is None:
            object.__setattr__(self, "_by_label", {q.label: q for q in self.qubits})
        return self._by_label[label]

    def count(self, kind: GateKind) -> int:
        return sum(1 for g in self.gates if g.kind is kind)

    def kind_counts(self) -> dict[GateKind, int]:
        out = {k: 0 for k in GateKind}
        for g in self.gates:
            out[g.kind] += 1
        return out

    def arity_sum(self) -> int:
        return sum(len(g.operands) for g in self.gates)


_MNEMONICS = {k.value: (k, False) for k in GateKind}
_MNEMONICS["tdag"] = (GateKind.T, True)


def parse_kind(word: str) -> tuple[GateKind, bool]:
    """Map a lowercase netlist mnemonic to ``(kind, inverse)``."""
    try:
        return _MNEMONICS[word]
    except KeyError:
        raise CircuitError(f"unknown gate kind {word!r}") from None


def gate_mnemonics() -> tuple[str, ...]:
    return tuple(_MNEMONICS)


def expand_body(
    body: Sequence[Stmt],
    modules: dict[str, ModuleDef],
    bind: dict[str, int],
    prefix: str | None = None,
    stack: tuple[str, ...] = (),
) -> list[tuple[GateKind, tuple[int, ...], bool, str | None]]:
    """Depth-first expansion of a statement list into flat gate tuples.

    Instances are numbered by their statement position inside the parent body,
    so provenance tags such as ``adder#0/maj#3`` are stable under re-parsing.
    """
    out: list[tuple[GateKind, tuple[int, ...], bool, str | None]] = []
    for pos, st in enumerate(body):
        if isinstance(st, GateStmt):
            out.append((st.kind, tuple(bind[a] for a in st.args), st.inverse, prefix))
            continue
        if st.module in stack:
            raise CircuitError("recursive module instantiation: " + " -> ".join(stack + (st.module,)))
        mod = modules.get(st.module)
        if mod is None:
            raise CircuitError(f"unknown module {st.module!r}")
        if len(st.args) != len(mod.ports):
            raise CircuitError(
                f"module {mod.name} has {len(mod.ports)} port(s), instance passes {len(st.args)}"
            )
        inner = {p: bind[a] for p, a in zip(mod.ports, st.args)}
        if len(set(inner.values())) != len(inner):
            raise CircuitError(f"instance of {mod.name} binds one qubit to several ports")
        tag = f"{st.module}#{pos}" if prefix is None else f"{prefix}/{st.module}#{pos}"
        out.extend(expand_body(mod.body, modules, inner, tag, stack + (st.module,)))
    return out


def build_hierarchical(
    qubits: Sequence[Qubit], modules: Sequence[ModuleDef], body: Sequence[Stmt]
) -> Circuit:
    """Circuit whose flat gate list is the expansion of ``body``."""
    mods = {m.name: m for m in modules}
    bind = {q.label: q.id for q in qubits}
    gates = tuple(
        Gate(i, kind, ops, inv, tag)
        for i, (kind, ops, inv, tag) in enumerate(expand_body(body, mods, bind))
    )
    return Circuit(tuple(qubits), gates, tuple(modules), tuple(body))


def flatten(c: Circuit) -> Circuit:
    """Module-free copy of ``c``; provenance tags are kept on the gates."""
    if c.is_flat and not c.modules:
        return c
    return Circuit(c.qubits, c.gates)


# Standard Clifford+T network for a Toffoli with controls a, b and target t.
# 6 CNOT, 2 H, 7 T/T-dagger.
_TOFFOLI_NET: tuple[tuple[GateKind, tuple[int, ...], bool], ...] = (
    (GateKind.H, (2,), False),
    (GateKind.CNOT, (1, 2), False),
    (GateKind.T, (2,), True),
    (GateKind.CNOT, (0, 2), False),
    (GateKind.T, (2,), False),
    (GateKind.CNOT, (1, 2), False),
    (GateKind.T, (2,), True),
    (GateKind.CNOT, (0, 2), False),
    (GateKind.T, (1,), False),
    (GateKind.T, (2,), False),
    (GateKind.H, (2,), False),
    (GateKind.CNOT, (0, 1), False),
    (GateKind.T, (0,), False),
    (GateKind.T, (1,), True),
    (GateKind.CNOT, (0, 1), False),
)

TOFFOLI_DECOMPOSITION_SIZE = len(_TOFFOLI_NET)


def toffoli_network(a: int, b: int, t: int) -> list[tuple[GateKind, tuple[int, ...], bool]]:
    """The 15-gate Clifford+T network for ``toffoli a,b,t``."""
    m = (a, b, t)
    return [(k, tuple(m[i] for i in ops), inv) for k, ops, inv in _TOFFOLI_NET]


def decompose_toffoli(c: Circuit) -> Circuit:
    """Replace every Toffoli by its 15-gate Clifford+T network.

    The result is flat; expanded gates inherit the Toffoli's tag.
    """
    if not any(g.kind is GateKind.TOFFOLI for g in c.gates):
        return c
    gates: list[Gate] = []
    for g in c.gates:
        if g.kind is GateKind.TOFFOLI:
            for kind, ops, inv in toffoli_network(*g.operands):
                gates.append(Gate(len(gates), kind, ops, inv, g.tag))
        else:
            gates.append(Gate(len(gates), g.kind, g.operands, g.inverse, g.tag))
    return Circuit(c.qubits, tuple(gates))


def structurally_equal(a: Circuit, b: Circuit) -> bool:
    """Equality of qubits, gate sequence and hierarchy, ignoring provenance tags."""
    if len(a.qubits) != len(b.qubits) or len(a.gates) != len(b.gates):
        return False
    for qa, qb in zip(a.qubits, b.qubits):
        if qa.kind is not qb.kind or qa.label != qb.label:
            return False
    for ga, gb in zip(a.gates, b.gates):
        if ga.kind is not gb.kind or ga.operands != gb.operands or ga.inverse != gb.inverse:
            return False
    return a.modules == b.modules and a.body == b.body
