"""Hypothesis strategies shared by the test modules."""
from hypothesis import strategies as st

from qcad.circuit import Circuit, GateKind

ONE_QUBIT = [GateKind.X, GateKind.Z, GateKind.H, GateKind.S, GateKind.T]


@st.composite
def circuits(draw, max_qubits=6, max_gates=12, toffoli=True, min_qubits=1):
    n = draw(st.integers(min_qubits, max_qubits))
    kinds = list(ONE_QUBIT)
    if n >= 2:
        kinds.append(GateKind.CNOT)
    if n >= 3 and toffoli:
        kinds.append(GateKind.TOFFOLI)
    ops = []
    for _ in range(draw(st.integers(0, max_gates))):
        k = draw(st.sampled_from(kinds))
        qs = draw(st.permutations(range(n)))[: k.arity]
        inv = k is GateKind.T and draw(st.booleans())
        ops.append((k, tuple(qs), inv))
    return Circuit.from_ops(n, ops)


@st.composite
def classical_circuits(draw, max_qubits=6, max_gates=12):
    n = draw(st.integers(3, max_qubits))
    kinds = [GateKind.X, GateKind.CNOT, GateKind.TOFFOLI]
    ops = []
    for _ in range(draw(st.integers(0, max_gates))):
        k = draw(st.sampled_from(kinds))
        qs = draw(st.permutations(range(n)))[: k.arity]
        ops.append((k, tuple(qs)))
    return Circuit.from_ops(n, ops)
