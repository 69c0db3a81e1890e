import itertools

import numpy as np
import pytest
from hypothesis import given

from qcad.adders import classical_sim
from qcad.circuit import Circuit, CircuitError, Gate, GateKind, decompose_toffoli, flatten, structurally_equal
from qcad.dag import CycleError, build_dag, topological_order
from qcad.netlist import NetlistError, emit_netlist, parse_netlist
from qcad.randgen import RandSpec, gen_random

from strategies import circuits

NESTED = """qubit a
qubit b
qubit c
module maj (x, y, z) {
  cnot z,y
  cnot z,x
  toffoli x,y,z
}
module two (x, y, z) {
  inst maj (x, y, z)
  inst maj (z, y, x)
}
inst two (a, b, c)
inst maj (a, b, c)
"""


# --- parsing ---------------------------------------------------------------


def test_parse_minimal_cnot():
    c = parse_netlist("qubit a\nqubit b\ncnot a,b")
    assert c.n_qubits == 2
    assert [g.kind for g in c.gates] == [GateKind.CNOT]
    assert c.gates[0].operands == (0, 1)


def test_parse_chain_depth():
    c = parse_netlist("qubit a\nh a\nh a\nh a")
    assert c.n_gates == 3
    assert build_dag(c).depth() == 3


def test_module_instantiated_twice_doubles_gate_count():
    src = "qubit a\nqubit b\nmodule m (x, y) {\n cnot x,y\n h y\n t x\n}\ninst m (a, b)\ninst m (b, a)\n"
    c = parse_netlist(src)
    assert c.n_gates == 2 * 3


def test_nested_hierarchy_multiplies_counts():
    c = parse_netlist(NESTED)
    # two = 2 x maj, plus one more maj: 3 x 3 gates
    assert c.n_gates == 9
    assert c.gates[0].tag == "two#0/maj#0"
    assert c.gates[3].tag == "two#0/maj#1"
    assert c.gates[6].tag == "maj#1"


def test_flatten_is_identity_on_flat_input():
    c = parse_netlist("qubit a\nqubit b\ncnot a,b\nh a")
    assert flatten(c) is c


def test_flatten_keeps_gates_and_tags():
    c = parse_netlist(NESTED)
    f = flatten(c)
    assert f.is_flat and not f.modules
    assert [(g.kind, g.operands, g.tag) for g in f.gates] == [(g.kind, g.operands, g.tag) for g in c.gates]


def test_tdag_parses_as_inverse_t():
    c = parse_netlist("qubit a\ntdag a\nt a")
    assert c.gates[0].kind is GateKind.T and c.gates[0].inverse
    assert not c.gates[1].inverse


@pytest.mark.parametrize(
    "src, fragment",
    [
        ("qubit a\nqubit a", "duplicate qubit"),
        ("qubit a\nfoo a", "unknown gate kind"),
        ("qubit a\nqubit b\ncnot a", "operand"),
        ("h b", "undeclared qubit"),
        ("qubit a\nmodule m (x) {\n inst m (x)\n}\ninst m (a)", "recursive"),
        ("qubit a\nh a,", "line 2"),
    ],
)
def test_parse_errors_carry_position(src, fragment):
    with pytest.raises(NetlistError) as ei:
        parse_netlist(src)
    assert fragment in str(ei.value)
    assert ei.value.line >= 1 and ei.value.col >= 1


def test_comments_and_blank_lines_ignored():
    c = parse_netlist("# header\n\nqubit a   # the only qubit\n\nx a # flip\n")
    assert c.n_gates == 1


# --- emission --------------------------------------------------------------


def test_emit_empty_is_header_only():
    text = emit_netlist(Circuit((), ()))
    assert [ln for ln in text.splitlines() if not ln.startswith("#")] == []


def test_emit_one_gate_one_line():
    c = Circuit.from_ops(1, [(GateKind.H, (0,))])
    body = [ln for ln in emit_netlist(c).splitlines() if ln and not ln.startswith(("#", "qubit"))]
    assert body == ["h q0"]


def test_roundtrip_random_1000_gates():
    c = gen_random(RandSpec(1000, 50, 0.5, seed=4))
    assert structurally_equal(parse_netlist(emit_netlist(c)), c)


def test_roundtrip_hierarchy():
    c = parse_netlist(NESTED)
    back = parse_netlist(emit_netlist(c))
    assert structurally_equal(back, c)
    assert [g.tag for g in back.gates] == [g.tag for g in c.gates]


@given(circuits())
def test_roundtrip_property(c):
    assert structurally_equal(parse_netlist(emit_netlist(c)), c)


# --- gates and circuits ----------------------------------------------------


def test_gate_arity_checked():
    with pytest.raises(CircuitError):
        Gate(0, GateKind.CNOT, (0,))
    with pytest.raises(CircuitError):
        Gate(0, GateKind.CNOT, (1, 1))
    with pytest.raises(CircuitError):
        Gate(0, GateKind.H, (0,), inverse=True)


def test_circuit_rejects_unknown_qubit():
    with pytest.raises(CircuitError):
        Circuit.from_ops(1, [(GateKind.CNOT, (0, 1))])


# --- DAG -------------------------------------------------------------------


def test_dag_chain_longest_path():
    c = Circuit.from_ops(1, [(GateKind.H, (0,))] * 5)
    assert build_dag(c).depth() == 5


def test_dag_two_independent_chains():
    c = Circuit.from_ops(2, [(GateKind.H, (0,)), (GateKind.H, (1,)), (GateKind.X, (0,)), (GateKind.X, (1,))])
    comps = build_dag(c).components()
    assert sorted(sorted(x) for x in comps) == [[0, 2], [1, 3]]


def test_dag_cnot_joining_chains_of_three():
    ops = [(GateKind.H, (0,))] * 3 + [(GateKind.H, (1,))] * 3 + [(GateKind.CNOT, (0, 1))]
    assert build_dag(Circuit.from_ops(2, ops)).depth() == 4


def test_topological_order_detects_cycle():
    with pytest.raises(CycleError):
        topological_order(3, [(0, 1), (1, 2), (2, 0)])


@given(circuits(max_gates=20))
def test_dag_edge_count_and_order(c):
    dag = build_dag(c)
    per_qubit = [0] * c.n_qubits
    for g in c.gates:
        for q in g.operands:
            per_qubit[q] += 1
    assert dag.n_edges == sum(max(0, k - 1) for k in per_qubit)
    pos = {int(g): i for i, g in enumerate(dag.order)}
    for a, b, _ in dag.edges():
        assert pos[a] < pos[b]
    for q, chain in enumerate(dag.chains):
        assert list(chain) == [g.id for g in c.gates if q in g.operands]


# --- Toffoli decomposition -------------------------------------------------


def test_toffoli_expands_to_fifteen_gates():
    c = Circuit.from_ops(3, [(GateKind.TOFFOLI, (0, 1, 2))])
    d = decompose_toffoli(c)
    assert d.n_gates == 15
    counts = d.kind_counts()
    assert counts[GateKind.CNOT] == 6 and counts[GateKind.T] == 7 and counts[GateKind.H] == 2


def test_toffoli_free_input_unchanged():
    c = Circuit.from_ops(2, [(GateKind.CNOT, (0, 1)), (GateKind.H, (0,))])
    assert decompose_toffoli(c) is c


def test_two_toffolis_add_28_gates():
    c = Circuit.from_ops(4, [(GateKind.TOFFOLI, (0, 1, 2)), (GateKind.X, (3,)), (GateKind.TOFFOLI, (1, 2, 3))])
    assert decompose_toffoli(c).n_gates == c.n_gates + 28


def _unitary(c: Circuit) -> np.ndarray:
    """Dense unitary (qubit 0 is the most significant bit); small circuits only."""
    n = c.n_qubits
    one = {
        GateKind.X: np.array([[0, 1], [1, 0]], complex),
        GateKind.Z: np.diag([1, -1]).astype(complex),
        GateKind.H: np.array([[1, 1], [1, -1]], complex) / np.sqrt(2),
        GateKind.S: np.diag([1, 1j]),
    }
    U = np.eye(2**n, dtype=complex)
    for g in c.gates:
        if g.kind is GateKind.T:
            m = np.diag([1, np.exp((-1 if g.inverse else 1) * 1j * np.pi / 4)])
        else:
            m = one.get(g.kind)
        full = np.zeros((2**n, 2**n), dtype=complex)
        for col in range(2**n):
            bits = [(col >> (n - 1 - q)) & 1 for q in range(n)]
            if m is not None:
                (q,) = g.operands
                for out in (0, 1):
                    amp = m[out, bits[q]]
                    if amp:
                        nb = list(bits)
                        nb[q] = out
                        full[int("".join(map(str, nb)), 2), col] += amp
            else:
                nb = list(bits)
                ctrl = all(bits[q] for q in g.operands[:-1])
                if ctrl:
                    nb[g.operands[-1]] ^= 1
                full[int("".join(map(str, nb)), 2), col] = 1
        U = full @ U
    return U


def test_toffoli_network_is_exactly_toffoli():
    """The Clifford+T network equals the Toffoli unitary, not just on basis states."""
    tof = _unitary(Circuit.from_ops(3, [(GateKind.TOFFOLI, (0, 1, 2))]))
    net = _unitary(decompose_toffoli(Circuit.from_ops(3, [(GateKind.TOFFOLI, (0, 1, 2))])))
    assert np.allclose(net, tof, atol=1e-12)


def test_decomposition_preserves_basis_action_on_all_inputs():
    rng = np.random.default_rng(2)
    for _ in range(5):
        n = 5
        ops = []
        for _ in range(8):
            k = [GateKind.X, GateKind.CNOT, GateKind.TOFFOLI][rng.integers(3)]
            ops.append((k, tuple(rng.permutation(n)[: k.arity])))
        c = Circuit.from_ops(n, ops)
        U = _unitary(decompose_toffoli(c))
        for bits in itertools.product((0, 1), repeat=n):
            out = classical_sim(c, list(bits))
            col = int("".join(map(str, bits)), 2)
            row = int("".join(map(str, out)), 2)
            assert abs(abs(U[row, col]) - 1) < 1e-9
