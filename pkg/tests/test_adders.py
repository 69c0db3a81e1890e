import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qcad.adders import (
    AdderKind,
    AdderSpec,
    classical_sim,
    gen_adder,
    gen_qcla,
    gen_qrca,
    registers,
    run_adder,
)
from qcad.circuit import Circuit, CircuitError, GateKind
from qcad.dag import build_dag

KINDS = [AdderKind.QRCA, AdderKind.QCLA]


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("m", [1, 3, 4, 8])
def test_exhaustive_8_bit(kind, m):
    spec = AdderSpec(kind, 8, m)
    c = gen_adder(spec)
    a, b = np.meshgrid(np.arange(256, dtype=np.uint64), np.arange(256, dtype=np.uint64))
    a, b = a.ravel(), b.ravel()
    total, a_out, clean = run_adder(c, spec, a, b)
    assert np.array_equal(total, (a + b) % 256)
    assert np.array_equal(a_out, a)
    assert clean.all()


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("n,m", [(16, 4), (32, 4), (32, 5), (16, 16)])
def test_random_wide_sums(kind, n, m):
    spec = AdderSpec(kind, n, m)
    rng = np.random.default_rng(n * 31 + m)
    a = rng.integers(0, 2**n, 1000, dtype=np.uint64)
    b = rng.integers(0, 2**n, 1000, dtype=np.uint64)
    total, _, clean = run_adder(gen_adder(spec), spec, a, b)
    assert np.array_equal(total, (a + b) % np.uint64(2**n))
    assert clean.all()


@pytest.mark.parametrize("kind", KINDS)
def test_carry_heavy_edge_cases(kind):
    n = 32
    spec = AdderSpec(kind, n, 4)
    top = 2**n - 1
    pairs = [(0, 0), (top, 1), (top, top), (1, top), (2**31, 2**31), (0x0F0F0F0F, 0xF0F0F0F1)]
    a = np.array([p[0] for p in pairs], dtype=np.uint64)
    b = np.array([p[1] for p in pairs], dtype=np.uint64)
    total, _, clean = run_adder(gen_adder(spec), spec, a, b)
    assert total.tolist() == [(x + y) % 2**n for x, y in pairs]
    assert clean.all()


def test_eight_by_four_ripple_structure():
    c = gen_qrca(AdderSpec(AdderKind.QRCA, 8, 4))
    regs = registers(c)
    assert AdderSpec(AdderKind.QRCA, 8, 4).blocks == [(0, 4), (4, 4)]
    assert len(regs["c"]) == 4  # one shared 4-bit carry register for both passes


def test_non_dividing_block_pads():
    assert AdderSpec("qcla", 10, 4).blocks == [(0, 4), (4, 4), (8, 2)]


def test_full_width_block_is_single():
    assert AdderSpec("qcla", 16, 16).blocks == [(0, 16)]


def test_spec_validation():
    with pytest.raises(ValueError):
        AdderSpec("qrca", 8, 9)
    with pytest.raises(ValueError):
        AdderSpec("qrca", 8, 0)
    with pytest.raises(ValueError):
        gen_qrca(AdderSpec("qcla", 8, 4))
    with pytest.raises(ValueError):
        gen_qcla(AdderSpec("qrca", 8, 4))


def test_lookahead_is_shallower():
    deep = build_dag(gen_adder(AdderSpec("qrca", 64, 4))).depth()
    shallow = build_dag(gen_adder(AdderSpec("qcla", 64, 4))).depth()
    assert shallow < deep
    # regression guard on the lookahead tree depth
    assert shallow <= 40


def test_lookahead_depth_grows_logarithmically():
    d = [build_dag(gen_adder(AdderSpec("qcla", n, 4))).depth() for n in (8, 16, 32, 64)]
    steps = np.diff(d)
    assert (steps > 0).all() and steps.max() <= 8


def test_classical_sim_examples():
    x = Circuit.from_ops(1, [(GateKind.X, (0,))])
    assert classical_sim(x, [0]) == [1]
    cx = Circuit.from_ops(2, [(GateKind.CNOT, (1, 0))])
    assert classical_sim(cx, [0, 1]) == [1, 1]
    ccx = Circuit.from_ops(3, [(GateKind.TOFFOLI, (0, 1, 2))])
    for bits in itertools.product((0, 1), repeat=3):
        a, b, t = bits
        assert classical_sim(ccx, bits) == [a, b, t ^ (a & b)]


def test_classical_sim_rejects_quantum_gates():
    with pytest.raises(CircuitError):
        classical_sim(Circuit.from_ops(1, [(GateKind.H, (0,))]), [0])
    with pytest.raises(ValueError):
        classical_sim(Circuit.from_ops(2, [(GateKind.X, (0,))]), [0])


@given(st.sampled_from(KINDS), st.integers(1, 12), st.data())
def test_any_block_size_adds(kind, n, data):
    m = data.draw(st.integers(1, n))
    a = data.draw(st.integers(0, 2**n - 1))
    b = data.draw(st.integers(0, 2**n - 1))
    spec = AdderSpec(kind, n, m)
    c = gen_adder(spec)
    regs = registers(c)
    bits = [0] * c.n_qubits
    for i in range(n):
        bits[regs["a"][i]] = (a >> i) & 1
        bits[regs["b"][i]] = (b >> i) & 1
    out = classical_sim(c, bits)
    got = sum(out[q] << i for i, q in enumerate(regs[spec.output_register]))
    assert got == (a + b) % 2**n


def test_generation_is_deterministic():
    spec = AdderSpec("qcla", 32, 4)
    assert gen_adder(spec).gates == gen_adder(spec).gates
