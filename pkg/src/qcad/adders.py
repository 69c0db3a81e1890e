"""Reversible ripple-carry (QRCA) and carry-lookahead (QCLA) adders.

Both generators emit flat circuits over X/CNOT/Toffoli with qubits labelled by
register, e.g. ``a[3]``.  :func:`classical_sim` and :func:`simulate_batch`
evaluate such circuits on basis states, which is exact for these gates.
"""
from __future__ import annotations

import enum
import re
from dataclasses import dataclass

import numpy as np

from .circuit import Circuit, CircuitError, GateKind, Qubit, QubitKind


class AdderKind(enum.Enum):
    QRCA = "qrca"
    QCLA = "qcla"


@dataclass(frozen=True)
class AdderSpec:
    kind: AdderKind
    n: int
    m: int

    def __post_init__(self):
        if isinstance(self.kind, str):
            object.__setattr__(self, "kind", AdderKind(self.kind))
        if self.n < 1 or not 1 <= self.m <= self.n:
            raise ValueError(f"need 1 <= m <= n, got n={self.n}, m={self.m}")

    @property
    def blocks(self) -> list[tuple[int, int]]:
        """(first bit, width) per block; a short final block pads non-dividing m."""
        return [(i, min(self.m, self.n - i)) for i in range(0, self.n, self.m)]

    @property
    def output_register(self) -> str:
        return "b" if self.kind is AdderKind.QRCA else "z"


class _Builder:
    def __init__(self):
        self.qubits: list[Qubit] = []
        self.ops: list[tuple[GateKind, tuple[int, ...]]] = []
        self.counts: dict[str, int] = {}

    def reg(self, name: str, size: int, kind: QubitKind = QubitKind.DATA) -> list[int]:
        out = []
        for i in range(size):
            q = len(self.qubits)
            self.qubits.append(Qubit(q, kind, f"{name}[{i}]"))
            out.append(q)
        return out

    def anc(self, name: str) -> int:
        """One more zero ancilla, appended to register ``name``."""
        idx = self.counts.get(name, 0)
        self.counts[name] = idx + 1
        q = len(self.qubits)
        self.qubits.append(Qubit(q, QubitKind.ZERO_ANCILLA, f"{name}[{idx}]"))
        return q

    def cx(self, c, t):
        self.ops.append((GateKind.CNOT, (c, t)))

    def ccx(self, a, b, t):
        self.ops.append((GateKind.TOFFOLI, (a, b, t)))

    def mark(self) -> int:
        return len(self.ops)

    def mirror(self, start: int, end: int):
        """Append the inverse of ops[start:end] (all self-inverse, so reversed)."""
        self.ops.extend(reversed(self.ops[start:end]))

    def build(self) -> Circuit:
        return Circuit.from_ops(self.qubits, self.ops)


def gen_qrca(spec: AdderSpec) -> Circuit:
    """In-place ripple-carry adder b <- a + b (mod 2^n).

    Each block of m bits runs the carry/sum ripple with one shared m-bit carry
    register ``c``; carry bit 0 of a block is loaded from the previous block's
    boundary carry ``k``.  A first, bottom-up pass writes every block
    carry-out into its boundary qubit; a second, top-down pass forms the sums,
    and recomputing each carry-out there clears its boundary qubit again.
    """
    if spec.kind is not AdderKind.QRCA:
        raise ValueError("gen_qrca needs a qrca spec")
    bld = _Builder()
    a = bld.reg("a", spec.n)
    b = bld.reg("b", spec.n)
    c = bld.reg("c", spec.m, QubitKind.ZERO_ANCILLA)
    blocks = spec.blocks
    k = bld.reg("k", len(blocks) - 1, QubitKind.ZERO_ANCILLA)

    def carry(ci, ai, bi, co, has_in):
        bld.ccx(ai, bi, co)
        bld.cx(ai, bi)
        if has_in:
            bld.ccx(ci, bi, co)

    def carry_inv(ci, ai, bi, co, has_in):
        if has_in:
            bld.ccx(ci, bi, co)
        bld.cx(ai, bi)
        bld.ccx(ai, bi, co)

    def block_carry(j, first, width, sum_pass):
        has_in = j > 0
        if has_in:
            bld.cx(k[j - 1], c[0])
        # carry into bit t of the block lives in c[t]; the block carry-out in k[j]
        targets = [c[t + 1] for t in range(width - 1)]
        last = j == len(blocks) - 1
        if not last:
            targets.append(k[j])
        for t, co in enumerate(targets):
            carry(c[t], a[first + t], b[first + t], co, has_in or t > 0)
        top = width - 1
        if sum_pass:
            if last:  # no carry-out step ran on the top bit
                bld.cx(a[first + top], b[first + top])
            if has_in or top > 0:
                bld.cx(c[top], b[first + top])
            for t in range(top - 1, -1, -1):
                carry_inv(c[t], a[first + t], b[first + t], c[t + 1], has_in or t > 0)
                bld.cx(a[first + t], b[first + t])
                if has_in or t > 0:
                    bld.cx(c[t], b[first + t])
        else:
            for t in range(top - 1, -1, -1):
                carry_inv(c[t], a[first + t], b[first + t], c[t + 1], has_in or t > 0)
            # the kept carry-out step left b[top] holding a xor b; restore it
            bld.cx(a[first + top], b[first + top])
        if has_in:
            bld.cx(k[j - 1], c[0])

    for j, (first, width) in enumerate(blocks[:-1]):
        block_carry(j, first, width, sum_pass=False)
    for j in range(len(blocks) - 1, -1, -1):
        first, width = blocks[j]
        block_carry(j, first, width, sum_pass=True)
    return bld.build()


def gen_qcla(spec: AdderSpec) -> Circuit:
    """Out-of-place carry-lookahead adder z <- a + b (mod 2^n); a, b restored.

    Compute stage: bitwise generate g = a.b (Toffoli) and propagate p = a^b
    (in place on b); per block, local carries assuming a zero carry-in and the
    running propagate products; a Kogge-Stone prefix over block (G, P) pairs
    yields each block's carry-in, which then fixes the local carries.  The sum
    z = p ^ carry is copied out and the compute stage is mirrored to clean up.
    """
    if spec.kind is not AdderKind.QCLA:
        raise ValueError("gen_qcla needs a qcla spec")
    bld = _Builder()
    n = spec.n
    a = bld.reg("a", n)
    b = bld.reg("b", n)
    z = bld.reg("z", n)
    g = bld.reg("g", n, QubitKind.ZERO_ANCILLA)
    blocks = spec.blocks
    nb = len(blocks)
    start = bld.mark()
    for i in range(n):
        bld.ccx(a[i], b[i], g[i])
        bld.cx(a[i], b[i])
    p = b
    # local[j][t]: carry into bit first+t assuming block carry-in 0 (t >= 1);
    # for all but the top block, local[j][width] is the block generate.
    # prods[j][t]: p[first] & ... & p[first+t-1]; prods[j][width] is the block propagate.
    local: list[dict[int, int]] = []
    prods: list[dict[int, int]] = []
    for j, (first, width) in enumerate(blocks):
        top = width - 1 if j == nb - 1 else width
        lc: dict[int, int] = {}
        pp: dict[int, int] = {1: p[first]}
        for t in range(1, top + 1):
            q = bld.anc("lc")
            bld.cx(g[first + t - 1], q)
            if t > 1:
                bld.ccx(p[first + t - 1], lc[t - 1], q)
            lc[t] = q
        for t in range(2, top + 1):
            q = bld.anc("pp")
            bld.ccx(pp[t - 1], p[first + t - 1], q)
            pp[t] = q
        local.append(lc)
        prods.append(pp)
    grp_g = [local[j][blocks[j][1]] for j in range(nb - 1)]
    grp_p = [prods[j][blocks[j][1]] for j in range(nb - 1)]
    # Kogge-Stone: afterwards grp_g[j] is the carry out of blocks 0..j.  Each
    # level is emitted in phases so no qubit is read twice within a phase,
    # otherwise gate order would chain the whole level.
    s = 1
    while s < len(grp_g):
        span = range(s, len(grp_g))
        ng, np_ = list(grp_g), list(grp_p)
        for j in span:
            ng[j] = bld.anc("ksg")
            bld.cx(grp_g[j], ng[j])
        for j in span:
            bld.ccx(grp_p[j], grp_g[j - s], ng[j])
        # propagate is only needed while the group can still grow (j >= 2s)
        for parity in (0, 1):
            for j in range(2 * s, len(grp_g)):
                if (j // s) % 2 == parity:
                    np_[j] = bld.anc("ksp")
                    bld.ccx(grp_p[j], grp_p[j - s], np_[j])
        grp_g, grp_p = ng, np_
        s *= 2
    carry_in = [None] + grp_g
    for j, (first, width) in enumerate(blocks):
        if carry_in[j] is None:
            continue
        for t in range(1, width):
            bld.ccx(prods[j][t], carry_in[j], local[j][t])
    stop = bld.mark()
    for j, (first, width) in enumerate(blocks):
        for t in range(width):
            bld.cx(p[first + t], z[first + t])
            cq = carry_in[j] if t == 0 else local[j][t]
            if cq is not None:
                bld.cx(cq, z[first + t])
    bld.mirror(start, stop)
    return bld.build()


def gen_adder(spec: AdderSpec) -> Circuit:
    return gen_qrca(spec) if spec.kind is AdderKind.QRCA else gen_qcla(spec)


# ---------------------------------------------------------------------------
# classical reversible simulation

_CLASSICAL = {GateKind.X, GateKind.CNOT, GateKind.TOFFOLI}


def _check_classical(c: Circuit):
    for g in c.gates:
        if g.kind not in _CLASSICAL:
            raise CircuitError(f"gate {g.id} ({g.mnemonic}) is not classical-reversible")


def classical_sim(c: Circuit, bits) -> list[int]:
    """Evaluate ``c`` on one basis state given as a sequence of 0/1 per qubit."""
    _check_classical(c)
    state = [int(x) & 1 for x in bits]
    if len(state) != c.n_qubits:
        raise ValueError(f"expected {c.n_qubits} input bits, got {len(state)}")
    for g in c.gates:
        o = g.operands
        if g.kind is GateKind.X:
            state[o[0]] ^= 1
        elif g.kind is GateKind.CNOT:
            state[o[1]] ^= state[o[0]]
        else:
            state[o[2]] ^= state[o[0]] & state[o[1]]
    return state


def simulate_batch(c: Circuit, state: np.ndarray) -> np.ndarray:
    """Bit-sliced evaluation: ``state`` has shape (n_qubits, batch) of 0/1 (or packed words)."""
    _check_classical(c)
    s = np.array(state, copy=True)
    if s.shape[0] != c.n_qubits:
        raise ValueError("state rows must match qubit count")
    for g in c.gates:
        o = g.operands
        if g.kind is GateKind.X:
            s[o[0]] ^= np.ones_like(s[o[0]]) if s.dtype == bool else ~np.zeros_like(s[o[0]])
        elif g.kind is GateKind.CNOT:
            s[o[1]] ^= s[o[0]]
        else:
            s[o[2]] ^= s[o[0]] & s[o[1]]
    return s


_LABEL = re.compile(r"^(\w+)\[(\d+)\]$")


def registers(c: Circuit) -> dict[str, list[int]]:
    """Qubit ids per register name, ordered by index, from ``name[i]`` labels."""
    regs: dict[str, dict[int, int]] = {}
    for q in c.qubits:
        m = _LABEL.match(q.label)
        if m:
            regs.setdefault(m.group(1), {})[int(m.group(2))] = q.id
    return {k: [v[i] for i in sorted(v)] for k, v in regs.items()}


def run_adder(c: Circuit, spec: AdderSpec, a_vals, b_vals) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Add vectors of operands; returns (sum, a_out, b_or_ancilla_clean flag).

    The third array is True where every qubit outside the output register is
    restored (inputs unchanged, ancillas back to zero).
    """
    a_vals = np.asarray(a_vals, dtype=np.uint64)
    b_vals = np.asarray(b_vals, dtype=np.uint64)
    regs = registers(c)
    n = spec.n
    state = np.zeros((c.n_qubits, a_vals.size), dtype=np.uint8)
    for i in range(n):
        state[regs["a"][i]] = (a_vals >> np.uint64(i)) & np.uint64(1)
        state[regs["b"][i]] = (b_vals >> np.uint64(i)) & np.uint64(1)
    init = state.copy()
    out = simulate_batch(c, state)
    reg = regs[spec.output_register]
    total = np.zeros(a_vals.size, dtype=np.uint64)
    for i in range(n):
        total |= out[reg[i]].astype(np.uint64) << np.uint64(i)
    keep = np.ones(c.n_qubits, dtype=bool)
    keep[reg] = False
    clean = np.all(out[keep] == init[keep], axis=0)
    a_out = np.zeros(a_vals.size, dtype=np.uint64)
    for i in range(n):
        a_out |= out[regs["a"][i]].astype(np.uint64) << np.uint64(i)
    return total, a_out, clean
