"""Random circuits with a controlled Rent exponent, and exponent measurement."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuit import Circuit, GateKind
from .partition import bisect, interaction_graph, subgraph

ONE_QUBIT_KINDS = (GateKind.H, GateKind.X, GateKind.Z, GateKind.S, GateKind.T)
MIN_RENT_QUBITS = 64


@dataclass(frozen=True)
class RandSpec:
    gates: int
    qubits: int
    rent_r: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.gates < 1:
            raise ValueError("gates must be >= 1")
        if self.qubits < 2:
            raise ValueError("qubits must be >= 2")
        if not 0.0 <= self.rent_r <= 1.0:
            raise ValueError("rent_r must lie in [0, 1]")


def level_weights(levels: int, r: float) -> np.ndarray:
    """Probability of drawing a pair whose lowest common subtree is at level 1..levels.

    A subtree of 2^k leaves should see about (2^k)^r crossing wires.  Counting
    pairs that leave a k-level subtree gives a tail sum over higher levels, so
    the per-level mass is the difference of consecutive tail targets, with the
    root level absorbing whatever remains.
    """
    tail = 2.0 ** (np.arange(levels) * (r - 1.0))
    tail = np.append(tail, 0.0)
    w = tail[:-1] - tail[1:]
    return w / w.sum()


def gen_random(spec: RandSpec) -> Circuit:
    """Random circuit of ``spec.gates`` gates, half one-qubit and half CNOT.

    Qubits sit at the leaves of a balanced binary tree.  A CNOT picks a tree
    level from :func:`level_weights`, a random subtree at that level, and one
    operand from each half of it, so wiring locality follows the exponent.
    """
    rng = np.random.default_rng(spec.seed)
    nq = spec.qubits
    levels = max(1, int(np.ceil(np.log2(nq))))
    w = level_weights(levels, spec.rent_r)
    ops: list[tuple[GateKind, tuple[int, ...]]] = []
    while len(ops) < spec.gates:
        if rng.random() < 0.5:
            kind = ONE_QUBIT_KINDS[int(rng.integers(len(ONE_QUBIT_KINDS)))]
            ops.append((kind, (int(rng.integers(nq)),)))
            continue
        while True:  # redraw pairs that fall past the last qubit; the 50/50 mix stays exact
            lvl = 1 + int(rng.choice(levels, p=w))
            size = 1 << lvl
            blocks = -(-nq // size)
            base = int(rng.integers(blocks)) * size
            half = size // 2
            a = base + int(rng.integers(half))
            b = base + half + int(rng.integers(half))
            if a < nq and b < nq:
                break
        if rng.random() < 0.5:
            a, b = b, a
        ops.append((GateKind.CNOT, (a, b)))
    return Circuit.from_ops(nq, ops)


def rent_profile(c: Circuit, tries: int = 1, cycles: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Mean block size and mean external wire count per recursive-bisection level."""
    adj = interaction_graph(c)
    levels: dict[int, list[tuple[int, int]]] = {}

    def rec(nodes: list[int], depth: int):
        side = bisect(subgraph(adj, nodes), tries=tries, cycles=cycles)
        for s in (0, 1):
            part = [nodes[i] for i in range(len(nodes)) if side[i] == s]
            inside = set(part)
            ext = sum(w for u in part for v, w in adj[u].items() if v not in inside)
            levels.setdefault(depth + 1, []).append((len(part), ext))
            if len(part) >= 4:
                rec(part, depth + 1)

    rec(list(range(c.n_qubits)), 0)
    keys = sorted(levels)
    sizes = np.array([np.mean([s for s, _ in levels[k]]) for k in keys])
    ext = np.array([np.mean([e for _, e in levels[k]]) for k in keys])
    return sizes, ext


def measure_rent(c: Circuit, tries: int = 1, cycles: int = 0) -> float:
    """Fitted Rent exponent of the qubit interaction graph.

    Slope of log(mean external wires) against log(mean block size) over the
    bisection levels with blocks between 2 and n/8 qubits.  Returns 0.0 when no
    two levels have crossing wires (e.g. disjoint pairs).
    """
    if c.n_qubits < MIN_RENT_QUBITS:
        raise ValueError(f"need at least {MIN_RENT_QUBITS} qubits to fit a Rent exponent, got {c.n_qubits}")
    sizes, ext = rent_profile(c, tries, cycles)
    keep = (sizes >= 2) & (sizes <= c.n_qubits / 8) & (ext > 0)
    if keep.sum() < 2:
        return 0.0
    slope = np.polyfit(np.log(sizes[keep]), np.log(ext[keep]), 1)[0]
    return float(slope)
