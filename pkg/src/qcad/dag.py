"""Per-qubit dependence DAG over the gates of a flat circuit."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .circuit import Circuit

MAX_ARITY = 3


class CycleError(ValueError):
    """The gate dependence graph contains a cycle."""


@dataclass(frozen=True, eq=False)
class Dag:
    """Dependence graph in array form.

    ``operands[g, k]`` is the k-th operand of gate g (-1 padded); ``pred[g, k]``
    and ``succ[g, k]`` are the previous and next gate on that operand (-1 when
    none).  ``chains[q]`` lists the gates acting on qubit q in order.
    """

    n_qubits: int
    arity: np.ndarray
    operands: np.ndarray
    pred: np.ndarray
    succ: np.ndarray
    chains: tuple[np.ndarray, ...]
    order: np.ndarray

    @property
    def n_gates(self) -> int:
        return int(self.arity.shape[0])

    @property
    def n_edges(self) -> int:
        return int(np.count_nonzero(self.pred >= 0))

    def edges(self) -> list[tuple[int, int, int]]:
        """``(src, dst, qubit)`` for every dependence edge."""
        g, k = np.nonzero(self.pred >= 0)
        return [(int(self.pred[a, b]), int(a), int(self.operands[a, b])) for a, b in zip(g, k)]

    def levels(self) -> np.ndarray:
        """1-based ASAP level of each gate (longest path from a source, in gates)."""
        lvl = np.zeros(self.n_gates, dtype=np.int64)
        for g in self.order:
            best = 0
            for k in range(self.arity[g]):
                p = self.pred[g, k]
                if p >= 0 and lvl[p] > best:
                    best = lvl[p]
            lvl[g] = best + 1
        return lvl

    def remaining(self, weights: np.ndarray | None = None) -> np.ndarray:
        """Longest weighted path from each gate to a sink, including the gate."""
        w = np.ones(self.n_gates) if weights is None else np.asarray(weights, dtype=float)
        rem = np.zeros(self.n_gates, dtype=float)
        for g in self.order[::-1]:
            best = 0.0
            for k in range(self.arity[g]):
                s = self.succ[g, k]
                if s >= 0 and rem[s] > best:
                    best = rem[s]
            rem[g] = best + w[g]
        return rem

    def depth(self) -> int:
        return int(self.levels().max()) if self.n_gates else 0

    def components(self) -> list[list[int]]:
        """Weakly connected components of gates, each sorted by id."""
        parent = list(range(self.n_gates))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for src, dst, _ in self.edges():
            ra, rb = find(src), find(dst)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
        groups: dict[int, list[int]] = {}
        for g in range(self.n_gates):
            groups.setdefault(find(g), []).append(g)
        return sorted(groups.values())


def topological_order(n_gates: int, edges: list[tuple[int, int]]) -> np.ndarray:
    """Topological order of an arbitrary edge list (Kahn); raises CycleError."""
    indeg = np.zeros(n_gates, dtype=np.int64)
    out: list[list[int]] = [[] for _ in range(n_gates)]
    for a, b in edges:
        out[a].append(b)
        indeg[b] += 1
    ready = deque(i for i in range(n_gates) if indeg[i] == 0)
    order = []
    while ready:
        g = ready.popleft()
        order.append(g)
        for h in out[g]:
            indeg[h] -= 1
            if indeg[h] == 0:
                ready.append(h)
    if len(order) != n_gates:
        stuck = sorted(int(i) for i in np.nonzero(indeg > 0)[0])[:5]
        raise CycleError(f"dependence cycle through gates {stuck}")
    return np.asarray(order, dtype=np.int64)


def build_dag(c: Circuit) -> Dag:
    """Build the dependence DAG of a flat circuit in its stored gate order."""
    n = c.n_gates
    arity = np.zeros(n, dtype=np.int64)
    operands = np.full((n, MAX_ARITY), -1, dtype=np.int64)
    pred = np.full((n, MAX_ARITY), -1, dtype=np.int64)
    succ = np.full((n, MAX_ARITY), -1, dtype=np.int64)
    last = np.full(c.n_qubits, -1, dtype=np.int64)
    last_slot = np.zeros(c.n_qubits, dtype=np.int64)
    chains: list[list[int]] = [[] for _ in range(c.n_qubits)]
    for g in c.gates:
        arity[g.id] = len(g.operands)
        for k, q in enumerate(g.operands):
            operands[g.id, k] = q
            p = last[q]
            if p >= 0:
                pred[g.id, k] = p
                succ[p, last_slot[q]] = g.id
            last[q] = g.id
            last_slot[q] = k
            chains[q].append(g.id)
    edges = [(int(pred[g, k]), g) for g in range(n) for k in range(arity[g]) if pred[g, k] >= 0]
    topological_order(n, edges)  # cycle check; the stored order is kept
    return Dag(
        c.n_qubits,
        arity,
        operands,
        pred,
        succ,
        tuple(np.asarray(ch, dtype=np.int64) for ch in chains),
        np.arange(n, dtype=np.int64),
    )
