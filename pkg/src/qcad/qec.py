"""Error-distance (EDist) tracking and selective correction placement.

Every gate adds one error unit and all of its operands leave with the largest
incoming count plus one.  A correction placed right after gate g on qubit q
resets q to the base value.  Corrections play the role of registers in
classical retiming: the task is to place as few as possible so that no count
exceeds the threshold.
"""
from __future__ import annotations

import enum
import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp
from scipy.sparse import coo_matrix

from .circuit import Circuit, Gate, GateKind
from .dag import MAX_ARITY, build_dag
from .kernels import OP_CORRECT, OP_GATE, OP_PREP, edist_pass, greedy_place

log = logging.getLogger(__name__)

#: Instances with at most this many dependence edges are solved exactly.
EXACT_EDGE_LIMIT = 64
ORACLE_MAX_GATES = 8
ORACLE_MAX_QUBITS = 6
#: Physical operations charged per correction when counting Table-3-style totals.
DEFAULT_CORRECTION_OPS = 3032


class InfeasibleError(ValueError):
    """No placement can keep every count within the threshold."""


@dataclass(frozen=True)
class EDistConfig:
    threshold: int
    base: int = 1
    fresh: int = 0

    def __post_init__(self):
        if self.threshold < 0 or self.base < 0 or self.fresh < 0:
            raise ValueError("EDist parameters must be non-negative")
        if self.base >= self.threshold:
            raise ValueError(f"base {self.base} must be below threshold {self.threshold}")
        if self.fresh > self.threshold:
            raise ValueError(f"fresh {self.fresh} exceeds threshold {self.threshold}")


@dataclass(frozen=True)
class CorrectionPlacement:
    """Set of (gate id, qubit id) points; each is a correction right after that gate."""

    points: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    @classmethod
    def of(cls, points: Iterable[tuple[int, int]]) -> "CorrectionPlacement":
        return cls(frozenset((int(g), int(q)) for g, q in points))

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(sorted(self.points))

    def __contains__(self, item) -> bool:
        return tuple(item) in self.points

    def validate(self, c: Circuit) -> None:
        for g, q in self.points:
            if not 0 <= g < c.n_gates or q not in c.gates[g].operands:
                raise ValueError(f"correction point {(g, q)} is not a gate/operand pair")


# ---------------------------------------------------------------------------
# array views


def _arrays(c: Circuit):
    n = c.n_gates
    ops = np.full((n, MAX_ARITY), -1, dtype=np.int64)
    arity = np.zeros(n, dtype=np.int64)
    opcode = np.zeros(n, dtype=np.int64)
    for g in c.gates:
        arity[g.id] = len(g.operands)
        ops[g.id, : len(g.operands)] = g.operands
        if g.kind is GateKind.CORRECT:
            opcode[g.id] = OP_CORRECT
        elif g.kind is GateKind.PREPZ:
            opcode[g.id] = OP_PREP
        else:
            opcode[g.id] = OP_GATE
    return ops, arity, opcode


def _mask(c: Circuit, placement: CorrectionPlacement, ops: np.ndarray) -> np.ndarray:
    mask = np.zeros(ops.shape, dtype=np.bool_)
    for g, q in placement.points:
        k = c.gates[g].operands.index(q)
        mask[g, k] = True
    return mask


def compute_edist(
    c: Circuit, placement: CorrectionPlacement, cfg: EDistConfig
) -> tuple[dict[tuple[int, int], int], int]:
    """Counts after every (gate, operand) point and the maximum seen.

    Counts are taken before a correction at that point resets the qubit.  The
    maximum also covers the fresh value of qubits that are never touched.
    """
    placement.validate(c)
    ops, arity, opcode = _arrays(c)
    after = edist_pass(ops, arity, opcode, _mask(c, placement, ops), c.n_qubits, cfg.base, cfg.fresh)
    counts = {}
    for g in c.gates:
        for k, q in enumerate(g.operands):
            counts[(g.id, q)] = int(after[g.id, k])
    peak = int(after.max()) if c.n_gates else 0
    if c.n_qubits:
        peak = max(peak, cfg.fresh)
    return counts, peak


def max_edist(c: Circuit, placement: CorrectionPlacement, cfg: EDistConfig) -> int:
    return compute_edist(c, placement, cfg)[1]


def every_gate_placement(c: Circuit) -> CorrectionPlacement:
    """One correction after every (gate, operand) pair, skipping Correct gates."""
    return CorrectionPlacement.of(
        (g.id, q) for g in c.gates if g.kind is not GateKind.CORRECT for q in g.operands
    )


# ---------------------------------------------------------------------------
# placement algorithms


def greedy_corrections(c: Circuit, cfg: EDistConfig) -> CorrectionPlacement:
    """Single forward greedy pass at exactly ``cfg.threshold``."""
    ops, arity, opcode = _arrays(c)
    pts, ok = greedy_place(ops, arity, opcode, c.n_qubits, cfg.threshold, cfg.base, cfg.fresh)
    if not ok:
        raise InfeasibleError(
            f"threshold {cfg.threshold} is unsatisfiable with base {cfg.base}, fresh {cfg.fresh}"
        )
    return CorrectionPlacement.of(map(tuple, pts))


def _greedy_best(c: Circuit, cfg: EDistConfig) -> CorrectionPlacement:
    """Best greedy placement over thresholds base+1..T (all are valid at T).

    Taking the minimum over smaller thresholds makes the result size
    non-increasing in T, which a single greedy pass does not guarantee.
    """
    best = greedy_corrections(c, cfg)
    for t in range(cfg.threshold - 1, cfg.base, -1):
        if not best:
            break
        try:
            cand = greedy_corrections(c, EDistConfig(t, cfg.base, min(cfg.fresh, t)))
        except InfeasibleError:
            break
        if len(cand) < len(best):
            best = cand
    return best


def exact_corrections(c: Circuit, cfg: EDistConfig) -> CorrectionPlacement:
    """Minimum placement via a 0/1 integer program over gate labels.

    Each gate g gets an integer label l_g in [1, T] bounding the count it emits.
    For a dependence edge g -> h on qubit q with correction flag x:
    ``l_h >= l_g + 1`` unless x = 1, in which case ``l_h >= base + 1``.  The
    first gate on a qubit needs ``l_h >= fresh + 1``.  Correct and PrepZ gates
    already in the circuit pin their labels.  Minimizes the number of x set.
    """
    T, b, f = cfg.threshold, cfg.base, cfg.fresh
    dag = build_dag(c)
    n = c.n_gates
    edges = dag.edges()
    ne = len(edges)
    if ne == 0 and n == 0:
        return CorrectionPlacement()
    lo = np.ones(n + ne)
    hi = np.concatenate([np.full(n, float(T)), np.ones(ne)])
    lo[n:] = 0.0
    for g in c.gates:
        if g.kind is GateKind.CORRECT:
            lo[g.id] = hi[g.id] = b
        elif g.kind is GateKind.PREPZ:
            lo[g.id] = hi[g.id] = f
    rows, cols, vals, lb = [], [], [], []
    r = 0
    for e, (src, dst, _q) in enumerate(edges):
        if c.gates[dst].kind in (GateKind.CORRECT, GateKind.PREPZ):
            hi[n + e] = 0.0
            continue
        rows += [r, r, r]
        cols += [dst, src, n + e]
        vals += [1.0, -1.0, float(T)]
        lb.append(1.0)
        r += 1
        rows += [r, r]
        cols += [dst, n + e]
        vals += [1.0, -(1.0 + b)]
        lb.append(0.0)
        r += 1
    for q, chain in enumerate(dag.chains):
        if len(chain) and c.gates[chain[0]].kind not in (GateKind.CORRECT, GateKind.PREPZ):
            lo[chain[0]] = max(lo[chain[0]], 1.0 + f)
    if np.any(lo > hi):
        raise InfeasibleError(f"threshold {T} is unsatisfiable with base {b}, fresh {f}")
    cost = np.concatenate([np.zeros(n), np.ones(ne)])
    constraints = []
    if r:
        A = coo_matrix((vals, (rows, cols)), shape=(r, n + ne)).tocsr()
        constraints.append(LinearConstraint(A, np.array(lb), np.inf))
    res = milp(cost, constraints=constraints, integrality=np.ones(n + ne), bounds=Bounds(lo, hi))
    if res.status == 2:
        raise InfeasibleError(f"threshold {T} is unsatisfiable with base {b}, fresh {f}")
    if res.x is None:
        raise RuntimeError(f"integer program failed: {res.message}")
    chosen = np.nonzero(np.round(res.x[n:]) > 0.5)[0]
    return CorrectionPlacement.of((edges[e][0], edges[e][2]) for e in chosen)


def insert_corrections(c: Circuit, cfg: EDistConfig, method: str = "auto") -> CorrectionPlacement:
    """Place corrections so that every count stays within ``cfg.threshold``.

    ``method`` is ``"exact"`` (integer program), ``"greedy"`` (best greedy pass
    over thresholds up to T) or ``"auto"``, which is exact on instances with at
    most :data:`EXACT_EDGE_LIMIT` dependence edges and greedy otherwise.

    Raises
    ------
    InfeasibleError
        When some gate cannot be satisfied, e.g. a two-qubit gate needs
        ``base + 1 <= T``.
    """
    if method not in ("auto", "exact", "greedy"):
        raise ValueError(f"unknown method {method!r}")
    greedy = _greedy_best(c, cfg)
    if not greedy or method == "greedy":
        out = greedy
    elif method == "exact" or build_dag(c).n_edges <= EXACT_EDGE_LIMIT:
        out = exact_corrections(c, cfg)
        if len(out) > len(greedy):  # solver tolerance guard
            out = greedy
    else:
        out = greedy
    return out


def min_corrections_oracle(c: Circuit, cfg: EDistConfig) -> int:
    """Exhaustive minimum number of corrections for tiny circuits.

    Dynamic programming over gates in order; the state is the vector of
    per-qubit counts, and at every gate any subset of its operands may be
    corrected.  Independent of both placement algorithms.
    """
    if c.n_gates > ORACLE_MAX_GATES or c.n_qubits > ORACLE_MAX_QUBITS:
        raise ValueError(
            f"oracle limited to {ORACLE_MAX_GATES} gates and {ORACLE_MAX_QUBITS} qubits"
        )
    T, b, f = cfg.threshold, cfg.base, cfg.fresh
    states: dict[tuple[int, ...], int] = {tuple([f] * c.n_qubits): 0}
    for g in c.gates:
        nxt: dict[tuple[int, ...], int] = {}
        for st, cost in states.items():
            if g.kind is GateKind.CORRECT:
                v = b
            elif g.kind is GateKind.PREPZ:
                v = f
            else:
                v = 1 + max(st[q] for q in g.operands)
            if v > T:
                continue
            for k in range(len(g.operands) + 1):
                for sub in itertools.combinations(g.operands, k):
                    new = list(st)
                    for q in g.operands:
                        new[q] = b if q in sub else v
                    key = tuple(new)
                    if cost + k < nxt.get(key, math.inf):
                        nxt[key] = cost + k
        states = nxt
        if not states:
            raise InfeasibleError("no placement satisfies the threshold")
    return min(states.values())


def apply_placement(c: Circuit, placement: CorrectionPlacement) -> Circuit:
    """Flat circuit with a Correct gate after each placement point."""
    placement.validate(c)
    after: dict[int, list[int]] = {}
    for g, q in sorted(placement.points):
        after.setdefault(g, []).append(q)
    gates: list[Gate] = []
    for g in c.gates:
        gates.append(g)
        for q in after.get(g.id, ()):
            gates.append(Gate(0, GateKind.CORRECT, (q,), False, g.tag))
    return c.with_gates(gates)


def table3_op_count(c: Circuit, placement: CorrectionPlacement, correction_ops: int = DEFAULT_CORRECTION_OPS) -> int:
    """Operation total in the style of the QEC-optimization table.

    Logical gates count as one operation each; every correction is charged its
    full physical bundle (syndrome extraction plus ancilla preparation).
    """
    gates = sum(1 for g in c.gates if g.kind is not GateKind.CORRECT)
    existing = c.n_gates - gates
    return gates + (len(placement) + existing) * correction_ops


# ---------------------------------------------------------------------------
# threshold tuning


class TuneMode(enum.Enum):
    MAX_SUCCESS = "max-success"
    WITHIN_5PCT = "max-T-within-5pct"
    BUDGET = "budget"


@dataclass
class TuneResult:
    threshold: int | None
    placement: CorrectionPlacement
    p_success: float
    p_every_gate: float
    feasible: bool = True
    evaluations: dict[int, float] = field(default_factory=dict)


Evaluator = Callable[[CorrectionPlacement], float]


def tune_threshold(
    c: Circuit,
    mode: TuneMode | str,
    evaluate: Evaluator,
    budget: int | None = None,
    base: int = 1,
    fresh: int = 0,
    tolerance: float = 0.05,
    method: str = "auto",
) -> TuneResult:
    """Choose the EDist threshold by binary search over ``[base + 1, depth]``.

    Modes:

    * ``max-T-within-5pct``: largest T whose success probability is at least
      ``(1 - tolerance)`` times the every-gate success probability.
    * ``max-success``: T with the highest success probability (largest T on ties).
    * ``budget``: fewest-correction-friendly choice: the smallest T whose
      placement uses at most ``budget`` corrections.

    ``evaluate`` maps a placement to a success probability (typically the
    mapped Monte Carlo evaluator).  Placements are cached by content, so
    thresholds producing the same placement are evaluated once.
    """
    mode = TuneMode(mode) if isinstance(mode, str) else mode
    depth = max(build_dag(c).depth(), base + 1)
    eg = every_gate_placement(c)
    cache: dict[frozenset, float] = {}
    placements: dict[int, CorrectionPlacement] = {}
    evals: dict[int, float] = {}

    def place(t: int) -> CorrectionPlacement | None:
        if t not in placements:
            try:
                placements[t] = insert_corrections(c, EDistConfig(t, base, min(fresh, t)), method)
            except InfeasibleError:
                placements[t] = None
        return placements[t]

    def score(p: CorrectionPlacement) -> float:
        if p.points not in cache:
            cache[p.points] = float(evaluate(p))
        return cache[p.points]

    def at(t: int) -> float | None:
        p = place(t)
        if p is None:
            return None
        evals[t] = score(p)
        return evals[t]

    p_eg = score(eg)
    lo, hi = base + 1, depth

    if mode is TuneMode.BUDGET:
        if budget is None or budget < 0:
            raise ValueError("budget mode needs a non-negative budget")
        if place(hi) is None or len(place(hi)) > budget:
            return _fallback(eg, p_eg, evals, "no threshold meets the correction budget")
        while lo < hi:
            mid = (lo + hi) // 2
            p = place(mid)
            if p is not None and len(p) <= budget:
                hi = mid
            else:
                lo = mid + 1
        return TuneResult(hi, place(hi), at(hi), p_eg, True, evals)

    if mode is TuneMode.WITHIN_5PCT:
        floor = (1.0 - tolerance) * p_eg

        def ok(t: int) -> bool:
            v = at(t)
            return v is not None and v >= floor

        if not ok(lo):
            return _fallback(eg, p_eg, evals, f"no threshold reaches {floor:.4f}")
        if ok(hi):
            return TuneResult(hi, place(hi), evals[hi], p_eg, True, evals)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if ok(mid):
                lo = mid
            else:
                hi = mid
        return TuneResult(lo, place(lo), evals[lo], p_eg, True, evals)

    # max-success: golden-section style bracketing is unreliable on noisy
    # estimates, so evaluate a geometric grid and refine around the best.
    grid = sorted({lo, hi, *np.unique(np.geomspace(lo, hi, num=8).round().astype(int)).tolist()})
    for t in grid:
        at(t)
    feasible = {t: v for t, v in evals.items() if v is not None}
    if not feasible:
        return _fallback(eg, p_eg, evals, "no feasible threshold")
    best = max(feasible, key=lambda t: (feasible[t], t))
    i = grid.index(best)
    for t in range(grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)] + 1):
        at(t)
    feasible = {t: v for t, v in evals.items() if v is not None}
    best = max(feasible, key=lambda t: (feasible[t], t))
    return TuneResult(best, place(best), feasible[best], p_eg, True, evals)


def _fallback(eg: CorrectionPlacement, p_eg: float, evals: dict, why: str) -> TuneResult:
    warnings.warn(f"threshold tuning fell back to every-gate corrections: {why}", RuntimeWarning)
    return TuneResult(None, eg, p_eg, p_eg, False, evals)
