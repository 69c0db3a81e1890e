"""Mapping an encoded circuit onto a region layout.

Steps: partition qubits onto home regions by recursive bisection of the
interaction graph, list-schedule gates with critical-path priority while
teleporting operands between regions and relocating idle qubits to memory,
then size Qalypso ancilla factories and routers from the recorded demand.
"""
from __future__ import annotations

import heapq
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .circuit import Circuit, GateKind
from .dag import build_dag
from .datapath import DatapathKind, NonTransversalPolicy, RegionKind, RegionLayout
from .partition import cut_weight, interaction_graph, recursive_bisection
from .tech import TechModel

ZERO_BLOCKS_PER_T_FIXED = 2  # fixed datapaths distil a T ancilla from two zero-block slots
INF = float("inf")


class MapError(RuntimeError):
    """Mapping failed (capacity or deadlock); ``time`` is the blocking timestep."""

    def __init__(self, message: str, time: float | None = None):
        super().__init__(message if time is None else f"{message} (at t={time:.1f} us)")
        self.time = time


@dataclass(frozen=True)
class Assignment:
    home: np.ndarray  # region index per qubit
    cut: int


def _reserve(slots: int) -> int:
    """Slots kept free in a data region for visiting operands."""
    return 2 if slots >= 8 else 0


def _even(total: int, parts: int, cap: int) -> list[int]:
    base, extra = divmod(total, parts)
    return [min(cap, base + (1 if i < extra else 0)) for i in range(parts)]


def partition(c: Circuit, layout: RegionLayout, tries: int = 1) -> Assignment:
    """Home region per qubit: balanced recursive bisection mapped onto the region grid.

    Data regions take an even share (keeping a little headroom in large
    regions); the rest goes to memory, then to any remaining data slots.
    """
    n = c.n_qubits
    regions = layout.regions
    if sum(r.slots for r in regions) < n:
        raise MapError(f"{n} qubits exceed total capacity {sum(r.slots for r in regions)}")
    data = [r for r in regions if r.kind is RegionKind.DATA]
    mem = [r for r in regions if r.kind is RegionKind.MEMORY]
    soft = sum(r.slots - _reserve(r.slots) for r in data)
    sizes = [0] * len(regions)
    in_data = min(n, soft)
    for r, s in zip(data, _even(in_data, len(data), max(1, data[0].slots - _reserve(data[0].slots)))):
        sizes[r.index] = s
    rest = n - sum(sizes)
    if mem and rest:
        for r, s in zip(mem, _even(rest, len(mem), mem[0].slots)):
            sizes[r.index] = s
        rest = n - sum(sizes)
    for r in regions:  # spill into headroom last
        if rest <= 0:
            break
        add = min(rest, r.slots - sizes[r.index])
        sizes[r.index] += add
        rest -= add
    adj = interaction_graph(c)
    home = recursive_bisection(adj, sizes, tries=tries) if n else np.zeros(0, dtype=np.int64)
    return Assignment(home, cut_weight(adj, [int(h) for h in home]) if n else 0)


@dataclass(frozen=True)
class GateRecord:
    region: int
    start: float
    duration: float
    stall: float = 0.0

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass(frozen=True)
class Move:
    qubit: int
    src: int
    dst: int
    depart: float
    arrive: float
    transport: str  # "teleport" between regions
    hops: int
    reason: str  # "operand", "evict" or "relocate"
    penalty: float = 0.0


@dataclass(frozen=True)
class Connection:
    routers: tuple[int, ...]
    start: float
    end: float


@dataclass
class MappedSchedule:
    circuit: Circuit
    layout: RegionLayout
    assignment: Assignment
    gates: list[GateRecord]
    moves: list[Move]
    residency: list[list[tuple[int, float, float]]]
    #: (time, region, zero blocks, T blocks) per ancilla-consuming operation
    ancilla_demand: list[tuple[float, int, int, int]]
    connections: list[Connection]
    #: (qubit, region, time) of idle-memory corrections
    memory_corrections: list[tuple[int, int, float]] = field(default_factory=list)

    @property
    def makespan(self) -> float:
        return max((g.end for g in self.gates), default=0.0)

    @property
    def total_stall(self) -> float:
        return float(sum(g.stall for g in self.gates))

    @property
    def n_teleports(self) -> int:
        return len(self.moves)

    def correction_gates(self) -> list[int]:
        return [g.id for g in self.circuit.gates if g.kind is GateKind.CORRECT]


@dataclass(frozen=True)
class NetworkSizing:
    peak: tuple[int, ...]
    capacity: tuple[int, ...]
    area: tuple[float, ...]


class _Factories:
    """Ancilla generators of one region: each holds at most one finished block."""

    def __init__(self, count: int, latency: float, period: float):
        self.period = period
        self.ready = [latency] * count

    def take(self, t: float, k: int) -> float:
        if not self.ready:
            return INF
        done = t
        for _ in range(k):
            i = min(range(len(self.ready)), key=lambda j: (self.ready[j], j))
            at = max(t, self.ready[i])
            self.ready[i] = at + self.period
            done = max(done, at)
        return done


def gate_duration(kind: GateKind, slots: int, tech: TechModel) -> float:
    return tech.gate_latency(kind) + tech.shuttle_us(slots)


class _Scheduler:
    def __init__(self, c: Circuit, layout: RegionLayout, asg: Assignment, tech: TechModel, router_cap):
        self.c = c
        self.L = layout
        self.tech = tech
        self.cfg = layout.config
        self.dag = build_dag(c)
        self.fixed = self.cfg.kind.fixed_ancilla
        self.router_cap = list(router_cap)
        regs = layout.regions
        self.cap = [r.slots for r in regs]
        self.units = [max(1, r.slots // 2) for r in regs]
        self.is_mem = [r.kind is RegionKind.MEMORY for r in regs]
        self.mem_ids = [r.index for r in regs if r.kind is RegionKind.MEMORY]
        self.data_ids = [r.index for r in regs if r.kind is RegionKind.DATA]
        self.t_sites = [r.index for r in regs if r.is_t_site]
        zf = layout.zero_factory
        self.fact = [_Factories(r.zero_factories, zf.latency_us, 1.0 / zf.throughput_per_us) for r in regs]
        self.home = asg.home
        nq = c.n_qubits
        self.loc = [int(h) for h in asg.home]
        self.busy = [0.0] * nq
        self.occ = [0] * len(regs)
        self.res: list[set[int]] = [set() for _ in regs]
        for q, h in enumerate(self.loc):
            self.occ[h] += 1
            self.res[h].add(q)
        self.running = [0] * len(regs)
        self.residency = [[(self.loc[q], 0.0)] for q in range(nq)]
        self.pinned = [False] * nq
        # per-gate durations (region size fixed per kind of region)
        dq = self.cfg.Dq
        self.dur = np.array([gate_duration(g.kind, dq, tech) for g in c.gates])
        self.prio = self.dag.remaining(self.dur) if c.n_gates else np.zeros(0)
        self.level = self.dag.levels() if c.n_gates else np.zeros(0, dtype=np.int64)
        # next gate per qubit, following each qubit's gate chain
        self.chain_pos = [0] * nq
        self.chains = self.dag.chains
        avg = float(self.dur.mean()) if c.n_gates else 0.0
        self.reloc_after = tech.relocation_factor * avg
        self._static_gaps()
        self.conn_active: list[list[float]] = [[] for _ in regs]  # end times per router
        self.gates: list[GateRecord | None] = [None] * c.n_gates
        self.moves: list[Move] = []
        self.demand: list[tuple[float, int, int, int]] = []
        self.conns: list[Connection] = []
        self.tele_base = tech.teleport_latency()
        self.epr = tech.epr_latency()

    # helpers ---------------------------------------------------------------
    def next_level(self, q: int) -> float:
        ch = self.chains[q]
        i = self.chain_pos[q]
        return float(self.level[ch[i]]) if i < len(ch) else INF

    def _teleport(self, q: int, dst: int, t: float, reason: str):
        src = self.loc[q]
        path = self.L.xy_route(src, dst)
        penalty = 0.0
        for r in path:
            act = self.conn_active[r] = [e for e in self.conn_active[r] if e > t]
            if len(act) >= self.router_cap[r]:
                penalty += self.epr
        arrive = t + self.tele_base + penalty
        for r in path:
            self.conn_active[r].append(arrive)
        self.conns.append(Connection(tuple(path), t, arrive))
        self.moves.append(Move(q, src, dst, t, arrive, "teleport", len(path) - 1, reason, penalty))
        self.occ[src] -= 1
        self.res[src].discard(q)
        self.occ[dst] += 1
        self.res[dst].add(q)
        self.loc[q] = dst
        self.residency[q][-1] = self.residency[q][-1] + (t,)
        self.residency[q].append((dst, t))
        self.busy[q] = arrive
        return arrive

    def _spill_target(self, q: int, avoid: int) -> int | None:
        src = self.loc[q]
        pools = [self.mem_ids] if self.mem_ids else []
        pools.append(self.data_ids)
        for pool in pools:
            cands = [r for r in pool if r != avoid and self.occ[r] < self.cap[r]]
            if cands:
                h = int(self.home[q])
                return min(cands, key=lambda r: (0 if r == h else 1, self.L.distance(src, r), r))
        return None

    def _free_slots(self, r: int, need: int, keep: set[int], t: float) -> list[tuple[int, int]] | None:
        """Evictions (qubit, destination) making ``need`` slots in ``r``, or None."""
        short = need - (self.cap[r] - self.occ[r])
        if short <= 0:
            return []
        cands = [
            q for q in self.res[r] if q not in keep and not self.pinned[q] and self.busy[q] <= t
        ]
        cands.sort(key=lambda q: (-self.next_level(q), q))
        if len(cands) < short:
            return None
        plan = []
        occ_extra: dict[int, int] = defaultdict(int)
        for q in cands[:short]:
            src = self.loc[q]
            pools = ([self.mem_ids] if self.mem_ids else []) + [self.data_ids]
            dst = None
            for pool in pools:
                ok = [d for d in pool if d != r and self.occ[d] + occ_extra[d] < self.cap[d]]
                if ok:
                    h = int(self.home[q])
                    dst = min(ok, key=lambda d: (0 if d == h else 1, self.L.distance(src, d), d))
                    break
            if dst is None:
                return None
            occ_extra[dst] += 1
            plan.append((q, dst))
        return plan

    def _candidates(self, g) -> list[int]:
        ops = g.operands
        here = [self.loc[q] for q in ops]
        cands: list[int] = []
        counts: dict[int, int] = defaultdict(int)
        for r in here:
            if not self.is_mem[r]:
                counts[r] += 1
        for r in sorted(counts, key=lambda r: (-counts[r], r)):
            cands.append(r)
        for q in ops:
            h = int(self.home[q])
            if not self.is_mem[h] and h not in cands:
                cands.append(h)
        if not cands:
            cands = [min(self.data_ids, key=lambda r: (self.L.distance(here[0], r), r))]
        if (
            g.kind is GateKind.T
            and self.cfg.policy is NonTransversalPolicy.DESIGNATED_SITES
            and self.t_sites
        ):
            sites = [r for r in cands if r in self.t_sites]
            if not sites:
                sites = [min(self.t_sites, key=lambda s: (self.L.distance(cands[0], s), s))]
            cands = sites
        return cands

    def _stage(self, gid: int, t: float) -> int | None:
        g = self.c.gates[gid]
        for r in self._candidates(g):
            incoming = [q for q in g.operands if self.loc[q] != r]
            plan = self._free_slots(r, len(incoming), set(g.operands), t)
            if plan is None:
                continue
            for q, dst in plan:
                self._teleport(q, dst, t, "evict")
            for q in incoming:
                self._teleport(q, r, t, "operand")
            for q in g.operands:
                self.pinned[q] = True
            return r
        return None

    def _ancilla(self, g, r: int, t: float) -> float:
        """Time the gate's ancillas are available; records demand."""
        kind = g.kind
        zero = 2 if kind is GateKind.CORRECT else 0
        tblk = {GateKind.T: 1, GateKind.TOFFOLI: 7}.get(kind, 0)
        if not zero and not tblk:
            return t
        self.demand.append((t, r, zero, tblk))
        if not self.fixed:
            return t
        return self.fact[r].take(t, zero + ZERO_BLOCKS_PER_T_FIXED * tblk)

    def _start(self, gid: int, r: int, t: float, events):
        g = self.c.gates[gid]
        ready = self._ancilla(g, r, t)
        if ready == INF:
            raise MapError(f"region {r} has no ancilla generators for gate {gid}", t)
        stall = ready - t
        dur = self.dur[gid] + stall
        self.gates[gid] = GateRecord(r, t, float(dur), float(stall))
        self.running[r] += 1
        end = t + dur
        for q in g.operands:
            self.busy[q] = end
            self.pinned[q] = False
            self.chain_pos[q] += 1
        heapq.heappush(events, (end, gid))

    def run(self) -> None:
        c = self.c
        n = c.n_gates
        npred = np.count_nonzero(self.dag.pred >= 0, axis=1).astype(np.int64) if n else np.zeros(0)
        ready: list[tuple[float, int]] = [(-self.prio[g], g) for g in range(n) if npred[g] == 0]
        heapq.heapify(ready)
        staged: dict[int, int] = {}
        events: list[tuple[float, int]] = []
        t = 0.0
        done = 0
        while done < n:
            while events and events[0][0] <= t:
                _, gid = heapq.heappop(events)
                done += 1
                self.running[self.gates[gid].region] -= 1
                if self.mem_ids:
                    self._maybe_relocate(gid, t)
                for s in self.dag.succ[gid]:
                    if s < 0:
                        continue
                    npred[s] -= 1
                    if npred[s] == 0:
                        heapq.heappush(ready, (-self.prio[s], int(s)))
            # staged gates whose operands have arrived
            for gid in sorted(staged, key=lambda g: (-self.prio[g], g)):
                r = staged[gid]
                ops = c.gates[gid].operands
                if all(self.busy[q] <= t for q in ops) and self.running[r] < self.units[r]:
                    del staged[gid]
                    self._start(gid, r, t, events)
            # newly ready gates, highest remaining path first
            waiting = []
            while ready:
                item = heapq.heappop(ready)
                gid = item[1]
                ops = c.gates[gid].operands
                if any(self.busy[q] > t for q in ops):
                    waiting.append(item)
                    continue
                r = self._stage(gid, t)
                if r is None:
                    waiting.append(item)
                    continue
                if all(self.busy[q] <= t for q in ops) and self.running[r] < self.units[r]:
                    self._start(gid, r, t, events)
                else:
                    staged[gid] = r
            for item in waiting:
                heapq.heappush(ready, item)
            # advance the clock
            nxt = [e[0] for e in events[:1]]
            nxt += [self.busy[q] for gid in staged for q in c.gates[gid].operands if self.busy[q] > t]
            nxt += [self.busy[c.gates[item[1]].operands[k]] for item in ready
                    for k in range(len(c.gates[item[1]].operands))
                    if self.busy[c.gates[item[1]].operands[k]] > t]
            if not nxt:
                if done < n:
                    raise MapError("deadlock: no gate can be placed (region capacity exhausted)", t)
                break
            t = min(nxt)
        end = max((g.end for g in self.gates if g), default=0.0)
        for q in range(c.n_qubits):
            self.residency[q][-1] = self.residency[q][-1] + (max(self.busy[q], end),)

    def _static_gaps(self) -> None:
        """Predicted idle time after each gate per operand, from an unconstrained ASAP schedule."""
        n = self.c.n_gates
        est = np.zeros(n)
        for g in range(n):
            best = 0.0
            for p in self.dag.pred[g]:
                if p >= 0:
                    best = max(best, est[p] + self.dur[p])
            est[g] = best
        self.est = est

    def _maybe_relocate(self, gid: int, t: float):
        """After gate ``gid`` ends at ``t``, park operands whose next use is far off."""
        for q in self.c.gates[gid].operands:
            i = self.chain_pos[q]
            ch = self.chains[q]
            if i >= len(ch):
                continue
            gap = self.est[ch[i]] - (self.est[gid] + self.dur[gid])
            if gap < self.reloc_after or self.is_mem[self.loc[q]]:
                continue
            dst = [m for m in self.mem_ids if self.occ[m] < self.cap[m]]
            if not dst:
                return
            d = min(dst, key=lambda m: (self.L.distance(self.loc[q], m), m))
            self._teleport(q, d, t, "relocate")


def _memory_corrections(residency, layout: RegionLayout, tech: TechModel):
    """Idle-memory corrections: one per ``p_1q / p_idle`` µs of memory residency."""
    es = tech.errors
    if es.p_idle <= 0:
        return []
    period = es.p_1q / es.p_idle
    out = []
    for q, ivs in enumerate(residency):
        for r, t0, t1 in ivs:
            if layout.regions[r].kind is not RegionKind.MEMORY:
                continue
            k = 1
            while t0 + k * period <= t1:
                out.append((q, r, t0 + k * period))
                k += 1
    return out


def schedule(
    c: Circuit,
    layout: RegionLayout,
    assignment: Assignment | None = None,
    tech: TechModel | None = None,
    router_capacity=None,
) -> MappedSchedule:
    """List-schedule ``c`` on ``layout``; see the module docstring."""
    tech = tech or TechModel()
    asg = assignment or partition(c, layout)
    cap = list(router_capacity if router_capacity is not None else layout.router_capacity)
    sch = _Scheduler(c, layout, asg, tech, cap)
    sch.run()
    res = [[tuple(iv) for iv in ivs] for ivs in sch.residency]
    mem = _memory_corrections(res, layout, tech)
    for q, r, tm in mem:
        sch.demand.append((tm, r, 2, 0))
    sch.demand.sort()
    return MappedSchedule(c, layout, asg, list(sch.gates), sch.moves, res, sch.demand, sch.conns, mem)


# ---------------------------------------------------------------------------
# sizing


def router_peaks(s: MappedSchedule) -> list[int]:
    """Peak concurrent connections (traversing or terminating) per router."""
    n = s.layout.n_regions
    ev: list[list[tuple[float, int]]] = [[] for _ in range(n)]
    for cn in s.connections:
        for r in cn.routers:
            ev[r].append((cn.start, 1))
            ev[r].append((cn.end, -1))
    peaks = []
    for lst in ev:
        lst.sort(key=lambda e: (e[0], e[1]))  # releases before acquisitions at equal times
        cur = best = 0
        for _, d in lst:
            cur += d
            best = max(best, cur)
        peaks.append(best)
    return peaks


def size_network(s: MappedSchedule, tech: TechModel | None = None, aggressiveness: float | None = None) -> NetworkSizing:
    """Router peaks and provisioned capacities (Qalypso: scaled peak; others: fixed)."""
    tech = tech or TechModel()
    cfg = s.layout.config
    a = cfg.net_aggressiveness if aggressiveness is None else aggressiveness
    peaks = router_peaks(s)
    if cfg.kind is DatapathKind.QALYPSO:
        cap = [math.ceil(a * p - 1e-9) if p else 0 for p in peaks]
    else:
        cap = [tech.router.fixed_capacity] * len(peaks)
    return NetworkSizing(tuple(peaks), tuple(cap), tuple(tech.router.area(k) for k in cap))


def peak_rate(times_counts: list[tuple[float, int]], window: float) -> float:
    """Largest number of blocks consumed in any window of ``window`` µs, per µs."""
    if not times_counts:
        return 0.0
    ts = sorted(times_counts)
    best = 0
    j = 0
    acc = 0
    for i in range(len(ts)):
        acc += ts[i][1]
        while ts[i][0] - ts[j][0] >= window:
            acc -= ts[j][1]
            j += 1
        best = max(best, acc)
    return best / window


def size_ancilla(s: MappedSchedule, tech: TechModel | None = None) -> tuple[list[int], list[int]]:
    """Zero- and T-factory counts per region for Qalypso, from peak demand.

    Demand is measured over sliding windows one factory latency long; the
    count is the ceiling of peak rate over factory throughput.
    """
    tech = tech or TechModel()
    L = s.layout
    if L.config.kind is not DatapathKind.QALYPSO:
        raise ValueError("ancilla sizing applies to Qalypso layouts")
    zf = L.zero_factory
    tf = L.t_factory
    zero = [[] for _ in L.regions]
    tblk = [[] for _ in L.regions]
    for tm, r, z, tb in s.ancilla_demand:
        if z:
            zero[r].append((tm, z))
        if tb:
            tblk[r].append((tm, tb))
    zc = [math.ceil(peak_rate(d, zf.latency_us) / zf.throughput_per_us - 1e-9) for d in zero]
    tc = [math.ceil(peak_rate(d, tf.latency_us) / tf.throughput_per_us - 1e-9) for d in tblk]
    return zc, tc


def map_circuit(c: Circuit, layout: RegionLayout, tech: TechModel | None = None) -> tuple[MappedSchedule, RegionLayout, NetworkSizing]:
    """Full mapping: schedule, then for Qalypso size routers (two passes) and factories.

    Returns the final schedule, the layout with sized resources, and the
    network sizing.
    """
    tech = tech or TechModel()
    asg = partition(c, layout)
    if layout.config.kind is DatapathKind.QALYPSO:
        first = schedule(c, layout, asg, tech, router_capacity=[10**9] * layout.n_regions)
        net = size_network(first, tech)
        cap = [max(1, k) for k in net.capacity]
        s = schedule(c, layout, asg, tech, router_capacity=cap)
        zc, tc = size_ancilla(s, tech)
        peaks = router_peaks(s)
        net = NetworkSizing(tuple(peaks), tuple(net.capacity), tuple(tech.router.area(k) for k in net.capacity))
        sized = layout.resized(zc, tc, list(net.capacity))
        s.layout = sized
        return s, sized, net
    s = schedule(c, layout, asg, tech)
    net = size_network(s, tech)
    return s, layout, net


# ---------------------------------------------------------------------------
# validation


def validate_schedule(s: MappedSchedule) -> list[str]:
    """Check DAG order, co-location, occupancy and residency invariants; returns problems."""
    c = s.circuit
    L = s.layout
    errs: list[str] = []
    eps = 1e-9
    dag = build_dag(c)
    for g in range(c.n_gates):
        rec = s.gates[g]
        if rec is None:
            errs.append(f"gate {g} unscheduled")
            continue
        for p in dag.pred[g]:
            if p >= 0 and s.gates[p].end > rec.start + eps:
                errs.append(f"gate {g} starts before predecessor {p} ends")
    for q, ivs in enumerate(s.residency):
        for (r0, a0, b0), (r1, a1, b1) in zip(ivs, ivs[1:]):
            if a1 < b0 - eps:
                errs.append(f"qubit {q} in two places at t={a1}")
    for g in c.gates:
        rec = s.gates[g.id]
        if rec is None:
            continue
        for q in g.operands:
            ok = any(r == rec.region and a <= rec.start + eps and rec.end <= b + eps for r, a, b in s.residency[q])
            if not ok:
                errs.append(f"gate {g.id} operand {q} not resident in region {rec.region}")
            for mv in s.moves:
                if mv.qubit == q and mv.depart < rec.end - eps and mv.arrive > rec.start + eps:
                    errs.append(f"qubit {q} moves during gate {g.id}")
    for r in L.regions:
        ev = []
        for ivs in s.residency:
            for rr, a, b in ivs:
                if rr == r.index and b > a:
                    ev.append((a, 1))
                    ev.append((b, -1))
        ev.sort(key=lambda e: (e[0], e[1]))
        cur = 0
        for tm, d in ev:
            cur += d
            if cur > r.slots:
                errs.append(f"region {r.index} over capacity at t={tm}")
                break
    if L.config.M == 0 and any(m.reason == "relocate" for m in s.moves):
        errs.append("memory relocation without memory regions")
    if L.config.kind is DatapathKind.QALYPSO and s.total_stall > 0:
        errs.append("ancilla stalls on Qalypso")
    return errs
