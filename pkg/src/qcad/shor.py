"""Resource estimates for Shor's factoring built from mapped adder designs.

Modular exponentiation is counted as ``2n`` controlled modular
multiplications, each made of ``n`` controlled modular additions of five
adder calls, plus one comparator adder per multiplication.  The QFT is
banded to ``ceil(log2(2n))`` controlled rotations per qubit.

Up to :data:`MAX_MAPPED_BITS` the adder itself is mapped and simulated.  Above
that the adder's latency and area are extrapolated from the largest mapped
size (estimate mode); those numbers depend on calibration and are labelled so.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

from .adders import AdderKind, AdderSpec, gen_adder
from .circuit import Circuit, GateKind
from .dag import build_dag
from .datapath import DatapathKind
from .pipeline import AdderDesign, QecChoice, design_adder, prepare
from .qec import DEFAULT_CORRECTION_OPS, EDistConfig, apply_placement, every_gate_placement, insert_corrections
from .tech import TechModel, toffoli_latency

MAX_MAPPED_BITS = 64


@dataclass(frozen=True)
class ShorSpec:
    n: int
    adder: AdderSpec
    qec: QecChoice = QecChoice("auto-5pct")

    def __post_init__(self):
        if self.n < 4 or self.n & (self.n - 1):
            raise ValueError(f"n must be a power of two >= 4, got {self.n}")
        if self.adder.n != self.n:
            raise ValueError(f"adder width {self.adder.n} differs from n={self.n}")

    @classmethod
    def of(cls, n: int, kind: AdderKind | str = AdderKind.QCLA, m: int = 4, qec: QecChoice | str = "auto") -> "ShorSpec":
        qec = QecChoice.parse(qec) if isinstance(qec, str) else qec
        return cls(n, AdderSpec(AdderKind(kind) if isinstance(kind, str) else kind, n, min(m, n)), qec)


@dataclass(frozen=True)
class ShorConstants:
    adders_per_modular_add: int = 5
    comparator_adders_per_mult: int = 1
    #: Clifford+T gates approximating one small-angle rotation
    rotation_gates: int = 30


# ---------------------------------------------------------------------------
# structure


def modexp_calls(n: int, k: ShorConstants = ShorConstants()) -> list[tuple[int, int, str]]:
    """Explicit list of adder calls as (multiplication, addition, role).

    Addition index -1 marks the comparator call that closes a multiplication.
    """
    roles = ("add", "sub-modulus", "add-modulus", "sub", "add-restore")[: k.adders_per_modular_add]
    calls = []
    for i in range(2 * n):
        for j in range(n):
            calls.extend((i, j, r) for r in roles)
        calls.extend((i, -1, "compare") for _ in range(k.comparator_adders_per_mult))
    return calls


def adder_calls(n: int, k: ShorConstants = ShorConstants()) -> int:
    """Closed form of ``len(modexp_calls(n))``: 10n^2 + 2n with the defaults."""
    return 2 * n * (n * k.adders_per_modular_add + k.comparator_adders_per_mult)


def glue_counts(n: int) -> dict[GateKind, int]:
    """Non-adder modular-exponentiation gates after Toffoli expansion.

    Per modular addition: controlled load and unload of the addend (2n
    Toffolis), conditional modulus load and unload (2n CNOTs) and the
    comparator bit copy (2 CNOTs, 2 Xs).  Per multiplication: a controlled
    copy of the input register (n Toffolis).
    """
    adds = 2 * n * n
    toffolis = adds * 2 * n + 2 * n * n
    counts = {GateKind.CNOT: adds * (2 * n + 2), GateKind.X: adds * 2}
    for kind, cnt in _TOFFOLI_KINDS.items():
        counts[kind] = counts.get(kind, 0) + cnt * toffolis
    return counts


# Gate kinds of one expanded Toffoli: 6 CNOT, 7 T/Tdag, 2 H.
_TOFFOLI_KINDS = {GateKind.CNOT: 6, GateKind.T: 7, GateKind.H: 2}


def qft_rotations(width: int) -> int:
    band = max(1, math.ceil(math.log2(width)))
    return sum(min(band, width - 1 - i) for i in range(width))


def qft_counts(n: int, k: ShorConstants = ShorConstants()) -> dict[GateKind, int]:
    """Banded QFT on the 2n-qubit exponent register.

    A controlled rotation is two CNOTs around three single-qubit rotations;
    each rotation is a Clifford+T sequence of ``rotation_gates`` (half T).
    """
    width = 2 * n
    rot = qft_rotations(width)
    seq = 3 * rot * k.rotation_gates
    return {GateKind.H: width + seq - seq // 2, GateKind.CNOT: 2 * rot, GateKind.T: seq // 2}


def _arity_sum(counts: dict[GateKind, int]) -> int:
    return sum(k.arity * v for k, v in counts.items())


# ---------------------------------------------------------------------------
# estimates


@dataclass
class ShorEstimate:
    n: int
    adder: str
    qec: str
    mode: str  # "mapped" or "estimate"
    threshold: int | None
    adder_calls: int
    adder_gates: int
    adder_corrections: int
    logical_modexp: int
    logical_qft: int
    ops_modexp: float
    ops_qft: float
    latency_us: float
    area_mb: float
    area_mm2: float
    qubits: int
    p_adder: float
    notes: list[str] = field(default_factory=list)

    @property
    def logical_total(self) -> int:
        return self.logical_modexp + self.logical_qft

    @property
    def ops_total(self) -> float:
        return self.ops_modexp + self.ops_qft

    @property
    def qft_share(self) -> float:
        return self.ops_qft / self.ops_total

    @property
    def latency_s(self) -> float:
        return self.latency_us * 1e-6

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "adder": self.adder,
            "qec": self.qec,
            "mode": self.mode,
            "calibration_dependent": self.mode == "estimate",
            "threshold": self.threshold,
            "adder_calls": self.adder_calls,
            "adder_gates": self.adder_gates,
            "adder_corrections": self.adder_corrections,
            "logical_ops": self.logical_total,
            "physical_ops": self.ops_total,
            "qft_share": self.qft_share,
            "latency_us": self.latency_us,
            "latency_s": self.latency_s,
            "area_mb": self.area_mb,
            "area_mm2": self.area_mm2,
            "qubits": self.qubits,
            "p_adder": self.p_adder,
            "notes": list(self.notes),
        }


def _placement_for(c: Circuit, qec: QecChoice, threshold: int | None):
    if qec.mode == "every-gate":
        return every_gate_placement(c)
    return insert_corrections(c, EDistConfig(max(threshold, 2), 1, 0))


def critical_path_us(c: Circuit, tech: TechModel) -> float:
    """Longest gate-latency-weighted path through ``c``."""
    dag = build_dag(c)
    w = [tech.gate_latency(g.kind) for g in c.gates]
    return float(dag.remaining(w).max()) if c.n_gates else 0.0


def gen_shor(
    spec: ShorSpec,
    tech: TechModel | None = None,
    k: ShorConstants = ShorConstants(),
    design: AdderDesign | None = None,
    trials: int = 1000,
    seed: int = 0,
    Ds: Iterable[int] = (2, 4, 8),
) -> ShorEstimate:
    """Resource estimate for factoring an n-bit number on Qalypso.

    ``design`` may supply an already mapped adder of width
    ``min(n, MAX_MAPPED_BITS)`` to avoid recomputing it.
    """
    tech = tech or TechModel()
    n = spec.n
    ref_n = min(n, MAX_MAPPED_BITS)
    ref_spec = AdderSpec(spec.adder.kind, ref_n, min(spec.adder.m, ref_n))
    if design is None:
        design = design_adder(ref_spec, spec.qec, DatapathKind.QALYPSO, Ds, tech=tech, trials=trials, seed=seed)
    best = design.best
    threshold = design.placement.threshold
    notes: list[str] = []

    if n == ref_n:
        logical = design.logical
        placement = design.placement.placement
        lat_add = best.metrics.latency_us
        area_add = best.metrics.area_mb
        mode = "mapped"
    else:
        logical = prepare(gen_adder(spec.adder))
        if spec.qec.mode != "every-gate" and threshold is None:
            threshold = max(build_dag(design.logical).depth(), 2)
        placement = _placement_for(logical, spec.qec, threshold)
        ref_c = apply_placement(design.logical, design.placement.placement)
        big_c = apply_placement(logical, placement)
        lat_add = best.metrics.latency_us * critical_path_us(big_c, tech) / critical_path_us(ref_c, tech)
        area_add = best.metrics.area_mb * logical.n_qubits / design.logical.n_qubits
        mode = "estimate"
        notes.append(f"adder latency and area extrapolated from the mapped {ref_n}-bit design")

    calls = adder_calls(n, k)
    gates = logical.n_gates
    corr = len(placement)
    density = corr / max(1, sum(g.kind.arity for g in logical.gates))
    glue = glue_counts(n)
    qft = qft_counts(n, k)
    glue_corr = _arity_sum(glue) * density
    qft_corr = _arity_sum(qft) * density
    glue_gates = sum(glue.values())
    qft_gates = sum(qft.values())
    ops_modexp = calls * (gates + corr * DEFAULT_CORRECTION_OPS) + glue_gates + glue_corr * DEFAULT_CORRECTION_OPS
    ops_qft = qft_gates + qft_corr * DEFAULT_CORRECTION_OPS

    tof = toffoli_latency(tech)
    glue_lat = 2 * n * n * (2 * tof + 2 * tech.gate_latency(GateKind.CNOT)) + 2 * n * tof
    rot_lat = k.rotation_gates * tech.gate_latency(GateKind.T)
    qft_lat = (2 * n + math.ceil(math.log2(2 * n))) * (3 * rot_lat + 2 * tech.gate_latency(GateKind.CNOT))
    latency = calls * lat_add + glue_lat + qft_lat

    extra_qubits = 3 * n + 2  # exponent register, multiplication target, control and comparator bits
    area = area_add + extra_qubits * tech.geometry.memory_slot_mb
    if mode == "estimate":
        notes.append("calibration-dependent: absolute values follow the default technology constants")
    return ShorEstimate(
        n=n,
        adder=f"{spec.adder.kind.value}-m{spec.adder.m}",
        qec=spec.qec.label(),
        mode=mode,
        threshold=threshold,
        adder_calls=calls,
        adder_gates=gates,
        adder_corrections=corr,
        logical_modexp=calls * gates + glue_gates,
        logical_qft=qft_gates,
        ops_modexp=float(ops_modexp),
        ops_qft=float(ops_qft),
        latency_us=float(latency),
        area_mb=float(area),
        area_mm2=tech.geometry.mm2(area),
        qubits=logical.n_qubits + extra_qubits,
        p_adder=best.metrics.p_success,
        notes=notes,
    )


def shor_sweep(
    ns: Iterable[int],
    adders: Iterable[AdderKind | str] = (AdderKind.QRCA, AdderKind.QCLA),
    qecs: Iterable[str] = ("every-gate", "auto"),
    m: int = 4,
    tech: TechModel | None = None,
    trials: int = 1000,
    seed: int = 0,
) -> list[ShorEstimate]:
    """Estimates for every (adder, qec, n); mapped adders are shared across n."""
    tech = tech or TechModel()
    ns = sorted(ns)
    rows = []
    for kind in adders:
        kind = AdderKind(kind) if isinstance(kind, str) else kind
        for q in qecs:
            choice = QecChoice.parse(q)
            designs: dict[int, AdderDesign] = {}
            for n in ns:
                spec = ShorSpec(n, AdderSpec(kind, n, min(m, n)), choice)
                ref_n = min(n, MAX_MAPPED_BITS)
                if ref_n not in designs:
                    ref = AdderSpec(kind, ref_n, min(m, ref_n))
                    designs[ref_n] = design_adder(ref, choice, DatapathKind.QALYPSO, tech=tech, trials=trials, seed=seed)
                rows.append(gen_shor(spec, tech, design=designs[ref_n], trials=trials, seed=seed))
    return rows
