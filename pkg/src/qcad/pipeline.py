"""End-to-end evaluation: map, size, build the error trace, simulate, measure.

Also hosts the ADCR-optimal configuration search and the success-probability
evaluator that threshold tuning calls back into.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

from .adders import AdderSpec, gen_adder
from .circuit import Circuit, decompose_toffoli
from .datapath import DatapathConfig, DatapathKind, instantiate
from .errorsim import McResult, build_error_trace, mc_run
from .mapper import MapError, MappedSchedule, NetworkSizing, map_circuit
from .metrics import Metrics, measure
from .qec import (
    CorrectionPlacement,
    EDistConfig,
    TuneMode,
    apply_placement,
    every_gate_placement,
    insert_corrections,
    tune_threshold,
)
from .tech import TechModel

DEFAULT_TRIALS = 2000


@dataclass
class Evaluation:
    config: DatapathConfig
    metrics: Metrics
    schedule: MappedSchedule
    network: NetworkSizing
    sim: McResult

    @property
    def adcr(self) -> float:
        return self.metrics.adcr


def qalypso_config(n_qubits: int, D: int, M: int = 0, aggressiveness: float = 1.0, **free) -> DatapathConfig:
    """Qalypso config whose data regions together hold every qubit plus two spare slots each.

    With memory regions, half of the qubits are expected to rest in memory, so
    data regions shrink accordingly.
    """
    if M:
        dq = math.ceil(n_qubits / (2 * D)) + 2
        mq = math.ceil(n_qubits / M) + 2
        free.setdefault("Mq", mq)
    else:
        dq = math.ceil(n_qubits / D) + 2
    free.setdefault("Dq", dq)
    return DatapathConfig.for_kind(DatapathKind.QALYPSO, D, M, net_aggressiveness=aggressiveness, **free)


def config_for(kind: DatapathKind | str, n_qubits: int, D: int, M: int = 0, aggressiveness: float = 1.0) -> DatapathConfig:
    kind = DatapathKind.parse(kind) if isinstance(kind, str) else kind
    if kind is DatapathKind.QALYPSO:
        return qalypso_config(n_qubits, D, M, aggressiveness)
    return DatapathConfig.for_kind(kind, D, M)


def evaluate(
    c: Circuit,
    cfg: DatapathConfig,
    tech: TechModel | None = None,
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    workers: int = 1,
) -> Evaluation:
    """Map ``c`` (corrections already inserted) onto ``cfg`` and measure it.

    Raises MapError when the circuit does not fit or the scheduler deadlocks.
    """
    tech = tech or TechModel()
    layout = instantiate(cfg, tech)
    s, sized, net = map_circuit(c, layout, tech)
    sim = mc_run(build_error_trace(s, tech), trials, seed, workers=workers)
    m = measure(s, sized, sim, tech, extra={"stall_us": s.total_stall, "teleports": s.n_teleports})
    return Evaluation(cfg, m, s, net, sim)


def success_evaluator(
    c: Circuit,
    cfg: DatapathConfig,
    tech: TechModel | None = None,
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
) -> Callable[[CorrectionPlacement], float]:
    """Placement -> mapped Monte Carlo success probability (for threshold tuning).

    A placement that cannot be mapped scores 0.
    """

    def run(p: CorrectionPlacement) -> float:
        try:
            return evaluate(apply_placement(c, p), cfg, tech, trials, seed).sim.p_success
        except MapError:
            return 0.0

    return run


@dataclass
class SearchResult:
    best: Evaluation
    table: list[tuple[DatapathConfig, Metrics | None, str | None]] = field(default_factory=list)

    @property
    def failures(self) -> int:
        return sum(1 for _, m, _ in self.table if m is None)


def sweep_configs(
    kind: DatapathKind | str,
    n_qubits: int,
    Ds: Iterable[int],
    Ms: Iterable[int] = (0,),
    aggressiveness: Iterable[float] = (1.0,),
) -> list[DatapathConfig]:
    """Every valid config in the cross product; fixed datapaths ignore aggressiveness."""
    kind = DatapathKind.parse(kind) if isinstance(kind, str) else kind
    aggr = list(aggressiveness) if kind is DatapathKind.QALYPSO else [1.0]
    out, seen = [], set()
    for D, M, a in itertools.product(Ds, Ms, aggr):
        cfg = config_for(kind, n_qubits, D, M, a)
        if cfg in seen:
            continue
        seen.add(cfg)
        out.append(cfg)
    return out


def adcr_search(
    c: Circuit,
    configs: Sequence[DatapathConfig],
    evaluator: Callable[[Circuit, DatapathConfig], Evaluation] | None = None,
    tech: TechModel | None = None,
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
) -> SearchResult:
    """Evaluate every config and return the minimum-ADCR one plus the full table.

    Points that fail to map are kept in the table with their error message.
    Ties go to the earlier config.  Raises MapError if nothing maps.
    """
    if not configs:
        raise ValueError("empty sweep")
    if evaluator is None:
        def evaluator(circ, cfg):
            return evaluate(circ, cfg, tech, trials, seed)
    best: Evaluation | None = None
    table = []
    for cfg in configs:
        try:
            ev = evaluator(c, cfg)
        except MapError as e:
            table.append((cfg, None, str(e)))
            continue
        table.append((cfg, ev.metrics, None))
        if best is None or ev.adcr < best.adcr:
            best = ev
    if best is None:
        raise MapError("no configuration in the sweep could be mapped")
    return SearchResult(best, table)


def prepare(c: Circuit) -> Circuit:
    """Logical circuit ready for correction placement: Toffolis expanded."""
    return decompose_toffoli(c)


# ---------------------------------------------------------------------------
# correction placement choices


@dataclass(frozen=True)
class QecChoice:
    """How corrections are placed: every gate, a fixed EDist threshold, or tuned.

    ``mode`` is "every-gate", "edist" (with ``threshold``), "auto-5pct",
    "max-success" or "budget" (with ``budget``).
    """

    mode: str = "auto-5pct"
    threshold: int | None = None
    budget: int | None = None

    @classmethod
    def parse(cls, word: str) -> "QecChoice":
        if word in ("every", "every-gate", "uec"):
            return cls("every-gate")
        if word in ("auto", "auto-5pct", "oec"):
            return cls("auto-5pct")
        if word == "max-success":
            return cls("max-success")
        if word.startswith("budget:"):
            return cls("budget", budget=int(word.split(":", 1)[1]))
        if word.isdigit():
            return cls("edist", threshold=int(word))
        raise ValueError(f"unknown QEC choice {word!r}")

    def label(self) -> str:
        if self.mode == "edist":
            return f"T{self.threshold}"
        if self.mode == "budget":
            return f"budget{self.budget}"
        return self.mode


@dataclass
class Placement:
    placement: CorrectionPlacement
    threshold: int | None
    p_tuned: float | None = None
    p_every_gate: float | None = None


def place_corrections(
    c: Circuit,
    choice: QecChoice,
    tune_cfg: DatapathConfig | None = None,
    tech: TechModel | None = None,
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
) -> Placement:
    """Correction placement for ``c`` (Toffoli-free) under ``choice``.

    Tuned modes score placements with the mapped Monte Carlo evaluator on
    ``tune_cfg`` (default: a four-region Qalypso).
    """
    if choice.mode == "every-gate":
        return Placement(every_gate_placement(c), None)
    if choice.mode == "edist":
        return Placement(insert_corrections(c, EDistConfig(choice.threshold, 1, 0)), choice.threshold)
    cfg = tune_cfg or qalypso_config(c.n_qubits, 4)
    ev = success_evaluator(c, cfg, tech, trials, seed)
    mode = {"auto-5pct": TuneMode.WITHIN_5PCT, "max-success": TuneMode.MAX_SUCCESS, "budget": TuneMode.BUDGET}[choice.mode]
    res = tune_threshold(c, mode, ev, budget=choice.budget)
    return Placement(res.placement, res.threshold, res.p_success, res.p_every_gate)


# ---------------------------------------------------------------------------
# adders


@dataclass
class AdderDesign:
    spec: AdderSpec
    qec: QecChoice
    logical: Circuit
    placement: Placement
    search: SearchResult

    @property
    def best(self) -> Evaluation:
        return self.search.best


def design_adder(
    spec,
    qec: QecChoice,
    kind: DatapathKind | str = DatapathKind.QALYPSO,
    Ds: Iterable[int] = (2, 4, 8),
    Ms: Iterable[int] = (0,),
    tech: TechModel | None = None,
    trials: int = DEFAULT_TRIALS,
    seed: int = 0,
) -> AdderDesign:
    """ADCR-optimal mapping of one adder: expand Toffolis, place corrections, sweep."""
    tech = tech or TechModel()
    logical = prepare(gen_adder(spec))
    pl = place_corrections(logical, qec, None, tech, trials, seed)
    c = apply_placement(logical, pl.placement)
    configs = sweep_configs(kind, c.n_qubits, Ds, Ms)
    search = adcr_search(c, configs, tech=tech, trials=trials, seed=seed)
    return AdderDesign(spec, qec, logical, pl, search)
