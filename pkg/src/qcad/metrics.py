"""Area, latency, success probability, ADCR and report emission."""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .datapath import AREA_CATEGORIES, AreaParts, RegionLayout, layout_area
from .mapper import ZERO_BLOCKS_PER_T_FIXED
from .tech import TechModel

CSV_HEADER = (
    "config",
    "area_mb",
    "area_mm2",
    "latency_us",
    "p_success",
    "adcr",
    "share_data",
    "share_memory",
    "share_qec",
    "share_t",
    "share_network",
)


def adcr(area: float, latency: float, p_success: float) -> float:
    """Area x latency / P_success: expected area-time until a correct run.

    Repeating a run until it succeeds takes L/p on average (geometric number
    of attempts).  ``p_success == 0`` gives ``inf``.
    """
    if not 0.0 <= p_success <= 1.0:
        raise ValueError(f"p_success={p_success} outside [0, 1]")
    if area < 0 or latency < 0:
        raise ValueError("area and latency must be non-negative")
    if p_success == 0.0:
        return math.inf
    return area * latency / p_success


@dataclass(frozen=True)
class Metrics:
    config: str
    area_mb: float
    area_mm2: float
    latency_us: float
    p_success: float
    ci_low: float
    ci_high: float
    trials: int
    breakdown: dict[str, float]
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.area_mb > 0:
            total = sum(self.breakdown.values())
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"area shares sum to {total}, not 1")

    @property
    def adcr(self) -> float:
        return adcr(self.area_mb, self.latency_us, self.p_success)

    def as_dict(self) -> dict:
        d = {
            "config": self.config,
            "area_mb": self.area_mb,
            "area_mm2": self.area_mm2,
            "latency_us": self.latency_us,
            "p_success": self.p_success,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "trials": self.trials,
            "adcr": _finite(self.adcr),
            "breakdown": dict(self.breakdown),
        }
        d.update(self.extra)
        return d

    def csv_row(self) -> list:
        return [
            self.config,
            self.area_mb,
            self.area_mm2,
            self.latency_us,
            self.p_success,
            _finite(self.adcr),
            *(self.breakdown.get(k, 0.0) for k in AREA_CATEGORIES),
        ]


def _finite(x: float):
    return "inf" if math.isinf(x) else x


def shares(parts: AreaParts) -> dict[str, float]:
    total = parts.total
    if total <= 0:
        return {k: 0.0 for k in AREA_CATEGORIES}
    d = parts.as_dict()
    return {k: d[k] / total for k in AREA_CATEGORIES}


def split_fixed_generators(parts: AreaParts, schedule) -> AreaParts:
    """Fixed-ancilla datapaths make T ancillas with their zero generators.

    Generator area is split between the QEC and T categories in proportion
    to the blocks each consumed over the run.
    """
    zero = sum(z for _, _, z, _ in schedule.ancilla_demand)
    tblk = ZERO_BLOCKS_PER_T_FIXED * sum(tb for _, _, _, tb in schedule.ancilla_demand)
    if zero + tblk == 0:
        return parts
    moved = parts.qec * tblk / (zero + tblk)
    return dataclasses.replace(parts, qec=parts.qec - moved, t=parts.t + moved)


def measure(schedule, layout: RegionLayout, sim, tech: TechModel | None = None, extra: dict | None = None) -> Metrics:
    """Metrics of a mapped run: sized-layout area, schedule makespan, simulated success."""
    tech = tech or TechModel()
    parts = layout_area(layout, tech)
    if layout.config.kind.fixed_ancilla:
        parts = split_fixed_generators(parts, schedule)
    return Metrics(
        config=layout.config.label(),
        area_mb=parts.total,
        area_mm2=tech.geometry.mm2(parts.total),
        latency_us=schedule.makespan,
        p_success=sim.p_success,
        ci_low=sim.ci_low,
        ci_high=sim.ci_high,
        trials=sim.trials,
        breakdown=shares(parts),
        extra=dict(extra or {}),
    )


def find_knee(xs, ys) -> int | None:
    """Index of the knee of a decreasing cost curve ``ys`` over a resource axis ``xs``.

    Both axes are scaled to [0, 1]; with ``f`` the fraction of the total
    improvement reached at each point, the knee maximizes ``f - x`` (the
    Kneedle difference curve).  Resource sweeps over doublings should pass
    ``log2`` of the resource.  Returns None for flat or too-short curves.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.size < 3 or x.size != y.size:
        return None
    order = np.argsort(x)
    x, y = x[order], y[order]
    span_x, drop = x[-1] - x[0], y[0] - y.min()
    if span_x <= 0 or drop <= 0:
        return None
    diff = (y[0] - y) / drop - (x - x[0]) / span_x
    k = int(np.argmax(diff))
    return int(order[k]) if diff[k] > 0 else None


def emit_report(metrics, fmt: str = "json", header: dict | None = None) -> str:
    """JSON (object with ``rows``) or CSV (fixed header) text for one or more Metrics."""
    rows = [metrics] if isinstance(metrics, Metrics) else list(metrics)
    if fmt == "json":
        doc = dict(header or {})
        doc["rows"] = [m.as_dict() for m in rows]
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for m in rows:
            w.writerow(m.csv_row())
        return buf.getvalue()
    raise ValueError(f"unknown report format {fmt!r}")
