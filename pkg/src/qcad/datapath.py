"""The five datapath organizations as region catalogs on a 2-D grid."""
from __future__ import annotations

import dataclasses
import enum
import math
from dataclasses import dataclass

from .tech import AncillaFactory, FactoryKind, TechModel


class DatapathKind(enum.Enum):
    QLA = "qla"
    LQLA = "lqla"
    CQLA = "cqla"
    CQLA_PLUS = "cqla+"
    QALYPSO = "qalypso"

    @classmethod
    def parse(cls, word: str) -> "DatapathKind":
        try:
            return cls(word.lower())
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown datapath {word!r}; choose one of {names}") from None

    @property
    def fixed_ancilla(self) -> bool:
        """Whether ancilla generators are fixed per region (and gates may stall on them)."""
        return self is not DatapathKind.QALYPSO


class NonTransversalPolicy(enum.Enum):
    ANYWHERE = "anywhere"
    DESIGNATED_SITES = "designated-sites"


class RegionKind(enum.Enum):
    DATA = "data"
    MEMORY = "memory"


_FACTORY = {
    DatapathKind.QLA: FactoryKind.QLA_BASIC,
    DatapathKind.LQLA: FactoryKind.LQLA_OPTIMIZED,
    DatapathKind.CQLA: FactoryKind.QLA_BASIC,
    DatapathKind.CQLA_PLUS: FactoryKind.QALYPSO_PIPELINED,
    DatapathKind.QALYPSO: FactoryKind.QALYPSO_PIPELINED,
}

# (Dq, Dag, Mq, Mag) fixed by each organization; None marks a free parameter
_FIXED = {
    DatapathKind.QLA: (2, 2, 0, 0),
    DatapathKind.LQLA: (2, 2, 0, 0),
    DatapathKind.CQLA: (36, 36, 64, 8),
    DatapathKind.CQLA_PLUS: (36, 36, 96, 12),
}

QALYPSO_DEFAULTS = dict(Dq=16, Dag=2, Mq=64, Mag=2, Tag=1)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DatapathConfig:
    kind: DatapathKind
    D: int
    M: int = 0
    Dq: int = 2
    Dag: int = 2
    Mq: int = 0
    Mag: int = 0
    #: T-ancilla factories per designated data region (Qalypso only)
    Tag: int = 0
    #: number of data regions hosting T factories; ``None`` means all of them
    t_sites: int | None = None
    net_aggressiveness: float = 1.0

    def __post_init__(self):
        k = self.kind
        if self.D < 1:
            raise ConfigError("a datapath needs at least one data region")
        if self.M < 0 or self.Dq < 1 or self.Dag < 0 or self.Mag < 0 or self.Tag < 0:
            raise ConfigError("region counts and capacities must be non-negative")
        if not 0.0 < self.net_aggressiveness <= 1.0:
            raise ConfigError("network aggressiveness must lie in (0, 1]")
        if k in _FIXED:
            dq, dag, mq, mag = _FIXED[k]
            if (self.Dq, self.Dag) != (dq, dag):
                raise ConfigError(f"{k.value} data regions hold {dq} qubits with {dag} generators")
            if mq == 0 and self.M:
                raise ConfigError(f"{k.value} has no memory regions")
            if self.M and (self.Mq, self.Mag) != (mq, mag):
                raise ConfigError(f"{k.value} memory regions hold {mq} qubits with {mag} generators")
            if self.Tag or self.t_sites is not None:
                raise ConfigError(f"{k.value} runs non-transversal gates anywhere; no T sites")
        else:
            if self.M and self.Mq < 1:
                raise ConfigError("memory regions need capacity")
            if self.t_sites is not None and not 1 <= self.t_sites <= self.D:
                raise ConfigError("t_sites must lie in 1..D")

    @classmethod
    def for_kind(cls, kind: DatapathKind | str, D: int, M: int = 0, **free) -> "DatapathConfig":
        """Config with the organization's fixed region parameters filled in."""
        kind = DatapathKind.parse(kind) if isinstance(kind, str) else kind
        if kind in _FIXED:
            dq, dag, mq, mag = _FIXED[kind]
            return cls(kind, D, M if mq else 0, dq, dag, mq if M else 0, mag if M else 0, **free)
        vals = {**QALYPSO_DEFAULTS, **free}
        return cls(kind, D, M, **vals)

    @property
    def factory_kind(self) -> FactoryKind:
        return _FACTORY[self.kind]

    @property
    def policy(self) -> NonTransversalPolicy:
        if self.kind is DatapathKind.QALYPSO:
            return NonTransversalPolicy.DESIGNATED_SITES
        return NonTransversalPolicy.ANYWHERE

    @property
    def capacity(self) -> int:
        return self.D * self.Dq + self.M * self.Mq

    def replace(self, **kw) -> "DatapathConfig":
        return dataclasses.replace(self, **kw)

    def label(self) -> str:
        s = f"{self.kind.value}-D{self.D}"
        if self.M:
            s += f"-M{self.M}"
        if self.kind is DatapathKind.QALYPSO:
            s += f"-Dq{self.Dq}-a{self.net_aggressiveness:g}"
        return s


@dataclass(frozen=True)
class Region:
    index: int
    kind: RegionKind
    pos: tuple[int, int]
    slots: int
    zero_factories: int
    t_factories: int = 0
    #: router attached to this region (one router per region, same index)
    router: int = -1

    @property
    def is_t_site(self) -> bool:
        return self.t_factories > 0


@dataclass(frozen=True)
class RegionLayout:
    config: DatapathConfig
    regions: tuple[Region, ...]
    rows: int
    cols: int
    zero_factory: AncillaFactory
    t_factory: AncillaFactory | None
    #: provisioned connections per router (area grows with it)
    router_capacity: tuple[int, ...] = ()
    #: ballistic channel length between neighbouring routers, in macroblocks
    link_length: int = 12
    link_turns: int = 1

    @property
    def n_regions(self) -> int:
        return len(self.regions)

    def data_regions(self) -> list[Region]:
        return [r for r in self.regions if r.kind is RegionKind.DATA]

    def memory_regions(self) -> list[Region]:
        return [r for r in self.regions if r.kind is RegionKind.MEMORY]

    def links(self) -> list[tuple[int, int]]:
        """Grid-neighbour router pairs (each is one inter-region channel)."""
        at = {r.pos: r.index for r in self.regions}
        out = []
        for r in self.regions:
            y, x = r.pos
            for nb in ((y, x + 1), (y + 1, x)):
                if nb in at:
                    out.append((r.index, at[nb]))
        return out

    def distance(self, a: int, b: int) -> int:
        (ya, xa), (yb, xb) = self.regions[a].pos, self.regions[b].pos
        return abs(ya - yb) + abs(xa - xb)

    def xy_route(self, a: int, b: int) -> list[int]:
        """Routers visited by dimension-ordered (X then Y) routing, endpoints included."""
        at = {r.pos: r.index for r in self.regions}
        (y, x), (yb, xb) = self.regions[a].pos, self.regions[b].pos
        path = [a]
        while x != xb:
            x += 1 if xb > x else -1
            path.append(_nearest(at, y, x))
        while y != yb:
            y += 1 if yb > y else -1
            path.append(_nearest(at, y, x))
        if path[-1] != b:
            path.append(b)
        return path

    def resized(
        self,
        zero_factories: list[int] | None = None,
        t_factories: list[int] | None = None,
        router_capacity: list[int] | None = None,
    ) -> "RegionLayout":
        regs = list(self.regions)
        for i, r in enumerate(regs):
            kw = {}
            if zero_factories is not None:
                kw["zero_factories"] = int(zero_factories[i])
            if t_factories is not None:
                kw["t_factories"] = int(t_factories[i])
            regs[i] = dataclasses.replace(r, **kw)
        cap = self.router_capacity if router_capacity is None else tuple(int(c) for c in router_capacity)
        return dataclasses.replace(self, regions=tuple(regs), router_capacity=cap)


def _nearest(at, y, x):
    # the last grid row may be partially filled; step onto the closest present cell
    if (y, x) in at:
        return at[(y, x)]
    return min(at.items(), key=lambda kv: (abs(kv[0][0] - y) + abs(kv[0][1] - x), kv[1]))[1]


def grid_shape(n: int) -> tuple[int, int]:
    """Rows and columns of the squarest row-major grid holding n cells."""
    cols = math.ceil(math.sqrt(n))
    rows = math.ceil(n / cols)
    return rows, cols


def instantiate(cfg: DatapathConfig, tech: TechModel | None = None) -> RegionLayout:
    """Place data regions then memory regions row-major on a square-ish grid."""
    tech = tech or TechModel()
    n = cfg.D + cfg.M
    rows, cols = grid_shape(n)
    qalypso = cfg.kind is DatapathKind.QALYPSO
    sites = cfg.D if cfg.t_sites is None else cfg.t_sites
    regions = []
    for i in range(n):
        pos = (i // cols, i % cols)
        if i < cfg.D:
            tf = cfg.Tag if qalypso and i < sites else 0
            regions.append(Region(i, RegionKind.DATA, pos, cfg.Dq, cfg.Dag, tf, i))
        else:
            regions.append(Region(i, RegionKind.MEMORY, pos, cfg.Mq, cfg.Mag, 0, i))
    fk = cfg.factory_kind
    cap = tuple([tech.router.fixed_capacity] * n)
    return RegionLayout(
        cfg,
        tuple(regions),
        rows,
        cols,
        tech.factory(fk),
        tech.factory(fk, t_ancilla=True) if qalypso else None,
        cap,
        tech.router.hop_straights,
        tech.router.hop_turns,
    )


AREA_CATEGORIES = ("data", "memory", "qec", "t", "network")


@dataclass(frozen=True)
class AreaParts:
    data: float = 0.0
    memory: float = 0.0
    qec: float = 0.0
    t: float = 0.0
    network: float = 0.0

    @property
    def total(self) -> float:
        return self.data + self.memory + self.qec + self.t + self.network

    def __add__(self, o: "AreaParts") -> "AreaParts":
        return AreaParts(*(a + b for a, b in zip(dataclasses.astuple(self), dataclasses.astuple(o))))

    def as_dict(self) -> dict[str, float]:
        return dataclasses.asdict(self)


def region_area(r: Region, layout: RegionLayout, tech: TechModel | None = None) -> AreaParts:
    """Area of one region without its router: slots plus attached factories.

    Memory-region factories count as QEC ancilla, not memory.
    """
    tech = tech or TechModel()
    g = tech.geometry
    zero = r.zero_factories * layout.zero_factory.area_mb
    t = r.t_factories * (layout.t_factory.area_mb if layout.t_factory else 0.0)
    if r.kind is RegionKind.DATA:
        return AreaParts(data=r.slots * g.data_slot_mb, qec=zero, t=t)
    return AreaParts(memory=r.slots * g.memory_slot_mb, qec=zero, t=t)


def router_area(layout: RegionLayout, tech: TechModel | None = None) -> list[float]:
    """Per-region router area; a single region has nothing to route between and gets none."""
    tech = tech or TechModel()
    if len(layout.regions) == 1:
        return [0.0]
    return [tech.router.area(c) for c in layout.router_capacity]


def channel_area(layout: RegionLayout, tech: TechModel | None = None) -> float:
    tech = tech or TechModel()
    return len(layout.links()) * tech.geometry.channel_mb


def layout_area(layout: RegionLayout, tech: TechModel | None = None) -> AreaParts:
    """Total area by category: regions, routers and inter-region channels."""
    tech = tech or TechModel()
    parts = AreaParts()
    for r in layout.regions:
        parts = parts + region_area(r, layout, tech)
    net = sum(router_area(layout, tech)) + channel_area(layout, tech)
    return parts + AreaParts(network=net)


@dataclass(frozen=True)
class Rect:
    name: str
    x: float
    y: float
    w: float
    h: float

    @property
    def area(self) -> float:
        return self.w * self.h

    def overlaps(self, o: "Rect", eps: float = 1e-9) -> bool:
        return (
            self.x < o.x + o.w - eps
            and o.x < self.x + self.w - eps
            and self.y < o.y + o.h - eps
            and o.y < self.y + self.h - eps
        )


def floorplan(layout: RegionLayout, tech: TechModel | None = None) -> list[Rect]:
    """Rectangles (in macroblock units) for regions, routers and channels.

    Each grid cell holds a square region with its router beside it; channels
    run in the gaps between cells.  Rectangle areas sum to :func:`layout_area`.
    """
    tech = tech or TechModel()
    reg = [region_area(r, layout, tech).total for r in layout.regions]
    rout = router_area(layout, tech)
    side = max(math.sqrt(a) for a in reg) if reg else 0.0
    rside = max(math.sqrt(a) for a in rout) if rout else 0.0
    ch = tech.geometry.channel_mb
    # channel rectangles are unit-thin strips; the gap must fit one
    gap = max(1.0, ch / max(side, rside, 1.0))
    cell_w = side + rside + gap
    cell_h = max(side, rside) + gap
    out = []
    for r, a, ra in zip(layout.regions, reg, rout):
        y, x = r.pos
        ox, oy = x * cell_w, y * cell_h
        s = math.sqrt(a)
        out.append(Rect(f"region{r.index}", ox, oy, s, s))
        rs = math.sqrt(ra)
        out.append(Rect(f"router{r.index}", ox + side, oy, rs, rs))
    for a, b in layout.links():
        ya, xa = layout.regions[a].pos
        yb, xb = layout.regions[b].pos
        if ya == yb:  # horizontal neighbours: strip in the vertical gap
            x0 = xa * cell_w + side + rside
            out.append(Rect(f"link{a}-{b}", x0, ya * cell_h, gap, ch / gap))
        else:
            y0 = ya * cell_h + max(side, rside)
            out.append(Rect(f"link{a}-{b}", xa * cell_w, y0, ch / gap, gap))
    return out
