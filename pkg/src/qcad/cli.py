"""Command-line entry point: ``qcad <subcommand>``.

Stages hand off through files: netlists (``.qasm`` text) plus JSON sidecars.
Every JSON output carries the tool version, a manifest hash and the seed.

Exit codes: 0 ok, 2 parse/usage, 3 error-correction placement, 4 mapping,
5 simulation.
"""
from __future__ import annotations

import hashlib
import json
import math
import random
import sys
from pathlib import Path

import click

from . import __version__
from .adders import AdderKind, AdderSpec, gen_adder, run_adder
from .circuit import CircuitError
from .datapath import ConfigError, DatapathKind, instantiate
from .errorsim import build_error_trace, mc_run
from .mapper import MapError, map_circuit, validate_schedule
from .metrics import CSV_HEADER, emit_report, find_knee
from .netlist import emit_netlist, parse_netlist
from .pipeline import QecChoice, adcr_search, config_for, place_corrections, prepare, sweep_configs
from .qec import InfeasibleError, apply_placement, table3_op_count
from .randgen import RandSpec, gen_random
from .shor import ShorSpec, gen_shor
from .tech import TechModel, load_tech, tech_to_dict

EXIT_PARSE = 2
EXIT_QEC = 3
EXIT_MAP = 4
EXIT_SIM = 5


class StageError(click.ClickException):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.exit_code = code


# ---------------------------------------------------------------------------
# manifest and output helpers


def _sha(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def manifest_hash(manifest: dict) -> str:
    return _sha(json.dumps(manifest, sort_keys=True, separators=(",", ":"), default=str).encode())


def _manifest(ctx: click.Context, command: str, params: dict, inputs: list[Path] = ()) -> dict:
    obj = ctx.obj
    return {
        "command": command,
        "params": params,
        "inputs": {p.name: _sha(p.read_bytes()) for p in inputs},
        "tech": tech_to_dict(obj["tech"]),
        "datapath": obj["datapath"],
        "net_aggressiveness": obj["aggr"],
        "version": __version__,
    }


def _header(manifest: dict, seed: int | None) -> dict:
    return {"version": __version__, "manifest_hash": manifest_hash(manifest), "seed": seed}


def _write(ctx: click.Context, name: str, text: str) -> None:
    out = ctx.obj["out"]
    if out is None:
        click.echo(text, nl=False)
        return
    out.mkdir(parents=True, exist_ok=True)
    (out / name).write_text(text)
    click.echo(str(out / name), err=True)


def _json(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(v):
    if isinstance(v, float) and math.isinf(v):
        return "inf"
    raise TypeError(f"not serializable: {type(v).__name__}")


def _read_netlist(path: Path):
    try:
        return parse_netlist(path.read_text())
    except (CircuitError, UnicodeDecodeError) as e:
        raise StageError(f"{path}: {e}", EXIT_PARSE) from e


def _range(text: str) -> list[int]:
    try:
        parts = [int(x) for x in text.split(":")]
    except ValueError as e:
        raise click.BadParameter(f"expected a:b[:step], got {text!r}") from e
    if len(parts) == 2:
        parts.append(1)
    if len(parts) != 3 or parts[2] < 1 or parts[0] < 1 or parts[1] < parts[0]:
        raise click.BadParameter(f"expected a:b[:step] with 1 <= a <= b, got {text!r}")
    return list(range(parts[0], parts[1] + 1, parts[2]))


def _qec_choice(edist, auto, budget, every) -> QecChoice:
    picked = sum(x is not None and x is not False for x in (edist, budget)) + int(auto) + int(every)
    if picked > 1:
        raise click.UsageError("choose one of --edist, --auto-5pct, --budget, --every-gate")
    if edist is not None:
        return QecChoice("edist", threshold=edist)
    if budget is not None:
        return QecChoice("budget", budget=budget)
    if every:
        return QecChoice("every-gate")
    return QecChoice("auto-5pct")


# ---------------------------------------------------------------------------
# commands


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="qcad")
@click.option("--error-set", type=click.Choice(["1", "2"]), default=None, help="Physical error set (default: 2 for random circuits, 1 for adders and Shor).")
@click.option("--datapath", type=click.Choice([k.value for k in DatapathKind]), default="qalypso", show_default=True)
@click.option("--net-aggressiveness", "aggr", type=click.FloatRange(0.0, 1.0, min_open=True), default=1.0, show_default=True, help="Fraction of peak router load that Qalypso provisions.")
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=None, help="Output directory (default: stdout).")
@click.pass_context
def cli(ctx, error_set, datapath, aggr, out):
    """Quantum circuit CAD flow: generate, place corrections, map, simulate, report."""
    ctx.obj = {"error_set": error_set, "datapath": datapath, "aggr": aggr, "out": out}


def _tech(ctx, default_set: int) -> TechModel:
    """Technology for this command: the error set, then any QCAD_TECH_FILE overrides."""
    base = TechModel().with_errors(ctx.obj["error_set"] or default_set)
    try:
        tech = load_tech(None, base)
    except (OSError, ValueError, TypeError, KeyError) as e:
        raise StageError(f"technology file: {e}", EXIT_PARSE) from e
    ctx.obj["tech"] = tech
    return tech


@cli.command("gen-random")
@click.option("--qubits", type=click.IntRange(2), default=100, show_default=True)
@click.option("--gates", type=click.IntRange(1), default=1000, show_default=True)
@click.option("--rent", type=click.FloatRange(0.0, 1.0), default=0.5, show_default=True, help="Target Rent exponent.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.pass_context
def gen_random_cmd(ctx, qubits, gates, rent, seed):
    """Emit a seeded random netlist with a target Rent exponent."""
    _tech(ctx, 2)
    c = gen_random(RandSpec(gates, qubits, rent, seed))
    m = _manifest(ctx, "gen-random", {"qubits": qubits, "gates": gates, "rent": rent, "seed": seed})
    text = emit_netlist(c)
    if ctx.obj["out"] is None:
        click.echo(text, nl=False)
        return
    _write(ctx, "random.qasm", text)
    _write(ctx, "random.json", _json({**_header(m, seed), "qubits": c.n_qubits, "gates": c.n_gates}))


@cli.command("optimize-qec")
@click.argument("netlist", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--edist", type=click.IntRange(1), default=None, help="Fixed EDist threshold T.")
@click.option("--auto-5pct", "auto", is_flag=True, help="Largest T within 5% of every-gate success.")
@click.option("--budget", type=click.IntRange(0), default=None, help="Correction budget.")
@click.option("--every-gate", "every", is_flag=True, help="Correct after every gate.")
@click.option("--D", "D", type=click.IntRange(1), default=4, show_default=True, help="Data regions used when tuning.")
@click.option("--trials", type=click.IntRange(1), default=2000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.pass_context
def optimize_qec_cmd(ctx, netlist, edist, auto, budget, every, D, trials, seed):
    """Insert Correct gates into a netlist; Toffolis are expanded first."""
    tech = _tech(ctx, 2)
    choice = _qec_choice(edist, auto, budget, every)
    c = prepare(_read_netlist(netlist))
    try:
        cfg = config_for(ctx.obj["datapath"], c.n_qubits, D, 0, ctx.obj["aggr"])
        pl = place_corrections(c, choice, cfg, tech, trials, seed)
    except (InfeasibleError, ConfigError) as e:
        raise StageError(str(e), EXIT_QEC) from e
    out = apply_placement(c, pl.placement)
    m = _manifest(ctx, "optimize-qec", {"qec": choice.label(), "D": D, "trials": trials, "seed": seed}, [netlist])
    side = {
        **_header(m, seed),
        "qec": choice.label(),
        "threshold": pl.threshold,
        "corrections": len(pl.placement),
        "operations": table3_op_count(c, pl.placement),
        "p_tuned": pl.p_tuned,
        "p_every_gate": pl.p_every_gate,
    }
    if ctx.obj["out"] is None:
        click.echo(emit_netlist(out), nl=False)
        click.echo(_json(side), err=True, nl=False)
        return
    _write(ctx, netlist.stem + ".qec.qasm", emit_netlist(out))
    _write(ctx, netlist.stem + ".qec.json", _json(side))


@cli.command("map")
@click.argument("netlist", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--D", "D", type=click.IntRange(1), default=4, show_default=True, help="Data regions (single point).")
@click.option("--M", "M", type=click.IntRange(0), default=0, show_default=True, help="Memory regions.")
@click.option("--sweep-D", "sweep", default=None, help="Sweep data regions over a:b[:step].")
@click.option("--trials", type=click.IntRange(1), default=2000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.pass_context
def map_cmd(ctx, netlist, D, M, sweep, trials, seed):
    """Map a netlist (corrections already placed), simulate, and report per config."""
    tech = _tech(ctx, 2)
    c = prepare(_read_netlist(netlist))
    Ds = _range(sweep) if sweep else [D]
    try:
        configs = sweep_configs(ctx.obj["datapath"], c.n_qubits, Ds, [M], [ctx.obj["aggr"]])
    except ConfigError as e:
        raise StageError(str(e), EXIT_MAP) from e
    try:
        res = adcr_search(c, configs, tech=tech, trials=trials, seed=seed)
    except MapError as e:
        raise StageError(str(e), EXIT_MAP) from e
    m = _manifest(ctx, "map", {"D": Ds, "M": M, "trials": trials, "seed": seed}, [netlist])
    rows = [mt for _, mt, _ in res.table if mt is not None]
    failed = [{"config": cfg.label(), "error": err} for cfg, mt, err in res.table if mt is None]
    best = res.best
    doc = json.loads(emit_report(rows, "json", _header(m, seed)))
    doc["best"] = best.config.label()
    doc["failed"] = failed
    ok = [(cfg.D, mt.latency_us) for cfg, mt, _ in res.table if mt is not None]
    knee = find_knee([math.log2(d) for d, _ in ok], [lat for _, lat in ok]) if len(ok) >= 3 else None
    doc["latency_knee_D"] = None if knee is None else ok[knee][0]
    doc["schedule"] = {
        "makespan_us": best.schedule.makespan,
        "teleports": best.schedule.n_teleports,
        "stall_us": best.schedule.total_stall,
        "router_peaks": list(best.network.peak),
        "problems": validate_schedule(best.schedule),
    }
    if ctx.obj["out"] is None:
        click.echo(emit_report(rows, "csv") if sweep else _json(doc), nl=False)
        return
    _write(ctx, netlist.stem + ".map.json", _json(doc))
    _write(ctx, netlist.stem + ".sweep.csv", emit_report(rows, "csv"))


@cli.command("simulate")
@click.argument("netlist", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--D", "D", type=click.IntRange(1), default=4, show_default=True)
@click.option("--M", "M", type=click.IntRange(0), default=0, show_default=True)
@click.option("--trials", type=click.IntRange(1), default=10000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--workers", type=click.IntRange(1), default=1, show_default=True)
@click.pass_context
def simulate_cmd(ctx, netlist, D, M, trials, seed, workers):
    """Monte Carlo success probability of a netlist mapped onto the datapath."""
    tech = _tech(ctx, 2)
    c = prepare(_read_netlist(netlist))
    try:
        cfg = config_for(ctx.obj["datapath"], c.n_qubits, D, M, ctx.obj["aggr"])
        s, _, _ = map_circuit(c, instantiate(cfg, tech), tech)
    except (MapError, ConfigError) as e:
        raise StageError(str(e), EXIT_MAP) from e
    try:
        res = mc_run(build_error_trace(s, tech), trials, seed, workers=workers)
    except (ValueError, MemoryError) as e:
        raise StageError(str(e), EXIT_SIM) from e
    m = _manifest(ctx, "simulate", {"D": D, "M": M, "trials": trials, "seed": seed}, [netlist])
    doc = {
        **_header(m, seed),
        "p_success": res.p_success,
        "ci_low": res.ci_low,
        "ci_high": res.ci_high,
        "trials": res.trials,
        "config": cfg.label(),
    }
    _write(ctx, netlist.stem + ".sim.json", _json(doc))


@cli.command("adders")
@click.option("--kind", type=click.Choice([k.value for k in AdderKind]), default="qcla", show_default=True)
@click.option("--n", "n", type=click.IntRange(1), default=64, show_default=True)
@click.option("--m", "m", type=click.IntRange(1), default=4, show_default=True)
@click.option("--check", is_flag=True, help="Verify against integer addition on random inputs.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.pass_context
def adders_cmd(ctx, kind, n, m, check, seed):
    """Emit an adder netlist (X/CNOT/Toffoli)."""
    _tech(ctx, 1)
    try:
        spec = AdderSpec(AdderKind(kind), n, m)
    except ValueError as e:
        raise click.BadParameter(str(e)) from e
    c = gen_adder(spec)
    if check:
        if n > 64:
            raise click.BadParameter("--check supports n <= 64")
        rng = random.Random(seed)
        hi = 1 << n
        a = [rng.getrandbits(n) for _ in range(200)]
        b = [rng.getrandbits(n) for _ in range(200)]
        s, _, clean = run_adder(c, spec, a, b)
        ok = all(int(x) == (p + q) % hi for x, p, q in zip(s, a, b)) and all(clean)
        click.echo(f"check {'ok' if ok else 'FAILED'}: {len(a)} random sums", err=True)
        if not ok:
            raise StageError("adder produced a wrong sum", EXIT_SIM)
    m_ = _manifest(ctx, "adders", {"kind": kind, "n": n, "m": m, "seed": seed})
    if ctx.obj["out"] is None:
        click.echo(emit_netlist(c), nl=False)
        return
    _write(ctx, f"{kind}{n}m{m}.qasm", emit_netlist(c))
    _write(ctx, f"{kind}{n}m{m}.json", _json({**_header(m_, seed), "qubits": c.n_qubits, "gates": c.n_gates}))


@cli.command("shor")
@click.option("--n", "n", type=int, default=1024, show_default=True)
@click.option("--adder", type=click.Choice([k.value for k in AdderKind]), default="qcla", show_default=True)
@click.option("--m", "m", type=click.IntRange(1), default=4, show_default=True)
@click.option("--qec", default="auto", show_default=True, help="auto | every-gate | <EDist threshold>")
@click.option("--trials", type=click.IntRange(1), default=1000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.pass_context
def shor_cmd(ctx, n, adder, m, qec, trials, seed):
    """Resource estimate for factoring an n-bit number (estimate mode above 64 bits)."""
    tech = _tech(ctx, 1)
    try:
        spec = ShorSpec.of(n, adder, m, qec)
    except ValueError as e:
        raise click.BadParameter(str(e)) from e
    try:
        est = gen_shor(spec, tech, trials=trials, seed=seed)
    except InfeasibleError as e:
        raise StageError(str(e), EXIT_QEC) from e
    except MapError as e:
        raise StageError(str(e), EXIT_MAP) from e
    mf = _manifest(ctx, "shor", {"n": n, "adder": adder, "m": m, "qec": qec, "trials": trials, "seed": seed})
    _write(ctx, f"shor{n}-{adder}.json", _json({**_header(mf, seed), **est.as_dict()}))


@cli.command("report")
@click.argument("reports", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@click.pass_context
def report_cmd(ctx, reports, fmt):
    """Merge the rows of JSON reports (from ``map``) into one CSV or JSON table."""
    rows = []
    for p in reports:
        try:
            doc = json.loads(p.read_text())
        except json.JSONDecodeError as e:
            raise StageError(f"{p}: {e}", EXIT_PARSE) from e
        if not isinstance(doc, dict) or "rows" not in doc:
            raise StageError(f"{p}: no 'rows' table", EXIT_PARSE)
        rows.extend(doc["rows"])
    if fmt == "json":
        m = _manifest(ctx, "report", {}, list(reports))
        _write(ctx, "report.json", _json({**_header(m, None), "rows": rows}))
        return
    lines = [",".join(CSV_HEADER)]
    for r in rows:
        b = r.get("breakdown", {})
        vals = [r.get("config"), r.get("area_mb"), r.get("area_mm2"), r.get("latency_us"), r.get("p_success"), r.get("adcr")]
        vals += [b.get(k, 0.0) for k in ("data", "memory", "qec", "t", "network")]
        lines.append(",".join(str(v) for v in vals))
    _write(ctx, "report.csv", "\n".join(lines) + "\n")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, prog_name="qcad", standalone_mode=False)
    except click.exceptions.Exit as e:
        return e.exit_code
    except click.ClickException as e:
        e.show()
        return e.exit_code
    except click.Abort:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
