"""Time the numba kernels against their pure-numpy / pure-Python fallbacks.

    python benchmarks/bench_kernels.py [--gates 2000] [--trials 20000]

Both Monte Carlo backends must return the same success count for the same
seed; the script checks that before reporting timings.  The EDist pass is
timed compiled and through ``.py_func`` (what ``QCAD_DISABLE_JIT=1`` runs).
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from qcad import kernels as K
from qcad._jit import HAVE_NUMBA
from qcad.errorsim import build_error_trace, mc_run
from qcad.pipeline import evaluate, prepare, qalypso_config
from qcad.qec import EDistConfig, _arrays, apply_placement, insert_corrections
from qcad.randgen import RandSpec, gen_random
from qcad.tech import TechModel


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--gates", type=int, default=2000)
    ap.add_argument("--qubits", type=int, default=100)
    ap.add_argument("--trials", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    if not HAVE_NUMBA:
        raise SystemExit("numba is unavailable or disabled (QCAD_DISABLE_JIT); nothing to compare")

    tech = TechModel().with_errors(2)
    c = prepare(gen_random(RandSpec(args.gates, args.qubits, 0.5, seed=1)))
    placed = apply_placement(c, insert_corrections(c, EDistConfig(3, 1, 0)))
    ev = evaluate(placed, qalypso_config(c.n_qubits, 4), tech, trials=10)
    trace = build_error_trace(ev.schedule, tech)
    print(f"circuit: {c.n_gates} gates, {c.n_qubits} qubits; trace: {len(trace)} events")

    # warm the JIT cache so compile time is not counted
    mc_run(trace, 10, 0, backend="numba")
    r_jit = mc_run(trace, args.trials, 7, backend="numba")
    r_np = mc_run(trace, args.trials, 7, backend="numpy")
    if r_jit.successes != r_np.successes:
        raise SystemExit(f"backends disagree: {r_jit.successes} vs {r_np.successes}")
    t_jit = best_of(lambda: mc_run(trace, args.trials, 7, backend="numba"), args.repeat)
    t_np = best_of(lambda: mc_run(trace, args.trials, 7, backend="numpy"), args.repeat)

    ops, arity, opcode = _arrays(c)
    reset = np.zeros(ops.shape, dtype=np.bool_)
    K.edist_pass(ops, arity, opcode, reset, c.n_qubits, 1, 0)
    t_ed_jit = best_of(lambda: K.edist_pass(ops, arity, opcode, reset, c.n_qubits, 1, 0), args.repeat)
    t_ed_py = best_of(lambda: K.edist_pass.py_func(ops, arity, opcode, reset, c.n_qubits, 1, 0), args.repeat)

    print(f"{'kernel':<22}{'numba s':>10}{'fallback s':>12}{'speedup':>10}")
    print(f"{'monte carlo':<22}{t_jit:>10.4f}{t_np:>12.4f}{t_np / t_jit:>9.1f}x")
    print(f"{'edist pass':<22}{t_ed_jit:>10.4f}{t_ed_py:>12.4f}{t_ed_py / t_ed_jit:>9.1f}x")
    print(f"success count {r_jit.successes}/{args.trials} on both backends")


if __name__ == "__main__":
    main()
