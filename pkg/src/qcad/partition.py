"""Multilevel graph bisection (heavy-edge coarsening + Fiduccia-Mattheyses).

Graphs are adjacency lists of ``{neighbour: weight}`` dicts over vertices
``0..n-1``.  Everything here is deterministic: randomized restarts draw from
``numpy.random.default_rng`` with fixed per-try seeds.
"""
from __future__ import annotations

import heapq
from collections import defaultdict
from typing import Sequence

import numpy as np

from .circuit import Circuit

Adjacency = list[dict[int, int]]

COARSEST = 40  # stop coarsening below this many vertices
STALL_MOVES = 50  # FM pass ends after this many moves without improvement
GROW_STARTS = 8


def interaction_graph(c: Circuit) -> Adjacency:
    """Weighted qubit interaction graph; a Toffoli contributes all three pairs."""
    adj = [defaultdict(int) for _ in range(c.n_qubits)]
    for g in c.gates:
        ops = g.operands
        for i in range(len(ops)):
            for j in range(i + 1, len(ops)):
                a, b = ops[i], ops[j]
                adj[a][b] += 1
                adj[b][a] += 1
    return [dict(d) for d in adj]


def cut_weight(adj: Adjacency, side: Sequence[int]) -> int:
    return sum(w for u, nb in enumerate(adj) for v, w in nb.items() if side[u] != side[v]) // 2


def subgraph(adj: Adjacency, nodes: Sequence[int]) -> Adjacency:
    idx = {u: i for i, u in enumerate(nodes)}
    return [{idx[v]: w for v, w in adj[u].items() if v in idx} for u in nodes]


def _coarsen(adj, vw, rng=None, side=None):
    n = len(adj)
    match = [-1] * n
    if rng is None:
        order = sorted(range(n), key=lambda u: (len(adj[u]), u))
    else:
        order = [int(u) for u in rng.permutation(n)]
    for u in order:
        if match[u] != -1:
            continue
        best, bw = -1, 0
        for v, w in adj[u].items():
            if match[v] != -1 or v == u or (side is not None and side[v] != side[u]):
                continue
            if w > bw or (w == bw and best != -1 and v < best):
                best, bw = v, w
        if best == -1:
            match[u] = u
        else:
            match[u], match[best] = best, u
    cmap = [-1] * n
    k = 0
    for u in range(n):
        if cmap[u] == -1:
            cmap[u] = cmap[match[u]] = k
            k += 1
    cadj = [defaultdict(int) for _ in range(k)]
    cvw = [0] * k
    for u in range(n):
        cu = cmap[u]
        cvw[cu] += vw[u]
        for v, w in adj[u].items():
            cv = cmap[v]
            if cv != cu:
                cadj[cu][cv] += w
    return [dict(d) for d in cadj], cvw, cmap


def _grow(adj, vw, target, start):
    """Greedy graph growing from ``start`` until side 0 holds ``target`` weight."""
    n = len(adj)
    side = [1] * n
    acc = 0
    seen = {start}
    frontier = [(0, start)]
    while acc < target:
        if not frontier:
            rest = [u for u in range(n) if u not in seen]
            if not rest:
                break
            seen.add(rest[0])
            frontier = [(0, rest[0])]
        _, u = heapq.heappop(frontier)
        if side[u] == 0:
            continue
        side[u] = 0
        acc += vw[u]
        for v, w in adj[u].items():
            if v not in seen:
                seen.add(v)
                heapq.heappush(frontier, (-w, v))
    return side


def _refine(adj, vw, side, lo, hi, passes=8):
    """FM passes keeping the side-0 weight within ``[lo, hi]``."""
    n = len(adj)
    w0 = sum(vw[u] for u in range(n) if side[u] == 0)
    mid = 0.5 * (lo + hi)
    for _ in range(passes):
        gain = [0] * n
        for u in range(n):
            su = side[u]
            gain[u] = sum(w if side[v] != su else -w for v, w in adj[u].items())
        locked = [False] * n
        moves = []
        cur = best = bestk = 0
        heap = [(-gain[u], u) for u in range(n)]
        heapq.heapify(heap)
        while heap:
            g, u = heapq.heappop(heap)
            if locked[u] or -g != gain[u]:
                continue
            nw0 = w0 - vw[u] if side[u] == 0 else w0 + vw[u]
            if not lo <= nw0 <= hi and abs(nw0 - mid) >= abs(w0 - mid):
                continue
            locked[u] = True
            side[u] ^= 1
            w0 = nw0
            cur += gain[u]
            moves.append(u)
            if cur > best:
                best, bestk = cur, len(moves)
            for v, w in adj[u].items():
                if not locked[v]:
                    gain[v] += -2 * w if side[v] == side[u] else 2 * w
                    heapq.heappush(heap, (-gain[v], v))
            if len(moves) - bestk > STALL_MOVES:
                break
        for u in reversed(moves[bestk:]):
            side[u] ^= 1
            w0 += vw[u] if side[u] == 0 else -vw[u]
        if best <= 0:
            break
    return side


def _bounds(vw, frac, tol):
    """Balance window for side-0 weight: target +- max(heaviest vertex, tol * total)."""
    total = sum(vw)
    target = total * frac
    slack = max(max(vw, default=0), tol * total)
    return target, int(np.floor(target - slack)), int(np.ceil(target + slack))


def _multilevel(adj, vw, frac, tol, rng):
    target, lo, hi = _bounds(vw, frac, tol)
    levels = []
    a, w = adj, vw
    while len(a) > COARSEST:
        ca, cw, cm = _coarsen(a, w, rng)
        if len(ca) > 0.9 * len(a):
            break
        levels.append((a, w, cm))
        a, w = ca, cw
    best = None
    starts = sorted(range(len(a)), key=lambda u: (len(a[u]), u))
    for s in range(min(len(a), GROW_STARTS)):
        start = starts[s * len(a) // GROW_STARTS] if len(a) >= GROW_STARTS else starts[s]
        side = _grow(a, w, target, start)
        _, clo, chi = _bounds(w, frac, tol)
        side = _refine(a, w, side, clo, chi)
        c = cut_weight(a, side)
        if best is None or c < best[0]:
            best = (c, side)
    side = best[1]
    for fa, fw, cm in reversed(levels):
        side = [side[cm[u]] for u in range(len(fa))]
        side = _refine(fa, fw, side, *_bounds(fw, frac, tol)[1:])
    return side


def _rebalance(adj, vw, side, lo, hi):
    """Move cheapest vertices until the side-0 weight lies in ``[lo, hi]``."""
    w0 = sum(vw[u] for u in range(len(adj)) if side[u] == 0)
    while w0 < lo or w0 > hi:
        src = 1 if w0 < lo else 0
        cands = [u for u in range(len(adj)) if side[u] == src]
        if not cands:
            break

        def cost(u):  # cut increase if u changes side
            return sum(w if side[v] == src else -w for v, w in adj[u].items()), u

        u = min(cands, key=cost)
        side[u] ^= 1
        w0 += vw[u] if src == 1 else -vw[u]
    return side


def _vcycle(adj, vw, side, frac, tol):
    _, lo, hi = _bounds(vw, frac, tol)
    levels = []
    a, w, s = adj, vw, side
    while len(a) > COARSEST:
        ca, cw, cm = _coarsen(a, w, None, s)
        if len(ca) > 0.9 * len(a):
            break
        cs = [0] * len(ca)
        for u in range(len(a)):
            cs[cm[u]] = s[u]
        levels.append((a, w, cm))
        a, w, s = ca, cw, cs
    s = _refine(a, w, list(s), *_bounds(w, frac, tol)[1:])
    for fa, fw, cm in reversed(levels):
        s = [s[cm[u]] for u in range(len(fa))]
        s = _refine(fa, fw, s, *_bounds(fw, frac, tol)[1:])
    return s


def bisect(
    adj: Adjacency,
    weights: Sequence[int] | None = None,
    frac: float = 0.5,
    tries: int = 1,
    cycles: int = 0,
    tol: float = 0.02,
    exact: bool = False,
) -> list[int]:
    """Split vertices into sides 0/1 with side 0 holding ``frac`` of the weight.

    Side 0 may deviate from the target by ``tol`` of the total weight (or one
    vertex, whichever is larger); ``exact`` then moves the cheapest vertices
    until the split is exact up to rounding.  ``tries`` restarts use different
    matching orders; ``cycles`` V-cycles refine the best split while it keeps
    improving.
    """
    n = len(adj)
    if n == 0:
        return []
    vw = list(weights) if weights is not None else [1] * n
    best = None
    for t in range(max(1, tries)):
        rng = None if t == 0 else np.random.default_rng(t)
        side = _multilevel(adj, vw, frac, tol, rng)
        c = cut_weight(adj, side)
        if best is None or c < best[0]:
            best = (c, side)
    cut, side = best
    for _ in range(cycles):
        s2 = _vcycle(adj, vw, side, frac, tol)
        c2 = cut_weight(adj, s2)
        if c2 >= cut:
            break
        side, cut = s2, c2
    if exact:
        target = sum(vw) * frac
        side = _rebalance(adj, vw, side, int(np.floor(target)), int(np.ceil(target)))
    return side


def recursive_bisection(
    adj: Adjacency, sizes: Sequence[int], tries: int = 1
) -> np.ndarray:
    """Assign vertices to ``len(sizes)`` parts of the given sizes (summing to n).

    Parts are split in index order: parts ``[0, k//2)`` against ``[k//2, k)``,
    recursively, so neighbouring part indices share more edges.
    """
    n = len(adj)
    if sum(sizes) != n:
        raise ValueError(f"part sizes sum to {sum(sizes)}, graph has {n} vertices")
    part = np.zeros(n, dtype=np.int64)

    def rec(nodes: list[int], first: int, sz: Sequence[int]):
        if len(sz) == 1:
            part[nodes] = first
            return
        h = len(sz) // 2
        left = sum(sz[:h])
        if left == 0 or left == len(nodes):
            side = [0 if left else 1] * len(nodes)
        else:
            sub = subgraph(adj, nodes)
            side = bisect(sub, frac=left / len(nodes), tries=tries, exact=True)
        a = [u for u, s in zip(nodes, side) if s == 0]
        b = [u for u, s in zip(nodes, side) if s == 1]
        rec(a, first, sz[:h])
        rec(b, first + h, sz[h:])

    rec(list(range(n)), 0, list(sizes))
    return part
