"""Hot loops, compiled with numba when available (see :mod:`qcad._jit`).

Every kernel takes plain numpy arrays so the same source runs compiled or as
ordinary Python.  Gate kinds are passed as small integer codes:
0 = ordinary gate, 1 = correction (reset), 2 = fresh preparation.
"""
import numpy as np

from ._jit import njit

OP_GATE = 0
OP_CORRECT = 1
OP_PREP = 2


@njit
def edist_pass(operands, arity, opcode, reset_mask, n_qubits, base, fresh):
    """Forward error-distance labelling.

    Returns ``after[g, k]``: the count on operand k right after gate g, before
    any correction placed on that point (``reset_mask[g, k]``) resets it to
    ``base``.
    """
    n = operands.shape[0]
    cnt = np.full(n_qubits, fresh, dtype=np.int64)
    after = np.zeros((n, operands.shape[1]), dtype=np.int64)
    for g in range(n):
        a = arity[g]
        if opcode[g] == 1:
            for k in range(a):
                after[g, k] = base
                cnt[operands[g, k]] = base
            continue
        if opcode[g] == 2:
            for k in range(a):
                after[g, k] = fresh
                cnt[operands[g, k]] = fresh
            continue
        m = 0
        for k in range(a):
            c = cnt[operands[g, k]]
            if c > m:
                m = c
        v = m + 1
        for k in range(a):
            after[g, k] = v
            q = operands[g, k]
            cnt[q] = base if reset_mask[g, k] else v
    return after


@njit
def greedy_place(operands, arity, opcode, n_qubits, threshold, base, fresh):
    """Greedy correction placement in stored gate order.

    Before each gate, while its output count would exceed ``threshold``, the
    operand with the largest count (lowest qubit id on ties) is corrected
    right after its previous gate.  Returns ``(points, ok)`` where ``points``
    is an ``(m, 2)`` array of (gate, qubit) and ``ok`` is False if some gate
    cannot be satisfied.
    """
    n = operands.shape[0]
    cnt = np.full(n_qubits, fresh, dtype=np.int64)
    last = np.full(n_qubits, -1, dtype=np.int64)
    pts = np.empty((n * 3 + 1, 2), dtype=np.int64)
    m = 0
    for g in range(n):
        a = arity[g]
        if opcode[g] == 1 or opcode[g] == 2:
            val = base if opcode[g] == 1 else fresh
            for k in range(a):
                q = operands[g, k]
                cnt[q] = val
                last[q] = g
            continue
        while True:
            best_q = -1
            best_c = -1
            for k in range(a):
                q = operands[g, k]
                c = cnt[q]
                if c > best_c or (c == best_c and q < best_q):
                    best_c = c
                    best_q = q
            if best_c + 1 <= threshold:
                break
            if best_c <= base or last[best_q] < 0:
                return pts[:m], False
            pts[m, 0] = last[best_q]
            pts[m, 1] = best_q
            m += 1
            cnt[best_q] = base
        v = best_c + 1
        for k in range(a):
            q = operands[g, k]
            cnt[q] = v
            last[q] = g
    return pts[:m], True


# ---------------------------------------------------------------------------
# Monte Carlo error propagation
#
# A trace is an (L, 4) int64 array of (opcode, a, b, c) rows plus an (L,)
# probability array.  Error state is a 7-bit X mask and a 7-bit Z mask per
# logical qubit (one bit per code position).  Each event row draws exactly one
# uniform from the trial's xoshiro256** stream, whether or not it fires, so
# the compiled loop and the vectorised numpy path consume identical streams.

EV_POS = 10  # a=qubit, b=position, c=restriction
EV_PAIR = 11  # a, b = qubits, c = position; error lands on one of the two blocks
EV_BLOCK = 12  # a=qubit, c=restriction; random position
OP_CNOT = 13  # a=control, b=target
OP_H = 14
OP_S = 15
OP_CHECK = 16  # correction: fail on weight >= 2 per type, then reset
OP_RESET = 17  # fresh preparation
OP_MEASURE = 18  # check, then reset
OP_TOFFOLI = 19  # a, b controls, c target (propagates like two CNOTs)

R_DEPOL = 0  # X, Y or Z with probability 1/3 each
R_X = 1
R_Z = 2

CODE_POSITIONS = 7

_U1 = np.uint64(1)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S5 = np.uint64(5)
_S7 = np.uint64(7)
_S9 = np.uint64(9)
_S11 = np.uint64(11)
_S17 = np.uint64(17)
_S27 = np.uint64(27)
_S30 = np.uint64(30)
_S31 = np.uint64(31)
_S45 = np.uint64(45)
_S57 = np.uint64(57)
_S19 = np.uint64(19)
_INV53 = 1.0 / 9007199254740992.0


@njit
def _mix64(z):
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


@njit
def _rotl(x, k, kc):
    return (x << k) | (x >> kc)


@njit
def trial_state(seed, trial):
    """xoshiro256** state for one trial: splitmix64 seeded by hash(seed, trial)."""
    x = _mix64(np.uint64(seed) ^ _mix64(np.uint64(trial) + _GOLDEN))
    x = x + _GOLDEN
    s0 = _mix64(x)
    x = x + _GOLDEN
    s1 = _mix64(x)
    x = x + _GOLDEN
    s2 = _mix64(x)
    x = x + _GOLDEN
    s3 = _mix64(x)
    return s0, s1, s2, s3


@njit
def _next(s0, s1, s2, s3):
    r = _rotl(s1 * _S5, _S7, _S57) * _S9
    t = s1 << _S17
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s3 = _rotl(s3, _S45, _S19)
    return r, s0, s1, s2, s3


@njit
def _heavy(m):
    return (m & (m - 1)) != 0


@njit
def _choice(u, p, k):
    i = int(u / p * k)
    if i >= k:
        i = k - 1
    return i


@njit
def _apply(xm, zm, q, pos, pauli):
    bit = 1 << pos
    if pauli != 2:
        xm[q] ^= bit
    if pauli != 0:
        zm[q] ^= bit


@njit(nogil=True)
def mc_trials(ops, probs, n_qubits, seed, start, count):
    """Number of successful trials among trial indices ``start .. start+count-1``."""
    n = ops.shape[0]
    xm = np.zeros(n_qubits, dtype=np.int64)
    zm = np.zeros(n_qubits, dtype=np.int64)
    wins = 0
    for trial in range(start, start + count):
        s0, s1, s2, s3 = trial_state(seed, trial)
        xm[:] = 0
        zm[:] = 0
        ok = True
        for i in range(n):
            op = ops[i, 0]
            a = ops[i, 1]
            b = ops[i, 2]
            c = ops[i, 3]
            if op == 10 or op == 11 or op == 12:
                r, s0, s1, s2, s3 = _next(s0, s1, s2, s3)
                u = float(r >> _S11) * _INV53
                p = probs[i]
                if u >= p:
                    continue
                if op == 10:
                    pauli = 0 if c == 1 else (2 if c == 2 else _choice(u, p, 3))
                    _apply(xm, zm, a, b, pauli)
                elif op == 11:
                    k = _choice(u, p, 6)
                    q = a if k < 3 else b
                    _apply(xm, zm, q, c, k % 3)
                else:
                    if c == 0:
                        k = _choice(u, p, 21)
                        _apply(xm, zm, a, k // 3, k % 3)
                    else:
                        k = _choice(u, p, 7)
                        _apply(xm, zm, a, k, 0 if c == 1 else 2)
            elif op == 13:
                xm[b] ^= xm[a]
                zm[a] ^= zm[b]
            elif op == 19:
                xm[c] ^= xm[a] ^ xm[b]
                zm[a] ^= zm[c]
                zm[b] ^= zm[c]
            elif op == 14:
                t = xm[a]
                xm[a] = zm[a]
                zm[a] = t
            elif op == 15:
                zm[a] ^= xm[a]
            elif op == 16 or op == 18:
                if _heavy(xm[a]) or _heavy(zm[a]):
                    ok = False
                    break
                xm[a] = 0
                zm[a] = 0
            elif op == 17:
                xm[a] = 0
                zm[a] = 0
        if ok:
            for q in range(n_qubits):
                if _heavy(xm[q]) or _heavy(zm[q]):
                    ok = False
                    break
        if ok:
            wins += 1
    return wins


def _np_mix64(z):
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


def _np_states(seed, start, count):
    trials = np.arange(start, start + count, dtype=np.uint64)
    with np.errstate(over="ignore"):
        x = _np_mix64(np.uint64(seed) ^ _np_mix64(trials + _GOLDEN))
        out = []
        for _ in range(4):
            x = x + _GOLDEN
            out.append(_np_mix64(x))
    return np.stack(out)


def _np_next(s):
    s0, s1, s2, s3 = s
    r = s1 * _S5
    r = ((r << _S7) | (r >> _S57)) * _S9
    t = s1 << _S17
    s2 ^= s0
    s3 ^= s1
    s1 ^= s2
    s0 ^= s3
    s2 ^= t
    s[3] = (s3 << _S45) | (s3 >> _S19)
    return r


def mc_trials_numpy(ops, probs, n_qubits, seed, start, count):
    """Vectorised twin of :func:`mc_trials`: all trials advance in lockstep."""
    s = _np_states(seed, start, count)
    xm = np.zeros((n_qubits, count), dtype=np.int64)
    zm = np.zeros((n_qubits, count), dtype=np.int64)
    alive = np.ones(count, dtype=bool)
    cols = np.arange(count)

    def apply(rows, pos, pauli, fire):
        bit = np.where(fire, np.left_shift(1, pos), 0)
        xm[rows, cols] ^= np.where(pauli != 2, bit, 0)
        zm[rows, cols] ^= np.where(pauli != 0, bit, 0)

    def choice(u, p, k):
        return np.minimum((u / p * k).astype(np.int64), k - 1)

    def heavy(m):
        return (m & (m - 1)) != 0

    with np.errstate(over="ignore"):
        for i in range(ops.shape[0]):
            op, a, b, c = (int(v) for v in ops[i])
            if op in (EV_POS, EV_PAIR, EV_BLOCK):
                u = (_np_next(s) >> _S11).astype(np.float64) * _INV53
                p = probs[i]
                fire = alive & (u < p)
                if not fire.any():
                    continue
                k = np.zeros(count, dtype=np.int64)
                if op == EV_POS:
                    if c == R_DEPOL:
                        k = choice(u, p, 3)
                    elif c == R_Z:
                        k[:] = 2
                    apply(np.full(count, a), np.full(count, b), k, fire)
                elif op == EV_PAIR:
                    k = choice(u, p, 6)
                    apply(np.where(k < 3, a, b), np.full(count, c), k % 3, fire)
                elif c == R_DEPOL:
                    k = choice(u, p, 21)
                    apply(np.full(count, a), k // 3, k % 3, fire)
                else:
                    k = choice(u, p, 7)
                    apply(np.full(count, a), k, np.full(count, 0 if c == R_X else 2), fire)
            elif op == OP_CNOT:
                xm[b] ^= xm[a]
                zm[a] ^= zm[b]
            elif op == OP_TOFFOLI:
                xm[c] ^= xm[a] ^ xm[b]
                zm[a] ^= zm[c]
                zm[b] ^= zm[c]
            elif op == OP_H:
                xm[a], zm[a] = zm[a].copy(), xm[a].copy()
            elif op == OP_S:
                zm[a] ^= xm[a]
            elif op in (OP_CHECK, OP_MEASURE):
                alive &= ~(heavy(xm[a]) | heavy(zm[a]))
                xm[a] = 0
                zm[a] = 0
            elif op == OP_RESET:
                xm[a] = 0
                zm[a] = 0
    if n_qubits:
        alive &= ~(heavy(xm) | heavy(zm)).any(axis=0)
    return int(alive.sum())
