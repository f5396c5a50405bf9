"""Pure-Python twin of the box-search kernel.

Mirrors ``_pricing_core`` operation for operation: identical pruning
comparisons, identical accumulation order, identical tie handling, so both
backends return bitwise-equal results. Keep the two files in sync when
touching either.

The search branches on points rather than interval endpoints. A node keeps
the samples still eligible for the box, the span already forced inside it,
and the running weight of accepted samples. Whenever some penalized sample
sits inside the span of the eligible rewards it must be either accepted or
walled off on one side of one dimension; when no such sample is left, the
eligible rewards plus the accepted samples form a feasible box and become a
candidate. A coordinate-descent pass seeds the incumbent so pruning starts
from a realistic objective instead of from the empty box.
"""

import math
import sys
import time


class _State:
    __slots__ = (
        "ranks", "coeff", "values", "lam", "omega", "n", "d",
        "best_obj", "found", "sel", "lo", "hi", "vol",
        "deadline", "timed_out", "cut", "taken",
    )


def search(ranks, coeff, values, lam, omega, time_limit, target=None):
    """Maximize covered coefficient mass minus lam and omega over all boxes.

    Returns (found, objective, selection, lo, hi, timed_out) with the
    selection in ascending local order and lo/hi giving the coordinate span
    of the selected samples. With ``target`` set the search stops as soon
    as a candidate strictly above it is recorded; the reported objective is
    then that candidate's true value, not a proven optimum.
    """
    st = _State()
    st.n = len(coeff)
    st.d = len(values)
    st.ranks = [[int(r) for r in row] for row in ranks]
    st.coeff = [float(c) for c in coeff]
    st.values = [[float(v) for v in vt] for vt in values]
    st.lam = lam
    st.omega = omega
    st.best_obj = -lam - omega
    st.found = False
    st.sel = []
    st.lo = []
    st.hi = []
    st.vol = math.inf
    st.deadline = None if time_limit is None else time.monotonic() + time_limit
    st.timed_out = False
    st.cut = math.inf if target is None else float(target)
    st.taken = []

    need = 3 * (st.n + 8)
    if sys.getrecursionlimit() < need:
        sys.setrecursionlimit(need)

    _descend(st)
    if st.best_obj <= st.cut:
        _node(st, list(range(st.n)), [0] * st.d, [0] * st.d, 0, 0.0)
    return st.found, st.best_obj, st.sel, list(st.lo), list(st.hi), st.timed_out


def _best_interval(w):
    """Max-sum interval of w; ties prefer the shorter, then the earlier."""
    best_s = -math.inf
    best_a = 0
    best_b = -1
    cur = 0.0
    cur_start = 0
    for k in range(len(w)):
        if cur <= 0.0:
            cur = w[k]
            cur_start = k
        else:
            cur += w[k]
        if cur > best_s:
            take = True
        elif cur == best_s:
            if k - cur_start < best_b - best_a:
                take = True
            elif k - cur_start == best_b - best_a and cur_start < best_a:
                take = True
            else:
                take = False
        else:
            take = False
        if take:
            best_s = cur
            best_a = cur_start
            best_b = k
    return best_a, best_b, best_s


def _descend(st):
    """Seed the incumbent: full span, then per-dimension best intervals."""
    n, d = st.n, st.d
    nts = [len(st.values[t]) for t in range(d)]
    lo = [0] * d
    hi = [nts[t] - 1 for t in range(d)]
    for _ in range(12):
        changed = False
        for t in range(d):
            w = [0.0] * nts[t]
            for i in range(n):
                ri = st.ranks[i]
                ok = True
                for s in range(d):
                    if s != t and not lo[s] <= ri[s] <= hi[s]:
                        ok = False
                        break
                if ok:
                    w[ri[t]] += st.coeff[i]
            cur = 0.0
            for k in range(lo[t], hi[t] + 1):
                cur += w[k]
            a, b, s = _best_interval(w)
            if b >= 0 and s > cur:
                lo[t] = a
                hi[t] = b
                changed = True
        if not changed:
            break
    sel = []
    obj = 0.0
    for i in range(n):
        ri = st.ranks[i]
        ok = True
        for t in range(d):
            if not lo[t] <= ri[t] <= hi[t]:
                ok = False
                break
        if ok:
            sel.append(i)
            obj += st.coeff[i]
    obj = obj - st.lam - st.omega
    if sel and obj > st.best_obj:
        _consider(st, sel, obj)


def _node(st, alive, in_lo, in_hi, in_count, base):
    """Resolve one conflicting sample; returns False when unwinding early."""
    if st.best_obj > st.cut:
        return False
    if st.deadline is not None and time.monotonic() >= st.deadline:
        st.timed_out = True
        return False
    d = st.d

    # span any candidate below this node can reach
    have_r = in_count > 0
    r_lo = list(in_lo) if have_r else [0] * d
    r_hi = list(in_hi) if have_r else [0] * d
    posmass = 0.0
    for i in alive:
        if st.coeff[i] > 0.0:
            posmass += st.coeff[i]
            ri = st.ranks[i]
            if have_r:
                for t in range(d):
                    r = ri[t]
                    if r < r_lo[t]:
                        r_lo[t] = r
                    elif r > r_hi[t]:
                        r_hi[t] = r
            else:
                for t in range(d):
                    r_lo[t] = ri[t]
                    r_hi[t] = ri[t]
                have_r = True
    if not have_r:
        return True
    if base + posmass - st.lam - st.omega <= st.best_obj:
        return True

    # drop samples outside that span; spot penalties already locked in
    live = []
    unavoid = 0.0
    q = -1
    qc = 0.0
    for i in alive:
        c = st.coeff[i]
        ri = st.ranks[i]
        if c > 0.0:
            live.append(i)
            continue
        inside = True
        for t in range(d):
            if not r_lo[t] <= ri[t] <= r_hi[t]:
                inside = False
                break
        if not inside:
            continue
        live.append(i)
        if c < qc:
            qc = c
            q = i
        if in_count:
            forced = True
            for t in range(d):
                if not in_lo[t] <= ri[t] <= in_hi[t]:
                    forced = False
                    break
            if forced:
                unavoid += c
    if base + posmass + unavoid - st.lam - st.omega <= st.best_obj:
        return True

    if q < 0:
        sel = sorted(st.taken + [i for i in live if st.coeff[i] > 0.0])
        _consider(st, sel, base + posmass - st.lam - st.omega)
        return True

    # accept the conflicting sample into the box
    rq = st.ranks[q]
    if in_count:
        nlo = list(in_lo)
        nhi = list(in_hi)
        for t in range(d):
            r = rq[t]
            if r < nlo[t]:
                nlo[t] = r
            elif r > nhi[t]:
                nhi[t] = r
    else:
        nlo = list(rq)
        nhi = list(rq)
    st.taken.append(q)
    ok = _node(st, [i for i in live if i != q], nlo, nhi, in_count + 1,
               base + st.coeff[q])
    st.taken.pop()
    if not ok:
        return False

    # or wall it off on one side of some dimension
    for t in range(d):
        qt = rq[t]
        if in_count == 0 or in_hi[t] < qt:
            sub = [i for i in live if st.ranks[i][t] < qt]
            if not _node(st, sub, in_lo, in_hi, in_count, base):
                return False
        if in_count == 0 or in_lo[t] > qt:
            sub = [i for i in live if st.ranks[i][t] > qt]
            if not _node(st, sub, in_lo, in_hi, in_count, base):
                return False
    return True


def _consider(st, sel, obj):
    """Try a candidate selection against the incumbent (ties: volume, lex)."""
    d = st.d
    lo = [0.0] * d
    hi = [0.0] * d
    for tt in range(d):
        vt = st.values[tt]
        mn = vt[st.ranks[sel[0]][tt]]
        mx = mn
        for idx in range(1, len(sel)):
            v = vt[st.ranks[sel[idx]][tt]]
            if v < mn:
                mn = v
            if v > mx:
                mx = v
        lo[tt] = mn
        hi[tt] = mx
    vol = 1.0
    for tt in range(d):
        vol *= hi[tt] - lo[tt]

    if obj == st.best_obj:
        if not st.found:
            return
        if vol > st.vol:
            return
        if vol == st.vol:
            cmp = 0
            for tt in range(d):
                if lo[tt] < st.lo[tt]:
                    cmp = -1
                    break
                if lo[tt] > st.lo[tt]:
                    cmp = 1
                    break
            if cmp == 0:
                for tt in range(d):
                    if hi[tt] < st.hi[tt]:
                        cmp = -1
                        break
                    if hi[tt] > st.hi[tt]:
                        cmp = 1
                        break
            if cmp >= 0:
                return

    st.found = True
    st.best_obj = obj
    st.sel = sel
    st.lo = lo
    st.hi = hi
    st.vol = vol
