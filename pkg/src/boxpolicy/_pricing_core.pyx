# cython: language_level=3, boundscheck=False, wraparound=False, initializedcheck=False
"""Compiled twin of the box-search kernel.

Mirrors ``_pricing_py`` operation for operation: identical pruning
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

import numpy as np

from libc.math cimport INFINITY
from posix.time cimport CLOCK_MONOTONIC, clock_gettime, timespec

cimport numpy as cnp


cdef double _now() noexcept nogil:
    cdef timespec ts
    clock_gettime(CLOCK_MONOTONIC, &ts)
    return ts.tv_sec + ts.tv_nsec * 1e-9


cdef class _State:
    cdef cnp.int32_t[:, ::1] ranks
    cdef double[::1] coeff
    cdef double[::1] values_flat
    cdef cnp.int64_t[::1] offsets
    cdef double lam
    cdef double omega
    cdef int n
    cdef int d
    cdef double best_obj
    cdef bint found
    cdef cnp.int32_t[::1] best_sel
    cdef int best_len
    cdef double[::1] best_lo
    cdef double[::1] best_hi
    cdef double[::1] cand_lo
    cdef double[::1] cand_hi
    cdef double vol
    cdef double deadline  # negative when no limit is set
    cdef bint timed_out
    cdef double cut
    cdef cnp.int32_t[:, ::1] alive_buf  # row L holds the alive set at depth L
    cdef cnp.int32_t[:, ::1] span_lo  # row L holds the forced span at depth L
    cdef cnp.int32_t[:, ::1] span_hi
    cdef cnp.int32_t[::1] r_lo  # scratch: reachable span of the current node
    cdef cnp.int32_t[::1] r_hi
    cdef cnp.int32_t[::1] taken  # accepted samples, kept sorted ascending
    cdef int taken_cnt
    cdef cnp.int32_t[::1] leaf_sel
    cdef double[::1] w
    cdef cnp.int32_t[::1] dlo  # scratch: coordinate-descent intervals
    cdef cnp.int32_t[::1] dhi


def search(ranks, coeff, values, lam, omega, time_limit, target=None):
    """Maximize covered coefficient mass minus lam and omega over all boxes.

    Same contract as the pure twin: returns (found, objective, selection,
    lo, hi, timed_out) with the selection in ascending local order and
    lo/hi giving the coordinate span of the selected samples. With
    ``target`` set the search stops as soon as a candidate strictly above
    it is recorded; the reported objective is then that candidate's true
    value, not a proven optimum.
    """
    cdef _State st = _State()
    st.ranks = np.array(ranks, dtype=np.int32, order="C")
    st.coeff = np.array(coeff, dtype=np.float64)
    st.lam = lam
    st.omega = omega
    st.n = st.coeff.shape[0]
    st.d = len(values)

    cdef int max_nt = 1
    offsets = np.zeros(st.d + 1, dtype=np.int64)
    parts = []
    cdef int t
    for t in range(st.d):
        vals = np.array(values[t], dtype=np.float64)
        parts.append(vals)
        offsets[t + 1] = offsets[t] + vals.shape[0]
        if vals.shape[0] > max_nt:
            max_nt = vals.shape[0]
    st.values_flat = (
        np.concatenate(parts) if parts else np.zeros(0, dtype=np.float64)
    )
    st.offsets = offsets

    st.best_obj = -lam - omega
    st.found = False
    st.best_sel = np.zeros(max(st.n, 1), dtype=np.int32)
    st.best_len = 0
    st.best_lo = np.zeros(st.d, dtype=np.float64)
    st.best_hi = np.zeros(st.d, dtype=np.float64)
    st.cand_lo = np.zeros(st.d, dtype=np.float64)
    st.cand_hi = np.zeros(st.d, dtype=np.float64)
    st.vol = INFINITY
    st.deadline = -1.0 if time_limit is None else _now() + time_limit
    st.timed_out = False
    st.cut = INFINITY if target is None else float(target)

    if st.deadline >= 0.0 and _now() >= st.deadline:
        st.timed_out = True
        return False, st.best_obj, [], [], [], True

    st.alive_buf = np.zeros((st.n + 2, max(st.n, 1)), dtype=np.int32)
    st.span_lo = np.zeros((st.n + 2, max(st.d, 1)), dtype=np.int32)
    st.span_hi = np.zeros((st.n + 2, max(st.d, 1)), dtype=np.int32)
    st.r_lo = np.zeros(max(st.d, 1), dtype=np.int32)
    st.r_hi = np.zeros(max(st.d, 1), dtype=np.int32)
    st.taken = np.zeros(max(st.n, 1), dtype=np.int32)
    st.taken_cnt = 0
    st.leaf_sel = np.zeros(max(st.n, 1), dtype=np.int32)
    st.w = np.zeros(max_nt, dtype=np.float64)
    st.dlo = np.zeros(max(st.d, 1), dtype=np.int32)
    st.dhi = np.zeros(max(st.d, 1), dtype=np.int32)

    _descend(st)
    cdef int i
    if st.best_obj <= st.cut:
        for i in range(st.n):
            st.alive_buf[0, i] = i
        _node(st, 0, st.n, 0, 0.0)

    sel = [int(st.best_sel[i]) for i in range(st.best_len)]
    lo = [st.best_lo[t] for t in range(st.d)] if st.found else []
    hi = [st.best_hi[t] for t in range(st.d)] if st.found else []
    return st.found, st.best_obj, sel, lo, hi, st.timed_out


cdef void _best_interval(double[::1] w, int nt, int* out_a, int* out_b,
                         double* out_s) noexcept nogil:
    """Max-sum interval of w; ties prefer the shorter, then the earlier."""
    cdef double best_s = -INFINITY
    cdef int best_a = 0
    cdef int best_b = -1
    cdef double cur = 0.0
    cdef int cur_start = 0
    cdef int k
    cdef bint take
    for k in range(nt):
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
    out_a[0] = best_a
    out_b[0] = best_b
    out_s[0] = best_s


cdef void _descend(_State st):
    """Seed the incumbent: full span, then per-dimension best intervals."""
    cdef int n = st.n
    cdef int d = st.d
    cdef int t, s, i, k, nt, a, b
    cdef int passes
    cdef bint changed, ok
    cdef double cur, bs
    for t in range(d):
        st.dlo[t] = 0
        st.dhi[t] = <int> (st.offsets[t + 1] - st.offsets[t]) - 1
    for passes in range(12):
        changed = False
        for t in range(d):
            nt = <int> (st.offsets[t + 1] - st.offsets[t])
            for k in range(nt):
                st.w[k] = 0.0
            for i in range(n):
                ok = True
                for s in range(d):
                    if s != t and not (
                        st.dlo[s] <= st.ranks[i, s] <= st.dhi[s]
                    ):
                        ok = False
                        break
                if ok:
                    st.w[st.ranks[i, t]] += st.coeff[i]
            cur = 0.0
            for k in range(st.dlo[t], st.dhi[t] + 1):
                cur += st.w[k]
            _best_interval(st.w, nt, &a, &b, &bs)
            if b >= 0 and bs > cur:
                st.dlo[t] = a
                st.dhi[t] = b
                changed = True
        if not changed:
            break
    cdef int selcnt = 0
    cdef double obj = 0.0
    for i in range(n):
        ok = True
        for t in range(d):
            if not st.dlo[t] <= st.ranks[i, t] <= st.dhi[t]:
                ok = False
                break
        if ok:
            st.leaf_sel[selcnt] = i
            selcnt += 1
            obj += st.coeff[i]
    obj = obj - st.lam - st.omega
    if selcnt > 0 and obj > st.best_obj:
        _consider(st, selcnt, obj)


cdef bint _node(_State st, int lvl, int cnt, int in_count, double base):
    """Resolve one conflicting sample; returns False when unwinding early."""
    if st.best_obj > st.cut:
        return False
    if st.deadline >= 0.0 and _now() >= st.deadline:
        st.timed_out = True
        return False
    cdef int d = st.d
    cdef int t, i, idx, r

    # span any candidate below this node can reach
    cdef bint have_r = in_count > 0
    if have_r:
        for t in range(d):
            st.r_lo[t] = st.span_lo[lvl, t]
            st.r_hi[t] = st.span_hi[lvl, t]
    cdef double posmass = 0.0
    for idx in range(cnt):
        i = st.alive_buf[lvl, idx]
        if st.coeff[i] > 0.0:
            posmass += st.coeff[i]
            if have_r:
                for t in range(d):
                    r = st.ranks[i, t]
                    if r < st.r_lo[t]:
                        st.r_lo[t] = r
                    elif r > st.r_hi[t]:
                        st.r_hi[t] = r
            else:
                for t in range(d):
                    st.r_lo[t] = st.ranks[i, t]
                    st.r_hi[t] = st.ranks[i, t]
                have_r = True
    if not have_r:
        return True
    if base + posmass - st.lam - st.omega <= st.best_obj:
        return True

    # drop samples outside that span; spot penalties already locked in
    cdef int livecnt = 0
    cdef double unavoid = 0.0
    cdef int q = -1
    cdef double qc = 0.0
    cdef double c
    cdef bint inside, forced
    for idx in range(cnt):
        i = st.alive_buf[lvl, idx]
        c = st.coeff[i]
        if c > 0.0:
            st.alive_buf[lvl, livecnt] = i
            livecnt += 1
            continue
        inside = True
        for t in range(d):
            if not st.r_lo[t] <= st.ranks[i, t] <= st.r_hi[t]:
                inside = False
                break
        if not inside:
            continue
        st.alive_buf[lvl, livecnt] = i
        livecnt += 1
        if c < qc:
            qc = c
            q = i
        if in_count:
            forced = True
            for t in range(d):
                if not st.span_lo[lvl, t] <= st.ranks[i, t] <= st.span_hi[lvl, t]:
                    forced = False
                    break
            if forced:
                unavoid += c
    if base + posmass + unavoid - st.lam - st.omega <= st.best_obj:
        return True

    cdef int selcnt, p, g
    if q < 0:
        # merge sorted accepted samples with the ascending eligible rewards
        selcnt = 0
        p = 0
        g = 0
        while g < livecnt and st.coeff[st.alive_buf[lvl, g]] <= 0.0:
            g += 1
        while p < st.taken_cnt or g < livecnt:
            if g >= livecnt or (
                p < st.taken_cnt and st.taken[p] < st.alive_buf[lvl, g]
            ):
                st.leaf_sel[selcnt] = st.taken[p]
                p += 1
            else:
                st.leaf_sel[selcnt] = st.alive_buf[lvl, g]
                g += 1
                while g < livecnt and st.coeff[st.alive_buf[lvl, g]] <= 0.0:
                    g += 1
            selcnt += 1
        _consider(st, selcnt, base + posmass - st.lam - st.omega)
        return True

    # accept the conflicting sample into the box
    cdef int sub
    for t in range(d):
        r = st.ranks[q, t]
        if in_count:
            st.span_lo[lvl + 1, t] = st.span_lo[lvl, t]
            st.span_hi[lvl + 1, t] = st.span_hi[lvl, t]
            if r < st.span_lo[lvl + 1, t]:
                st.span_lo[lvl + 1, t] = r
            elif r > st.span_hi[lvl + 1, t]:
                st.span_hi[lvl + 1, t] = r
        else:
            st.span_lo[lvl + 1, t] = r
            st.span_hi[lvl + 1, t] = r
    sub = 0
    for idx in range(livecnt):
        i = st.alive_buf[lvl, idx]
        if i != q:
            st.alive_buf[lvl + 1, sub] = i
            sub += 1
    p = st.taken_cnt
    while p > 0 and st.taken[p - 1] > q:
        st.taken[p] = st.taken[p - 1]
        p -= 1
    st.taken[p] = q
    st.taken_cnt += 1
    cdef bint ok = _node(st, lvl + 1, sub, in_count + 1, base + st.coeff[q])
    st.taken_cnt -= 1
    while p < st.taken_cnt:
        st.taken[p] = st.taken[p + 1]
        p += 1
    if not ok:
        return False

    # or wall it off on one side of some dimension
    cdef int qt
    for t in range(d):
        qt = st.ranks[q, t]
        if in_count == 0 or st.span_hi[lvl, t] < qt:
            sub = 0
            for idx in range(livecnt):
                i = st.alive_buf[lvl, idx]
                if st.ranks[i, t] < qt:
                    st.alive_buf[lvl + 1, sub] = i
                    sub += 1
            for s in range(d):
                st.span_lo[lvl + 1, s] = st.span_lo[lvl, s]
                st.span_hi[lvl + 1, s] = st.span_hi[lvl, s]
            if not _node(st, lvl + 1, sub, in_count, base):
                return False
        if in_count == 0 or st.span_lo[lvl, t] > qt:
            sub = 0
            for idx in range(livecnt):
                i = st.alive_buf[lvl, idx]
                if st.ranks[i, t] > qt:
                    st.alive_buf[lvl + 1, sub] = i
                    sub += 1
            for s in range(d):
                st.span_lo[lvl + 1, s] = st.span_lo[lvl, s]
                st.span_hi[lvl + 1, s] = st.span_hi[lvl, s]
            if not _node(st, lvl + 1, sub, in_count, base):
                return False
    return True


cdef void _consider(_State st, int selcnt, double obj):
    """Try a candidate selection against the incumbent (ties: volume, lex)."""
    cdef int tt, idx
    cdef cnp.int64_t vbase
    cdef double mn, mx, v
    for tt in range(st.d):
        vbase = st.offsets[tt]
        mn = st.values_flat[vbase + st.ranks[st.leaf_sel[0], tt]]
        mx = mn
        for idx in range(1, selcnt):
            v = st.values_flat[vbase + st.ranks[st.leaf_sel[idx], tt]]
            if v < mn:
                mn = v
            if v > mx:
                mx = v
        st.cand_lo[tt] = mn
        st.cand_hi[tt] = mx
    cdef double vol = 1.0
    for tt in range(st.d):
        vol *= st.cand_hi[tt] - st.cand_lo[tt]

    cdef int cmp
    if obj == st.best_obj:
        if not st.found:
            return
        if vol > st.vol:
            return
        if vol == st.vol:
            # lexicographic comparison of (lo, hi); keep incumbent on equality
            cmp = 0
            for tt in range(st.d):
                if st.cand_lo[tt] < st.best_lo[tt]:
                    cmp = -1
                    break
                if st.cand_lo[tt] > st.best_lo[tt]:
                    cmp = 1
                    break
            if cmp == 0:
                for tt in range(st.d):
                    if st.cand_hi[tt] < st.best_hi[tt]:
                        cmp = -1
                        break
                    if st.cand_hi[tt] > st.best_hi[tt]:
                        cmp = 1
                        break
            if cmp >= 0:
                return

    st.found = True
    st.best_obj = obj
    st.best_len = selcnt
    for idx in range(selcnt):
        st.best_sel[idx] = st.leaf_sel[idx]
    for tt in range(st.d):
        st.best_lo[tt] = st.cand_lo[tt]
        st.best_hi[tt] = st.cand_hi[tt]
    st.vol = vol
