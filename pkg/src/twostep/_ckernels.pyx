# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled search kernels.

Mirrors ``_pykernels`` decision for decision and operation for
operation; the traversal loops run without the GIL.
"""
import numpy as np

from libc.stdlib cimport malloc, free
from libc.math cimport INFINITY

cdef int END = 2147483647
cdef double SAFE = 1.0 + 1e-9

cdef enum:
    EXHAUSTIVE = 0
    MAXSCORE = 1
    WAND = 2
    BMW = 3


ctypedef struct Ctx:
    const int* docs
    const unsigned char* imps
    const int* blast
    const unsigned char* bmax
    const int* bminlen
    const int* doclens
    long long* pos
    long long* end
    long long* bp
    long long* bend
    int* cur
    const double* coef
    const double* ub
    double* contrib
    int n
    int mode
    double scale
    double k1
    double k1p
    double b
    double avgdl
    long long touched
    long long fully
    double* hs
    int* hd
    int hn
    int hk


cdef inline double score_at(Ctx* c, int t, long long p, int d) noexcept nogil:
    cdef double tf, norm
    cdef int imp = c.imps[p]
    if c.mode == 0:
        return c.coef[t] * (imp * c.scale)
    elif c.mode == 1:
        tf = imp * c.scale
        return c.coef[t] * ((c.k1p * tf) / (tf + c.k1))
    tf = <double>imp
    norm = c.k1 * (1.0 - c.b + c.b * <double>c.doclens[d] / c.avgdl)
    return c.coef[t] * ((tf * c.k1p) / (tf + norm))


cdef inline double bound_at(Ctx* c, int t, long long q) noexcept nogil:
    cdef double tf, norm
    cdef int imp = c.bmax[q]
    if c.mode == 0:
        return c.coef[t] * (imp * c.scale)
    elif c.mode == 1:
        tf = imp * c.scale
        return c.coef[t] * ((c.k1p * tf) / (tf + c.k1))
    tf = <double>imp
    norm = c.k1 * (1.0 - c.b + c.b * <double>c.bminlen[q] / c.avgdl)
    return c.coef[t] * ((tf * c.k1p) / (tf + norm))


# -- top-k heap: root is the worst entry (lowest score, then highest docid)

cdef inline bint worse(double s1, int d1, double s2, int d2) noexcept nogil:
    return s1 < s2 or (s1 == s2 and d1 > d2)


cdef bint heap_insert(Ctx* c, double s, int d) noexcept nogil:
    cdef int i, parent, child, n
    if c.hn < c.hk:
        i = c.hn
        c.hn += 1
        while i > 0:
            parent = (i - 1) >> 1
            if worse(s, d, c.hs[parent], c.hd[parent]):
                c.hs[i] = c.hs[parent]
                c.hd[i] = c.hd[parent]
                i = parent
            else:
                break
        c.hs[i] = s
        c.hd[i] = d
        return True
    if not worse(c.hs[0], c.hd[0], s, d):
        return False
    n = c.hn
    i = 0
    while True:
        child = 2 * i + 1
        if child >= n:
            break
        if child + 1 < n and worse(c.hs[child + 1], c.hd[child + 1], c.hs[child], c.hd[child]):
            child += 1
        if worse(c.hs[child], c.hd[child], s, d):
            c.hs[i] = c.hs[child]
            c.hd[i] = c.hd[child]
            i = child
        else:
            break
    c.hs[i] = s
    c.hd[i] = d
    return True


cdef inline double heap_theta(Ctx* c) noexcept nogil:
    if c.hn == c.hk:
        return c.hs[0]
    return -INFINITY


# -- cursors

cdef inline void advance(Ctx* c, int t) noexcept nogil:
    cdef long long p = c.pos[t] + 1
    c.pos[t] = p
    c.cur[t] = c.docs[p] if p < c.end[t] else END


cdef inline long long lower_bound(const int* a, long long lo, long long hi, int target) noexcept nogil:
    """First index in [lo, hi) with a[i] >= target, galloping from lo."""
    cdef long long step = 1, prev = lo, mid, top
    if lo >= hi or a[lo] >= target:
        return lo
    while lo + step < hi and a[lo + step] < target:
        prev = lo + step
        step <<= 1
    top = lo + step
    if top > hi:
        top = hi
    lo = prev + 1
    while lo < top:
        mid = (lo + top) >> 1
        if a[mid] < target:
            lo = mid + 1
        else:
            top = mid
    return lo


cdef inline void nextgeq(Ctx* c, int t, int target) noexcept nogil:
    cdef long long p = c.pos[t]
    if p < c.end[t] and c.docs[p] < target:
        p = lower_bound(c.docs, p, c.end[t], target)
        c.pos[t] = p
    c.cur[t] = c.docs[p] if p < c.end[t] else END


cdef void run_exhaustive(Ctx* c) noexcept nogil:
    cdef int t, d
    cdef double s
    while True:
        d = END
        for t in range(c.n):
            if c.cur[t] < d:
                d = c.cur[t]
        if d == END:
            break
        s = 0.0
        for t in range(c.n):
            if c.cur[t] == d:
                s += score_at(c, t, c.pos[t], d)
                c.touched += 1
                advance(c, t)
        c.fully += 1
        heap_insert(c, s, d)


cdef void sort_by_ub(int* order, const double* ub, int n) noexcept nogil:
    cdef int i, j, x
    for i in range(n):
        order[i] = i
    for i in range(1, n):
        x = order[i]
        j = i - 1
        while j >= 0 and (ub[order[j]] > ub[x] or (ub[order[j]] == ub[x] and order[j] > x)):
            order[j + 1] = order[j]
            j -= 1
        order[j + 1] = x


cdef void run_maxscore(Ctx* c, int* order, double* cum) noexcept nogil:
    cdef int n = c.n
    cdef int i, t, d, first = 0
    cdef double acc = 0.0, partial, s, cc, theta = -INFINITY
    cdef bint complete
    sort_by_ub(order, c.ub, n)
    for i in range(n):
        acc += c.ub[order[i]]
        cum[i] = acc
    while first < n:
        d = END
        for i in range(first, n):
            if c.cur[order[i]] < d:
                d = c.cur[order[i]]
        if d == END:
            break
        partial = 0.0
        for i in range(first, n):
            t = order[i]
            if c.cur[t] == d:
                cc = score_at(c, t, c.pos[t], d)
                c.contrib[t] = cc
                partial += cc
                c.touched += 1
                advance(c, t)
        complete = True
        i = first - 1
        while i >= 0:
            if (partial + cum[i]) * SAFE <= theta:
                complete = False
                break
            t = order[i]
            nextgeq(c, t, d)
            if c.cur[t] == d:
                cc = score_at(c, t, c.pos[t], d)
                c.contrib[t] = cc
                partial += cc
                c.touched += 1
            i -= 1
        if complete:
            s = 0.0
            for t in range(n):
                s += c.contrib[t]
            c.fully += 1
            if heap_insert(c, s, d):
                theta = heap_theta(c)
                while first < n and cum[first] * SAFE <= theta:
                    first += 1
        for t in range(n):
            c.contrib[t] = 0.0


cdef inline void sort_by_cur(int* ordr, const int* cur, int n) noexcept nogil:
    cdef int i, j, x
    for i in range(1, n):
        x = ordr[i]
        j = i - 1
        while j >= 0 and (cur[ordr[j]] > cur[x] or (cur[ordr[j]] == cur[x] and ordr[j] > x)):
            ordr[j + 1] = ordr[j]
            j -= 1
        ordr[j + 1] = x


cdef void run_wand(Ctx* c, int* ordr, bint blockmax) noexcept nogil:
    cdef int n = c.n
    cdef int i, j, t, p, pd, nxt, best
    cdef long long q
    cdef double acc, bsum, s, theta = -INFINITY
    for i in range(n):
        ordr[i] = i
    while True:
        sort_by_cur(ordr, c.cur, n)
        acc = 0.0
        p = -1
        for i in range(n):
            t = ordr[i]
            if c.cur[t] == END:
                break
            acc += c.ub[t]
            if acc * SAFE > theta:
                p = i
                break
        if p < 0:
            break
        pd = c.cur[ordr[p]]
        while p + 1 < n and c.cur[ordr[p + 1]] == pd:
            p += 1

        if blockmax:
            bsum = 0.0
            for i in range(p + 1):
                t = ordr[i]
                q = c.bp[t]
                while q < c.bend[t] and c.blast[q] < pd:
                    q += 1
                c.bp[t] = q
                if q < c.bend[t]:
                    bsum += bound_at(c, t, q)
            if not bsum * SAFE > theta:
                nxt = END
                for i in range(p + 1):
                    t = ordr[i]
                    q = c.bp[t]
                    if q < c.bend[t] and c.blast[q] + 1 < nxt:
                        nxt = c.blast[q] + 1
                if p + 1 < n and c.cur[ordr[p + 1]] < nxt:
                    nxt = c.cur[ordr[p + 1]]
                if nxt <= pd:
                    nxt = pd + 1
                best = ordr[0]
                for i in range(1, p + 1):
                    if c.ub[ordr[i]] > c.ub[best]:
                        best = ordr[i]
                nextgeq(c, best, nxt)
                continue

        if c.cur[ordr[0]] == pd:
            for i in range(p + 1):
                t = ordr[i]
                c.contrib[t] = score_at(c, t, c.pos[t], pd)
                c.touched += 1
                advance(c, t)
            s = 0.0
            for t in range(n):
                s += c.contrib[t]
                c.contrib[t] = 0.0
            c.fully += 1
            if heap_insert(c, s, pd):
                theta = heap_theta(c)
        else:
            j = p
            while c.cur[ordr[j]] == pd:
                j -= 1
            nextgeq(c, ordr[j], pd)


cdef void run_filtered(Ctx* c, const int* cand, long long ncand) noexcept nogil:
    cdef long long ci, p
    cdef int t, d
    cdef double s
    for ci in range(ncand):
        d = cand[ci]
        s = 0.0
        for t in range(c.n):
            p = c.pos[t]
            if p < c.end[t] and c.docs[p] < d:
                p = lower_bound(c.docs, p, c.end[t], d)
                c.pos[t] = p
            if p < c.end[t] and c.docs[p] == d:
                s += score_at(c, t, p, d)
                c.touched += 1
        heap_insert(c, s, d)
    c.fully = ncand


cdef class _Scratch:
    """Per-call C buffers, freed on collection."""
    cdef Ctx c
    cdef int* order
    cdef double* cum

    def __cinit__(self, int n, int k):
        cdef int m = n if n > 0 else 1
        self.c.pos = <long long*>malloc(m * sizeof(long long))
        self.c.end = <long long*>malloc(m * sizeof(long long))
        self.c.bp = <long long*>malloc(m * sizeof(long long))
        self.c.bend = <long long*>malloc(m * sizeof(long long))
        self.c.cur = <int*>malloc(m * sizeof(int))
        self.c.contrib = <double*>malloc(m * sizeof(double))
        self.order = <int*>malloc(m * sizeof(int))
        self.cum = <double*>malloc(m * sizeof(double))
        self.c.hs = <double*>malloc(k * sizeof(double))
        self.c.hd = <int*>malloc(k * sizeof(int))
        if (not self.c.pos or not self.c.end or not self.c.bp or not self.c.bend or not self.c.cur
                or not self.c.contrib or not self.order or not self.cum or not self.c.hs or not self.c.hd):
            raise MemoryError()
        self.c.n = n
        self.c.hk = k
        self.c.hn = 0
        self.c.touched = 0
        self.c.fully = 0
        for i in range(n):
            self.c.contrib[i] = 0.0

    def __dealloc__(self):
        free(self.c.pos)
        free(self.c.end)
        free(self.c.bp)
        free(self.c.bend)
        free(self.c.cur)
        free(self.c.contrib)
        free(self.order)
        free(self.cum)
        free(self.c.hs)
        free(self.c.hd)

    cdef tuple result(self):
        cdef int i
        docs = np.empty(self.c.hn, dtype=np.int32)
        scores = np.empty(self.c.hn, dtype=np.float64)
        cdef int[::1] dv = docs
        cdef double[::1] sv = scores
        for i in range(self.c.hn):
            dv[i] = self.c.hd[i]
            sv[i] = self.c.hs[i]
        return docs, scores, int(self.c.touched), int(self.c.fully)


cdef void set_params(Ctx* c, int mode, double scale, double k1, double b, double avgdl) noexcept:
    c.mode = mode
    c.scale = scale
    c.k1 = k1
    c.k1p = k1 + 1.0
    c.b = b
    c.avgdl = avgdl


def search(int algo, const int[::1] docs, const unsigned char[::1] imps,
           const int[::1] blast, const unsigned char[::1] bmax, const int[::1] bminlen,
           const int[::1] doclens, const long long[::1] starts, const long long[::1] ends,
           const long long[::1] bstarts, const long long[::1] bends,
           const double[::1] coef, const double[::1] ub,
           int mode, double scale, double k1, double b, double avgdl, int k):
    """All array arguments must be non-empty (pad with one dummy element)."""
    cdef int n = starts.shape[0]
    cdef int t
    cdef _Scratch sc = _Scratch(n, k)
    cdef Ctx* c = &sc.c
    c.docs = &docs[0]
    c.imps = &imps[0]
    c.blast = &blast[0]
    c.bmax = &bmax[0]
    c.bminlen = &bminlen[0]
    c.doclens = &doclens[0]
    c.coef = &coef[0]
    c.ub = &ub[0]
    set_params(c, mode, scale, k1, b, avgdl)
    for t in range(n):
        c.pos[t] = starts[t]
        c.end[t] = ends[t]
        c.bp[t] = bstarts[t]
        c.bend[t] = bends[t]
        c.cur[t] = docs[starts[t]] if starts[t] < ends[t] else END
    with nogil:
        if algo == EXHAUSTIVE:
            run_exhaustive(c)
        elif algo == MAXSCORE:
            run_maxscore(c, sc.order, sc.cum)
        else:
            run_wand(c, sc.order, algo == BMW)
    return sc.result()


def search_filtered(const int[::1] docs, const unsigned char[::1] imps, const int[::1] doclens,
                    const long long[::1] starts, const long long[::1] ends,
                    const double[::1] coef, int mode, double scale, double k1, double b,
                    double avgdl, const int[::1] candidates, int k):
    cdef int n = starts.shape[0]
    cdef int t
    cdef long long ncand = candidates.shape[0]
    cdef _Scratch sc = _Scratch(n, k)
    cdef Ctx* c = &sc.c
    c.docs = &docs[0]
    c.imps = &imps[0]
    c.doclens = &doclens[0]
    c.coef = &coef[0]
    set_params(c, mode, scale, k1, b, avgdl)
    for t in range(n):
        c.pos[t] = starts[t]
        c.end[t] = ends[t]
    with nogil:
        run_filtered(c, &candidates[0], ncand)
    return sc.result()


def rescore_forward(const long long[::1] indptr, const unsigned int[::1] fterms,
                    const double[::1] fweights, const unsigned int[::1] qterms,
                    const double[::1] qweights, const int[::1] candidates, int k):
    cdef long long ci, j, hi, lo2, top, mid
    cdef int i, d
    cdef int nq = qterms.shape[0]
    cdef unsigned int t
    cdef double s
    cdef long long ncand = candidates.shape[0]
    cdef _Scratch sc = _Scratch(0, k)
    cdef Ctx* c = &sc.c
    with nogil:
        for ci in range(ncand):
            d = candidates[ci]
            j = indptr[d]
            hi = indptr[d + 1]
            s = 0.0
            for i in range(nq):
                t = qterms[i]
                if j < hi and fterms[j] < t:
                    lo2 = j
                    top = hi
                    while lo2 < top:
                        mid = (lo2 + top) >> 1
                        if fterms[mid] < t:
                            lo2 = mid + 1
                        else:
                            top = mid
                    j = lo2
                if j < hi and fterms[j] == t:
                    s += qweights[i] * fweights[j]
                    c.touched += 1
            heap_insert(c, s, d)
        c.fully = ncand
    return sc.result()
