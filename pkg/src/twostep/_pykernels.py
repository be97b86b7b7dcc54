"""Pure-Python search kernels.

Reference twin of ``_ckernels.pyx``: same traversal decisions, same
floating-point operation order, so both return identical hits and
identical work counters. Arguments are Python lists (see
``InvertedIndex.py_lists``); heaps are returned unsorted.
"""
from bisect import bisect_left
from heapq import heappush, heapreplace

EXHAUSTIVE = 0
MAXSCORE = 1
WAND = 2
BMW = 3

END = 2**31 - 1
# bound comparisons are inflated so rounding in partial sums can never prune a qualifying doc
SAFE = 1.0 + 1e-9
NEG_INF = float("-inf")


def _make_score(mode, scale, k1, b, avgdl, doclens):
    k1p = k1 + 1.0
    if mode == 0:
        def score(c, imp, d):
            return c * (imp * scale)
    elif mode == 1:
        def score(c, imp, d):
            tf = imp * scale
            return c * ((k1p * tf) / (tf + k1))
    else:
        def score(c, imp, d):
            tf = float(imp)
            norm = k1 * (1.0 - b + b * doclens[d] / avgdl)
            return c * ((tf * k1p) / (tf + norm))
    return score


def _make_bound(mode, scale, k1, b, avgdl):
    k1p = k1 + 1.0
    if mode == 0:
        def bound(c, imp, dl):
            return c * (imp * scale)
    elif mode == 1:
        def bound(c, imp, dl):
            tf = imp * scale
            return c * ((k1p * tf) / (tf + k1))
    else:
        def bound(c, imp, dl):
            tf = float(imp)
            norm = k1 * (1.0 - b + b * dl / avgdl)
            return c * ((tf * k1p) / (tf + norm))
    return bound


class _TopK:
    __slots__ = ("k", "heap")

    def __init__(self, k):
        self.k = k
        self.heap = []

    def insert(self, s, d):
        h = self.heap
        if len(h) < self.k:
            heappush(h, (s, -d))
            return True
        if (s, -d) > h[0]:
            heapreplace(h, (s, -d))
            return True
        return False

    def theta(self):
        return self.heap[0][0] if len(self.heap) == self.k else NEG_INF

    def result(self):
        return [-nd for _, nd in self.heap], [s for s, _ in self.heap]


def search(algo, docs, imps, blast, bmax, bminlen, doclens, starts, ends, bstarts, bends,
           coef, ub, mode, scale, k1, b, avgdl, k):
    n = len(starts)
    score = _make_score(mode, scale, k1, b, avgdl, doclens)
    top = _TopK(k)
    pos = list(starts)
    end = list(ends)
    cur = [docs[pos[t]] if pos[t] < end[t] else END for t in range(n)]
    touched = 0
    fully = 0

    def advance(t):
        p = pos[t] + 1
        pos[t] = p
        cur[t] = docs[p] if p < end[t] else END

    def nextgeq(t, target):
        p = pos[t]
        if p < end[t] and docs[p] < target:
            p = bisect_left(docs, target, p, end[t])
            pos[t] = p
        cur[t] = docs[p] if p < end[t] else END

    if algo == EXHAUSTIVE:
        while True:
            d = min(cur) if n else END
            if d == END:
                break
            s = 0.0
            for t in range(n):
                if cur[t] == d:
                    s += score(coef[t], imps[pos[t]], d)
                    touched += 1
                    advance(t)
            fully += 1
            top.insert(s, d)
        return top.result() + (touched, fully)

    contrib = [0.0] * n

    if algo == MAXSCORE:
        order = sorted(range(n), key=lambda t: (ub[t], t))
        cum = []
        acc = 0.0
        for t in order:
            acc += ub[t]
            cum.append(acc)
        first = 0
        theta = NEG_INF
        while first < n:
            d = END
            for i in range(first, n):
                if cur[order[i]] < d:
                    d = cur[order[i]]
            if d == END:
                break
            partial = 0.0
            for i in range(first, n):
                t = order[i]
                if cur[t] == d:
                    c = score(coef[t], imps[pos[t]], d)
                    contrib[t] = c
                    partial += c
                    touched += 1
                    advance(t)
            complete = True
            for i in range(first - 1, -1, -1):
                if (partial + cum[i]) * SAFE <= theta:
                    complete = False
                    break
                t = order[i]
                nextgeq(t, d)
                if cur[t] == d:
                    c = score(coef[t], imps[pos[t]], d)
                    contrib[t] = c
                    partial += c
                    touched += 1
            if complete:
                s = 0.0
                for t in range(n):
                    s += contrib[t]
                fully += 1
                if top.insert(s, d):
                    theta = top.theta()
                    while first < n and cum[first] * SAFE <= theta:
                        first += 1
            for t in range(n):
                contrib[t] = 0.0
        return top.result() + (touched, fully)

    # WAND and BMW
    bound = _make_bound(mode, scale, k1, b, avgdl)
    bp = list(bstarts)
    ordr = list(range(n))
    theta = NEG_INF
    while True:
        ordr.sort(key=lambda t: (cur[t], t))
        acc = 0.0
        p = -1
        for i in range(n):
            t = ordr[i]
            if cur[t] == END:
                break
            acc += ub[t]
            if acc * SAFE > theta:
                p = i
                break
        if p < 0:
            break
        pd = cur[ordr[p]]
        while p + 1 < n and cur[ordr[p + 1]] == pd:
            p += 1

        if algo == BMW:
            bsum = 0.0
            for i in range(p + 1):
                t = ordr[i]
                q = bp[t]
                while q < bends[t] and blast[q] < pd:
                    q += 1
                bp[t] = q
                if q < bends[t]:
                    bsum += bound(coef[t], bmax[q], bminlen[q] if bminlen is not None else 0)
            if not bsum * SAFE > theta:
                nxt = END
                for i in range(p + 1):
                    t = ordr[i]
                    q = bp[t]
                    if q < bends[t] and blast[q] + 1 < nxt:
                        nxt = blast[q] + 1
                if p + 1 < n and cur[ordr[p + 1]] < nxt:
                    nxt = cur[ordr[p + 1]]
                if nxt <= pd:
                    nxt = pd + 1
                best = ordr[0]
                for i in range(1, p + 1):
                    if ub[ordr[i]] > ub[best]:
                        best = ordr[i]
                nextgeq(best, nxt)
                continue

        if cur[ordr[0]] == pd:
            for i in range(p + 1):
                t = ordr[i]
                contrib[t] = score(coef[t], imps[pos[t]], pd)
                touched += 1
                advance(t)
            s = 0.0
            for t in range(n):
                s += contrib[t]
                contrib[t] = 0.0
            fully += 1
            if top.insert(s, pd):
                theta = top.theta()
        else:
            j = p
            while cur[ordr[j]] == pd:
                j -= 1
            nextgeq(ordr[j], pd)
    return top.result() + (touched, fully)


def search_filtered(docs, imps, doclens, starts, ends, coef, mode, scale, k1, b, avgdl,
                    candidates, k):
    """Score only ``candidates`` (sorted, unique) by skipping through the postings."""
    n = len(starts)
    score = _make_score(mode, scale, k1, b, avgdl, doclens)
    top = _TopK(k)
    pos = list(starts)
    end = list(ends)
    touched = 0
    for d in candidates:
        s = 0.0
        for t in range(n):
            p = pos[t]
            if p < end[t] and docs[p] < d:
                p = bisect_left(docs, d, p, end[t])
                pos[t] = p
            if p < end[t] and docs[p] == d:
                s += score(coef[t], imps[p], d)
                touched += 1
        top.insert(s, d)
    return top.result() + (touched, len(candidates))


def rescore_forward(indptr, fterms, fweights, qterms, qweights, candidates, k):
    """Exact dot products of the query with each candidate's stored vector."""
    top = _TopK(k)
    nq = len(qterms)
    touched = 0
    for d in candidates:
        j = indptr[d]
        hi = indptr[d + 1]
        s = 0.0
        for i in range(nq):
            t = qterms[i]
            if j < hi and fterms[j] < t:
                j = bisect_left(fterms, t, j, hi)
            if j < hi and fterms[j] == t:
                s += qweights[i] * fweights[j]
                touched += 1
        top.insert(s, d)
    return top.result() + (touched, len(candidates))
