"""Compiled inner loops for the co-evolution stage.

Every kernel reads only the iteration-t arrays and writes to caller-owned
output slots indexed by position in ``rows``; disjoint row chunks can run on
separate threads and produce identical results in any order.
"""
import numpy as np
from numba import njit


@njit(nogil=True, cache=True, inline="always")
def _dist(S, i, j):
    dx = abs(S[i, 0] - S[j, 0]) - (S[i, 1] + S[j, 1])
    dy = abs(S[i, 2] - S[j, 2]) - (S[i, 3] + S[j, 3])
    return max(dx, 0.0) + max(dy, 0.0)


@njit(nogil=True, cache=True, inline="always")
def _l1(P, i, j):
    acc = 0.0
    for c in range(P.shape[1]):
        acc += abs(P[i, c] - P[j, c])
    return acc


@njit(nogil=True, cache=True)
def update_rows(rows, S, P, live, first, indptr, indices, w0, r, theta, shrink,
                out_s, out_p, out_lam, out_nbr, out_rel):
    """Candidate t+1 vectors and status pointer for each segment in ``rows``.

    ``first`` selects the boundary-obstacle weights (CSR ``indptr/indices/w0``,
    only color-compatible adjacent pairs stored) instead of the distance/color
    weights. Neighbors whose weight is forced to zero carry no relation and are
    left out of the normaliser.
    """
    m = S.shape[0]
    C = P.shape[1]
    scratch = np.full(m, -1.0)
    pacc = np.zeros(C)
    two_r = 2.0 * r
    two_t = 2.0 * theta
    for k in range(rows.shape[0]):
        i = rows[k]
        if first:
            for q in range(indptr[i], indptr[i + 1]):
                scratch[indices[q]] = w0[q]
        nbr = 0
        rel = 0
        wsum = 0.0
        dsx = 0.0
        dsy = 0.0
        for c in range(C):
            pacc[c] = 0.0
        for j in range(m):
            if j == i or not live[j]:
                continue
            d = _dist(S, i, j)
            if d > r:
                continue
            nbr += 1
            if first:
                wij = scratch[j]
                if wij < 0.0:
                    continue
            else:
                dp = _l1(P, i, j)
                if dp > theta:
                    continue
                wij = 1.0 - (d / two_r + dp / two_t)
            rel += 1
            wsum += wij
            dsx += wij * (S[j, 0] - S[i, 0])
            dsy += wij * (S[j, 2] - S[i, 2])
            for c in range(C):
                pacc[c] += wij * P[j, c]
        if first:
            for q in range(indptr[i], indptr[i + 1]):
                scratch[indices[q]] = -1.0
        out_nbr[k] = nbr
        out_rel[k] = rel
        if rel == 0:
            # nothing left to adapt to: settle where it is
            out_lam[k] = 0.0
            for x in range(4):
                out_s[k, x] = S[i, x]
            for c in range(C):
                out_p[k, c] = P[i, c]
            continue
        M = float(rel)
        lam = 1.0 - wsum / M
        if lam < 0.0:
            lam = 0.0
        elif lam > 1.0:
            lam = 1.0
        out_lam[k] = lam
        out_s[k, 0] = S[i, 0] + dsx / M
        out_s[k, 1] = S[i, 1] * shrink
        out_s[k, 2] = S[i, 2] + dsy / M
        out_s[k, 3] = S[i, 3] * shrink
        for c in range(C):
            v = pacc[c] / M + lam * P[i, c]
            if v < 0.0:
                v = 0.0
            elif v > 255.0:
                v = 255.0
            out_p[k, c] = v


@njit(nogil=True, cache=True)
def row_weights(rows, S, P, live, first, indptr, indices, w0, r, theta):
    """COO triplets (i, j, w) for every related neighbor of each row."""
    m = S.shape[0]
    scratch = np.full(m, -1.0)
    cap = 64
    oi = np.empty(cap, np.int64)
    oj = np.empty(cap, np.int64)
    ow = np.empty(cap, np.float64)
    n = 0
    for k in range(rows.shape[0]):
        i = rows[k]
        if first:
            for q in range(indptr[i], indptr[i + 1]):
                scratch[indices[q]] = w0[q]
        for j in range(m):
            if j == i or not live[j]:
                continue
            d = _dist(S, i, j)
            if d > r:
                continue
            if first:
                wij = scratch[j]
                if wij < 0.0:
                    continue
            else:
                dp = _l1(P, i, j)
                if dp > theta:
                    continue
                wij = 1.0 - (d / (2.0 * r) + dp / (2.0 * theta))
            if n == cap:
                cap *= 2
                ni = np.empty(cap, np.int64)
                nj = np.empty(cap, np.int64)
                nw = np.empty(cap, np.float64)
                ni[:n] = oi[:n]
                nj[:n] = oj[:n]
                nw[:n] = ow[:n]
                oi, oj, ow = ni, nj, nw
            oi[n] = i
            oj[n] = j
            ow[n] = wij
            n += 1
        if first:
            for q in range(indptr[i], indptr[i + 1]):
                scratch[indices[q]] = -1.0
    return oi[:n], oj[:n], ow[:n]


@njit(nogil=True, cache=True)
def nearest_candidates(rows, S, cand):
    """For each row the index of the closest candidate (ties: lowest index), or -1."""
    m = S.shape[0]
    out = np.full(rows.shape[0], -1, np.int64)
    for k in range(rows.shape[0]):
        i = rows[k]
        best = np.inf
        for j in range(m):
            if j == i or not cand[j]:
                continue
            d = _dist(S, i, j)
            if d < best:
                best = d
                out[k] = j
    return out


@njit(nogil=True, cache=True)
def neighbor_pairs(S, P, members, r, theta, xi):
    """Pairs (a, b), a < b, among ``members`` within r whose weight is >= xi."""
    n = members.shape[0]
    cap = 64
    oa = np.empty(cap, np.int64)
    ob = np.empty(cap, np.int64)
    cnt = 0
    for u in range(n):
        i = members[u]
        for v in range(u + 1, n):
            j = members[v]
            d = _dist(S, i, j)
            if d > r:
                continue
            dp = _l1(P, i, j)
            if dp > theta:
                continue
            wij = 1.0 - (d / (2.0 * r) + dp / (2.0 * theta))
            if wij < xi:
                continue
            if cnt == cap:
                cap *= 2
                na = np.empty(cap, np.int64)
                nb = np.empty(cap, np.int64)
                na[:cnt] = oa[:cnt]
                nb[:cnt] = ob[:cnt]
                oa, ob = na, nb
            oa[cnt] = i
            ob[cnt] = j
            cnt += 1
    return oa[:cnt], ob[:cnt]
