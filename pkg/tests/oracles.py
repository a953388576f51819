"""Slow, independent reference implementations used to check the fast paths."""
import itertools
import math

import numpy as np


# --------------------------------------------------------------------------
# watershed


def plateaus(energy):
    """All 4-connected equal-valued plateaus, as lists of (y, x), found by BFS."""
    h, w = energy.shape
    seen = [[False] * w for _ in range(h)]
    out = []
    for y in range(h):
        for x in range(w):
            if seen[y][x]:
                continue
            v = energy[y, x]
            comp, stack = [], [(y, x)]
            seen[y][x] = True
            while stack:
                cy, cx = stack.pop()
                comp.append((cy, cx))
                for ny, nx in ((cy - 1, cx), (cy + 1, cx), (cy, cx - 1), (cy, cx + 1)):
                    if 0 <= ny < h and 0 <= nx < w and not seen[ny][nx] and energy[ny, nx] == v:
                        seen[ny][nx] = True
                        stack.append((ny, nx))
            out.append(sorted(comp))
    return out


def minima_plateaus(energy):
    h, w = energy.shape
    found = []
    for comp in plateaus(energy):
        v = energy[comp[0]]
        lower = False
        for cy, cx in comp:
            for ny, nx in ((cy - 1, cx), (cy + 1, cx), (cy, cx - 1), (cy, cx + 1)):
                if 0 <= ny < h and 0 <= nx < w and energy[ny, nx] < v:
                    lower = True
        if not lower:
            found.append(comp)
    found.sort(key=lambda c: c[0])  # raster order of first pixel
    return found


def flood_oracle(energy):
    """Flooding driven by an explicit event list that is fully re-sorted each step."""
    h, w = energy.shape
    labels = np.zeros((h, w), dtype=np.int64)
    events = []
    seq = 0
    for bid, comp in enumerate(minima_plateaus(energy), start=1):
        for (y, x) in comp:
            labels[y, x] = bid
            events.append((float(energy[y, x]), seq, y, x))
            seq += 1
    while events:
        events.sort()
        _, _, y, x = events.pop(0)
        for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
            if 0 <= ny < h and 0 <= nx < w and labels[ny, nx] == 0:
                labels[ny, nx] = labels[y, x]
                events.append((float(energy[ny, nx]), seq, ny, nx))
                seq += 1
    return labels


def same_partition(a, b):
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.shape != b.shape:
        return False
    fwd, back = {}, {}
    for u, v in zip(a.tolist(), b.tolist()):
        if fwd.setdefault(u, v) != v or back.setdefault(v, u) != u:
            return False
    return True


# --------------------------------------------------------------------------
# co-evolution


def rect_gap(a, b):
    dx = abs(a[0] - b[0]) - (a[1] + b[1])
    dy = abs(a[2] - b[2]) - (a[3] + b[3])
    return max(dx, 0.0) + max(dy, 0.0)


def reference_step(s, p, p0, lam, state, t, boundary_energy, cfg):
    """One double-buffered co-evolution iteration in plain Python.

    ``boundary_energy`` maps (i, j) row pairs (i < j) to lists of boundary
    energies. State codes: 0 active, 1 matured, 2 absorbed.
    """
    n = len(s)
    s1 = [list(v) for v in s]
    p1 = [list(v) for v in p]
    lam1 = list(lam)
    state1 = list(state)
    absorber = [0] * n
    fresh = {}
    cand = {}
    for i in range(n):
        if state[i] != 0:
            continue
        rel_w = []
        for j in range(n):
            if j == i or state[j] == 2:
                continue
            d = rect_gap(s[i], s[j])
            if d > cfg.r:
                continue
            if t == 0:
                key = (min(i, j), max(i, j))
                if key not in boundary_energy:
                    continue
                if sum(abs(x - y) for x, y in zip(p0[i], p0[j])) > cfg.theta_p:
                    continue
                wij = 1 - max(1 - math.exp(-e / cfg.sigma_w) for e in boundary_energy[key])
            else:
                dp = sum(abs(x - y) for x, y in zip(p[i], p[j]))
                if dp > cfg.theta_p:
                    continue
                wij = 1 - (d / (2 * cfg.r) + dp / (2 * cfg.theta_p))
            rel_w.append((j, wij))
        if not rel_w:
            fresh[i] = 0.0
            cand[i] = (list(s[i]), list(p[i]))
            continue
        M = len(rel_w)
        lam_i = 1 - sum(wv for _, wv in rel_w) / M
        lam_i = min(max(lam_i, 0.0), 1.0)
        new_s = list(s[i])
        new_s[0] = s[i][0] + sum(wv * (s[j][0] - s[i][0]) for j, wv in rel_w) / M
        new_s[2] = s[i][2] + sum(wv * (s[j][2] - s[i][2]) for j, wv in rel_w) / M
        new_s[1] = s[i][1] * cfg.shrink
        new_s[3] = s[i][3] * cfg.shrink
        new_p = [
            min(max(sum(wv * p[j][c] for j, wv in rel_w) / M + lam_i * p[i][c], 0.0), 255.0)
            for c in range(len(p[i]))
        ]
        fresh[i] = lam_i
        cand[i] = (new_s, new_p)
    lam_now = list(lam)
    for i, v in fresh.items():
        lam_now[i] = v
        lam1[i] = v
    for i in sorted(fresh):
        v = fresh[i]
        if v >= cfg.lambda_U:
            best, bj = math.inf, -1
            for j in range(n):
                if j == i or state[j] == 2 or not lam_now[j] < cfg.lambda_U:
                    continue
                d = rect_gap(s[i], s[j])
                if d < best:
                    best, bj = d, j
            if bj >= 0:
                s1[i], p1[i] = list(s[bj]), list(p[bj])
                state1[i] = 2
                absorber[i] = bj + 1
            else:
                s1[i], p1[i] = cand[i]
        elif v <= cfg.lambda_L:
            state1[i] = 1
        else:
            s1[i], p1[i] = cand[i]
    return s1, p1, lam1, state1, absorber


# --------------------------------------------------------------------------
# genetic merging


def fitness_oracle(bits, sizes, means, edges, ng=256):
    """Disparity of the partition obtained by merging along cleared edges."""
    n = len(sizes)
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            a = parent[a]
        return a

    for k, (a, b) in enumerate(edges):
        if bits[k] == 0:
            ra, rb = find(a), find(b)
            if ra != rb:
                parent[max(ra, rb)] = min(ra, rb)
    groups = {}
    for v in range(n):
        groups.setdefault(find(v), []).append(v)
    if len(groups) == 1:
        return 0.0
    total = float(sum(sizes))
    gsize = {g: sum(sizes[v] for v in vs) for g, vs in groups.items()}
    gmean = {g: sum(sizes[v] * means[v] for v in vs) / gsize[g] for g, vs in groups.items()}
    adj = {g: set() for g in groups}
    for a, b in edges:
        ga, gb = find(a), find(b)
        if ga != gb:
            adj[ga].add(gb)
            adj[gb].add(ga)
    acc = 0.0
    for g in groups:
        if adj[g]:
            dbar = sum(abs(gmean[g] - gmean[o]) / ng for o in adj[g]) / len(adj[g])
        else:
            dbar = 0.0
        acc += gsize[g] / total * dbar
    return acc / len(groups)


def brute_force_best(sizes, means, edges, allowed=None):
    """Max fitness over all chromosomes (or those where ``allowed[k]`` is False keep bit k set)."""
    n_e = len(edges)
    best = -1.0
    for bits in itertools.product((0, 1), repeat=n_e):
        if allowed is not None and any(b == 0 and not allowed[k] for k, b in enumerate(bits)):
            continue
        best = max(best, fitness_oracle(bits, sizes, means, edges))
    return best


# --------------------------------------------------------------------------
# images


def band_image(values=(40, 128, 220), widths=(21, 22, 21), height=64):
    cols = []
    for v, wd in zip(values, widths):
        cols += [v] * wd
    return np.tile(np.array(cols, dtype=np.uint8), (height, 1))


def band_truth(widths=(21, 22, 21), height=64):
    cols = []
    for k, wd in enumerate(widths, start=1):
        cols += [k] * wd
    return np.tile(np.array(cols, dtype=np.int64), (height, 1))


def ellipse_scene(h=321, w=481, seed=7, noise=0.0, color=True):
    """Flat ellipses over a smooth color gradient (BSDS-sized by default)."""
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:h, 0:w]
    base = np.stack([60 + 80 * yy / h, 90 + 40 * xx / w, 150 - 60 * yy / h], -1)
    for _ in range(12):
        cy, cx = rng.uniform(0, h), rng.uniform(0, w)
        ry, rx = rng.uniform(15, 80), rng.uniform(15, 110)
        col = rng.uniform(0, 255, 3)
        base[((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1] = col
    if noise:
        base = base + rng.normal(0, noise, base.shape)
    img = np.clip(np.rint(base), 0, 255).astype(np.uint8)
    if color:
        return img
    return np.clip(np.rint(img @ [0.299, 0.587, 0.114]), 0, 255).astype(np.uint8)
