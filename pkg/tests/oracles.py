"""Reference implementations written directly from the definitions.

They share nothing with the package beyond plain numpy: blocks are tuples
from itertools.product, conditional laws are explicit products over
positions, and the covering rule is a Python loop.
"""
import itertools
import math

import numpy as np


def blocks(k, n):
    return list(itertools.product(range(k), repeat=n))


def block_prob(letter, blk):
    return math.prod(letter[s] for s in blk)


def cond_u_given_v(p_uv, u, v):
    """Product over positions of P(u_i | v_i) for a letter joint ``p_uv[u, v]``."""
    out = 1.0
    for a, b in zip(u, v):
        pv = p_uv[:, b].sum()
        out *= p_uv[a, b] / pv
    return out


def hamming_frac(a, b):
    return sum(x != y for x, y in zip(a, b)) / len(a)


def eta_direct(p_uv, cost, v, w, ku):
    """sum_u P(u|v) cost(u, w)."""
    n = len(v)
    return sum(cond_u_given_v(p_uv, u, v) * cost(u, w) for u in blocks(ku, n))


def delta_direct(p_uv, kernel, miss, n):
    """sum over (u, v, w) of P(u, v) P(w|v) miss(u, w)."""
    ku, kv = p_uv.shape
    kw = kernel.shape[1]
    total = 0.0
    for v in blocks(kv, n):
        for u in blocks(ku, n):
            puv = math.prod(p_uv[a, b] for a, b in zip(u, v))
            if puv == 0:
                continue
            for w in blocks(kw, n):
                pw = math.prod(kernel[b, c] for b, c in zip(v, w))
                if pw:
                    total += puv * pw * miss(u, w)
    return total


def covering_eval_direct(p_uv, miss, dist, words, threshold):
    """Apply the two-case rule to every v and sum P(u, v) cost(u, F(v)) over (v, u).

    Returns ``(miss_prob, achieved_distortion, chosen)`` with ``chosen[v]`` the
    codebook index (0-based) picked for v.
    """
    ku, kv = p_uv.shape
    n = len(words[0])
    us = blocks(ku, n)
    miss_tab = np.array([[miss(u, w) for w in words] for u in us], float)
    dist_tab = np.array([[dist(u, w) for w in words] for u in us], float)
    p_miss = p_dist = 0.0
    chosen = {}
    for v in blocks(kv, n):
        pv = math.prod(p_uv[:, b].sum() for b in v)
        if pv == 0:
            continue
        pu = np.array([math.prod(p_uv[a, b] for a, b in zip(u, v)) for u in us])
        e1 = pu @ miss_tab / pv
        e2 = pu @ dist_tab / pv
        inside = [i for i in range(len(words)) if round(e1[i], 12) <= round(threshold, 12)]
        pool = inside if inside else range(len(words))
        best = None
        for i in pool:  # strict improvement keeps the lowest index on ties
            if best is None or round(e2[i], 12) < round(e2[best], 12):
                best = i
        chosen[v] = best
        p_miss += float(pu @ miss_tab[:, best])
        p_dist += float(pu @ dist_tab[:, best])
    return p_miss, p_dist, chosen


def mutual_information_direct(p):
    p = np.asarray(p, float)
    a, b = p.sum(axis=1), p.sum(axis=0)
    return sum(p[i, j] * math.log(p[i, j] / (a[i] * b[j]))
               for i in range(p.shape[0]) for j in range(p.shape[1]) if p[i, j] > 0)
