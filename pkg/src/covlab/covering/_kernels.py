"""Compiled inner loops for assigning each v-block its codeword.

Both kernels return, for every v-block, the lowest codebook index among the
codewords of minimal rank, where the rank of ``(v, w)`` is a function of their
joint type only. They differ in how candidates are visited:

* ``assign_by_enumeration`` walks w-blocks in increasing rank, generating
  every block of each joint type compatible with v, and looks each one up in
  a first-occurrence table over the whole w-space. Cheap when the codebook
  is dense in the w-space.
* ``assign_by_scan`` visits every distinct codeword. Cheap when the codebook
  is small.
"""
import numpy as np
from numba import njit

BIG = np.int64(1) << np.int64(62)


@njit(nogil=True, cache=True)
def _next_perm(arr, lo, hi):
    # lexicographic successor of arr[lo:hi]; on wrap-around resets to sorted
    i = hi - 2
    while i >= lo and arr[i] >= arr[i + 1]:
        i -= 1
    if i < lo:
        a, b = lo, hi - 1
        while a < b:
            arr[a], arr[b] = arr[b], arr[a]
            a += 1
            b -= 1
        return False
    j = hi - 1
    while arr[j] <= arr[i]:
        j -= 1
    arr[i], arr[j] = arr[j], arr[i]
    a, b = i + 1, hi - 1
    while a < b:
        arr[a], arr[b] = arr[b], arr[a]
        a += 1
        b -= 1
    return True


@njit(nogil=True, cache=True)
def assign_by_enumeration(v_blocks, v_comp, comp_start, comp_stop, sorted_counts, sorted_rank,
                          first_index, k_v, k_w, out_index, out_rank):
    nv, n = v_blocks.shape
    pw = np.empty(n, np.int64)
    acc = np.int64(1)
    for p in range(n - 1, -1, -1):
        pw[p] = acc
        acc *= k_w
    pos = np.empty(n, np.int64)
    seg = np.empty(k_v + 1, np.int64)
    arr = np.empty(n, np.int64)
    for j in range(nv):
        k = 0
        for a in range(k_v):
            seg[a] = k
            for p in range(n):
                if v_blocks[j, p] == a:
                    pos[k] = p
                    k += 1
        seg[k_v] = k
        c = v_comp[j]
        best_rank = BIG
        best_idx = BIG
        for t in range(comp_start[c], comp_stop[c]):
            r = sorted_rank[t]
            if r > best_rank:
                break
            for a in range(k_v):
                k = seg[a]
                for b in range(k_w):
                    for _ in range(sorted_counts[t, a * k_w + b]):
                        arr[k] = b
                        k += 1
            while True:
                code = np.int64(0)
                for q in range(n):
                    code += arr[q] * pw[pos[q]]
                idx = first_index[code]
                if idx >= 0 and idx < best_idx:
                    best_idx = idx
                    best_rank = r
                a = 0
                while a < k_v:
                    if _next_perm(arr, seg[a], seg[a + 1]):
                        break
                    a += 1
                if a == k_v:
                    break
        out_index[j] = best_idx
        out_rank[j] = best_rank


@njit(nogil=True, cache=True)
def assign_by_scan(v_blocks, words, word_index, weights, k_w, sorted_codes, code_rank,
                   out_index, out_rank):
    nv, n = v_blocks.shape
    m = words.shape[0]
    for j in range(nv):
        best_rank = BIG
        best_idx = BIG
        for i in range(m):
            code = np.int64(0)
            for p in range(n):
                code += weights[v_blocks[j, p] * k_w + words[i, p]]
            r = code_rank[np.searchsorted(sorted_codes, code)]
            if r < best_rank or (r == best_rank and word_index[i] < best_idx):
                best_rank = r
                best_idx = word_index[i]
        out_index[j] = best_idx
        out_rank[j] = best_rank
