"""Compiled Nussinov folding and RNA playout/adapt loops.

Nucleotides are coded A=0, C=1, G=2, U=3. Move tokens 0..3 are unpaired
nucleotides, 4..9 the ordered pairs CG, GC, GU, UG, AU, UA.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from ._latin_jit import sample, _softmax_inplace

PAIR_LEFT = np.array([1, 2, 2, 3, 0, 3], dtype=np.int64)
PAIR_RIGHT = np.array([2, 1, 3, 2, 3, 0], dtype=np.int64)
MIN_LOOP = 3


@njit(cache=True)
def can_pair(a, b):
    s = a * 4 + b
    # CG GC GU UG AU UA
    return s == 6 or s == 9 or s == 11 or s == 14 or s == 3 or s == 12


@njit(cache=True)
def nussinov_table(seq):
    L = seq.shape[0]
    N = np.zeros((L + 1, L + 1), np.int64)
    for i in range(L - 1, -1, -1):
        for j in range(i + 1, L):
            best = N[i, j - 1]
            for k in range(i, j - MIN_LOOP):
                if can_pair(seq[k], seq[j]):
                    left = N[i, k - 1] if k > i else 0
                    v = left + 1 + N[k + 1, j - 1]
                    if v > best:
                        best = v
            N[i, j] = best
    return N


@njit(cache=True)
def nussinov_fold(seq, partner):
    """Fill ``partner`` (-1 = unpaired) with a maximum pairing; returns the pair count.

    Traceback pairs ``j`` with the leftmost ``k`` reaching the optimum and
    leaves ``j`` unpaired only when no pairing does.
    """
    L = seq.shape[0]
    for i in range(L):
        partner[i] = -1
    if L == 0:
        return 0
    N = nussinov_table(seq)
    st_i = np.empty(L + 1, np.int64)
    st_j = np.empty(L + 1, np.int64)
    top = 0
    st_i[0] = 0
    st_j[0] = L - 1
    top = 1
    while top > 0:
        top -= 1
        i = st_i[top]
        j = st_j[top]
        while j - i > MIN_LOOP:
            target = N[i, j]
            found = -1
            for k in range(i, j - MIN_LOOP):
                if can_pair(seq[k], seq[j]):
                    left = N[i, k - 1] if k > i else 0
                    if left + 1 + N[k + 1, j - 1] == target:
                        found = k
                        break
            if found < 0:
                j -= 1
                continue
            partner[found] = j
            partner[j] = found
            if found - 1 > i:
                st_i[top] = i
                st_j[top] = found - 1
                top += 1
            i = found + 1
            j = j - 1
    return N[0, L - 1]


@njit(cache=True)
def structure_distance(partner, target):
    """Positions whose dot-bracket character differs between two pairings."""
    d = 0
    for i in range(partner.shape[0]):
        a = partner[i]
        b = target[i]
        ca = 0 if a < 0 else (1 if a > i else 2)
        cb = 0 if b < 0 else (1 if b > i else 2)
        if ca != cb:
            d += 1
    return d


@njit(cache=True)
def _apply(pos, partner, token, nuc):
    if token < 4:
        nuc[pos] = token
    else:
        nuc[pos] = PAIR_LEFT[token - 4]
        nuc[partner[pos]] = PAIR_RIGHT[token - 4]


@njit(cache=True)
def _step(d, prev, positions, allowed, counts, weights, bias, excluded, use_bias, moves, xs, ex, probs):
    pos = positions[d]
    nm = counts[d]
    for i in range(nm):
        t = allowed[d, i]
        moves[i] = t
        b = 0.0
        e = False
        if use_bias:
            pc = (prev + 1) * 10 + t
            e = excluded[pc]
            b = bias[pc]
        xs[i] = weights[pos * 10 + t] + b
        ex[i] = e
    _softmax_inplace(nm, xs, ex, probs)
    return nm


@njit(cache=True)
def playout(positions, allowed, counts, partner, target, weights, bias, excluded, use_bias, rng, seq, nuc, fold_out):
    """Returns (score, length): score is minus the folding distance to ``target``."""
    moves = np.empty(10, np.int64)
    xs = np.empty(10)
    ex = np.empty(10, np.bool_)
    probs = np.empty(10)
    prev = -1
    nd = positions.shape[0]
    for d in range(nd):
        nm = _step(d, prev, positions, allowed, counts, weights, bias, excluded, use_bias, moves, xs, ex, probs)
        t = moves[sample(nm, probs, rng.random())]
        seq[d] = t
        _apply(positions[d], partner, t, nuc)
        prev = t
    nussinov_fold(nuc, fold_out)
    return -structure_distance(fold_out, target), nd


@njit(cache=True)
def adapt(positions, allowed, counts, weights, new_weights, bias, excluded, use_bias, seq, length, alpha):
    moves = np.empty(10, np.int64)
    xs = np.empty(10)
    ex = np.empty(10, np.bool_)
    probs = np.empty(10)
    prev = -1
    for d in range(length):
        if d >= positions.shape[0]:
            return d
        nm = _step(d, prev, positions, allowed, counts, weights, bias, excluded, use_bias, moves, xs, ex, probs)
        b = seq[d]
        found = False
        for i in range(nm):
            if moves[i] == b:
                found = True
        if not found:
            return d
        pos = positions[d]
        for i in range(nm):
            code = pos * 10 + moves[i]
            delta = 1.0 if moves[i] == b else 0.0
            new_weights[code] = new_weights[code] - alpha * (probs[i] - delta)
        prev = b
    return -1
