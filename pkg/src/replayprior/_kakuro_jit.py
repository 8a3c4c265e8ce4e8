"""Compiled Kakuro primitives and fused playout/adapt loops.

Square n x n board, values 1..k, one sum hint per row and per column.
State arrays (int64; bit ``v`` stands for value ``v+1``):

* ``grid[r*n+c]``   value or 0
* ``dom[r*n+c]``    candidate bitmask
* ``used[line]``    values placed in the line (rows are lines 0..n-1, columns n..2n-1)
* ``rem[line]``     hint minus the placed values
* ``empty[line]``   empty cells left in the line
* ``meta``          [empty cells, wipeout flag]
"""
from __future__ import annotations

import numpy as np
from numba import njit

from ._latin_jit import popcount, sample, _softmax_inplace


@njit(cache=True)
def _prune_line(n, k, line, grid, dom, used, rem, empty, meta, vals, low, high):
    # drop candidates v that leave no room: the other e-1 cells, taking distinct
    # unused values, must sum to rem - v
    e = empty[line]
    if e == 0:
        if rem[line] != 0:
            meta[1] = 1
        return
    m = 0
    for v in range(k):
        if (used[line] >> v) & 1 == 0:
            vals[m] = v + 1
            m += 1
    if m < e:
        meta[1] = 1
        return
    low[0] = 0
    for i in range(m):
        low[i + 1] = low[i] + vals[i]
    high[0] = 0
    for i in range(m):
        high[i + 1] = high[i] + vals[m - 1 - i]
    t = e - 1
    s = rem[line]
    for j in range(n):
        if line < n:
            p = line * n + j
        else:
            p = j * n + (line - n)
        if grid[p] != 0:
            continue
        d = dom[p]
        for i in range(m):
            v1 = vals[i] - 1
            if (d >> v1) & 1:
                u = vals[i]
                if i < t:
                    mn = low[t + 1] - u
                else:
                    mn = low[t]
                if i >= m - t:
                    mx = high[t + 1] - u
                else:
                    mx = high[t]
                if s - u < mn or s - u > mx:
                    d &= ~(np.int64(1) << v1)
        dom[p] = d
        if d == 0:
            meta[1] = 1
            return


@njit(cache=True)
def assign(n, k, grid, dom, used, rem, empty, meta, cell, v1, sums, vals, low, high):
    """Place value index ``v1`` and forward check both lines."""
    r = cell // n
    c = cell % n
    bit = np.int64(1) << v1
    grid[cell] = v1 + 1
    dom[cell] = bit
    meta[0] -= 1
    for line in (r, n + c):
        used[line] |= bit
        rem[line] -= v1 + 1
        empty[line] -= 1
    for j in range(n):
        p = r * n + j
        if grid[p] == 0:
            dom[p] &= ~bit
            if dom[p] == 0:
                meta[1] = 1
                return
        p = j * n + c
        if grid[p] == 0:
            dom[p] &= ~bit
            if dom[p] == 0:
                meta[1] = 1
                return
    if sums:
        _prune_line(n, k, r, grid, dom, used, rem, empty, meta, vals, low, high)
        if meta[1]:
            return
        _prune_line(n, k, n + c, grid, dom, used, rem, empty, meta, vals, low, high)


@njit(cache=True)
def root_state(n, k, row_sums, col_sums, sums):
    full = (np.int64(1) << k) - 1
    grid = np.zeros(n * n, np.int64)
    dom = np.full(n * n, full, np.int64)
    used = np.zeros(2 * n, np.int64)
    rem = np.zeros(2 * n, np.int64)
    empty = np.full(2 * n, n, np.int64)
    meta = np.zeros(2, np.int64)
    meta[0] = n * n
    for i in range(n):
        rem[i] = row_sums[i]
        rem[n + i] = col_sums[i]
    if sums:
        vals = np.empty(k, np.int64)
        low = np.empty(k + 1, np.int64)
        high = np.empty(k + 1, np.int64)
        for line in range(2 * n):
            _prune_line(n, k, line, grid, dom, used, rem, empty, meta, vals, low, high)
            if meta[1]:
                break
    return grid, dom, used, rem, empty, meta


@njit(cache=True)
def select_cell(n, grid, dom):
    best = -1
    bs = 1 << 30
    for p in range(n * n):
        if grid[p] == 0:
            s = popcount(dom[p])
            if s < bs:
                bs = s
                best = p
                if s <= 1:
                    break
    return best


@njit(cache=True)
def prior_code(n, k, used, rem, cell, v1):
    """pack(value, occ_row, occ_col, rem_row, rem_col) with rems capped at k(k+1)/2."""
    r = cell // n
    c = cell % n
    cap = k * (k + 1) // 2
    occ_r = (used[r] >> v1) & 1
    occ_c = (used[n + c] >> v1) & 1
    rr = min(max(rem[r], 0), cap)
    rc = min(max(rem[n + c], 0), cap)
    return (((v1 * 2 + occ_r) * 2 + occ_c) * (cap + 1) + rr) * (cap + 1) + rc


@njit(cache=True)
def _step(n, k, grid, dom, used, rem, weights, bias, excluded, use_bias, moves, xs, ex, probs):
    cell = select_cell(n, grid, dom)
    d = dom[cell]
    nm = 0
    for v in range(k):
        if (d >> v) & 1:
            code = cell * k + v
            moves[nm] = code
            b = 0.0
            e = False
            if use_bias:
                pc = prior_code(n, k, used, rem, cell, v)
                e = excluded[pc]
                b = bias[pc]
            xs[nm] = weights[code] + b
            ex[nm] = e
            nm += 1
    _softmax_inplace(nm, xs, ex, probs)
    return nm


@njit(cache=True)
def score(n, meta, rem):
    """-(empty cells) if incomplete, else the number of lines meeting their hint."""
    if meta[0] > 0:
        return -meta[0]
    s = 0
    for line in range(2 * n):
        if rem[line] == 0:
            s += 1
    return s


@njit(cache=True)
def playout(n, k, sums, root, weights, bias, excluded, use_bias, rng, seq, grid_out):
    grid = root[0].copy()
    dom = root[1].copy()
    used = root[2].copy()
    rem = root[3].copy()
    empty = root[4].copy()
    meta = root[5].copy()
    vals = np.empty(k, np.int64)
    low = np.empty(k + 1, np.int64)
    high = np.empty(k + 1, np.int64)
    moves = np.empty(k, np.int64)
    xs = np.empty(k)
    ex = np.empty(k, np.bool_)
    probs = np.empty(k)
    length = 0
    while meta[1] == 0 and meta[0] > 0:
        nm = _step(n, k, grid, dom, used, rem, weights, bias, excluded, use_bias, moves, xs, ex, probs)
        i = sample(nm, probs, rng.random())
        m = moves[i]
        seq[length] = m
        length += 1
        assign(n, k, grid, dom, used, rem, empty, meta, m // k, m % k, sums, vals, low, high)
    grid_out[:] = grid
    return score(n, meta, rem), length


@njit(cache=True)
def adapt(n, k, sums, root, weights, new_weights, bias, excluded, use_bias, seq, length, alpha):
    grid = root[0].copy()
    dom = root[1].copy()
    used = root[2].copy()
    rem = root[3].copy()
    empty = root[4].copy()
    meta = root[5].copy()
    vals = np.empty(k, np.int64)
    low = np.empty(k + 1, np.int64)
    high = np.empty(k + 1, np.int64)
    moves = np.empty(k, np.int64)
    xs = np.empty(k)
    ex = np.empty(k, np.bool_)
    probs = np.empty(k)
    for step in range(length):
        if meta[1] != 0 or meta[0] == 0:
            return step
        nm = _step(n, k, grid, dom, used, rem, weights, bias, excluded, use_bias, moves, xs, ex, probs)
        b = seq[step]
        found = False
        for i in range(nm):
            if moves[i] == b:
                found = True
        if not found:
            return step
        for i in range(nm):
            m = moves[i]
            delta = 1.0 if m == b else 0.0
            new_weights[m] = new_weights[m] - alpha * (probs[i] - delta)
        assign(n, k, grid, dom, used, rem, empty, meta, b // k, b % k, sums, vals, low, high)
    return -1
