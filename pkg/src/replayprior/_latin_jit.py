"""Compiled Latin square primitives and fused playout/adapt loops.

State layout for order ``n`` (all int64, bit ``v`` stands for value ``v+1``):

* ``grid[r*n+c]``      value or 0
* ``dom[r*n+c]``       candidate bitmask of an empty cell
* ``rowsup[r*n+v]``    columns of row r where v is still a candidate
* ``colsup[c*n+v]``    rows of column c where v is still a candidate
* ``meta``             [empty cells, wipeout flag]
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def popcount(x):
    c = 0
    while x:
        x &= x - 1
        c += 1
    return c


@njit(cache=True)
def lowest_bit_index(x):
    i = 0
    while (x >> i) & 1 == 0:
        i += 1
    return i


@njit(cache=True)
def _push_single(sup, line, n, is_row, stack, top, meta, chan):
    # support of (line, value) just shrank; returns new stack top or -1 on wipeout
    if sup == 0:
        meta[1] = 1
        return -1
    if chan and sup & (sup - 1) == 0:
        j = lowest_bit_index(sup)
        if is_row:
            cell = line * n + j
        else:
            cell = j * n + line
        stack[top] = cell
        return top + 1
    return top


@njit(cache=True)
def assign(n, grid, dom, rowsup, colsup, meta, cell0, v0, stack, vstack, chan):
    """Assign value index ``v0`` to ``cell0`` and propagate to the fixpoint.

    Forward checking on row/column peers while keeping the dual supports in
    sync; a value with no candidate cell left in a line is a wipeout. With
    ``chan`` set, a value with a single candidate cell left in a row or
    column is assigned there too (hidden singles).
    """
    stack[0] = cell0
    vstack[0] = v0
    top = 1
    while top > 0:
        top -= 1
        cell = stack[top]
        v1 = vstack[top]
        r = cell // n
        c = cell % n
        if grid[cell] != 0:
            if grid[cell] == v1 + 1:
                continue
            meta[1] = 1
            return
        bit = np.int64(1) << v1
        if dom[cell] & bit == 0:
            meta[1] = 1
            return
        grid[cell] = v1 + 1
        meta[0] -= 1
        others = dom[cell] & ~bit
        dom[cell] = bit
        rpeers = rowsup[r * n + v1] & ~(np.int64(1) << c)
        cpeers = colsup[c * n + v1] & ~(np.int64(1) << r)
        rowsup[r * n + v1] = 0
        colsup[c * n + v1] = 0
        for u in range(n):
            if (others >> u) & 1:
                rowsup[r * n + u] &= ~(np.int64(1) << c)
                t = _push_single(rowsup[r * n + u], r, n, True, stack, top, meta, chan)
                if t < 0:
                    return
                if t > top:
                    vstack[top] = u
                top = t
                colsup[c * n + u] &= ~(np.int64(1) << r)
                t = _push_single(colsup[c * n + u], c, n, False, stack, top, meta, chan)
                if t < 0:
                    return
                if t > top:
                    vstack[top] = u
                top = t
        for c2 in range(n):
            if (rpeers >> c2) & 1:
                p = r * n + c2
                dom[p] &= ~bit
                if dom[p] == 0:
                    meta[1] = 1
                    return
                colsup[c2 * n + v1] &= ~(np.int64(1) << r)
                t = _push_single(colsup[c2 * n + v1], c2, n, False, stack, top, meta, chan)
                if t < 0:
                    return
                if t > top:
                    vstack[top] = v1
                top = t
        for r2 in range(n):
            if (cpeers >> r2) & 1:
                p = r2 * n + c
                dom[p] &= ~bit
                if dom[p] == 0:
                    meta[1] = 1
                    return
                rowsup[r2 * n + v1] &= ~(np.int64(1) << c)
                t = _push_single(rowsup[r2 * n + v1], r2, n, True, stack, top, meta, chan)
                if t < 0:
                    return
                if t > top:
                    vstack[top] = v1
                top = t


@njit(cache=True)
def score(meta):
    """Minus the empty cells; a wipeout never scores as solved (givens that
    clash only after hidden singles filled the grid leave no empty cell)."""
    if meta[1] != 0 and meta[0] == 0:
        return -1
    return -meta[0]


@njit(cache=True)
def root_state(n, givens, order, chan):
    """Empty state, then every given assigned in ``order`` (a cell permutation)."""
    full = (np.int64(1) << n) - 1
    grid = np.zeros(n * n, np.int64)
    dom = np.full(n * n, full, np.int64)
    rowsup = np.full(n * n, full, np.int64)
    colsup = np.full(n * n, full, np.int64)
    meta = np.zeros(2, np.int64)
    meta[0] = n * n
    stack = np.empty(3 * n * n + 1, np.int64)
    vstack = np.empty(3 * n * n + 1, np.int64)
    for cell in order:
        if givens[cell] != 0:
            assign(n, grid, dom, rowsup, colsup, meta, cell, givens[cell] - 1, stack, vstack, chan)
            if meta[1]:
                break
    return grid, dom, rowsup, colsup, meta


@njit(cache=True)
def select_cell(n, grid, dom):
    """Empty cell with fewest candidates; ties go to the lowest index."""
    best = -1
    bs = n + 1
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
def prior_code(n, rowsup, colsup, cell, v1):
    r = cell // n
    c = cell % n
    sr = min(max(popcount(rowsup[r * n + v1]), 1), n)
    sc = min(max(popcount(colsup[c * n + v1]), 1), n)
    return (sr - 1) * n + (sc - 1)


@njit(cache=True)
def _softmax_inplace(nm, xs, ex, probs):
    top = 0.0
    have = False
    for i in range(nm):
        if not ex[i]:
            if not have or xs[i] > top:
                top = xs[i]
                have = True
    if not have:
        for i in range(nm):
            probs[i] = 1.0 / nm
        return
    z = 0.0
    for i in range(nm):
        if ex[i]:
            probs[i] = 0.0
        else:
            probs[i] = math.exp(xs[i] - top)
        z += probs[i]
    for i in range(nm):
        probs[i] = probs[i] / z


@njit(cache=True)
def sample(nm, probs, u):
    acc = 0.0
    last = 0
    for i in range(nm):
        if probs[i] > 0.0:
            acc += probs[i]
            last = i
            if u < acc:
                return i
    return last


@njit(cache=True)
def _step(n, grid, dom, rowsup, colsup, weights, bias, excluded, use_bias, moves, xs, ex, probs):
    cell = select_cell(n, grid, dom)
    d = dom[cell]
    nm = 0
    for v in range(n):
        if (d >> v) & 1:
            code = cell * n + v
            moves[nm] = code
            b = 0.0
            e = False
            if use_bias:
                pc = prior_code(n, rowsup, colsup, cell, v)
                e = excluded[pc]
                b = bias[pc]
            xs[nm] = weights[code] + b
            ex[nm] = e
            nm += 1
    _softmax_inplace(nm, xs, ex, probs)
    return nm


@njit(cache=True)
def playout(n, chan, root, weights, bias, excluded, use_bias, rng, seq, grid_out):
    """Returns (score, length); moves are ``cell*n + value_index``."""
    grid = root[0].copy()
    dom = root[1].copy()
    rowsup = root[2].copy()
    colsup = root[3].copy()
    meta = root[4].copy()
    stack = np.empty(3 * n * n + 1, np.int64)
    vstack = np.empty(3 * n * n + 1, np.int64)
    moves = np.empty(n, np.int64)
    xs = np.empty(n)
    ex = np.empty(n, np.bool_)
    probs = np.empty(n)
    length = 0
    while meta[1] == 0 and meta[0] > 0:
        nm = _step(n, grid, dom, rowsup, colsup, weights, bias, excluded, use_bias, moves, xs, ex, probs)
        i = sample(nm, probs, rng.random())
        m = moves[i]
        seq[length] = m
        length += 1
        assign(n, grid, dom, rowsup, colsup, meta, m // n, m % n, stack, vstack, chan)
    grid_out[:] = grid
    return score(meta), length


@njit(cache=True)
def adapt(n, chan, root, weights, new_weights, bias, excluded, use_bias, seq, length, alpha):
    """Accumulate the adapt deltas into ``new_weights``; returns -1 or the failing step."""
    grid = root[0].copy()
    dom = root[1].copy()
    rowsup = root[2].copy()
    colsup = root[3].copy()
    meta = root[4].copy()
    stack = np.empty(3 * n * n + 1, np.int64)
    vstack = np.empty(3 * n * n + 1, np.int64)
    moves = np.empty(n, np.int64)
    xs = np.empty(n)
    ex = np.empty(n, np.bool_)
    probs = np.empty(n)
    for step in range(length):
        if meta[1] != 0 or meta[0] == 0:
            return step
        nm = _step(n, grid, dom, rowsup, colsup, weights, bias, excluded, use_bias, moves, xs, ex, probs)
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
        assign(n, grid, dom, rowsup, colsup, meta, b // n, b % n, stack, vstack, chan)
    return -1
