"""Loop tracing on N=2 lattices: numba kernel and numpy fallback.

On a node with a 2x2 rotation S-matrix the walk's first passage turns
"left" (to the other out-channel) with probability sin^2(theta) and the
second passage is forced onto the remaining channel, which is again a left
turn exactly when the first one was.  A walk is therefore fixed by one
boolean per node, drawn up front; both kernels read the same booleans and
so return identical loops.

Geometry is tracked as exact sums of edge-midpoint coordinates along the
unwrapped path (all values are multiples of 1/2).
"""
from __future__ import annotations

import numpy as np

from ._accel import njit


@njit(cache=True, nogil=True)
def trace_loops_numba(starts, left, tgt_node, tgt_ch, out_edge, disp, max_steps):
    n = starts.shape[0]
    lengths = np.zeros(n, dtype=np.int64)
    sums = np.zeros((n, 3), dtype=np.float64)  # sum mx, sum my, sum |m|^2
    for w in range(n):
        e0 = starts[w]
        e = e0
        x = 0.0
        y = 0.0
        sx = 0.0
        sy = 0.0
        s2 = 0.0
        k = 0
        while True:
            mx = x + 0.5 * disp[e, 0]
            my = y + 0.5 * disp[e, 1]
            sx += mx
            sy += my
            s2 += mx * mx + my * my
            x += disp[e, 0]
            y += disp[e, 1]
            k += 1
            node = tgt_node[e]
            ch = tgt_ch[e]
            if left[w, node]:
                ch = 3 - ch
            e = out_edge[node, ch - 1]
            if e == e0 or k > max_steps:
                break
        lengths[w] = k
        sums[w, 0] = sx
        sums[w, 1] = sy
        sums[w, 2] = s2
    return lengths, sums


def trace_loops_numpy(starts, left, tgt_node, tgt_ch, out_edge, disp, max_steps):
    """All walks of the batch advance in lockstep; finished ones are masked."""
    n = starts.shape[0]
    rows = np.arange(n)
    e = starts.copy()
    pos = np.zeros((n, 2))
    sums = np.zeros((n, 3))
    lengths = np.zeros(n, dtype=np.int64)
    active = np.ones(n, dtype=bool)
    while active.any():
        idx = rows[active]
        ea = e[idx]
        d = disp[ea]
        m = pos[idx] + 0.5 * d
        sums[idx, 0] += m[:, 0]
        sums[idx, 1] += m[:, 1]
        sums[idx, 2] += m[:, 0] * m[:, 0] + m[:, 1] * m[:, 1]
        pos[idx] += d
        lengths[idx] += 1
        node = tgt_node[ea]
        ch = np.where(left[idx, node], 3 - tgt_ch[ea], tgt_ch[ea])
        nxt = out_edge[node, ch - 1]
        e[idx] = nxt
        done = (nxt == starts[idx]) | (lengths[idx] > max_steps)
        active[idx[done]] = False
    return lengths, sums
