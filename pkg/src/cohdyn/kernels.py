"""Numba kernels for the batched state-vector engine.

States are stored split-complex: two C-contiguous (D, R) float64 arrays
(real and imaginary parts) with R realizations evolved side by side.  The
split layout vectorizes better than interleaved complex and keeps gather
rows cache-line aligned.  All kernels write disjoint elements, so results
are independent of scheduling.
"""

import numpy as np
from numba import njit


@njit(cache=True, fastmath=True)
def apply_pairs(pre, pim, ia, ib, c):
    """In-place 2x2 block action on row pairs (ia[j], ib[j]).

    c is (8, R): re/im of the 2x2 entries in row-major order.
    """
    R = pre.shape[1]
    for j in range(ia.size):
        a = ia[j]
        b = ib[j]
        for r in range(R):
            xr = pre[a, r]
            xi = pim[a, r]
            yr = pre[b, r]
            yi = pim[b, r]
            pre[a, r] = c[0, r] * xr - c[1, r] * xi + c[2, r] * yr - c[3, r] * yi
            pim[a, r] = c[0, r] * xi + c[1, r] * xr + c[2, r] * yi + c[3, r] * yr
            pre[b, r] = c[4, r] * xr - c[5, r] * xi + c[6, r] * yr - c[7, r] * yi
            pim[b, r] = c[4, r] * xi + c[5, r] * xr + c[6, r] * yi + c[7, r] * yr


@njit(cache=True, fastmath=True)
def apply_phases(pre, pim, idx, c):
    """In-place per-lane phase on the given rows; c is (2, R) re/im."""
    R = pre.shape[1]
    for j in range(idx.size):
        a = idx[j]
        for r in range(R):
            xr = pre[a, r]
            xi = pim[a, r]
            pre[a, r] = c[0, r] * xr - c[1, r] * xi
            pim[a, r] = c[0, r] * xi + c[1, r] * xr


@njit(cache=True, fastmath=True)
def apply_block3(pre, pim, i0, i1, i2, c):
    """In-place 3x3 block action on row triples; c is (18, R) row-major."""
    R = pre.shape[1]
    for j in range(i0.size):
        a = i0[j]
        b = i1[j]
        d = i2[j]
        for r in range(R):
            x0r = pre[a, r]
            x0i = pim[a, r]
            x1r = pre[b, r]
            x1i = pim[b, r]
            x2r = pre[d, r]
            x2i = pim[d, r]
            pre[a, r] = (
                c[0, r] * x0r - c[1, r] * x0i
                + c[2, r] * x1r - c[3, r] * x1i
                + c[4, r] * x2r - c[5, r] * x2i
            )
            pim[a, r] = (
                c[0, r] * x0i + c[1, r] * x0r
                + c[2, r] * x1i + c[3, r] * x1r
                + c[4, r] * x2i + c[5, r] * x2r
            )
            pre[b, r] = (
                c[6, r] * x0r - c[7, r] * x0i
                + c[8, r] * x1r - c[9, r] * x1i
                + c[10, r] * x2r - c[11, r] * x2i
            )
            pim[b, r] = (
                c[6, r] * x0i + c[7, r] * x0r
                + c[8, r] * x1i + c[9, r] * x1r
                + c[10, r] * x2i + c[11, r] * x2r
            )
            pre[d, r] = (
                c[12, r] * x0r - c[13, r] * x0i
                + c[14, r] * x1r - c[15, r] * x1i
                + c[16, r] * x2r - c[17, r] * x2i
            )
            pim[d, r] = (
                c[12, r] * x0i + c[13, r] * x0r
                + c[14, r] * x1i + c[15, r] * x1r
                + c[16, r] * x2i + c[17, r] * x2r
            )


@njit(cache=True)
def collision_probs(pre, pim, out):
    """out[r] = sum_x |psi_x|^4 per lane."""
    D, R = pre.shape
    out[:] = 0.0
    for x in range(D):
        for r in range(R):
            p = pre[x, r] * pre[x, r] + pim[x, r] * pim[x, r]
            out[r] += p * p


@njit(cache=True)
def sq_norms(pre, pim, out):
    D, R = pre.shape
    out[:] = 0.0
    for x in range(D):
        for r in range(R):
            out[r] += pre[x, r] * pre[x, r] + pim[x, r] * pim[x, r]


@njit(cache=True)
def gather_complex(pre, pim, rows, out_re, out_im):
    """Copy the given rows into dense (n, R) scratch arrays."""
    R = pre.shape[1]
    for j in range(rows.size):
        a = rows[j]
        for r in range(R):
            out_re[j, r] = pre[a, r]
            out_im[j, r] = pim[a, r]


@njit(cache=True)
def group_probabilities(pre, pim, rows, group, n_groups, out):
    """out[g, r] = sum of |psi|^2 over rows with group id g (per lane)."""
    R = pre.shape[1]
    out[:] = 0.0
    for j in range(rows.size):
        a = rows[j]
        g = group[j]
        for r in range(R):
            out[g, r] += pre[a, r] * pre[a, r] + pim[a, r] * pim[a, r]
