"""Compiled inner loops for the lattice model.

Every routine works on flat C-order cell indices into a padded grid: the
padding is at least the kernel reach, so ``cell + offset`` never leaves
the array for cells in the allowed region.
"""
import math

import numba
import numpy as np
from numba import njit, prange

# the bundled TBB is too old on some hosts and warns on first launch
numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

BLOCK = 1024


@njit(cache=True, nogil=True)
def _row_sum(grid, cell, flat_offsets, weights):
    acc = 0.0
    for k in range(flat_offsets.size):
        if grid[cell + flat_offsets[k]]:
            acc += weights[k]
    return acc


@njit(cache=True, nogil=True, parallel=True)
def total_pair_sum(grid, cells, flat_offsets, weights):
    """Sum of kernel weights over ordered occupied pairs.

    ``cells`` must be sorted; partial sums over fixed blocks of that list
    are combined in order, so the result is independent of the thread
    count and of lattice translations.
    """
    n = cells.size
    nblocks = (n + BLOCK - 1) // BLOCK
    partial = np.zeros(nblocks)
    for b in prange(nblocks):
        acc = 0.0
        stop = min(n, (b + 1) * BLOCK)
        for i in range(b * BLOCK, stop):
            acc += _row_sum(grid, cells[i], flat_offsets, weights)
        partial[b] = acc
    total = 0.0
    for b in range(nblocks):
        total += partial[b]
    return total


@njit(cache=True, nogil=True)
def pair_weight(a, b, strides, reach, dense):
    """Kernel weight for the displacement between flat cells ``a`` and ``b``."""
    side = 2 * reach + 1
    key = 0
    for ax in range(strides.size):
        da = (a // strides[ax]) - (b // strides[ax])
        a = a % strides[ax]
        b = b % strides[ax]
        if da > reach or da < -reach:
            return 0.0
        key = key * side + (da + reach)
    return dense[key]


@njit(cache=True, nogil=True)
def move_delta(grid, src, dst, flat_offsets, weights, strides, reach, dense):
    """Change of the pair sum when the occupied ``src`` moves to the empty ``dst``."""
    gain = _row_sum(grid, dst, flat_offsets, weights)
    # src is still marked occupied and would be counted as a neighbour of dst
    gain -= pair_weight(dst, src, strides, reach, dense)
    loss = _row_sum(grid, src, flat_offsets, weights)
    return 2.0 * (gain - loss)


@njit(cache=True, nogil=True)
def sweep(grid, cells, where, allowed, allowed_cells, local_offsets,
          flat_offsets, weights, strides, reach, dense, scale, beta,
          u_kind, pick, local_pick, global_pick, u_accept, p_local):
    """Metropolis exchange moves; returns ``(accepted, valid, dP)``.

    ``scale`` converts pair-sum units to probability. ``beta`` is 1/T
    (``inf`` allowed). Proposals are symmetric: the source is a uniform
    occupied cell, the target either a uniform offset within Chebyshev
    distance 2 of it or a uniform cell of the allowed region.
    """
    accepted = 0
    valid = 0
    dp_total = 0.0
    for s in range(u_kind.size):
        slot = pick[s]
        src = cells[slot]
        if u_kind[s] < p_local:
            dst = src + local_offsets[local_pick[s]]
        else:
            dst = allowed_cells[global_pick[s]]
        if grid[dst] or not allowed[dst]:
            continue
        valid += 1
        dp = scale * move_delta(grid, src, dst, flat_offsets, weights, strides, reach, dense)
        if dp >= 0.0:
            ok = True
        elif beta == np.inf:
            ok = False
        else:
            ok = u_accept[s] < math.exp(beta * dp)
        if ok:
            grid[src] = 0
            grid[dst] = 1
            cells[slot] = dst
            where[dst] = slot
            where[src] = -1
            accepted += 1
            dp_total += dp
    return accepted, valid, dp_total


@njit(cache=True, nogil=True)
def probe(grid, cells, allowed, allowed_cells, local_offsets, flat_offsets,
          weights, strides, reach, dense, scale, u_kind, pick, local_pick,
          global_pick, p_local):
    """|dP| of proposals without applying them; invalid proposals give -1."""
    out = np.full(u_kind.size, -1.0)
    for s in range(u_kind.size):
        src = cells[pick[s]]
        if u_kind[s] < p_local:
            dst = src + local_offsets[local_pick[s]]
        else:
            dst = allowed_cells[global_pick[s]]
        if grid[dst] or not allowed[dst]:
            continue
        out[s] = abs(scale * move_delta(grid, src, dst, flat_offsets, weights, strides, reach, dense))
    return out
