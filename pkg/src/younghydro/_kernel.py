"""Event loop for the exclusion picture of both diagram dynamics.

The state is a 0/1 occupation array.  Edge ``k`` joins array sites ``k`` and
``k + 1``.  A ``10`` edge carries a right jump (rate ``eps``), a ``01`` edge a
left jump (rate 1).  In reservoir mode index 0 is the reservoir slot: edge 0
is a creation move (rate ``eps``) when site 1 is empty and an annihilation
move (rate 1) when it is occupied.

All up-type moves share the rate ``eps`` and all down-type moves share rate 1,
so the kernel keeps two indexed sets of edges and draws uniformly from them.
"""
import numpy as np
from numba import njit

DONE = 0
NEED_RANDOM = 1
NEED_GROW = 2
EVENT_CAP = 3

# counts layout
N_UP, N_DOWN, EVENTS, RAND_IDX = 0, 1, 2, 3
# clock layout
T_NOW, T_NEXT, OCC_INT = 0, 1, 2


@njit(cache=True, nogil=True, inline="always")
def edge_kind(occ, k, reservoir):
    if reservoir and k == 0:
        return 1 if occ[1] == 0 else 2
    a = occ[k]
    b = occ[k + 1]
    if a == 1 and b == 0:
        return 1
    if a == 0 and b == 1:
        return 2
    return 0


@njit(cache=True, nogil=True, inline="always")
def _remove(lst, pos, counts, slot, k):
    i = pos[k]
    last = counts[slot] - 1
    moved = lst[last]
    lst[i] = moved
    pos[moved] = i
    pos[k] = -1
    counts[slot] = last


@njit(cache=True, nogil=True, inline="always")
def _insert(lst, pos, counts, slot, k):
    n = counts[slot]
    lst[n] = k
    pos[k] = n
    counts[slot] = n + 1


@njit(cache=True, nogil=True, inline="always")
def _refresh(occ, k, reservoir, up_list, up_pos, down_list, down_pos, counts):
    kind = edge_kind(occ, k, reservoir)
    in_up = up_pos[k] >= 0
    in_down = down_pos[k] >= 0
    if in_up and kind != 1:
        _remove(up_list, up_pos, counts, N_UP, k)
    if in_down and kind != 2:
        _remove(down_list, down_pos, counts, N_DOWN, k)
    if kind == 1 and not in_up:
        _insert(up_list, up_pos, counts, N_UP, k)
    elif kind == 2 and not in_down:
        _insert(down_list, down_pos, counts, N_DOWN, k)


@njit(cache=True, nogil=True)
def rebuild(occ, reservoir, up_list, up_pos, down_list, down_pos, counts):
    up_pos[:] = -1
    down_pos[:] = -1
    counts[N_UP] = 0
    counts[N_DOWN] = 0
    for k in range(occ.shape[0] - 1):
        kind = edge_kind(occ, k, reservoir)
        if kind == 1:
            _insert(up_list, up_pos, counts, N_UP, k)
        elif kind == 2:
            _insert(down_list, down_pos, counts, N_DOWN, k)


@njit(cache=True, nogil=True)
def run_events(occ, up_list, up_pos, down_list, down_pos, counts, clock,
               eps, speed, t_stop, exps, unifs, reservoir, margin, max_events):
    W = occ.shape[0]
    nbuf = exps.shape[0]
    while True:
        t_next = clock[T_NEXT]
        if t_next > t_stop:
            if reservoir:
                clock[OCC_INT] += occ[1] * (t_stop - clock[T_NOW])
            clock[T_NOW] = t_stop
            return DONE
        if counts[EVENTS] >= max_events:
            return EVENT_CAP
        if reservoir:
            clock[OCC_INT] += occ[1] * (t_next - clock[T_NOW])
        clock[T_NOW] = t_next

        k = counts[RAND_IDX]
        n_up = counts[N_UP]
        n_down = counts[N_DOWN]
        up_total = eps * n_up
        u = unifs[k] * (up_total + n_down)
        if u < up_total:
            j = int(u / eps)
            if j >= n_up:
                j = n_up - 1
            e = up_list[j]
        else:
            j = int(u - up_total)
            if j >= n_down:
                j = n_down - 1
            e = down_list[j]

        if reservoir and e == 0:
            occ[1] = 1 - occ[1]
        else:
            tmp = occ[e]
            occ[e] = occ[e + 1]
            occ[e + 1] = tmp
        for kk in range(e - 1, e + 2):
            if 0 <= kk <= W - 2:
                _refresh(occ, kk, reservoir, up_list, up_pos, down_list, down_pos, counts)
        counts[EVENTS] += 1

        total = eps * counts[N_UP] + counts[N_DOWN]
        if total > 0.0:
            clock[T_NEXT] = clock[T_NOW] + exps[k] / (total * speed)
        else:
            clock[T_NEXT] = np.inf
        counts[RAND_IDX] = k + 1

        if e >= W - 2 - margin or (not reservoir and e <= margin):
            return NEED_GROW
        if k + 1 >= nbuf:
            return NEED_RANDOM
