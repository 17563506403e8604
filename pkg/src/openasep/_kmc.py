"""Compiled kinetic Monte Carlo kernel for open ASEP.

Uniformisation: each attempt picks one of the N+1 slots (left boundary,
N-1 bonds, right boundary) uniformly and fires it with probability
rate / max_rate; attempts arrive at total rate (N+1) max_rate. This is an
exact sampler of the continuous-time chain.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def run_replica(state, q, alpha, beta, gamma, delta, seed, burn_in, horizon, snap_dt, snaps, occ_time):
    """Advance ``state`` in place.

    After ``burn_in`` the kernel accumulates per-site occupied time into
    ``occ_time`` and stores a copy of the configuration every ``snap_dt``
    into consecutive rows of ``snaps``. Returns the number of snapshots.
    """
    np.random.seed(seed)
    n = state.shape[0]
    rmax = max(1.0, q, alpha, beta, gamma, delta)
    lam = (n + 1) * rmax
    last = np.zeros(n)
    t = 0.0
    next_snap = burn_in + snap_dt
    n_snaps = 0
    max_snaps = snaps.shape[0]
    recording = False
    while True:
        t_new = t - np.log(1.0 - np.random.random()) / lam
        if not recording and t_new >= burn_in:
            recording = True
            for i in range(n):
                last[i] = burn_in
        while recording and next_snap <= t_new and next_snap <= horizon and n_snaps < max_snaps:
            for i in range(n):
                snaps[n_snaps, i] = state[i]
            n_snaps += 1
            next_snap += snap_dt
        if t_new >= horizon:
            break
        t = t_new
        slot = int(np.random.random() * (n + 1))
        if slot > n:
            slot = n
        u = np.random.random() * rmax
        if slot == 0:
            site = 0
            rate = gamma if state[0] == 1 else alpha
        elif slot == n:
            site = n - 1
            rate = beta if state[n - 1] == 1 else delta
        else:
            i = slot - 1
            a = state[i]
            b = state[i + 1]
            if a == b:
                continue
            rate = 1.0 if a == 1 else q
            if u < rate:
                if recording:
                    occ_time[i] += (t - last[i]) * a
                    occ_time[i + 1] += (t - last[i + 1]) * b
                    last[i] = t
                    last[i + 1] = t
                state[i] = b
                state[i + 1] = a
            continue
        if u < rate:
            if recording:
                occ_time[site] += (t - last[site]) * state[site]
                last[site] = t
            state[site] = 1 - state[site]
    if recording:
        for i in range(n):
            occ_time[i] += (horizon - last[i]) * state[i]
    return n_snaps
