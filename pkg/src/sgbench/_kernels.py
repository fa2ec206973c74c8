"""Compiled hot loops shared by the solver modules.

All energies are carried as int64 numerators (exact in units of
1/denominator); floats enter only through Metropolis acceptance tests.
Every kernel draws randomness from explicit counter-based generator
state passed in by the caller, so runs are deterministic given a seed.
"""

from __future__ import annotations

import math

import numba as nb
import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = float(2.0 ** -53)


@nb.njit(nb.types.UniTuple(nb.uint64, 2)(nb.uint64), cache=True,
         inline="always")
def _sm64(state):
    state = state + _GAMMA
    z = state
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    z = z ^ (z >> _S31)
    return state, z


@nb.njit(cache=True)
def seed_streams(master: np.uint64, count: int) -> np.ndarray:
    """Decorrelated per-stream states from one master seed."""
    out = np.empty(count, dtype=np.uint64)
    s = np.uint64(master)
    for i in range(count):
        s, z = _sm64(s)
        out[i] = z
    return out


@nb.njit(cache=True)
def energy_kernel(spins, edges, jn, hn):
    e = np.int64(0)
    for k in range(edges.shape[0]):
        e += jn[k] * spins[edges[k, 0]] * spins[edges[k, 1]]
    for i in range(spins.shape[0]):
        e += hn[i] * spins[i]
    return e


@nb.njit(cache=True, parallel=False)
def energies_batch(spins2d, edges, jn, hn):
    out = np.empty(spins2d.shape[0], dtype=np.int64)
    for r in range(spins2d.shape[0]):
        out[r] = energy_kernel(spins2d[r], edges, jn, hn)
    return out


@nb.njit(cache=True)
def metropolis_sweep(spins, indptr, nbr, jn_csr, hn, beta_over_denom, state):
    """One full pass in fixed index order; returns (dE_num, new rng state)."""
    total = np.int64(0)
    n = spins.shape[0]
    for i in range(n):
        local = hn[i]
        for p in range(indptr[i], indptr[i + 1]):
            local += jn_csr[p] * spins[nbr[p]]
        d_e = np.int64(-2) * spins[i] * local
        if d_e <= 0:
            spins[i] = -spins[i]
            total += d_e
        else:
            state, z = _sm64(state)
            if (z >> _S11) * _INV53 < math.exp(-beta_over_denom * d_e):
                spins[i] = -spins[i]
                total += d_e
    return total, state


@nb.njit(cache=True)
def pticm_run(indptr, nbr, jn_csr, hn, edges, jn, betas, n_icm, denom,
              sweeps, master_seed, cadence, rec_sweep, rec_e, icm_stats):
    """Two-chain parallel tempering with isoenergetic cluster moves.

    Per sweep: Metropolis over every replica of both chains, one
    replica-exchange pass per chain (alternating even/odd pairings),
    one cluster move per ICM temperature.  Records (sweep, best-so-far)
    at the given cadence and at every improvement.  Returns
    (record_count, best_energy_num, best_spins, final_spins,
    final_perm).  icm_stats accumulates [moves, no-ops, conservation
    violations]; the last entry stays 0 unless arithmetic breaks.
    """
    n = hn.shape[0]
    n_t = betas.shape[0]
    n_rep = 2 * n_t
    states = seed_streams(np.uint64(master_seed), n_rep + 2)
    aux = states[n_rep]      # exchange + icm decisions
    spins = np.empty((2, n_t, n), dtype=np.int8)
    init_state = states[n_rep + 1]
    for c in range(2):
        for t in range(n_t):
            for i in range(n):
                init_state, z = _sm64(init_state)
                spins[c, t, i] = np.int8(1) if (z >> _S11) * _INV53 < 0.5 \
                    else np.int8(-1)
    # perm[c, t] = spin-row currently serving temperature index t
    perm = np.empty((2, n_t), dtype=np.int64)
    e_num = np.empty((2, n_t), dtype=np.int64)
    for c in range(2):
        for t in range(n_t):
            perm[c, t] = t
            e_num[c, t] = energy_kernel(spins[c, t], edges, jn, hn)
    best = e_num[0, 0]
    best_spins = spins[0, 0].copy()
    for c in range(2):
        for t in range(n_t):
            if e_num[c, t] < best:
                best = e_num[c, t]
                best_spins[:] = spins[c, t]
    n_rec = 0
    rec_sweep[n_rec] = 0
    rec_e[n_rec] = best
    n_rec += 1
    stack = np.empty(n, dtype=np.int64)
    in_cl = np.zeros(n, dtype=np.uint8)
    for sw in range(1, sweeps + 1):
        improved = False
        for c in range(2):
            for t in range(n_t):
                row = perm[c, t]
                d_e, st = metropolis_sweep(
                    spins[c, row], indptr, nbr, jn_csr, hn,
                    betas[t] / denom, states[c * n_t + row])
                states[c * n_t + row] = st
                e_num[c, t] += d_e
                if e_num[c, t] < best:
                    best = e_num[c, t]
                    best_spins[:] = spins[c, row]
                    improved = True
        # replica exchange, alternating pair offset
        off = sw & 1
        for c in range(2):
            t = off
            while t + 1 < n_t:
                arg = (betas[t] - betas[t + 1]) \
                    * (e_num[c, t] - e_num[c, t + 1]) / denom
                acc = True
                if arg < 0.0:
                    aux, z = _sm64(aux)
                    acc = (z >> _S11) * _INV53 < math.exp(arg)
                if acc:
                    tmp = perm[c, t]
                    perm[c, t] = perm[c, t + 1]
                    perm[c, t + 1] = tmp
                    te = e_num[c, t]
                    e_num[c, t] = e_num[c, t + 1]
                    e_num[c, t + 1] = te
                t += 2
        # isoenergetic cluster moves at the coldest temperatures
        for t in range(n_t - n_icm, n_t):
            ra = perm[0, t]
            rb = perm[1, t]
            sa = spins[0, ra]
            sb = spins[1, rb]
            n_anti = 0
            for i in range(n):
                if sa[i] != sb[i]:
                    n_anti += 1
            if n_anti == 0:
                icm_stats[1] += 1
                continue
            aux, z = _sm64(aux)
            pick = np.int64(z % np.uint64(n_anti))
            seed_site = -1
            cnt = 0
            for i in range(n):
                if sa[i] != sb[i]:
                    if cnt == pick:
                        seed_site = i
                        break
                    cnt += 1
            # flood fill inside the anti-aligned domain
            top = 0
            stack[top] = seed_site
            top += 1
            in_cl[seed_site] = 1
            cl_size = 0
            while top > 0:
                top -= 1
                u = stack[top]
                cl_size += 1
                for p in range(indptr[u], indptr[u + 1]):
                    v = nbr[p]
                    if in_cl[v] == 0 and sa[v] != sb[v]:
                        in_cl[v] = 1
                        stack[top] = v
                        top += 1
            # boundary energy change (internal edges cancel)
            d_a = np.int64(0)
            d_b = np.int64(0)
            for i in range(n):
                if in_cl[i] == 1:
                    for p in range(indptr[i], indptr[i + 1]):
                        v = nbr[p]
                        if in_cl[v] == 0:
                            d_a += np.int64(-2) * jn_csr[p] * sa[i] * sa[v]
                            d_b += np.int64(-2) * jn_csr[p] * sb[i] * sb[v]
                    d_a += np.int64(-2) * hn[i] * sa[i]
                    d_b += np.int64(-2) * hn[i] * sb[i]
            for i in range(n):
                if in_cl[i] == 1:
                    sa[i] = -sa[i]
                    sb[i] = -sb[i]
                    in_cl[i] = 0
            e_num[0, t] += d_a
            e_num[1, t] += d_b
            icm_stats[0] += 1
            if d_a + d_b != 0:
                icm_stats[2] += 1
            if e_num[0, t] < best:
                best = e_num[0, t]
                best_spins[:] = sa
                improved = True
            if e_num[1, t] < best:
                best = e_num[1, t]
                best_spins[:] = sb
                improved = True
        if improved or (cadence > 0 and sw % cadence == 0) or sw == sweeps:
            rec_sweep[n_rec] = sw
            rec_e[n_rec] = best
            n_rec += 1
    return n_rec, best, best_spins, spins, perm


@nb.njit(cache=True)
def sa_run_kernel(indptr, nbr, jn_csr, hn, edges, jn, beta_per_sweep, denom,
                  master_seed, rec_sweep, rec_e):
    """Single-replica annealing along a beta schedule; best-so-far trace."""
    n = hn.shape[0]
    states = seed_streams(np.uint64(master_seed), 2)
    st = states[0]
    init = states[1]
    spins = np.empty(n, dtype=np.int8)
    for i in range(n):
        init, z = _sm64(init)
        spins[i] = np.int8(1) if (z >> _S11) * _INV53 < 0.5 else np.int8(-1)
    e = energy_kernel(spins, edges, jn, hn)
    best = e
    best_spins = spins.copy()
    n_rec = 0
    rec_sweep[n_rec] = 0
    rec_e[n_rec] = best
    n_rec += 1
    for sw in range(beta_per_sweep.shape[0]):
        d_e, st = metropolis_sweep(spins, indptr, nbr, jn_csr, hn,
                                   beta_per_sweep[sw] / denom, st)
        e += d_e
        if e < best:
            best = e
            best_spins[:] = spins
            rec_sweep[n_rec] = sw + 1
            rec_e[n_rec] = best
            n_rec += 1
    return n_rec, best, best_spins, spins


@nb.njit(cache=True)
def greedy_descent_kernel(spins, indptr, nbr, jn_csr, hn, state):
    """Flip uniformly random strictly-improving spins until 1-flip stable."""
    n = spins.shape[0]
    gains = np.empty(n, dtype=np.int64)
    cand = np.empty(n, dtype=np.int64)
    moved = np.int64(0)
    while True:
        n_cand = 0
        for i in range(n):
            local = hn[i]
            for p in range(indptr[i], indptr[i + 1]):
                local += jn_csr[p] * spins[nbr[p]]
            d_e = np.int64(-2) * spins[i] * local
            gains[i] = d_e
            if d_e < 0:
                cand[n_cand] = i
                n_cand += 1
        if n_cand == 0:
            return moved, state
        state, z = _sm64(state)
        i = cand[np.int64(z % np.uint64(n_cand))]
        spins[i] = -spins[i]
        moved += 1


@nb.njit(cache=True)
def brute_force_kernel(n, edges, jn, hn, cap):
    """Exact minimum over the half-space spins[0] = +1 by Gray-code walk.

    Returns (e0, count, configs) where count is the number of minimizers
    in the half-space and configs holds min(count, cap) of them.
    """
    spins = np.ones(n, dtype=np.int8)
    e = energy_kernel(spins, edges, jn, hn)
    # adjacency in CSR form built inline to keep the call signature small
    deg = np.zeros(n, dtype=np.int64)
    for k in range(edges.shape[0]):
        deg[edges[k, 0]] += 1
        deg[edges[k, 1]] += 1
    indptr = np.zeros(n + 1, dtype=np.int64)
    for i in range(n):
        indptr[i + 1] = indptr[i] + deg[i]
    fill = indptr[:-1].copy()
    nbr = np.empty(indptr[n], dtype=np.int64)
    jcs = np.empty(indptr[n], dtype=np.int64)
    for k in range(edges.shape[0]):
        a, b = edges[k, 0], edges[k, 1]
        nbr[fill[a]] = b
        jcs[fill[a]] = jn[k]
        fill[a] += 1
        nbr[fill[b]] = a
        jcs[fill[b]] = jn[k]
        fill[b] += 1
    best = e
    count = np.int64(1)
    configs = np.empty((cap, n), dtype=np.int8)
    configs[0] = spins
    total = np.int64(1) << (n - 1)
    for step in range(1, total):
        # flip the spin indexed by the trailing-zero count of step
        g = step
        bit = 0
        while g & 1 == 0:
            g >>= 1
            bit += 1
        i = bit + 1  # spin 0 pinned up
        local = hn[i]
        for p in range(indptr[i], indptr[i + 1]):
            local += jcs[p] * spins[nbr[p]]
        e += np.int64(-2) * spins[i] * local
        spins[i] = -spins[i]
        if e < best:
            best = e
            count = 1
            configs[0] = spins
        elif e == best:
            if count < cap:
                configs[count] = spins
            count += 1
    return best, count, configs
