"""Parallel tempering with isoenergetic cluster moves.

Two independent replica chains share a temperature ladder; each sweep
does one Metropolis pass per replica, one exchange pass per chain with
alternating even/odd pairings, and one rejection-free cluster move per
ICM temperature between the chains' same-temperature replicas.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _kernels
from .disorder import Instance, energy_num


@dataclass(eq=False)
class TemperatureLadder:
    betas: np.ndarray
    n_icm: int
    label: str = ""

    def __post_init__(self):
        self.betas = np.asarray(self.betas, dtype=np.float64)
        if len(self.betas) < 2 or not np.all(np.diff(self.betas) > 0):
            raise ValueError("betas must be strictly increasing, length >= 2")
        if not 0 < self.n_icm <= len(self.betas):
            raise ValueError("n_icm must be in 1..len(betas)")

    @property
    def n_t(self) -> int:
        return len(self.betas)


def make_ladder(n_t: int, beta_min: float, beta_max: float,
                spacing: str = "log", n_icm: int = 1,
                label: str = "") -> TemperatureLadder:
    """Geometric ladder from beta_min to beta_max inclusive.

    spacing "feedback-init" is the same geometric start; it marks a
    ladder intended as the seed of feedback_optimize.
    """
    if n_t < 2:
        raise ValueError("need at least two temperatures")
    if not 0 < beta_min < beta_max:
        raise ValueError("need 0 < beta_min < beta_max")
    if spacing not in ("log", "feedback-init"):
        raise ValueError(f"unknown spacing {spacing!r}")
    betas = np.geomspace(beta_min, beta_max, n_t)
    betas[0] = beta_min
    betas[-1] = beta_max
    return TemperatureLadder(betas=betas, n_icm=n_icm, label=label)


# The four benchmark ladders (S28 study).  Sets 2 and 3 start
# log-spaced and are feedback-optimized per instance family at run
# setup; sets 1 and 4 are used as-is.
def table1_ladders() -> dict[str, TemperatureLadder]:
    return {
        "set1": make_ladder(32, 0.1, 5.0, "log", 8, label="set1"),
        "set2": make_ladder(24, 0.2, 10.0, "feedback-init", 6, label="set2"),
        "set3": make_ladder(32, 0.2, 10.0, "feedback-init", 8, label="set3"),
        "set4": make_ladder(32, 0.1, 20.0, "log", 8, label="set4"),
    }


@dataclass(eq=False)
class RunTrace:
    """Best-energy-so-far trace of one solver run.

    events[k] = (sweep, best energy numerator at that sweep); energies
    are exact integers in units of 1/instance.denom.  seconds_per_sweep
    converts sweeps to wall-clock estimates.
    """

    sweeps: np.ndarray
    energies: np.ndarray
    best_config: np.ndarray
    sweeps_total: int
    seed: int
    denom: int
    seconds_per_sweep: float = float("nan")
    label: str = ""

    @property
    def best_energy_num(self) -> int:
        return int(self.energies[-1])

    def best_energy(self) -> Fraction:
        return Fraction(self.best_energy_num, self.denom)

    def first_hit_sweep(self, threshold_num: int) -> int | None:
        """Earliest sweep with best energy <= threshold (numerators)."""
        idx = np.flatnonzero(self.energies <= threshold_num)
        if len(idx) == 0:
            return None
        return int(self.sweeps[idx[0]])

    def times(self) -> np.ndarray:
        return self.sweeps * self.seconds_per_sweep


def _csr(instance: Instance):
    g = instance.graph
    n = g.n_nodes
    e = g.edges
    deg = np.zeros(n, dtype=np.int64)
    np.add.at(deg, e[:, 0], 1)
    np.add.at(deg, e[:, 1], 1)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(deg, out=indptr[1:])
    nbr = np.empty(indptr[-1], dtype=np.int64)
    jcs = np.empty(indptr[-1], dtype=np.int64)
    fill = indptr[:-1].copy()
    for k in range(len(e)):
        a, b = int(e[k, 0]), int(e[k, 1])
        j = int(instance.j_num[k])
        nbr[fill[a]] = b
        jcs[fill[a]] = j
        fill[a] += 1
        nbr[fill[b]] = a
        jcs[fill[b]] = j
        fill[b] += 1
    return indptr, nbr, jcs


def run_pticm(instance: Instance, ladder: TemperatureLadder, sweeps: int,
              seed: int, record_cadence: int = 0,
              seconds_per_sweep: float = float("nan")) -> RunTrace:
    """Deterministic PT-ICM run; trace records every improvement plus
    the requested cadence."""
    if sweeps < 0:
        raise ValueError("sweeps must be >= 0")
    if np.any(instance.h_num != 0):
        raise ValueError("cluster moves need h = 0")
    indptr, nbr, jcs = _csr(instance)
    cap = sweeps + 2
    rec_sweep = np.zeros(cap, dtype=np.int64)
    rec_e = np.zeros(cap, dtype=np.int64)
    icm_stats = np.zeros(3, dtype=np.int64)
    n_rec, best, best_spins, _, _ = _kernels.pticm_run(
        indptr, nbr, jcs, instance.h_num, instance.graph.edges.astype(np.int64),
        instance.j_num, ladder.betas, ladder.n_icm, float(instance.denom),
        sweeps, np.uint64(seed & 0xFFFFFFFFFFFFFFFF), record_cadence,
        rec_sweep, rec_e, icm_stats)
    if icm_stats[2] != 0:
        raise AssertionError("cluster move failed exact energy conservation")
    return RunTrace(
        sweeps=rec_sweep[:n_rec].copy(),
        energies=rec_e[:n_rec].copy(),
        best_config=best_spins,
        sweeps_total=sweeps,
        seed=seed,
        denom=instance.denom,
        seconds_per_sweep=seconds_per_sweep,
        label=ladder.label,
    )


def sweeps_to_quantile(traces_per_instance: list[RunTrace],
                       quantile: float = 0.9) -> int:
    """Minimal sweep count by which the given fraction of instances had
    already reached their final lowest energy."""
    if not traces_per_instance:
        raise ValueError("no traces")
    hit_sweeps = []
    for tr in traces_per_instance:
        final = tr.energies[-1]
        first = tr.sweeps[np.flatnonzero(tr.energies <= final)[0]]
        hit_sweeps.append(int(first))
    hit_sweeps.sort()
    k = int(np.ceil(quantile * len(hit_sweeps)))
    k = max(1, min(k, len(hit_sweeps)))
    return hit_sweeps[k - 1]


# -- pedagogical/reference implementations used by tests and by
#    feedback optimization (python-level, deliberately simple) --

def metropolis_sweep(instance: Instance, spins: np.ndarray, beta: float,
                     rng: np.random.Generator) -> int:
    """One in-place Metropolis pass in index order; returns dE numerator."""
    indptr, nbr, jcs = _csr(instance)
    total = 0
    n = instance.n_spins
    u = rng.random(n)
    for i in range(n):
        local = int(instance.h_num[i])
        for p in range(indptr[i], indptr[i + 1]):
            local += int(jcs[p]) * int(spins[nbr[p]])
        d_e = -2 * int(spins[i]) * local
        if d_e <= 0 or u[i] < np.exp(-beta * d_e / instance.denom):
            spins[i] = -spins[i]
            total += d_e
    return total


def pt_exchange(betas: np.ndarray, e_nums: np.ndarray, denom: int,
                offset: int, rng: np.random.Generator) -> np.ndarray:
    """One exchange pass over adjacent pairs starting at `offset`.

    e_nums is the per-temperature energy numerator array; returns the
    permutation applied to replica slots (identity where no swap).
    """
    n_t = len(betas)
    perm = np.arange(n_t)
    t = offset
    while t + 1 < n_t:
        arg = (betas[t] - betas[t + 1]) * (e_nums[t] - e_nums[t + 1]) / denom
        if arg >= 0 or rng.random() < np.exp(arg):
            perm[t], perm[t + 1] = perm[t + 1], perm[t]
        t += 2
    return perm


def icm_move(instance: Instance, spins_a: np.ndarray, spins_b: np.ndarray,
             rng: np.random.Generator) -> int:
    """One isoenergetic cluster move between two replicas, in place.

    Returns the flipped cluster size (0 for the no-op when the replicas
    agree everywhere).  The pair energy sum is conserved exactly.
    """
    anti = np.flatnonzero(spins_a != spins_b)
    if len(anti) == 0:
        return 0
    seed_site = int(anti[rng.integers(len(anti))])
    adj = instance.graph.adjacency_lists()
    in_cluster = np.zeros(instance.n_spins, dtype=bool)
    in_cluster[seed_site] = True
    stack = [seed_site]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if not in_cluster[v] and spins_a[v] != spins_b[v]:
                in_cluster[v] = True
                stack.append(v)
    spins_a[in_cluster] = -spins_a[in_cluster]
    spins_b[in_cluster] = -spins_b[in_cluster]
    return int(in_cluster.sum())


@dataclass(eq=False)
class _FlowState:
    """Replica diffusion bookkeeping for feedback optimization."""

    direction: np.ndarray   # +1 heading up (hot), -1 heading down, 0 unset
    n_up: np.ndarray
    n_down: np.ndarray


def feedback_optimize(ladder: TemperatureLadder, instance_sample,
                      rounds: int = 3, sweeps_per_round: int = 2000,
                      seed: int = 0) -> TemperatureLadder:
    """Reposition interior temperatures so replica flow is uniform.

    Replicas are labeled by the extreme temperature they last visited;
    f(beta) = fraction of "down" labels among labeled visits at each
    beta.  New interior betas place the measured f at uniform rank
    spacing (endpoints pinned).  Returns a ladder with `converged`
    False in the label when too few round trips were seen.
    """
    if rounds == 0:
        return ladder
    if not instance_sample:
        raise ValueError("need at least one instance")
    betas = ladder.betas.copy()
    n_t = ladder.n_t
    rng = np.random.Generator(np.random.PCG64(seed))
    converged = True
    for _ in range(rounds):
        f_num = np.zeros(n_t)
        f_den = np.zeros(n_t)
        for instance in instance_sample:
            indptr, nbr, jcs = _csr(instance)
            n = instance.n_spins
            spins = (rng.integers(0, 2, size=(n_t, n), dtype=np.int8) * 2 - 1)
            e_nums = np.array([energy_num(instance, spins[t])
                               for t in range(n_t)], dtype=np.int64)
            # which physical replica sits at each temperature
            slot = np.arange(n_t)
            flow = _FlowState(direction=np.zeros(n_t, dtype=np.int8),
                              n_up=np.zeros(n_t), n_down=np.zeros(n_t))
            flow.direction[slot[0]] = +1    # at the hottest end
            flow.direction[slot[-1]] = -1
            states = _kernels.seed_streams(
                np.uint64(rng.integers(2 ** 63)), n_t)
            for sw in range(sweeps_per_round):
                for t in range(n_t):
                    d_e, st = _kernels.metropolis_sweep(
                        spins[slot[t]], indptr, nbr, jcs, instance.h_num,
                        betas[t] / instance.denom, states[slot[t]])
                    states[slot[t]] = st
                    e_nums[t] += d_e
                perm = pt_exchange(betas, e_nums, instance.denom,
                                   sw & 1, rng)
                slot = slot[perm]
                e_nums = e_nums[perm]
                flow.direction[slot[0]] = +1
                flow.direction[slot[-1]] = -1
                for t in range(n_t):
                    d = flow.direction[slot[t]]
                    if d == +1:
                        f_num[t] += 0.0
                        f_den[t] += 1.0
                    elif d == -1:
                        f_num[t] += 1.0
                        f_den[t] += 1.0
        mask = f_den > 0
        if mask.sum() < max(3, n_t // 2):
            converged = False
            break
        f = np.where(mask, f_num / np.maximum(f_den, 1), np.nan)
        # keep f monotone for inversion; fall back gracefully otherwise
        order = np.argsort(betas)
        fb = f[order]
        valid = ~np.isnan(fb)
        if valid.sum() < 3:
            converged = False
            break
        xb = betas[order][valid]
        yb = np.maximum.accumulate(fb[valid])
        target = np.linspace(yb[0], yb[-1], n_t)
        new = np.interp(target, yb, xb)
        new[0] = betas[0]
        new[-1] = betas[-1]
        new = np.maximum.accumulate(new)
        for i in range(1, n_t):
            if new[i] <= new[i - 1]:
                new[i] = new[i - 1] * 1.0001
        new[-1] = betas[-1]
        betas = new
    tag = "" if converged else ":nonconverged"
    return TemperatureLadder(betas=betas, n_icm=ladder.n_icm,
                             label=(ladder.label or "feedback") + tag)
