"""Random spin-glass instances: generation, gauges, exact energies.

Couplings are stored as integer numerators over a per-class denominator
so every energy is an exact integer in units of 1/denominator; floats
appear only at I/O boundaries.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .topology import Graph

# value sets as numerators over the class denominator
DISORDER_CLASSES = {
    "binomial": (1, (-1, 1)),
    "sidon28": (28, (-28, -19, -13, -8, 8, 13, 19, 28)),
    "range6": (6, (-6, -5, -4, -3, -2, -1, 1, 2, 3, 4, 5, 6)),
}

_SM64_GAMMA = np.uint64(0x9E3779B97F4A7C15)


def _splitmix64(x: np.ndarray) -> np.ndarray:
    """Vectorized splitmix64 finalizer over uint64."""
    z = x + _SM64_GAMMA
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@dataclass(eq=False)
class Instance:
    """An Ising instance over `graph` with exact rational couplings."""

    graph: Graph
    j_num: np.ndarray        # (E,) int64 numerators
    h_num: np.ndarray        # (N,) int64 numerators
    denom: int
    disorder_class: str
    seed: int

    def __post_init__(self):
        self.j_num = np.asarray(self.j_num, dtype=np.int64)
        self.h_num = np.asarray(self.h_num, dtype=np.int64)
        if len(self.j_num) != self.graph.n_edges:
            raise ValueError("coupling count does not match edge count")
        if len(self.h_num) != self.graph.n_nodes:
            raise ValueError("field count does not match node count")

    @property
    def n_spins(self) -> int:
        return self.graph.n_nodes

    def couplings(self) -> dict:
        """Edge -> Fraction view (I/O convenience, not the hot path)."""
        return {
            (int(a), int(b)): Fraction(int(j), self.denom)
            for (a, b), j in zip(self.graph.edges, self.j_num)
        }


def generate_instance(graph: Graph, disorder_class: str, seed: int,
                      values=None, denom: int | None = None) -> Instance:
    """Draw one instance; each coupling depends only on (seed, edge index).

    The per-edge draw uses a counter-based generator, so adding or
    reordering other edges never perturbs an existing edge's value and
    instances are reproducible across parallel generation.
    """
    if graph.n_nodes == 0:
        raise ValueError("graph is empty")
    if disorder_class == "custom":
        if values is None or denom is None:
            raise ValueError("custom class needs explicit values and denom")
        vals = np.asarray(values, dtype=np.int64)
    else:
        try:
            denom, value_tuple = DISORDER_CLASSES[disorder_class]
        except KeyError:
            raise ValueError(
                f"unknown disorder class {disorder_class!r}; expected one of "
                f"{sorted(DISORDER_CLASSES)} or 'custom'") from None
        vals = np.asarray(value_tuple, dtype=np.int64)
    if np.abs(vals).max() > denom:
        raise ValueError("coupling magnitudes must not exceed 1")
    e = graph.n_edges
    with np.errstate(over="ignore"):  # modular 64-bit keying on purpose
        counters = (np.uint64(seed) * np.uint64(0xD1342543DE82EF95)
                    ^ (np.arange(1, e + 1, dtype=np.uint64)
                       * np.uint64(0xAF251AF3B0F025B5)))
        draws = _splitmix64(counters) % np.uint64(len(vals))
    j_num = vals[draws.astype(np.int64)]
    h_num = np.zeros(graph.n_nodes, dtype=np.int64)
    return Instance(graph=graph, j_num=j_num, h_num=h_num, denom=denom,
                    disorder_class=disorder_class, seed=seed)


def as_spins(config) -> np.ndarray:
    s = np.asarray(config, dtype=np.int8)
    if not np.all(np.abs(s) == 1):
        raise ValueError("spins must be +1 or -1")
    return s


def energy_num(instance: Instance, config) -> int:
    """Energy numerator (exact integer in units of 1/denom)."""
    s = as_spins(config)
    if len(s) != instance.n_spins:
        raise ValueError(
            f"config length {len(s)} != {instance.n_spins} spins")
    a = instance.graph.edges[:, 0]
    b = instance.graph.edges[:, 1]
    sa = s[a].astype(np.int64)
    sb = s[b].astype(np.int64)
    e = int(np.dot(instance.j_num, sa * sb))
    e += int(np.dot(instance.h_num, s.astype(np.int64)))
    return e


def energy(instance: Instance, config) -> Fraction:
    """H(s) = sum_i h_i s_i + sum_(ij) J_ij s_i s_j, exactly."""
    return Fraction(energy_num(instance, config), instance.denom)


@dataclass(eq=False)
class Gauge:
    """Per-spin sign flip; relabels the instance without changing physics."""

    signs: np.ndarray
    id: int = 0

    def __post_init__(self):
        self.signs = as_spins(self.signs)


def random_gauges(n_spins: int, count: int, seed: int) -> list[Gauge]:
    rng = np.random.Generator(np.random.PCG64(seed))
    out = []
    for g in range(count):
        signs = rng.integers(0, 2, size=n_spins, dtype=np.int8) * 2 - 1
        out.append(Gauge(signs=signs, id=g))
    return out


def apply_gauge(instance: Instance, gauge: Gauge) -> Instance:
    """J'_ij = s_i s_j J_ij, h'_i = s_i h_i."""
    s = gauge.signs
    if len(s) != instance.n_spins:
        raise ValueError("gauge length does not match instance")
    a = instance.graph.edges[:, 0]
    b = instance.graph.edges[:, 1]
    j = instance.j_num * s[a].astype(np.int64) * s[b].astype(np.int64)
    h = instance.h_num * s.astype(np.int64)
    return Instance(graph=instance.graph, j_num=j, h_num=h,
                    denom=instance.denom,
                    disorder_class=instance.disorder_class,
                    seed=instance.seed)


def apply_gauge_config(config, gauge: Gauge) -> np.ndarray:
    s = as_spins(config)
    if len(s) != len(gauge.signs):
        raise ValueError("gauge length does not match config")
    return (s * gauge.signs).astype(np.int8)


def sidon_property_check(values, max_subset: int) -> dict:
    """Check the two structural properties of a coupling magnitude set.

    values: positive magnitudes (Fractions, ints, or (num, den) pairs).
    Reports (a) whether some pairwise sum of members is itself a member
    and (b) whether some signed multiset of at most max_subset members
    sums to zero.  Sign choices are per magnitude: a multiset holding
    +v and -v together cancels trivially and is not counted as a
    violation.
    """
    fracs = sorted(Fraction(v) for v in values)
    if any(v <= 0 for v in fracs):
        raise ValueError("values must be positive")
    lcm = 1
    for v in fracs:
        lcm = lcm * v.denominator // np.gcd(lcm, v.denominator)
    nums = [int(v * lcm) for v in fracs]
    member = set(nums)
    pair_hits = []
    for x, y in itertools.combinations_with_replacement(nums, 2):
        if x + y in member:
            pair_hits.append((Fraction(x, lcm), Fraction(y, lcm),
                              Fraction(x + y, lcm)))
    zero_hits = []
    for size in range(2, max_subset + 1):
        for combo in itertools.combinations_with_replacement(nums, size):
            distinct = sorted(set(combo))
            mult = [combo.count(v) for v in distinct]
            for signs in itertools.product((1, -1), repeat=len(distinct)):
                if signs[0] == -1:
                    continue  # global flip symmetry
                total = sum(s * m * v
                            for s, m, v in zip(signs, mult, distinct))
                if total == 0:
                    witness = [s * Fraction(v, lcm) * m
                               for s, m, v in zip(signs, mult, distinct)]
                    zero_hits.append(witness)
    return {
        "pairwise_sum_free": not pair_hits,
        "pairwise_witnesses": pair_hits,
        "zero_sum_free": not zero_hits,
        "zero_sum_witnesses": zero_hits,
        "max_subset": max_subset,
    }


def save_instance(instance: Instance, path_or_file) -> None:
    """Plain-text instance format; values are numerators over `denom`."""
    own = isinstance(path_or_file, str)
    f = open(path_or_file, "w", encoding="utf-8") if own else path_or_file
    try:
        f.write(f"#instance class={instance.disorder_class} "
                f"denom={instance.denom} seed={instance.seed} "
                f"N={instance.n_spins}\n")
        for i, h in enumerate(instance.h_num):
            if h != 0:
                f.write(f"h {i} {int(h)}\n")
        for (a, b), j in zip(instance.graph.edges, instance.j_num):
            f.write(f"J {a} {b} {int(j)}\n")
    finally:
        if own:
            f.close()


class InstanceFormatError(ValueError):
    pass


def load_instance(path_or_file, graph: Graph | None = None) -> Instance:
    """Parse the instance format; reconstructs the graph from J lines
    unless an explicit graph (with matching edges) is supplied."""
    own = isinstance(path_or_file, str)
    f = open(path_or_file, "r", encoding="utf-8") if own else path_or_file
    try:
        lines = f.read().splitlines()
    finally:
        if own:
            f.close()
    if not lines or not lines[0].startswith("#instance"):
        raise InstanceFormatError("line 1: missing #instance header")
    kv = {}
    for tok in lines[0].split()[1:]:
        if "=" not in tok:
            raise InstanceFormatError(f"line 1: bad header token {tok!r}")
        k, v = tok.split("=", 1)
        kv[k] = v
    try:
        denom = int(kv["denom"])
        seed = int(kv["seed"])
        n = int(kv["N"])
        cls = kv["class"]
    except (KeyError, ValueError) as exc:
        raise InstanceFormatError(f"line 1: bad header: {exc}") from exc
    h_num = np.zeros(n, dtype=np.int64)
    edges = []
    j_list = []
    seen = set()
    for ln, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if parts[0] == "h" and len(parts) == 3:
            i, v = int(parts[1]), int(parts[2])
            if not 0 <= i < n:
                raise InstanceFormatError(f"line {ln}: node {i} out of range")
            h_num[i] = v
        elif parts[0] == "J" and len(parts) == 4:
            a, b, v = int(parts[1]), int(parts[2]), int(parts[3])
            if not (0 <= a < n and 0 <= b < n) or a == b:
                raise InstanceFormatError(f"line {ln}: bad edge {a} {b}")
            key = (a, b) if a < b else (b, a)
            if key in seen:
                raise InstanceFormatError(f"line {ln}: duplicate edge {a} {b}")
            seen.add(key)
            edges.append(key)
            j_list.append(v)
        else:
            raise InstanceFormatError(f"line {ln}: unrecognized record")
    if graph is None:
        graph = Graph(n_nodes=n, edges=np.array(edges, dtype=np.int32))
        j_num = np.array(j_list, dtype=np.int64)
    else:
        if graph.n_nodes != n:
            raise InstanceFormatError("supplied graph size mismatch")
        index = {(int(a), int(b)): e
                 for e, (a, b) in enumerate(graph.edges)}
        j_num = np.zeros(graph.n_edges, dtype=np.int64)
        for key, v in zip(edges, j_list):
            if key not in index:
                raise InstanceFormatError(f"edge {key} absent from graph")
            j_num[index[key]] = v
    return Instance(graph=graph, j_num=j_num, h_num=h_num, denom=denom,
                    disorder_class=cls, seed=seed)
