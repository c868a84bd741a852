"""The rounding operation on a net and its statistics.

For net points x_i, x_j the operation sends (i, j) to the index of the net
point nearest to the true product x_i x_j (lowest index on ties). The
estimators here measure how often the operation associates, how large the
fibers y -> x*y = z get, and how much multiplicative energy the sampled
products carry. All of them are deterministic functions of
(net, trials, seed) and are chunked so thread count never changes output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .net import Net, nn_query_many
from .rng import map_chunks, stream
from .so3 import DIAMETER, chordal_from_frobenius, qconj, qdist, qmul

_CHUNK = 65536

# two-sided 95% normal quantile for the Wilson interval
_Z95 = 1.959963984540054


def wilson_interval(hits: int, trials: int, z: float = _Z95):
    """Wilson score interval; well behaved at rates near 0 and 1."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    p = hits / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = (z / denom) * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials))
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class OpTableStats:
    """Hit-count summary of a sampled relation on the operation table."""

    trials: int
    hits: int
    rate: float
    ci95: tuple
    seed: int

    @classmethod
    def from_counts(cls, hits: int, trials: int, seed: int) -> "OpTableStats":
        return cls(trials=int(trials), hits=int(hits), rate=hits / trials,
                   ci95=wilson_interval(int(hits), int(trials)), seed=int(seed))


@dataclass(frozen=True)
class EnergyStats:
    """Energy estimate: rate of coincident pair-products plus n * rate."""

    trials: int
    hits: int
    rate: float
    ci95: tuple
    seed: int
    mode: str
    eta: float | None
    normalized: float


@dataclass(frozen=True)
class FiberProfile:
    """Distribution of |{y : x o y = z}| over sampled (x, z)."""

    counts: np.ndarray      # counts[k] = number of sampled pairs with fiber size k
    max_fiber: int
    trials: int
    seed: int


@dataclass(frozen=True)
class ProximalReport:
    pairs: int
    within: int
    max_dist: float
    seed: int

    @property
    def fraction(self) -> float:
        return self.within / self.pairs


# ---------------------------------------------------------------------------
# the operation
# ---------------------------------------------------------------------------

def round_many(net: Net, i: np.ndarray, j: np.ndarray) -> np.ndarray:
    """Vectorized rounding: indices of the nearest points to x_i * x_j."""
    prod = qmul(net.quats[i], net.quats[j])
    idx, _ = nn_query_many(net, prod)
    return idx


def round_op(net: Net, i: int, j: int) -> int:
    """Index of the net point nearest to x_i x_j (ties to the lowest index)."""
    n = len(net)
    if not (0 <= i < n and 0 <= j < n):
        raise IndexError(f"net indices out of range: ({i}, {j}) for size {n}")
    return int(round_many(net, np.array([i]), np.array([j]))[0])


def op_table(net: Net) -> np.ndarray:
    """Full operation table, entry (i, j) = i o j. Quadratic; small nets only."""
    n = len(net)
    if n * n > 4_000_000:
        raise ValueError(f"operation table would have {n * n} entries; net too large")
    out = np.empty((n, n), dtype=np.int64)
    cols = np.arange(n)
    for i in range(n):
        out[i] = round_many(net, np.full(n, i), cols)
    return out


def proximal_stats(net: Net, pairs: int, seed: int,
                   threads: int | None = None) -> ProximalReport:
    """Check d(x o y, xy) <= delta on random index pairs."""
    if pairs < 1:
        raise ValueError("pairs must be >= 1")

    def run(ci, m):
        gen = stream(seed, ci)
        i = gen.integers(0, len(net), size=m)
        j = gen.integers(0, len(net), size=m)
        prod = qmul(net.quats[i], net.quats[j])
        idx, dist = nn_query_many(net, prod)
        return int(np.sum(dist <= net.delta)), float(dist.max())

    parts = map_chunks(run, int(pairs), _CHUNK, threads)
    within = sum(p[0] for p in parts)
    max_dist = max(p[1] for p in parts)
    return ProximalReport(pairs=int(pairs), within=within,
                          max_dist=max_dist, seed=int(seed))


# ---------------------------------------------------------------------------
# associativity
# ---------------------------------------------------------------------------

def assoc_rate(net: Net, trials: int, seed: int, exhaustive: bool = False,
               threads: int | None = None) -> OpTableStats:
    """Proportion of triples with (i o j) o k == i o (j o k).

    Monte Carlo over uniform index triples, or exhaustive enumeration of
    all n^3 triples when requested (allowed for n^3 <= 1e8).
    """
    n = len(net)
    if exhaustive:
        if n ** 3 > 100_000_000:
            raise ValueError(f"exhaustive enumeration infeasible for n={n}")
        table = op_table(net)
        hits = 0
        for i in range(n):
            left = table[table[i]]      # [j, k] = (i o j) o k
            right = table[i][table]     # [j, k] = i o (j o k)
            hits += int(np.sum(left == right))
        return OpTableStats.from_counts(hits, n ** 3, seed)

    if trials < 1:
        raise ValueError("trials must be >= 1")

    def run(ci, m):
        gen = stream(seed, ci)
        i = gen.integers(0, n, size=m)
        j = gen.integers(0, n, size=m)
        k = gen.integers(0, n, size=m)
        ij = round_many(net, i, j)
        jk = round_many(net, j, k)
        left = round_many(net, ij, k)
        right = round_many(net, i, jk)
        return int(np.sum(left == right))

    hits = sum(map_chunks(run, int(trials), _CHUNK, threads))
    return OpTableStats.from_counts(hits, int(trials), seed)


# ---------------------------------------------------------------------------
# weak cancellativity
# ---------------------------------------------------------------------------

def cancellativity_profile(net: Net, trials: int, seed: int,
                           threads: int | None = None) -> FiberProfile:
    """Histogram of fiber sizes |{y : x o y = z}| over sampled (x, z).

    Candidates y are range-queried within delta of x^{-1} z, which covers
    every solution because x o y = z forces d(xy, z) <= delta; each
    candidate is then confirmed with an exact nearest-point query.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n = len(net)
    radius = chordal_from_frobenius(min(net.delta * (1 + 1e-12) + 1e-9, DIAMETER))

    def run(ci, m):
        gen = stream(seed, ci)
        x = gen.integers(0, n, size=m)
        z = gen.integers(0, n, size=m)
        target = qmul(qconj(net.quats[x]), net.quats[z])
        balls = net.tree.query_ball_point(target, radius)
        sizes = np.zeros(m, dtype=np.int64)
        xs, ys, owner = [], [], []
        for row, cand in enumerate(balls):
            if not cand:
                continue
            uniq = {c % n for c in cand}
            xs.extend([x[row]] * len(uniq))
            ys.extend(uniq)
            owner.extend([row] * len(uniq))
        if xs:
            idx = round_many(net, np.asarray(xs), np.asarray(ys))
            good = idx == z[np.asarray(owner)]
            np.add.at(sizes, np.asarray(owner)[good], 1)
        return np.bincount(sizes)

    parts = map_chunks(run, int(trials), _CHUNK, threads)
    width = max(p.size for p in parts)
    counts = np.zeros(width, dtype=np.int64)
    for p in parts:
        counts[:p.size] += p
    return FiberProfile(counts=counts, max_fiber=int(counts.nonzero()[0].max()),
                        trials=int(trials), seed=int(seed))


# ---------------------------------------------------------------------------
# multiplicative energy
# ---------------------------------------------------------------------------

def energy_estimate(net: Net, trials: int, seed: int, mode: str = "table",
                    eta: float | None = None,
                    threads: int | None = None) -> EnergyStats:
    """Rate of coincident products over independent pairs (i,j), (k,l).

    table mode counts i o j == k o l; metric mode counts
    d(x_i x_j, x_k x_l) <= eta. The normalized energy n * rate estimates
    sum_a r(a)^2 / n^3 for the representation counts r of the table.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if mode not in ("table", "metric"):
        raise ValueError(f"mode must be 'table' or 'metric', got {mode!r}")
    if mode == "metric":
        if eta is None or not eta > 0:
            raise ValueError("metric mode requires eta > 0")
    n = len(net)

    def run(ci, m):
        gen = stream(seed, ci)
        i = gen.integers(0, n, size=m)
        j = gen.integers(0, n, size=m)
        k = gen.integers(0, n, size=m)
        l = gen.integers(0, n, size=m)
        if mode == "table":
            return int(np.sum(round_many(net, i, j) == round_many(net, k, l)))
        left = qmul(net.quats[i], net.quats[j])
        right = qmul(net.quats[k], net.quats[l])
        return int(np.sum(qdist(left, right) <= eta))

    hits = sum(map_chunks(run, int(trials), _CHUNK, threads))
    base = OpTableStats.from_counts(hits, int(trials), seed)
    return EnergyStats(trials=base.trials, hits=base.hits, rate=base.rate,
                       ci95=base.ci95, seed=base.seed, mode=mode, eta=eta,
                       normalized=n * base.rate)
