"""Formal words in rotation generators and their evaluation.

Words are flat letter sequences (generator id, exponent +-1) with no free
reduction, so the commutator tower lengths follow the exact recurrence
len(s+1) = 2 len(s) + 2. Evaluation multiplies letters left to right with a
renormalization per step; batched evaluation over (n, 4) quaternion arrays
drives the group verification and the 8-variable genericity scan.

Finite rotation subgroups (cyclic, dihedral, tetrahedral, octahedral,
icosahedral) are built by closing explicit generators under multiplication
with snapping, and carry their multiplication table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import map_chunks, stream
from .so3 import (
    DIAMETER,
    Rotation,
    axis_angle_quats,
    chordal_from_frobenius,
    haar_quats,
    qcanonical,
    qconj,
    qdist,
    qmul,
    qnormalize,
    qrotnorm,
    random_axes,
)

SNAP_TOL = 1e-9   # identification tolerance for group closure


@dataclass(frozen=True)
class Word:
    """Formal word: letters are (generator id, exponent) with exponent +-1."""

    letters: tuple
    arity: int

    def __post_init__(self):
        for g, e in self.letters:
            if not 0 <= g < self.arity:
                raise ValueError(f"letter refers to generator {g}, arity {self.arity}")
            if e not in (1, -1):
                raise ValueError(f"exponent must be +-1, got {e}")

    def __len__(self) -> int:
        return len(self.letters)

    def inverse(self) -> "Word":
        return Word(tuple((g, -e) for g, e in reversed(self.letters)), self.arity)

    def __mul__(self, other: "Word") -> "Word":
        if other.arity != self.arity:
            raise ValueError("cannot concatenate words of different arity")
        return Word(self.letters + other.letters, self.arity)

    def __pow__(self, k: int) -> "Word":
        if k < 0:
            return self.inverse() ** (-k)
        return Word(self.letters * k, self.arity)

    def conjugated_by(self, other: "Word") -> "Word":
        """other^{-1} * self * other."""
        return other.inverse() * self * other

    def __repr__(self) -> str:
        if not self.letters:
            return "Word(1)"
        names = "abcdefgh"
        parts = [names[g] if e > 0 else names[g] + "'" for g, e in self.letters]
        body = " ".join(parts) if len(parts) <= 24 else f"{len(parts)} letters"
        return f"Word({body})"


def empty_word(arity: int = 2) -> Word:
    return Word((), arity)


def generator_word(g: int, arity: int = 2) -> Word:
    return Word(((g, 1),), arity)


def word_commutator(u: Word, v: Word) -> Word:
    """[u, v] = u^{-1} v^{-1} u v as plain concatenation."""
    return u.inverse() * v.inverse() * u * v


def commutator_word(s: int) -> Word:
    """Commutator tower on two generators: w_1 = [a, b], w_{s+1} = [a, w_s].

    Expanded length is exactly 3 * 2^s - 2.
    """
    if not 1 <= s <= 8:
        raise ValueError(f"tower depth must be in 1..8, got {s}")
    a = generator_word(0)
    w = word_commutator(a, generator_word(1))
    for _ in range(s - 1):
        w = word_commutator(a, w)
    return w


def w_star_word() -> Word:
    """The two-variable word [[a,b]^b, [a,b]]^60, expanded to 1200 letters.

    Its core vanishes on cyclic and dihedral subgroups (the commutator lands
    in the rotation subgroup, which is abelian and normal) and the 60th
    power kills every element order occurring inside S_5, so the word is
    trivial on every finite subgroup of the rotation group.
    """
    c = word_commutator(generator_word(0), generator_word(1))
    core = word_commutator(c.conjugated_by(generator_word(1)), c)
    return core ** 60


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

def word_eval_many(word: Word, assignments) -> np.ndarray:
    """Evaluate a word on batched assignments.

    `assignments` is a sequence of `word.arity` arrays of shape (n, 4). The
    result is the canonical (n, 4) array of left-to-right products with a
    renormalization after every letter.
    """
    arrays = [np.atleast_2d(np.asarray(a, dtype=float)) for a in assignments]
    if len(arrays) != word.arity:
        raise ValueError(f"word has arity {word.arity}, got {len(arrays)} assignments")
    n = arrays[0].shape[0]
    inv = [qconj(a) for a in arrays]
    out = np.tile(np.array([1.0, 0.0, 0.0, 0.0]), (n, 1))
    for g, e in word.letters:
        out = qmul(out, arrays[g] if e > 0 else inv[g])
        out = qnormalize(out)
    return qcanonical(out)


def word_eval(word: Word, assignment) -> Rotation:
    """Evaluate a word on one Rotation per generator."""
    rows = [r.q[None, :] for r in assignment]
    return Rotation(word_eval_many(word, rows)[0])


def lipschitz_check(word: Word, trials: int, seed: int,
                    perturbation: float, threads: int | None = None) -> float:
    """Largest observed d(w(x), w(y)) / (len(w) * max_i d(x_i, y_i)).

    Each y_i is x_i moved by at most `perturbation` in the metric. A word
    map contracts by at most its length, so the ratio must stay <= 1 up to
    rounding.
    """
    if not perturbation > 0:
        raise ValueError("perturbation must be positive")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    length = len(word)

    def run(ci, m):
        gen = stream(seed, ci)
        xs, ys, steps = [], [], []
        for _ in range(word.arity):
            x = haar_quats(gen, m)
            amount = gen.uniform(0.0, perturbation, m)
            ang = 2.0 * np.arcsin(np.clip(amount / DIAMETER, 0.0, 1.0))
            eps = axis_angle_quats(random_axes(gen, m), ang)
            y = qcanonical(qmul(eps, x))
            xs.append(x)
            ys.append(y)
            steps.append(qdist(x, y))
        num = qdist(word_eval_many(word, xs), word_eval_many(word, ys))
        den = length * np.max(np.stack(steps), axis=0)
        ratio = np.where(den > 0, num / np.maximum(den, 1e-300),
                         np.where(num <= 1e-12, 0.0, np.inf))
        return float(ratio.max())

    return max(map_chunks(run, int(trials), 4096, threads))


# ---------------------------------------------------------------------------
# finite rotation subgroups
# ---------------------------------------------------------------------------

class SubgroupClosureError(RuntimeError):
    """Raised when generator closure does not terminate at the expected size."""


@dataclass(frozen=True)
class FiniteSubgroup:
    """Explicit finite rotation group with its multiplication table."""

    kind: str
    n: int | None
    elements: np.ndarray         # (m, 4) canonical quaternions
    table: np.ndarray            # (m, m) indices, table[i, j] = index of e_i e_j
    inverse: np.ndarray          # (m,) indices
    identity_index: int

    def __len__(self) -> int:
        return self.elements.shape[0]

    def rotation(self, i: int) -> Rotation:
        return Rotation(self.elements[i])

    def element_order(self, i: int) -> int:
        k, j = 1, i
        while j != self.identity_index:
            j = int(self.table[j, i])
            k += 1
            if k > len(self):
                raise SubgroupClosureError("order computation exceeded group size")
        return k

    @property
    def name(self) -> str:
        return f"{self.kind}:{self.n}" if self.n is not None else self.kind


def _snap_index(elements: np.ndarray, q: np.ndarray) -> int:
    """Index of the element within SNAP_TOL of q, or -1."""
    d = qdist(elements, q[None, :])
    i = int(np.argmin(d))
    return i if d[i] <= SNAP_TOL else -1


def _close_under_products(generators, expected: int):
    """BFS closure of canonical quaternions under multiplication with snapping."""
    elements = [np.array([1.0, 0.0, 0.0, 0.0])]
    for g in generators:
        arr = np.vstack(elements)
        if _snap_index(arr, g) < 0:
            elements.append(np.asarray(g, dtype=float))
    frontier = list(range(len(elements)))
    while frontier:
        arr = np.vstack(elements)
        fresh = []
        for i in frontier:
            prods = qcanonical(qnormalize(qmul(arr[i][None, :], arr)))
            prods2 = qcanonical(qnormalize(qmul(arr, arr[i][None, :])))
            for q in np.vstack([prods, prods2]):
                cur = np.vstack(elements)
                if _snap_index(cur, q) < 0:
                    elements.append(q)
                    fresh.append(len(elements) - 1)
                    if len(elements) > 10 * expected:
                        raise SubgroupClosureError(
                            f"closure exceeded 10x expected size {expected}")
        frontier = fresh
    return np.vstack(elements)


def _finish_group(kind, n, elements, expected):
    m = elements.shape[0]
    if m != expected:
        raise SubgroupClosureError(
            f"{kind} closure produced {m} elements, expected {expected}")
    table = np.empty((m, m), dtype=np.int64)
    for i in range(m):
        prods = qcanonical(qnormalize(qmul(elements[i][None, :], elements)))
        d = qdist(prods[:, None, :], elements[None, :, :])
        j = np.argmin(d, axis=1)
        if np.any(d[np.arange(m), j] > SNAP_TOL):
            raise SubgroupClosureError(f"{kind} table product failed to snap")
        table[i] = j
    ident = _snap_index(elements, np.array([1.0, 0.0, 0.0, 0.0]))
    inverse = np.empty(m, dtype=np.int64)
    for i in range(m):
        (js,) = np.nonzero(table[i] == ident)
        inverse[i] = js[0]
    return FiniteSubgroup(kind=kind, n=n, elements=elements, table=table,
                          inverse=inverse, identity_index=int(ident))


_PHI = (1.0 + math.sqrt(5.0)) / 2.0


def finite_subgroup(kind: str, n: int | None = None) -> FiniteSubgroup:
    """Catalog groups: cyclic n, dihedral n (order 2n), tetra (12),
    octa (24), icosa (60), realized as explicit rotations."""
    z = np.array([0.0, 0.0, 1.0])
    x = np.array([1.0, 0.0, 0.0])
    if kind == "cyclic":
        if n is None or n < 1:
            raise ValueError("cyclic requires n >= 1")
        gens = [axis_angle_quats(z, 2.0 * math.pi / n)]
        expected = n
    elif kind == "dihedral":
        if n is None or n < 1:
            raise ValueError("dihedral requires n >= 1")
        gens = [axis_angle_quats(z, 2.0 * math.pi / n), axis_angle_quats(x, math.pi)]
        expected = 2 * n
    elif kind == "tetra":
        diag = np.array([1.0, 1.0, 1.0]) / math.sqrt(3.0)
        gens = [axis_angle_quats(z, math.pi), axis_angle_quats(diag, 2.0 * math.pi / 3.0)]
        expected, n = 12, None
    elif kind == "octa":
        gens = [axis_angle_quats(z, math.pi / 2.0), axis_angle_quats(x, math.pi / 2.0)]
        expected, n = 24, None
    elif kind == "icosa":
        vertex = np.array([0.0, 1.0, _PHI])
        vertex /= np.linalg.norm(vertex)
        gens = [axis_angle_quats(vertex, 2.0 * math.pi / 5.0), axis_angle_quats(z, math.pi)]
        expected, n = 60, None
    else:
        raise ValueError(f"unknown subgroup kind {kind!r}")
    elements = _close_under_products(gens, expected)
    return _finish_group(kind, n, elements, expected)


# ---------------------------------------------------------------------------
# verification and genericity
# ---------------------------------------------------------------------------

def verify_word_on_group(word: Word, grp: FiniteSubgroup,
                         exhaustive: bool | None = None,
                         samples: int = 10000, seed: int = 0) -> float:
    """Largest |w(g1, g2)| over pairs from the group.

    Exhaustive over all pairs when feasible (|grp|^2 <= 1e4, the default
    rule), otherwise over `samples` random pairs.
    """
    if word.arity != 2:
        raise ValueError("group verification expects a two-variable word")
    m = len(grp)
    if exhaustive is None:
        exhaustive = m * m <= 10_000
    if exhaustive:
        i, j = np.divmod(np.arange(m * m), m)
    else:
        gen = stream(seed, 0)
        i = gen.integers(0, m, size=samples)
        j = gen.integers(0, m, size=samples)
    vals = word_eval_many(word, [grp.elements[i], grp.elements[j]])
    return float(qrotnorm(vals).max())


@dataclass(frozen=True)
class GenericityTable:
    """Empirical CDF of |w(y_1..y_8)| against a grid of thresholds."""

    s: int
    etas: np.ndarray
    counts: np.ndarray
    samples: int
    seed: int

    @property
    def probs(self) -> np.ndarray:
        return self.counts / self.samples


def eight_variable_norms(s: int, quats8) -> np.ndarray:
    """|w(t_1..t_8)| where w plugs the pair-quotient tower values into the
    universal word: a = w_s(t1 t2^{-1}, t3 t4^{-1}), b likewise on t5..t8."""
    t = [np.asarray(a, dtype=float) for a in quats8]
    ws = commutator_word(s)
    u = qcanonical(qmul(t[0], qconj(t[1])))
    v = qcanonical(qmul(t[2], qconj(t[3])))
    a = word_eval_many(ws, [u, v])
    u = qcanonical(qmul(t[4], qconj(t[5])))
    v = qcanonical(qmul(t[6], qconj(t[7])))
    b = word_eval_many(ws, [u, v])
    return qrotnorm(word_eval_many(w_star_word(), [a, b]))


def genericity_scan(s: int, etas, samples: int, seed: int,
                    threads: int | None = None) -> GenericityTable:
    """Estimate P(|w(y_1..y_8)| <= eta) for Haar 8-tuples, per eta.

    Almost every 8-tuple generates a free group, so the mass near eta = 0
    should vanish; the scan records how fast.
    """
    if s not in (1, 2):
        raise ValueError(f"tower depth s must be 1 or 2, got {s}")
    etas = np.asarray(sorted(float(e) for e in etas), dtype=float)
    if etas.size == 0 or etas[0] < 0:
        raise ValueError("etas must be nonnegative")
    if samples < 1:
        raise ValueError("samples must be >= 1")

    def run(ci, m):
        gen = stream(seed, ci)
        tuples = [haar_quats(gen, m) for _ in range(8)]
        norms = np.sort(eight_variable_norms(s, tuples))
        return np.searchsorted(norms, etas, side="right")

    counts = sum(map_chunks(run, int(samples), 8192, threads))
    return GenericityTable(s=int(s), etas=etas, counts=counts.astype(np.int64),
                           samples=int(samples), seed=int(seed))
