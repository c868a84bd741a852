"""Separated nets on SO(3): greedy construction, nearest-point queries,
covering verification, and a plain-text persistence format.

A net is a set of rotations with pairwise Frobenius distance >= delta,
built by greedy random packing: Haar candidates are accepted when far
enough from every accepted point, and construction stops after a long run
of consecutive rejections. Nearest-neighbor queries run on a k-d tree over
the quaternions and their negatives, since the Frobenius distance is
monotone in the sign-minimized Euclidean gap (relation validated against
matrix arithmetic in the tests).
"""

from __future__ import annotations

import math

import numpy as np
from scipy.spatial import cKDTree

from .rng import map_chunks, stream
from .so3 import Rotation, frobenius_from_chordal, haar_quats

TIE_TOL = 1e-12          # candidates within this of the minimum tie by index
_BUILD_BATCH = 2048
_TAIL_MAX = 2048         # points allowed outside the tree before a rebuild


class NetFormatError(ValueError):
    """Raised when a net file cannot be parsed."""


class NetIntegrityError(ValueError):
    """Raised when a loaded net violates its separation invariant."""


class Net:
    """Indexed delta-separated point set with a nearest-neighbor index."""

    def __init__(self, delta: float, seed: int, quats: np.ndarray,
                 stop_rejections: int | None = None):
        self.delta = float(delta)
        self.seed = int(seed)
        self.stop_rejections = stop_rejections
        q = np.ascontiguousarray(quats, dtype=float)
        q.flags.writeable = False
        self.quats = q
        self._tree = None

    def __len__(self) -> int:
        return self.quats.shape[0]

    def rotation(self, i: int) -> Rotation:
        return Rotation(self.quats[i])

    @property
    def tree(self) -> cKDTree:
        """k-d tree over the quaternions and their negatives (lazy)."""
        if self._tree is None:
            self._tree = cKDTree(np.vstack([self.quats, -self.quats]))
        return self._tree

    def min_pairwise_distance(self, max_exhaustive: int = 5000,
                              sample_rows: int = 5000) -> float:
        """Smallest pairwise Frobenius distance.

        Exhaustive up to `max_exhaustive` points; above that a fixed
        pseudorandom subset of rows is checked against all points.
        """
        n = len(self)
        if n < 2:
            return math.inf
        if n <= max_exhaustive:
            rows = np.arange(n)
        else:
            rows = np.sort(stream(0, 0).choice(n, size=sample_rows, replace=False))
        best = np.inf
        for lo in range(0, rows.size, 512):
            blk = rows[lo:lo + 512]
            c = np.abs(self.quats[blk] @ self.quats.T)
            np.clip(c, 0.0, 1.0, out=c)
            d2 = 8.0 * (1.0 - c * c)
            d2[np.arange(blk.size), blk] = np.inf
            best = min(best, float(d2.min()))
        return math.sqrt(best)


def build_net(delta: float, seed: int, stop_rejections: int | None = None) -> Net:
    """Greedy random packing at separation `delta`.

    Accepts a Haar sample when its distance to every accepted point is at
    least delta. Stops after `stop_rejections` consecutive rejections, or
    with the default rule max(1000, 20 * current size). The result is a
    pure function of (delta, seed, stop_rejections).
    """
    delta = float(delta)
    if not delta > 0.0:
        raise ValueError(f"delta must be positive, got {delta}")
    if stop_rejections is not None and stop_rejections < 1:
        raise ValueError("stop_rejections must be >= 1")

    gen = stream(seed, 0)
    cap = 1024
    quats = np.empty((cap, 4))
    n = 0
    n_tree = 0
    tree = None
    consecutive = 0

    def limit() -> int:
        return stop_rejections if stop_rejections is not None else max(1000, 20 * n)

    while True:
        batch = haar_quats(gen, _BUILD_BATCH)
        # distance to committed points via the sign-minimized chordal gap;
        # anything below delta here is a definite rejection
        e_best = np.full(_BUILD_BATCH, np.inf)
        if tree is not None:
            e_best, _ = tree.query(batch, k=1)
        if n > n_tree:
            c = np.abs(batch @ quats[n_tree:n].T).max(axis=1)
            e_best = np.minimum(e_best, np.sqrt(np.maximum(2.0 - 2.0 * c, 0.0)))
        d_pre = np.where(np.isinf(e_best), np.inf, frobenius_from_chordal(e_best))

        candidates = np.flatnonzero(d_pre >= delta)
        new_local: list[int] = []
        stopped = False
        pos = 0
        for j in candidates:
            gap = int(j) - pos            # definite rejections in [pos, j)
            if consecutive + gap >= limit():
                stopped = True
                break
            consecutive += gap
            pos = int(j) + 1
            accept = True
            if new_local:
                c_loc = float(np.abs(batch[new_local] @ batch[j]).max())
                e_loc = math.sqrt(max(2.0 - 2.0 * c_loc, 0.0))
                m = e_loc * e_loc
                accept = math.sqrt(max(2.0 * m * (4.0 - m), 0.0)) >= delta
            if accept:
                if n == cap:
                    cap *= 2
                    grown = np.empty((cap, 4))
                    grown[:n] = quats[:n]
                    quats = grown
                quats[n] = batch[j]
                new_local.append(int(j))
                n += 1
                consecutive = 0
            else:
                consecutive += 1
                if consecutive >= limit():
                    stopped = True
                    break
        if not stopped:
            gap = _BUILD_BATCH - pos      # trailing definite rejections
            if consecutive + gap >= limit():
                stopped = True
            else:
                consecutive += gap
        if stopped:
            break
        if n - n_tree >= _TAIL_MAX:
            tree = cKDTree(np.vstack([quats[:n], -quats[:n]]))
            n_tree = n

    return Net(delta, seed, quats[:n].copy(), stop_rejections)


# ---------------------------------------------------------------------------
# nearest-neighbor queries
# ---------------------------------------------------------------------------

def _tie_pick(net: Net, points: np.ndarray, idx: np.ndarray,
              dist: np.ndarray, escalate: np.ndarray):
    """Resolve rows flagged as potential ties by full scan."""
    for r in np.flatnonzero(escalate):
        i, d = _scan_row(net, points[r])
        idx[r] = i
        dist[r] = d


def _scan_row(net: Net, p: np.ndarray):
    c = np.abs(net.quats @ p)
    np.clip(c, 0.0, 1.0, out=c)
    d = np.sqrt(8.0 * (1.0 - c * c))
    dmin = d.min()
    i = int(np.argmax(d <= dmin + TIE_TOL))
    return i, float(d[i])


def nn_query_many(net: Net, points: np.ndarray):
    """Indices and Frobenius distances of the nearest net points.

    Ties within TIE_TOL of the minimum go to the lowest index, matching
    nn_scan_many exactly.
    """
    if len(net) == 0:
        raise ValueError("net is empty")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = len(net)
    e, raw = net.tree.query(points, k=2)
    idx = raw[:, 0] % n
    dist = frobenius_from_chordal(e[:, 0])
    second = frobenius_from_chordal(e[:, 1])
    # same point seen through both signs is not a tie
    escalate = (second <= dist + TIE_TOL) & (raw[:, 1] % n != idx)
    if np.any(escalate):
        _tie_pick(net, points, idx, dist, escalate)
    return idx.astype(np.int64), dist


def nn_query(net: Net, g: Rotation):
    """Nearest net point to a rotation: (index, Frobenius distance)."""
    idx, dist = nn_query_many(net, g.q[None, :])
    return int(idx[0]), float(dist[0])


def nn_scan_many(net: Net, points: np.ndarray):
    """Linear-scan nearest neighbors with the same tie rule (oracle path)."""
    if len(net) == 0:
        raise ValueError("net is empty")
    points = np.atleast_2d(np.asarray(points, dtype=float))
    c = np.abs(points @ net.quats.T)
    np.clip(c, 0.0, 1.0, out=c)
    d = np.sqrt(8.0 * (1.0 - c * c))
    dmin = d.min(axis=1)
    idx = np.argmax(d <= dmin[:, None] + TIE_TOL, axis=1)
    return idx.astype(np.int64), d[np.arange(points.shape[0]), idx]


# ---------------------------------------------------------------------------
# covering verification
# ---------------------------------------------------------------------------

class CoveringReport:
    """Outcome of a statistical covering check."""

    def __init__(self, max_gap: float, passed: bool, samples: int, seed: int):
        self.max_gap = max_gap
        self.passed = passed
        self.samples = samples
        self.seed = seed

    def __repr__(self):
        word = "pass" if self.passed else "FAIL"
        return f"CoveringReport({word}, max_gap={self.max_gap:.6g}, samples={self.samples})"


_COVER_CHUNK = 16384


def covering_check(net: Net, samples: int, seed: int,
                   threads: int | None = None) -> CoveringReport:
    """Sample Haar points and record the largest distance to the net.

    Passes when the largest observed gap is at most delta, the covering
    radius a maximal separated set must satisfy.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")

    def run(ci, m):
        pts = haar_quats(stream(seed, ci), m)
        _, dist = nn_query_many(net, pts)
        return float(dist.max())

    gaps = map_chunks(run, int(samples), _COVER_CHUNK, threads)
    max_gap = max(gaps)
    return CoveringReport(max_gap=max_gap, passed=max_gap <= net.delta,
                          samples=int(samples), seed=int(seed))


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

FORMAT_VERSION = 1


def net_save(net: Net, path) -> None:
    """Write a net as text: header fields, then one quaternion per line."""
    with open(path, "w") as fh:
        fh.write(f"format_version={FORMAT_VERSION}\n")
        fh.write(f"delta={net.delta!r}\n")
        fh.write(f"seed={net.seed}\n")
        fh.write(f"count={len(net)}\n")
        for q in net.quats:
            fh.write("%.17g %.17g %.17g %.17g\n" % tuple(q))


def _header_value(lines, lineno, key):
    if lineno >= len(lines):
        raise NetFormatError(f"line {lineno + 1}: missing header field '{key}'")
    line = lines[lineno].strip()
    prefix = key + "="
    if not line.startswith(prefix):
        raise NetFormatError(f"line {lineno + 1}: expected '{key}=...', got {line!r}")
    return line[len(prefix):]


def net_load(path, verify: bool = True) -> Net:
    """Read a net file; validates the format and the separation invariant."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    try:
        version = int(_header_value(lines, 0, "format_version"))
        delta = float(_header_value(lines, 1, "delta"))
        seed = int(_header_value(lines, 2, "seed"))
        count = int(_header_value(lines, 3, "count"))
    except NetFormatError:
        raise
    except ValueError as exc:
        raise NetFormatError(f"bad header field: {exc}") from None
    if version != FORMAT_VERSION:
        raise NetFormatError(f"unsupported format_version {version}")
    if count < 0:
        raise NetFormatError("count must be nonnegative")
    if len(lines) < 4 + count:
        raise NetFormatError(
            f"truncated file: header promises {count} points, "
            f"found {len(lines) - 4} lines")
    quats = np.empty((count, 4))
    for i in range(count):
        parts = lines[4 + i].split()
        if len(parts) != 4:
            raise NetFormatError(f"line {5 + i}: expected 4 scalars, got {len(parts)}")
        try:
            quats[i] = [float(p) for p in parts]
        except ValueError as exc:
            raise NetFormatError(f"line {5 + i}: {exc}") from None
    net = Net(delta, seed, quats)
    if verify and count > 1:
        sep = net.min_pairwise_distance()
        if sep < delta - 1e-12:
            raise NetIntegrityError(
                f"separation violated: min pairwise distance {sep!r} < delta {delta!r}")
    return net
