"""Rotation arithmetic on SO(3).

Rotations are canonical unit quaternions (w, x, y, z). The metric is the
Frobenius distance between the 3x3 matrix forms, which for unit quaternions
p, q equals 2*sqrt(2)*sqrt(1 - <p,q>^2); it is bi-invariant and bounded by
the diameter 2*sqrt(2). The module also provides Haar sampling, ball
measures, ZXZ Euler decomposition, commutators, and the distance to the
set of rotations commuting (exactly or in the half-turn limit) with a
given element.

Array-level helpers (prefix q*) operate on float64 arrays of shape (..., 4)
and back every batched code path in the package; the Rotation class is a
thin canonical wrapper for scalar work.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DIAMETER = 2.0 * math.sqrt(2.0)

# Below this |w| the quaternion sign is decided by the vector part instead;
# keeps canonicalization stable for half-turns computed along different paths.
_CANON_EPS = 1e-13

_IDENTITY_Q = np.array([1.0, 0.0, 0.0, 0.0])


# ---------------------------------------------------------------------------
# array-level quaternion kernels
# ---------------------------------------------------------------------------

def qnormalize(q):
    q = np.asarray(q, dtype=float)
    n = np.sqrt(np.sum(q * q, axis=-1, keepdims=True))
    return q / n


def qcanonical(q):
    """Fix the double-cover sign: w > 0, or w ~ 0 and first large vector
    component > 0. Unit input assumed."""
    q = np.asarray(q, dtype=float)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    pick = np.where(np.abs(x) > _CANON_EPS, x,
                    np.where(np.abs(y) > _CANON_EPS, y, z))
    s = np.where(np.abs(w) > _CANON_EPS, np.sign(w), np.sign(pick))
    s = np.where(s == 0.0, 1.0, s)
    return q * s[..., None]


def canonical_unit(q):
    return qcanonical(qnormalize(q))


def qmul(p, q):
    """Hamilton product; composes rotations in matrix order (p then applies
    after q, i.e. R(p*q) = R(p) R(q))."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    pw, px, py, pz = p[..., 0], p[..., 1], p[..., 2], p[..., 3]
    qw, qx, qy, qz = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    return np.stack([
        pw * qw - px * qx - py * qy - pz * qz,
        pw * qx + px * qw + py * qz - pz * qy,
        pw * qy - px * qz + py * qw + pz * qx,
        pw * qz + px * qy - py * qx + pz * qw,
    ], axis=-1)


def qconj(q):
    q = np.asarray(q, dtype=float)
    out = q.copy()
    out[..., 1:] *= -1.0
    return out


def qrotnorm(q):
    """Frobenius distance to the identity: 2^{3/2} |sin(theta/2)|, which for
    a unit quaternion is 2^{3/2} times the vector-part norm."""
    q = np.asarray(q, dtype=float)
    v = np.sqrt(np.sum(q[..., 1:] ** 2, axis=-1))
    return DIAMETER * np.minimum(v, 1.0)


def qdist(p, q):
    """Frobenius distance between the rotations of two unit quaternions.

    Uses the sign-minimized chordal gap m = min(|p-q|^2, |p+q|^2), for which
    d^2 = 2 m (4 - m); the direct subtraction keeps full precision for
    nearly equal rotations.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    m = np.minimum(np.sum((p - q) ** 2, axis=-1), np.sum((p + q) ** 2, axis=-1))
    return np.sqrt(np.maximum(2.0 * m * (4.0 - m), 0.0))


def frobenius_from_chordal(e):
    """Convert a Euclidean gap between unit quaternions (sign-minimized) to
    the Frobenius distance of the rotations."""
    e = np.asarray(e, dtype=float)
    m = e * e
    return np.sqrt(np.maximum(2.0 * m * (4.0 - m), 0.0))


def chordal_from_frobenius(d):
    """Inverse of frobenius_from_chordal on [0, 2*sqrt(2)]."""
    d = float(d)
    if not 0.0 <= d <= DIAMETER + 1e-12:
        raise ValueError(f"distance {d} outside [0, {DIAMETER}]")
    m = 2.0 - math.sqrt(max(4.0 - d * d / 2.0, 0.0))
    return math.sqrt(m)


def qmatrix(q):
    """Rotation matrices, shape (..., 3, 3)."""
    q = np.asarray(q, dtype=float)
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    row0 = np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)], axis=-1)
    row1 = np.stack([2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)], axis=-1)
    row2 = np.stack([2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)], axis=-1)
    return np.stack([row0, row1, row2], axis=-2)


def haar_quats(gen: np.random.Generator, n: int):
    """n Haar-distributed rotations as canonical unit quaternions."""
    g = gen.standard_normal((n, 4))
    return qcanonical(g / np.sqrt(np.sum(g * g, axis=1, keepdims=True)))


def axis_angle_quats(axes, angles):
    """Canonical quaternions for rotations about unit `axes` by `angles`."""
    axes = np.asarray(axes, dtype=float)
    angles = np.asarray(angles, dtype=float)
    half = 0.5 * angles
    q = np.concatenate([np.cos(half)[..., None], np.sin(half)[..., None] * axes], axis=-1)
    return qcanonical(q)


def random_axes(gen: np.random.Generator, n: int):
    v = gen.standard_normal((n, 3))
    return v / np.sqrt(np.sum(v * v, axis=1, keepdims=True))


# ---------------------------------------------------------------------------
# scalar interface
# ---------------------------------------------------------------------------

class Rotation:
    """An element of SO(3) as a canonical unit quaternion (w, x, y, z)."""

    __slots__ = ("q",)

    def __init__(self, wxyz):
        q = np.asarray(wxyz, dtype=float).reshape(4)
        n = float(np.sqrt(np.sum(q * q)))
        if not np.isfinite(n) or n < 1e-12:
            raise ValueError("quaternion must be nonzero and finite")
        q = qcanonical(q / n)
        q.flags.writeable = False
        self.q = q

    @classmethod
    def identity(cls) -> "Rotation":
        return cls(_IDENTITY_Q)

    @classmethod
    def from_axis_angle(cls, axis, angle: float) -> "Rotation":
        axis = np.asarray(axis, dtype=float).reshape(3)
        n = float(np.linalg.norm(axis))
        if abs(n - 1.0) > 1e-12:
            raise ValueError(f"axis must be a unit vector, norm was {n!r}")
        half = 0.5 * float(angle)
        return cls(np.concatenate([[math.cos(half)], math.sin(half) * axis]))

    @property
    def matrix(self):
        return qmatrix(self.q)

    @property
    def angle(self) -> float:
        """Rotation angle in [0, pi]."""
        v = float(np.linalg.norm(self.q[1:]))
        return 2.0 * math.atan2(min(v, 1.0), abs(float(self.q[0])))

    @property
    def axis(self):
        """Unit rotation axis; the z axis by convention for the identity."""
        v = self.q[1:]
        n = float(np.linalg.norm(v))
        if n < 1e-15:
            return np.array([0.0, 0.0, 1.0])
        return v / n

    def __mul__(self, other: "Rotation") -> "Rotation":
        return Rotation(qmul(self.q, other.q))

    def inverse(self) -> "Rotation":
        return Rotation(qconj(self.q))

    def approx_eq(self, other: "Rotation", tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(self.q - other.q)) <= tol)

    def __repr__(self) -> str:
        w, x, y, z = self.q
        return f"Rotation([{w:.6g}, {x:.6g}, {y:.6g}, {z:.6g}])"


def rot_z(theta: float) -> Rotation:
    """Rotation by theta about the z axis."""
    return Rotation.from_axis_angle([0.0, 0.0, 1.0], theta)


def rot_x(alpha: float) -> Rotation:
    """Rotation by alpha about the x axis."""
    return Rotation.from_axis_angle([1.0, 0.0, 0.0], alpha)


def distance(g: Rotation, h: Rotation) -> float:
    """Frobenius distance between matrix forms; bi-invariant, range [0, 2^{3/2}]."""
    return float(qdist(g.q, h.q))


def norm(g: Rotation) -> float:
    """Distance to the identity; equals 2^{3/2} |sin(theta/2)|."""
    return float(qrotnorm(g.q))


def conjugate(a: Rotation, g: Rotation) -> Rotation:
    """g^{-1} a g."""
    return Rotation(qmul(qmul(qconj(g.q), a.q), g.q))


def commutator(a: Rotation, g: Rotation) -> Rotation:
    """a^{-1} g^{-1} a g."""
    return Rotation(qmul(qmul(qconj(a.q), qconj(g.q)), qmul(a.q, g.q)))


def commutator_norm_zx(theta: float, alpha: float) -> float:
    """Closed form for |[rot_z(theta), rot_x(alpha)]|.

    With x = |sin(theta/2)| and y = |sin(alpha/2)| the norm equals
    2^{5/2} x y sqrt(1 - x^2 y^2).
    """
    x = abs(math.sin(0.5 * theta))
    y = abs(math.sin(0.5 * alpha))
    return 2.0 ** 2.5 * x * y * math.sqrt(max(1.0 - (x * y) ** 2, 0.0))


def haar_rotation(gen: np.random.Generator) -> Rotation:
    """One Haar-distributed rotation from the given stream."""
    return Rotation(haar_quats(gen, 1)[0])


def ball_measure(r: float) -> float:
    """Haar measure of the Frobenius ball of radius r around the identity.

    Substituting the angle theta_r = 2 arcsin(r / 2^{3/2}) into the angle
    density (1 - cos theta)/pi gives (theta_r - sin theta_r)/pi.
    """
    r = float(r)
    if not 0.0 <= r <= DIAMETER + 1e-12:
        raise ValueError(f"radius {r} outside [0, {DIAMETER}]")
    t = 2.0 * math.asin(min(r / DIAMETER, 1.0))
    return (t - math.sin(t)) / math.pi


# ---------------------------------------------------------------------------
# ZXZ Euler decomposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EulerZXZ:
    """Angles with g = rot_z(beta1) * rot_x(alpha) * rot_z(beta2).

    beta1, beta2 lie in [0, 2*pi); alpha in [0, pi]. When alpha is 0 or pi
    the z rotations merge, and the convention is beta2 = 0.
    """

    beta1: float
    alpha: float
    beta2: float

    def rotation(self) -> Rotation:
        return rot_z(self.beta1) * rot_x(self.alpha) * rot_z(self.beta2)


_TWO_PI = 2.0 * math.pi


def euler_zxz(g: Rotation) -> EulerZXZ:
    """Decompose g into ZXZ Euler angles (degenerate alpha folds into beta1)."""
    m = g.matrix
    sa = math.hypot(m[2, 0], m[2, 1])
    if sa > 1e-12:
        alpha = math.atan2(sa, m[2, 2])
        beta1 = math.atan2(m[0, 2], -m[1, 2]) % _TWO_PI
        beta2 = math.atan2(m[2, 0], m[2, 1]) % _TWO_PI
        return EulerZXZ(beta1, alpha, beta2)
    # pure z rotation (alpha = 0) or z rotation times a half-turn (alpha = pi);
    # the first matrix column is the same in both cases
    alpha = 0.0 if m[2, 2] > 0.0 else math.pi
    beta1 = math.atan2(m[1, 0], m[0, 0]) % _TWO_PI
    return EulerZXZ(beta1, alpha, 0.0)


# ---------------------------------------------------------------------------
# commuting-set distance (Lemma-style bound support)
# ---------------------------------------------------------------------------

def _perp_basis(axes):
    """Two unit vectors completing each row of `axes` to an orthonormal frame."""
    axes = np.asarray(axes, dtype=float)
    helper = np.zeros_like(axes)
    idx = np.argmin(np.abs(axes), axis=-1)
    helper[np.arange(axes.shape[0]), idx] = 1.0
    e1 = helper - np.sum(helper * axes, axis=-1, keepdims=True) * axes
    e1 /= np.sqrt(np.sum(e1 * e1, axis=-1, keepdims=True))
    e2 = np.cross(axes, e1)
    return e1, e2


def dist_to_centralizer_many(gq, aq):
    """Vectorized dist_to_centralizer over rows of (n,4) quaternion arrays."""
    gq = np.asarray(gq, dtype=float)
    aq = np.asarray(aq, dtype=float)
    v = aq[:, 1:]
    vn = np.sqrt(np.sum(v * v, axis=1, keepdims=True))
    if np.any(vn < 1e-15):
        raise ValueError("centralizer distance undefined at the identity")
    u = v / vn

    m = qmatrix(gq)
    t1 = np.trace(m, axis1=-2, axis2=-1)
    t3 = np.einsum("ni,nij,nj->n", u, m, u)
    # tr(M^T K) with K the cross-product matrix of u
    t2 = (u[:, 0] * (m[:, 2, 1] - m[:, 1, 2])
          + u[:, 1] * (m[:, 0, 2] - m[:, 2, 0])
          + u[:, 2] * (m[:, 1, 0] - m[:, 0, 1]))
    f_circle = t3 + np.hypot(t1 - t3, t2)
    d_circle = np.sqrt(np.maximum(6.0 - 2.0 * f_circle, 0.0))

    # half-turns about axes perpendicular to u: maximize v^T sym(M) v on u-perp
    s = 0.5 * (m + np.swapaxes(m, -1, -2))
    e1, e2 = _perp_basis(u)
    s11 = np.einsum("ni,nij,nj->n", e1, s, e1)
    s22 = np.einsum("ni,nij,nj->n", e2, s, e2)
    s12 = np.einsum("ni,nij,nj->n", e1, s, e2)
    lam = 0.5 * ((s11 + s22) + np.hypot(s11 - s22, 2.0 * s12))
    d_perp = np.sqrt(np.maximum(6.0 + 2.0 * t1 - 4.0 * lam, 0.0))

    return np.minimum(d_circle, d_perp)


def dist_to_centralizer(g: Rotation, a: Rotation) -> float:
    """Distance from g to the rotations commuting with a's one-parameter group.

    The set is the circle of rotations about a's axis together with the
    half-turns about perpendicular axes. The half-turn component coincides
    with part of the centralizer exactly when a is a half-turn; keeping it
    for every a makes the commutator bound ratio uniformly bounded (by 2)
    instead of degenerating as a's angle approaches pi. Closed-form circle
    minimization; see the grid-search tests for the independent check.
    """
    if norm(a) <= 1e-9:
        raise ValueError("a must be bounded away from the identity")
    return float(dist_to_centralizer_many(g.q[None, :], a.q[None, :])[0])


# ---------------------------------------------------------------------------
# commutator / centralizer ratio scan
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RatioScan:
    """Rows (|a|, |[a,g]|, dist, ratio) plus the observed ratio maximum."""

    rows: np.ndarray
    max_ratio: float
    samples: int
    dropped: int
    seed: int


_SCAN_CHUNK = 16384


def centralizer_ratio_scan(samples, seed, *, a_norm_range=None,
                           a_angle_range=None, commuting_band=None,
                           threads=None, chunk=_SCAN_CHUNK) -> RatioScan:
    """Sample (a, g) and tabulate dist(g)*|a| / |[a,g]|.

    By default a and g are Haar. `a_norm_range` draws |a| uniformly in the
    given interval; `a_angle_range` draws a's angle uniformly; and
    `commuting_band` replaces g by (rotation about a's axis) * eps with
    |eps| uniform in the band, to probe nearly commuting pairs. Rows with
    |a| <= 1e-9 or |[a,g]| < 1e-13 are dropped (counted in `dropped`).
    """
    from .rng import map_chunks, stream

    def run(ci, m):
        gen = stream(seed, ci)
        if a_norm_range is not None:
            lo, hi = a_norm_range
            r = gen.uniform(lo, hi, m)
            theta = 2.0 * np.arcsin(np.clip(r / DIAMETER, 0.0, 1.0))
            aq = axis_angle_quats(random_axes(gen, m), theta)
        elif a_angle_range is not None:
            lo, hi = a_angle_range
            theta = gen.uniform(lo, hi, m)
            aq = axis_angle_quats(random_axes(gen, m), theta)
        else:
            aq = haar_quats(gen, m)
        if commuting_band is not None:
            lo, hi = commuting_band
            axes = aq[:, 1:] / np.sqrt(np.sum(aq[:, 1:] ** 2, axis=1, keepdims=True))
            circ = axis_angle_quats(axes, gen.uniform(0.0, _TWO_PI, m))
            enorm = gen.uniform(lo, hi, m)
            eang = 2.0 * np.arcsin(np.clip(enorm / DIAMETER, 0.0, 1.0))
            eps = axis_angle_quats(random_axes(gen, m), eang)
            gq = qcanonical(qmul(eps, circ))
        else:
            gq = haar_quats(gen, m)

        na = qrotnorm(aq)
        comm = qmul(qmul(qconj(aq), qconj(gq)), qmul(aq, gq))
        nc = qrotnorm(comm)
        keep = (na > 1e-9) & (nc > 1e-13)
        aq, gq, na, nc = aq[keep], gq[keep], na[keep], nc[keep]
        dist = dist_to_centralizer_many(gq, aq)
        ratio = dist * na / nc
        return np.column_stack([na, nc, dist, ratio])

    parts = map_chunks(run, int(samples), chunk, threads)
    rows = np.concatenate(parts) if parts else np.empty((0, 4))
    dropped = int(samples) - rows.shape[0]
    max_ratio = float(rows[:, 3].max()) if rows.size else 0.0
    return RatioScan(rows=rows, max_ratio=max_ratio, samples=int(samples),
                     dropped=dropped, seed=int(seed))
