"""Near-homomorphisms from a finite group into the rotation group.

A map phi assigns one rotation per group element; its cocycle
d_phi(x, y) = phi(y)^{-1} phi(x)^{-1} phi(xy) measures the failure of the
homomorphism equation, and the defect is the largest cocycle norm. A map
with small defect can be corrected to a genuine homomorphism by iterated
chordal averaging of phi(h g) phi(g)^{-1} over the group; the iteration is
a fixed point exactly on homomorphisms and in practice contracts the
defect geometrically. Only the abstract multiplication table of the group
is used.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import stream
from .so3 import (
    DIAMETER,
    Rotation,
    axis_angle_quats,
    qcanonical,
    qconj,
    qdist,
    qmul,
    qrotnorm,
    random_axes,
)
from .words import FiniteSubgroup


class DegenerateMeanError(ArithmeticError):
    """Raised when an averaging step hits a near-zero mean quaternion."""

    def __init__(self, indices):
        self.indices = list(indices)
        super().__init__(f"degenerate quaternion mean at elements {self.indices}")


@dataclass(frozen=True)
class NearHom:
    """Map from a finite group's elements into rotations, one per index."""

    group: FiniteSubgroup
    values: np.ndarray      # (m, 4) canonical quaternions

    def __post_init__(self):
        if self.values.shape != (len(self.group), 4):
            raise ValueError("values must hold one quaternion per group element")

    @property
    def defect(self) -> float:
        """Largest cocycle norm over all pairs."""
        return float(cocycle_norms(self).max())

    def value(self, i: int) -> Rotation:
        return Rotation(self.values[i])


def hom_from_subgroup(grp: FiniteSubgroup) -> NearHom:
    """The tautological homomorphism sending each element to its rotation."""
    return NearHom(group=grp, values=grp.elements.copy())


def cocycle(phi: NearHom, x: int, y: int) -> Rotation:
    """phi(y)^{-1} phi(x)^{-1} phi(xy)."""
    v = phi.values
    xy = int(phi.group.table[x, y])
    return Rotation(qmul(qmul(qconj(v[y]), qconj(v[x])), v[xy]))


def cocycle_norms(phi: NearHom) -> np.ndarray:
    """All |d_phi(x, y)| as an (m, m) array."""
    v = phi.values
    m = v.shape[0]
    out = np.empty((m, m))
    for x in range(m):
        prod = qmul(qconj(v), qconj(v[x])[None, :])
        out[x] = qrotnorm(qmul(prod, v[phi.group.table[x]]))
    return out


def defect(phi: NearHom) -> float:
    return phi.defect


def cocycle_identity_residual(phi: NearHom, x: int, y: int, z: int) -> float:
    """Distance between the two sides of the exact cocycle identity.

    With a = d_phi(x, y): a conjugated by phi(z) equals
    d_phi(y, z) d_phi(x, yz) d_phi(xy, z)^{-1}; the residual is pure
    rounding error for any map whatsoever.
    """
    t = phi.group.table
    a = cocycle(phi, x, y)
    pz = phi.value(z)
    lhs = pz.inverse() * a * pz
    rhs = cocycle(phi, y, z) * cocycle(phi, x, int(t[y, z])) \
        * cocycle(phi, int(t[x, y]), z).inverse()
    return float(qdist(lhs.q, rhs.q))


def perturb_hom(rho: NearHom, delta: float, seed: int) -> NearHom:
    """Left-multiply each value by an independent rotation of norm <= delta.

    The triangle inequality with bi-invariance bounds the resulting defect
    by 3 * delta.
    """
    if delta < 0:
        raise ValueError("delta must be nonnegative")
    if delta == 0:
        return NearHom(group=rho.group, values=rho.values.copy())
    m = len(rho.group)
    gen = stream(seed, 0)
    # angle ~ theta_max * u^{1/3}: uniform in the metric ball up to O(theta^2)
    theta_max = 2.0 * np.arcsin(min(delta / DIAMETER, 1.0))
    ang = theta_max * gen.uniform(0.0, 1.0, m) ** (1.0 / 3.0)
    eps = axis_angle_quats(random_axes(gen, m), ang)
    return NearHom(group=rho.group, values=qcanonical(qmul(eps, rho.values)))


def random_valued_map(grp: FiniteSubgroup, seed: int) -> NearHom:
    """Haar-random value on every element (a worst-case cocycle exerciser)."""
    from .so3 import haar_quats

    return NearHom(group=grp, values=haar_quats(stream(seed, 0), len(grp)))


@dataclass(frozen=True)
class CorrectionResult:
    phi_tilde: NearHom
    sup_dist: float
    converged: bool
    iterations: int
    history: list = field(default_factory=list)   # (defect, sup_dist) per iteration

    @property
    def final_defect(self) -> float:
        return self.history[-1][0] if self.history else self.phi_tilde.defect

    def nondecreasing_steps(self) -> list:
        """Iteration indices whose defect failed to decrease (diagnostic)."""
        bad = []
        for k in range(1, len(self.history)):
            if self.history[k][0] >= self.history[k - 1][0]:
                bad.append(k)
        return bad


def correct(phi: NearHom, tol: float = 1e-9, max_iter: int = 200) -> CorrectionResult:
    """Average phi toward a genuine homomorphism.

    Each round replaces phi(h) by the normalized mean over g of
    phi(h g) phi(g)^{-1}, with every summand sign-aligned to the current
    value. Stops once the defect reaches `tol` or after `max_iter` rounds;
    convergence is reported, never assumed.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    table = phi.group.table
    start = phi.values
    values = start.copy()
    history = []
    d0 = NearHom(group=phi.group, values=values).defect
    if d0 <= tol:
        return CorrectionResult(phi_tilde=NearHom(group=phi.group, values=values),
                                sup_dist=0.0, converged=True, iterations=0,
                                history=[(d0, 0.0)])
    iterations = 0
    current_defect = d0
    for _ in range(max_iter):
        terms = qmul(values[table], qconj(values)[None, :, :])    # (m, m, 4)
        align = np.sum(terms * values[:, None, :], axis=-1)
        terms = terms * np.where(align < 0.0, -1.0, 1.0)[..., None]
        mean = terms.mean(axis=1)
        norms = np.sqrt(np.sum(mean * mean, axis=-1))
        if np.any(norms < 1e-6):
            raise DegenerateMeanError(np.flatnonzero(norms < 1e-6))
        values = qcanonical(mean / norms[:, None])
        iterations += 1
        current_defect = NearHom(group=phi.group, values=values).defect
        history.append((current_defect, float(qdist(start, values).max())))
        if current_defect <= tol:
            break
    phi_tilde = NearHom(group=phi.group, values=values)
    return CorrectionResult(phi_tilde=phi_tilde,
                            sup_dist=float(qdist(start, values).max()),
                            converged=current_defect <= tol,
                            iterations=iterations,
                            history=history)
