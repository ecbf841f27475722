"""Design-based domain means and their shape-constrained versions."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .cone import ConeProjectionResult, project_cone, reduce_face
from .constraints import ConstraintMatrix, transform_by_weights

__all__ = [
    "ConstrainedEstimate",
    "DomainEstimates",
    "EmptyDomainError",
    "SampleData",
    "constrained_estimate",
    "domain_estimates",
    "hajek_from_weights",
    "maxmin_estimate",
    "pooled_blocks",
    "transitive_closure",
]

POOL_TOL = 1e-8
MAXMIN_MAX_DOMAINS = 12


class EmptyDomainError(ValueError):
    """A domain has no sampled units (or zero estimated size)."""

    def __init__(self, domains):
        self.domains = list(domains)
        super().__init__(f"no sampled units in domain(s) {self.domains}")


@dataclass(frozen=True)
class SampleData:
    """Unit-level sample.

    Attributes
    ----------
    y : ndarray, shape (n,)
    pi : ndarray, shape (n,)
        First-order inclusion probabilities in ``(0, 1]``.
    domain : ndarray of int, shape (n,)
        0-based domain index of each unit.
    stratum : ndarray of int, optional
    joint_pi : ndarray, shape (n, n), optional
        Second-order inclusion probabilities.
    design : str, optional
        ``"stratified_srswor"`` or ``"poisson"``; lets variance routines
        derive joint probabilities in closed form.
    """

    y: np.ndarray
    pi: np.ndarray
    domain: np.ndarray
    stratum: Optional[np.ndarray] = None
    joint_pi: Optional[np.ndarray] = field(default=None, repr=False)
    design: Optional[str] = None

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        pi = np.asarray(self.pi, dtype=float)
        dom = np.asarray(self.domain)
        if y.ndim != 1 or pi.shape != y.shape or dom.shape != y.shape:
            raise ValueError("y, pi and domain must be 1-D arrays of equal length")
        if not np.all((pi > 0) & (pi <= 1)):
            raise ValueError("inclusion probabilities must lie in (0, 1]")
        if dom.size and (not np.issubdtype(dom.dtype, np.integer) or dom.min() < 0):
            raise ValueError("domain indices must be nonnegative integers")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "domain", dom.astype(np.intp))
        if self.stratum is not None:
            st = np.asarray(self.stratum)
            if st.shape != y.shape:
                raise ValueError("stratum must match y in length")
            object.__setattr__(self, "stratum", st)
        if self.joint_pi is not None:
            jp = np.asarray(self.joint_pi, dtype=float)
            n = y.size
            if jp.shape != (n, n):
                raise ValueError("joint_pi must be n x n")
            if not np.allclose(np.diag(jp), pi, rtol=0, atol=1e-12):
                raise ValueError("joint_pi diagonal must equal pi")
            if not np.allclose(jp, jp.T, rtol=0, atol=1e-12):
                raise ValueError("joint_pi must be symmetric")
            if np.any(jp <= 0):
                raise ValueError("joint inclusion probabilities must be positive")
            object.__setattr__(self, "joint_pi", jp)
        if self.design not in (None, "stratified_srswor", "poisson"):
            raise ValueError(f"unknown design {self.design!r}")

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def weights(self) -> np.ndarray:
        return 1.0 / self.pi


@dataclass(frozen=True)
class DomainEstimates:
    """Horvitz-Thompson totals and Hájek means per domain."""

    t_hat: np.ndarray
    N_hat: np.ndarray
    hajek: np.ndarray
    n_d: np.ndarray
    ht_mean: Optional[np.ndarray] = None

    @property
    def D(self) -> int:
        return self.t_hat.size

    @property
    def relative_sizes(self) -> np.ndarray:
        """``N_hat_d / sum(N_hat)``, the weights of the constrained fit."""
        return self.N_hat / self.N_hat.sum()


def hajek_from_weights(y, weights, domain, D: int):
    """Weighted totals, sizes and ratio means per domain.

    Returns ``(t_hat, N_hat, hajek)``.  Units with zero weight are ignored;
    domains whose estimated size is zero raise :class:`EmptyDomainError`.
    """
    domain = np.asarray(domain)
    w = np.asarray(weights, dtype=float)
    t_hat = np.bincount(domain, weights=w * np.asarray(y, dtype=float), minlength=D)
    N_hat = np.bincount(domain, weights=w, minlength=D)
    if t_hat.size > D:
        raise ValueError(f"domain index {int(domain.max())} out of range for D={D}")
    empty = np.flatnonzero(~(N_hat > 0))
    if empty.size:
        raise EmptyDomainError(empty.tolist())
    return t_hat, N_hat, t_hat / N_hat


def domain_estimates(sample: SampleData, D: int, N_d: Optional[Sequence[float]] = None) -> DomainEstimates:
    """HT totals, estimated sizes and Hájek means for domains ``0..D-1``.

    ``N_d`` (known population domain sizes) is only needed for the HT mean.
    """
    n_d = np.bincount(sample.domain, minlength=D)
    if n_d.size > D:
        raise ValueError(f"domain index {n_d.size - 1} out of range for D={D}")
    empty = np.flatnonzero(n_d == 0)
    if empty.size:
        raise EmptyDomainError(empty.tolist())
    t_hat, N_hat, hajek = hajek_from_weights(sample.y, sample.weights, sample.domain, D)
    ht = None
    if N_d is not None:
        N_d = np.asarray(N_d, dtype=float)
        if N_d.shape != (D,):
            raise ValueError("N_d must have one entry per domain")
        ht = t_hat / N_d
    return DomainEstimates(t_hat, N_hat, hajek, n_d, ht)


@dataclass(frozen=True)
class ConstrainedEstimate:
    """Constrained domain means with the face that produced them.

    ``face`` is the reduced (linearly independent) face set; ``pooled_blocks``
    is a partition of the domains when the constraints form a partial order.
    """

    theta: np.ndarray
    face: tuple
    weights_used: np.ndarray
    pooled_blocks: Optional[list] = None
    projection: Optional[ConeProjectionResult] = field(default=None, repr=False)

    def block_ids(self) -> Optional[np.ndarray]:
        if self.pooled_blocks is None:
            return None
        ids = np.empty(self.theta.size, dtype=np.intp)
        for b, block in enumerate(self.pooled_blocks):
            ids[list(block)] = b
        return ids


def pooled_blocks(theta, A: ConstraintMatrix, tol: float = POOL_TOL) -> list:
    """Connected components of domains joined by binding order constraints."""
    theta = np.asarray(theta, dtype=float)
    D = theta.size
    parent = list(range(D))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    thr = tol * (1.0 + np.linalg.norm(theta))
    for lo, hi in A.order_pairs():
        if abs(theta[hi] - theta[lo]) < thr:
            ri, rj = find(lo), find(hi)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
    groups: dict[int, list] = {}
    for d in range(D):
        groups.setdefault(find(d), []).append(d)
    return [tuple(g) for g in sorted(groups.values())]


def constrained_estimate(est: DomainEstimates, A: ConstraintMatrix, reduce: bool = True) -> ConstrainedEstimate:
    """Project the Hájek vector onto ``{theta : A theta >= 0}``.

    The weighting is ``diag(N_hat_d / N_hat)``.  Feasible Hájek vectors are
    returned unchanged (bit for bit) with an empty face.  With
    ``reduce=False`` the terminal face is reported as is and pooled blocks
    are skipped (replicate estimates only need ``theta``).
    """
    A = A if isinstance(A, ConstraintMatrix) else ConstraintMatrix(A)
    if A.D != est.D:
        raise ValueError(f"constraint matrix has {A.D} columns for {est.D} domains")
    w = est.relative_sizes
    y = est.hajek
    if np.all(A.entries @ y >= 0):
        theta = y.copy()
        face: tuple = ()
        proj = None
    else:
        theta, proj = project_cone(y, w, A)
        if reduce:
            _, edges = transform_by_weights(A, w)
            face = reduce_face(proj.face, edges, np.sqrt(w) * y)
        else:
            face = proj.face
    blocks = pooled_blocks(theta, A) if reduce and A.is_order else None
    return ConstrainedEstimate(theta, face, w, blocks, proj)


def transitive_closure(pairs, D: int) -> np.ndarray:
    """Boolean ``D x D`` reachability matrix (``R[i, j]``: ``i`` below ``j``)."""
    R = np.zeros((D, D), dtype=bool)
    for lo, hi in pairs:
        R[lo, hi] = True
    for k in range(D):
        R |= R[:, k:k + 1] & R[k:k + 1, :]
    return R


def maxmin_estimate(est: DomainEstimates, order) -> np.ndarray:
    """Closed-form isotonic fit under a partial order by set enumeration.

    ``theta_d = max over upper sets U containing d of min over lower sets L
    containing d`` of the size-weighted mean of the Hájek values on
    ``L & U``.  Cost is exponential in ``D``.

    Parameters
    ----------
    est : DomainEstimates
    order : iterable of (lower, upper) pairs, or ConstraintMatrix
    """
    D = est.D
    if D > MAXMIN_MAX_DOMAINS:
        raise ValueError(f"max-min enumeration limited to D <= {MAXMIN_MAX_DOMAINS}")
    if isinstance(order, ConstraintMatrix):
        order = order.order_pairs()
    R = transitive_closure(order, D)
    if np.any(np.diag(R)):
        raise ValueError("order relation is cyclic")

    masks = np.arange(1 << D, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(D)) & 1).astype(bool)
    # upper set: contains every successor of each member
    above = R  # above[i, j]: j is above i
    is_upper = np.ones(masks.size, dtype=bool)
    is_lower = np.ones(masks.size, dtype=bool)
    for i in range(D):
        up_i = np.flatnonzero(above[i])
        down_i = np.flatnonzero(above[:, i])
        if up_i.size:
            is_upper &= ~bits[:, i] | bits[:, up_i].all(axis=1)
        if down_i.size:
            is_lower &= ~bits[:, i] | bits[:, down_i].all(axis=1)

    wy = est.N_hat * est.hajek
    S = bits @ wy
    W = bits @ est.N_hat
    theta = np.empty(D)
    for d in range(D):
        U = masks[is_upper & bits[:, d]]
        L = masks[is_lower & bits[:, d]]
        inter = U[:, None] & L[None, :]
        avg = S[inter] / W[inter]
        theta[d] = avg.min(axis=1).max()
    return theta
