"""Variance estimation for (constrained) domain means.

Two routes are provided: Taylor linearization with the face set held fixed,
and replicate weights (delete-a-group jackknife or any externally supplied
scheme).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Optional

import numpy as np

from .constraints import ConstraintMatrix
from .estimation import (
    DomainEstimates,
    SampleData,
    constrained_estimate,
    hajek_from_weights,
)

__all__ = [
    "LinearizedVariance",
    "ReplicateScheme",
    "dagjk_replicates",
    "ht_variance",
    "joint_inclusion_matrix",
    "linearized_variance",
    "replicate_estimates",
    "replicate_variance",
    "theta_fixed_face",
    "wald_interval",
]

FD_STEP = 1e-6


def theta_fixed_face(t_hat, N_hat, A, face) -> np.ndarray:
    """Constrained means as a smooth function of the totals, face held fixed.

    ``theta = y - W^(-1/2) P W^(1/2) y`` where ``y = t_hat / N_hat``,
    ``W = diag(N_hat / sum(N_hat))`` and ``P`` projects onto the span of the
    rows ``face`` of ``A W^(-1/2)``.
    """
    t_hat = np.asarray(t_hat, dtype=float)
    N_hat = np.asarray(N_hat, dtype=float)
    y = t_hat / N_hat
    face = list(face)
    if not face:
        return y
    sw = np.sqrt(N_hat / N_hat.sum())
    B = np.asarray(A, dtype=float)[face] / sw
    z = sw * y
    coef = np.linalg.lstsq(B.T, z, rcond=None)[0]
    return y - (B.T @ coef) / sw


def _jacobian(t_hat, N_hat, A, face, step=FD_STEP):
    """Central-difference partials of ``theta_fixed_face``.

    Returns ``(alpha, beta)``, both ``D x D``: ``alpha[d, i]`` is the
    derivative of ``theta_d`` with respect to ``t_hat_i``.
    """
    D = t_hat.size
    alpha = np.empty((D, D))
    beta = np.empty((D, D))
    for i in range(D):
        h = step * max(1.0, abs(t_hat[i]))
        tp, tm = t_hat.copy(), t_hat.copy()
        tp[i] += h
        tm[i] -= h
        alpha[:, i] = (theta_fixed_face(tp, N_hat, A, face) - theta_fixed_face(tm, N_hat, A, face)) / (2 * h)
        h = step * max(1.0, abs(N_hat[i]))
        Np, Nm = N_hat.copy(), N_hat.copy()
        Np[i] += h
        Nm[i] -= h
        beta[:, i] = (theta_fixed_face(t_hat, Np, A, face) - theta_fixed_face(t_hat, Nm, A, face)) / (2 * h)
    return alpha, beta


def joint_inclusion_matrix(sample: SampleData) -> np.ndarray:
    """Dense ``n x n`` matrix of second-order inclusion probabilities."""
    if sample.joint_pi is not None:
        return sample.joint_pi
    pi = sample.pi
    if sample.design == "poisson":
        jp = np.outer(pi, pi)
    elif sample.design == "stratified_srswor":
        st = _strata(sample)
        jp = np.outer(pi, pi)
        for h in np.unique(st):
            idx = np.flatnonzero(st == h)
            n_h = idx.size
            N_h = n_h / pi[idx[0]]
            within = n_h * (n_h - 1) / (N_h * (N_h - 1)) if N_h > 1 else 1.0
            jp[np.ix_(idx, idx)] = within
    else:
        raise ValueError("joint inclusion probabilities are missing and no design is declared")
    np.fill_diagonal(jp, pi)
    return jp


def _strata(sample: SampleData) -> np.ndarray:
    if sample.stratum is None:
        return np.zeros(sample.n, dtype=np.intp)
    return np.asarray(sample.stratum)


def ht_variance(values, sample: SampleData) -> np.ndarray:
    """Horvitz-Thompson variance estimate of ``sum_k values_k / pi_k``.

    ``values`` may be ``(n,)`` or ``(n, q)``; the result has one entry per
    column.  Stratified SRSWOR and Poisson designs use closed forms; any
    other design needs ``sample.joint_pi``.
    """
    u = np.asarray(values, dtype=float)
    squeeze = u.ndim == 1
    if squeeze:
        u = u[:, None]
    pi = sample.pi
    x = u / pi[:, None]
    if sample.joint_pi is not None:
        jp = sample.joint_pi
        M = 1.0 - np.outer(pi, pi) / jp
        out = np.einsum("kq,kl,lq->q", x, M, x)
    elif sample.design == "poisson":
        out = ((1.0 - pi)[:, None] * x**2).sum(axis=0)
    elif sample.design == "stratified_srswor":
        st = _strata(sample)
        out = np.zeros(u.shape[1])
        for h in np.unique(st):
            idx = np.flatnonzero(st == h)
            n_h = idx.size
            f_h = pi[idx[0]]
            if f_h >= 1.0:
                continue
            if n_h < 2:
                raise ValueError(f"stratum {h} has a single sampled unit")
            N_h = n_h / f_h
            s2 = u[idx].var(axis=0, ddof=1)
            out += N_h**2 * (1.0 - f_h) * s2 / n_h
    else:
        raise ValueError("joint inclusion probabilities are missing and no design is declared")
    return out[0] if squeeze else out


@dataclass(frozen=True)
class LinearizedVariance:
    """Linearization variance estimates for every domain.

    Attributes
    ----------
    variance : ndarray, shape (D,)
        Nonnegative estimates (negative values clamped to zero).
    u_hat : ndarray, shape (n, D)
        Linearized unit values, one column per target domain.
    alpha, beta : ndarray, shape (D, D)
        ``alpha[d, i]``: partial of ``theta_d`` in ``t_hat_i``; ``beta``
        likewise in ``N_hat_i``.
    n_clamped : int
        Number of negative estimates that were clamped.
    """

    variance: np.ndarray
    u_hat: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    beta: np.ndarray = field(repr=False)
    n_clamped: int = 0

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(self.variance)


def linearized_variance(sample: SampleData, est: DomainEstimates, face=(), A=None) -> LinearizedVariance:
    """Linearization variance of the constrained means for a fixed face.

    With ``face=()`` this is the usual linearized variance of the Hájek
    means.  ``face`` should be linearly independent (see
    :func:`shapesurvey.cone.reduce_face`).
    """
    face = tuple(face)
    if face and A is None:
        raise ValueError("a constraint matrix is required for a nonempty face")
    alpha, beta = _jacobian(est.t_hat, est.N_hat, A, face)
    dom = sample.domain
    u_hat = (sample.y[:, None] * alpha[:, dom].T) + beta[:, dom].T
    var = np.atleast_1d(ht_variance(u_hat, sample))
    neg = var < 0
    n_clamped = int(neg.sum())
    if n_clamped:
        warnings.warn(f"{n_clamped} negative variance estimate(s) clamped to zero", RuntimeWarning,
                      stacklevel=2)
        var = np.where(neg, 0.0, var)
    return LinearizedVariance(var, u_hat, alpha, beta, n_clamped)


@dataclass(frozen=True)
class ReplicateScheme:
    """Replicate weights (``n x G``) with combination coefficients ``c_g``."""

    replicate_weights: np.ndarray = field(repr=False)
    coefficients: np.ndarray
    groups: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        rw = np.asarray(self.replicate_weights, dtype=float)
        c = np.asarray(self.coefficients, dtype=float)
        if rw.ndim != 2:
            raise ValueError("replicate weights must be n x G")
        if c.shape != (rw.shape[1],):
            raise ValueError("one coefficient per replicate is required")
        if rw.shape[1] < 2:
            raise ValueError("at least two replicates are required")
        rw.setflags(write=False)
        object.__setattr__(self, "replicate_weights", rw)
        object.__setattr__(self, "coefficients", c)

    @property
    def G(self) -> int:
        return self.replicate_weights.shape[1]


def dagjk_replicates(sample: SampleData, G: int, seed) -> ReplicateScheme:
    """Delete-a-group jackknife replicate weights.

    Units are shuffled within each stratum and dealt round-robin into ``G``
    groups, so group sizes within a stratum differ by at most one.
    Replicate ``g`` zeroes group ``g`` and multiplies the remaining weights
    by ``G / (G - 1)``.

    Parameters
    ----------
    seed : int or numpy.random.SeedSequence
        Drives a Philox generator; the same seed gives the same groups.
    """
    G = int(G)
    if G < 2:
        raise ValueError("G must be at least 2")
    if sample.stratum is None:
        raise ValueError("delete-a-group jackknife needs stratum labels")
    st = np.asarray(sample.stratum)
    labels, counts = np.unique(st, return_counts=True)
    if G > counts.min():
        raise ValueError(f"G={G} exceeds the smallest stratum sample size {int(counts.min())}")
    rng = np.random.Generator(np.random.Philox(seed))
    groups = np.empty(sample.n, dtype=np.intp)
    for h in labels:
        idx = np.flatnonzero(st == h)
        order = rng.permutation(idx.size)
        groups[idx[order]] = np.arange(idx.size) % G
    keep = groups[:, None] != np.arange(G)[None, :]
    rw = np.where(keep, sample.weights[:, None] * (G / (G - 1)), 0.0)
    return ReplicateScheme(rw, np.full(G, (G - 1) / G), groups)


def replicate_estimates(sample: SampleData, scheme: ReplicateScheme, D: int,
                        A: Optional[ConstraintMatrix] = None) -> np.ndarray:
    """Replicate Hájek (``A is None``) or constrained means, shape ``(G, D)``."""
    out = np.empty((scheme.G, D))
    for g in range(scheme.G):
        t, N, h = hajek_from_weights(sample.y, scheme.replicate_weights[:, g], sample.domain, D)
        if A is None:
            out[g] = h
        else:
            est = DomainEstimates(t, N, h, np.zeros(D, dtype=np.intp))
            out[g] = constrained_estimate(est, A, reduce=False).theta
    return out


def replicate_variance(point, replicates, coefficients) -> np.ndarray:
    """``sum_g c_g (replicate_g - point)^2``, per domain.

    ``replicates`` has shape ``(G, D)`` (or ``(G,)`` for a scalar estimate).
    """
    rep = np.asarray(replicates, dtype=float)
    c = np.asarray(coefficients, dtype=float)
    if rep.shape[0] < 2:
        raise ValueError("at least two replicates are required")
    if c.ndim == 0:
        c = np.full(rep.shape[0], float(c))
    if c.shape != (rep.shape[0],):
        raise ValueError("one coefficient per replicate is required")
    dev = rep - np.asarray(point, dtype=float)
    return np.tensordot(c, dev**2, axes=1)


def wald_interval(theta, variance, level: float = 0.95):
    """Normal-theory interval ``theta -/+ z * sqrt(variance)``."""
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    variance = np.asarray(variance, dtype=float)
    if np.any(variance < 0):
        raise ValueError("variance must be nonnegative")
    z = NormalDist().inv_cdf(0.5 + level / 2)
    half = z * np.sqrt(variance)
    return np.asarray(theta) - half, np.asarray(theta) + half
