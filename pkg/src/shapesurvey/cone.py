"""Projection onto polyhedral cones ``{x : A x >= 0}`` through the polar cone.

The polar cone of an irreducible ``A`` is generated by the rows of ``-A``
(the *edges*).  Projecting onto it is a nonnegative least-squares problem in
the edge coefficients, solved here with an active-set method; the projection
onto the constraint cone itself follows from the Moreau decomposition
``z = phi + rho``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from typing import Optional

import numpy as np
from scipy.linalg import qr, solve_triangular

from .constraints import PolarEdgeSet, nonneg_lstsq, transform_by_weights

__all__ = [
    "ConeProjectionResult",
    "CyclingError",
    "InvalidFaceError",
    "enumerate_faces_oracle",
    "enumerate_valid_faces",
    "is_valid_face",
    "project_cone",
    "project_polar",
    "reduce_face",
    "span_projection",
]

COEF_TOL = 1e-10
ADD_TOL = 1e-10
RANK_TOL = 1e-10
FACE_TOL = 1e-9
ORACLE_MAX_EDGES = 20


class CyclingError(RuntimeError):
    """The active-set iteration exceeded its iteration budget."""


class InvalidFaceError(ValueError):
    """A face set does not carry the polar projection."""


def _as_edges(edges) -> PolarEdgeSet:
    return edges if isinstance(edges, PolarEdgeSet) else PolarEdgeSet(edges)


@dataclass(frozen=True)
class ConeProjectionResult:
    """Moreau pair for one projection.

    Attributes
    ----------
    phi : ndarray
        Projection onto the constraint cone.
    rho : ndarray
        Projection onto the polar cone, ``sum(coefficients[i] * edges[face[i]])``.
    face : tuple of int
        Sorted edge indices carrying ``rho``.
    coefficients : ndarray
        Nonnegative edge multipliers aligned with ``face``.
    iterations : int
    """

    phi: np.ndarray
    rho: np.ndarray
    face: tuple
    coefficients: np.ndarray = field(repr=False)
    iterations: int = 0

    def kkt_residuals(self, z, edges) -> tuple[float, float, float]:
        """``(|<z - rho, rho>|, max_j <z - rho, gamma_j>, min coefficient)``."""
        G = _as_edges(edges).edges
        r = np.asarray(z, dtype=float) - self.rho
        ortho = abs(float(r @ self.rho))
        viol = float(np.max(G @ r))
        cmin = float(np.min(self.coefficients)) if len(self.face) else 0.0
        return ortho, viol, cmin

    def certify(self, z, edges, tol: Optional[float] = None) -> bool:
        """Check the polar optimality conditions at tolerance ``tol``.

        The default tolerance is ``1e-10 * (1 + |z|)`` scaled by the largest
        edge norm, so that it is invariant to rescaling the edges.
        """
        z = np.asarray(z, dtype=float)
        G = _as_edges(edges).edges
        if tol is None:
            tol = 1e-10 * (1.0 + np.linalg.norm(z))
        gscale = max(1.0, float(np.max(np.linalg.norm(G, axis=1))))
        ortho, viol, cmin = self.kkt_residuals(z, edges)
        recon = self.rho - (G[list(self.face)].T @ self.coefficients if self.face else 0.0)
        return (
            ortho <= tol * max(1.0, np.linalg.norm(self.rho))
            and viol <= tol * gscale
            and cmin >= -COEF_TOL
            and float(np.max(np.abs(recon))) <= tol * gscale
        )


def _pivoted_lstsq(M: np.ndarray, z: np.ndarray):
    """Least squares ``min |M b - z|`` by QR with column pivoting.

    Returns ``(b, fit, rank)``; columns judged dependent at relative
    threshold ``RANK_TOL`` get coefficient zero.
    """
    k = M.shape[1]
    if k == 0:
        return np.zeros(0), np.zeros_like(z), 0
    Q, R, perm = qr(M, mode="economic", pivoting=True, check_finite=False)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > RANK_TOL * diag[0])) if diag[0] > 0 else 0
    b = np.zeros(k)
    if rank == 0:
        return b, np.zeros_like(z), 0
    qz = Q[:, :rank].T @ z
    b[perm[:rank]] = solve_triangular(R[:rank, :rank], qz, check_finite=False)
    return b, Q[:, :rank] @ qz, rank


def span_projection(z, edges, face) -> np.ndarray:
    """Orthogonal projection of ``z`` onto the span of the edges in ``face``."""
    G = _as_edges(edges).edges
    face = list(face)
    z = np.asarray(z, dtype=float)
    if not face:
        return np.zeros_like(z)
    return _pivoted_lstsq(G[face].T, z)[1]


def project_polar(z, edges, *, coef_tol: float = COEF_TOL, add_tol: Optional[float] = None,
                  max_iter: Optional[int] = None) -> ConeProjectionResult:
    """Project ``z`` onto the cone generated by ``edges``.

    Active-set iteration: the edge with the largest normalized inner product
    with the current residual enters; each least-squares refit that produces
    a nonpositive coefficient is followed by a step back to the feasible
    boundary, and the coefficients reaching zero leave.  Ties on entry go to
    the smallest index.

    Parameters
    ----------
    z : array_like, shape (D,)
    edges : PolarEdgeSet or array_like, shape (m, D)
    coef_tol : float
        Coefficients at or below this are treated as leaving.
    add_tol : float, optional
        Entry threshold on ``<z - rho, gamma_j> / |gamma_j|``; defaults to
        ``1e-10 * (1 + |z|)``.
    max_iter : int, optional
        Defaults to ``4 * m * D``.

    Returns
    -------
    ConeProjectionResult
        ``rho`` is the polar projection and ``phi = z - rho``.
    """
    E = _as_edges(edges)
    G = E.edges
    m, D = G.shape
    z = np.asarray(z, dtype=float)
    if z.shape != (D,):
        raise ValueError(f"z has shape {z.shape}, expected ({D},)")
    if add_tol is None:
        add_tol = ADD_TOL * (1.0 + np.linalg.norm(z))
    if max_iter is None:
        max_iter = 4 * m * D
    norms = np.linalg.norm(G, axis=1)

    active: list[int] = []
    a = np.zeros(m)
    rho = np.zeros(D)
    blocked = np.zeros(m, dtype=bool)
    iterations = 0

    while True:
        score = (G @ (z - rho)) / norms
        score[active] = -np.inf
        score[blocked] = -np.inf
        j = int(np.argmax(score))
        if not score[j] > add_tol:
            break
        active.append(j)
        active.sort()
        entering = j
        while True:
            iterations += 1
            if iterations > max_iter:
                raise CyclingError("cycling detected")
            idx = np.array(active)
            b, fit, _ = _pivoted_lstsq(G[idx].T, z)
            bad = b <= coef_tol
            if not np.any(bad):
                a[:] = 0.0
                a[idx] = b
                rho = fit
                blocked[:] = False
                break
            cur = a[idx]
            if entering is not None and bad[idx == entering][0]:
                # entering edge lies numerically inside the current span
                active.remove(entering)
                blocked[entering] = True
                break
            entering = None
            with np.errstate(divide="ignore", invalid="ignore"):
                ratio = np.where(bad, cur / (cur - b), np.inf)
            step = float(np.min(ratio))
            cur = cur + step * (b - cur)
            a[idx] = cur
            leave = cur <= coef_tol
            a[idx[leave]] = 0.0
            active = [int(i) for i in idx[~leave]]
            if not active:
                rho = np.zeros(D)
                break
            rho = G[active].T @ a[active]

    face = tuple(active)
    coef = a[list(face)].copy() if face else np.zeros(0)
    return ConeProjectionResult(z - rho, rho, face, coef, iterations)


def project_cone(y_tilde, weights, A, **kwargs):
    """Weighted projection onto ``{theta : A theta >= 0}``.

    Minimizes ``(y - theta)' W (y - theta)`` with ``W = diag(weights)``.

    Returns
    -------
    theta : ndarray
    result : ConeProjectionResult
        The projection in the transformed coordinates ``W^(1/2) y``.
    """
    y = np.asarray(y_tilde, dtype=float)
    w = np.asarray(weights, dtype=float)
    _, edges = transform_by_weights(A, w)
    sw = np.sqrt(w)
    result = project_polar(sw * y, edges, **kwargs)
    return result.phi / sw, result


def _nonneg_coefficients(G_face: np.ndarray, rho: np.ndarray, tol: float):
    """Nonnegative multipliers reproducing ``rho``, or ``None``."""
    if not np.any(rho):
        return np.zeros(G_face.shape[0])
    coef, res = nonneg_lstsq(G_face.T, rho)
    if res <= tol:
        return coef
    return None


def is_valid_face(z, edges, face, tol: Optional[float] = None) -> bool:
    """Whether ``face`` carries the polar projection of ``z``.

    That is, the projection of ``z`` onto the span of the face edges is a
    nonnegative combination of them and satisfies the optimality
    conditions against every edge.
    """
    return _face_check(np.asarray(z, dtype=float), _as_edges(edges).edges, list(face), tol) is not None


def _face_tol(z, G, tol):
    if tol is None:
        tol = FACE_TOL * (1.0 + np.linalg.norm(z))
    return tol * max(1.0, float(np.max(np.linalg.norm(G, axis=1))))


def _face_check(z, G, face, tol):
    tol = _face_tol(z, G, tol)
    if face:
        rho = np.linalg.lstsq(G[face].T, z, rcond=None)
        rho = G[face].T @ rho[0]
    else:
        rho = np.zeros_like(z)
    if np.max(G @ (z - rho)) > tol:
        return None
    coef = _nonneg_coefficients(G[face], rho, tol) if face else np.zeros(0)
    if coef is None:
        return None
    return rho, coef


def enumerate_valid_faces(z, edges, tol: Optional[float] = None):
    """All face sets carrying the polar projection of ``z`` (exponential).

    Returns a list of ``(face, rho, coefficients)`` ordered by size, then
    lexicographically.
    """
    G = _as_edges(edges).edges
    m = G.shape[0]
    if m > ORACLE_MAX_EDGES:
        raise ValueError(f"refusing to enumerate 2^{m} faces (limit m <= {ORACLE_MAX_EDGES})")
    z = np.asarray(z, dtype=float)
    out = []
    for k in range(m + 1):
        for face in combinations(range(m), k):
            hit = _face_check(z, G, list(face), tol)
            if hit is not None:
                out.append((face, hit[0], hit[1]))
    return out


def enumerate_faces_oracle(z, edges, tol: Optional[float] = None) -> ConeProjectionResult:
    """Brute-force polar projection: first valid face by size, then index."""
    G = _as_edges(edges).edges
    m = G.shape[0]
    if m > ORACLE_MAX_EDGES:
        raise ValueError(f"refusing to enumerate 2^{m} faces (limit m <= {ORACLE_MAX_EDGES})")
    z = np.asarray(z, dtype=float)
    tried = 0
    for k in range(m + 1):
        for face in combinations(range(m), k):
            tried += 1
            hit = _face_check(z, G, list(face), tol)
            if hit is not None:
                rho, coef = hit
                return ConeProjectionResult(z - rho, rho, face, coef, tried)
    raise RuntimeError("no valid face found; edges may not form an irreducible set")


def _null_vector(M: np.ndarray) -> Optional[np.ndarray]:
    """A unit vector ``b`` with ``M.T @ b = 0`` when rows of ``M`` are dependent."""
    if M.shape[0] == 0:
        return None
    _, s, vt = np.linalg.svd(M.T, full_matrices=True)
    rank = int(np.sum(s > RANK_TOL * s[0])) if s.size and s[0] > 0 else 0
    if rank == M.shape[0]:
        return None
    return vt[-1]


def reduce_face(face, edges, z, tol: Optional[float] = None) -> tuple:
    """Shrink a valid face to a linearly independent one with the same span.

    Redundant edges are eliminated from the nonnegative representation of
    the polar projection one at a time (each elimination moves along a null
    direction of the face edges until a coefficient reaches zero).  The
    surviving edges are then completed, in index order, to a basis of the
    original span.

    Raises
    ------
    InvalidFaceError
        If ``face`` does not carry the projection of ``z``.
    """
    G = _as_edges(edges).edges
    z = np.asarray(z, dtype=float)
    face = sorted(int(j) for j in face)
    hit = _face_check(z, G, face, tol)
    if hit is None:
        raise InvalidFaceError("not a valid face")
    if not face:
        return ()
    rho, coef = hit
    full_rank = np.linalg.matrix_rank(G[face], tol=None)
    if full_rank == len(face):
        return tuple(face)

    # eliminate dependencies among edges with positive multipliers
    pos_tol = COEF_TOL * max(1.0, float(np.max(coef)))
    keep = [j for j, c in zip(face, coef) if c > pos_tol]
    a = {j: c for j, c in zip(face, coef) if c > pos_tol}
    while keep:
        b = _null_vector(G[keep])
        if b is None:
            break
        if not np.any(b > RANK_TOL):
            b = -b
        ratios = [(a[j] / bj, j) for j, bj in zip(keep, b) if bj > RANK_TOL]
        step, j0 = min(ratios)
        for j, bj in zip(keep, b):
            a[j] -= step * bj
        keep = [j for j in keep if j != j0 and a[j] > pos_tol]

    # complete to a basis of span(face)
    basis = list(keep)
    rank = np.linalg.matrix_rank(G[basis]) if basis else 0
    for j in face:
        if rank == full_rank:
            break
        if j in basis:
            continue
        r = np.linalg.matrix_rank(G[basis + [j]])
        if r > rank:
            basis.append(j)
            rank = r
    reduced = tuple(sorted(basis))
    if _face_check(z, G, list(reduced), tol) is None:
        raise InvalidFaceError("reduction lost validity; face tolerance too tight")
    return reduced
