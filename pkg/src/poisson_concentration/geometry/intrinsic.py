"""Intrinsic volumes of polytopes: face formula with external angles, and a
projection-based estimator used as an independent oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import nnls
from scipy.spatial import ConvexHull, QhullError
from scipy.special import comb, gammaln

from ..streams import as_generator
from .hull import SimplicialHull, _affine_frame

CONE_TOL = 1e-9


def unit_ball_volume(k: int) -> float:
    """Volume of the k-dimensional unit ball."""
    return math.exp(0.5 * k * math.log(math.pi) - gammaln(0.5 * k + 1.0))


def sphere_area(k: int) -> float:
    """``H^k`` measure of the unit sphere ``S^k`` in ``R^(k+1)``."""
    return (k + 1) * unit_ball_volume(k + 1)


def kubota_constant(d: int, i: int) -> float:
    return comb(d, i, exact=True) * unit_ball_volume(d) / (unit_ball_volume(i) * unit_ball_volume(d - i))


@dataclass
class ExternalAngleEstimate:
    value: float
    se: float = 0.0
    n_samples: int = 0


@dataclass
class IntrinsicVolumeEstimate:
    value: float
    se: float = 0.0

    def __iter__(self):
        return iter((self.value, self.se))


def _direction_basis(local_vertices: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) of the linear span of ``v - v0``."""
    edges = local_vertices[1:] - local_vertices[0]
    if edges.shape[0] == 0:
        return np.zeros((local_vertices.shape[1], 0))
    u, s, _ = np.linalg.svd(edges.T, full_matrices=False)
    rank = int(np.sum(s > 1e-10 * max(1.0, s[0])))
    return u[:, :rank]


def in_normal_cone_nnls(normals: np.ndarray, g: np.ndarray, tol: float = CONE_TOL) -> bool:
    """``g`` in ``pos(normals)`` by non-negative least squares."""
    norm = np.linalg.norm(g)
    if norm == 0:
        return True
    _, resid = nnls(normals.T, g)
    return resid <= tol * norm


def in_normal_cone_support(all_vertices: np.ndarray, face_vertex: np.ndarray, g: np.ndarray,
                           tol: float = CONE_TOL) -> np.ndarray:
    """Vectorised test: ``g`` attains its maximum over the polytope at the face.

    ``g`` has shape ``(n, m)`` and must already be orthogonal to the face's
    direction space; returns a boolean array of length ``n``.
    """
    support = g @ all_vertices.T
    at_face = g @ face_vertex
    scale = np.linalg.norm(g, axis=1) * max(1.0, float(np.max(np.abs(all_vertices))))
    return at_face >= support.max(axis=1) - tol * scale


def external_angle(hull: SimplicialHull, face: tuple[int, ...], facet_ids: tuple[int, ...],
                   n_samples: int = 4000, rng=None, method: str = "support",
                   exact_codim2: bool = True) -> ExternalAngleEstimate:
    """Normalised solid angle of the normal cone at ``face``.

    Facets: exactly 1/2. Codimension 2: ``arccos(n1 . n2) / (2 pi)`` when
    ``exact_codim2``. Otherwise a standard Gaussian is projected onto the
    orthogonal complement of the face direction space and tested for
    membership in the cone spanned by the incident facet normals.
    """
    m = hull.dim_actual
    local = hull.local
    face_pts = local[list(face)]
    basis = _direction_basis(face_pts)
    codim = m - basis.shape[1]
    if codim == 1:
        return ExternalAngleEstimate(0.5)
    if codim == 2 and exact_codim2 and len(facet_ids) == 2:
        n1, n2 = hull.local_normals[list(facet_ids)]
        angle = math.acos(max(-1.0, min(1.0, float(n1 @ n2))))
        return ExternalAngleEstimate(angle / (2 * math.pi))
    gen = as_generator(rng)
    g = gen.standard_normal((n_samples, m))
    if basis.shape[1]:
        g = g - (g @ basis) @ basis.T
    if method == "support":
        hits = in_normal_cone_support(local[hull.vertices], face_pts[0], g)
    elif method == "nnls":
        normals = hull.local_normals[list(facet_ids)]
        hits = np.array([in_normal_cone_nnls(normals, row) for row in g])
    else:
        raise ValueError(f"unknown method {method!r}")
    p = float(np.mean(hits))
    return ExternalAngleEstimate(p, math.sqrt(p * (1 - p) / n_samples), n_samples)


def intrinsic_volume(hull: SimplicialHull, i: int, n_angle_samples: int = 4000, rng=None,
                     method: str = "support", exact_codim2: bool = True) -> IntrinsicVolumeEstimate:
    """``V_i`` of the hull by the face formula ``sum_G vol_i(G) * angle(G)``."""
    d = hull.dim
    if not 0 <= i <= d:
        raise ValueError(f"i must lie in [0, {d}], got {i}")
    m = hull.dim_actual
    if m < 0:
        return IntrinsicVolumeEstimate(0.0)
    if i == 0:
        return IntrinsicVolumeEstimate(1.0)
    if i > m:
        return IntrinsicVolumeEstimate(0.0)
    if i == m:
        return IntrinsicVolumeEstimate(hull.volume)
    if hull.is_simplicial and exact_codim2 and m - i <= 2:
        return IntrinsicVolumeEstimate(_simplicial_exact(hull, i))
    gen = as_generator(rng) if m - i >= 3 or not exact_codim2 else None
    total, var = 0.0, 0.0
    for face, facets in zip(hull.faces(i), hull.face_facets(i)):
        vol = hull.face_volume(face)
        ang = external_angle(hull, face, facets, n_angle_samples, gen, method, exact_codim2)
        total += vol * ang.value
        var += (vol * ang.se) ** 2
    return IntrinsicVolumeEstimate(total, math.sqrt(var))


def simplex_volumes(vertices: np.ndarray) -> np.ndarray:
    """Volumes of a batch of simplices given as ``(n, k + 1, m)`` vertex arrays."""
    k = vertices.shape[1] - 1
    if k == 0:
        return np.ones(vertices.shape[0])
    edges = vertices[:, 1:] - vertices[:, :1]
    gram = edges @ np.swapaxes(edges, 1, 2)
    return np.sqrt(np.maximum(np.linalg.det(gram), 0.0)) / math.factorial(k)


def _simplicial_exact(hull: SimplicialHull, i: int) -> float:
    """Face formula for codimension 1 and 2 on a simplicial hull, vectorised."""
    m = hull.dim_actual
    if m - i == 1:
        tri = hull.local[np.array(hull.facets)]
        return 0.5 * float(simplex_volumes(tri).sum())
    faces = hull.faces(i)
    incid = np.array(hull.face_facets(i))
    vols = simplex_volumes(hull.local[np.array(faces)])
    n = hull.local_normals
    cos = np.clip(np.einsum("ij,ij->i", n[incid[:, 0]], n[incid[:, 1]]), -1.0, 1.0)
    return float(np.dot(vols, np.arccos(cos)) / (2 * math.pi))


def exact_intrinsic_volumes(points, dim: Optional[int] = None) -> np.ndarray:
    """``[V_0, ..., V_d]`` of ``conv(points)`` straight from Qhull output.

    Valid whenever the affine dimension ``m`` is at most 3, where every order
    is a facet sum, a ridge sum with dihedral angles, the volume or
    ``V_0 = 1``. Ridges between coplanar triangulated pieces get angle 0, so
    no facet merging is needed. Used by the certificate loops, which rebuild
    a hull for every removed point.
    """
    pts = np.asarray(points, dtype=float)
    d = pts.shape[1] if dim is None else int(dim)
    out = np.zeros(d + 1)
    if pts.shape[0] == 0:
        return out
    out[0] = 1.0
    origin, basis, m = _affine_frame(pts)
    if m == 0:
        return out
    if m > 3:
        raise ValueError(f"exact path needs affine dimension <= 3, got {m}")
    local = (pts - origin) @ basis
    if m == 1:
        out[1] = float(np.ptp(local[:, 0]))
        return out
    try:
        qh = ConvexHull(local)
    except QhullError:
        qh = ConvexHull(local, qhull_options="QJ")
    out[m] = float(qh.volume)
    out[m - 1] = 0.5 * float(qh.area)
    if m == 3:
        simp, nb, normals = qh.simplices, qh.neighbors, qh.equations[:, :-1]
        j, s = np.nonzero(nb > np.arange(len(simp))[:, None])
        other = nb[j, s]
        ridge = simp[j][:, [[1, 2], [0, 2], [0, 1]]][np.arange(len(j)), s]
        lengths = np.linalg.norm(local[ridge[:, 0]] - local[ridge[:, 1]], axis=1)
        cos = np.clip(np.einsum("ij,ij->i", normals[j], normals[other]), -1.0, 1.0)
        out[1] = float(np.dot(lengths, np.arccos(cos)) / (2 * math.pi))
    return out


def intrinsic_volumes(hull: SimplicialHull, n_angle_samples: int = 4000, rng=None,
                      exact_codim2: bool = True) -> list[IntrinsicVolumeEstimate]:
    """``[V_0, ..., V_d]``; one generator is shared across orders."""
    gen = as_generator(rng) if rng is not None or hull.dim_actual >= 3 else None
    return [intrinsic_volume(hull, i, n_angle_samples, gen, exact_codim2=exact_codim2)
            for i in range(hull.dim + 1)]


def needs_sampling(dim_actual: int, i: int) -> bool:
    """Whether the face formula for ``V_i`` needs Monte Carlo angles."""
    return 0 < i < dim_actual and dim_actual - i >= 3


def _projected_volume(points: np.ndarray) -> float:
    k = points.shape[1]
    if k == 1:
        return float(np.ptp(points[:, 0]))
    try:
        return float(ConvexHull(points).volume)
    except QhullError:
        return 0.0


def cauchy_kubota(points, i: int, n_samples: int = 2000, rng=None) -> IntrinsicVolumeEstimate:
    """``V_i`` as a constant times the mean i-volume of projections onto random i-subspaces."""
    pts = np.asarray(points, dtype=float)
    d = pts.shape[1]
    if not 0 <= i <= d:
        raise ValueError(f"i must lie in [0, {d}], got {i}")
    if pts.shape[0] == 0:
        return IntrinsicVolumeEstimate(0.0)
    if i == 0:
        return IntrinsicVolumeEstimate(1.0)
    if i == d:
        return IntrinsicVolumeEstimate(SimplicialHull(pts).volume)
    gen = as_generator(rng)
    vols = np.empty(n_samples)
    for s in range(n_samples):
        q, _ = np.linalg.qr(gen.standard_normal((d, i)))
        vols[s] = _projected_volume(pts @ q)
    const = kubota_constant(d, i)
    return IntrinsicVolumeEstimate(const * float(vols.mean()),
                                   const * float(vols.std(ddof=1)) / math.sqrt(n_samples))


def ball_intrinsic_volume(d: int, i: int, radius: float = 1.0) -> float:
    """``V_i`` of a d-ball: ``C(d,i) kappa_d / kappa_(d-i) * r^i``."""
    return comb(d, i, exact=True) * unit_ball_volume(d) / unit_ball_volume(d - i) * radius ** i


def cube_intrinsic_volume(d: int, i: int, side: float = 1.0) -> float:
    return comb(d, i, exact=True) * side ** i


def ellipsoid_intrinsic_volume(semi_axes, i: int, n_samples: int = 200_000,
                               rng: Optional[int] = 0) -> IntrinsicVolumeEstimate:
    """Projection formula with exact projected volumes of the ellipsoid.

    The projection of ``{x : sum (x_j / a_j)^2 <= 1}`` onto an i-subspace with
    orthonormal basis ``Q`` is an ellipsoid of volume
    ``kappa_i sqrt(det(Q^T diag(a^2) Q))``.
    """
    a = np.asarray(semi_axes, dtype=float)
    d = a.size
    if i == 0:
        return IntrinsicVolumeEstimate(1.0)
    if i == d:
        return IntrinsicVolumeEstimate(unit_ball_volume(d) * float(np.prod(a)))
    gen = as_generator(rng)
    g = gen.standard_normal((n_samples, d, i))
    q, _ = np.linalg.qr(g)
    shape = np.einsum("nji,j,njk->nik", q, a ** 2, q)
    vols = unit_ball_volume(i) * np.sqrt(np.linalg.det(shape))
    const = kubota_constant(d, i)
    return IntrinsicVolumeEstimate(const * float(vols.mean()),
                                   const * float(vols.std(ddof=1)) / math.sqrt(n_samples))
