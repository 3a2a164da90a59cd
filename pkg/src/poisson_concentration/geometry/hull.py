"""Convex hulls in R^d with facet normals and the full face lattice.

Qhull (through :class:`scipy.spatial.ConvexHull`) finds the facets; this module
works out the affine dimension, merges coplanar triangulated pieces back into
true facets, enumerates i-faces, and certifies the result.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from ..errors import CertificateError

RANK_TOL = 1e-10
CERT_TOL = 1e-9


def _affine_frame(points: np.ndarray) -> tuple[np.ndarray, np.ndarray, int]:
    origin = points.mean(axis=0)
    centred = points - origin
    if points.shape[0] == 1:
        return origin, np.zeros((points.shape[1], 0)), 0
    _, s, vt = np.linalg.svd(centred, full_matrices=False)
    scale = max(float(s[0]), 1e-300)
    rank = int(np.sum(s > RANK_TOL * max(scale, 1.0)))
    if s[0] <= RANK_TOL:
        rank = 0
    return origin, vt[:rank].T.copy(), rank


def affine_dimension(points) -> int:
    pts = np.asarray(points, dtype=float)
    if pts.shape[0] == 0:
        return -1
    return _affine_frame(pts)[2]


class SimplicialHull:
    """Convex hull of a finite point set.

    Facets are stored as tuples of input-point indices with outward unit
    normals and offsets (``n . x <= b`` on the hull), in ambient coordinates.
    When the points span an affine subspace of dimension ``dim_actual < d`` the
    hull is computed inside that subspace; ``local`` holds the coordinates in
    an orthonormal frame of it, and ``local_normals`` are the facet normals
    there.
    """

    def __init__(self, points, dim: Optional[int] = None):
        pts = np.asarray(points, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, dim or 1)
        if dim is None:
            dim = pts.shape[1]
        if pts.size == 0:
            pts = np.empty((0, dim))
        self.points = pts
        self.dim = int(dim)
        self.scale = float(np.max(np.abs(pts))) if pts.size else 1.0
        self.scale = max(self.scale, 1.0)
        if pts.shape[0] == 0:
            self.dim_actual = -1
            self.origin = np.zeros(dim)
            self.basis = np.zeros((dim, 0))
            self.local = np.empty((0, 0))
            self.vertices = np.empty(0, dtype=int)
            self.facets: list[tuple[int, ...]] = []
            self.local_normals = np.empty((0, 0))
            self.local_offsets = np.empty(0)
            self._triangles: list[tuple[int, ...]] = []
            return
        self.origin, self.basis, self.dim_actual = _affine_frame(pts)
        self.local = (pts - self.origin) @ self.basis
        self._build()

    # construction

    def _build(self):
        m = self.dim_actual
        if m == 0:
            self.vertices = np.array([0])
            self.facets = []
            self.local_normals = np.empty((0, 0))
            self.local_offsets = np.empty(0)
            self._triangles = []
            return
        if m == 1:
            x = self.local[:, 0]
            lo, hi = int(np.argmin(x)), int(np.argmax(x))
            self.vertices = np.array(sorted({lo, hi}))
            self.facets = [(lo,), (hi,)]
            self.local_normals = np.array([[-1.0], [1.0]])
            self.local_offsets = np.array([-x[lo], x[hi]])
            self._triangles = []
            return
        try:
            qh = ConvexHull(self.local)
        except QhullError:
            qh = ConvexHull(self.local, qhull_options="QJ")
        self._merge_facets(qh)

    def _merge_facets(self, qh: ConvexHull):
        simplices = qh.simplices
        eq = qh.equations
        n_s = simplices.shape[0]
        parent = list(range(n_s))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        tol = 1e-9 * self.scale
        nb = qh.neighbors
        close = np.all(np.abs(eq[:, None, :] - eq[nb]) <= tol, axis=2)
        for j, slot in zip(*np.nonzero(close)):
            k = int(nb[j, slot])
            if k > j:
                parent[find(k)] = find(int(j))
        if not close.any():
            self.facets = [tuple(sorted(int(v) for v in row)) for row in simplices]
            self.local_normals = eq[:, :-1].copy()
            self.local_offsets = -eq[:, -1].copy()
            self.vertices = np.array(sorted(int(v) for v in qh.vertices))
            self._triangles = self.facets
            return
        groups: dict[int, list[int]] = {}
        for j in range(n_s):
            groups.setdefault(find(j), []).append(j)

        facets, normals, offsets = [], [], []
        for members in groups.values():
            verts = sorted({int(v) for j in members for v in simplices[j]})
            n = eq[members, :-1].mean(axis=0)
            n /= np.linalg.norm(n)
            facets.append(tuple(verts))
            normals.append(n)
            offsets.append(float(np.max(self.local[verts] @ n)))
        self.facets = facets
        self.local_normals = np.array(normals)
        self.local_offsets = np.array(offsets)
        self.vertices = np.array(sorted(int(v) for v in qh.vertices))
        self._triangles = [tuple(int(v) for v in s) for s in simplices]

    # basic properties

    @property
    def n_facets(self) -> int:
        return len(self.facets)

    @property
    def is_full_dimensional(self) -> bool:
        return self.dim_actual == self.dim

    @property
    def is_simplicial(self) -> bool:
        return all(len(f) == self.dim_actual for f in self.facets)

    @property
    def normals(self) -> np.ndarray:
        """Outward unit facet normals in ambient coordinates."""
        if self.dim_actual <= 0:
            return np.empty((0, self.dim))
        return self.local_normals @ self.basis.T

    @property
    def offsets(self) -> np.ndarray:
        """Offsets ``b`` with ``n . x <= b`` in ambient coordinates."""
        if self.dim_actual <= 0:
            return np.empty(0)
        return self.local_offsets + self.normals @ self.origin

    @cached_property
    def volume(self) -> float:
        """``dim_actual``-dimensional volume by a fan of simplices from the centroid."""
        m = self.dim_actual
        if m <= 0:
            return 0.0 if m < 0 else 1.0
        if m == 1:
            x = self.local[:, 0]
            return float(x.max() - x.min())
        centre = self.local[self.vertices].mean(axis=0)
        tri = np.array(self._triangles)
        edges = self.local[tri] - centre            # (n_tri, m, m)
        dets = np.abs(np.linalg.det(edges))
        return float(dets.sum() / math.factorial(m))

    @cached_property
    def surface(self) -> float:
        """Total ``(dim_actual - 1)``-volume of the facets."""
        return float(sum(self.face_volume(f) for f in self.facets)) if self.dim_actual >= 1 else 0.0

    def face_volume(self, face: tuple[int, ...]) -> float:
        """``len``-appropriate volume of a face given by vertex indices."""
        return simplex_or_polytope_volume(self.local[list(face)])

    # face lattice

    @cached_property
    def _lattice(self) -> dict[int, tuple[list[tuple[int, ...]], list[tuple[int, ...]]]]:
        """``i -> (faces, incident facet ids)`` for ``0 <= i <= dim_actual - 1``."""
        m = self.dim_actual
        out: dict[int, tuple[list, list]] = {}
        if m <= 0:
            if m == 0:
                out[0] = ([(int(self.vertices[0]),)], [()])
            return out
        if self.is_simplicial:
            fac = np.array(self.facets)
            for i in range(m):
                combos = np.array(list(itertools.combinations(range(m), i + 1)))
                rows = np.sort(fac[:, combos].reshape(-1, i + 1), axis=1)
                owner = np.repeat(np.arange(len(self.facets)), combos.shape[0])
                uniq, inv = np.unique(rows, axis=0, return_inverse=True)
                inv = inv.reshape(-1)
                order = np.argsort(inv, kind="stable")
                splits = np.flatnonzero(np.diff(inv[order])) + 1
                incid = [tuple(int(o) for o in grp) for grp in np.split(owner[order], splits)]
                out[i] = ([tuple(int(v) for v in r) for r in uniq], incid)
            return out
        # general polytope: faces of a j-face are its intersections with facets
        facet_sets = [frozenset(f) for f in self.facets]
        level = {fs for fs in facet_sets}
        out[m - 1] = self._with_incidence(level, facet_sets)
        for j in range(m - 1, 0, -1):
            nxt = set()
            for g in level:
                for h in facet_sets:
                    inter = g & h
                    if inter and inter != g and inter not in nxt:
                        if affine_dimension(self.local[sorted(inter)]) == j - 1:
                            nxt.add(inter)
            level = nxt
            out[j - 1] = self._with_incidence(level, facet_sets)
        return out

    @staticmethod
    def _with_incidence(level, facet_sets):
        faces = sorted(tuple(sorted(g)) for g in level)
        incid = [tuple(k for k, h in enumerate(facet_sets) if set(f) <= h) for f in faces]
        return faces, incid

    def faces(self, i: int) -> list[tuple[int, ...]]:
        """All i-faces as sorted tuples of input-point indices."""
        if i == self.dim_actual and i >= 0:
            return [tuple(int(v) for v in self.vertices)]
        if i < 0 or i > self.dim_actual:
            return []
        return self._lattice[i][0]

    def face_facets(self, i: int) -> list[tuple[int, ...]]:
        """Ids of the facets containing each i-face (same order as :meth:`faces`)."""
        if i < 0 or i >= self.dim_actual:
            return []
        return self._lattice[i][1]

    def f_vector(self) -> list[int]:
        return [len(self.faces(i)) for i in range(max(self.dim_actual, 0))]

    def euler_characteristic(self) -> int:
        return sum((-1) ** i * n for i, n in enumerate(self.f_vector()))

    # certificates and membership

    def residuals(self, points=None) -> np.ndarray:
        """``n . x - b`` for every facet (rows) and point (columns)."""
        pts = self.points if points is None else np.asarray(points, dtype=float)
        if self.dim_actual <= 0:
            return np.empty((0, pts.shape[0]))
        return self.normals @ pts.T - self.offsets[:, None]

    def certificate_violation(self, tau: float = CERT_TOL) -> float:
        """Largest residual over input points; ambiguous entries are re-evaluated exactly.

        Residuals within ``tau * scale`` of zero are recomputed with rational
        arithmetic on the stored float normal, offset and point, so a
        certificate never passes or fails because of rounding in the check.
        """
        res = self.residuals()
        if res.size == 0:
            return 0.0
        thresh = tau * self.scale
        near = np.argwhere(np.abs(res) <= thresh)
        if near.size:
            normals, offsets = self.normals, self.offsets
            for f, p in near:
                exact = sum(Fraction(float(a)) * Fraction(float(b))
                            for a, b in zip(normals[f], self.points[p])) - Fraction(float(offsets[f]))
                res[f, p] = float(exact)
        return float(res.max())

    def verify_certificate(self, tau: float = CERT_TOL) -> None:
        worst = self.certificate_violation(tau)
        if worst > tau * self.scale:
            raise CertificateError(f"a point lies {worst:.3e} outside a facet hyperplane")
        if self.is_full_dimensional and self.dim >= 2:
            chi = self.euler_characteristic()
            if chi != 1 - (-1) ** self.dim:
                raise CertificateError(f"Euler characteristic {chi} != {1 - (-1) ** self.dim}")

    def contains(self, points, tol: float = 0.0) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.dim_actual < self.dim:
            if self.dim_actual < 0:
                return np.zeros(pts.shape[0], dtype=bool)
            local = (pts - self.origin) @ self.basis
            off = pts - self.origin - local @ self.basis.T
            in_plane = np.linalg.norm(off, axis=1) <= tol
            if self.dim_actual == 0:
                return in_plane
            inside = np.all(self.local_normals @ local.T <= self.local_offsets[:, None] + tol, axis=0)
            return in_plane & inside
        return np.all(self.residuals(pts) <= tol, axis=0)

    # export

    def to_off(self) -> str:
        """OFF text (``nOFF`` with a dimension line when ``dim != 3``)."""
        verts = [int(v) for v in self.vertices]
        index = {v: k for k, v in enumerate(verts)}
        faces = [self._ordered_facet(f) for f in self.facets] if self.dim == 3 else self.facets
        lines = ["OFF"] if self.dim == 3 else ["nOFF", str(self.dim)]
        lines.append(f"{len(verts)} {len(faces)} 0")
        for v in verts:
            lines.append(" ".join(repr(float(c)) for c in self.points[v]))
        for f in faces:
            lines.append(" ".join([str(len(f))] + [str(index[v]) for v in f]))
        return "\n".join(lines) + "\n"

    def _ordered_facet(self, facet):
        if len(facet) <= 3 or self.dim_actual != 3:
            return facet
        pts = self.local[list(facet)]
        c = pts.mean(axis=0)
        k = self.facets.index(facet)
        n = self.local_normals[k]
        u = pts[0] - c
        u /= np.linalg.norm(u)
        w = np.cross(n, u)
        ang = np.arctan2((pts - c) @ w, (pts - c) @ u)
        return tuple(facet[j] for j in np.argsort(ang))


def simplex_or_polytope_volume(vertices: np.ndarray) -> float:
    """Intrinsic volume of top order of ``conv(vertices)``.

    A simplex (affinely independent vertices) uses the Gram determinant;
    anything else is projected onto its affine hull and measured there.
    """
    v = np.asarray(vertices, dtype=float)
    k = v.shape[0] - 1
    if k <= 0:
        return 1.0
    edges = v[1:] - v[0]
    gram = edges @ edges.T
    det = np.linalg.det(gram)
    dim = affine_dimension(v)
    if dim == k:
        return math.sqrt(max(det, 0.0)) / math.factorial(k)
    return SimplicialHull(v).volume


def convex_hull(points, dim: Optional[int] = None) -> SimplicialHull:
    """Exact hull with face lattice; lower-dimensional inputs give lower-dimensional hulls."""
    return SimplicialHull(points, dim)
