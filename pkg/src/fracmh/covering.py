"""Boundary-centred disk coverings of radius ``r_Omega (1 + sqrt 2)`` and
their colouring into families of pairwise disjoint disks."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.spatial import cKDTree

from .geometry import DomainMask, boundary_points, inradius

RADIUS_FACTOR = 1 + math.sqrt(2)
MAX_CLASSES = 36


@dataclass(frozen=True, eq=False)
class Covering:
    centers: np.ndarray
    radius: float
    mask: DomainMask
    colors: np.ndarray | None = None

    @property
    def size(self) -> int:
        return len(self.centers)

    @property
    def n_classes(self) -> int:
        return 0 if self.colors is None else int(self.colors.max()) + 1

    def rows(self):
        cols = self.colors if self.colors is not None else np.full(self.size, -1)
        return [(float(x), float(y), self.radius, int(c)) for (x, y), c in zip(self.centers, cols)]


def build_covering(mask: DomainMask) -> Covering:
    """Greedy: while some occupied cell centre is uncovered, add the boundary
    point nearest to it as a new centre.  Every interior point is within
    ``r_Omega`` of the boundary, so each new disk covers its trigger cell."""
    r = inradius(mask) * RADIUS_FACTOR
    bpts = boundary_points(mask)
    tree = cKDTree(bpts)
    cells = mask.cell_centers()
    uncovered = np.ones(len(cells), dtype=bool)
    centers = []
    # visit cells from the deepest outward: fewer disks in practice
    _, nearest = tree.query(cells)
    order = np.argsort(-np.linalg.norm(cells - bpts[nearest], axis=1))
    cell_tree = cKDTree(cells)
    for k in order:
        if not uncovered[k]:
            continue
        z = bpts[nearest[k]]
        centers.append(z)
        hit = cell_tree.query_ball_point(z, r * (1 - 1e-12))
        uncovered[hit] = False
    return Covering(np.array(centers), r, mask)


def color_covering(cov: Covering) -> Covering:
    """Greedy colouring of the intersection graph; open disks with centre
    distance ``>= 2r`` are disjoint (tangency allowed)."""
    n = cov.size
    tree = cKDTree(cov.centers)
    nbrs = tree.query_ball_point(cov.centers, 2 * cov.radius * (1 - 1e-12))
    deg = np.array([len(x) for x in nbrs])
    colors = np.full(n, -1, dtype=int)
    for k in np.argsort(-deg, kind="stable"):
        used = {colors[m] for m in nbrs[k] if m != k and colors[m] >= 0}
        c = 0
        while c in used:
            c += 1
        colors[k] = c
    return replace(cov, colors=colors)


def coverage_gaps(cov: Covering) -> np.ndarray:
    """Occupied cell centres lying in no disk (exhaustive)."""
    cells = cov.mask.cell_centers()
    covered = np.zeros(len(cells), dtype=bool)
    for z in cov.centers:
        covered |= np.sum((cells - z) ** 2, axis=1) < cov.radius**2
    return cells[~covered]


def class_overlaps(cov: Covering) -> list:
    """Pairs ``(i, j)`` in one colour class whose disks overlap (exhaustive)."""
    bad = []
    for c in range(cov.n_classes):
        idx = np.nonzero(cov.colors == c)[0]
        P = cov.centers[idx]
        D = np.sqrt(np.sum((P[:, None, :] - P[None, :, :]) ** 2, axis=-1))
        I, J = np.nonzero(np.triu(D < 2 * cov.radius, 1))
        bad += [(int(idx[i]), int(idx[j])) for i, j in zip(I, J)]
    return bad


def center_offsets(cov: Covering) -> np.ndarray:
    """Distance from each centre to the nearest boundary point."""
    bpts = boundary_points(cov.mask)
    d, _ = cKDTree(bpts).query(cov.centers)
    return d
