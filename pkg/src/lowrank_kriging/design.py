"""
Sampling designs on box domains and raster Voronoi regularity diagnostics.

Voronoi cells are approximated by assigning the centres of a regular raster
to their nearest site. Areas, diameters and the max/min area ratio (the mesh
ratio) come straight from those assignments, in any dimension.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree
from scipy.spatial.distance import pdist


@dataclass(frozen=True)
class Box:
    """Axis-aligned box ``[a_1, b_1] x ... x [a_d, b_d]``."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lower))
        hi = tuple(float(v) for v in np.atleast_1d(self.upper))
        if len(lo) != len(hi) or len(lo) < 1:
            raise ValueError("lower and upper bounds must have the same positive length")
        if not all(np.isfinite(lo + hi)) or any(b <= a for a, b in zip(lo, hi)):
            raise ValueError(f"degenerate box {lo} -> {hi}")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unit(cls, dim: int = 2) -> "Box":
        return cls((0.0,) * dim, (1.0,) * dim)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def widths(self):
        return np.subtract(self.upper, self.lower)

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths))

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.widths))

    def contains(self, points, tol: float = 0.0):
        p = np.atleast_2d(points)
        return np.all((p >= np.array(self.lower) - tol) & (p <= np.array(self.upper) + tol), axis=1)

    def uniform_grid(self, per_axis):
        """Cell-centre (midpoint) grid with ``per_axis`` points along each axis."""
        per_axis = np.broadcast_to(np.asarray(per_axis, dtype=int), (self.dim,))
        axes = [lo + (np.arange(q) + 0.5) * (hi - lo) / q
                for lo, hi, q in zip(self.lower, self.upper, per_axis)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.dim)


@dataclass(frozen=True)
class Design:
    """``n`` distinct sampling locations inside ``domain``."""

    locations: np.ndarray
    domain: Box

    def __post_init__(self):
        locs = np.array(self.locations, dtype=float)
        if locs.ndim == 1:
            locs = locs[:, None] if self.domain.dim == 1 else locs[None, :]
        if locs.ndim != 2 or locs.shape[0] < 1:
            raise ValueError("a design needs at least one location")
        if locs.shape[1] != self.domain.dim:
            raise ValueError(f"locations are {locs.shape[1]}-d but the domain is {self.domain.dim}-d")
        if not np.all(np.isfinite(locs)):
            raise ValueError("locations must be finite")
        if not np.all(self.domain.contains(locs)):
            raise ValueError("all locations must lie inside the domain")
        if np.unique(locs, axis=0).shape[0] != locs.shape[0]:
            raise ValueError("locations must be pairwise distinct")
        locs.setflags(write=False)
        object.__setattr__(self, "locations", locs)

    @property
    def n(self) -> int:
        return self.locations.shape[0]

    @property
    def dim(self) -> int:
        return self.domain.dim


def grid_design(m: int, domain: Box | None = None) -> Design:
    """Regular ``m^d`` grid at ``i / (m + 0.5)``, ``i = 1..m``, mapped into ``domain``.

    On the unit square with ``m = 70`` this is the 4900-point design of the
    numerical studies.
    """
    domain = Box.unit(2) if domain is None else domain
    if int(m) != m or m < 1:
        raise ValueError(f"m must be a positive integer, got {m}")
    m = int(m)
    t = np.arange(1, m + 1) / (m + 0.5)
    axes = [lo + t * (hi - lo) for lo, hi in zip(domain.lower, domain.upper)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, domain.dim)
    return Design(pts, domain)


def random_design(n: int, domain: Box | None = None, seed: int = 0) -> Design:
    """``n`` i.i.d. uniform points from ``numpy.random.default_rng(seed)`` (PCG64)."""
    domain = Box.unit(2) if domain is None else domain
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    rng = np.random.default_rng(seed)
    pts = np.asarray(domain.lower) + rng.random((int(n), domain.dim)) * domain.widths
    return Design(pts, domain)


def write_design_csv(design: Design, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{j + 1}" for j in range(design.dim)])
        for row in design.locations:
            w.writerow([repr(float(v)) for v in row])


def read_design_csv(path, domain: Box | None = None) -> Design:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty design file")
    header = [h.strip() for h in rows[0]]
    if header != [f"x{j + 1}" for j in range(len(header))]:
        raise ValueError(f"{path}: header must be x1,...,xd, got {header}")
    pts = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    if domain is None:
        domain = Box.unit(len(header))
    return Design(pts.reshape(-1, len(header)), domain)


# -- Voronoi diagnostics -----------------------------------------------------

@dataclass(frozen=True)
class VoronoiSummary:
    areas: np.ndarray
    diameters: np.ndarray
    delta_max: float
    mesh_ratio: float
    raster_resolution: int
    domain_volume: float = 1.0
    dim: int = 2

    @property
    def area_tolerance(self) -> float:
        """Raster tolerance ``2 d |D| / resolution`` on area totals."""
        return 2.0 * self.dim * self.domain_volume / self.raster_resolution


def default_raster_resolution(n: int, dim: int) -> int:
    """``max(1000, 20 ceil(n^(1/d)))`` for d <= 2; smaller in higher dimension."""
    per_axis = math.ceil(n ** (1.0 / dim) - 1e-9)
    if dim <= 2:
        return max(1000, 20 * per_axis)
    return max(64, 4 * per_axis)


def _nearest_site(sites, queries):
    """Index of the nearest site for each query; exact ties go to the lowest index."""
    n = sites.shape[0]
    if n == 1:
        return np.zeros(queries.shape[0], dtype=np.intp)
    tree = cKDTree(sites)
    k = min(n, 2 ** sites.shape[1] + 1)
    out = np.empty(queries.shape[0], dtype=np.intp)
    chunk = 200_000
    for start in range(0, queries.shape[0], chunk):
        q = queries[start:start + chunk]
        _, idx = tree.query(q, k=k)
        # recompute distances directly so equal geometry gives bit-equal values
        diff = q[:, None, :] - sites[idx]
        d2 = np.einsum("qkj,qkj->qk", diff, diff)
        tied = d2 == d2.min(axis=1, keepdims=True)
        out[start:start + chunk] = np.where(tied, idx, n).min(axis=1)
    return out


def _point_set_diameter(pts):
    if pts.shape[0] < 2:
        return 0.0
    if pts.shape[1] == 1:
        return float(pts.max() - pts.min())
    if pts.shape[0] > 64:
        try:
            pts = pts[ConvexHull(pts).vertices]
        except QhullError:
            # flat cell: diameter is attained at coordinate extremes of a line
            pass
    if pts.shape[0] > 4000:
        lo, hi = pts.argmin(axis=0), pts.argmax(axis=0)
        pts = pts[np.unique(np.r_[lo, hi])]
    return float(pdist(pts).max())


def voronoi_summary(design: Design, raster_resolution: int | None = None) -> VoronoiSummary:
    """Raster approximation of the Voronoi cells of ``design`` within its domain.

    The domain is split into ``raster_resolution^d`` equal cells whose centres
    are assigned to the nearest site (ties to the lowest index). A site's area
    is its number of raster centres times the raster cell volume; its diameter
    is the largest distance between two of its raster centres.
    """
    n, dim = design.n, design.dim
    if raster_resolution is None:
        raster_resolution = default_raster_resolution(n, dim)
    r = int(raster_resolution)
    min_r = 2 * math.ceil(n ** (1.0 / dim) - 1e-9)
    if r < min_r:
        raise ValueError(f"raster_resolution {r} is below the minimum {min_r} for n={n}, d={dim}")

    box = design.domain
    raster = box.uniform_grid(r)
    owner = _nearest_site(design.locations, raster)
    counts = np.bincount(owner, minlength=n)
    if np.any(counts == 0):
        empty = int(np.flatnonzero(counts == 0)[0])
        raise ValueError(f"site {empty} received no raster points; increase raster_resolution")

    cell_volume = box.volume / r ** dim
    areas = counts * cell_volume
    order = np.argsort(owner, kind="stable")
    groups = np.split(raster[order], np.cumsum(counts)[:-1])
    diameters = np.array([_point_set_diameter(g) for g in groups])
    for a in (areas, diameters):
        a.setflags(write=False)
    return VoronoiSummary(
        areas=areas,
        diameters=diameters,
        delta_max=float(diameters.max()),
        mesh_ratio=float(areas.max() / areas.min()),
        raster_resolution=r,
        domain_volume=box.volume,
        dim=dim,
    )


@dataclass(frozen=True)
class RegularityReport:
    passes: bool
    delta_max: float
    mesh_ratio: float


def check_regularity(summary: VoronoiSummary, gamma_bound: float) -> RegularityReport:
    """Pass iff the mesh ratio is strictly below ``gamma_bound``."""
    return RegularityReport(
        passes=bool(summary.mesh_ratio < gamma_bound),
        delta_max=summary.delta_max,
        mesh_ratio=summary.mesh_ratio,
    )
