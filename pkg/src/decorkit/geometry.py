"""Furniture mesh loading and supporting-surface extraction.

Input contract: triangulated OBJ, units in centimeters, Z-up, furniture
front facing -Y.  Surfaces are near-horizontal connected clusters of
upward-facing triangles; each carries its outer boundary polygon, area,
height and a 1 cm occupancy grid used for containment queries (holes are
represented only in the grid, the polygon is display/bbox only).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np
import shapely
from shapely.geometry import Polygon
from shapely.ops import unary_union
from shapely.strtree import STRtree

from .errors import MeshParseError, NoSurfaceError

FRONT_AXIS = "-y"

# Face counts as upward when its unit normal is within 15 degrees of +Z.
UPWARD_COS = math.cos(math.radians(15.0))

_EPS = 1e-9


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle in the furniture XY frame (cm)."""

    min_x: float
    min_y: float
    max_x: float
    max_y: float

    @classmethod
    def from_center(cls, cx: float, cy: float, width: float, depth: float) -> "Rect":
        return cls(cx - width / 2.0, cy - depth / 2.0, cx + width / 2.0, cy + depth / 2.0)

    @property
    def width(self) -> float:
        return self.max_x - self.min_x

    @property
    def depth(self) -> float:
        return self.max_y - self.min_y

    @property
    def center(self) -> tuple[float, float]:
        return ((self.min_x + self.max_x) / 2.0, (self.min_y + self.max_y) / 2.0)

    @property
    def area(self) -> float:
        return max(0.0, self.width) * max(0.0, self.depth)

    def inflate(self, margin: float) -> "Rect":
        return Rect(self.min_x - margin, self.min_y - margin,
                    self.max_x + margin, self.max_y + margin)

    def contains_rect(self, other: "Rect", eps: float = _EPS) -> bool:
        return (other.min_x >= self.min_x - eps and other.max_x <= self.max_x + eps
                and other.min_y >= self.min_y - eps and other.max_y <= self.max_y + eps)

    def contains_point(self, x: float, y: float, eps: float = _EPS) -> bool:
        return (self.min_x - eps <= x <= self.max_x + eps
                and self.min_y - eps <= y <= self.max_y + eps)

    def intersection_area(self, other: "Rect") -> float:
        w = min(self.max_x, other.max_x) - max(self.min_x, other.min_x)
        d = min(self.max_y, other.max_y) - max(self.min_y, other.min_y)
        if w <= 0.0 or d <= 0.0:
            return 0.0
        return w * d

    def gap(self, other: "Rect") -> float:
        """Minimum boundary-to-boundary distance; 0 when touching or overlapping."""
        dx = max(0.0, max(self.min_x - other.max_x, other.min_x - self.max_x))
        dy = max(0.0, max(self.min_y - other.max_y, other.min_y - self.max_y))
        return math.hypot(dx, dy)


@dataclass(frozen=True)
class Mesh:
    vertices: np.ndarray          # (n, 3) float64, cm, Z-up
    triangles: np.ndarray         # (m, 3) int vertex indices
    front_axis: str = FRONT_AXIS

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        t = np.asarray(self.triangles, dtype=np.int64)
        if t.ndim != 2 or t.shape[1] != 3 or len(t) < 1:
            raise MeshParseError("mesh must contain at least one triangle")
        if not np.isfinite(v).all():
            raise MeshParseError("mesh has non-finite vertex coordinates")
        if t.min(initial=0) < 0 or t.max(initial=-1) >= len(v):
            raise MeshParseError("triangle index out of range")
        v.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)


@dataclass
class OccupancyGrid:
    """Boolean raster of supported cells over a surface bbox.

    A cell is supported iff its center is covered by an upward-facing
    triangle of the surface cluster.  Containment truth for placement
    lives here; the boundary polygon carries no holes.
    """

    resolution_cm: float
    origin: tuple[float, float]            # bbox min corner
    cells: np.ndarray                      # (nx, ny) bool
    _prefix: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        cells = np.asarray(self.cells, dtype=bool)
        cells.setflags(write=False)
        self.cells = cells
        # integral image for O(1) window queries; padded with a zero row/col
        p = np.zeros((cells.shape[0] + 1, cells.shape[1] + 1), dtype=np.int64)
        np.cumsum(np.cumsum(cells, axis=0), axis=1, out=p[1:, 1:])
        self._prefix = p

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    @property
    def supported_area_cm2(self) -> float:
        return float(self.cells.sum()) * self.resolution_cm ** 2

    def _window(self, rect: Rect) -> tuple[int, int, int, int]:
        """Index window of cells whose centers fall inside the closed rect."""
        res = self.resolution_cm
        ox, oy = self.origin
        ilo = int(math.ceil((rect.min_x - ox) / res - 0.5 - _EPS))
        ihi = int(math.floor((rect.max_x - ox) / res - 0.5 + _EPS))
        jlo = int(math.ceil((rect.min_y - oy) / res - 0.5 - _EPS))
        jhi = int(math.floor((rect.max_y - oy) / res - 0.5 + _EPS))
        return ilo, ihi, jlo, jhi

    def rect_fully_supported(self, rect: Rect) -> bool:
        """True iff every cell whose center lies inside rect is supported."""
        ilo, ihi, jlo, jhi = self._window(rect)
        ilo = max(ilo, 0)
        jlo = max(jlo, 0)
        ihi = min(ihi, self.cells.shape[0] - 1)
        jhi = min(jhi, self.cells.shape[1] - 1)
        if ihi < ilo or jhi < jlo:
            return True  # rect narrower than a cell: no centers inside
        p = self._prefix
        total = (p[ihi + 1, jhi + 1] - p[ilo, jhi + 1]
                 - p[ihi + 1, jlo] + p[ilo, jlo])
        return int(total) == (ihi - ilo + 1) * (jhi - jlo + 1)

    def windows_all_supported(self, xlo: np.ndarray, xhi: np.ndarray,
                              ylo: np.ndarray, yhi: np.ndarray) -> np.ndarray:
        """Vectorized rect_fully_supported over the cross product of x
        intervals (xlo[i], xhi[i]) and y intervals (ylo[j], yhi[j])."""
        res = self.resolution_cm
        ox, oy = self.origin
        nx, ny = self.cells.shape
        a = np.clip(np.ceil((np.asarray(xlo) - ox) / res - 0.5 - _EPS).astype(int), 0, nx)
        b = np.clip(np.floor((np.asarray(xhi) - ox) / res - 0.5 + _EPS).astype(int) + 1, 0, nx)
        b = np.maximum(a, b)
        c = np.clip(np.ceil((np.asarray(ylo) - oy) / res - 0.5 - _EPS).astype(int), 0, ny)
        d = np.clip(np.floor((np.asarray(yhi) - oy) / res - 0.5 + _EPS).astype(int) + 1, 0, ny)
        d = np.maximum(c, d)
        p = self._prefix
        sums = (p[np.ix_(b, d)] - p[np.ix_(a, d)] - p[np.ix_(b, c)] + p[np.ix_(a, c)])
        expected = np.outer(b - a, d - c)
        return sums == expected

    def unsupported_area(self, rect: Rect) -> float:
        """Area (cm^2) of cells under rect whose centers are unsupported."""
        ilo, ihi, jlo, jhi = self._window(rect)
        ilo = max(ilo, 0)
        jlo = max(jlo, 0)
        ihi = min(ihi, self.cells.shape[0] - 1)
        jhi = min(jhi, self.cells.shape[1] - 1)
        if ihi < ilo or jhi < jlo:
            return 0.0
        p = self._prefix
        total = (p[ihi + 1, jhi + 1] - p[ilo, jhi + 1]
                 - p[ihi + 1, jlo] + p[ilo, jlo])
        missing = (ihi - ilo + 1) * (jhi - jlo + 1) - int(total)
        return missing * self.resolution_cm ** 2


@dataclass
class Surface:
    """Extracted supporting region of a furniture mesh."""

    index: int
    height_cm: float
    boundary: tuple[tuple[float, float], ...]   # simple outer polygon, cm
    area_cm2: float
    bbox: Rect
    grid: OccupancyGrid

    def summary(self) -> dict:
        return {
            "index": self.index,
            "height_cm": self.height_cm,
            "area_cm2": round(self.area_cm2, 3),
            "width_cm": round(self.bbox.width, 3),
            "depth_cm": round(self.bbox.depth, 3),
            "bbox": {"min_x": self.bbox.min_x, "min_y": self.bbox.min_y,
                     "max_x": self.bbox.max_x, "max_y": self.bbox.max_y},
        }


def load_mesh(source, fmt: str = "obj") -> Mesh:
    """Parse a triangulated OBJ stream into a Mesh (non-triangles are fanned).

    Accepts bytes, str, a file-like object, or a path-like.  Indices are
    1-based per OBJ; anything <= 0 or out of range is a parse error.
    """
    if fmt.lower() != "obj":
        raise MeshParseError(f"unsupported mesh format '{fmt}'")
    text = _read_text(source)

    vertices: list[tuple[float, float, float]] = []
    faces: list[tuple[int, int, int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        tag = parts[0]
        if tag == "v":
            if len(parts) < 4:
                raise MeshParseError(f"line {lineno}: vertex needs 3 coordinates")
            try:
                vertices.append((float(parts[1]), float(parts[2]), float(parts[3])))
            except ValueError as exc:
                raise MeshParseError(f"line {lineno}: bad vertex coordinate") from exc
        elif tag == "f":
            if len(parts) < 4:
                raise MeshParseError(f"line {lineno}: face needs >= 3 vertices")
            idx = []
            for token in parts[1:]:
                head = token.split("/", 1)[0]
                try:
                    i = int(head)
                except ValueError as exc:
                    raise MeshParseError(f"line {lineno}: bad face index '{token}'") from exc
                if i <= 0:
                    raise MeshParseError(f"line {lineno}: OBJ indices are 1-based, got {i}")
                idx.append(i - 1)
            for k in range(1, len(idx) - 1):  # fan triangulation
                faces.append((idx[0], idx[k], idx[k + 1]))
        # other tags (vn, vt, o, g, usemtl, ...) are ignored

    if not faces:
        raise MeshParseError("mesh contains no faces")
    nv = len(vertices)
    for tri in faces:
        for i in tri:
            if i >= nv:
                raise MeshParseError(f"face references vertex {i + 1} of {nv}")
    return Mesh(np.array(vertices, dtype=float), np.array(faces, dtype=np.int64))


def _read_text(source) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str):
        return source
    if hasattr(source, "read"):
        data = source.read()
        return data.decode("utf-8") if isinstance(data, bytes) else data
    with io.open(source, "r", encoding="utf-8") as fh:
        return fh.read()


def extract_surfaces(mesh: Mesh, height_tolerance_cm: float = 2.0,
                     min_area_cm2: float = 100.0,
                     resolution_cm: float = 1.0) -> list[Surface]:
    """Extract supporting surfaces, sorted by height ascending then area descending.

    A surface is a connected cluster of upward-facing triangles whose vertex
    heights all lie within ``height_tolerance_cm`` of the cluster's median
    height.  Connectivity is shared mesh edges or overlapping XY projections,
    so a slightly raised relief (within tolerance) merges with the surface
    beneath it while a taller shelf splits off.
    """
    if height_tolerance_cm <= 0:
        raise ValueError("height_tolerance_cm must be positive")
    up = _upward_triangles(mesh)
    if not up:
        raise NoSurfaceError("mesh has no upward-facing triangles")

    polys = []
    heights = []  # per-triangle vertex z triples
    for tri in up:
        pts = mesh.vertices[mesh.triangles[tri]]
        polys.append(Polygon(pts[:, :2]))
        heights.append(pts[:, 2])

    adj = _adjacency(mesh, up, polys)
    clusters = _connected_components(len(up), adj)

    final: list[list[int]] = []
    for cluster in clusters:
        for band in _split_height_bands(cluster, heights, height_tolerance_cm):
            # band members may only be connected through triangles that left
            # the band; re-split by connectivity inside the band
            final.extend(_components_within(band, adj))

    surfaces = []
    for members in final:
        union = unary_union([polys[i] for i in members])
        union = _largest_polygon(union)
        area = float(union.area)
        if area < min_area_cm2:
            continue
        height = float(max(heights[i].max() for i in members))
        minx, miny, maxx, maxy = union.bounds
        bbox = Rect(float(minx), float(miny), float(maxx), float(maxy))
        grid = _rasterize(union, bbox, resolution_cm)
        ring = list(union.exterior.coords[:-1])
        boundary = tuple((float(x), float(y)) for x, y in ring)
        surfaces.append((height, -area, boundary, area, bbox, grid))

    if not surfaces:
        raise NoSurfaceError("no surface cluster survived area filtering")

    surfaces.sort(key=lambda s: (s[0], s[1]))
    out = []
    for idx, (height, _neg, boundary, area, bbox, grid) in enumerate(surfaces):
        out.append(Surface(index=idx, height_cm=height, boundary=boundary,
                           area_cm2=area, bbox=bbox, grid=grid))
    return out


def _upward_triangles(mesh: Mesh) -> list[int]:
    v = mesh.vertices
    t = mesh.triangles
    p0, p1, p2 = v[t[:, 0]], v[t[:, 1]], v[t[:, 2]]
    n = np.cross(p1 - p0, p2 - p0)
    norms = np.linalg.norm(n, axis=1)
    ok = norms > _EPS
    nz = np.zeros(len(t))
    nz[ok] = n[ok, 2] / norms[ok]
    return [int(i) for i in np.nonzero(nz >= UPWARD_COS)[0]]


def _adjacency(mesh: Mesh, up: list[int], polys: list[Polygon]) -> list[set[int]]:
    adj: list[set[int]] = [set() for _ in up]
    # shared mesh edge
    edge_owner: dict[tuple[int, int], list[int]] = {}
    for local, tri in enumerate(up):
        a, b, c = (int(x) for x in mesh.triangles[tri])
        for e in ((a, b), (b, c), (c, a)):
            key = (min(e), max(e))
            edge_owner.setdefault(key, []).append(local)
    for owners in edge_owner.values():
        for i in owners:
            for j in owners:
                if i != j:
                    adj[i].add(j)
    # overlapping XY projections (positive-length or positive-area contact)
    tree = STRtree(polys)
    pairs = tree.query(polys, predicate="intersects")
    for qi, ti in zip(pairs[0], pairs[1]):
        i, j = int(qi), int(ti)
        if i >= j:
            continue
        inter = polys[i].intersection(polys[j])
        if inter.is_empty:
            continue
        if getattr(inter, "area", 0.0) > _EPS or getattr(inter, "length", 0.0) > _EPS:
            adj[i].add(j)
            adj[j].add(i)
    return adj


def _connected_components(n: int, adj: list[set[int]]) -> list[list[int]]:
    seen = [False] * n
    comps = []
    for start in range(n):
        if seen[start]:
            continue
        stack = [start]
        seen[start] = True
        comp = []
        while stack:
            cur = stack.pop()
            comp.append(cur)
            for nxt in sorted(adj[cur]):
                if not seen[nxt]:
                    seen[nxt] = True
                    stack.append(nxt)
        comps.append(sorted(comp))
    return comps


def _components_within(members: list[int], adj: list[set[int]]) -> list[list[int]]:
    inside = set(members)
    seen = set()
    comps = []
    for start in members:
        if start in seen:
            continue
        stack = [start]
        seen.add(start)
        comp = []
        while stack:
            cur = stack.pop()
            comp.append(cur)
            for nxt in sorted(adj[cur]):
                if nxt in inside and nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        comps.append(sorted(comp))
    return comps


def _split_height_bands(cluster: list[int], heights: list[np.ndarray],
                        tol: float) -> list[list[int]]:
    """Greedy 1-D banding: all vertex heights stay within tol of band median."""
    order = sorted(cluster, key=lambda i: (float(heights[i].max()),
                                           float(heights[i].min()), i))
    bands: list[list[int]] = []
    band: list[int] = []
    band_heights: list[float] = []
    for i in order:
        cand = band_heights + list(heights[i])
        med = float(np.median(cand))
        if band and max(abs(h - med) for h in cand) > tol + _EPS:
            bands.append(band)
            band = []
            band_heights = []
        band.append(i)
        band_heights.extend(float(h) for h in heights[i])
    if band:
        bands.append(band)
    return bands


def _largest_polygon(geom) -> Polygon:
    if isinstance(geom, Polygon):
        return geom
    parts = [g for g in getattr(geom, "geoms", []) if isinstance(g, Polygon)]
    if not parts:
        raise NoSurfaceError("cluster union produced no polygonal area")
    return max(parts, key=lambda g: g.area)


def _rasterize(union, bbox: Rect, resolution_cm: float) -> OccupancyGrid:
    nx = max(1, int(math.ceil(bbox.width / resolution_cm - _EPS)))
    ny = max(1, int(math.ceil(bbox.depth / resolution_cm - _EPS)))
    xs = bbox.min_x + (np.arange(nx) + 0.5) * resolution_cm
    ys = bbox.min_y + (np.arange(ny) + 0.5) * resolution_cm
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    cells = shapely.intersects_xy(union, gx.ravel(), gy.ravel()).reshape(nx, ny)
    return OccupancyGrid(resolution_cm=resolution_cm,
                         origin=(bbox.min_x, bbox.min_y), cells=cells)


def footprint_contained(surface: Surface, rect: Rect) -> bool:
    """True iff rect lies inside the surface bbox and every grid cell whose
    center falls in rect is supported.  Degenerate rects are never contained.
    """
    if rect.width <= 0.0 or rect.depth <= 0.0:
        return False
    if not surface.bbox.contains_rect(rect):
        return False
    return surface.grid.rect_fully_supported(rect)


def surfaces_to_json(surfaces: list[Surface]) -> list[dict]:
    """Dump format: array of {index, height_cm, area_cm2, boundary}."""
    return [
        {
            "index": s.index,
            "height_cm": s.height_cm,
            "area_cm2": s.area_cm2,
            "boundary": [[x, y] for x, y in s.boundary],
        }
        for s in surfaces
    ]
