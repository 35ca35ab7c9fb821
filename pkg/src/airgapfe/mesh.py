"""Triangular meshes for annular machine cross-sections.

Meshes are plain numpy containers with named node sets for the boundaries.
Generators produce structured annuli whose boundary rings are equidistant,
which is a hard requirement for the FFT-based interface coupling; rings with
non-uniform spacing are rejected at extraction time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigurationError,
    InvalidGeometryError,
    InvalidSpecError,
    MeshFormatError,
    UnsupportedGridError,
)

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Point2:
    """A point in the standstill cartesian plane, in metres."""

    x: float
    y: float


@dataclass
class Mesh:
    """Linear triangular mesh of one machine subdomain.

    nodes       (N, 2) float array of coordinates in metres
    triangles   (M, 3) int array of CCW node indices
    region_tags (M,) int array, one material/coil tag per triangle
    node_sets   named boundary index sets (e.g. "inner", "outer")
    """

    nodes: np.ndarray
    triangles: np.ndarray
    region_tags: np.ndarray
    node_sets: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float).reshape(-1, 2)
        self.triangles = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        self.region_tags = np.asarray(self.region_tags, dtype=np.int64).ravel()
        if self.region_tags.shape[0] != self.triangles.shape[0]:
            raise InvalidSpecError("one region tag per triangle required")
        self.node_sets = {k: np.asarray(v, dtype=np.int64).ravel()
                          for k, v in self.node_sets.items()}
        self.validate()

    @property
    def num_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def num_triangles(self) -> int:
        return self.triangles.shape[0]

    def triangle_areas(self) -> np.ndarray:
        """Signed areas; positive for the CCW orientation enforced here."""
        p = self.nodes[self.triangles]
        return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                      - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))

    def validate(self):
        if not np.all(np.isfinite(self.nodes)):
            raise InvalidGeometryError("non-finite node coordinates")
        if self.triangles.size and (self.triangles.min() < 0
                                    or self.triangles.max() >= self.num_nodes):
            raise MeshFormatError("triangle node index out of range")
        if np.any(self.triangle_areas() <= 0.0):
            bad = int(np.argmax(self.triangle_areas() <= 0.0))
            raise InvalidGeometryError(
                f"triangle {bad} has non-positive area (clockwise or degenerate)")
        for name, idx in self.node_sets.items():
            if idx.size and (idx.min() < 0 or idx.max() >= self.num_nodes):
                raise MeshFormatError(f"node set {name!r} index out of range")

    def checksum(self) -> int:
        """Topology+geometry fingerprint; constant iff the mesh is untouched."""
        import zlib
        h = zlib.crc32(np.ascontiguousarray(self.nodes).tobytes())
        h = zlib.crc32(np.ascontiguousarray(self.triangles).tobytes(), h)
        h = zlib.crc32(np.ascontiguousarray(self.region_tags).tobytes(), h)
        return h

    def equals(self, other: "Mesh") -> bool:
        return (np.array_equal(self.nodes, other.nodes)
                and np.array_equal(self.triangles, other.triangles)
                and np.array_equal(self.region_tags, other.region_tags)
                and set(self.node_sets) == set(other.node_sets)
                and all(np.array_equal(self.node_sets[k], other.node_sets[k])
                        for k in self.node_sets))


@dataclass(frozen=True)
class InterfaceRing:
    """Equidistant ring of interface nodes, ordered counterclockwise.

    Node p sits at angle theta0 + 2*pi*p/n on the circle of the given radius.
    """

    node_indices: np.ndarray
    radius: float
    theta0: float
    n: int

    def angles(self) -> np.ndarray:
        return self.theta0 + TWO_PI * np.arange(self.n) / self.n


# ---------------------------------------------------------------------------
# generators

def _ring_angles(n: int) -> np.ndarray:
    return TWO_PI * np.arange(n) / n


def _annulus_points(radii: np.ndarray, n: int) -> np.ndarray:
    ang = _ring_angles(n)
    pts = np.empty((len(radii) * n, 2))
    for layer, r in enumerate(radii):
        pts[layer * n:(layer + 1) * n, 0] = r * np.cos(ang)
        pts[layer * n:(layer + 1) * n, 1] = r * np.sin(ang)
    return pts


def _annulus_triangles(n_layers: int, n: int) -> np.ndarray:
    tris = []
    for layer in range(n_layers):
        base = layer * n
        nxt = base + n
        for p in range(n):
            q = (p + 1) % n
            # quad split along one diagonal, CCW in cartesian coordinates
            tris.append((base + p, nxt + q, base + q))
            tris.append((base + p, nxt + p, nxt + q))
    return np.asarray(tris, dtype=np.int64)


def generate_annulus(r_inner: float, r_outer: float, n_boundary: int,
                     n_layers: int, region_tag: int = 0) -> Mesh:
    """Structured triangulation of an annulus.

    Registers node sets "inner" and "outer"; node 0 of each ring is at
    angle 0 and the rings are exactly equidistant.
    """
    if not (0.0 < r_inner < r_outer):
        raise InvalidGeometryError(
            f"need 0 < r_inner < r_outer, got {r_inner} and {r_outer}")
    if n_boundary < 4 or n_boundary % 2:
        raise InvalidSpecError("n_boundary must be even and >= 4")
    if n_layers < 1:
        raise InvalidSpecError("n_layers must be >= 1")
    radii = np.linspace(r_inner, r_outer, n_layers + 1)
    nodes = _annulus_points(radii, n_boundary)
    tris = _annulus_triangles(n_layers, n_boundary)
    tags = np.full(len(tris), region_tag, dtype=np.int64)
    sets = {
        "inner": np.arange(n_boundary, dtype=np.int64),
        "outer": np.arange(n_layers * n_boundary,
                           (n_layers + 1) * n_boundary, dtype=np.int64),
    }
    return Mesh(nodes, tris, tags, sets)


@dataclass(frozen=True)
class Sector:
    """Angular sector [theta_start, theta_end) carrying one region tag."""

    theta_start: float
    theta_end: float
    tag: int


@dataclass(frozen=True)
class Band:
    """Radial band of an annular machine mesh.

    An empty sector list makes the whole band carry `tag`.
    """

    r_inner: float
    r_outer: float
    n_layers: int
    sectors: tuple[Sector, ...] = ()
    tag: int = 0


@dataclass(frozen=True)
class MachineSpec:
    """Stack of contiguous radial bands sharing one azimuthal resolution."""

    n_boundary: int
    bands: tuple[Band, ...]


def _check_sectors(sectors: tuple[Sector, ...]):
    """Sectors must partition [0, 2*pi) without overlap."""
    s = sorted(sectors, key=lambda sec: sec.theta_start)
    tol = 1e-12
    if abs(s[0].theta_start) > tol:
        raise InvalidSpecError("sectors must start at angle 0")
    for a, b in zip(s, s[1:]):
        if a.theta_end > b.theta_start + tol:
            raise InvalidSpecError(
                f"sectors overlap near angle {b.theta_start}")
        if a.theta_end < b.theta_start - tol:
            raise InvalidSpecError(f"gap between sectors near {a.theta_end}")
    if abs(s[-1].theta_end - TWO_PI) > tol:
        raise InvalidSpecError("sectors must cover the full circle")
    return s


def _sector_tag(sectors, theta: float, fallback: int) -> int:
    theta = theta % TWO_PI
    for sec in sectors:
        if sec.theta_start - 1e-12 <= theta < sec.theta_end - 1e-12:
            return sec.tag
    return sectors[-1].tag if sectors else fallback


def generate_machine(spec: MachineSpec) -> Mesh:
    """Annular mesh with per-sector, per-band region tags.

    Bands must be contiguous in radius. Inner and outer rings are
    registered as node sets; with no sectors anywhere the result is
    identical to generate_annulus over the full radial span.
    """
    if not spec.bands:
        raise InvalidSpecError("at least one band required")
    if spec.n_boundary < 4 or spec.n_boundary % 2:
        raise InvalidSpecError("n_boundary must be even and >= 4")
    for a, b in zip(spec.bands, spec.bands[1:]):
        if not math.isclose(a.r_outer, b.r_inner, rel_tol=1e-12):
            raise InvalidSpecError("bands must be radially contiguous")
    sector_lists = []
    for band in spec.bands:
        if not (0.0 < band.r_inner < band.r_outer):
            raise InvalidGeometryError("band radii must be positive increasing")
        if band.n_layers < 1:
            raise InvalidSpecError("band n_layers must be >= 1")
        sector_lists.append(_check_sectors(band.sectors) if band.sectors else [])

    n = spec.n_boundary
    radii = [spec.bands[0].r_inner]
    for band in spec.bands:
        radii.extend(np.linspace(band.r_inner, band.r_outer,
                                 band.n_layers + 1)[1:])
    radii = np.asarray(radii)
    nodes = _annulus_points(radii, n)
    total_layers = len(radii) - 1
    tris = _annulus_triangles(total_layers, n)

    # tag per triangle from its centroid angle and radial band
    tags = np.empty(len(tris), dtype=np.int64)
    centroids = nodes[tris].mean(axis=1)
    cen_theta = np.arctan2(centroids[:, 1], centroids[:, 0]) % TWO_PI
    layer_of_tri = np.repeat(np.arange(total_layers), 2 * n)
    band_of_layer = np.repeat(np.arange(len(spec.bands)),
                              [b.n_layers for b in spec.bands])
    for t in range(len(tris)):
        band_idx = band_of_layer[layer_of_tri[t]]
        band = spec.bands[band_idx]
        tags[t] = _sector_tag(sector_lists[band_idx], cen_theta[t], band.tag)

    sets = {
        "inner": np.arange(n, dtype=np.int64),
        "outer": np.arange(total_layers * n, (total_layers + 1) * n,
                           dtype=np.int64),
    }
    return Mesh(nodes, tris, tags, sets)


# ---------------------------------------------------------------------------
# text format I/O
#
# nodes N
# x y              (N lines, 17 significant digits)
# triangles M
# i j k tag        (M lines, 0-based)
# nodeset <name> K
# i                (K lines)          -- repeated per set

def save_mesh(mesh: Mesh, path) -> None:
    with open(path, "w") as fh:
        fh.write(f"nodes {mesh.num_nodes}\n")
        for x, y in mesh.nodes:
            fh.write(f"{x:.17g} {y:.17g}\n")
        fh.write(f"triangles {mesh.num_triangles}\n")
        for (i, j, k), tag in zip(mesh.triangles, mesh.region_tags):
            fh.write(f"{i} {j} {k} {tag}\n")
        for name in sorted(mesh.node_sets):
            idx = mesh.node_sets[name]
            fh.write(f"nodeset {name} {len(idx)}\n")
            for i in idx:
                fh.write(f"{i}\n")


def load_mesh(path) -> Mesh:
    with open(path) as fh:
        lines = fh.read().splitlines()
    pos = 0

    def next_line():
        nonlocal pos
        while pos < len(lines) and not lines[pos].strip():
            pos += 1
        if pos >= len(lines):
            raise MeshFormatError("unexpected end of file", pos + 1)
        pos += 1
        return lines[pos - 1].split(), pos

    toks, ln = next_line()
    if len(toks) != 2 or toks[0] != "nodes":
        raise MeshFormatError("expected 'nodes N' header", ln)
    n_nodes = int(toks[1])
    nodes = np.empty((n_nodes, 2))
    for i in range(n_nodes):
        toks, ln = next_line()
        if len(toks) != 2:
            raise MeshFormatError("expected 'x y'", ln)
        try:
            nodes[i] = [float(toks[0]), float(toks[1])]
        except ValueError:
            raise MeshFormatError("bad coordinate", ln) from None

    toks, ln = next_line()
    if len(toks) != 2 or toks[0] != "triangles":
        raise MeshFormatError("expected 'triangles M' header", ln)
    n_tris = int(toks[1])
    tris = np.empty((n_tris, 3), dtype=np.int64)
    tags = np.empty(n_tris, dtype=np.int64)
    for i in range(n_tris):
        toks, ln = next_line()
        if len(toks) != 4:
            raise MeshFormatError("expected 'i j k tag'", ln)
        try:
            tris[i] = [int(toks[0]), int(toks[1]), int(toks[2])]
            tags[i] = int(toks[3])
        except ValueError:
            raise MeshFormatError("bad triangle entry", ln) from None
        if tris[i].min() < 0 or tris[i].max() >= n_nodes:
            raise MeshFormatError(
                f"triangle index out of range (node count {n_nodes})", ln)

    sets: dict[str, np.ndarray] = {}
    while True:
        try:
            toks, ln = next_line()
        except MeshFormatError:
            break
        if len(toks) != 3 or toks[0] != "nodeset":
            raise MeshFormatError("expected 'nodeset <name> K' header", ln)
        name, count = toks[1], int(toks[2])
        idx = np.empty(count, dtype=np.int64)
        for i in range(count):
            toks, ln = next_line()
            try:
                idx[i] = int(toks[0])
            except (ValueError, IndexError):
                raise MeshFormatError("bad node set index", ln) from None
        sets[name] = idx

    try:
        return Mesh(nodes, tris, tags, sets)
    except InvalidGeometryError as exc:
        raise MeshFormatError(str(exc)) from exc


# ---------------------------------------------------------------------------

def extract_ring(mesh: Mesh, node_set_name: str, expected_radius: float,
                 tol: float | None = None) -> InterfaceRing:
    """Order a boundary node set counterclockwise and verify equidistance.

    tol defaults to 1e-9 * expected_radius. A non-equidistant set is
    rejected: the classical FFT coupling needs a uniform grid.
    """
    if node_set_name not in mesh.node_sets:
        raise ConfigurationError(f"mesh has no node set named {node_set_name!r}")
    if tol is None:
        tol = 1e-9 * expected_radius
    idx = mesh.node_sets[node_set_name]
    pts = mesh.nodes[idx]
    radii = np.hypot(pts[:, 0], pts[:, 1])
    if np.any(np.abs(radii - expected_radius) > tol):
        off = float(np.max(np.abs(radii - expected_radius)))
        raise UnsupportedGridError(
            f"set {node_set_name!r}: node off circle r={expected_radius} "
            f"by {off:.3e} (tol {tol:.3e})")
    theta = np.arctan2(pts[:, 1], pts[:, 0]) % TWO_PI
    order = np.argsort(theta)
    idx = idx[order]
    theta = theta[order]
    n = len(idx)
    if n < 4 or n % 2:
        raise UnsupportedGridError("ring needs an even node count >= 4")
    theta0 = float(theta[0])
    expect = (theta0 + TWO_PI * np.arange(n) / n) % TWO_PI
    diff = np.abs(((theta - expect) + math.pi) % TWO_PI - math.pi)
    ang_tol = tol / expected_radius + 1e-12
    if np.any(diff > ang_tol):
        raise UnsupportedGridError(
            f"set {node_set_name!r} is not equidistant "
            f"(max angular deviation {float(diff.max()):.3e})")
    return InterfaceRing(idx, expected_radius, theta0, n)
