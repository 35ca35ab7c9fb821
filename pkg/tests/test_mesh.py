"""Mesh generators, text-format I/O and interface-ring extraction."""

import math

import numpy as np
import pytest

from airgapfe.errors import (ConfigurationError, InvalidGeometryError,
                             InvalidSpecError, MeshFormatError,
                             UnsupportedGridError)
from airgapfe.mesh import (Band, MachineSpec, Mesh, Sector, extract_ring,
                           generate_annulus, generate_machine, load_mesh,
                           save_mesh)

TWO_PI = 2.0 * math.pi


# -- generate_annulus --------------------------------------------------------

def test_annulus_counts_one_layer():
    mesh = generate_annulus(1.0, 2.0, 8, 1, region_tag=0)
    assert mesh.num_nodes == 16
    assert mesh.num_triangles == 16
    assert len(mesh.node_sets["inner"]) == 8
    assert len(mesh.node_sets["outer"]) == 8


def test_annulus_degenerate_radii():
    with pytest.raises(InvalidGeometryError):
        generate_annulus(1.0, 1.0, 8, 1, 0)
    with pytest.raises(InvalidGeometryError):
        generate_annulus(2.0, 1.0, 8, 1, 0)


def test_annulus_odd_or_small_boundary_rejected():
    with pytest.raises(InvalidSpecError):
        generate_annulus(1.0, 2.0, 7, 1)
    with pytest.raises(InvalidSpecError):
        generate_annulus(1.0, 2.0, 2, 1)


def test_annulus_boundary_angles_exact():
    mesh = generate_annulus(1.0, 2.0, 12, 3)
    for name, radius in (("inner", 1.0), ("outer", 2.0)):
        pts = mesh.nodes[mesh.node_sets[name]]
        theta = np.arctan2(pts[:, 1], pts[:, 0]) % TWO_PI
        expect = TWO_PI * np.arange(12) / 12
        diff = np.abs(((theta - expect) + math.pi) % TWO_PI - math.pi)
        assert diff.max() <= 1e-12
        assert np.allclose(np.hypot(pts[:, 0], pts[:, 1]), radius,
                           atol=1e-14, rtol=0)


@pytest.mark.parametrize("n,layers", [(8, 1), (16, 2), (64, 5)])
def test_annulus_area_sum(n, layers):
    """Total triangle area approaches the analytic annulus area as the
    polygonal approximation of the circles refines; the polygon area itself
    is matched to 1e-10 relative."""
    r_in, r_out = 0.7, 1.9
    mesh = generate_annulus(r_in, r_out, n, layers)
    total = float(mesh.triangle_areas().sum())
    # area of the union of the structured quads between regular n-gons
    poly = 0.5 * n * math.sin(TWO_PI / n) * (r_out ** 2 - r_in ** 2)
    assert abs(total - poly) <= 1e-10 * poly


def test_annulus_area_converges_to_annulus():
    exact = math.pi * (2.0 ** 2 - 1.0 ** 2)
    areas = [float(generate_annulus(1.0, 2.0, n, 2).triangle_areas().sum())
             for n in (64, 128, 256)]
    errs = [abs(a - exact) for a in areas]
    assert errs[1] < errs[0] / 3.5 and errs[2] < errs[1] / 3.5


def test_triangle_orientation_positive():
    mesh = generate_annulus(0.5, 1.5, 10, 4)
    assert np.all(mesh.triangle_areas() > 0.0)


# -- generate_machine --------------------------------------------------------

def test_machine_empty_sectors_equals_annulus():
    spec = MachineSpec(n_boundary=12, bands=(Band(1.0, 2.0, 3, (), 7),))
    m1 = generate_machine(spec)
    m2 = generate_annulus(1.0, 2.0, 12, 3, region_tag=7)
    assert m1.equals(m2)


def test_machine_sector_tag_histogram():
    half = math.pi
    spec = MachineSpec(n_boundary=16, bands=(
        Band(1.0, 2.0, 2, (Sector(0.0, half, 3), Sector(half, TWO_PI, 4))),))
    mesh = generate_machine(spec)
    a3 = mesh.triangle_areas()[mesh.region_tags == 3].sum()
    a4 = mesh.triangle_areas()[mesh.region_tags == 4].sum()
    assert math.isclose(a3, a4, rel_tol=1e-12)
    assert set(np.unique(mesh.region_tags)) == {3, 4}


def test_machine_overlapping_sectors_rejected():
    bad = (Sector(0.0, 4.0, 1), Sector(3.0, TWO_PI, 2))
    with pytest.raises(InvalidSpecError):
        generate_machine(MachineSpec(8, (Band(1.0, 2.0, 1, bad),)))


def test_machine_sector_gap_rejected():
    bad = (Sector(0.0, 2.0, 1), Sector(3.0, TWO_PI, 2))
    with pytest.raises(InvalidSpecError):
        generate_machine(MachineSpec(8, (Band(1.0, 2.0, 1, bad),)))


def test_machine_noncontiguous_bands_rejected():
    with pytest.raises(InvalidSpecError):
        generate_machine(MachineSpec(8, (Band(1.0, 2.0, 1),
                                         Band(2.5, 3.0, 1))))


def test_machine_multiband_tags_by_radius():
    spec = MachineSpec(n_boundary=8, bands=(Band(1.0, 2.0, 2, (), 5),
                                            Band(2.0, 3.0, 1, (), 6)))
    mesh = generate_machine(spec)
    cen = mesh.nodes[mesh.triangles].mean(axis=1)
    r = np.hypot(cen[:, 0], cen[:, 1])
    assert np.all(mesh.region_tags[r < 2.0] == 5)
    assert np.all(mesh.region_tags[r > 2.0] == 6)


# -- I/O ---------------------------------------------------------------------

def test_save_load_round_trip(tmp_path):
    mesh = generate_annulus(1.0, 2.0, 8, 1, region_tag=3)
    path = tmp_path / "m.mesh"
    save_mesh(mesh, path)
    again = load_mesh(path)
    assert again.equals(mesh)


def test_save_load_bit_faithful(tmp_path):
    mesh = generate_annulus(0.123456789012345, 1.98765432109876, 16, 2)
    p1, p2 = tmp_path / "a.mesh", tmp_path / "b.mesh"
    save_mesh(mesh, p1)
    save_mesh(load_mesh(p1), p2)
    assert p1.read_bytes() == p2.read_bytes()


def test_load_bad_index_names_line(tmp_path):
    path = tmp_path / "bad.mesh"
    path.write_text("nodes 3\n0 0\n1 0\n0 1\ntriangles 1\n0 1 9 0\n")
    with pytest.raises(MeshFormatError, match="line 6"):
        load_mesh(path)


def test_load_clockwise_triangle_rejected(tmp_path):
    path = tmp_path / "cw.mesh"
    path.write_text("nodes 3\n0 0\n1 0\n0 1\ntriangles 1\n0 2 1 0\n")
    with pytest.raises(MeshFormatError, match="area"):
        load_mesh(path)


def test_load_malformed_header(tmp_path):
    path = tmp_path / "hdr.mesh"
    path.write_text("vertices 3\n")
    with pytest.raises(MeshFormatError, match="line 1"):
        load_mesh(path)


# -- extract_ring ------------------------------------------------------------

def test_extract_ring_basic():
    mesh = generate_annulus(1.0, 2.0, 8, 1)
    ring = extract_ring(mesh, "outer", 2.0)
    assert ring.n == 8
    assert ring.theta0 == pytest.approx(0.0, abs=1e-15)
    assert ring.radius == 2.0
    # recovers the generator's boundary node order
    assert np.array_equal(ring.node_indices, mesh.node_sets["outer"])


def test_extract_ring_off_circle_rejected():
    mesh = generate_annulus(1.0, 2.0, 8, 1)
    tol = 1e-9 * 2.0
    mesh.nodes[mesh.node_sets["outer"][3]] *= 1.0 + 10.0 * tol
    with pytest.raises(UnsupportedGridError):
        extract_ring(mesh, "outer", 2.0)


def test_extract_ring_nonequidistant_rejected():
    n = 8
    theta = TWO_PI * np.arange(n) / n
    theta[2] += 0.01  # break uniform spacing but stay on the circle
    nodes = np.column_stack([np.cos(theta), np.sin(theta)])
    center = np.array([[0.0, 0.0]])
    nodes = np.vstack([nodes, center])
    tris = [(i, (i + 1) % n, n) for i in range(n)]
    mesh = Mesh(nodes, tris, np.zeros(n), {"rim": np.arange(n)})
    with pytest.raises(UnsupportedGridError, match="equidistant"):
        extract_ring(mesh, "rim", 1.0)


def test_extract_ring_records_theta0():
    n = 8
    off = math.pi / 8
    theta = off + TWO_PI * np.arange(n) / n
    nodes = np.column_stack([np.cos(theta), np.sin(theta)])
    nodes = np.vstack([nodes, [[0.0, 0.0]]])
    tris = [(i, (i + 1) % n, n) for i in range(n)]
    mesh = Mesh(nodes, tris, np.zeros(n), {"rim": np.arange(n)})
    ring = extract_ring(mesh, "rim", 1.0)
    assert ring.theta0 == pytest.approx(off, abs=1e-12)


def test_extract_ring_missing_set():
    mesh = generate_annulus(1.0, 2.0, 8, 1)
    with pytest.raises(ConfigurationError):
        extract_ring(mesh, "nope", 2.0)


def test_checksum_tracks_geometry():
    m1 = generate_annulus(1.0, 2.0, 8, 1)
    m2 = generate_annulus(1.0, 2.0, 8, 1)
    assert m1.checksum() == m2.checksum()
    m2.nodes[0, 0] += 1e-12
    assert m1.checksum() != m2.checksum()
