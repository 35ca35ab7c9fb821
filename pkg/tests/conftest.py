"""Shared fixtures: desk-scale interface rings and the 8-pole bearing model.

The bearing model is a synthetic magnetic-bearing cross-section: eight poles
at 45 degree spacing, each pole made of a +J coil slot, an iron tooth and a
-J coil slot, backed by an iron yoke. Exciting two adjacent poles produces a
net pull along their bisector (22.5 degrees), which pins the force-direction
checks. Sector boundaries fall on multiples of 4.5 degrees, so an 80-node
boundary grid resolves them exactly; that alignment preserves the mirror
symmetry the force angle depends on.
"""

import math

import numpy as np
import pytest

from airgapfe.airgap import NU0, AirGapGeometry, AirGapOperator
from airgapfe.fem import (Material, MaterialTable, build_subdomain,
                          dirichlet_from_set)
from airgapfe.mesh import (Band, InterfaceRing, MachineSpec, Sector,
                           extract_ring, generate_annulus, generate_machine)

TWO_PI = 2.0 * math.pi
DEG = math.pi / 180.0

# bearing geometry constants
BEARING_R_ST = 0.022   # stator bore radius (m)
BEARING_RHO = 0.020    # rotor interface radius (m)


def desk_rings(geometry: AirGapGeometry, n_st: int, n_rt: int):
    """Standalone rings for operator-level tests (no FE mesh behind them)."""
    return (InterfaceRing(np.arange(n_st, dtype=np.int64), geometry.r_st,
                          0.0, n_st),
            InterfaceRing(np.arange(n_rt, dtype=np.int64), geometry.rho_rt,
                          0.0, n_rt))


def bearing_sectors(excited=(0, 1)):
    """Sector list for the pole band: slot / tooth / slot per pole."""
    AIR, IRON = 0, 1
    pieces = []
    for k in range(8):
        c = k * 45.0
        tag_l = 10 + k if k in excited else AIR
        tag_r = 20 + k if k in excited else AIR
        pieces.append((c - 22.5, c - 13.5, tag_l))
        pieces.append((c - 13.5, c + 13.5, IRON))
        pieces.append((c + 13.5, c + 22.5, tag_r))
    sectors = []
    for a, b, t in pieces:
        a %= 360.0
        b %= 360.0
        if b == 0.0:
            b = 360.0
        if a < b:
            sectors.append(Sector(a * DEG, b * DEG, t))
        else:  # wraps through angle 0: split
            sectors.append(Sector(a * DEG, TWO_PI, t))
            sectors.append(Sector(0.0, b * DEG, t))
    return tuple(sorted(sectors, key=lambda s: s.theta_start))


def build_bearing(j_coil=2e6, excited=(0, 1)):
    """(sub_st, sub_rt, operator) for the 8-pole bearing model.

    Excited poles carry balanced +J/-J slot pairs, so the net current on
    each subdomain is zero and the order-0 gap harmonic stays unused.
    """
    spec = MachineSpec(n_boundary=80, bands=(
        Band(BEARING_R_ST, 0.032, 4, bearing_sectors(excited), 0),
        Band(0.032, 0.040, 3, (), 1),   # iron yoke
    ))
    mesh_st = generate_machine(spec)
    mesh_rt = generate_annulus(0.008, BEARING_RHO, 80, 5, region_tag=1)
    mats = {0: Material(nu=NU0), 1: Material(nu=NU0 / 1000.0)}
    for k in excited:
        mats[10 + k] = Material(nu=NU0, jz=+j_coil)
        mats[20 + k] = Material(nu=NU0, jz=-j_coil)
    mats = MaterialTable(mats)
    ring_st = extract_ring(mesh_st, "inner", BEARING_R_ST)
    ring_rt = extract_ring(mesh_rt, "outer", BEARING_RHO)
    sub_st = build_subdomain(mesh_st, mats, ring_st,
                             dirichlet_from_set(mesh_st, "outer", 0.0))
    sub_rt = build_subdomain(mesh_rt, mats, ring_rt,
                             dirichlet_from_set(mesh_rt, "inner", 0.0))
    geometry = AirGapGeometry(BEARING_R_ST, BEARING_RHO, ell_z=0.1)
    operator = AirGapOperator(geometry, ring_st, ring_rt)
    return sub_st, sub_rt, operator


@pytest.fixture(scope="session")
def bearing_model():
    return build_bearing()
