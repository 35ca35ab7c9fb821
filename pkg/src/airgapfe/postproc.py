"""Gap-field reconstruction, torque, unbalanced magnetic pull and output.

Torque and pull come in two flavours each: a closed-form series over the gap
harmonics and a Maxwell-stress quadrature on a circle inside the gap. The
quadrature versions serve as independent oracles for the series weights; for
band-limited coefficient sets the trapezoidal rule is exact once the sample
count exceeds the interacting bandwidth.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .airgap import AirGapGeometry, AirGapOperator, GapCoefficients
from .errors import DomainError
from .harmonics import HarmonicSpectrum, select
from .mesh import Mesh

TWO_PI = 2.0 * math.pi


@dataclass
class ForceTorqueSample:
    """One time sample of the transmitted torque and rotor force."""

    t: float
    alpha: float
    d_ecc: float
    gamma_ecc: float
    torque: float
    fx: float
    fy: float
    iterations: int


def gap_coefficients(spec_st: HarmonicSpectrum, spec_rt: HarmonicSpectrum,
                     operator: AirGapOperator) -> GapCoefficients:
    """Gap field coefficients from interface spectra.

    The rotor spectrum is interpreted in the rotor frame; the operator's
    current rotation/skew factors and interface correction are applied so
    the result is consistent with the forward coupling.
    """
    cs = select(spec_st, operator.lambdas) * operator._s_st
    cr = (select(spec_rt, operator.lambdas) * operator._s_rt
          * operator._q_rt)
    return operator.solve_gap_coefficients(cs, cr)


def _check_radius(geometry: AirGapGeometry, r) -> None:
    r = np.asarray(r, dtype=float)
    lo = geometry.rho_rt * (1.0 - 1e-12)
    hi = geometry.r_st * (1.0 + 1e-12)
    if np.any(r < lo) or np.any(r > hi):
        raise DomainError(
            f"radius outside the gap [{geometry.rho_rt}, {geometry.r_st}]")


def reconstruct_potential(coeffs: GapCoefficients, geometry: AirGapGeometry,
                          r, theta):
    """A_z(r, theta) inside the gap from the harmonic coefficients."""
    _check_radius(geometry, r)
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    lam = coeffs.lambdas.orders.astype(float)
    x = np.asarray(r / geometry.rho_rt)[..., None]
    phase = np.exp(-1j * lam * theta[..., None])
    terms = (coeffs.a * x ** lam + coeffs.b * x ** (-lam)) * phase
    return 2.0 * np.real(terms.sum(axis=-1))


def reconstruct_flux(coeffs: GapCoefficients, geometry: AirGapGeometry,
                     r, theta):
    """(B_r, B_theta) inside the gap; B_r = dA/dtheta / r, B_theta = -dA/dr."""
    _check_radius(geometry, r)
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    lam = coeffs.lambdas.orders.astype(float)
    x = np.asarray(r / geometry.rho_rt)[..., None]
    rr = np.asarray(r)[..., None]
    phase = np.exp(-1j * lam * theta[..., None])
    br = (-1j * lam / rr) * (coeffs.a * x ** lam + coeffs.b * x ** (-lam)) * phase
    bt = (-lam / rr) * (coeffs.a * x ** lam - coeffs.b * x ** (-lam)) * phase
    return (2.0 * np.real(br.sum(axis=-1)), 2.0 * np.real(bt.sum(axis=-1)))


def _quad_grid(coeffs: GapCoefficients, geometry: AirGapGeometry,
               r_c, n_quad):
    if r_c is None:
        r_c = math.sqrt(geometry.r_st * geometry.rho_rt)
    if n_quad is None:
        n_quad = max(64, 8 * int(coeffs.lambdas.orders.max()))
    _check_radius(geometry, r_c)
    theta = TWO_PI * np.arange(n_quad) / n_quad
    return float(r_c), int(n_quad), theta


def torque_harmonic(coeffs: GapCoefficients,
                    geometry: AirGapGeometry) -> float:
    """Series torque: -8 pi nu0 l_z sum lam^2 Im{conj(a) b}.

    The order-squared weight follows from the Maxwell stress integral of the
    reconstructed field; the quadrature version below is the arbiter.
    """
    lam = coeffs.lambdas.orders.astype(float)
    s = np.sum(lam ** 2 * np.imag(np.conj(coeffs.a) * coeffs.b))
    return float(-8.0 * math.pi * geometry.nu0 * geometry.ell_z * s)


def torque_quadrature(coeffs: GapCoefficients, geometry: AirGapGeometry,
                      r_c: float | None = None,
                      n_quad: int | None = None) -> float:
    """Maxwell-stress torque nu0 l_z r^2 closed-integral(B_r B_theta)."""
    r_c, n_quad, theta = _quad_grid(coeffs, geometry, r_c, n_quad)
    br, bt = reconstruct_flux(coeffs, geometry, r_c, theta)
    integral = np.sum(br * bt) * TWO_PI / n_quad
    return float(geometry.nu0 * geometry.ell_z * r_c ** 2 * integral)


def ump_force(coeffs: GapCoefficients,
              geometry: AirGapGeometry) -> tuple[float, float]:
    """Series unbalanced pull from adjacent-order interaction.

    F_x + j F_y = (8 pi nu0 l_z / rho_rt) sum_{lam, lam-1 in Lambda}
    lam (lam - 1) a_lam conj(b_{lam-1}).
    """
    orders = coeffs.lambdas.orders
    index = {int(l): i for i, l in enumerate(orders)}
    total = 0.0 + 0.0j
    for i, lam in enumerate(orders):
        lam = int(lam)
        j = index.get(lam - 1)
        if lam >= 2 and j is not None:
            total += lam * (lam - 1) * coeffs.a[i] * np.conj(coeffs.b[j])
    scale = 8.0 * math.pi * geometry.nu0 * geometry.ell_z / geometry.rho_rt
    f = scale * total
    return float(f.real), float(f.imag)


def ump_quadrature(coeffs: GapCoefficients, geometry: AirGapGeometry,
                   r_c: float | None = None,
                   n_quad: int | None = None) -> tuple[float, float]:
    """Maxwell-stress pull l_z closed-integral (nu0/2) B^2 e^{j theta} r dtheta
    with the complex field B = B_r + j B_theta."""
    r_c, n_quad, theta = _quad_grid(coeffs, geometry, r_c, n_quad)
    br, bt = reconstruct_flux(coeffs, geometry, r_c, theta)
    bhat = br + 1j * bt
    integral = np.sum(bhat ** 2 * np.exp(1j * theta)) * TWO_PI / n_quad
    f = geometry.ell_z * 0.5 * geometry.nu0 * integral * r_c
    return float(f.real), float(f.imag)


# ---------------------------------------------------------------------------
# output writers

CSV_HEADER = ["t", "alpha", "d_ecc", "gamma_ecc", "torque", "fx", "fy",
              "iterations"]


def write_csv(samples, path, provenance: str | None = None) -> None:
    """Force/torque trace as CSV; values at 17 significant digits."""
    with open(path, "w", newline="") as fh:
        if provenance:
            fh.write(f"# {provenance}\n")
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for s in samples:
            writer.writerow([f"{s.t:.17g}", f"{s.alpha:.17g}",
                             f"{s.d_ecc:.17g}", f"{s.gamma_ecc:.17g}",
                             f"{s.torque:.17g}", f"{s.fx:.17g}",
                             f"{s.fy:.17g}", s.iterations])


def read_csv(path) -> list[ForceTorqueSample]:
    out = []
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh)
                if r and not r[0].startswith("#")]
    for row in rows[1:]:
        out.append(ForceTorqueSample(
            t=float(row[0]), alpha=float(row[1]), d_ecc=float(row[2]),
            gamma_ecc=float(row[3]), torque=float(row[4]), fx=float(row[5]),
            fy=float(row[6]), iterations=int(row[7])))
    return out


def write_vtk(mesh: Mesh, u: np.ndarray, path,
              provenance: str | None = None) -> None:
    """Legacy ASCII VTK unstructured grid with point scalar Az."""
    u = np.asarray(u, dtype=float).ravel()
    if len(u) != mesh.num_nodes:
        raise DomainError("solution length does not match mesh node count")
    title = (provenance or "airgapfe solution")[:255]
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"{title}\n")
        fh.write("ASCII\n")
        fh.write("DATASET UNSTRUCTURED_GRID\n")
        fh.write(f"POINTS {mesh.num_nodes} double\n")
        for x, y in mesh.nodes:
            fh.write(f"{x:.17g} {y:.17g} 0\n")
        fh.write(f"CELLS {mesh.num_triangles} {4 * mesh.num_triangles}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"3 {i} {j} {k}\n")
        fh.write(f"CELL_TYPES {mesh.num_triangles}\n")
        for _ in range(mesh.num_triangles):
            fh.write("5\n")
        fh.write(f"POINT_DATA {mesh.num_nodes}\n")
        fh.write("SCALARS Az double 1\n")
        fh.write("LOOKUP_TABLE default\n")
        for v in u:
            fh.write(f"{v:.17g}\n")
