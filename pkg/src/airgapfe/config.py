"""TOML run configuration: parsing, validation and problem construction.

One file drives one run. The schema is documented in the README; every
numeric default is written here so a config is fully reproducible from its
file content alone (the provenance hash covers the raw bytes).
"""

from __future__ import annotations

import hashlib
import math

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .airgap import NU0, AirGapGeometry, AirGapOperator
from .errors import ConfigurationError, InvalidSpecError
from .fem import (FeSubdomain, Material, MaterialTable, build_subdomain,
                  dirichlet_from_set)
from .harmonics import HarmonicSet
from .mesh import (Band, MachineSpec, Mesh, Sector, extract_ring,
                   generate_annulus, generate_machine, load_mesh)
from .solver import MotionProfile


@dataclass
class SideConfig:
    """One subdomain: a mesh source plus interface and boundary data."""

    name: str
    mesh_path: str | None = None
    annulus: dict | None = None
    machine: MachineSpec | None = None
    interface: str = ""
    dirichlet: dict[str, float] = field(default_factory=dict)

    def build_mesh(self, base_dir: Path) -> Mesh:
        if self.mesh_path is not None:
            return load_mesh(base_dir / self.mesh_path)
        if self.machine is not None:
            return generate_machine(self.machine)
        if self.annulus is not None:
            return generate_annulus(**self.annulus)
        raise ConfigurationError(
            f"[{self.name}] needs 'mesh', annulus parameters, or bands")


@dataclass
class SolverConfig:
    mode: str = "static"
    tol: float = 1e-10
    maxit: int = 0          # 0 -> 10 * dim
    theta: float = 1.0
    dt: float = 0.0
    t_end: float = 0.0
    sweeps: int = 2
    interior: str = "direct"


@dataclass
class OutputConfig:
    csv: str = "trace.csv"
    vtk: str = "solution.vtk"


@dataclass
class SimulationConfig:
    stator: SideConfig
    rotor: SideConfig
    materials: MaterialTable
    geometry: AirGapGeometry
    harmonics: HarmonicSet | None   # None = all common orders
    sint: bool
    profile: MotionProfile
    solver: SolverConfig
    output: OutputConfig
    base_dir: Path
    config_hash: str


def _get(table: dict, key: str, kind, default=None, path: str = ""):
    """Typed lookup with a dotted key path in the diagnostic."""
    where = f"{path}.{key}" if path else key
    if key not in table:
        if default is not None or default == 0 or default == "":
            return default
        raise ConfigurationError(f"missing config key {where!r}")
    val = table[key]
    if kind is float and isinstance(val, int):
        val = float(val)
    if not isinstance(val, kind):
        raise ConfigurationError(
            f"config key {where!r} must be {kind.__name__}, "
            f"got {type(val).__name__}")
    return val


def _parse_side(name: str, table: dict) -> SideConfig:
    side = SideConfig(name=name)
    side.interface = _get(table, "interface", str, path=name)
    for set_name, value in table.get("dirichlet", {}).items():
        side.dirichlet[str(set_name)] = float(value)
    if "mesh" in table:
        side.mesh_path = _get(table, "mesh", str, path=name)
    elif "bands" in table:
        bands = []
        for bi, b in enumerate(table["bands"]):
            bpath = f"{name}.bands[{bi}]"
            sectors = tuple(
                Sector(float(s["theta_start"]), float(s["theta_end"]),
                       int(s["tag"]))
                for s in b.get("sectors", []))
            bands.append(Band(
                r_inner=_get(b, "r_inner", float, path=bpath),
                r_outer=_get(b, "r_outer", float, path=bpath),
                n_layers=_get(b, "n_layers", int, path=bpath),
                sectors=sectors,
                tag=_get(b, "tag", int, 0, path=bpath)))
        side.machine = MachineSpec(
            n_boundary=_get(table, "n_boundary", int, path=name),
            bands=tuple(bands))
    elif "r_inner" in table:
        side.annulus = dict(
            r_inner=_get(table, "r_inner", float, path=name),
            r_outer=_get(table, "r_outer", float, path=name),
            n_boundary=_get(table, "n_boundary", int, path=name),
            n_layers=_get(table, "n_layers", int, path=name),
            region_tag=_get(table, "region_tag", int, 0, path=name))
    else:
        raise ConfigurationError(
            f"[{name}] needs one of: 'mesh', 'r_inner'.., or 'bands'")
    return side


def load_config(path) -> SimulationConfig:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    try:
        data = tomllib.loads(raw.decode())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigurationError(f"config parse error: {exc}") from exc
    digest = hashlib.sha256(raw).hexdigest()[:16]

    for section in ("stator", "rotor", "materials", "airgap"):
        if section not in data:
            raise ConfigurationError(f"missing config section [{section}]")

    stator = _parse_side("stator", data["stator"])
    rotor = _parse_side("rotor", data["rotor"])

    table = {}
    for tag_str, m in data["materials"].items():
        try:
            tag = int(tag_str)
        except ValueError:
            raise ConfigurationError(
                f"material tag {tag_str!r} is not an integer") from None
        table[tag] = Material(
            nu=_get(m, "nu", float, path=f"materials.{tag_str}"),
            sigma=_get(m, "sigma", float, 0.0, path=f"materials.{tag_str}"),
            jz=_get(m, "jz", float, 0.0, path=f"materials.{tag_str}"))
    materials = MaterialTable(table)

    ag = data["airgap"]
    geometry = AirGapGeometry(
        r_st=_get(ag, "r_st", float, path="airgap"),
        rho_rt=_get(ag, "rho_rt", float, path="airgap"),
        nu0=_get(ag, "nu0", float, NU0, path="airgap"),
        ell_z=_get(ag, "ell_z", float, 1.0, path="airgap"))
    sint_raw = ag.get("sint", "exact")
    if sint_raw not in ("exact", "off"):
        raise ConfigurationError("airgap.sint must be 'exact' or 'off'")
    sint = sint_raw == "exact"
    harm_raw = ag.get("harmonics", "auto")
    if harm_raw == "auto":
        harmonics = None
    elif isinstance(harm_raw, list):
        harmonics = HarmonicSet(harm_raw)
    else:
        raise ConfigurationError(
            "airgap.harmonics must be 'auto' or a list of orders")

    mo = data.get("motion", {})
    t = np.asarray(mo.get("t", [0.0]), dtype=float)
    profile = MotionProfile(
        t=t,
        alpha=np.asarray(mo.get("alpha", np.zeros_like(t)), dtype=float),
        d_ecc=np.asarray(mo.get("d_ecc", np.zeros_like(t)), dtype=float),
        gamma_ecc=np.asarray(mo.get("gamma_ecc", np.zeros_like(t)),
                             dtype=float),
        gamma_skew=float(mo.get("gamma_skew", 0.0)))

    so = data.get("solver", {})
    solver = SolverConfig(
        mode=_get(so, "mode", str, "static", path="solver"),
        tol=_get(so, "tol", float, 1e-10, path="solver"),
        maxit=_get(so, "maxit", int, 0, path="solver"),
        theta=_get(so, "theta", float, 1.0, path="solver"),
        dt=_get(so, "dt", float, 0.0, path="solver"),
        t_end=_get(so, "t_end", float, 0.0, path="solver"),
        sweeps=_get(so, "sweeps", int, 2, path="solver"),
        interior=_get(so, "interior", str, "direct", path="solver"))
    if solver.interior not in ("direct", "sgs"):
        raise ConfigurationError("solver.interior must be 'direct' or 'sgs'")
    if solver.mode not in ("static", "transient"):
        raise ConfigurationError("solver.mode must be 'static' or 'transient'")
    if solver.mode == "transient" and (solver.dt <= 0.0
                                       or solver.t_end <= solver.dt * 0.5):
        raise ConfigurationError(
            "transient mode needs solver.dt > 0 and solver.t_end >= dt")

    ou = data.get("output", {})
    output = OutputConfig(csv=ou.get("csv", "trace.csv"),
                          vtk=ou.get("vtk", "solution.vtk"))

    return SimulationConfig(
        stator=stator, rotor=rotor, materials=materials, geometry=geometry,
        harmonics=harmonics, sint=sint, profile=profile, solver=solver,
        output=output, base_dir=path.parent, config_hash=digest)


@dataclass
class Problem:
    """Everything a solve needs, built and validated from a config."""

    sub_st: FeSubdomain
    sub_rt: FeSubdomain
    operator: AirGapOperator
    profile: MotionProfile
    solver: SolverConfig
    output: OutputConfig
    config_hash: str


def _total_current(mesh: Mesh, materials: MaterialTable) -> tuple[float, float]:
    """(net, gross) applied current over a mesh, in amperes per metre depth."""
    areas = mesh.triangle_areas()
    net = 0.0
    gross = 0.0
    for a, tag in zip(areas, mesh.region_tags):
        jz = materials.for_tag(tag).jz
        net += jz * a
        gross += abs(jz) * a
    return net, gross


def build_problem(config: SimulationConfig) -> Problem:
    mesh_st = config.stator.build_mesh(config.base_dir)
    mesh_rt = config.rotor.build_mesh(config.base_dir)
    ring_st = extract_ring(mesh_st, config.stator.interface,
                           config.geometry.r_st)
    ring_rt = extract_ring(mesh_rt, config.rotor.interface,
                           config.geometry.rho_rt)

    def side_dirichlet(side: SideConfig, mesh: Mesh) -> dict[int, float]:
        out: dict[int, float] = {}
        for set_name, value in side.dirichlet.items():
            out.update(dirichlet_from_set(mesh, set_name, value))
        if not out:
            raise ConfigurationError(
                f"[{side.name}] needs at least one Dirichlet constraint; the "
                "air-gap element drops the order-0 harmonic, so an "
                "unconstrained subdomain would be singular")
        return out

    dir_st = side_dirichlet(config.stator, mesh_st)
    dir_rt = side_dirichlet(config.rotor, mesh_rt)

    net, gross = _total_current(mesh_rt, config.materials)
    if gross > 0.0 and abs(net) > 1e-9 * gross:
        raise ConfigurationError(
            f"rotor carries a nonzero net current {net:.6g} A/m; the air-gap "
            "element drops the order-0 harmonic, so net rotor current "
            "(circuit coupling) is out of scope — balance the coil regions")

    sub_st = build_subdomain(mesh_st, config.materials, ring_st, dir_st)
    sub_rt = build_subdomain(mesh_rt, config.materials, ring_rt, dir_rt)

    lambdas = config.harmonics
    if lambdas is not None:
        lambdas.validate_for(ring_st.n, ring_rt.n)
    operator = AirGapOperator(config.geometry, ring_st, ring_rt,
                              lambdas=lambdas, sint=config.sint)

    # eccentricity magnitude bound checked over the whole profile
    d_max = float(np.max(config.profile.d_ecc))
    if d_max / config.geometry.rho_rt > 0.2:
        raise ConfigurationError(
            f"relative eccentricity {d_max / config.geometry.rho_rt:.3g} "
            "exceeds the first-order validity bound 0.2")
    gap = config.geometry.r_st - config.geometry.rho_rt
    if d_max >= gap:
        raise ConfigurationError(
            f"eccentricity {d_max:.4g} m would close the {gap:.4g} m gap")

    return Problem(sub_st=sub_st, sub_rt=sub_rt, operator=operator,
                   profile=config.profile, solver=config.solver,
                   output=config.output, config_hash=config.config_hash)
