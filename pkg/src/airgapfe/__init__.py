"""2D finite-element magnetostatics for rotating machines with a spectral
air-gap coupling: rotation, skew and first-order rotor eccentricity are
handled through per-harmonic factors, never by remeshing."""

__version__ = "1.0.0"

from .airgap import (AirGapGeometry, AirGapOperator, GapCoefficients,
                     MotionState, NU0)
from .errors import (AirgapFeError, ConfigurationError, DomainError,
                     InternalError, InvalidGeometryError, InvalidSpecError,
                     MeshFormatError, SolverError, UnsupportedGridError)
from .fem import (FeSubdomain, Material, MaterialTable, build_subdomain,
                  dirichlet_from_set)
from .harmonics import HarmonicSet, HarmonicSpectrum, analyze, synthesize
from .mesh import (Band, InterfaceRing, MachineSpec, Mesh, Sector,
                   extract_ring, generate_annulus, generate_machine,
                   load_mesh, save_mesh)
from .postproc import (ForceTorqueSample, reconstruct_flux,
                       reconstruct_potential, torque_harmonic,
                       torque_quadrature, ump_force, ump_quadrature,
                       write_csv, write_vtk)
from .solver import (CoupledSystem, MotionProfile, SolveStats, pcg,
                     schwarz_preconditioner, solve_static, solve_transient)

__all__ = [name for name in dir() if not name.startswith("_")]
