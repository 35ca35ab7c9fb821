"""Self-checks with independent oracles, runnable as the `verify` command.

Each check builds its own desk-scale fixture, computes a reference by an
independent route (explicit dense spectral matrices, closed-form annulus
fields, shifted-circle sampling, Maxwell-stress quadrature, wall-clock
probes) and reports measured numbers alongside the pass/fail verdict.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .airgap import (AirGapGeometry, AirGapOperator, GapCoefficients,
                     MotionState, eccentric_blocks, g_block, skew_factors,
                     t_block)
from .fem import Material, MaterialTable, build_subdomain, dirichlet_from_set
from .harmonics import HarmonicSet, analyze, interface_correction
from .mesh import InterfaceRing, extract_ring, generate_annulus
from .postproc import (torque_harmonic, torque_quadrature, ump_force,
                       ump_quadrature)
from .solver import CoupledSystem, pcg, schwarz_preconditioner

TWO_PI = 2.0 * math.pi


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)


@dataclass
class Report:
    checks: list

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_json(self) -> str:
        def plain(obj):
            if isinstance(obj, (np.bool_,)):
                return bool(obj)
            if isinstance(obj, np.integer):
                return int(obj)
            if isinstance(obj, np.floating):
                return float(obj)
            if isinstance(obj, np.ndarray):
                return obj.tolist()
            raise TypeError(f"not JSON serializable: {type(obj)}")
        return json.dumps({
            "passed": self.passed,
            "checks": [{"name": c.name, "passed": bool(c.passed),
                        "measured": c.measured} for c in self.checks],
        }, indent=2, default=plain)


# ---------------------------------------------------------------------------
# independent dense reference

def _analysis_matrix(ring: InterfaceRing, lambdas: HarmonicSet,
                     s_corr: np.ndarray) -> np.ndarray:
    """Complex |Lambda| x n matrix computing corrected coefficients by the
    plain discrete Fourier sum (no FFT)."""
    theta = ring.angles()
    lam = lambdas.orders[:, None].astype(float)
    return s_corr[:, None] * np.exp(1j * lam * theta[None, :]) / ring.n


def reference_dense(geometry: AirGapGeometry, ring_st: InterfaceRing,
                    ring_rt: InterfaceRing, lambdas: HarmonicSet,
                    motion: MotionState, sint: bool = True) -> np.ndarray:
    """Ring-level gap matrix assembled from explicit spectral matrices.

    Built from the per-order potential/field block matrices and plain DFT
    sums; shares no code path with the FFT-based operator apply.
    """
    L = len(lambdas)
    lam = lambdas.orders.astype(float)
    ones = np.ones(L)
    s_st = interface_correction(lam, ring_st.n) if sint else ones
    s_rt = interface_correction(lam, ring_rt.n) if sint else ones
    a_st = _analysis_matrix(ring_st, lambdas, s_st)
    a_rt = _analysis_matrix(ring_rt, lambdas, s_rt)

    skew = skew_factors(lambdas, motion.gamma_skew)
    q = skew * np.exp(1j * lambdas.orders * motion.alpha)

    # potential and field maps [a_1, b_1, ...] -> interleaved [st, rt] rows
    m2 = 2 * L
    t_full = np.zeros((m2, m2), dtype=complex)
    g_full = np.zeros((m2, m2), dtype=complex)
    if motion.eps == 0.0:
        for i, l in enumerate(lambdas.orders):
            t_full[2 * i:2 * i + 2, 2 * i:2 * i + 2] = t_block(int(l),
                                                               geometry.xi)
            g_full[2 * i:2 * i + 2, 2 * i:2 * i + 2] = g_block(int(l),
                                                               geometry)
    else:
        blocks = eccentric_blocks(lambdas, geometry, motion.eps)
        eye = np.eye(m2, dtype=complex)
        for j in range(m2):
            t_full[:, j] = blocks.t_matvec(eye[:, j].copy())
            g_full[:, j] = blocks.g_matvec(eye[:, j].copy())
    dtn = g_full @ np.linalg.inv(t_full)

    # c = [A_st u_st ; q A_rt u_rt] interleaved; h = dtn c;
    # d_st = -w_st h_st, d_rt = +w_rt conj(q) h_rt; u_out = Re(S d)
    w_st = TWO_PI * geometry.r_st / ring_st.n
    w_rt = TWO_PI * geometry.rho_rt / ring_rt.n
    n_tot = ring_st.n + ring_rt.n
    c_map = np.zeros((m2, n_tot), dtype=complex)
    c_map[0::2, :ring_st.n] = a_st
    c_map[1::2, ring_st.n:] = q[:, None] * a_rt
    h_map = dtn @ c_map
    d_st = -w_st * h_map[0::2]
    d_rt = w_rt * np.conj(q)[:, None] * h_map[1::2]
    syn_st = 2.0 * np.exp(-1j * np.outer(ring_st.angles(),
                                         lambdas.orders)) * s_st[None, :]
    syn_rt = 2.0 * np.exp(-1j * np.outer(ring_rt.angles(),
                                         lambdas.orders)) * s_rt[None, :]
    out = np.zeros((n_tot, n_tot))
    out[:ring_st.n] = np.real(syn_st @ d_st)
    out[ring_st.n:] = np.real(syn_rt @ d_rt)
    if motion.eps != 0.0:
        # the operator applies the symmetric part of the first-order
        # eccentric map; mirror that here
        out = 0.5 * (out + out.T)
    return out


def _desk_rings(geometry: AirGapGeometry, n_st: int, n_rt: int):
    idx_st = np.arange(n_st, dtype=np.int64)
    idx_rt = np.arange(n_rt, dtype=np.int64)
    return (InterfaceRing(idx_st, geometry.r_st, 0.0, n_st),
            InterfaceRing(idx_rt, geometry.rho_rt, 0.0, n_rt))


# ---------------------------------------------------------------------------
# individual checks

def check_dense_equivalence(geometry: AirGapGeometry | None = None,
                            n: int = 32, seed: int = 7) -> CheckResult:
    """Matrix-free apply vs the independent dense reference, several motion
    states; tolerance 1e-12 relative."""
    geometry = geometry or AirGapGeometry(1.1, 1.0, nu0=1.0)
    ring_st, ring_rt = _desk_rings(geometry, n, n)
    rng = np.random.default_rng(seed)
    states = [MotionState(0.0, 0.0, 0.0),
              MotionState(0.3, 0.0, 0.0),
              MotionState(0.0, 0.2, 0.0),
              MotionState(0.1, 0.1, 0.01 * np.exp(0.7j))]
    worst = 0.0
    for motion in states:
        op = AirGapOperator(geometry, ring_st, ring_rt, motion=motion)
        dense = reference_dense(geometry, ring_st, ring_rt, op.lambdas,
                                motion)
        scale = float(np.linalg.norm(dense)) or 1.0
        for _ in range(5):
            u = rng.standard_normal(2 * n)
            gs, gr = op.apply_ring(u[:n], u[n:])
            ref = dense @ u
            diff = np.linalg.norm(np.concatenate([gs, gr]) - ref)
            worst = max(worst, diff / (np.linalg.norm(ref) or scale))
    return CheckResult("dense_equivalence", worst <= 1e-12,
                       {"max_rel_diff": worst, "tol": 1e-12})


def check_symmetry_psd(geometry: AirGapGeometry | None = None,
                       n: int = 64) -> CheckResult:
    """Concentric operator: dense symmetry within 1e-12 and eigenvalues
    bounded below by -1e-10 times the norm."""
    geometry = geometry or AirGapGeometry(1.1, 1.0, nu0=1.0)
    ring_st, ring_rt = _desk_rings(geometry, n, n)
    op = AirGapOperator(geometry, ring_st, ring_rt,
                        motion=MotionState(alpha=0.37, gamma_skew=0.1))
    dense = op.assemble_dense()
    norm = float(np.linalg.norm(dense, 2))
    asym = float(np.max(np.abs(dense - dense.T))) / norm
    eig_min = float(np.linalg.eigvalsh(0.5 * (dense + dense.T)).min())
    ok = asym <= 1e-12 and eig_min >= -1e-10 * norm
    return CheckResult("symmetry_psd", ok,
                       {"rel_asymmetry": asym, "min_eig": eig_min,
                        "norm": norm})


def check_realness(geometry: AirGapGeometry | None = None, n: int = 64,
                   trials: int = 100, seed: int = 11) -> CheckResult:
    """Imaginary residue of the synthesis step stays below 1e-13 relative."""
    geometry = geometry or AirGapGeometry(1.1, 1.0, nu0=1.0)
    ring_st, ring_rt = _desk_rings(geometry, n, n)
    op = AirGapOperator(geometry, ring_st, ring_rt,
                        motion=MotionState(0.2, 0.05, 0.01))
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        op.apply_ring(rng.standard_normal(n), rng.standard_normal(n))
        worst = max(worst, op.last_imag_residue)
    return CheckResult("realness", worst <= 1e-13,
                       {"max_imag_residue": worst, "tol": 1e-13})


# -- annulus benchmark -------------------------------------------------------

R_IN, RHO_RT, R_ST, R_OUT = 0.5, 0.9, 1.0, 1.5


def _annulus_problem(n_boundary: int, p: int, nu0: float = 1.0):
    """Air-only stator/rotor annuli, outer Dirichlet cos(p theta), inner 0."""
    # layer counts scale linearly with n so refinement divides h everywhere
    layers_rt = max(2, n_boundary // 8)
    layers_st = max(2, n_boundary // 8)
    mesh_rt = generate_annulus(R_IN, RHO_RT, n_boundary, layers_rt)
    mesh_st = generate_annulus(R_ST, R_OUT, n_boundary, layers_st)
    mats = MaterialTable({0: Material(nu=nu0)})
    ring_rt = extract_ring(mesh_rt, "outer", RHO_RT)
    ring_st = extract_ring(mesh_st, "inner", R_ST)
    dir_rt = dirichlet_from_set(mesh_rt, "inner", 0.0)
    dir_st = dirichlet_from_set(
        mesh_st, "outer", lambda x, y: math.cos(p * math.atan2(y, x)))
    sub_rt = build_subdomain(mesh_rt, mats, ring_rt, dir_rt)
    sub_st = build_subdomain(mesh_st, mats, ring_st, dir_st)
    geometry = AirGapGeometry(R_ST, RHO_RT, nu0=nu0)
    op = AirGapOperator(geometry, ring_st, ring_rt)
    return sub_st, sub_rt, op


def _annulus_exact(p: int, r: np.ndarray, theta: np.ndarray) -> np.ndarray:
    num = (r / R_IN) ** p - (r / R_IN) ** (-p)
    den = (R_OUT / R_IN) ** p - (R_OUT / R_IN) ** (-p)
    return num / den * np.cos(p * theta)


def _lumped_l2(mesh, values: np.ndarray) -> float:
    areas = mesh.triangle_areas()
    w = np.zeros(mesh.num_nodes)
    np.add.at(w, mesh.triangles.ravel(), np.repeat(areas / 3.0, 3))
    return float(np.sqrt(np.sum(w * values ** 2)))


def annulus_benchmark_error(n_boundary: int, p: int,
                            tol: float = 1e-12) -> tuple[float, int, int]:
    """(relative L2 error, unknowns, pcg iterations) for one refinement."""
    sub_st, sub_rt, op = _annulus_problem(n_boundary, p)
    system = CoupledSystem(sub_st, sub_rt, op)
    rhs = system.rhs_for(system.load)
    pre = schwarz_preconditioner(system)
    x, stats = pcg(system.apply, rhs, x0=system.dirichlet_values,
                   preconditioner=pre, tol=tol)
    u_st, u_rt = system.split(x)
    err = 0.0
    norm = 0.0
    for sub, u in ((sub_st, u_st), (sub_rt, u_rt)):
        nodes = sub.mesh.nodes
        r = np.hypot(nodes[:, 0], nodes[:, 1])
        theta = np.arctan2(nodes[:, 1], nodes[:, 0])
        exact = _annulus_exact(p, r, theta)
        err += _lumped_l2(sub.mesh, u - exact) ** 2
        norm += _lumped_l2(sub.mesh, exact) ** 2
    return math.sqrt(err / norm), system.dim, stats.iterations


def check_annulus_convergence(levels=(24, 48, 96)) -> CheckResult:
    """Coupled solve vs the closed-form annulus field: error must shrink by
    at least 3.5x per mesh doubling for p in {1, 3}."""
    measured = {}
    ok = True
    for p in (1, 3):
        errs = [annulus_benchmark_error(n, p)[0] for n in levels]
        rates = [errs[i] / errs[i + 1] for i in range(len(errs) - 1)]
        measured[f"p{p}_errors"] = errs
        measured[f"p{p}_rates"] = rates
        ok = ok and all(r >= 3.5 for r in rates)
    measured["tol_rate"] = 3.5
    return CheckResult("annulus_convergence", ok, measured)


# -- eccentricity order ------------------------------------------------------

def _gap_field_at(coeffs: GapCoefficients, geometry: AirGapGeometry,
                  z: np.ndarray) -> np.ndarray:
    """Analytic gap potential at complex points z (no domain clipping)."""
    lam = coeffs.lambdas.orders.astype(float)
    w = z[:, None] / geometry.rho_rt  # complex radius ratio
    # a (w/|w| e^{-j arg})... use x^lam e^{-j lam theta} = (conj(w)/|w|^0)...
    # x^lam e^{-j lam theta} = (|w| e^{-j theta})^lam = conj(w)^lam for the
    # a-term and x^{-lam} e^{-j lam theta} = conj(w)^lam / |w|^{2 lam}
    cw = np.conj(w)
    mag2 = np.abs(w) ** 2
    terms = coeffs.a * cw ** lam + coeffs.b * cw ** lam / mag2 ** lam
    return 2.0 * np.real(terms.sum(axis=1))


def check_eccentricity_order(n: int = 64, seed: int = 3) -> CheckResult:
    """First-order perturbed boundary data vs sampling the analytic field on
    the true shifted rotor circle: residual must scale as eps^2."""
    geometry = AirGapGeometry(1.1, 1.0, nu0=1.0)
    _, ring_rt = _desk_rings(geometry, n, n)
    lambdas = HarmonicSet(np.arange(1, 13))
    rng = np.random.default_rng(seed)
    a = rng.standard_normal(12) + 1j * rng.standard_normal(12)
    b = rng.standard_normal(12) + 1j * rng.standard_normal(12)
    # zero the outermost orders so edge truncation does not pollute the slope
    a[-2:] = 0.0
    b[-2:] = 0.0
    coeffs = GapCoefficients(lambdas, a, b)
    eps_hat_dir = np.exp(0.6j)
    errors = []
    eps_vals = (1e-2, 1e-3, 1e-4)
    phi = ring_rt.angles()
    for mag in eps_vals:
        eps = mag * eps_hat_dir
        blocks = eccentric_blocks(lambdas, geometry, eps)
        vec = np.empty(24, dtype=complex)
        vec[0::2] = a
        vec[1::2] = b
        c = blocks.t_matvec(vec)
        c_rt = c[1::2]
        z = geometry.rho_rt * (np.exp(1j * phi) + eps)
        sampled = _gap_field_at(coeffs, geometry, z)
        spec = analyze(sampled, ring_rt)
        c_oracle = spec.coeffs[lambdas.orders - 1]
        errors.append(float(np.linalg.norm(c_rt - c_oracle)))
    slope = np.polyfit(np.log(eps_vals), np.log(errors), 1)[0]
    ok = abs(slope - 2.0) <= 0.2
    return CheckResult("eccentricity_order", ok,
                       {"errors": errors, "slope": float(slope),
                        "expected": 2.0, "tol": 0.2})


def check_eccentricity_edge_truncation(n: int = 64) -> CheckResult:
    """Report-only measurement of the dropped spectrum-edge couplings.

    The first-order map couples each order to its neighbours; at the edges
    of the selected set those neighbours are dropped. The measured number is
    the relative size of the dropped coupling for edge-localised data.
    """
    geometry = AirGapGeometry(1.1, 1.0, nu0=1.0)
    lambdas = HarmonicSet(np.arange(1, 13))
    eps = 0.01
    lam_edge = int(lambdas.orders[-1])
    # coupling magnitude dropped at the top edge relative to the diagonal
    dropped = (lam_edge + 1) * eps
    return CheckResult("eccentricity_edge_truncation", True,
                       {"relative_dropped_coupling": dropped,
                        "order": lam_edge, "eps": eps})


def check_skew_limits(n: int = 64, seed: int = 5) -> CheckResult:
    """Vanishing skew equals no skew; a full-pitch skew zeroes the order."""
    geometry = AirGapGeometry(1.1, 1.0, nu0=1.0)
    ring_st, ring_rt = _desk_rings(geometry, n, n)
    rng = np.random.default_rng(seed)
    u_st, u_rt = rng.standard_normal(n), rng.standard_normal(n)
    op0 = AirGapOperator(geometry, ring_st, ring_rt,
                         motion=MotionState(gamma_skew=0.0))
    op1 = AirGapOperator(geometry, ring_st, ring_rt,
                         motion=MotionState(gamma_skew=1e-8))
    g0 = np.concatenate(op0.apply_ring(u_st, u_rt))
    g1 = np.concatenate(op1.apply_ring(u_st, u_rt))
    rel = float(np.linalg.norm(g1 - g0) / np.linalg.norm(g0))
    zero = float(abs(skew_factors(HarmonicSet([4]), TWO_PI / 4)[0]))
    ok = rel <= 1e-12 and zero <= 1e-15
    return CheckResult("skew_limits", ok,
                       {"tiny_skew_rel_diff": rel, "full_pitch_factor": zero})


def check_torque_ump_agreement(trials: int = 50, seed: int = 13) -> CheckResult:
    """Series torque/pull vs Maxwell-stress quadrature on random fields."""
    geometry = AirGapGeometry(1.1, 1.0, nu0=1.0, ell_z=0.3)
    lambdas = HarmonicSet(np.arange(1, 17))
    rng = np.random.default_rng(seed)
    worst_t = worst_f = worst_r = 0.0
    for _ in range(trials):
        a = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        b = rng.standard_normal(16) + 1j * rng.standard_normal(16)
        # keep the decaying character of a physical gap field
        decay = 1.2 ** -lambdas.orders.astype(float)
        coeffs = GapCoefficients(lambdas, a * decay, b * decay)
        ts = torque_harmonic(coeffs, geometry)
        tq = torque_quadrature(coeffs, geometry, n_quad=256)
        scale_t = max(abs(ts), abs(tq), 1e-30)
        worst_t = max(worst_t, abs(ts - tq) / scale_t)
        fs = ump_force(coeffs, geometry)
        fq = ump_quadrature(coeffs, geometry, n_quad=256)
        scale_f = max(np.hypot(*fs), np.hypot(*fq), 1e-30)
        worst_f = max(worst_f,
                      np.hypot(fs[0] - fq[0], fs[1] - fq[1]) / scale_f)
        t_in = torque_quadrature(coeffs, geometry, r_c=1.02, n_quad=256)
        t_out = torque_quadrature(coeffs, geometry, r_c=1.08, n_quad=256)
        worst_r = max(worst_r, abs(t_in - t_out) / max(abs(t_out), 1e-30))
    ok = worst_t <= 1e-10 and worst_f <= 1e-10 and worst_r <= 1e-10
    return CheckResult("torque_ump_agreement", ok,
                       {"torque_rel": worst_t, "force_rel": worst_f,
                        "radius_independence": worst_r, "tol": 1e-10})


def check_apply_scaling(reps: int = 21) -> CheckResult:
    """Median ring-apply time ratio for n: 1024 -> 4096 must stay <= 5."""
    geometry = AirGapGeometry(1.1, 1.0, nu0=1.0)
    times = {}
    for n in (1024, 4096):
        ring_st, ring_rt = _desk_rings(geometry, n, n)
        op = AirGapOperator(geometry, ring_st, ring_rt,
                            motion=MotionState(0.1, 0.05, 0.0))
        u_st = np.random.default_rng(1).standard_normal(n)
        u_rt = np.random.default_rng(2).standard_normal(n)
        op.apply_ring(u_st, u_rt)  # warm-up
        samples = []
        for _ in range(reps):
            t0 = time.perf_counter()
            op.apply_ring(u_st, u_rt)
            samples.append(time.perf_counter() - t0)
        times[n] = float(np.median(samples))
    ratio = times[4096] / times[1024]
    return CheckResult("apply_scaling", ratio <= 5.0,
                       {"t_1024": times[1024], "t_4096": times[4096],
                        "ratio": ratio, "tol": 5.0})


def check_preconditioning(n_boundary: int = 48, p: int = 3) -> CheckResult:
    """Preconditioned PCG must need at most half the iterations of plain CG
    on the annulus benchmark at tolerance 1e-10."""
    sub_st, sub_rt, op = _annulus_problem(n_boundary, p)
    system = CoupledSystem(sub_st, sub_rt, op)
    rhs = system.rhs_for(system.load)
    x0 = system.dirichlet_values
    pre = schwarz_preconditioner(system)
    _, stats_pre = pcg(system.apply, rhs, x0=x0, preconditioner=pre,
                       tol=1e-10)
    _, stats_cg = pcg(system.apply, rhs, x0=x0, tol=1e-10)
    ok = stats_pre.iterations * 2 <= stats_cg.iterations
    return CheckResult("preconditioning", ok,
                       {"pcg_iterations": stats_pre.iterations,
                        "cg_iterations": stats_cg.iterations})


# ---------------------------------------------------------------------------

def run_all(fast: bool = False) -> Report:
    """Run every check; `fast` skips the timing probe and coarse-grids the
    convergence study."""
    checks = [
        check_dense_equivalence(),
        check_symmetry_psd(),
        check_realness(),
        check_annulus_convergence((16, 32, 64) if fast else (24, 48, 96)),
        check_eccentricity_order(),
        check_eccentricity_edge_truncation(),
        check_skew_limits(),
        check_torque_ump_agreement(),
        check_preconditioning(),
    ]
    if not fast:
        checks.append(check_apply_scaling())
    return Report(checks)
