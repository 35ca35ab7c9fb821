"""Coupled two-subdomain solve: matrix-free PCG with a Schwarz-type
preconditioner and a theta-scheme time stepper for rotor motion.

The system operator is A = blockdiag(beta M + K)_st,rt + K_gap where K_gap is
the matrix-free spectral air-gap coupling. Dirichlet constraints are
eliminated symmetrically per subdomain; interface-ring nodes may not carry
constraints, so elimination never touches the gap coupling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu, spsolve_triangular

from .airgap import AirGapOperator, MotionState, dtn_block
from .errors import ConfigurationError, SolverError
from .fem import FeSubdomain
from .harmonics import HarmonicSpectrum, analyze, synthesize
from .postproc import (ForceTorqueSample, torque_harmonic, ump_force)


# ---------------------------------------------------------------------------
# rotor motion over time

@dataclass
class MotionProfile:
    """Sampled rotor trajectory; linear interpolation between samples.

    The eccentricity path is interpolated in Cartesian components, so a
    straight displacement of the rotor centre between two samples stays a
    straight line regardless of how it cuts across the origin.
    """

    t: np.ndarray
    alpha: np.ndarray
    d_ecc: np.ndarray
    gamma_ecc: np.ndarray
    gamma_skew: float = 0.0

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float).ravel()
        self.alpha = np.asarray(self.alpha, dtype=float).ravel()
        self.d_ecc = np.asarray(self.d_ecc, dtype=float).ravel()
        self.gamma_ecc = np.asarray(self.gamma_ecc, dtype=float).ravel()
        n = len(self.t)
        if n == 0:
            raise ConfigurationError("motion profile needs at least one sample")
        for name in ("alpha", "d_ecc", "gamma_ecc"):
            if len(getattr(self, name)) != n:
                raise ConfigurationError(
                    f"motion profile arrays must share length; {name} differs")
        if n > 1 and np.any(np.diff(self.t) <= 0.0):
            raise ConfigurationError("motion profile times must strictly increase")
        if np.any(self.d_ecc < 0.0):
            raise ConfigurationError("eccentricity magnitude must be >= 0")

    @staticmethod
    def constant_speed(omega: float, t_end: float, n_samples: int = 2,
                       gamma_skew: float = 0.0, d_ecc: float = 0.0,
                       gamma_ecc: float = 0.0) -> "MotionProfile":
        t = np.linspace(0.0, t_end, max(2, n_samples))
        return MotionProfile(t=t, alpha=omega * t,
                             d_ecc=np.full_like(t, d_ecc),
                             gamma_ecc=np.full_like(t, gamma_ecc),
                             gamma_skew=gamma_skew)

    def state_at(self, t: float, rho_rt: float) -> MotionState:
        alpha = float(np.interp(t, self.t, self.alpha))
        ex = float(np.interp(t, self.t, self.d_ecc * np.cos(self.gamma_ecc)))
        ey = float(np.interp(t, self.t, self.d_ecc * np.sin(self.gamma_ecc)))
        eps = complex(ex, ey) / rho_rt
        return MotionState(alpha=alpha, gamma_skew=self.gamma_skew, eps=eps)

    def displacement_at(self, t: float) -> tuple[float, float]:
        """(d_ecc, gamma_ecc) at time t, from the Cartesian interpolation."""
        ex = float(np.interp(t, self.t, self.d_ecc * np.cos(self.gamma_ecc)))
        ey = float(np.interp(t, self.t, self.d_ecc * np.sin(self.gamma_ecc)))
        return math.hypot(ex, ey), math.atan2(ey, ex)


# ---------------------------------------------------------------------------
# coupled operator with eliminated constraints

class CoupledSystem:
    """beta M + K per subdomain plus the air-gap coupling, with Dirichlet
    constraints eliminated. Vectors are concatenated [u_st; u_rt]."""

    def __init__(self, sub_st: FeSubdomain, sub_rt: FeSubdomain,
                 operator: AirGapOperator, beta: float = 0.0):
        self.sub_st = sub_st
        self.sub_rt = sub_rt
        self.operator = operator
        self.beta = float(beta)
        self.dim = sub_st.dim + sub_rt.dim
        self._split = sub_st.dim

        self._a_raw = []
        self._a_elim = []
        self._mask = []
        self._u_d = []
        for sub in (sub_st, sub_rt):
            a = (sub.K + beta * sub.M).tocsr()
            mask = np.ones(sub.dim)
            u_d = np.zeros(sub.dim)
            if sub.dirichlet:
                idx = np.fromiter(sub.dirichlet.keys(), dtype=np.int64)
                vals = np.fromiter(sub.dirichlet.values(), dtype=float)
                mask[idx] = 0.0
                u_d[idx] = vals
                d_mask = sp.diags(mask)
                a_el = (d_mask @ a @ d_mask + sp.diags(1.0 - mask)).tocsr()
            else:
                a_el = a
            self._a_raw.append(a)
            self._a_elim.append(a_el)
            self._mask.append(mask)
            self._u_d.append(u_d)

    def split(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return x[:self._split], x[self._split:]

    def join(self, x_st: np.ndarray, x_rt: np.ndarray) -> np.ndarray:
        return np.concatenate([x_st, x_rt])

    @property
    def dirichlet_values(self) -> np.ndarray:
        return self.join(self._u_d[0], self._u_d[1])

    def apply(self, x: np.ndarray) -> np.ndarray:
        """y = A_eliminated x. The gap coupling reads and writes only ring
        nodes, which are never constrained, so it needs no masking."""
        x_st, x_rt = self.split(x)
        g_st, g_rt = self.operator.apply(x_st, x_rt)
        y_st = self._a_elim[0] @ x_st + self._mask[0] * g_st
        y_rt = self._a_elim[1] @ x_rt + self._mask[1] * g_rt
        return self.join(y_st, y_rt)

    def apply_unconstrained(self, x: np.ndarray) -> np.ndarray:
        """y = A x without constraint elimination (for time-stepping RHS)."""
        x_st, x_rt = self.split(x)
        g_st, g_rt = self.operator.apply(x_st, x_rt)
        return self.join(self._a_raw[0] @ x_st + g_st,
                         self._a_raw[1] @ x_rt + g_rt)

    def rhs_for(self, f: np.ndarray) -> np.ndarray:
        """Eliminated right-hand side: constrained values moved over and the
        constrained entries set to the prescribed values."""
        f_st, f_rt = self.split(f)
        ud_st, ud_rt = self._u_d
        g_st, g_rt = self.operator.apply(ud_st, ud_rt)
        r_st = self._mask[0] * (f_st - self._a_raw[0] @ ud_st - g_st)
        r_rt = self._mask[1] * (f_rt - self._a_raw[1] @ ud_rt - g_rt)
        r_st += (1.0 - self._mask[0]) * ud_st
        r_rt += (1.0 - self._mask[1]) * ud_rt
        return self.join(r_st, r_rt)

    @property
    def load(self) -> np.ndarray:
        return self.join(self.sub_st.f, self.sub_rt.f)


def apply_system(system: CoupledSystem, x: np.ndarray) -> np.ndarray:
    return system.apply(x)


# ---------------------------------------------------------------------------
# preconditioned conjugate gradients

@dataclass
class SolveStats:
    iterations: int
    residuals: list = field(default_factory=list)
    converged: bool = False

    @property
    def final_residual(self) -> float:
        return self.residuals[-1] if self.residuals else float("nan")


def pcg(apply_a, b: np.ndarray, x0: np.ndarray | None = None,
        preconditioner=None, tol: float = 1e-10,
        maxiter: int | None = None) -> tuple[np.ndarray, SolveStats]:
    """Preconditioned conjugate gradients on a matrix-free SPD operator.

    Convergence is ||r||_2 <= tol * ||b||_2. A nonpositive preconditioned
    inner product aborts with a diagnostic: for this system it almost always
    means a sign error in the surface-current convention or a missing
    Dirichlet constraint leaving a singular subdomain.
    """
    b = np.asarray(b, dtype=float)
    n = len(b)
    if maxiter is None:
        maxiter = 10 * n
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - apply_a(x)
    bnorm = float(np.linalg.norm(b)) or 1.0
    stats = SolveStats(iterations=0, residuals=[float(np.linalg.norm(r))])
    if stats.residuals[0] <= tol * bnorm:
        stats.converged = True
        return x, stats
    z = preconditioner(r) if preconditioner is not None else r
    p = z.copy()
    rz = float(r @ z)
    if rz <= 0.0:
        raise SolverError(
            "preconditioned residual product is not positive at start; the "
            "operator or preconditioner is not positive definite (check the "
            "surface-current sign convention and that every subdomain has a "
            "Dirichlet constraint)")
    for k in range(1, maxiter + 1):
        ap = apply_a(p)
        pap = float(p @ ap)
        if pap <= 0.0:
            raise SolverError(
                f"curvature p^T A p = {pap:.3e} <= 0 at iteration {k}; the "
                "coupled operator is not positive definite (check the "
                "surface-current sign convention and that every subdomain "
                "has a Dirichlet constraint)")
        alpha = rz / pap
        x += alpha * p
        r -= alpha * ap
        rnorm = float(np.linalg.norm(r))
        stats.residuals.append(rnorm)
        stats.iterations = k
        if rnorm <= tol * bnorm:
            stats.converged = True
            return x, stats
        z = preconditioner(r) if preconditioner is not None else r
        rz_new = float(r @ z)
        if rz_new <= 0.0:
            raise SolverError(
                f"preconditioned residual product {rz_new:.3e} <= 0 at "
                f"iteration {k}; the preconditioner lost positive "
                "definiteness")
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(
        f"conjugate gradients did not reach tol={tol:.1e} within {maxiter} "
        f"iterations (relative residual {stats.residuals[-1] / bnorm:.3e})")


# ---------------------------------------------------------------------------
# additive Schwarz preconditioner

def _sgs_factors(a_nn: sp.csr_matrix):
    lower = sp.tril(a_nn, format="csr")
    upper = sp.triu(a_nn, format="csr")
    diag = a_nn.diagonal()
    if np.any(diag <= 0.0):
        raise SolverError("nonpositive diagonal in an FE block; the mesh or "
                          "materials are degenerate")
    return lower, upper, diag


def _sgs_apply(lower, upper, diag, a_nn, r, sweeps):
    """Iterated symmetric Gauss-Seidel: z ~ A_nn^-1 r, symmetric in r."""
    y = spsolve_triangular(lower, r, lower=True)
    z = spsolve_triangular(upper, diag * y, lower=False)
    for _ in range(sweeps - 1):
        res = r - a_nn @ z
        y = spsolve_triangular(lower, res, lower=True)
        z = z + spsolve_triangular(upper, diag * y, lower=False)
    return z


def build_interior_solvers(system: CoupledSystem, sweeps: int = 2,
                           interior: str = "direct") -> list:
    """Per-subdomain approximate solvers for the non-ring FE blocks;
    reusable across motion states (the FE matrices do not move)."""
    sides = []
    for i, sub in enumerate((system.sub_st, system.sub_rt)):
        ring = sub.ring
        non_ring = np.setdiff1d(np.arange(sub.dim), ring.node_indices)
        a = system._a_elim[i]
        a_nn = a[non_ring][:, non_ring].tocsr()
        if not len(non_ring):
            solve_nn = None
        elif interior == "direct":
            lu = splu(a_nn.tocsc())
            solve_nn = lu.solve
        else:
            lower, upper, diag = _sgs_factors(a_nn)
            solve_nn = (lambda r, lo=lower, up=upper, d=diag, m=a_nn:
                        _sgs_apply(lo, up, d, m, r, sweeps))
        delta = float(np.mean(a.diagonal()[ring.node_indices]))
        sides.append((ring, non_ring, solve_nn, delta))
    return sides


def schwarz_preconditioner(system: CoupledSystem, sweeps: int = 2,
                           interior: str = "direct",
                           interior_solvers: list | None = None):
    """Additive preconditioner: approximate solves on the non-ring FE blocks
    plus a per-harmonic 2x2 spectral solve on the ring unknowns.

    interior = "sgs" uses symmetric Gauss-Seidel sweeps on each FE block;
    "direct" uses an exact sparse factorization (classical Schwarz with
    exact subdomain solves — more setup, far fewer iterations).

    The ring solve inverts the gap coupling block augmented by the mean FE
    diagonal at the ring nodes. The augmentation matters twice over: it
    keeps the low orders (where the gap block is nearly singular along the
    continuity mode) from being amplified, and it keeps the map positive
    definite on components the gap block annihilates (order 0, Nyquist,
    unselected or skew-annihilated orders). The result is symmetric positive
    definite, as conjugate gradients requires.
    """
    if sweeps < 1:
        raise ConfigurationError("need at least one smoothing sweep")
    if interior not in ("sgs", "direct"):
        raise ConfigurationError("interior must be 'sgs' or 'direct'")
    op = system.operator
    sides = interior_solvers or build_interior_solvers(system, sweeps,
                                                       interior)

    # per-order Hermitian 2x2 in spectral coordinates: D^H B D + n*delta,
    # with B the scaled symmetric gap block and D = diag(s_st, s_rt q)
    ring_st, ring_rt = sides[0][0], sides[1][0]
    delta_st, delta_rt = sides[0][3], sides[1][3]
    orders = op.lambdas.orders
    L = len(orders)
    h11 = np.empty(L)
    h22 = np.empty(L)
    h12 = np.empty(L, dtype=complex)
    for k, lam in enumerate(orders):
        blk = dtn_block(int(lam), op.geometry)
        h11[k] = op._s_st[k] ** 2 * blk[0, 0]
        h22[k] = abs(op._q_rt[k]) ** 2 * op._s_rt[k] ** 2 * blk[1, 1]
        h12[k] = op._s_st[k] * op._s_rt[k] * op._q_rt[k] * blk[0, 1]
    h11 += ring_st.n * delta_st
    h22 += ring_rt.n * delta_rt
    det = h11 * h22 - np.abs(h12) ** 2

    def ring_solve(rr_st, rr_rt):
        cs = analyze(rr_st, ring_st)
        cr = analyze(rr_rt, ring_rt)
        rs = cs.coeffs[orders - 1] * ring_st.n
        rr = cr.coeffs[orders - 1] * ring_rt.n
        zs = (h22 * rs - h12 * rr) / det
        zr = (-np.conj(h12) * rs + h11 * rr) / det
        # selected orders get the 2x2 solve; everything else (c0, Nyquist,
        # unselected) is scaled by the FE diagonal alone
        out_st = synthesize(
            HarmonicSpectrum(ring_st.n, ring_st.theta0,
                             cs.c0 / delta_st,
                             _fill(cs.coeffs / delta_st, zs, ring_st.n)),
            ring_st)
        out_rt = synthesize(
            HarmonicSpectrum(ring_rt.n, ring_rt.theta0,
                             cr.c0 / delta_rt,
                             _fill(cr.coeffs / delta_rt, zr, ring_rt.n)),
            ring_rt)
        # Nyquist components are invisible to analyze/synthesize; add them
        # back with the FE-diagonal scaling so the map stays definite
        out_st += _nyquist_part(rr_st) / delta_st
        out_rt += _nyquist_part(rr_rt) / delta_rt
        return out_st, out_rt

    def _fill(base, z, n):
        coeffs = base.copy()
        coeffs[orders - 1] = z
        return coeffs

    def apply(r: np.ndarray) -> np.ndarray:
        r_st, r_rt = system.split(r)
        z_st = np.zeros_like(r_st)
        z_rt = np.zeros_like(r_rt)
        outs = (z_st, z_rt)
        rs = (r_st, r_rt)
        for i, (ring, non_ring, solve_nn, _) in enumerate(sides):
            if solve_nn is not None:
                outs[i][non_ring] = solve_nn(rs[i][non_ring])
        g_st, g_rt = ring_solve(r_st[ring_st.node_indices],
                                r_rt[ring_rt.node_indices])
        z_st[ring_st.node_indices] = g_st
        z_rt[ring_rt.node_indices] = g_rt
        return system.join(z_st, z_rt)

    return apply


def _nyquist_part(samples: np.ndarray) -> np.ndarray:
    """Alternating-sign component of an even-length ring vector."""
    n = len(samples)
    signs = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    return signs * float(signs @ samples) / n


# ---------------------------------------------------------------------------
# drivers

def _sample_from_state(t, motion: MotionState, rho_rt, torque, fx, fy,
                       iterations) -> ForceTorqueSample:
    d = abs(motion.eps) * rho_rt
    gamma = math.atan2(motion.eps.imag, motion.eps.real) if d > 0 else 0.0
    return ForceTorqueSample(t=t, alpha=motion.alpha, d_ecc=d,
                             gamma_ecc=gamma, torque=torque, fx=fx, fy=fy,
                             iterations=iterations)


def solve_static(sub_st: FeSubdomain, sub_rt: FeSubdomain,
                 operator: AirGapOperator,
                 motion: MotionState | None = None, tol: float = 1e-10,
                 maxiter: int | None = None, sweeps: int = 2,
                 interior: str = "direct"):
    """Magnetostatic solve at one rotor position.

    Returns (u_st, u_rt, sample, stats) with the torque/pull sample
    evaluated from the gap harmonics of the solution.
    """
    if motion is not None:
        operator.set_motion(motion)
    system = CoupledSystem(sub_st, sub_rt, operator, beta=0.0)
    rhs = system.rhs_for(system.load)
    pre = schwarz_preconditioner(system, sweeps=sweeps, interior=interior)
    x, stats = pcg(system.apply, rhs, x0=system.dirichlet_values,
                   preconditioner=pre, tol=tol, maxiter=maxiter)
    u_st, u_rt = system.split(x)
    coeffs = operator.gap_coefficients_from_rings(
        u_st[sub_st.ring.node_indices], u_rt[sub_rt.ring.node_indices])
    torque = torque_harmonic(coeffs, operator.geometry)
    fx, fy = ump_force(coeffs, operator.geometry)
    sample = _sample_from_state(0.0, operator.motion, operator.geometry.rho_rt,
                                torque, fx, fy, stats.iterations)
    return u_st, u_rt, sample, stats


@dataclass
class TransientResult:
    samples: list
    u_st: np.ndarray
    u_rt: np.ndarray
    snapshots: list
    total_iterations: int


def solve_transient(sub_st: FeSubdomain, sub_rt: FeSubdomain,
                    operator: AirGapOperator, profile: MotionProfile,
                    dt: float, n_steps: int, theta: float = 1.0,
                    t0: float = 0.0, tol: float = 1e-10,
                    maxiter: int | None = None, sweeps: int = 2,
                    interior: str = "direct", snapshot_every: int = 0,
                    u0: tuple[np.ndarray, np.ndarray] | None = None
                    ) -> TransientResult:
    """Theta-scheme stepping of M du/dt + (K + K_gap(t)) u = f.

    theta = 1 is implicit Euler; theta = 0.5 is the trapezoidal rule. The
    load is held constant; motion enters through the gap operator, which is
    re-pointed at each step with no remeshing. Each step warm-starts the
    conjugate-gradient solve from the previous solution.
    """
    if not 0.5 <= theta <= 1.0:
        raise ConfigurationError("theta must lie in [0.5, 1] for stability")
    if dt <= 0.0 or n_steps < 1:
        raise ConfigurationError("need dt > 0 and n_steps >= 1")
    rho = operator.geometry.rho_rt
    beta = 1.0 / (theta * dt)

    if u0 is None:
        u_st = np.zeros(sub_st.dim)
        u_rt = np.zeros(sub_rt.dim)
    else:
        u_st = np.array(u0[0], dtype=float)
        u_rt = np.array(u0[1], dtype=float)

    mass = sp.block_diag([sub_st.M, sub_rt.M]).tocsr()
    f_const = np.concatenate([sub_st.f, sub_rt.f])
    samples = []
    snapshots = []
    total_iters = 0
    x = np.concatenate([u_st, u_rt])

    # FE matrices never change between steps: build the coupled systems and
    # factor the interior blocks once, refresh only the spectral ring data
    system = CoupledSystem(sub_st, sub_rt, operator, beta=beta)
    system_stiff = CoupledSystem(sub_st, sub_rt, operator, beta=0.0)
    solvers = build_interior_solvers(system, sweeps, interior)

    for step in range(1, n_steps + 1):
        t_old = t0 + (step - 1) * dt
        t_new = t0 + step * dt
        # explicit part at the old motion state
        if theta < 1.0:
            operator.set_motion(profile.state_at(t_old, rho))
            a_old_x = system_stiff.apply_unconstrained(x)
        else:
            a_old_x = 0.0
        rhs_eq = (f_const / theta + beta * (mass @ x)
                  - (1.0 - theta) / theta * a_old_x)
        # implicit solve at the new motion state
        motion = profile.state_at(t_new, rho)
        operator.set_motion(motion)
        rhs = system.rhs_for(rhs_eq)
        pre = schwarz_preconditioner(system, sweeps=sweeps, interior=interior,
                                     interior_solvers=solvers)
        try:
            x, stats = pcg(system.apply, rhs, x0=x, preconditioner=pre,
                           tol=tol, maxiter=maxiter)
        except SolverError as exc:
            raise SolverError(
                f"step {step} (t={t_new:.6g}): {exc}") from exc
        total_iters += stats.iterations

        u_st, u_rt = system.split(x)
        coeffs = operator.gap_coefficients_from_rings(
            u_st[sub_st.ring.node_indices], u_rt[sub_rt.ring.node_indices])
        torque = torque_harmonic(coeffs, operator.geometry)
        fx, fy = ump_force(coeffs, operator.geometry)
        samples.append(_sample_from_state(t_new, motion, rho, torque, fx, fy,
                                          stats.iterations))
        if snapshot_every and step % snapshot_every == 0:
            snapshots.append((t_new, u_st.copy(), u_rt.copy()))

    return TransientResult(samples=samples, u_st=u_st, u_rt=u_rt,
                           snapshots=snapshots, total_iterations=total_iters)
