"""Spectral air-gap element coupling two FE interface rings.

The gap field between the rotor ring (radius rho_rt) and the stator ring
(radius r_st) is represented per harmonic order by two complex coefficients
(a, b) of the analytic annulus solution. The element maps ring potentials to
ring surface currents through per-order 2x2 Dirichlet-to-Neumann blocks;
rotation enters as phase factors, skew as sinc factors, and small rotor
eccentricity as first-order couplings between adjacent orders, turning the
block-diagonal maps into block-tridiagonal ones.

Orientation and measure convention: the nodal surface current is the
tangential field strength at the node times the nodal arc length 2*pi*r/n,
with a minus sign on the stator ring (outer, inward normal) and a plus sign
on the rotor ring (inner, outward normal). Under this convention the scaled
per-order block

    dtn_block(lam) = diag(-2 pi r_st, +2 pi rho_rt) . G_lam . T_lam^{-1}

is symmetric positive definite, so the assembled operator is symmetric PSD
and the quadratic form u^T K_ag u reproduces the analytic gap field energy.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConfigurationError, InternalError, InvalidGeometryError
from .fem import prolongate, restrict
from .harmonics import (HarmonicSet, analyze, interface_correction, max_order,
                        select)
from .mesh import InterfaceRing

TWO_PI = 2.0 * math.pi

#: reluctivity of vacuum, m/H
NU0 = 1.0 / (4.0e-7 * math.pi)

_SKEW_ZERO = 1e-12  # below this a skew factor annihilates the harmonic


@dataclass(frozen=True)
class AirGapGeometry:
    """Gap annulus between the rotor and stator interface circles."""

    r_st: float
    rho_rt: float
    nu0: float = NU0
    ell_z: float = 1.0

    def __post_init__(self):
        if self.rho_rt <= 0.0:
            raise InvalidGeometryError(f"rho_rt must be positive, got {self.rho_rt}")
        if self.r_st <= self.rho_rt:
            raise InvalidGeometryError(
                f"need r_st > rho_rt for a positive radial gap, got "
                f"r_st={self.r_st}, rho_rt={self.rho_rt}")
        if self.nu0 <= 0.0:
            raise InvalidGeometryError("nu0 must be positive")

    @property
    def xi(self) -> float:
        """Air-gap radius ratio r_st / rho_rt, strictly > 1."""
        return self.r_st / self.rho_rt


@dataclass(frozen=True)
class MotionState:
    """Rotor position: rotation angle, skew angle and complex relative
    eccentricity eps = (d_ecc / rho_rt) * exp(1j * gamma_ecc)."""

    alpha: float = 0.0
    gamma_skew: float = 0.0
    eps: complex = 0.0j

    def __post_init__(self):
        mag = abs(self.eps)
        if mag > 0.2:
            raise ConfigurationError(
                f"relative eccentricity {mag:.3g} exceeds the first-order "
                "validity bound 0.2")
        if mag > 0.05:
            warnings.warn(
                f"relative eccentricity {mag:.3g} > 0.05; first-order "
                "accuracy degrades", stacklevel=2)


@dataclass
class GapCoefficients:
    """Per-order gap field coefficients (a, b), Wb/m, for orders in Lambda."""

    lambdas: HarmonicSet
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=complex).ravel()
        self.b = np.asarray(self.b, dtype=complex).ravel()
        if len(self.a) != len(self.lambdas) or len(self.b) != len(self.lambdas):
            raise InternalError("coefficient arrays must match |Lambda|")
        if not (np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.b))):
            raise InternalError("non-finite gap coefficients")


# ---------------------------------------------------------------------------
# per-order blocks

def t_block(lam: int, xi: float) -> np.ndarray:
    """Potential map [a; b] -> boundary coefficients [c_st; c_rt]."""
    if lam < 1:
        raise ConfigurationError("order 0 is excluded from the air-gap element")
    if xi <= 1.0:
        raise InvalidGeometryError(f"xi must exceed 1, got {xi}")
    return np.array([[xi ** lam, xi ** (-lam)], [1.0, 1.0]])


def g_block(lam: int, geometry: AirGapGeometry) -> np.ndarray:
    """Field-strength map [a; b] -> tangential H coefficients at both radii."""
    if lam < 1:
        raise ConfigurationError("order 0 is excluded from the air-gap element")
    xi = geometry.xi
    s = geometry.nu0 * lam
    return np.array([
        [-s * xi ** lam / geometry.r_st, s * xi ** (-lam) / geometry.r_st],
        [-s / geometry.rho_rt, s / geometry.rho_rt],
    ])


def dtn_block(lam: int, geometry: AirGapGeometry) -> np.ndarray:
    """Measure/orientation-scaled spectral DtN block, symmetric PD.

    Closed form 2*pi*nu0*lam / (xi^lam - xi^-lam) *
    [[xi^lam + xi^-lam, -2], [-2, xi^lam + xi^-lam]].
    """
    xi = geometry.xi
    if lam < 1:
        raise ConfigurationError("order 0 is excluded from the air-gap element")
    if xi <= 1.0:
        raise InvalidGeometryError(f"xi must exceed 1, got {xi}")
    p, q = xi ** lam, xi ** (-lam)
    scale = TWO_PI * geometry.nu0 * lam / (p - q)
    return scale * np.array([[p + q, -2.0], [-2.0, p + q]])


def rotation_factors(lambdas: HarmonicSet, alpha: float) -> np.ndarray:
    """Diagonal phasors exp(1j * lam * alpha) mapping rotor-frame harmonic
    coefficients into the standstill frame."""
    return np.exp(1j * lambdas.orders * alpha)


def skew_factors(lambdas: HarmonicSet, gamma_skew: float) -> np.ndarray:
    """Per-order skew attenuation 2 sin(lam gamma / 2) / (lam gamma)."""
    return np.sinc(lambdas.orders * gamma_skew / TWO_PI)


# ---------------------------------------------------------------------------
# eccentric block-tridiagonal maps
#
# Unknown ordering [a_1, b_1, a_2, b_2, ...] over sorted Lambda; row ordering
# [st_1, rt_1, st_2, rt_2, ...]. Stator rows are the concentric ones; rotor
# rows gain first-order couplings to a_{lam+1} and b_{lam-1} where those
# orders are present in Lambda (couplings off the spectrum edge are dropped).

_BANDS = (2, 1)  # (lower, upper) bandwidth of the interleaved layout


def _banded_matvec(ab: np.ndarray, x: np.ndarray) -> np.ndarray:
    """y = A x for A stored in solve_banded layout with one upper and two
    lower bands."""
    y = ab[1] * x  # diagonal
    y[:-1] += ab[0, 1:] * x[1:]      # upper 1
    y[1:] += ab[2, :-1] * x[:-1]     # lower 1
    y[2:] += ab[3, :-2] * x[:-2]     # lower 2
    return y


def _banded_matvec_t(ab: np.ndarray, x: np.ndarray) -> np.ndarray:
    """y = A^T x for the same storage layout."""
    y = ab[1] * x
    y[1:] += ab[0, 1:] * x[:-1]
    y[:-1] += ab[2, :-1] * x[1:]
    y[:-2] += ab[3, :-2] * x[2:]
    return y


def _banded_transpose(ab: np.ndarray) -> np.ndarray:
    """Banded storage of A^T (two upper, one lower band)."""
    m = ab.shape[1]
    out = np.zeros_like(ab)
    out[0, 2:] = ab[3, :-2]   # upper 2 of A^T = lower 2 of A
    out[1, 1:] = ab[2, :-1]   # upper 1 of A^T = lower 1 of A
    out[2] = ab[1]            # diagonal
    out[3, :-1] = ab[0, 1:]   # lower 1 of A^T = upper 1 of A
    return out


class EccentricBlocks:
    """Banded T_eps and G_eps for one motion state."""

    def __init__(self, lambdas: HarmonicSet, geometry: AirGapGeometry,
                 eps: complex):
        orders = lambdas.orders
        L = len(orders)
        m = 2 * L
        xi = geometry.xi
        nu0 = geometry.nu0
        rho = geometry.rho_rt
        r_st = geometry.r_st
        ec = np.conj(eps)

        t_ab = np.zeros((4, m), dtype=complex)
        g_ab = np.zeros((4, m), dtype=complex)
        lam = orders.astype(float)
        p, q = xi ** lam, xi ** (-lam)

        st = 2 * np.arange(L)
        rt = st + 1
        # stator rows: diag holds a-column, upper-1 the b-column
        t_ab[1, st] = p
        t_ab[0, rt] = q          # (row st_i, col b_i = st_i + 1)
        g_ab[1, st] = -nu0 * lam * p / r_st
        g_ab[0, rt] = nu0 * lam * q / r_st
        # rotor rows: lower-1 the a-column, diag the b-column
        t_ab[2, st] = 1.0
        t_ab[1, rt] = 1.0
        g_ab[2, st] = -nu0 * lam / rho
        g_ab[1, rt] = nu0 * lam / rho

        # first-order couplings, only between consecutive orders in Lambda
        for i in range(L):
            lam_i = int(orders[i])
            if i + 1 < L and orders[i + 1] == lam_i + 1:
                cpl = (lam_i + 1) * ec
                t_ab[0, rt[i] + 1] += cpl                        # a_{lam+1}
                g_ab[0, rt[i] + 1] += -nu0 * lam_i / rho * cpl
            if i > 0 and orders[i - 1] == lam_i - 1:
                cpl = (lam_i - 1) * eps
                t_ab[3, rt[i] - 2] += -cpl                       # b_{lam-1}
                g_ab[3, rt[i] - 2] += -nu0 * lam_i / rho * cpl
        self.t_ab = t_ab
        self.g_ab = g_ab

    def t_matvec(self, x):
        return _banded_matvec(self.t_ab, x)

    def g_matvec(self, x):
        return _banded_matvec(self.g_ab, x)

    def t_solve(self, rhs):
        return scipy.linalg.solve_banded(_BANDS, self.t_ab, rhs)

    def g_solve(self, rhs):
        return scipy.linalg.solve_banded(_BANDS, self.g_ab, rhs)

    def g_matvec_adjoint(self, x):
        """y = G^H x."""
        return np.conj(_banded_matvec_t(self.g_ab, np.conj(x)))

    def t_solve_adjoint(self, rhs):
        """v with T^H v = rhs."""
        ab_t = _banded_transpose(self.t_ab)
        return np.conj(scipy.linalg.solve_banded(
            (_BANDS[1], _BANDS[0]), ab_t, np.conj(rhs)))


def eccentric_blocks(lambdas: HarmonicSet, geometry: AirGapGeometry,
                     eps: complex) -> EccentricBlocks:
    return EccentricBlocks(lambdas, geometry, eps)


# ---------------------------------------------------------------------------

class AirGapOperator:
    """Matrix-free air-gap stiffness operator between two interface rings.

    Immutable between set_motion calls; apply and apply_approximate_inverse
    only read cached state, so concurrent applications at a fixed motion
    state are safe.
    """

    def __init__(self, geometry: AirGapGeometry, ring_st: InterfaceRing,
                 ring_rt: InterfaceRing, lambdas: HarmonicSet | None = None,
                 motion: MotionState | None = None, sint: bool = True):
        if not math.isclose(ring_st.radius, geometry.r_st, rel_tol=1e-12):
            raise InvalidGeometryError("stator ring radius != geometry r_st")
        if not math.isclose(ring_rt.radius, geometry.rho_rt, rel_tol=1e-12):
            raise InvalidGeometryError("rotor ring radius != geometry rho_rt")
        self.geometry = geometry
        self.ring_st = ring_st
        self.ring_rt = ring_rt
        if lambdas is None:
            lambdas = HarmonicSet.common(ring_st.n, ring_rt.n)
        lambdas.validate_for(ring_st.n, ring_rt.n)
        self.lambdas = lambdas
        self.sint = sint
        self.last_imag_residue = 0.0

        lam = lambdas.orders.astype(float)
        self._s_st = interface_correction(lam, ring_st.n) if sint \
            else np.ones_like(lam)
        self._s_rt = interface_correction(lam, ring_rt.n) if sint \
            else np.ones_like(lam)
        # per-node arc measure times n, i.e. the full circumference
        self._w_st = TWO_PI * geometry.r_st / ring_st.n
        self._w_rt = TWO_PI * geometry.rho_rt / ring_rt.n

        # concentric true-H DtN entries h = (G T^-1) c, per order
        xi = geometry.xi
        p, q = xi ** lam, xi ** (-lam)
        det = p - q
        nu_l = geometry.nu0 * lam
        # G T^-1 = nu0 lam / det * [[-(p+q)/r_st, 2/r_st], [-2/rho, (p+q)/rho]]
        self._gt11 = -nu_l * (p + q) / (det * geometry.r_st)
        self._gt12 = 2.0 * nu_l / (det * geometry.r_st)
        self._gt21 = -2.0 * nu_l / (det * geometry.rho_rt)
        self._gt22 = nu_l * (p + q) / (det * geometry.rho_rt)

        self.set_motion(motion or MotionState())

    # -- motion ------------------------------------------------------------

    def set_motion(self, motion: MotionState):
        """Exclusive update of the rotor position; rebuilds cached factors."""
        self.motion = motion
        lam = self.lambdas.orders
        skew = skew_factors(self.lambdas, motion.gamma_skew)
        self._q_rt = skew * np.exp(1j * lam * motion.alpha)
        self._ecc = (eccentric_blocks(self.lambdas, self.geometry, motion.eps)
                     if motion.eps != 0.0 else None)

    @property
    def alive_mask(self) -> np.ndarray:
        """Selected orders not annihilated by a skew-factor zero."""
        return np.abs(self._q_rt) > _SKEW_ZERO

    # -- spectral helpers --------------------------------------------------

    def _analyze_side(self, ut, ring, s_corr):
        spec = analyze(ut, ring)
        return select(spec, self.lambdas) * s_corr

    def _synthesize_side(self, d, ring, s_corr):
        # full conjugate-symmetric synthesis to observe the imaginary residue
        n = ring.n
        lmax = max_order(n)
        coeffs = np.zeros(lmax, dtype=complex)
        coeffs[self.lambdas.orders - 1] = d * s_corr
        lamfull = np.arange(1, lmax + 1)
        full = np.zeros(n, dtype=complex)
        shifted = coeffs * np.exp(-1j * lamfull * ring.theta0)
        full[1:lmax + 1] = shifted
        full[n - lmax:] = np.conj(shifted[::-1])
        out = np.fft.fft(full)
        scale = float(np.max(np.abs(out.real))) or 1.0
        residue = float(np.max(np.abs(out.imag))) / scale
        self.last_imag_residue = max(self.last_imag_residue, residue)
        return out.real

    def _dtn(self, cs, cr):
        """True tangential-H coefficients at both radii from potentials."""
        if self._ecc is None:
            hs = self._gt11 * cs + self._gt12 * cr
            hr = self._gt21 * cs + self._gt22 * cr
            return hs, hr
        c_vec = np.empty(2 * len(self.lambdas), dtype=complex)
        c_vec[0::2] = cs
        c_vec[1::2] = cr
        w = self._ecc.t_solve(c_vec)
        h = self._ecc.g_matvec(w)
        return h[0::2], h[1::2]

    def _dtn_inverse(self, hs, hr):
        """Potential coefficients from true tangential-H coefficients."""
        if self._ecc is None:
            det = self._gt11 * self._gt22 - self._gt12 * self._gt21
            cs = (self._gt22 * hs - self._gt12 * hr) / det
            cr = (-self._gt21 * hs + self._gt11 * hr) / det
            return cs, cr
        h_vec = np.empty(2 * len(self.lambdas), dtype=complex)
        h_vec[0::2] = hs
        h_vec[1::2] = hr
        w = self._ecc.g_solve(h_vec)
        c = self._ecc.t_matvec(w)
        return c[0::2], c[1::2]

    # -- application -------------------------------------------------------

    def apply_ring(self, ut_st: np.ndarray, ut_rt: np.ndarray):
        """Ring potentials -> ring surface currents (the dense block's action)."""
        if len(ut_st) != self.ring_st.n or len(ut_rt) != self.ring_rt.n:
            raise InternalError("ring vector length mismatch")
        self.last_imag_residue = 0.0
        us = self._analyze_side(ut_st, self.ring_st, 1.0)
        ur = self._analyze_side(ut_rt, self.ring_rt, 1.0)
        q = self._q_rt
        cs = self._s_st * us
        cr = self._s_rt * q * ur
        hs, hr = self._dtn(cs, cr)
        g_st = -self._w_st * self._s_st * hs
        g_rt = self._w_rt * self._s_rt * np.conj(q) * hr
        if self._ecc is not None:
            # The first-order eccentric map is symmetric only up to O(eps^2).
            # Average it with its adjoint: same accuracy order, but exactly
            # symmetric, which the conjugate-gradient solver requires.
            n_st, n_rt = self.ring_st.n, self.ring_rt.n
            y = np.empty(2 * len(self.lambdas), dtype=complex)
            y[0::2] = -self._w_st * self._s_st * n_st * us
            y[1::2] = self._w_rt * self._s_rt * n_rt * q * ur
            v = self._ecc.t_solve_adjoint(self._ecc.g_matvec_adjoint(y))
            g_st = 0.5 * (g_st + self._s_st * v[0::2] / n_st)
            g_rt = 0.5 * (g_rt + np.conj(q) * self._s_rt * v[1::2] / n_rt)
        gt_st = self._synthesize_side(g_st, self.ring_st, 1.0)
        gt_rt = self._synthesize_side(g_rt, self.ring_rt, 1.0)
        return gt_st, gt_rt

    def apply(self, u_st: np.ndarray, u_rt: np.ndarray):
        """Subdomain potentials -> subdomain surface-current vectors."""
        gt_st, gt_rt = self.apply_ring(restrict(u_st, self.ring_st),
                                       restrict(u_rt, self.ring_rt))
        return (prolongate(gt_st, self.ring_st, len(u_st)),
                prolongate(gt_rt, self.ring_rt, len(u_rt)))

    def apply_approximate_inverse_ring(self, gt_st, gt_rt):
        """Exact inverse of apply_ring on the selected-harmonic subspace.

        Order 0, unselected orders and skew-annihilated orders map to zero.
        """
        if len(gt_st) != self.ring_st.n or len(gt_rt) != self.ring_rt.n:
            raise InternalError("ring vector length mismatch")
        ds = self._analyze_side(gt_st, self.ring_st, 1.0 / self._s_st)
        dr = self._analyze_side(gt_rt, self.ring_rt, 1.0 / self._s_rt)
        # skew-annihilated orders are treated like unselected ones: zeroed on
        # both sides, which keeps the map symmetric
        alive = np.abs(self._q_rt) > _SKEW_ZERO
        qc = np.where(alive, np.conj(self._q_rt), 1.0)
        hs = np.where(alive, ds / (-self._w_st), 0.0)
        hr = np.where(alive, dr / (self._w_rt * qc), 0.0)
        cs, cr = self._dtn_inverse(hs, hr)
        cs = np.where(alive, cs, 0.0)
        cr = np.where(alive, cr / np.where(alive, self._q_rt, 1.0), 0.0)
        ut_st = self._synthesize_side(cs, self.ring_st, 1.0 / self._s_st)
        ut_rt = self._synthesize_side(cr, self.ring_rt, 1.0 / self._s_rt)
        return ut_st, ut_rt

    def apply_approximate_inverse(self, g_st: np.ndarray, g_rt: np.ndarray):
        ut_st, ut_rt = self.apply_approximate_inverse_ring(
            restrict(g_st, self.ring_st), restrict(g_rt, self.ring_rt))
        return (prolongate(ut_st, self.ring_st, len(g_st)),
                prolongate(ut_rt, self.ring_rt, len(g_rt)))

    # -- postprocessing access ---------------------------------------------

    def solve_gap_coefficients(self, cs: np.ndarray,
                               cr: np.ndarray) -> GapCoefficients:
        """Invert the (possibly eccentric) potential map for (a, b) given
        stator-frame boundary coefficients on the selected orders."""
        if self._ecc is None:
            lam = self.lambdas.orders.astype(float)
            xi = self.geometry.xi
            p, q = xi ** lam, xi ** (-lam)
            det = p - q
            a = (cs - q * cr) / det
            b = (-cs + p * cr) / det
            return GapCoefficients(self.lambdas, a, b)
        c_vec = np.empty(2 * len(self.lambdas), dtype=complex)
        c_vec[0::2] = cs
        c_vec[1::2] = cr
        w = self._ecc.t_solve(c_vec)
        return GapCoefficients(self.lambdas, w[0::2], w[1::2])

    def gap_coefficients_from_rings(self, ut_st, ut_rt) -> GapCoefficients:
        """Recover the stator-frame gap field coefficients (a, b) from ring
        potentials, applying the same rotor-side rotation/skew factors as the
        forward operator."""
        cs = self._analyze_side(ut_st, self.ring_st, self._s_st)
        cr = self._analyze_side(ut_rt, self.ring_rt, self._s_rt) * self._q_rt
        return self.solve_gap_coefficients(cs, cr)

    # -- verification oracle -----------------------------------------------

    def assemble_dense(self) -> np.ndarray:
        """Dense ring-level matrix by unit-vector probing; desk scale only."""
        n_st, n_rt = self.ring_st.n, self.ring_rt.n
        if n_st + n_rt > 512:
            raise ConfigurationError(
                "dense assembly is a desk-scale oracle (n_st + n_rt <= 512)")
        m = n_st + n_rt
        out = np.empty((m, m))
        e_st = np.zeros(n_st)
        e_rt = np.zeros(n_rt)
        for j in range(n_st):
            e_st[j] = 1.0
            gs, gr = self.apply_ring(e_st, e_rt)
            out[:n_st, j] = gs
            out[n_st:, j] = gr
            e_st[j] = 0.0
        for j in range(n_rt):
            e_rt[j] = 1.0
            gs, gr = self.apply_ring(e_st, e_rt)
            out[:n_st, n_st + j] = gs
            out[n_st:, n_st + j] = gr
            e_rt[j] = 0.0
        return out


def assemble_dense(operator: AirGapOperator) -> np.ndarray:
    return operator.assemble_dense()
