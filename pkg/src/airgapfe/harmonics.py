"""Discrete Fourier analysis of interface-ring data.

Convention: a real ring field is represented as

    field(theta) = c0 + sum_{lam > 0} 2 Re{ c_lam * exp(-1j * lam * theta) }

with coefficients referring to the absolute angle theta; the ring offset
theta0 is compensated inside analyze/synthesize. Only positive orders up to
lam_max = (n - 1) // 2 are stored, which makes realness structural and
excludes the Nyquist order whose phase is ambiguous on a real grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InternalError
from .mesh import InterfaceRing


def max_order(n: int) -> int:
    """Largest representable positive order on an n-node ring."""
    return (n - 1) // 2


@dataclass
class HarmonicSpectrum:
    """Half-spectrum of a real ring field.

    coeffs[k] is the coefficient of order k+1; orders run 1..lam_max.
    """

    n: int
    theta0: float
    c0: float
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex).ravel()
        if len(self.coeffs) != max_order(self.n):
            raise InternalError(
                f"expected {max_order(self.n)} coefficients for n={self.n}")

    def order(self, lam: int) -> complex:
        if not 1 <= lam <= max_order(self.n):
            raise InternalError(f"order {lam} outside 1..{max_order(self.n)}")
        return complex(self.coeffs[lam - 1])


@dataclass(frozen=True)
class HarmonicSet:
    """Sorted positive harmonic orders treated by the air-gap element."""

    orders: np.ndarray

    def __init__(self, orders):
        arr = np.unique(np.asarray(orders, dtype=np.int64))
        if arr.size == 0:
            raise ConfigurationError("harmonic set must be nonempty")
        if arr.min() < 1:
            raise ConfigurationError("harmonic orders must be >= 1; order 0 "
                                     "is excluded by construction")
        object.__setattr__(self, "orders", arr)

    def __len__(self) -> int:
        return len(self.orders)

    def validate_for(self, *ns: int):
        lim = min(max_order(n) for n in ns)
        if self.orders.max() > lim:
            raise ConfigurationError(
                f"harmonic order {int(self.orders.max())} exceeds the "
                f"largest representable order {lim}")

    @staticmethod
    def common(*ns: int) -> "HarmonicSet":
        """All orders representable on every given ring size."""
        lim = min(max_order(n) for n in ns)
        if lim < 1:
            raise ConfigurationError("rings too small for any harmonic")
        return HarmonicSet(np.arange(1, lim + 1))


def analyze(samples: np.ndarray, ring: InterfaceRing) -> HarmonicSpectrum:
    """Ring samples -> half-spectrum, O(n log n)."""
    samples = np.asarray(samples, dtype=float)
    if samples.shape != (ring.n,):
        raise InternalError(
            f"expected {ring.n} samples, got {samples.shape}")
    lam_max = max_order(ring.n)
    spec = np.fft.ifft(samples)
    lam = np.arange(1, lam_max + 1)
    coeffs = spec[1:lam_max + 1] * np.exp(1j * lam * ring.theta0)
    return HarmonicSpectrum(ring.n, ring.theta0, float(spec[0].real), coeffs)


def synthesize(spectrum: HarmonicSpectrum, ring: InterfaceRing) -> np.ndarray:
    """Exact inverse of analyze on the same ring."""
    if spectrum.n != ring.n:
        raise InternalError("spectrum/ring node count mismatch")
    n = ring.n
    lam_max = max_order(n)
    lam = np.arange(1, lam_max + 1)
    full = np.zeros(n, dtype=complex)
    full[0] = spectrum.c0
    shifted = spectrum.coeffs * np.exp(-1j * lam * ring.theta0)
    full[1:lam_max + 1] = shifted
    full[n - lam_max:] = np.conj(shifted[::-1])
    return np.fft.fft(full).real


def select(spectrum: HarmonicSpectrum, lambdas: HarmonicSet) -> np.ndarray:
    """Coefficients of the selected orders, in HarmonicSet order."""
    lambdas.validate_for(spectrum.n)
    return spectrum.coeffs[lambdas.orders - 1].copy()


def embed(reduced: np.ndarray, lambdas: HarmonicSet, n: int,
          theta0: float) -> HarmonicSpectrum:
    """Zero-fill unselected orders; embed(select(s)) projects onto Lambda."""
    reduced = np.asarray(reduced, dtype=complex).ravel()
    if len(reduced) != len(lambdas):
        raise InternalError("reduced vector length != |Lambda|")
    lambdas.validate_for(n)
    coeffs = np.zeros(max_order(n), dtype=complex)
    coeffs[lambdas.orders - 1] = reduced
    return HarmonicSpectrum(n, theta0, 0.0, coeffs)


def interface_correction(lam, n: int):
    """Attenuation of order lam on an n-node ring for piecewise-linear
    interface shape functions: sin(lam*pi/n) / (lam*pi/n).

    Tends to 1 for n -> infinity at fixed lam; even and decreasing in lam
    below the Nyquist order.
    """
    lam = np.asarray(lam, dtype=float)
    if n < 4:
        raise ConfigurationError("need n >= 4")
    return np.sinc(lam / n)
