"""Ground-truth LTI plant: frequency response, exact inversion, noisy simulation.

The plant is a rational transfer function in s with real coefficients. All
simulation happens in the frequency domain (exact periodic convolution), which
is what makes the exact inverse input reproducible to FFT round-off.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

from .spectrum import ComplexSpectrum, FrequencyGrid, cutoff_mask

__all__ = [
    "TransferFunction",
    "NoiseModel",
    "RngStream",
    "example_plant",
    "freq_response",
    "response_on_grid",
    "exact_inverse_input",
    "draw_noise",
    "simulate",
]

# |den(jw)| below this is treated as a pole on the imaginary axis.
_DEN_GUARD = 1e-12


def _poly_degree(coeffs: np.ndarray) -> int:
    nz = np.nonzero(coeffs)[0]
    return int(nz[-1]) if nz.size else -1


@dataclass(frozen=True)
class TransferFunction:
    """Rational g(s) with real polynomial coefficients in ascending degree."""

    numerator_coeffs: np.ndarray
    denominator_coeffs: np.ndarray

    def __post_init__(self) -> None:
        num = np.atleast_1d(np.asarray(self.numerator_coeffs, dtype=float))
        den = np.atleast_1d(np.asarray(self.denominator_coeffs, dtype=float))
        if not (np.all(np.isfinite(num)) and np.all(np.isfinite(den))):
            raise ValueError("coefficients must be finite")
        deg_den = _poly_degree(den)
        if deg_den < 0:
            raise ValueError("denominator must not be identically zero")
        if _poly_degree(num) > deg_den:
            raise ValueError("numerator degree must not exceed denominator degree")
        # Diagnostic only: poles on the imaginary axis break evaluation at
        # isolated frequencies, which freq_response guards per call.
        roots = np.roots(den[::-1])
        if roots.size and np.any(np.abs(roots.real) <= 1e-9 * np.maximum(1.0, np.abs(roots))):
            warnings.warn("denominator has root(s) on or near the imaginary axis", stacklevel=2)
        num, den = num.copy(), den.copy()
        num.flags.writeable = False
        den.flags.writeable = False
        object.__setattr__(self, "numerator_coeffs", num)
        object.__setattr__(self, "denominator_coeffs", den)

    @property
    def relative_degree(self) -> int:
        return _poly_degree(self.denominator_coeffs) - _poly_degree(self.numerator_coeffs)


@dataclass(frozen=True)
class NoiseModel:
    """Per-bin frequency-domain measurement noise (std dev of real/imag parts)."""

    sigma_a: float
    sigma_b: float

    def __post_init__(self) -> None:
        for name, value in (("sigma_a", self.sigma_a), ("sigma_b", self.sigma_b)):
            if not (np.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be finite and non-negative, got {value}")

    @classmethod
    def isotropic(cls, sigma: float) -> "NoiseModel":
        return cls(sigma_a=sigma, sigma_b=sigma)


class RngStream:
    """Seeded, counter-based random stream (Philox) with deterministic splits.

    Identical seeds reproduce identical draws; ``split(key)`` derives an
    independent child stream, so parallel runs never share state.
    """

    def __init__(self, seed: int, _seq: np.random.SeedSequence | None = None):
        self.seed = int(seed)
        self._seq = np.random.SeedSequence(self.seed) if _seq is None else _seq
        self._gen = np.random.Generator(np.random.Philox(self._seq))

    def split(self, key: int) -> "RngStream":
        child = RngStream.__new__(RngStream)
        child.seed = self.seed
        child._seq = np.random.SeedSequence(self.seed, spawn_key=(int(key),))
        child._gen = np.random.Generator(np.random.Philox(child._seq))
        return child

    def normal(self, scale: float = 1.0, size: int | tuple | None = None) -> np.ndarray:
        return self._gen.normal(0.0, scale, size)

    def uniform(self, low: float = 0.0, high: float = 1.0, size=None) -> np.ndarray:
        return self._gen.uniform(low, high, size)


def example_plant() -> TransferFunction:
    """Fourth-order non-minimum-phase benchmark plant with unit DC gain.

    Two damped pole pairs at 2*pi and 6*pi rad/s (damping 1/sqrt(2)) with a
    real zero pair at +/- 4*pi rad/s; the leading factor normalizes g(0) = 1.
    The right-half-plane zero makes the causal inverse unstable, so inversion
    must be noncausal (frequency domain).
    """
    w_p1 = 2.0 * np.pi
    w_p2 = 6.0 * np.pi
    w_z = 4.0 * np.pi
    zeta = 1.0 / np.sqrt(2.0)
    gain = -(w_p1**2) * (w_p2**2) / (w_z**2)
    num = gain * npoly.polyfromroots([w_z, -w_z])
    den = npoly.polymul(
        [w_p1**2, 2.0 * zeta * w_p1, 1.0],
        [w_p2**2, 2.0 * zeta * w_p2, 1.0],
    )
    return TransferFunction(numerator_coeffs=num, denominator_coeffs=den)


def freq_response(tf: TransferFunction, omega) -> complex | np.ndarray:
    """Evaluate g(j*omega); omega may be a scalar or an array of rad/s values."""
    omega_arr = np.asarray(omega, dtype=float)
    if np.any(omega_arr < 0):
        raise ValueError("omega must be non-negative")
    s = 1j * omega_arr
    den = npoly.polyval(s, tf.denominator_coeffs)
    if np.any(np.abs(den) < _DEN_GUARD):
        bad = omega_arr[np.abs(den) < _DEN_GUARD] if omega_arr.ndim else omega_arr
        raise ZeroDivisionError(f"denominator vanishes on the imaginary axis near omega={bad}")
    value = npoly.polyval(s, tf.numerator_coeffs) / den
    return complex(value) if omega_arr.ndim == 0 else value


def response_on_grid(tf: TransferFunction, grid: FrequencyGrid) -> np.ndarray:
    """g(j*omega) at every one-sided grid bin."""
    return np.asarray(freq_response(tf, grid.frequencies))


def exact_inverse_input(
    tf: TransferFunction, y_d: ComplexSpectrum, omega_c: float
) -> ComplexSpectrum:
    """Frequency-domain inverse input: y_d / g below the cutoff, zero above.

    Division in the frequency domain realizes the noncausal inverse, so
    right-half-plane zeros are no obstacle as long as |g| stays away from
    zero on the retained bins.
    """
    grid = y_d.grid
    g = response_on_grid(tf, grid)
    mask = cutoff_mask(grid, omega_c)
    small = mask & (np.abs(g) <= _DEN_GUARD)
    if np.any(small):
        raise ZeroDivisionError(
            f"plant response magnitude below {_DEN_GUARD} at "
            f"omega={grid.frequencies[small][:5]} (cannot invert)"
        )
    u = np.zeros(grid.num_bins, dtype=complex)
    u[mask] = y_d.values[mask] / g[mask]
    return ComplexSpectrum(grid=grid, values=u)


def draw_noise(noise: NoiseModel, grid: FrequencyGrid, rng: RngStream) -> np.ndarray:
    """One frequency-domain noise realization; DC and Nyquist forced real."""
    re = rng.normal(1.0, grid.num_bins) * noise.sigma_a
    im = rng.normal(1.0, grid.num_bins) * noise.sigma_b
    im[0] = 0.0
    im[-1] = 0.0
    return re + 1j * im


def simulate(
    tf: TransferFunction, u: ComplexSpectrum, noise: NoiseModel, rng: RngStream
) -> ComplexSpectrum:
    """Measured output y_m = g*u + n, with independent per-bin Gaussian noise.

    Noise real/imag parts are drawn for every bin regardless of sigma so the
    stream position never depends on the noise level; DC and Nyquist noise is
    forced real to keep the spectrum that of a real signal.
    """
    grid = u.grid
    y = response_on_grid(tf, grid) * u.values + draw_noise(noise, grid, rng)
    return ComplexSpectrum(grid=grid, values=y)
