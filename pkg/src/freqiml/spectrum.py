"""Time/frequency signal containers, FFT bridge, and desired-trajectory synthesis.

Conventions used throughout the package:

* Signals are real, sampled uniformly, with an even number of samples.
* Spectra are one-sided (bins 0 .. N/2 inclusive) with implicit Hermitian
  extension; the forward transform is the unnormalized sum (numpy ``rfft``).
* The DC bin and, when represented, the Nyquist bin must be real.
* All frequencies are rad/s.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "FrequencyGrid",
    "TimeSeries",
    "ComplexSpectrum",
    "TrajectorySpec",
    "make_grid",
    "forward_transform",
    "inverse_transform",
    "desired_trajectory",
    "cutoff_mask",
    "write_timeseries_csv",
    "write_spectrum_csv",
]

# Relative slack used when comparing a grid frequency against a cutoff, so a
# bin that lands exactly on the cutoff (up to rounding) is counted as inside.
_CUTOFF_RTOL = 1e-9


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform one-sided frequency grid for real signals of even length.

    Bin i sits at ``2*pi*i / (num_samples * sample_time)`` rad/s, for
    i = 0 .. num_samples/2 (DC through Nyquist).
    """

    sample_time: float
    num_samples: int
    frequencies: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not (self.sample_time > 0 and np.isfinite(self.sample_time)):
            raise ValueError(f"sample_time must be positive, got {self.sample_time}")
        if self.num_samples < 4 or self.num_samples % 2 != 0:
            raise ValueError(f"num_samples must be an even integer >= 4, got {self.num_samples}")
        freqs = np.arange(self.num_samples // 2 + 1) * self.resolution
        freqs.flags.writeable = False
        object.__setattr__(self, "frequencies", freqs)

    @property
    def resolution(self) -> float:
        """Bin spacing in rad/s."""
        return 2.0 * np.pi / (self.num_samples * self.sample_time)

    @property
    def nyquist(self) -> float:
        return np.pi / self.sample_time

    @property
    def duration(self) -> float:
        return self.num_samples * self.sample_time

    @property
    def num_bins(self) -> int:
        return self.num_samples // 2 + 1

    def times(self) -> np.ndarray:
        return np.arange(self.num_samples) * self.sample_time


@dataclass(frozen=True)
class TimeSeries:
    """Real sampled signal with a fixed sample time."""

    sample_time: float
    samples: np.ndarray

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=float)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("samples must be a non-empty 1-D array")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples must be finite")
        samples = samples.copy()
        samples.flags.writeable = False
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return self.samples.size

    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) * self.sample_time


@dataclass(frozen=True)
class ComplexSpectrum:
    """One-sided spectrum on a shared grid; DC (and Nyquist) must be real."""

    grid: FrequencyGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=complex)
        if values.shape != (self.grid.num_bins,):
            raise ValueError(
                f"expected {self.grid.num_bins} one-sided bins, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("spectrum values must be finite")
        tol = 1e-9 * max(1.0, float(np.abs(values).max()))
        if abs(values[0].imag) > tol:
            raise ValueError(f"DC bin must be real, got imaginary part {values[0].imag}")
        if abs(values[-1].imag) > tol:
            raise ValueError(f"Nyquist bin must be real, got imaginary part {values[-1].imag}")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class TrajectorySpec:
    """Rest-start trajectory defined through its piecewise-sinusoidal acceleration.

    The acceleration is ``sum_{n=1..num_harmonics} sin(n * 2*pi*f* * (t - t0))``
    on (t0, t1], the negated form with shifted argument on (t1, t2], and zero
    elsewhere; position and velocity start at zero.
    """

    main_frequency_hz: float
    num_harmonics: int
    t0: float
    t1: float
    t2: float
    total_duration: float

    def __post_init__(self) -> None:
        if self.main_frequency_hz <= 0:
            raise ValueError("main_frequency_hz must be positive")
        if self.num_harmonics < 1:
            raise ValueError("num_harmonics must be >= 1")
        if not (0 < self.t0 < self.t1 < self.t2 < self.total_duration):
            raise ValueError(
                f"need 0 < t0 < t1 < t2 < total_duration, got "
                f"({self.t0}, {self.t1}, {self.t2}, {self.total_duration})"
            )


def make_grid(sample_time: float, total_duration: float) -> FrequencyGrid:
    """Build the frequency grid for a record of ``total_duration`` seconds.

    ``total_duration / sample_time`` must round to an even integer >= 4.
    """
    if sample_time <= 0 or total_duration <= 0:
        raise ValueError("sample_time and total_duration must be positive")
    num_samples = round(total_duration / sample_time)
    if num_samples % 2 != 0 or num_samples < 4:
        raise ValueError(
            f"total_duration/sample_time rounds to {num_samples}; need an even count >= 4"
        )
    return FrequencyGrid(sample_time=sample_time, num_samples=num_samples)


def cutoff_mask(grid: FrequencyGrid, omega_c: float) -> np.ndarray:
    """Boolean mask of grid bins with frequency <= omega_c (tolerant at the edge).

    Every operation that restricts work to the controlled band uses this one
    predicate so that masks never disagree between operations.
    """
    if omega_c < 0:
        raise ValueError("omega_c must be non-negative")
    return grid.frequencies <= omega_c * (1.0 + _CUTOFF_RTOL)


def forward_transform(ts: TimeSeries) -> ComplexSpectrum:
    """One-sided unnormalized FFT of a real, even-length series."""
    n = len(ts)
    if n % 2 != 0:
        raise ValueError(f"series length must be even, got {n}")
    grid = FrequencyGrid(sample_time=ts.sample_time, num_samples=n)
    return ComplexSpectrum(grid=grid, values=np.fft.rfft(ts.samples))


def inverse_transform(spec: ComplexSpectrum) -> TimeSeries:
    """Real time series of the one-sided spectrum (inverse of forward_transform)."""
    samples = np.fft.irfft(spec.values, n=spec.grid.num_samples)
    return TimeSeries(sample_time=spec.grid.sample_time, samples=samples)


def desired_trajectory(spec: TrajectorySpec, grid: FrequencyGrid) -> TimeSeries:
    """Sample the twice-integrated acceleration profile on the grid.

    Integration is closed form: position along each segment is the exact
    antiderivative of the sinusoid sum, so no quadrature error enters the
    sampled trajectory. After t2 the motion continues at constant velocity
    (zero whenever the two active segments have equal length).
    """
    if abs(spec.total_duration - grid.duration) > 0.5 * grid.sample_time:
        raise ValueError(
            f"trajectory duration {spec.total_duration} does not match grid "
            f"duration {grid.duration}"
        )
    if spec.t2 >= grid.duration:
        raise ValueError("segment times must lie inside the grid duration")

    w = 2.0 * np.pi * spec.main_frequency_hz
    harmonics = np.arange(1, spec.num_harmonics + 1)

    def seg_velocity(tau):
        # integral of sum_n sin(n w tau) from 0, zero initial velocity
        tau = np.asarray(tau, dtype=float)[..., None]
        return ((1.0 - np.cos(harmonics * w * tau)) / (harmonics * w)).sum(axis=-1)

    def seg_position(tau):
        tau = np.asarray(tau, dtype=float)[..., None]
        terms = tau / (harmonics * w) - np.sin(harmonics * w * tau) / (harmonics * w) ** 2
        return terms.sum(axis=-1)

    t = grid.times()
    y = np.zeros_like(t)

    in1 = (t > spec.t0) & (t <= spec.t1)
    in2 = (t > spec.t1) & (t <= spec.t2)
    after = t > spec.t2

    y[in1] = seg_position(t[in1] - spec.t0)
    p1 = float(seg_position(spec.t1 - spec.t0))
    v1 = float(seg_velocity(spec.t1 - spec.t0))
    y[in2] = p1 + v1 * (t[in2] - spec.t1) - seg_position(t[in2] - spec.t1)
    p2 = p1 + v1 * (spec.t2 - spec.t1) - float(seg_position(spec.t2 - spec.t1))
    v2 = v1 - float(seg_velocity(spec.t2 - spec.t1))
    y[after] = p2 + v2 * (t[after] - spec.t2)

    return TimeSeries(sample_time=grid.sample_time, samples=y)


def write_timeseries_csv(path, ts: TimeSeries) -> None:
    """Write ``t,value`` rows (UTF-8, '.' decimal separator, header included)."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["t", "value"])
        for t, v in zip(ts.times(), ts.samples):
            writer.writerow([repr(float(t)), repr(float(v))])


def write_spectrum_csv(path, spec: ComplexSpectrum) -> None:
    """Write ``omega_rad_s,re,im`` rows (UTF-8, '.' decimal separator, header included)."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["omega_rad_s", "re", "im"])
        for w, v in zip(spec.grid.frequencies, spec.values):
            writer.writerow([repr(float(w)), repr(float(v.real)), repr(float(v.imag))])
