"""Frequency-response learning from iteration data.

Each iteration's input/output spectra yield pointwise response samples
y_m(w)/u(w) wherever the input is large enough to trust the division. Samples
are averaged per frequency, then independent GPs are fit to the real and
imaginary components of the averaged data; the predictive standard deviation
scaled by a confidence factor provides the per-frequency uncertainty bounds
that drive the iteration-gain computation.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import gpr
from .plant import TransferFunction, freq_response, response_on_grid
from .spectrum import ComplexSpectrum, FrequencyGrid, cutoff_mask

__all__ = [
    "ModelSample",
    "ModelDataStore",
    "FrequencyModel",
    "harvest",
    "average",
    "refit",
    "model_error",
    "write_model_snapshot_csv",
]


@dataclass(frozen=True)
class ModelSample:
    """One pointwise frequency-response measurement from iteration k."""

    omega: float
    value: complex
    iteration: int


class ModelDataStore:
    """Accumulates response samples per grid frequency across iterations."""

    def __init__(self, grid: FrequencyGrid):
        self.grid = grid
        self._samples: dict[int, list[ModelSample]] = {}

    def add(self, samples: list[ModelSample]) -> None:
        resolution = self.grid.resolution
        for s in samples:
            index = int(round(s.omega / resolution))
            if not np.isclose(index * resolution, s.omega, rtol=1e-9, atol=0.0):
                raise ValueError(f"sample frequency {s.omega} is not on the grid")
            self._samples.setdefault(index, []).append(s)

    def counts(self) -> np.ndarray:
        out = np.zeros(self.grid.num_bins, dtype=int)
        for index, samples in self._samples.items():
            out[index] = len(samples)
        return out

    def samples_at(self, index: int) -> list[ModelSample]:
        return list(self._samples.get(index, []))

    def all_samples(self) -> list[ModelSample]:
        """Every stored sample, ordered by frequency then iteration."""
        out: list[ModelSample] = []
        for index in sorted(self._samples):
            out.extend(sorted(self._samples[index], key=lambda s: s.iteration))
        return out

    def __len__(self) -> int:
        return sum(len(v) for v in self._samples.values())


def harvest(
    u_prev: ComplexSpectrum,
    y_m_prev: ComplexSpectrum,
    u_ok: float,
    omega_c: float,
    k: int,
) -> list[ModelSample]:
    """Response samples y_m/u at bins below the cutoff where |u| >= u_ok.

    Bins failing the threshold are silently skipped; a zero input bin is never
    harvested regardless of the threshold, so the division is always defined.
    """
    grid = u_prev.grid
    if y_m_prev.grid != grid:
        raise ValueError("input and output spectra must share a grid")
    u = u_prev.values
    absu = np.abs(u)
    ok = cutoff_mask(grid, omega_c) & (absu >= u_ok) & (absu > 0.0)
    m = y_m_prev.values[ok] / u[ok]
    return [
        ModelSample(omega=float(w), value=complex(v), iteration=k)
        for w, v in zip(grid.frequencies[ok], m)
    ]


def average(store: ModelDataStore) -> list[tuple]:
    """Per-frequency arithmetic mean of stored samples: (omega, mean, count)."""
    out = []
    for index in sorted(store._samples):
        samples = store._samples[index]
        mean = sum(s.value for s in samples) / len(samples)
        out.append((float(index * store.grid.resolution), complex(mean), len(samples)))
    return out


@dataclass(frozen=True)
class FrequencyModel:
    """Learned per-frequency response with confidence-interval bounds.

    Arrays cover every grid bin up to the cutoff. ``gpr_a``/``gpr_b`` are the
    fitted component GPs when the model came from a regression; synthetic
    models (priors built from a known response) carry none.
    """

    omegas: np.ndarray
    a_hat: np.ndarray
    b_hat: np.ndarray
    delta_a: np.ndarray
    delta_b: np.ndarray
    ci_factor: float
    gpr_a: gpr.GprModel | None = None
    gpr_b: gpr.GprModel | None = None
    counts: np.ndarray = field(default=None, repr=False)

    def __post_init__(self) -> None:
        n = self.omegas.size
        for name in ("a_hat", "b_hat", "delta_a", "delta_b"):
            arr = getattr(self, name)
            if arr.shape != (n,):
                raise ValueError(f"{name} must match omegas in length")
        if np.any(self.delta_a < 0) or np.any(self.delta_b < 0):
            raise ValueError("uncertainty bounds must be non-negative")
        if self.counts is None:
            object.__setattr__(self, "counts", np.zeros(n, dtype=int))

    @property
    def g_hat(self) -> np.ndarray:
        return self.a_hat + 1j * self.b_hat

    def predict_at(self, omega) -> tuple:
        """(g_hat, delta_a, delta_b) at arbitrary frequencies via the component GPs."""
        if self.gpr_a is None or self.gpr_b is None:
            raise ValueError("model carries no fitted GPs to evaluate off its grid")
        mean_a, var_a = gpr.predict(self.gpr_a, omega)
        mean_b, var_b = gpr.predict(self.gpr_b, omega)
        return (
            np.asarray(mean_a) + 1j * np.asarray(mean_b),
            self.ci_factor * np.sqrt(var_a),
            self.ci_factor * np.sqrt(var_b),
        )

    @classmethod
    def from_transfer_function(
        cls,
        tf: TransferFunction,
        grid: FrequencyGrid,
        omega_c: float,
        scale: float = 1.0,
        rel_delta: float = 0.0,
        abs_delta: float = 0.0,
        ci_factor: float = 1.96,
    ) -> "FrequencyModel":
        """Synthetic model from a known plant: g_hat = scale * g.

        Bounds are rel_delta * |component| + abs_delta, which keeps the true
        response inside the bounds whenever |scale - 1| * |component| stays
        below them. Used for warm starts and frozen-model experiments.
        """
        mask = cutoff_mask(grid, omega_c)
        g = response_on_grid(tf, grid)[mask] * scale
        return cls(
            omegas=grid.frequencies[mask],
            a_hat=g.real,
            b_hat=g.imag,
            delta_a=rel_delta * np.abs(g.real) + abs_delta,
            delta_b=rel_delta * np.abs(g.imag) + abs_delta,
            ci_factor=ci_factor,
        )


def refit(
    averaged: list,
    grid: FrequencyGrid,
    omega_c: float,
    ci_factor: float,
    fit_options: gpr.FitOptions | None = None,
    previous: FrequencyModel | None = None,
) -> FrequencyModel:
    """Fit component GPs to averaged data and evaluate them on the grid.

    ``previous`` warm-starts each component's hyperparameter search with the
    last optimum (still deterministic; it is just one extra start).
    """
    if not averaged:
        raise ValueError("no averaged model data available")
    omegas = np.array([a[0] for a in averaged], dtype=float)
    values = np.array([a[1] for a in averaged], dtype=complex)
    counts = np.array([a[2] for a in averaged], dtype=int)

    base = fit_options if fit_options is not None else gpr.FitOptions()
    span_fallback = (grid.frequencies[-1] - grid.frequencies[0]) / 10.0

    def component_options(prev_model: gpr.GprModel | None) -> gpr.FitOptions:
        kwargs = {
            "fixed_noise_variance": base.fixed_noise_variance,
            "signal_factors": base.signal_factors,
            "length_factors": base.length_factors,
            "noise_factors": base.noise_factors,
            "top_starts": base.top_starts,
            "max_iter": base.max_iter,
            "fallback_length_scale": base.fallback_length_scale or span_fallback,
            "warm_start": prev_model.hyperparams if prev_model is not None else base.warm_start,
        }
        return gpr.FitOptions(**kwargs)

    gp_a = gpr.fit(
        gpr.GprDataset(omegas, values.real),
        component_options(previous.gpr_a if previous else None),
    )
    gp_b = gpr.fit(
        gpr.GprDataset(omegas, values.imag),
        component_options(previous.gpr_b if previous else None),
    )

    mask = cutoff_mask(grid, omega_c)
    eval_omegas = grid.frequencies[mask]
    mean_a, var_a = gpr.predict(gp_a, eval_omegas)
    mean_b, var_b = gpr.predict(gp_b, eval_omegas)

    bin_counts = np.zeros(eval_omegas.size, dtype=int)
    indices = np.round(omegas / grid.resolution).astype(int)
    inside = indices < eval_omegas.size
    np.add.at(bin_counts, indices[inside], counts[inside])

    return FrequencyModel(
        omegas=eval_omegas,
        a_hat=mean_a,
        b_hat=mean_b,
        delta_a=ci_factor * np.sqrt(var_a),
        delta_b=ci_factor * np.sqrt(var_b),
        ci_factor=ci_factor,
        gpr_a=gp_a,
        gpr_b=gp_b,
        counts=bin_counts,
    )


def model_error(fm: FrequencyModel, truth: TransferFunction, omega_c: float) -> float:
    """100 * max|g_hat - g| / max|g| over model frequencies up to the cutoff."""
    keep = fm.omegas <= omega_c * (1.0 + 1e-9)
    if not np.any(keep):
        raise ValueError("model has no frequencies below the cutoff")
    g_true = np.asarray(freq_response(truth, fm.omegas[keep]))
    g_hat = fm.g_hat[keep]
    return float(100.0 * np.abs(g_hat - g_true).max() / np.abs(g_true).max())


def write_model_snapshot_csv(path, fm: FrequencyModel) -> None:
    """omega_rad_s,a_hat,b_hat,delta_a,delta_b,n_samples rows."""
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["omega_rad_s", "a_hat", "b_hat", "delta_a", "delta_b", "n_samples"])
        for i in range(fm.omegas.size):
            writer.writerow(
                [
                    repr(float(fm.omegas[i])),
                    repr(float(fm.a_hat[i])),
                    repr(float(fm.b_hat[i])),
                    repr(float(fm.delta_a[i])),
                    repr(float(fm.delta_b[i])),
                    int(fm.counts[i]),
                ]
            )
