"""Scalar Gaussian process regression over frequency with a squared-exponential kernel.

Covers exactly what the learning loop needs: kernel evaluation, log marginal
likelihood, deterministic hyperparameter optimization, and predictive
mean/variance from a cached Cholesky factorization. Real and imaginary
frequency-response components are each fit as an independent scalar GP.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla
from scipy.optimize import minimize

__all__ = [
    "KernelHyperparams",
    "GprDataset",
    "GprModel",
    "FitOptions",
    "se_kernel",
    "log_marginal_likelihood",
    "fit",
    "predict",
]

# Relative diagonal jitter applied before every factorization.
_JITTER = 1e-10


@dataclass(frozen=True)
class KernelHyperparams:
    signal_variance: float
    length_scale: float
    noise_variance: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.signal_variance) and self.signal_variance > 0):
            raise ValueError(f"signal_variance must be positive, got {self.signal_variance}")
        if not (np.isfinite(self.length_scale) and self.length_scale > 0):
            raise ValueError(f"length_scale must be positive, got {self.length_scale}")
        if not (np.isfinite(self.noise_variance) and self.noise_variance >= 0):
            raise ValueError(f"noise_variance must be non-negative, got {self.noise_variance}")


@dataclass(frozen=True)
class GprDataset:
    """Training inputs (rad/s) and real-valued targets."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self) -> None:
        x = np.atleast_1d(np.asarray(self.inputs, dtype=float))
        y = np.atleast_1d(np.asarray(self.targets, dtype=float))
        if x.size == 0 or x.shape != y.shape:
            raise ValueError(f"inputs/targets must be equal-length and non-empty, got {x.shape} vs {y.shape}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("inputs and targets must be finite")
        x, y = x.copy(), y.copy()
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "targets", y)

    def __len__(self) -> int:
        return self.inputs.size


@dataclass(frozen=True)
class FitOptions:
    """Deterministic multi-start optimizer settings.

    Starts form a fixed 3x3x3 grid in log space, scaled by the target variance
    and the input span; only the most promising ``top_starts`` are refined with
    Nelder-Mead. ``fixed_noise_variance`` pins the noise term instead of
    optimizing it. ``warm_start`` adds one extra start (e.g. the previous
    iteration's optimum). ``fallback_length_scale`` seeds the single-point
    fallback when the dataset cannot support optimization.
    """

    fixed_noise_variance: float | None = None
    signal_factors: tuple = (0.1, 1.0, 10.0)
    length_factors: tuple = (0.02, 0.1, 0.5)
    noise_factors: tuple = (1e-8, 1e-4, 1e-2)
    top_starts: int = 4
    max_iter: int = 250
    warm_start: KernelHyperparams | None = None
    fallback_length_scale: float | None = None


@dataclass(frozen=True)
class GprModel:
    """Fitted GP: hyperparameters plus the cached training factorization."""

    hyperparams: KernelHyperparams
    dataset: GprDataset
    factorization: np.ndarray = field(repr=False)  # lower Cholesky of K + sigma^2 I (+ jitter)
    solved_targets: np.ndarray = field(repr=False)  # (K + sigma^2 I)^-1 m
    lml: float = float("nan")


def se_kernel(omega1, omega2, h: KernelHyperparams):
    """Squared-exponential covariance; broadcasts over array arguments."""
    d = np.asarray(omega1, dtype=float) - np.asarray(omega2, dtype=float)
    return h.signal_variance * np.exp(-0.5 * (d / h.length_scale) ** 2)


def _kernel_matrix(x: np.ndarray, h: KernelHyperparams) -> np.ndarray:
    k = se_kernel(x[:, None], x[None, :], h)
    k[np.diag_indices_from(k)] += h.noise_variance + _JITTER * h.signal_variance
    return k


def _factorize(d: GprDataset, h: KernelHyperparams):
    """Lower Cholesky factor and solved targets; LinAlgError when not PD."""
    lower = sla.cholesky(_kernel_matrix(d.inputs, h), lower=True)
    alpha = sla.cho_solve((lower, True), d.targets)
    return lower, alpha


def _lml_from_factorization(d: GprDataset, lower: np.ndarray, alpha: np.ndarray) -> float:
    n = len(d)
    return float(
        -0.5 * d.targets @ alpha
        - np.log(np.diag(lower)).sum()
        - 0.5 * n * np.log(2.0 * np.pi)
    )


def log_marginal_likelihood(d: GprDataset, h: KernelHyperparams) -> float:
    """-1/2 m^T (K+s^2 I)^-1 m - 1/2 log det(K+s^2 I) - n/2 log 2pi.

    Raises ``numpy.linalg.LinAlgError`` when the (jittered) matrix is not
    positive definite, signalling hyperparameters invalid for this data.
    """
    lower, alpha = _factorize(d, h)
    return _lml_from_factorization(d, lower, alpha)


def _objective(log_params: np.ndarray, d: GprDataset, fixed_noise: float | None) -> float:
    if not np.all(np.isfinite(log_params)) or np.any(np.abs(log_params) > 45.0):
        return 1e12
    sf2, ls = np.exp(log_params[0]), np.exp(log_params[1])
    sn2 = fixed_noise if fixed_noise is not None else float(np.exp(log_params[2]))
    try:
        h = KernelHyperparams(sf2, ls, sn2)
        return -log_marginal_likelihood(d, h)
    except (np.linalg.LinAlgError, ValueError, FloatingPointError):
        return 1e12


def _single_point_fallback(d: GprDataset, opts: FitOptions) -> KernelHyperparams:
    target = float(d.targets[0])
    sf2 = max(target * target, 1e-12)
    ls = opts.fallback_length_scale
    if ls is None:
        ls = max(abs(float(d.inputs[0])), 1.0) / 10.0
    sn2 = opts.fixed_noise_variance if opts.fixed_noise_variance is not None else 1e-6 * sf2
    return KernelHyperparams(sf2, ls, sn2)


def fit(d: GprDataset, opts: FitOptions = FitOptions()) -> GprModel:
    """Maximize the log marginal likelihood over a fixed multi-start search.

    The search is fully deterministic given the dataset and options: the same
    starts are generated, scored, refined, and tie-broken identically on every
    call.
    """
    if len(d) == 1:
        h = _single_point_fallback(d, opts)
    else:
        var_y = max(float(np.var(d.targets)), 1e-12)
        span = max(float(d.inputs.max() - d.inputs.min()), 1e-9)
        fixed = opts.fixed_noise_variance
        starts: list[np.ndarray] = []
        for fs in opts.signal_factors:
            for fl in opts.length_factors:
                if fixed is None:
                    for fn in opts.noise_factors:
                        starts.append(np.log([var_y * fs, span * fl, var_y * fn]))
                else:
                    starts.append(np.log([var_y * fs, span * fl]))
        if opts.warm_start is not None:
            w = opts.warm_start
            if fixed is None:
                starts.append(np.log([w.signal_variance, w.length_scale, max(w.noise_variance, 1e-300)]))
            else:
                starts.append(np.log([w.signal_variance, w.length_scale]))

        scores = np.array([_objective(s, d, fixed) for s in starts])
        order = np.argsort(scores, kind="stable")[: opts.top_starts]
        best_val, best_x = np.inf, None
        for idx in order:
            result = minimize(
                _objective,
                starts[idx],
                args=(d, fixed),
                method="Nelder-Mead",
                options={"xatol": 1e-4, "fatol": 1e-7, "maxiter": opts.max_iter},
            )
            if result.fun < best_val:
                best_val, best_x = result.fun, result.x
        if best_x is None or best_val >= 1e12:
            raise np.linalg.LinAlgError("no hyperparameter start produced a positive-definite fit")
        sn2 = fixed if fixed is not None else float(np.exp(best_x[2]))
        h = KernelHyperparams(float(np.exp(best_x[0])), float(np.exp(best_x[1])), sn2)

    lower, alpha = _factorize(d, h)
    return GprModel(
        hyperparams=h,
        dataset=d,
        factorization=lower,
        solved_targets=alpha,
        lml=_lml_from_factorization(d, lower, alpha),
    )


def predict(model: GprModel, omega) -> tuple:
    """Predictive mean and variance at scalar or array query frequencies.

    Variance is clamped at zero from below against factorization round-off.
    """
    omega_arr = np.atleast_1d(np.asarray(omega, dtype=float))
    k_star = se_kernel(omega_arr[:, None], model.dataset.inputs[None, :], model.hyperparams)
    mean = k_star @ model.solved_targets
    v = sla.solve_triangular(model.factorization, k_star.T, lower=True)
    var = np.maximum(model.hyperparams.signal_variance - np.einsum("ij,ij->j", v, v), 0.0)
    if np.ndim(omega) == 0:
        return float(mean[0]), float(var[0])
    return mean, var
