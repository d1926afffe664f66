"""Iterative input learning with uncertainty-bounded gains and excitation augmentation.

The engine iterates a frequency-wise input-update law

    u_hat_k = (u_{k-1} - u_tilde_{k-1})
              + rho_k * g_hat_k^{-1} * [y_d - (y_m_{k-1} - g_hat_k * u_tilde_{k-1})]

below a cutoff frequency. The per-frequency gain rho_k is kept under an upper
bound rho_star computed from the learned model and its componentwise
uncertainty bounds; staying below the bound guarantees the per-frequency
tracking error contracts whenever the true response lies inside the bounds.
Where the nominal input is small, a fixed-magnitude random-phase term is
injected during the first iterations so response data exists at every
frequency of interest.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import gpr
from .model import FrequencyModel, ModelDataStore, average, harvest, model_error, refit
from .plant import NoiseModel, RngStream, TransferFunction, response_on_grid, simulate
from .spectrum import ComplexSpectrum, TimeSeries, cutoff_mask, inverse_transform

__all__ = [
    "IlcConfig",
    "IterationRecord",
    "IterationHistory",
    "gain_upper_bound",
    "uncertainty_envelope",
    "select_gain",
    "contraction_factor",
    "pe_augmentation",
    "update_input",
    "initial_input",
    "baseline_modelless_update",
    "tracking_error",
    "run_iml",
    "run_baseline",
]

# |g_hat| below this counts as "no model" at that bin: the gain is zeroed and
# no inversion is attempted there for the iteration.
_MODEL_GUARD = 1e-12


@dataclass(frozen=True)
class IlcConfig:
    """Iteration-law settings; thresholds are absolute spectrum magnitudes."""

    omega_c: float
    rho_floor: float = 0.9
    total_iterations: int = 5
    pe_iterations: int = 3
    u_pe: float = 0.0
    u_tilde: float = 0.0
    u_ok: float = 0.0
    ci_factor: float = 1.96
    freeze_after_pe: bool = False

    def __post_init__(self) -> None:
        if not (self.omega_c > 0 and np.isfinite(self.omega_c)):
            raise ValueError(f"omega_c must be positive, got {self.omega_c}")
        if not (0.0 < self.rho_floor < 1.0):
            raise ValueError(f"rho_floor must lie in (0, 1), got {self.rho_floor}")
        if self.total_iterations < 1:
            raise ValueError("total_iterations must be >= 1")
        if not (0 <= self.pe_iterations <= self.total_iterations):
            raise ValueError("need 0 <= pe_iterations <= total_iterations")
        for name in ("u_pe", "u_tilde", "u_ok", "ci_factor"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class IterationRecord:
    """Everything produced at one iteration step."""

    iteration: int
    u_hat: ComplexSpectrum
    u_tilde_spec: ComplexSpectrum
    u: ComplexSpectrum
    y_m: ComplexSpectrum
    model: FrequencyModel | None
    rho: np.ndarray
    rho_star: np.ndarray
    e_y: float
    e_g: float

    def __post_init__(self) -> None:
        if not np.array_equal(self.u.values, self.u_hat.values + self.u_tilde_spec.values):
            raise ValueError("u must equal u_hat + u_tilde bin-wise")


@dataclass(frozen=True)
class IterationHistory:
    records: list
    final_model: FrequencyModel | None
    config: IlcConfig
    seed: int
    noise: NoiseModel
    noise_level_percent: float

    def __post_init__(self) -> None:
        if len(self.records) != self.config.total_iterations:
            raise ValueError("history length must equal total_iterations")

    @property
    def terminal_e_y(self) -> float:
        return self.records[-1].e_y

    @property
    def terminal_e_g(self) -> float:
        return self.records[-1].e_g


def gain_upper_bound(a_hat, b_hat, delta_a, delta_b):
    """Largest iteration gain with guaranteed error reduction under the bounds.

        rho_star = max(0, 2 (|g_hat|^2 - (|a_hat| da + |b_hat| db))
                          / ((|a_hat| + da)^2 + (|b_hat| + db)^2))

    The numerator's dot product pairs component magnitudes with their bounds;
    it reaches zero exactly when the bounds swallow the model components, at
    which point no gain can be certified. Accepts scalars or arrays.
    """
    a_hat = np.asarray(a_hat, dtype=float)
    b_hat = np.asarray(b_hat, dtype=float)
    delta_a = np.asarray(delta_a, dtype=float)
    delta_b = np.asarray(delta_b, dtype=float)
    if np.any(delta_a < 0) or np.any(delta_b < 0):
        raise ValueError("uncertainty bounds must be non-negative")
    mag2 = a_hat**2 + b_hat**2
    if np.any(mag2 <= _MODEL_GUARD**2):
        raise ZeroDivisionError("model is zero (within 1e-12); no update possible")
    num = mag2 - (np.abs(a_hat) * delta_a + np.abs(b_hat) * delta_b)
    den = (np.abs(a_hat) + delta_a) ** 2 + (np.abs(b_hat) + delta_b) ** 2
    out = np.maximum(0.0, 2.0 * num / den)
    return float(out) if out.ndim == 0 else out


def uncertainty_envelope(a_hat, b_hat, delta_a, delta_b):
    """Worst-case magnitude ratio and best-case phase cosine of g / g_hat.

    Returns ``(mag_bound, cos_phase_bound)`` where mag_bound bounds |g|/|g_hat|
    from above and cos_phase_bound bounds cos(angle between g and g_hat) from
    below, over all true responses inside the componentwise bounds.
    """
    a_hat = np.asarray(a_hat, dtype=float)
    b_hat = np.asarray(b_hat, dtype=float)
    delta_a = np.asarray(delta_a, dtype=float)
    delta_b = np.asarray(delta_b, dtype=float)
    if np.any(delta_a < 0) or np.any(delta_b < 0):
        raise ValueError("uncertainty bounds must be non-negative")
    mag = np.sqrt(a_hat**2 + b_hat**2)
    if np.any(mag <= _MODEL_GUARD):
        raise ZeroDivisionError("model is zero (within 1e-12); envelope undefined")
    worst = np.sqrt((np.abs(a_hat) + delta_a) ** 2 + (np.abs(b_hat) + delta_b) ** 2)
    mag_bound = worst / mag
    cos_bound = (mag**2 - (np.abs(a_hat) * delta_a + np.abs(b_hat) * delta_b)) / (mag * worst)
    if mag_bound.ndim == 0:
        return float(mag_bound), float(cos_bound)
    return mag_bound, cos_bound


def select_gain(rho_star, rho_floor: float):
    """rho = rho_floor * min(rho_star, 1): strictly below the bound when it is positive."""
    if not (0.0 < rho_floor < 1.0):
        raise ValueError(f"rho_floor must lie in (0, 1), got {rho_floor}")
    rho_star = np.asarray(rho_star, dtype=float)
    if np.any(rho_star < 0):
        raise ValueError("rho_star must be non-negative")
    out = rho_floor * np.minimum(rho_star, 1.0)
    return float(out) if out.ndim == 0 else out


def contraction_factor(rho: float, g: complex, g_hat: complex) -> float:
    """|1 - rho * g / g_hat|: the per-iteration error-magnitude multiplier."""
    if abs(g_hat) <= _MODEL_GUARD:
        raise ZeroDivisionError("g_hat is zero; contraction factor undefined")
    return float(abs(1.0 - rho * g / g_hat))


def pe_augmentation(u_hat: ComplexSpectrum, cfg: IlcConfig, k: int, rng: RngStream) -> ComplexSpectrum:
    """Random-phase excitation where the nominal input is small, early iterations only.

    Adds magnitude ``cfg.u_tilde`` with phase drawn from N(0, pi^2) at every
    bin below the cutoff with |u_hat| < cfg.u_pe, for iterations k <=
    pe_iterations. Phases are drawn for all bins so the stream position does
    not depend on which bins qualify. At DC and Nyquist the phase is snapped
    to 0 or pi (sign of its cosine) to keep those bins real.
    """
    if k < 1:
        raise ValueError("iteration index starts at 1")
    grid = u_hat.grid
    values = np.zeros(grid.num_bins, dtype=complex)
    if k <= cfg.pe_iterations:
        phases = rng.normal(np.pi, grid.num_bins)
        selected = cutoff_mask(grid, cfg.omega_c) & (np.abs(u_hat.values) < cfg.u_pe)
        values[selected] = cfg.u_tilde * np.exp(1j * phases[selected])
        for edge in (0, grid.num_bins - 1):
            if selected[edge]:
                values[edge] = cfg.u_tilde * (1.0 if np.cos(phases[edge]) >= 0 else -1.0)
    return ComplexSpectrum(grid=grid, values=values)


def _gain_profile(fm: FrequencyModel | None, grid, mask: np.ndarray, rho_floor: float):
    """Full-length (g_hat, rho, rho_star) arrays; zero gain where no usable model."""
    n = grid.num_bins
    g_hat = np.zeros(n, dtype=complex)
    rho = np.zeros(n)
    rho_star = np.zeros(n)
    if fm is not None:
        if not np.allclose(fm.omegas, grid.frequencies[mask], rtol=1e-12, atol=0.0):
            raise ValueError("model frequencies do not match the grid below the cutoff")
        g_hat[mask] = fm.g_hat
        usable = mask & (np.abs(g_hat) > _MODEL_GUARD)
        sub = usable[mask]
        rho_star_sub = gain_upper_bound(
            fm.a_hat[sub], fm.b_hat[sub], fm.delta_a[sub], fm.delta_b[sub]
        )
        rho_star[usable] = rho_star_sub
        rho[usable] = select_gain(rho_star_sub, rho_floor)
    return g_hat, rho, rho_star


def update_input(
    prev: IterationRecord,
    y_d: ComplexSpectrum,
    fm: FrequencyModel | None,
    cfg: IlcConfig,
    k: int,
    rng: RngStream,
):
    """One step of the augmented iteration law.

    The previous augmentation is removed from the input, its estimated effect
    ``g_hat * u_tilde_{k-1}`` is removed from the measured output, the scaled
    model-inverted error is added where the gain is positive, and fresh
    excitation is injected where the updated nominal input is small.

    Returns ``(u_hat_k, u_tilde_k, u_k, rho, rho_star)``.
    """
    grid = y_d.grid
    if prev.u.grid != grid:
        raise ValueError("previous record and y_d must share a grid")
    mask = cutoff_mask(grid, cfg.omega_c)
    g_hat, rho, rho_star = _gain_profile(fm, grid, mask, cfg.rho_floor)

    u_hat = np.where(mask, prev.u.values - prev.u_tilde_spec.values, 0.0 + 0.0j)
    active = rho > 0
    y_tilde_prev = g_hat[active] * prev.u_tilde_spec.values[active]
    residual = y_d.values[active] - (prev.y_m.values[active] - y_tilde_prev)
    u_hat[active] += rho[active] / g_hat[active] * residual
    # The learned model's imaginary part is only approximately zero at DC, so
    # the inverted correction can leak a spurious imaginary component into
    # bins that must stay real for a real time signal. Project it out.
    u_hat[0] = u_hat[0].real
    u_hat[-1] = u_hat[-1].real

    u_hat_spec = ComplexSpectrum(grid=grid, values=u_hat)
    u_tilde_spec = pe_augmentation(u_hat_spec, cfg, k, rng)
    u_spec = ComplexSpectrum(grid=grid, values=u_hat_spec.values + u_tilde_spec.values)
    return u_hat_spec, u_tilde_spec, u_spec, rho, rho_star


def initial_input(
    y_d: ComplexSpectrum,
    prior_model: FrequencyModel | None,
    cfg: IlcConfig,
    rng: RngStream,
):
    """First input: prior-model inversion below the cutoff when available, else zero.

    Excitation augmentation applies exactly as in later iterations.
    Returns ``(u_hat_1, u_tilde_1, u_1)``.
    """
    grid = y_d.grid
    mask = cutoff_mask(grid, cfg.omega_c)
    u_hat = np.zeros(grid.num_bins, dtype=complex)
    if prior_model is not None:
        g_hat = np.zeros(grid.num_bins, dtype=complex)
        if not np.allclose(prior_model.omegas, grid.frequencies[mask], rtol=1e-12, atol=0.0):
            raise ValueError("prior model frequencies do not match the grid below the cutoff")
        g_hat[mask] = prior_model.g_hat
        usable = mask & (np.abs(g_hat) > _MODEL_GUARD)
        u_hat[usable] = y_d.values[usable] / g_hat[usable]
        u_hat[0] = u_hat[0].real
        u_hat[-1] = u_hat[-1].real
    u_hat_spec = ComplexSpectrum(grid=grid, values=u_hat)
    u_tilde_spec = pe_augmentation(u_hat_spec, cfg, 1, rng)
    u_spec = ComplexSpectrum(grid=grid, values=u_hat_spec.values + u_tilde_spec.values)
    return u_hat_spec, u_tilde_spec, u_spec


def baseline_modelless_update(
    u_prev: ComplexSpectrum | None,
    y_m_prev: ComplexSpectrum | None,
    y_d: ComplexSpectrum,
    alpha: float,
    k: int,
    omega_c: float,
) -> ComplexSpectrum:
    """Model-free division update: u_k = (u_{k-1} / y_m_{k-1}) * y_d below the cutoff.

    At k = 1 the input is alpha * y_d. Bins with |y_m_{k-1}| < 1e-15 are set
    to zero, as are all bins above the cutoff.
    """
    grid = y_d.grid
    mask = cutoff_mask(grid, omega_c)
    u = np.zeros(grid.num_bins, dtype=complex)
    if k == 1:
        u[mask] = alpha * y_d.values[mask]
    else:
        if u_prev is None or y_m_prev is None:
            raise ValueError("previous input and output required for k > 1")
        if u_prev.grid != grid or y_m_prev.grid != grid:
            raise ValueError("spectra must share a grid")
        ok = mask & (np.abs(y_m_prev.values) >= 1e-15)
        u[ok] = u_prev.values[ok] / y_m_prev.values[ok] * y_d.values[ok]
    return ComplexSpectrum(grid=grid, values=u)


def tracking_error(y_k: TimeSeries, y_d: TimeSeries) -> float:
    """100 * max|y_k - y_d| / max|y_d| over the record."""
    if len(y_k) != len(y_d):
        raise ValueError("series lengths differ")
    denom = float(np.abs(y_d.samples).max())
    if denom == 0.0:
        raise ZeroDivisionError("desired output is identically zero")
    return float(100.0 * np.abs(y_k.samples - y_d.samples).max() / denom)


def _noiseless_output(g: np.ndarray, u: ComplexSpectrum) -> TimeSeries:
    return inverse_transform(ComplexSpectrum(grid=u.grid, values=g * u.values))


def run_iml(
    plant: TransferFunction,
    y_d: ComplexSpectrum,
    cfg: IlcConfig,
    noise: NoiseModel,
    prior: FrequencyModel | None = None,
    seed: int = 0,
    fit_options: gpr.FitOptions | None = None,
    fit_on_raw_samples: bool = False,
) -> IterationHistory:
    """Run the full learning loop: input update, measurement, data harvest, model refit.

    Each iteration applies the current input to the plant, harvests response
    samples where the input is large enough, averages them per frequency, and
    refits the model (unless frozen after the excitation window). Gains for
    the next update come from the refit model's uncertainty bounds. Fully
    deterministic given ``seed``.

    ``fit_on_raw_samples`` regresses on every stored sample instead of the
    per-frequency averages (costlier; duplicated inputs then rely on the
    noise term for a well-posed fit).
    """
    grid = y_d.grid
    rng = RngStream(seed)
    g_true = response_on_grid(plant, grid)
    y_d_time = inverse_transform(y_d)
    store = ModelDataStore(grid)
    current: FrequencyModel | None = prior
    records: list[IterationRecord] = []
    last_noise_time = None

    for k in range(1, cfg.total_iterations + 1):
        try:
            if k == 1:
                u_hat, u_tilde, u = initial_input(y_d, prior, cfg, rng)
                rho = np.zeros(grid.num_bins)
                rho_star = np.zeros(grid.num_bins)
            else:
                u_hat, u_tilde, u, rho, rho_star = update_input(
                    records[-1], y_d, current, cfg, k, rng
                )

            y_m = simulate(plant, u, noise, rng)
            e_y = tracking_error(_noiseless_output(g_true, u), y_d_time)

            store.add(harvest(u, y_m, cfg.u_ok, cfg.omega_c, k))
            refit_due = not (cfg.freeze_after_pe and k > cfg.pe_iterations)
            if refit_due and len(store) > 0:
                if fit_on_raw_samples:
                    data = [(s.omega, s.value, 1) for s in store.all_samples()]
                else:
                    data = average(store)
                current = refit(
                    data,
                    grid,
                    cfg.omega_c,
                    cfg.ci_factor,
                    fit_options=fit_options,
                    previous=current,
                )
            e_g = model_error(current, plant, cfg.omega_c) if current is not None else float("nan")
        except Exception as exc:
            raise RuntimeError(f"iteration {k} failed: {exc}") from exc

        records.append(
            IterationRecord(
                iteration=k,
                u_hat=u_hat,
                u_tilde_spec=u_tilde,
                u=u,
                y_m=y_m,
                model=current,
                rho=rho,
                rho_star=rho_star,
                e_y=e_y,
                e_g=e_g,
            )
        )
        last_noise_time = inverse_transform(
            ComplexSpectrum(grid=grid, values=y_m.values - g_true * u.values)
        )

    noise_level = float(
        100.0 * np.abs(last_noise_time.samples).max() / np.abs(y_d_time.samples).max()
    )
    return IterationHistory(
        records=records,
        final_model=current,
        config=cfg,
        seed=seed,
        noise=noise,
        noise_level_percent=noise_level,
    )


def run_baseline(
    plant: TransferFunction,
    y_d: ComplexSpectrum,
    cfg: IlcConfig,
    noise: NoiseModel,
    alpha: float,
    seed: int = 0,
) -> IterationHistory:
    """Run the model-free division baseline for the configured iteration count."""
    grid = y_d.grid
    rng = RngStream(seed)
    g_true = response_on_grid(plant, grid)
    y_d_time = inverse_transform(y_d)
    zeros = ComplexSpectrum(grid=grid, values=np.zeros(grid.num_bins, dtype=complex))
    records: list[IterationRecord] = []
    u_prev = y_m_prev = None
    last_noise_time = None

    for k in range(1, cfg.total_iterations + 1):
        u = baseline_modelless_update(u_prev, y_m_prev, y_d, alpha, k, cfg.omega_c)
        y_m = simulate(plant, u, noise, rng)
        e_y = tracking_error(_noiseless_output(g_true, u), y_d_time)
        records.append(
            IterationRecord(
                iteration=k,
                u_hat=u,
                u_tilde_spec=zeros,
                u=u,
                y_m=y_m,
                model=None,
                rho=np.zeros(grid.num_bins),
                rho_star=np.zeros(grid.num_bins),
                e_y=e_y,
                e_g=float("nan"),
            )
        )
        last_noise_time = inverse_transform(
            ComplexSpectrum(grid=grid, values=y_m.values - g_true * u.values)
        )
        u_prev, y_m_prev = u, y_m

    noise_level = float(
        100.0 * np.abs(last_noise_time.samples).max() / np.abs(y_d_time.samples).max()
    )
    return IterationHistory(
        records=records,
        final_model=None,
        config=cfg,
        seed=seed,
        noise=noise,
        noise_level_percent=noise_level,
    )
