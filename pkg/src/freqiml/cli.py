"""Configuration-driven experiment runner.

Reads a JSON config (fail-closed: unknown fields are errors), runs one of the
study modes, and writes plot-ready CSV/JSON artifacts:

* ``iml``                — the full learning loop; a config with several
                           trajectories chains them, warm-starting each run
                           from the previous run's final model.
* ``baseline_modelless`` — the division-based update with no explicit model.
* ``pe_comparison``      — model-data error with and without excitation
                           augmentation, under one shared noise realization.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import dataclasses
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import gpr
from .ilc import IlcConfig, IterationHistory, pe_augmentation, run_baseline, run_iml
from .model import FrequencyModel, write_model_snapshot_csv
from .plant import (
    NoiseModel,
    RngStream,
    TransferFunction,
    draw_noise,
    example_plant,
    exact_inverse_input,
    response_on_grid,
)
from .spectrum import (
    ComplexSpectrum,
    FrequencyGrid,
    TrajectorySpec,
    cutoff_mask,
    desired_trajectory,
    forward_transform,
    inverse_transform,
    make_grid,
)

__all__ = [
    "ConfigError",
    "RunConfig",
    "PeComparisonReport",
    "load_config",
    "validate_config",
    "pe_comparison",
    "run",
    "main",
]

MODES = ("iml", "baseline_modelless", "pe_comparison")

_TOP_KEYS = {
    "plant",
    "grid",
    "trajectories",
    "ilc",
    "noise_sigma",
    "baseline_alpha",
    "gpr",
    "seed",
    "out_dir",
    "mode",
}
_GRID_KEYS = {"sample_time", "total_duration"}
_TRAJ_KEYS = {"main_frequency_hz", "num_harmonics", "t0", "t1", "t2"}
_ILC_KEYS = {
    "omega_c",
    "rho_floor",
    "total_iterations",
    "pe_iterations",
    "u_pe",
    "u_tilde",
    "u_ok",
    "ci_factor",
    "freeze_after_pe",
}
_GPR_KEYS = {"fixed_noise_variance", "fit_on_raw_samples"}


class ConfigError(Exception):
    """Configuration could not be loaded or failed validation."""


def load_config(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, encoding="utf-8") as f:
            config = json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(config, dict):
        raise ConfigError("config root must be a JSON object")
    return config


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def validate_config(config: dict) -> list[str]:
    """Diagnostics for a parsed config dict; empty list means valid."""
    diags: list[str] = []

    for key in sorted(set(config) - _TOP_KEYS):
        diags.append(f"unknown field '{key}'")
    for key in ("plant", "grid", "trajectories", "ilc", "seed", "mode"):
        if key not in config:
            diags.append(f"missing required field '{key}'")
    if diags:
        return diags

    mode = config["mode"]
    if mode not in MODES:
        diags.append(f"mode must be one of {MODES}, got {mode!r}")

    seed = config["seed"]
    if not isinstance(seed, int) or isinstance(seed, bool):
        diags.append(f"seed must be an integer (no wall-clock seeding), got {seed!r}")

    grid = config["grid"]
    nyquist = None
    if not isinstance(grid, dict):
        diags.append("grid must be an object")
    else:
        for key in sorted(set(grid) - _GRID_KEYS):
            diags.append(f"grid: unknown field '{key}'")
        missing = _GRID_KEYS - set(grid)
        if missing:
            diags.append(f"grid: missing field(s) {sorted(missing)}")
        else:
            st, td = grid["sample_time"], grid["total_duration"]
            if not (_is_number(st) and st > 0):
                diags.append("grid: sample_time must be a positive number")
            if not (_is_number(td) and td > 0):
                diags.append("grid: total_duration must be a positive number")
            if _is_number(st) and _is_number(td) and st > 0 and td > 0:
                n = round(td / st)
                if n % 2 != 0 or n < 4:
                    diags.append(
                        f"grid: total_duration/sample_time rounds to {n}; need an even count >= 4"
                    )
                nyquist = math.pi / st

    trajectories = config["trajectories"]
    if not isinstance(trajectories, list) or not trajectories:
        diags.append("trajectories must be a non-empty list")
    else:
        duration = grid.get("total_duration") if isinstance(grid, dict) else None
        for i, traj in enumerate(trajectories, start=1):
            where = f"trajectories[{i}]"
            if not isinstance(traj, dict):
                diags.append(f"{where}: must be an object")
                continue
            for key in sorted(set(traj) - _TRAJ_KEYS):
                diags.append(f"{where}: unknown field '{key}'")
            missing = _TRAJ_KEYS - set(traj)
            if missing:
                diags.append(f"{where}: missing field(s) {sorted(missing)}")
                continue
            if not (_is_number(traj["main_frequency_hz"]) and traj["main_frequency_hz"] > 0):
                diags.append(f"{where}: main_frequency_hz must be positive")
            if not (isinstance(traj["num_harmonics"], int) and traj["num_harmonics"] >= 1):
                diags.append(f"{where}: num_harmonics must be an integer >= 1")
            ts = [traj["t0"], traj["t1"], traj["t2"]]
            if not all(_is_number(t) for t in ts):
                diags.append(f"{where}: t0/t1/t2 must be numbers")
            elif not (0 < ts[0] < ts[1] < ts[2]):
                diags.append(f"{where}: need 0 < t0 < t1 < t2")
            elif _is_number(duration) and ts[2] >= duration:
                diags.append(f"{where}: t2 must lie inside the record duration {duration}")

    ilc = config["ilc"]
    if not isinstance(ilc, dict):
        diags.append("ilc must be an object")
    else:
        for key in sorted(set(ilc) - _ILC_KEYS):
            diags.append(f"ilc: unknown field '{key}'")
        missing = {"omega_c", "rho_floor", "total_iterations", "pe_iterations"} - set(ilc)
        if missing:
            diags.append(f"ilc: missing field(s) {sorted(missing)}")
        else:
            omega_c = ilc["omega_c"]
            if not (_is_number(omega_c) and omega_c > 0):
                diags.append("ilc: omega_c must be a positive number (rad/s)")
            elif nyquist is not None and omega_c > nyquist * (1 + 1e-9):
                diags.append(f"ilc: cutoff exceeds Nyquist ({omega_c} > {nyquist})")
            if not (_is_number(ilc["rho_floor"]) and 0 < ilc["rho_floor"] < 1):
                diags.append("ilc: rho_floor must lie in (0, 1)")
            k_star, k_pe = ilc["total_iterations"], ilc["pe_iterations"]
            if not (isinstance(k_star, int) and k_star >= 1):
                diags.append("ilc: total_iterations must be an integer >= 1")
            if not (isinstance(k_pe, int) and k_pe >= 0):
                diags.append("ilc: pe_iterations must be an integer >= 0")
            elif isinstance(k_star, int) and k_pe > k_star:
                diags.append(f"ilc: pe_iterations exceeds total_iterations ({k_pe} > {k_star})")
        for key in ("u_pe", "u_tilde", "u_ok", "ci_factor"):
            if key in ilc and ilc[key] is not None and not (_is_number(ilc[key]) and ilc[key] >= 0):
                diags.append(f"ilc: {key} must be null or a non-negative number")
        if "freeze_after_pe" in ilc and not isinstance(ilc["freeze_after_pe"], bool):
            diags.append("ilc: freeze_after_pe must be a boolean")

    plant = config["plant"]
    if isinstance(plant, str):
        if plant != "example":
            diags.append(f"plant: unknown named plant {plant!r} (only 'example')")
    elif isinstance(plant, dict):
        unknown = sorted(set(plant) - {"numerator", "denominator"})
        for key in unknown:
            diags.append(f"plant: unknown field '{key}'")
        for key in ("numerator", "denominator"):
            coeffs = plant.get(key)
            if not (isinstance(coeffs, list) and coeffs and all(_is_number(c) for c in coeffs)):
                diags.append(f"plant: {key} must be a non-empty list of numbers")
        if not any(d.startswith("plant:") for d in diags):
            num, den = plant["numerator"], plant["denominator"]
            if not any(den):
                diags.append("plant: denominator must not be identically zero")
            else:
                deg = lambda c: max((i for i, v in enumerate(c) if v), default=-1)
                if deg(num) > deg(den):
                    diags.append("plant: numerator degree exceeds denominator degree")
    else:
        diags.append("plant must be 'example' or an object with numerator/denominator")

    if "noise_sigma" in config and config["noise_sigma"] is not None:
        if not (_is_number(config["noise_sigma"]) and config["noise_sigma"] >= 0):
            diags.append("noise_sigma must be null or a non-negative number")
    if "baseline_alpha" in config and not _is_number(config["baseline_alpha"]):
        diags.append("baseline_alpha must be a number")
    if "gpr" in config:
        g = config["gpr"]
        if not isinstance(g, dict):
            diags.append("gpr must be an object")
        else:
            for key in sorted(set(g) - _GPR_KEYS):
                diags.append(f"gpr: unknown field '{key}'")
            fnv = g.get("fixed_noise_variance")
            if fnv is not None and not (_is_number(fnv) and fnv >= 0):
                diags.append("gpr: fixed_noise_variance must be null or non-negative")
            if "fit_on_raw_samples" in g and not isinstance(g["fit_on_raw_samples"], bool):
                diags.append("gpr: fit_on_raw_samples must be a boolean")
    if "out_dir" in config and config["out_dir"] is not None and not isinstance(config["out_dir"], str):
        diags.append("out_dir must be a string")

    return diags


@dataclass(frozen=True)
class RunConfig:
    """Validated, materialized run configuration."""

    plant: TransferFunction
    grid: FrequencyGrid
    trajectories: list
    ilc_raw: dict
    noise_sigma: float | None
    baseline_alpha: float
    gpr_fixed_noise: float | None
    gpr_fit_on_raw: bool
    seed: int
    out_dir: str | None
    mode: str
    raw: dict = field(repr=False, default=None)

    @classmethod
    def from_dict(cls, config: dict) -> "RunConfig":
        diags = validate_config(config)
        if diags:
            raise ConfigError("; ".join(diags))
        plant_spec = config["plant"]
        plant = (
            example_plant()
            if plant_spec == "example"
            else TransferFunction(
                numerator_coeffs=np.asarray(plant_spec["numerator"], dtype=float),
                denominator_coeffs=np.asarray(plant_spec["denominator"], dtype=float),
            )
        )
        grid = make_grid(config["grid"]["sample_time"], config["grid"]["total_duration"])
        trajectories = [
            TrajectorySpec(
                main_frequency_hz=t["main_frequency_hz"],
                num_harmonics=t["num_harmonics"],
                t0=t["t0"],
                t1=t["t1"],
                t2=t["t2"],
                total_duration=config["grid"]["total_duration"],
            )
            for t in config["trajectories"]
        ]
        ilc_raw = dict(config["ilc"])
        ilc_raw.setdefault("ci_factor", 1.96)
        ilc_raw.setdefault("freeze_after_pe", False)
        for key in ("u_pe", "u_tilde", "u_ok"):
            ilc_raw.setdefault(key, None)
        return cls(
            plant=plant,
            grid=grid,
            trajectories=trajectories,
            ilc_raw=ilc_raw,
            noise_sigma=config.get("noise_sigma"),
            baseline_alpha=float(config.get("baseline_alpha", 1.0)),
            gpr_fixed_noise=(config.get("gpr") or {}).get("fixed_noise_variance"),
            gpr_fit_on_raw=bool((config.get("gpr") or {}).get("fit_on_raw_samples", False)),
            seed=config["seed"],
            out_dir=config.get("out_dir"),
            mode=config["mode"],
            raw=config,
        )


def default_sigma(y_d: ComplexSpectrum, omega_c: float) -> float:
    """Noise standard deviation: 1e-4 of the peak desired-output magnitude below the cutoff."""
    mask = cutoff_mask(y_d.grid, omega_c)
    return 1e-4 * float(np.abs(y_d.values[mask]).max())


def resolve_ilc_config(raw: dict, sigma: float) -> IlcConfig:
    """Fill threshold defaults from the noise level: u_pe = 10 sigma, u_tilde = 100 sigma,
    u_ok = 10 sigma (floored at the smallest positive double so zero bins never divide)."""
    tiny = float(np.finfo(float).tiny)
    u_pe = raw["u_pe"] if raw["u_pe"] is not None else 10.0 * sigma
    u_tilde = raw["u_tilde"] if raw["u_tilde"] is not None else 100.0 * sigma
    u_ok = raw["u_ok"] if raw["u_ok"] is not None else max(10.0 * sigma, tiny)
    return IlcConfig(
        omega_c=raw["omega_c"],
        rho_floor=raw["rho_floor"],
        total_iterations=raw["total_iterations"],
        pe_iterations=raw["pe_iterations"],
        u_pe=u_pe,
        u_tilde=u_tilde,
        u_ok=max(u_ok, tiny),
        ci_factor=raw["ci_factor"],
        freeze_after_pe=raw["freeze_after_pe"],
    )


@dataclass(frozen=True)
class PeComparisonReport:
    """Maximum componentwise model-data errors, without and with excitation."""

    e_a_max: float
    e_b_max: float
    e_a_max_tilde: float
    e_b_max_tilde: float
    detail: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self) -> None:
        for name in ("e_a_max", "e_b_max", "e_a_max_tilde", "e_b_max_tilde"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


def pe_comparison(
    plant: TransferFunction,
    y_d: ComplexSpectrum,
    cfg: IlcConfig,
    noise: NoiseModel,
    seed: int,
) -> PeComparisonReport:
    """Model-data error from the exact inverse input, with and without excitation.

    Both arms see the *same* noise realization: the augmented arm only changes
    the input, so any error reduction is attributable to the larger input
    magnitude. Bins with exactly zero input are skipped (no data there).
    """
    grid = y_d.grid
    mask = cutoff_mask(grid, cfg.omega_c)
    u_d = exact_inverse_input(plant, y_d, cfg.omega_c)

    rng = RngStream(seed)
    pe_cfg = cfg if cfg.pe_iterations >= 1 else dataclasses.replace(cfg, pe_iterations=1)
    u_tilde = pe_augmentation(u_d, pe_cfg, 1, rng)
    u_aug = ComplexSpectrum(grid=grid, values=u_d.values + u_tilde.values)

    n = draw_noise(noise, grid, rng)
    g = response_on_grid(plant, grid)
    truth_a, truth_b = g.real, g.imag

    def component_errors(u: ComplexSpectrum):
        ok = mask & (np.abs(u.values) > 0.0)
        m = (g[ok] * u.values[ok] + n[ok]) / u.values[ok]
        e_a = np.abs(m.real - truth_a[ok])
        e_b = np.abs(m.imag - truth_b[ok])
        full_a = np.full(grid.num_bins, np.nan)
        full_b = np.full(grid.num_bins, np.nan)
        full_a[ok] = e_a
        full_b[ok] = e_b
        max_a = float(e_a.max()) if e_a.size else 0.0
        max_b = float(e_b.max()) if e_b.size else 0.0
        return max_a, max_b, full_a, full_b

    e_a_max, e_b_max, ea, eb = component_errors(u_d)
    e_a_max_t, e_b_max_t, eat, ebt = component_errors(u_aug)

    detail = {
        "omega": grid.frequencies[mask],
        "abs_u": np.abs(u_d.values[mask]),
        "abs_u_tilde_arm": np.abs(u_aug.values[mask]),
        "e_a": ea[mask],
        "e_b": eb[mask],
        "e_a_tilde": eat[mask],
        "e_b_tilde": ebt[mask],
    }
    return PeComparisonReport(
        e_a_max=e_a_max,
        e_b_max=e_b_max,
        e_a_max_tilde=e_a_max_t,
        e_b_max_tilde=e_b_max_t,
        detail=detail,
    )


# --------------------------------------------------------------------------
# artifact writing
# --------------------------------------------------------------------------


def _fmt(value: float) -> str:
    return repr(float(value))


def _write_history_csv(path: Path, history: IterationHistory) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["iteration", "e_y_percent", "e_g_percent", "max_rho", "max_rho_star"])
        for rec in history.records:
            writer.writerow(
                [
                    rec.iteration,
                    _fmt(rec.e_y),
                    _fmt(rec.e_g),
                    _fmt(rec.rho.max()),
                    _fmt(rec.rho_star.max()),
                ]
            )


def _write_iteration_csvs(
    out_dir: Path, history: IterationHistory, plant: TransferFunction, y_d: ComplexSpectrum
) -> list:
    grid = y_d.grid
    g = response_on_grid(plant, grid)
    mask = cutoff_mask(grid, history.config.omega_c)
    t = grid.times()
    y_d_time = inverse_transform(y_d).samples
    written = []
    for rec in history.records:
        k = rec.iteration
        y_k = inverse_transform(ComplexSpectrum(grid=grid, values=g * rec.u.values)).samples
        y_m = inverse_transform(rec.y_m).samples
        u_t = inverse_transform(rec.u).samples
        time_path = out_dir / f"iter_{k}_time.csv"
        with open(time_path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["t", "y_d", "y_k", "y_m", "u_time"])
            for row in zip(t, y_d_time, y_k, y_m, u_t):
                writer.writerow([_fmt(v) for v in row])
        freq_path = out_dir / f"iter_{k}_freq.csv"
        with open(freq_path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["omega_rad_s", "|u|", "|u_hat|", "|u_tilde|", "|y_m|", "rho", "rho_star"])
            for i in np.where(mask)[0]:
                writer.writerow(
                    [
                        _fmt(grid.frequencies[i]),
                        _fmt(abs(rec.u.values[i])),
                        _fmt(abs(rec.u_hat.values[i])),
                        _fmt(abs(rec.u_tilde_spec.values[i])),
                        _fmt(abs(rec.y_m.values[i])),
                        _fmt(rec.rho[i]),
                        _fmt(rec.rho_star[i]),
                    ]
                )
        written.extend([time_path, freq_path])
        if rec.model is not None:
            snap_path = out_dir / f"model_iter_{k}.csv"
            write_model_snapshot_csv(snap_path, rec.model)
            written.append(snap_path)
    return written


def _write_gpr_debug(out_dir: Path, history: IterationHistory) -> Path:
    entries = []
    previous = None
    for rec in history.records:
        fm = rec.model
        if fm is None or fm is previous or fm.gpr_a is None:
            previous = fm
            continue
        for component, gp in (("a", fm.gpr_a), ("b", fm.gpr_b)):
            entries.append(
                {
                    "component": component,
                    "iteration": rec.iteration,
                    "signal_variance": gp.hyperparams.signal_variance,
                    "length_scale": gp.hyperparams.length_scale,
                    "noise_variance": gp.hyperparams.noise_variance,
                    "lml": gp.lml,
                }
            )
        previous = fm
    path = out_dir / "gpr_fits.json"
    with open(path, "w", encoding="utf-8") as f:
        json.dump(entries, f, indent=2, sort_keys=True)
        f.write("\n")
    return path


def _summary_line(rec) -> str:
    return f"k={rec.iteration}  e_y={rec.e_y:.4g}%  e_g={rec.e_g:.4g}%"


def _relative_paths(paths: list, root: Path) -> list:
    return sorted(str(Path(p).relative_to(root)) for p in paths)


# --------------------------------------------------------------------------
# run orchestration
# --------------------------------------------------------------------------


def _derived_seed(base_seed: int, key: int) -> int:
    return int(np.random.SeedSequence(base_seed, spawn_key=(key,)).generate_state(1, np.uint64)[0])


def execute_run(rc: RunConfig, out_dir: Path, gpr_debug: bool = False, echo=print) -> dict:
    """Run one seed of the configured mode; returns the run.json payload."""
    out_dir.mkdir(parents=True, exist_ok=True)
    fit_options = (
        gpr.FitOptions(fixed_noise_variance=rc.gpr_fixed_noise)
        if rc.gpr_fixed_noise is not None
        else None
    )
    artifacts: list = []
    trajectory_summaries = []
    prior: FrequencyModel | None = None

    if rc.mode == "pe_comparison":
        spec = rc.trajectories[0]
        y_d = forward_transform(desired_trajectory(spec, rc.grid))
        sigma = rc.noise_sigma if rc.noise_sigma is not None else default_sigma(y_d, rc.ilc_raw["omega_c"])
        cfg = resolve_ilc_config(rc.ilc_raw, sigma)
        report = pe_comparison(rc.plant, y_d, cfg, NoiseModel.isotropic(sigma), rc.seed)
        report_path = out_dir / "pe_comparison.json"
        with open(report_path, "w", encoding="utf-8") as f:
            json.dump(
                {
                    "e_a_max": report.e_a_max,
                    "e_b_max": report.e_b_max,
                    "e_a_max_tilde": report.e_a_max_tilde,
                    "e_b_max_tilde": report.e_b_max_tilde,
                    "sigma": sigma,
                },
                f,
                indent=2,
                sort_keys=True,
            )
            f.write("\n")
        csv_path = out_dir / "pe_comparison.csv"
        d = report.detail
        with open(csv_path, "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(["omega_rad_s", "abs_u", "abs_u_aug", "e_a", "e_b", "e_a_tilde", "e_b_tilde"])
            for i in range(d["omega"].size):
                writer.writerow(
                    [
                        _fmt(d["omega"][i]),
                        _fmt(d["abs_u"][i]),
                        _fmt(d["abs_u_tilde_arm"][i]),
                        _fmt(d["e_a"][i]),
                        _fmt(d["e_b"][i]),
                        _fmt(d["e_a_tilde"][i]),
                        _fmt(d["e_b_tilde"][i]),
                    ]
                )
        artifacts.extend([report_path, csv_path])
        echo(
            f"pe_comparison: e_a_max={report.e_a_max:.4g} e_b_max={report.e_b_max:.4g} "
            f"with PE: {report.e_a_max_tilde:.4g} / {report.e_b_max_tilde:.4g}"
        )
        trajectory_summaries.append(
            {
                "sigma": sigma,
                "e_a_max": report.e_a_max,
                "e_b_max": report.e_b_max,
                "e_a_max_tilde": report.e_a_max_tilde,
                "e_b_max_tilde": report.e_b_max_tilde,
            }
        )
    else:
        multi = len(rc.trajectories) > 1
        for index, spec in enumerate(rc.trajectories, start=1):
            traj_dir = out_dir / f"traj_{index}" if multi else out_dir
            traj_dir.mkdir(parents=True, exist_ok=True)
            y_d = forward_transform(desired_trajectory(spec, rc.grid))
            sigma = (
                rc.noise_sigma
                if rc.noise_sigma is not None
                else default_sigma(y_d, rc.ilc_raw["omega_c"])
            )
            cfg = resolve_ilc_config(rc.ilc_raw, sigma)
            noise = NoiseModel.isotropic(sigma)
            run_seed = rc.seed if index == 1 else _derived_seed(rc.seed, index - 1)
            if rc.mode == "iml":
                history = run_iml(
                    rc.plant,
                    y_d,
                    cfg,
                    noise,
                    prior=prior,
                    seed=run_seed,
                    fit_options=fit_options,
                    fit_on_raw_samples=rc.gpr_fit_on_raw,
                )
                prior = history.final_model
            else:
                history = run_baseline(rc.plant, y_d, cfg, noise, rc.baseline_alpha, seed=run_seed)
            for rec in history.records:
                echo(("" if not multi else f"[traj {index}] ") + _summary_line(rec))

            history_path = traj_dir / "history.csv"
            _write_history_csv(history_path, history)
            artifacts.append(history_path)
            artifacts.extend(_write_iteration_csvs(traj_dir, history, rc.plant, y_d))
            if gpr_debug and rc.mode == "iml":
                artifacts.append(_write_gpr_debug(traj_dir, history))
            trajectory_summaries.append(
                {
                    "trajectory_index": index,
                    "seed": run_seed,
                    "sigma": sigma,
                    "noise_level_percent": history.noise_level_percent,
                    "terminal_e_y_percent": history.terminal_e_y,
                    "terminal_e_g_percent": history.terminal_e_g,
                    "first_e_y_percent": history.records[0].e_y,
                }
            )

    payload = {
        "config": rc.raw,
        "mode": rc.mode,
        "seed": rc.seed,
        "results": trajectory_summaries,
        "artifacts": _relative_paths(artifacts, out_dir),
    }
    run_json = out_dir / "run.json"
    with open(run_json, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")
    return payload


def run(
    config_path,
    seed: int | None = None,
    out_dir: str | None = None,
    mode: str | None = None,
    repeats: int | None = None,
    gpr_debug: bool = False,
    echo=print,
) -> int:
    """Execute a config with optional overrides; returns the process exit code."""
    try:
        config = load_config(config_path)
        if seed is not None:
            config["seed"] = seed
        if out_dir is not None:
            config["out_dir"] = out_dir
        if mode is not None:
            config["mode"] = mode
        diags = validate_config(config)
        if diags:
            for d in diags:
                echo(f"config error: {d}")
            return 2
        rc = RunConfig.from_dict(config)
    except ConfigError as exc:
        echo(f"config error: {exc}")
        return 2

    base_dir = Path(rc.out_dir) if rc.out_dir else Path("runs") / Path(config_path).stem
    try:
        if repeats is None or repeats <= 1:
            execute_run(rc, base_dir, gpr_debug=gpr_debug, echo=echo)
        else:
            seeds = [rc.seed] + [_derived_seed(rc.seed, 1000 + i) for i in range(1, repeats)]
            configs = []
            for i, s in enumerate(seeds, start=1):
                sub = dict(rc.raw)
                sub["seed"] = s
                configs.append((RunConfig.from_dict(sub), base_dir / f"repeat_{i}"))
            with concurrent.futures.ThreadPoolExecutor(max_workers=min(repeats, 8)) as pool:
                futures = [
                    pool.submit(execute_run, sub_rc, sub_dir, gpr_debug, lambda *_: None)
                    for sub_rc, sub_dir in configs
                ]
                payloads = [f.result() for f in futures]
            aggregate = _aggregate_payloads(payloads, seeds)
            with open(base_dir / "aggregate.json", "w", encoding="utf-8") as f:
                json.dump(aggregate, f, indent=2, sort_keys=True)
                f.write("\n")
            echo(json.dumps(aggregate["summary"], indent=2, sort_keys=True))
    except (RuntimeError, ZeroDivisionError, FloatingPointError, np.linalg.LinAlgError, ValueError) as exc:
        echo(f"numerical error: {exc}")
        return 3
    return 0


def _aggregate_payloads(payloads: list, seeds: list) -> dict:
    summary: dict = {"repeats": len(payloads), "seeds": [int(s) for s in seeds]}
    metric_keys = [
        "terminal_e_y_percent",
        "terminal_e_g_percent",
        "noise_level_percent",
        "e_a_max",
        "e_a_max_tilde",
        "e_b_max",
        "e_b_max_tilde",
    ]
    for key in metric_keys:
        values = [
            result[key]
            for payload in payloads
            for result in payload["results"]
            if key in result and math.isfinite(result[key])
        ]
        if values:
            summary[f"{key}_mean"] = float(np.mean(values))
            summary[f"{key}_std"] = float(np.std(values))
    return {"summary": summary, "runs": payloads}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="freqiml",
        description="Frequency-domain iterative machine learning control experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_parser = sub.add_parser("run", help="execute a config and write artifacts")
    run_parser.add_argument("--config", required=True, help="path to a JSON run config")
    run_parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    run_parser.add_argument("--out-dir", default=None, help="override the output directory")
    run_parser.add_argument("--mode", choices=MODES, default=None, help="override the run mode")
    run_parser.add_argument(
        "--repeats", type=int, default=None, help="run N seeds concurrently and aggregate"
    )
    run_parser.add_argument(
        "--gpr-debug", action="store_true", help="dump fitted GP hyperparameters per iteration"
    )

    validate_parser = sub.add_parser("validate", help="check a config without running it")
    validate_parser.add_argument("--config", required=True)

    args = parser.parse_args(argv)
    if args.command == "validate":
        try:
            config = load_config(args.config)
        except ConfigError as exc:
            print(f"config error: {exc}")
            return 2
        diags = validate_config(config)
        if diags:
            for d in diags:
                print(f"config error: {d}")
            return 2
        print("ok")
        return 0

    return run(
        args.config,
        seed=args.seed,
        out_dir=args.out_dir,
        mode=args.mode,
        repeats=args.repeats,
        gpr_debug=args.gpr_debug,
    )


if __name__ == "__main__":
    sys.exit(main())
