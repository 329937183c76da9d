"""Twin experiments: a reference run produces coarse temperature data, a nudged run
started elsewhere must lock onto it. Also the rate fit and the parameter sweeps."""

import dataclasses
import hashlib
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
import pandas as pd
from scipy import stats

import config
from models.assimilation import (
    AssimilationSetup, ConvergenceDiagnostics, alpha_lower, condition_report,
    make_stage_observations, minimal_mu, step_assimilated,
)
from models.darcy_solver import velocity_l2_norm
from models.exceptions import (
    ConfigParseError, ConfigurationError, DarcyDAError, StepRejectedError, WindowRejectedError,
)
from models.interpolants import Interpolant, InterpolantKind, estimate_c0
from models.spectral_grid import Grid, first_eigenvalue, h1_seminorm, l2_norm, max_abs, thread_count
from models.temperature_dynamics import (
    StepParams, SystemState, initial_temperature, is_finite, step_temperature, step_with_stages,
)

logger = logging.getLogger(__name__)

REQUIRED_KEYS = ("Ra", "Nx", "Nz", "dt", "T_final", "mu", "h")
# keys that never change the computed series
OUTPUT_KEYS = ("output_csv", "snapshot_out")
SNAPSHOT_PREFIX = "snapshot:"


@dataclass
class ExperimentConfig:
    Ra: float
    Nx: int
    Nz: int
    dt: float
    T_final: float
    mu: float
    h: float
    gamma: float = config.DEFAULT_GAMMA
    Lx: float = config.DEFAULT_LX
    Ly: float = config.DEFAULT_LY
    Ny: int = config.DEFAULT_NY
    T_spinup: float = config.DEFAULT_T_SPINUP
    interpolant: str = config.DEFAULT_INTERPOLANT
    noise_level: float = config.DEFAULT_NOISE_LEVEL
    noise_seed: int = config.DEFAULT_NOISE_SEED
    field_seed: int = config.DEFAULT_FIELD_SEED
    c_universal: float = config.DEFAULT_C_UNIVERSAL
    c0_trials: int = config.DEFAULT_C0_TRIALS
    strict: bool = False
    initial: str = "default"
    theta0_amplitude: float = config.DEFAULT_THETA0_AMPLITUDE
    assim_initial: str = "zero"
    record_every: int = config.DEFAULT_RECORD_EVERY
    slice2d: bool = True
    output_csv: Optional[str] = None
    snapshot_out: Optional[str] = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        """Range checks; failures name the offending key"""
        positive = ("Ra", "Lx", "Ly", "dt", "T_final", "h", "c_universal", "theta0_amplitude")
        non_negative = ("gamma", "mu", "noise_level", "T_spinup", "noise_seed", "field_seed")
        for key in positive:
            value = getattr(self, key)
            if not (math.isfinite(value) and value > 0):
                raise ConfigParseError(f"{key} must be positive, got {value}", key=key)
        for key in non_negative:
            value = getattr(self, key)
            if not (math.isfinite(value) and value >= 0):
                raise ConfigParseError(f"{key} must be non-negative, got {value}", key=key)
        for key in ("Nx", "Nz"):
            if getattr(self, key) < config.MIN_MODES:
                raise ConfigParseError(f"{key} must be >= {config.MIN_MODES}, got {getattr(self, key)}", key=key)
        if self.slice2d and self.Ny != 1:
            raise ConfigParseError(f"Ny must be 1 when slice2d is true, got {self.Ny}", key="Ny")
        if not self.slice2d and self.Ny < config.MIN_MODES:
            raise ConfigParseError(f"Ny must be >= {config.MIN_MODES} for a 3D run, got {self.Ny}", key="Ny")
        if self.T_spinup > 0 and self.T_spinup < self.dt:
            raise ConfigParseError(f"T_spinup={self.T_spinup} is shorter than one step", key="T_spinup")
        if self.interpolant not in config.INTERPOLANT_KINDS:
            raise ConfigParseError(
                f"interpolant must be one of {config.INTERPOLANT_KINDS}, got {self.interpolant!r}", key="interpolant")
        if self.c0_trials < 100:
            raise ConfigParseError(f"c0_trials must be >= 100, got {self.c0_trials}", key="c0_trials")
        if self.record_every < 1:
            raise ConfigParseError(f"record_every must be >= 1, got {self.record_every}", key="record_every")
        if self.initial not in config.INITIAL_PROFILES and not self.initial.startswith(SNAPSHOT_PREFIX):
            raise ConfigParseError(
                f"initial must be one of {config.INITIAL_PROFILES} or {SNAPSHOT_PREFIX}<path>, got {self.initial!r}",
                key="initial")
        if self.assim_initial not in config.ASSIM_INITIAL_CHOICES:
            raise ConfigParseError(
                f"assim_initial must be one of {config.ASSIM_INITIAL_CHOICES}, got {self.assim_initial!r}",
                key="assim_initial")

    @property
    def n_steps(self):
        return int(round(self.T_final / self.dt))

    def grid(self):
        return Grid(self.Lx, self.Ly, self.Nx, self.Ny, self.Nz)

    def make_interpolant(self, grid=None):
        return Interpolant(InterpolantKind.parse(self.interpolant), self.h, grid or self.grid())

    def make_setup(self, grid=None):
        return AssimilationSetup(
            mu=self.mu, interpolant=self.make_interpolant(grid), Ra=self.Ra, gamma=self.gamma,
            noise_level=self.noise_level, noise_seed=self.noise_seed,
            c_universal=self.c_universal, strict=self.strict,
        )

    def step_params(self):
        return StepParams(self.Ra, self.gamma, self.dt)

    def canonical_items(self):
        """(key, text) pairs in declaration order, outputs excluded"""
        items = []
        for f in dataclasses.fields(self):
            if f.name in OUTPUT_KEYS:
                continue
            items.append((f.name, format_value(getattr(self, f.name))))
        return items

    def config_hash(self):
        text = "\n".join(f"{key} = {value}" for key, value in self.canonical_items())
        return hashlib.sha256(text.encode("utf-8")).hexdigest()

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if value is None:
        return ""
    return str(value)


@dataclass
class ErrorSeries:
    rows: pd.DataFrame
    metadata: dict = field(default_factory=dict)
    failed: bool = False
    diagnostics: Optional[ConvergenceDiagnostics] = None

    @property
    def t(self):
        return self.rows["t"].to_numpy()

    @property
    def xi_l2(self):
        return self.rows["xi_l2"].to_numpy()

    @property
    def w_l2(self):
        return self.rows["w_l2"].to_numpy()

    @property
    def fitted_rate(self):
        return self.diagnostics.fitted_rate if self.diagnostics else float("nan")

    @property
    def final_error(self):
        return float(self.xi_l2[-1]) if len(self.rows) else float("nan")

    def lyapunov_quantity(self):
        """||w||^4 + ||xi||^4, the decaying functional for gamma > 0"""
        return self.w_l2 ** 4 + self.xi_l2 ** 4

    def plateau_error(self):
        """Geometric mean of ||xi|| over the final third of the rows"""
        tail = self.xi_l2[-max(1, len(self.rows) // 3):]
        return float(np.exp(np.mean(np.log(np.maximum(tail, np.finfo(float).tiny)))))


def fit_exponential_rate(series, window=None):
    """Least-squares decay rate of log ||xi|| against t over window = (t_start, t_end); positive means decaying"""
    t, values = _series_arrays(series)
    if window is not None:
        t_start, t_end = window
        inside = (t >= t_start) & (t <= t_end)
        t, values = t[inside], values[inside]
    if len(t) < config.MIN_FIT_SAMPLES:
        raise WindowRejectedError(f"Fitting window holds {len(t)} samples, need {config.MIN_FIT_SAMPLES}")
    if np.any(~np.isfinite(values)) or np.any(values <= 0):
        raise WindowRejectedError("Fitting window contains non-positive or non-finite norms")
    fit = stats.linregress(t, np.log(values))
    return float(-fit.slope)


def _series_arrays(series):
    if isinstance(series, ErrorSeries):
        return series.t, series.xi_l2
    if isinstance(series, pd.DataFrame):
        return series["t"].to_numpy(), series["xi_l2"].to_numpy()
    t, values = series
    return np.asarray(t, dtype=float), np.asarray(values, dtype=float)


def is_monotone(values, jitter=config.MONOTONE_JITTER):
    """No sample exceeds (1 + jitter) times the running minimum before it"""
    values = np.asarray(values, dtype=float)
    if len(values) < 2:
        return True
    running_min = np.minimum.accumulate(values)[:-1]
    return bool(np.all(values[1:] <= (1 + jitter) * running_min))


def _stall_start(t, xi):
    """First row at which ||xi|| has settled onto a noise or discretization floor (len(xi) if it never does)

    The series counts as stalled when its first third falls by more than
    STALL_RATIO while its final third falls by less than STALL_DROP; rows
    within STALL_RATIO of the final-third level are then cut.
    """
    n = len(xi)
    third = n // 3
    if third < 3 or np.any(xi <= 0):
        return n
    logs = np.log(xi)
    early = -stats.linregress(t[:third], logs[:third]).slope * (t[third - 1] - t[0])
    late = -stats.linregress(t[-third:], logs[-third:]).slope * (t[-1] - t[-third])
    if early <= np.log(config.STALL_RATIO) or late >= np.log(config.STALL_DROP):
        return n
    level = float(np.exp(np.mean(logs[-third:])))
    settled = np.nonzero(xi <= config.STALL_RATIO * level)[0]
    return int(settled[0]) if len(settled) else n


def _fitting_window(series, floor_ratio=config.FLOOR_RATIO):
    """Rows above the round-off floor and before any stall, trimmed to the longest monotone tail
    of the decaying functional"""
    xi = series.xi_l2
    if len(xi) == 0 or xi[0] <= 0:
        return None, False
    usable = np.nonzero(xi > floor_ratio * xi[0])[0]
    last = usable[-1] + 1 if len(usable) else 0
    last = _stall_start(series.t[:last], xi[:last])
    if last == 0:
        return None, False
    gamma = series.metadata.get("gamma", 0.0)
    functional = series.lyapunov_quantity() if gamma > 0 else xi
    for start in range(0, max(0, last - config.MIN_FIT_SAMPLES) + 1):
        if is_monotone(functional[start:last]):
            return (series.t[start], series.t[last - 1]), True
    return (series.t[0], series.t[last - 1]) if last else None, False


def diagnose(series, setup, lambda1, theta_sup, t0):
    window, monotone = _fitting_window(series)
    rate = float("nan")
    if window is not None:
        try:
            rate = fit_exponential_rate(series, window)
        except WindowRejectedError as exc:
            logger.warning("No decay rate: %s", exc)
    return ConvergenceDiagnostics(alpha_lower(setup, lambda1, theta_sup), rate, t0, monotone)


@lru_cache(maxsize=64)
def cached_c0(interpolant, trials):
    return estimate_c0(interpolant, trials)


def reference_initial_state(cfg, grid):
    if cfg.initial.startswith(SNAPSHOT_PREFIX):
        from utils.file_handler import load_field
        theta = load_field(cfg.initial[len(SNAPSHOT_PREFIX):])
        if theta.grid != grid:
            raise ConfigurationError(f"Snapshot grid {theta.grid.shape} does not match the configured {grid.shape}")
    else:
        theta = initial_temperature(grid, cfg.initial, cfg.theta0_amplitude, cfg.field_seed)
    return SystemState.from_temperature(theta, cfg.Ra, cfg.gamma)


def _advance_subcycled(state, params):
    """One step of params.dt, split into 2, 4, ... substeps while the CFL check rejects it"""
    substeps = 1
    while True:
        sub = StepParams(params.Ra, params.gamma, params.dt / substeps, cfl_limit=params.cfl_limit)
        try:
            trial = state
            for _ in range(substeps):
                trial = step_temperature(trial, sub)
            if substeps > 1:
                logger.debug("Spin-up step at t=%.6g needed %d substeps", state.t, substeps)
            return trial
        except StepRejectedError:
            substeps *= 2
            if substeps > config.MAX_SPINUP_SUBCYCLES:
                raise


def spin_up(cfg, grid=None):
    """Evolve the reference alone for T_spinup, longer if needed to reach max|theta| <= ABSORBING_BOUND.

    Returns the state with its clock reset to 0 and the time at which the
    absorbing bound was first met (None if it never was).
    """
    grid = grid or cfg.grid()
    state = reference_initial_state(cfg, grid)
    params = cfg.step_params()
    limit = config.MAX_SPINUP_FACTOR * max(cfg.T_spinup, cfg.dt)
    t0 = 0.0 if max_abs(state.theta) <= config.ABSORBING_BOUND else None
    steps = 0
    while True:
        elapsed = steps * cfg.dt
        if elapsed >= cfg.T_spinup - 1e-12 and t0 is not None:
            break
        if elapsed >= limit:
            logger.warning("Reference did not reach max|theta| <= %g within t=%g", config.ABSORBING_BOUND, limit)
            break
        state = _advance_subcycled(state, params)
        steps += 1
        if not is_finite(state):
            raise DarcyDAError(f"Reference blew up during spin-up at t={steps * cfg.dt:.6g}")
        if t0 is None and max_abs(state.theta) <= config.ABSORBING_BOUND:
            t0 = steps * cfg.dt
        if steps % 1000 == 0:
            logger.info("Spin-up t=%.4g max|theta|=%.4g", steps * cfg.dt, max_abs(state.theta))
    state.t = 0.0
    return state, t0


def _assimilated_initial(cfg, reference):
    if cfg.assim_initial == "reference":
        return reference.copy()
    return SystemState.zeros(reference.grid, reference.t)


def _error_row(reference, assimilated):
    xi = reference.theta - assimilated.theta
    w = reference.u - assimilated.u
    return (reference.t, l2_norm(xi), h1_seminorm(xi), velocity_l2_norm(w),
            max_abs(reference.theta), max_abs(assimilated.theta))


def run_twin_experiment(cfg, reference=None, t0=None, write_output=True):
    """Spin up (unless a spun-up reference is given), then run reference and nudged systems in lockstep"""
    grid = cfg.grid()
    setup = cfg.make_setup(grid)
    setup.c0 = cached_c0(setup.interpolant, cfg.c0_trials)
    lambda1 = first_eigenvalue(grid)
    report = condition_report(setup, lambda1)
    metadata = {
        "config_hash": cfg.config_hash(),
        "gamma": cfg.gamma,
        "c0": report["c0"],
        "mu_condition": report["mu_condition"],
        "mu_margin": report["mu_margin"],
        "h_condition": report["h_condition"],
        "mu_star": minimal_mu(setup, lambda1),
        "c_universal": report["c_universal"],
    }

    rows = []
    failed = False
    theta_sup = 0.0
    try:
        if reference is None:
            reference, t0 = spin_up(cfg, grid)
        else:
            reference = reference.copy()
        assimilated = _assimilated_initial(cfg, reference)
        params = cfg.step_params()
        rows.append(_error_row(reference, assimilated))
        theta_sup = rows[-1][4]
        for step in range(1, cfg.n_steps + 1):
            # observe the reference at its own Runge-Kutta stages
            next_reference, stages = step_with_stages(reference, params)
            observations = make_stage_observations(stages, setup, assimilated.t, cfg.dt)
            assimilated = step_assimilated(assimilated, observations, setup, cfg.dt)
            reference = next_reference
            reference.t = assimilated.t = step * cfg.dt
            if not (is_finite(reference) and is_finite(assimilated)):
                logger.error("Non-finite state at t=%.6g; keeping the last valid row", reference.t)
                failed = True
                break
            if step % cfg.record_every == 0 or step == cfg.n_steps:
                row = _error_row(reference, assimilated)
                if not all(math.isfinite(v) for v in row):
                    failed = True
                    break
                rows.append(row)
                theta_sup = max(theta_sup, row[4])
    except StepRejectedError as exc:
        logger.error("Run rejected: %s", exc)
        failed = True
    except ConfigurationError:
        raise
    except DarcyDAError as exc:
        logger.error("Run failed: %s", exc)
        failed = True

    series = ErrorSeries(pd.DataFrame(rows, columns=config.CSV_COLUMNS), metadata, failed)
    series.diagnostics = diagnose(series, setup, lambda1, theta_sup, t0)
    metadata.update({
        "fitted_rate": series.diagnostics.fitted_rate,
        "monotone": series.diagnostics.monotone,
        "t0_estimate": t0,
        "alpha_lower": series.diagnostics.alpha_lower,
        "failed": failed,
    })
    logger.info("Twin experiment mu=%g h=%g: final ||xi||=%.3e, rate=%.4g%s", cfg.mu, cfg.h,
                series.final_error if len(rows) else float("nan"), series.fitted_rate,
                " (FAILED)" if failed else "")

    if write_output:
        _write_outputs(cfg, series, assimilated if rows else None)
    return series


def _write_outputs(cfg, series, assimilated):
    from utils.file_handler import FileHandler
    handler = FileHandler()
    if cfg.output_csv:
        handler.write_series(series, cfg.output_csv)
    if cfg.snapshot_out and assimilated is not None:
        handler.save_state(assimilated, cfg.snapshot_out)


# axes that leave the reference trajectory untouched
SHARED_REFERENCE_AXES = ("mu", "h", "noise_level")


def sweep(cfg, axis, values, max_workers=None):
    """One twin experiment per value of a single parameter, run concurrently"""
    if axis not in config.SWEEP_AXES:
        raise ConfigurationError(f"Cannot sweep {axis!r}; choose one of {config.SWEEP_AXES}")
    values = [float(v) for v in values]
    if not values:
        raise ConfigurationError("Sweep needs at least one value")
    if not all(math.isfinite(v) for v in values):
        raise ConfigurationError(f"Sweep values must be finite, got {values}")
    if any(b < a for a, b in zip(values, values[1:])):
        raise ConfigurationError(f"Sweep values must be sorted, got {values}")

    reference, t0 = None, None
    if axis in SHARED_REFERENCE_AXES:
        reference, t0 = spin_up(cfg)

    def run_row(value):
        row_cfg = cfg.replace(**{axis: value, "output_csv": None, "snapshot_out": None})
        try:
            series = run_twin_experiment(row_cfg, reference, t0, write_output=False)
        except ConfigurationError as exc:
            logger.error("Sweep row %s=%g rejected: %s", axis, value, exc)
            return {"value": value, "fitted_rate": float("nan"), "final_error": float("nan"),
                    "conditions_met": False, "plateau_error": float("nan"), "failed": True}
        meta = series.metadata
        return {
            "value": value,
            "fitted_rate": series.fitted_rate,
            "final_error": series.final_error,
            "conditions_met": bool(meta["mu_condition"] and meta["h_condition"]),
            "plateau_error": series.plateau_error(),
            "failed": series.failed,
        }

    workers = max_workers or thread_count()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        table = pd.DataFrame(list(pool.map(run_row, values)))
    table.attrs["axis"] = axis
    return table
