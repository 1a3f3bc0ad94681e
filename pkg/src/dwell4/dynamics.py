"""Time evolution of the pendulum variables and trajectory diagnostics."""

from __future__ import annotations

import csv
import enum
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict, replace
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from . import _integrator as _int
from .eigensolver import ModelParams
from .errors import ConfigError, InsufficientOscillations, NoCrossings
from .model import (
    STATE_FIELDS,
    PendulumState,
    averaged_hamiltonian_kernel,
    check_bounds,
    hamiltonian_kernel,
    normal_mode_frequencies,
    wrap_phase,
)


class Model(str, enum.Enum):
    FULL = "full"
    AVERAGED = "averaged"
    TWO_MODE = "two-mode"


class Termination(str, enum.Enum):
    COMPLETED = "Completed"
    BOUNDARY_HIT = "BoundaryHit"
    STEP_FAILURE = "StepFailure"


_STATUS = {
    _int.COMPLETED: Termination.COMPLETED,
    _int.BOUNDARY_HIT: Termination.BOUNDARY_HIT,
    _int.STEP_FAILURE: Termination.STEP_FAILURE,
}

BOUNDARY_EPS = 1e-9
ENERGY_FLOOR = 1e-3


@dataclass(frozen=True)
class IntegratorConfig:
    """Integration settings.

    ``t_end=None`` means 50 periods of the slow linearized mode (2 pi / omega_minus
    at the initial z2); ``sample_interval=None`` gives 4000 samples per run.
    ``max_step=None`` bounds steps by 0.01 / max(dE, omega_plus) only for the
    first step; later steps are free.
    """

    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    max_step: float | None = None
    t_end: float | None = None
    sample_interval: float | None = None
    model: Model = Model.FULL
    method: str = "dopri5"           # or "rk8-fixed" (step = max_step)
    energy_audit: float = 1e-6
    max_steps: int = 50_000_000

    def __post_init__(self):
        object.__setattr__(self, "model", Model(self.model))
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ConfigError("tolerances must be positive")
        if self.max_step is not None and not self.max_step > 0:
            raise ConfigError("max_step must be positive")
        if self.t_end is not None and not self.t_end > 0:
            raise ConfigError("t_end must be positive")
        if self.sample_interval is not None:
            if not self.sample_interval > 0:
                raise ConfigError("sample_interval must be positive")
            if self.t_end is not None and self.sample_interval > self.t_end:
                raise ConfigError("sample_interval must not exceed t_end")
        if self.method not in ("dopri5", "rk8-fixed"):
            raise ConfigError(f"unknown method {self.method!r}")
        if self.method == "rk8-fixed" and self.max_step is None:
            raise ConfigError("rk8-fixed needs max_step (the fixed step size)")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["model"] = self.model.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "IntegratorConfig":
        allowed = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - allowed
        if unknown:
            raise ConfigError(f"unknown integrator keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray          # (n, 6) in STATE_FIELDS order
    energy: np.ndarray
    termination: Termination
    params: ModelParams
    config: IntegratorConfig
    max_energy_drift: float = 0.0
    n_steps: int = 0
    n_rejected: int = 0
    message: str = ""

    def __len__(self):
        return self.times.size

    def column(self, variable: str) -> np.ndarray:
        try:
            return self.states[:, STATE_FIELDS.index(variable)]
        except ValueError:
            raise ConfigError(f"unknown variable {variable!r}; expected one of {STATE_FIELDS}") from None

    def state(self, i: int) -> PendulumState:
        return PendulumState.from_array(self.states[i])

    @property
    def final(self) -> PendulumState:
        return self.state(-1)

    def wrapped_states(self) -> np.ndarray:
        out = self.states.copy()
        out[:, 1] = wrap_phase(out[:, 1])
        out[:, 3] = wrap_phase(out[:, 3])
        return out

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", *STATE_FIELDS, "energy"])
            for t, y, e in zip(self.times, self.states, self.energy):
                writer.writerow([f"{t:.17e}", *(f"{v:.17e}" for v in y), f"{e:.17e}"])


def energy_function(model: Model):
    return hamiltonian_kernel if Model(model) is Model.FULL else averaged_hamiltonian_kernel


def effective_params(params: ModelParams, model: Model) -> ModelParams:
    """Two-mode runs are the averaged equations with the inter-level coupling removed."""
    return params.replace(nu01=0.0) if Model(model) is Model.TWO_MODE else params


def default_t_end(params: ModelParams, z2: float, periods: float = 50.0) -> float:
    w_minus = normal_mode_frequencies(params, z2)[0]
    if not w_minus > 0:
        raise ConfigError("slow mode frequency vanishes; give t_end explicitly")
    return periods * 2.0 * math.pi / w_minus


def _initial_step(params: ModelParams, z2: float) -> float:
    try:
        w_plus = normal_mode_frequencies(params, z2)[3]
    except Exception:
        w_plus = 0.0
    return 0.01 / max(abs(params.delta_e), w_plus, 1e-12)


def integrate(initial, params: ModelParams, cfg: IntegratorConfig | None = None,
              t_start: float = 0.0) -> Trajectory:
    """Integrate from ``initial`` and sample every ``cfg.sample_interval``.

    Runs stop early with ``BoundaryHit`` when a population imbalance comes
    within 1e-9 of its bound, and with ``StepFailure`` when the step-size
    controller gives up or the energy audit bound is exceeded.  A negative
    ``cfg.t_end`` is not allowed; use ``integrate_backward`` instead.
    """
    cfg = cfg or IntegratorConfig()
    y0 = initial.as_array() if isinstance(initial, PendulumState) else np.asarray(initial, dtype=float).copy()
    check_bounds(y0)
    model = cfg.model
    run_params = effective_params(params, model)
    t_end = cfg.t_end if cfg.t_end is not None else default_t_end(params, y0[4])
    dt = cfg.sample_interval if cfg.sample_interval is not None else t_end / 4000.0
    return _run(y0, run_params, cfg, model, t_start, t_start + t_end, dt)


def integrate_backward(initial, params: ModelParams, cfg: IntegratorConfig, t_start: float = 0.0) -> Trajectory:
    """Integrate from ``t_start`` back to ``t_start - cfg.t_end``."""
    y0 = initial.as_array() if isinstance(initial, PendulumState) else np.asarray(initial, dtype=float).copy()
    check_bounds(y0)
    if cfg.t_end is None:
        raise ConfigError("backward integration needs an explicit t_end")
    dt = cfg.sample_interval or cfg.t_end / 4000.0
    return _run(y0, effective_params(params, cfg.model), cfg, cfg.model, t_start, t_start - cfg.t_end, -dt)


def _sample_times(t0, t1, dt):
    n = int(math.floor(abs(t1 - t0) / abs(dt) + 1e-9))
    times = t0 + dt * np.arange(n + 1)
    if abs(times[-1] - t1) > 1e-9 * max(1.0, abs(t1)):
        times = np.append(times, t1)
    else:
        times[-1] = t1
    return times


def _run(y0, params, cfg, model, t0, t1, dt) -> Trajectory:
    times = _sample_times(t0, t1, dt)
    out = np.zeros((times.size, 6))
    p = params.as_array()
    kernel_model = _int.FULL if model is Model.FULL else _int.AVERAGED
    if cfg.method == "dopri5":
        h0 = _initial_step(params, y0[4])
        max_step = cfg.max_step if cfg.max_step is not None else np.inf
        n_fill, status, n_steps, n_rej, t_reached = _int.integrate_dopri5(
            kernel_model, y0, p, times, cfg.rel_tol, cfg.abs_tol, max_step, h0,
            BOUNDARY_EPS, cfg.max_steps, out,
        )
    else:
        n_fill, status, n_steps, n_rej, t_reached = _int.integrate_rk8_fixed(
            kernel_model, y0, p, times, cfg.max_step, BOUNDARY_EPS, out,
            _int._A8, _int._B8, _int._C8,
        )
    times = times[:n_fill].copy()
    states = out[:n_fill].copy()
    termination = _STATUS[status]
    if termination is Termination.BOUNDARY_HIT:
        times[-1] = t_reached

    efun = energy_function(model)
    energy = np.array([efun(y, p) for y in states])
    drift = float(np.max(np.abs(energy - energy[0])) / max(abs(energy[0]), ENERGY_FLOOR))
    message = ""
    if termination is Termination.COMPLETED and drift > cfg.energy_audit:
        termination = Termination.STEP_FAILURE
        message = f"energy audit failed: relative drift {drift:.3g} > {cfg.energy_audit:.3g}"
    elif termination is Termination.STEP_FAILURE:
        message = f"step-size control failed at t = {t_reached:.6g}"
    elif termination is Termination.BOUNDARY_HIT:
        message = f"imbalance bound reached at t = {t_reached:.6g}"
    return Trajectory(times, states, energy, termination, params, cfg, drift, int(n_steps), int(n_rej), message)


# ----------------------------------------------------------------------------
# diagnostics


def _upward_crossings(t: np.ndarray, x: np.ndarray, hysteresis: float) -> np.ndarray:
    """Times where x rises through 0, linearly interpolated.

    A new upward crossing is accepted only after x has dropped below -hysteresis,
    which suppresses chatter from small fast ripples riding on the signal.
    """
    crossings = []
    armed = x[0] < -hysteresis
    for i in range(x.size - 1):
        if x[i] < -hysteresis:
            armed = True
        if armed and x[i] < 0.0 <= x[i + 1]:
            frac = -x[i] / (x[i + 1] - x[i])
            crossings.append(t[i] + frac * (t[i + 1] - t[i]))
            armed = False
    return np.asarray(crossings)


def _count_mean_crossings(x: np.ndarray) -> int:
    s = np.signbit(x)
    return int(np.count_nonzero(s[1:] != s[:-1]))


def estimate_frequency(traj: Trajectory, variable: str = "z0") -> tuple[float, float]:
    """Angular frequency of ``variable`` from its mean-crossings.

    Returns (frequency, uncertainty) where the uncertainty is the standard
    deviation of the per-period angular frequencies.
    """
    x = traj.column(variable)
    if variable.startswith("theta") and variable != "theta2":
        x = wrap_phase(x)
    return frequency_from_samples(traj.times, x)


def frequency_from_samples(t: np.ndarray, x: np.ndarray) -> tuple[float, float]:
    x = np.asarray(x, dtype=float) - np.mean(x)
    if _count_mean_crossings(x) < 5:
        raise InsufficientOscillations("fewer than 5 mean-crossings")
    ups = _upward_crossings(np.asarray(t, dtype=float), x, 0.1 * np.std(x))
    if ups.size < 3:
        raise InsufficientOscillations("fewer than 2 full periods")
    periods = np.diff(ups)
    freq = 2.0 * math.pi * periods.size / (ups[-1] - ups[0])
    spread = float(np.std(2.0 * math.pi / periods)) if periods.size > 1 else 0.0
    return freq, spread


@dataclass(frozen=True)
class TrappingReport:
    trapped: bool
    time_mean: float
    min: float
    max: float


SELF_TRAPPING_THRESHOLD = 0.05


def detect_self_trapping(traj: Trajectory, variable: str = "z0",
                         threshold: float = SELF_TRAPPING_THRESHOLD) -> TrappingReport:
    """Trapped iff the variable never changes sign and |time mean| > threshold."""
    if traj.termination is not Termination.COMPLETED:
        raise ValueError(f"trajectory did not complete ({traj.termination.value})")
    x = traj.column(variable)
    duration = traj.times[-1] - traj.times[0]
    mean = float(np.trapezoid(x, traj.times) / duration) if duration > 0 else float(x[0])
    lo, hi = float(x.min()), float(x.max())
    one_sided = lo > 0.0 or hi < 0.0
    return TrappingReport(bool(one_sided and abs(mean) > threshold), mean, lo, hi)


# ----------------------------------------------------------------------------
# phase portraits


@dataclass
class PortraitTrajectory:
    initial: PendulumState
    times: np.ndarray
    x: np.ndarray               # first plane variable (wrapped if a phase)
    y: np.ndarray
    termination: Termination | None
    error: str = ""


@dataclass
class Portrait:
    plane: tuple[str, str]
    params: ModelParams
    config: IntegratorConfig
    trajectories: list[PortraitTrajectory] = field(default_factory=list)

    def write(self, directory, manifest_extra: dict | None = None) -> Path:
        """One CSV per initial condition plus ``manifest.json``."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        files = []
        for i, tr in enumerate(self.trajectories):
            name = f"trajectory_{i:04d}.csv"
            with open(directory / name, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["t", self.plane[0], self.plane[1]])
                for row in zip(tr.times, tr.x, tr.y):
                    writer.writerow([f"{v:.17e}" for v in row])
            files.append(name)
        manifest = {
            "params": self.params.to_dict(),
            "cfg": self.config.to_dict(),
            "plane": list(self.plane),
            "initial_conditions": [json.loads(tr.initial.to_json()) for tr in self.trajectories],
            "files": files,
            "terminations": [tr.termination.value if tr.termination else None for tr in self.trajectories],
            "errors": [tr.error for tr in self.trajectories],
        }
        if manifest_extra:
            manifest.update(manifest_extra)
        path = directory / "manifest.json"
        path.write_text(json.dumps(manifest, indent=1, sort_keys=True))
        return path


def _maybe_wrap(name: str, values: np.ndarray) -> np.ndarray:
    return wrap_phase(values) if name in ("theta0", "theta1") else values


def _portrait_worker(args):
    initial, params, cfg, plane = args
    try:
        traj = integrate(initial, params, cfg)
    except Exception as exc:  # recorded, not fatal
        return PortraitTrajectory(initial, np.empty(0), np.empty(0), np.empty(0), None, f"{type(exc).__name__}: {exc}")
    return PortraitTrajectory(
        initial,
        traj.times,
        _maybe_wrap(plane[0], traj.column(plane[0])),
        _maybe_wrap(plane[1], traj.column(plane[1])),
        traj.termination,
        traj.message,
    )


def phase_portrait(initial_conditions, params: ModelParams, cfg: IntegratorConfig | None = None,
                   plane: tuple[str, str] = ("z1", "theta1"), jobs: int = 1) -> Portrait:
    """Integrate every initial condition and keep the (wrapped) plane projection."""
    cfg = cfg or IntegratorConfig()
    for name in plane:
        if name not in STATE_FIELDS:
            raise ConfigError(f"unknown plane variable {name!r}")
    tasks = [(ic if isinstance(ic, PendulumState) else PendulumState(*ic), params, cfg, tuple(plane))
             for ic in initial_conditions]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_portrait_worker, tasks))
    else:
        results = [_portrait_worker(t) for t in tasks]
    return Portrait(tuple(plane), params, cfg, results)


def portrait_grid(params: ModelParams, fixed: PendulumState, plane=("z1", "theta1"),
                  z_values=(), theta_values=(0.0, math.pi)) -> list[PendulumState]:
    """Initial conditions on a (z, theta) lattice with the other variables from ``fixed``."""
    zname, tname = plane
    out = []
    for th in theta_values:
        for z in z_values:
            out.append(replace(fixed, **{zname: float(z), tname: float(th)}))
    return out


# ----------------------------------------------------------------------------
# Poincare sections


def poincare_section(traj: Trajectory, section: tuple[str, float] = ("theta0", 0.0), direction: int = 1,
                     plane: tuple[str, str] = ("z1", "theta1")) -> np.ndarray:
    """Points in ``plane`` where ``section`` variable crosses its value.

    Phase variables are treated modulo 2 pi, so every pass through value + 2 pi k
    counts.  ``direction`` is +1 (increasing), -1 (decreasing) or 0 (both).
    Points are linearly interpolated between samples; plane phases are wrapped.
    """
    name, value = section
    s = traj.column(name) - value
    if name.startswith("theta"):
        winding = np.floor(s / (2.0 * math.pi))
        idx = np.flatnonzero(winding[1:] != winding[:-1])
        pts = []
        for i in idx:
            rising = winding[i + 1] > winding[i]
            if direction > 0 and not rising or direction < 0 and rising:
                continue
            target = 2.0 * math.pi * (winding[i + 1] if rising else winding[i])
            frac = (target - s[i]) / (s[i + 1] - s[i])
            pts.append((i, frac))
    else:
        sign = np.signbit(s)
        idx = np.flatnonzero(sign[1:] != sign[:-1])
        pts = []
        for i in idx:
            rising = s[i + 1] > s[i]
            if direction > 0 and not rising or direction < 0 and rising:
                continue
            frac = -s[i] / (s[i + 1] - s[i])
            pts.append((i, frac))
    if not pts:
        raise NoCrossings(f"{name} never crosses {value}")

    a = traj.column(plane[0])
    b = traj.column(plane[1])
    result = np.empty((len(pts), 2))
    for row, (i, frac) in enumerate(pts):
        result[row, 0] = a[i] + frac * (a[i + 1] - a[i])
        result[row, 1] = b[i] + frac * (b[i + 1] - b[i])
    result[:, 0] = _maybe_wrap(plane[0], result[:, 0])
    result[:, 1] = _maybe_wrap(plane[1], result[:, 1])
    return result


def hull_area(points: np.ndarray) -> float:
    """Convex-hull area of 2-D section points (0 for degenerate sets)."""
    pts = np.asarray(points, dtype=float)
    if pts.shape[0] < 3:
        return 0.0
    try:
        return float(ConvexHull(pts).volume)
    except QhullError:
        return 0.0


def occupied_cells(points: np.ndarray, bins: int = 20) -> int:
    """Number of cells of a bins x bins box over the points' bounding box that contain a point.

    A smooth invariant curve occupies O(bins) cells; a scattered (area-filling)
    set approaches bins**2 given enough points.
    """
    pts = np.asarray(points, dtype=float)
    lo = pts.min(axis=0)
    span = np.where(pts.max(axis=0) - lo > 0, pts.max(axis=0) - lo, 1.0)
    cells = np.minimum(((pts - lo) / span * bins).astype(int), bins - 1)
    return int(np.unique(cells[:, 0] * bins + cells[:, 1]).size)


def chaos_candidate(points: np.ndarray, area_threshold: float = 1e-3, bins: int = 20,
                    fill_factor: float = 4.0) -> bool:
    """Heuristic flag only: positive hull area and more occupied cells than a curve would need."""
    pts = np.asarray(points, dtype=float)
    if pts.shape[0] < 10:
        return False
    return hull_area(pts) > area_threshold and occupied_cells(pts, bins) > fill_factor * bins


def write_section_csv(points: np.ndarray, plane: tuple[str, str], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(plane))
        for a, b in points:
            writer.writerow([f"{a:.17e}", f"{b:.17e}"])


__all__ = [
    "Model",
    "Termination",
    "IntegratorConfig",
    "Trajectory",
    "integrate",
    "integrate_backward",
    "estimate_frequency",
    "frequency_from_samples",
    "detect_self_trapping",
    "TrappingReport",
    "phase_portrait",
    "portrait_grid",
    "Portrait",
    "PortraitTrajectory",
    "poincare_section",
    "hull_area",
    "occupied_cells",
    "chaos_candidate",
    "default_t_end",
]
