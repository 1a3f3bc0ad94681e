"""Regime classification over the (V0, gamma) plane.

Only the gamma-independent integrals need the eigensolver, once per V0
column; every gamma in the column is then a rescaling.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.optimize import brentq

from .eigensolver import CoefficientCache, CoefficientIntegrals, ModelParams, PotentialSpec, solve_integrals
from .errors import ConfigError, Dwell4Error, NoRootInRange
from .fixed_points import balanced_z2
from .model import Regime, RegimeIndicators, classify_regime

# points used throughout the analysis: Rabi, Mixed, Josephson examples
MARKED_POINTS = {"A": (3.75, 2.5e-5), "B": (5.0, 2.5e-3), "C": (8.75, 2.5e-2)}

_BRANCHES = [(k0, k1, k2) for k0 in (0, 1) for k1 in (0, 1) for k2 in (0, 1)]


@dataclass(frozen=True)
class SweepGrid:
    v0_min: float = 3.0
    v0_max: float = 12.0
    v0_count: int = 60
    gamma_min: float = 1e-6
    gamma_max: float = 1e-1
    gamma_count: int = 60
    gamma_log: bool = True
    domain_halfwidth: float = 1.5
    grid_points: int = 512
    stencil_order: int = 8

    def __post_init__(self):
        if self.v0_count < 2 or self.gamma_count < 2:
            raise ConfigError("grid counts must be >= 2")
        if not (0 < self.v0_min < self.v0_max):
            raise ConfigError("need 0 < v0_min < v0_max")
        if not (0 < self.gamma_min < self.gamma_max):
            raise ConfigError("need 0 < gamma_min < gamma_max")

    @property
    def v0_values(self) -> np.ndarray:
        return np.linspace(self.v0_min, self.v0_max, self.v0_count)

    @property
    def gamma_values(self) -> np.ndarray:
        if self.gamma_log:
            return np.geomspace(self.gamma_min, self.gamma_max, self.gamma_count)
        return np.linspace(self.gamma_min, self.gamma_max, self.gamma_count)

    def spec(self, v0: float) -> PotentialSpec:
        return PotentialSpec(v0, self.domain_halfwidth, self.grid_points, self.stencil_order)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SweepGrid":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown grid keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class RegimeCell:
    v0: float
    gamma: float
    params: ModelParams | None
    indicators: RegimeIndicators | None
    barrier_ok: bool          # V0 >= E1
    hopping_ok: bool          # J_l / dE <= 0.1
    chi01_ok: bool            # chi01 <= 1
    z2_0_exists: bool
    error: str = ""

    @property
    def regime(self) -> Regime:
        return self.indicators.regime if self.indicators else Regime.INVALID

    @property
    def valid(self) -> bool:
        return self.regime is not Regime.INVALID


def z2_fixed_point_exists(params: ModelParams) -> bool:
    """True if any balanced branch has |z2_0| <= 1."""
    for b in _BRANCHES:
        try:
            if abs(balanced_z2(params, b)) <= 1.0:
                return True
        except Dwell4Error:
            continue
    return False


def make_cell(v0: float, gamma: float, integrals: CoefficientIntegrals | None, error: str = "") -> RegimeCell:
    if integrals is None:
        return RegimeCell(v0, gamma, None, None, False, False, False, False, error or "no integrals")
    p = integrals.at(gamma)
    ind = classify_regime(p)
    return RegimeCell(
        v0, gamma, p, ind,
        barrier_ok=v0 >= p.e1,
        hopping_ok=max(p.j0, p.j1) / p.delta_e <= 0.1,
        chi01_ok=p.chi01 <= 1.0,
        z2_0_exists=z2_fixed_point_exists(p),
    )


def _column_integrals(args):
    spec, cache_path = args
    try:
        if cache_path is not None:
            return CoefficientCache(cache_path).get_or_compute(spec), ""
        return solve_integrals(spec), ""
    except Dwell4Error as exc:
        return None, f"{type(exc).__name__}: {exc}"


def column_integrals(grid: SweepGrid, cache: CoefficientCache | None = None, jobs: int = 1,
                     v0_values=None) -> list[tuple[CoefficientIntegrals | None, str]]:
    v0s = grid.v0_values if v0_values is None else v0_values
    cache_path = str(cache.path) if cache is not None else None
    tasks = [(grid.spec(float(v)), cache_path) for v in v0s]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_column_integrals, tasks))
    return [_column_integrals(t) for t in tasks]


@dataclass
class RegimeMap:
    grid: SweepGrid
    cells: list[list[RegimeCell]]          # [v0 index][gamma index]
    integrals: list[CoefficientIntegrals | None]
    marked: dict[str, RegimeCell] = field(default_factory=dict)

    def labels(self) -> np.ndarray:
        return np.array([[c.regime.value for c in row] for row in self.cells])

    def chi(self, which: str) -> np.ndarray:
        return np.array([[getattr(c.indicators, which) if c.indicators else np.nan for c in row] for row in self.cells])

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["v0", "gamma", "chi0", "chi1", "chi01", "regime", "valid", "z2_0_exists"])
            for row in self.cells:
                for c in row:
                    ind = c.indicators
                    chis = (ind.chi0, ind.chi1, ind.chi01) if ind else (math.nan,) * 3
                    w.writerow([f"{c.v0:.17e}", f"{c.gamma:.17e}", *(f"{x:.17e}" for x in chis),
                                c.regime.value, str(c.valid).lower(), str(c.z2_0_exists).lower()])


def sweep(grid: SweepGrid | None = None, cache: CoefficientCache | None = None, jobs: int = 1,
          marked: dict[str, tuple[float, float]] | None = None) -> RegimeMap:
    """Classify every (V0, gamma) cell; eigensolver failures give Invalid columns."""
    grid = grid or SweepGrid()
    gammas = grid.gamma_values
    cols = column_integrals(grid, cache, jobs)
    cells = [[make_cell(float(v0), float(g), ints, err) for g in gammas]
             for v0, (ints, err) in zip(grid.v0_values, cols)]
    marked_cells = {}
    if marked is None:
        marked = MARKED_POINTS
    if marked:
        names = list(marked)
        mcols = column_integrals(grid, cache, jobs, [marked[n][0] for n in names])
        for n, (ints, err) in zip(names, mcols):
            v0, g = marked[n]
            marked_cells[n] = make_cell(v0, g, ints, err)
    return RegimeMap(grid, cells, [c[0] for c in cols], marked_cells)


# ----------------------------------------------------------------------------
# boundaries


@dataclass
class BoundaryCurves:
    curves: dict[str, list[tuple[float, float]]]
    missing: dict[str, list[float]]       # V0 columns where the curve leaves the window
    v0_e1_crossing: float | None

    def to_dict(self) -> dict:
        return {
            "curves": {k: [[float(a), float(b)] for a, b in v] for k, v in self.curves.items()},
            "missing_columns": {k: [float(x) for x in v] for k, v in self.missing.items()},
            "v0_e1_crossing": self.v0_e1_crossing,
        }

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)


def chi_level_gamma(integrals: CoefficientIntegrals, which: str, level: float, grid: SweepGrid) -> float:
    """gamma where chi_which = level in this column; exact because chi is linear in gamma."""
    unit = getattr(integrals.at(1.0), which)
    if not unit > 0:
        raise NoRootInRange(f"{which} vanishes identically")
    g = level / unit
    if not grid.gamma_min <= g <= grid.gamma_max:
        raise NoRootInRange(f"{which} = {level} at gamma = {g:.3g}, outside the window")
    return g


def existence_gamma(integrals: CoefficientIntegrals, grid: SweepGrid, n_scan: int = 400) -> float:
    """Smallest gamma in the window where some balanced branch has |z2_0| = 1."""

    def f(log_g):
        p = integrals.at(math.exp(log_g))
        best = math.inf
        for b in _BRANCHES:
            try:
                best = min(best, abs(balanced_z2(p, b)))
            except Dwell4Error:
                continue
        return best - 1.0

    xs = np.linspace(math.log(grid.gamma_min), math.log(grid.gamma_max), n_scan)
    ys = np.array([f(x) for x in xs])
    for i in range(n_scan - 1):
        if ys[i] == 0.0:
            return math.exp(xs[i])
        if ys[i] * ys[i + 1] < 0:
            return math.exp(brentq(f, xs[i], xs[i + 1], xtol=1e-12))
    raise NoRootInRange("no fixed-point existence threshold inside the gamma window")


def e1_crossing(grid: SweepGrid, v0_lo: float = 0.5) -> float:
    """V0 where the barrier height equals the non-interacting E1."""

    def f(v0):
        return v0 - solve_integrals(grid.spec(v0)).e1

    lo, hi = v0_lo, grid.v0_max
    if f(lo) * f(hi) > 0:
        raise NoRootInRange("V0 = E1 not bracketed")
    return brentq(f, lo, hi, xtol=1e-8)


def boundary_curves(rmap: RegimeMap) -> BoundaryCurves:
    grid = rmap.grid
    curves: dict[str, list] = {}
    missing: dict[str, list] = {}
    specs = [("chi0", 1.0), ("chi1", 1.0), ("chi01", 1.0), ("chi0", 0.1), ("chi1", 0.1), ("chi01", 0.1)]
    for which, level in specs:
        name = f"{which}={level:g}"
        curves[name], missing[name] = [], []
        for v0, ints in zip(grid.v0_values, rmap.integrals):
            try:
                if ints is None:
                    raise NoRootInRange("column failed")
                curves[name].append((float(v0), chi_level_gamma(ints, which, level, grid)))
            except NoRootInRange:
                missing[name].append(float(v0))

    name = "z2_0_existence"
    curves[name], missing[name] = [], []
    for v0, ints in zip(grid.v0_values, rmap.integrals):
        try:
            if ints is None:
                raise NoRootInRange("column failed")
            curves[name].append((float(v0), existence_gamma(ints, grid)))
        except NoRootInRange:
            missing[name].append(float(v0))

    try:
        v0c = e1_crossing(grid)
    except (NoRootInRange, Dwell4Error):
        v0c = None
    curves["v0=E1"] = []
    missing["v0=E1"] = []
    if v0c is not None and grid.v0_min <= v0c <= grid.v0_max:
        curves["v0=E1"] = [(v0c, grid.gamma_min), (v0c, grid.gamma_max)]
    return BoundaryCurves(curves, missing, v0c)
