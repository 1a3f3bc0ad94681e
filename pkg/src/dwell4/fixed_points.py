"""Stationary points of the pendulum dynamics.

Three families are handled:

* the eight balanced points z0 = z1 = 0, theta_i in {0, pi} of the full
  vector field, which sit at a z2 fixed by the level energies;
* the pitchfork pair of the ground pendulum at theta0 = pi;
* effective fixed points of the (z1, theta1) pendulum with z0 held frozen
  under the theta2-averaged equations.
"""

from __future__ import annotations

import csv
import enum
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .eigensolver import ModelParams
from .errors import DegenerateDenominator, NoCriticalPoint, NotAFixedPoint
from .model import STATE_FIELDS, PendulumState, eom_averaged, eom_full

RESIDUAL_TOL = 1e-8
FD_STEP = 1e-7
CENTER_TOL = 1e-8
UNSTABLE_TOL = 1e-6


class Stability(str, enum.Enum):
    CENTER = "Center"
    STABLE = "Stable"
    UNSTABLE = "Unstable"
    MIXED = "Mixed"


# ----------------------------------------------------------------------------
# jacobians


def fd_jacobian(field: Callable[[np.ndarray], np.ndarray], x: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Central-difference Jacobian of ``field`` at ``x``."""
    x = np.asarray(x, dtype=float)
    n = x.size
    jac = np.empty((np.asarray(field(x)).size, n))
    for i in range(n):
        e = np.zeros(n)
        e[i] = step
        jac[:, i] = (np.asarray(field(x + e)) - np.asarray(field(x - e))) / (2.0 * step)
    return jac


def label_spectrum(eigs: np.ndarray) -> Stability:
    re = np.abs(eigs.real)
    if np.all(re < CENTER_TOL) and np.all(np.abs(eigs) > CENTER_TOL):
        return Stability.CENTER
    if np.any(eigs.real > UNSTABLE_TOL):
        return Stability.UNSTABLE
    return Stability.MIXED


@dataclass(frozen=True)
class StabilityResult:
    eigenvalues: np.ndarray
    stability: Stability
    residual: float


_VAR_INDEX = {name: i for i, name in enumerate(STATE_FIELDS)}


def jacobian_stability(point, params: ModelParams, model="full", variables: Sequence[str] | None = None,
                       step: float = FD_STEP, residual_tol: float = RESIDUAL_TOL) -> StabilityResult:
    """Eigenvalues of the finite-difference Jacobian at a stationary point.

    ``model`` is "full" (6 variables), "averaged" (z0, theta0, z1, theta1 at the
    point's z2) or any callable mapping a state vector to its derivative.
    ``variables`` restricts the analysis to a subsystem, e.g. ("z0", "theta0");
    the remaining coordinates are held at the point.
    """
    y0 = point.as_array() if isinstance(point, PendulumState) else np.asarray(point, dtype=float)
    if callable(model):
        base, fn = y0, model
        names = variables
        idx = list(range(y0.size)) if names is None else list(names)
    else:
        model = str(model).lower()
        if model == "full":
            fn = lambda y: eom_full(y, params)
            base = y0
            names = variables or STATE_FIELDS
        elif model == "averaged":
            z2 = float(y0[4])
            fn = lambda y: eom_averaged(y[:4], params, z2=z2)
            base = y0[:4]
            names = variables or STATE_FIELDS[:4]
        else:
            raise ValueError(f"unknown model {model!r}")
        idx = [_VAR_INDEX[n] for n in names]

    full_rate = np.asarray(fn(base))
    residual = float(np.max(np.abs(full_rate[idx])))
    if residual > residual_tol:
        raise NotAFixedPoint(f"vector field residual {residual:.3g} exceeds {residual_tol:.1g}")

    def sub(x):
        y = base.copy()
        y[idx] = x
        return np.asarray(fn(y))[idx]

    eigs = np.linalg.eigvals(fd_jacobian(sub, base[idx], step))
    return StabilityResult(eigs, label_spectrum(eigs), residual)


# ----------------------------------------------------------------------------
# balanced fixed points of the full model


@dataclass(frozen=True)
class FixedPointReport:
    branch: tuple[int, int, int]
    z2_0: float
    location: PendulumState
    exists: bool
    jacobian_eigenvalues: np.ndarray | None
    stability: Stability | None
    residual: float | None


def balanced_z2(params: ModelParams, branch: tuple[int, int, int]) -> float:
    """z2 at which z0 = z1 = 0, theta_i = k_i pi is stationary."""
    k0, k1, k2 = branch
    c0, c1 = (-1) ** k0, (-1) ** k1
    sigma = (-1) ** (k0 + k1 + k2)
    p = params
    num = 2.0 * p.delta_e + 2.0 * c0 * p.j0 - 2.0 * c1 * p.j1 + p.nu1 - p.nu0
    den = p.nu0 + p.nu1 - 2.0 * p.nu01 * (2.0 + sigma)
    if abs(den) <= 1e-14 * max(abs(p.nu0), abs(p.nu1), abs(p.nu01), 1e-300):
        raise DegenerateDenominator(f"branch {branch}: interaction denominator vanishes")
    return num / den


def analytic_fixed_points(params: ModelParams) -> list[FixedPointReport]:
    """All eight balanced branches; stability only for those with |z2_0| < 1."""
    reports = []
    for branch in itertools.product((0, 1), repeat=3):
        z2 = balanced_z2(params, branch)
        exists = abs(z2) <= 1.0
        loc = PendulumState(0.0, branch[0] * math.pi, 0.0, branch[1] * math.pi, z2, branch[2] * math.pi)
        eigs = stab = res = None
        if exists and abs(z2) < 1.0:
            r = jacobian_stability(loc, params, "full")
            eigs, stab, res = r.eigenvalues, r.stability, r.residual
        reports.append(FixedPointReport(branch, z2, loc, exists, eigs, stab, res))
    return reports


def write_fixed_points_csv(reports: Sequence[FixedPointReport], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k0", "k1", "k2", "z2_0", "exists", "stability"])
        for r in reports:
            w.writerow([*r.branch, f"{r.z2_0:.17e}", str(r.exists).lower(),
                        r.stability.value if r.stability else ""])


# ----------------------------------------------------------------------------
# pitchfork of the ground pendulum


@dataclass(frozen=True)
class PitchforkReport:
    exists: bool
    z0_plus: float | None
    z0_minus: float | None
    physical: bool
    residual: float | None
    # the commonly quoted closed form sqrt(1 - ((1 + z2)/chi0)^2), kept for comparison
    quoted_exists: bool
    quoted_z0: float | None
    quoted_physical: bool


def pitchfork_points(params: ModelParams, z2: float) -> PitchforkReport:
    """Off-centre stationary points of theta0dot at theta0 = pi, z1 = 0.

    They satisfy sqrt((1 + z2)^2 - 4 z0^2) = 1/chi0, i.e.
    z0 = +-((1 + z2)/2) sqrt(1 - 1/((1 + z2) chi0)^2), and exist iff
    chi0 (1 + z2) > 1.  Always inside the bound |z0| < (1 + z2)/2 when they exist.
    """
    if not abs(z2) < 1.0:
        raise ValueError("|z2| must be < 1")
    chi0 = params.chi0
    a = 1.0 + z2
    radicand = 1.0 - 1.0 / (a * chi0) ** 2
    exists = radicand >= 0.0
    z_plus = z_minus = residual = None
    physical = False
    if exists:
        z_plus = 0.5 * a * math.sqrt(radicand)
        z_minus = -z_plus
        physical = z_plus < 0.5 * a
        if physical:
            residual = max(
                abs(eom_averaged((z, math.pi, 0.0, 0.0), params, z2=z2)[1]) for z in (z_plus, z_minus)
            )

    q_rad = 1.0 - (a / chi0) ** 2
    quoted_exists = q_rad >= 0.0
    quoted_z0 = math.sqrt(q_rad) if quoted_exists else None
    quoted_physical = quoted_exists and quoted_z0 < 0.5 * a
    return PitchforkReport(exists, z_plus, z_minus, physical, residual, quoted_exists, quoted_z0, quoted_physical)


# ----------------------------------------------------------------------------
# effective fixed points of the excited pendulum


def critical_imbalance(params: ModelParams, z2: float) -> float:
    """|z1| where the two theta1 = pi effective fixed points merge.

    The z1-dependent part of theta1dot at theta1 = pi has its extremum at
    z1c = ((1 - z2)/2) sqrt(1 - ((1 - z2) chi1)^(-2/3)); the frozen-z0 term only
    shifts it vertically, so z1c does not depend on z0.
    """
    b = 1.0 - z2
    x = b * params.chi1
    if not x >= 1.0:
        raise NoCriticalPoint(f"chi1 (1 - z2) = {x:.6g} < 1: no merge point")
    return 0.5 * b * math.sqrt(1.0 - x ** (-2.0 / 3.0))


@dataclass(frozen=True)
class EffectiveFixedPoint:
    z0_frozen: float
    theta1_0: float
    z1_0: float
    stability: Stability
    residual: float


def _theta1_rate(params: ModelParams, z2: float, z0: float, theta1: float):
    b = 1.0 - z2
    c = math.cos(theta1)
    j1, nu1, nu01 = params.j1, params.nu1, params.nu01

    def g(z1):
        s1 = np.sqrt(b * b - 4.0 * z1 * z1)
        return 2.0 * z1 * (nu1 + 2.0 * j1 * c / s1) + 4.0 * nu01 * z0

    return g


def _scan_roots(g, lo: float, hi: float, n_intervals: int, xtol: float) -> list[float]:
    x = np.linspace(lo, hi, n_intervals + 1)
    y = g(x)
    roots = [float(x[i]) for i in np.flatnonzero(y == 0.0)]
    for i in np.flatnonzero(y[:-1] * y[1:] < 0.0):
        roots.append(brentq(g, x[i], x[i + 1], xtol=xtol, rtol=4 * np.finfo(float).eps))
    return sorted(roots)


def effective_fixed_points(params: ModelParams, z2: float, z0_frozen: float,
                           n_intervals: int = 1000, xtol: float = 1e-12) -> list[EffectiveFixedPoint]:
    """Roots of theta1dot(z1) at theta1 in {0, pi} with z0 frozen (averaged model)."""
    if n_intervals < 1000:
        raise ValueError("need at least 1000 scan intervals")
    if not abs(z2) < 1.0:
        raise ValueError("|z2| must be < 1")
    if not abs(z0_frozen) < 0.5 * (1.0 + z2):
        raise ValueError("|z0_frozen| must be inside (1 + z2)/2")
    b = 1.0 - z2
    edge = 0.5 * b * (1.0 - 1e-12)
    points = []
    for theta1 in (0.0, math.pi):
        g = _theta1_rate(params, z2, z0_frozen, theta1)
        for z1 in _scan_roots(g, -edge, edge, n_intervals, xtol):
            state = PendulumState(z0_frozen, 0.0, z1, theta1, z2, 0.0)
            field = lambda y: eom_averaged(y, params)
            # z0 is frozen: only the (z1, theta1) pair is analysed
            r = jacobian_stability(state, params, field, variables=[2, 3])
            label = Stability.STABLE if r.stability is Stability.CENTER else Stability.UNSTABLE
            points.append(EffectiveFixedPoint(z0_frozen, theta1, z1, label, abs(float(g(z1)))))
    return points


def effective_curve(params: ModelParams, z2: float, z0_values: Sequence[float],
                    n_intervals: int = 1000) -> list[EffectiveFixedPoint]:
    out = []
    for z0 in z0_values:
        out.extend(effective_fixed_points(params, z2, float(z0), n_intervals))
    return out


def effective_merge(params: ModelParams, z2: float, sign: int = 1, n_intervals: int = 20000,
                    tol: float = 1e-10) -> tuple[float, float]:
    """Locate where two theta1 = pi effective fixed points annihilate.

    Bisects on z0_frozen (towards ``sign``) for the last value with four
    effective fixed points and returns (z0_merge, z1_merge); z1_merge is the
    midpoint of the two roots about to merge.  Uses root counts only.
    """
    hi_bound = 0.5 * (1.0 + z2) * (1.0 - 1e-9)

    def pi_roots(z0):
        g = _theta1_rate(params, z2, z0, math.pi)
        edge = 0.5 * (1.0 - z2) * (1.0 - 1e-12)
        return _scan_roots(g, -edge, edge, n_intervals, 1e-13)

    if len(pi_roots(0.0)) != 3:
        raise NoCriticalPoint("no triple of theta1 = pi effective fixed points at z0 = 0")
    lo, hi = 0.0, sign * hi_bound
    if len(pi_roots(hi)) == 3:
        raise NoCriticalPoint("effective fixed points survive up to the z0 bound")
    while abs(hi - lo) > tol:
        mid = 0.5 * (lo + hi)
        if len(pi_roots(mid)) == 3:
            lo = mid
        else:
            hi = mid
    roots = pi_roots(lo)
    # the merging pair sits on the side opposite to z0
    pair = roots[:2] if sign > 0 else roots[1:]
    return lo, 0.5 * (pair[0] + pair[1])


def write_effective_csv(points: Sequence[EffectiveFixedPoint], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["z0_frozen", "theta1_0", "z1_0", "stability"])
        for p in points:
            w.writerow([f"{p.z0_frozen:.17e}", f"{p.theta1_0:.17e}", f"{p.z1_0:.17e}", p.stability.value])
