"""Reduced phase space of the four-mode model: three coupled non-rigid pendula.

State layout everywhere is ``[z0, theta0, z1, theta1, z2, theta2]``: left-right
imbalances z0, z1 of the ground/excited level, ground-minus-excited fraction
z2, and their conjugate phases.  The renormalized Hamiltonian is
``H' = 2 H / N - E0 - E1``; the vector fields below are its exact canonical
gradients (zdot_i = -dH'/dtheta_i, thetadot_i = +dH'/dz_i).

Parameters enter compiled kernels as the packed array of
``ModelParams.as_array()``: ``[e0, e1, j0, j1, nu0, nu1, nu01, delta_e]``.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, astuple

import numpy as np
from numba import njit

from .eigensolver import ModelParams
from .errors import DegeneratePopulation, NegativeSquare, OutOfBounds

_J0, _J1, _NU0, _NU1, _NU01, _DE = 2, 3, 4, 5, 6, 7

STATE_FIELDS = ("z0", "theta0", "z1", "theta1", "z2", "theta2")


@dataclass(frozen=True)
class PendulumState:
    z0: float = 0.0
    theta0: float = 0.0
    z1: float = 0.0
    theta1: float = 0.0
    z2: float = 0.0
    theta2: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)

    @classmethod
    def from_array(cls, y) -> "PendulumState":
        return cls(*(float(v) for v in y))

    def to_json(self) -> str:
        return json.dumps([float(v) for v in astuple(self)])

    @classmethod
    def from_json(cls, text: str) -> "PendulumState":
        values = json.loads(text)
        if len(values) != 6:
            raise ValueError("PendulumState JSON must be a 6-element array")
        return cls(*values)

    def bound_margins(self) -> tuple[float, float, float]:
        """Distances to |z0| = (1+z2)/2, |z1| = (1-z2)/2 and |z2| = 1 (positive inside)."""
        return (
            0.5 * (1.0 + self.z2) - abs(self.z0),
            0.5 * (1.0 - self.z2) - abs(self.z1),
            1.0 - abs(self.z2),
        )

    def is_interior(self) -> bool:
        return min(self.bound_margins()) > 0.0

    def wrapped(self) -> "PendulumState":
        """Phases theta0, theta1 folded into (-pi, pi]; theta2 left unwrapped."""
        return PendulumState(self.z0, wrap_phase(self.theta0), self.z1, wrap_phase(self.theta1), self.z2, self.theta2)


def wrap_phase(theta):
    """Map angles into (-pi, pi]."""
    wrapped = np.pi - np.mod(np.pi - np.asarray(theta, dtype=float), 2.0 * np.pi)
    return float(wrapped) if np.ndim(wrapped) == 0 else wrapped


def _as_state_array(state) -> np.ndarray:
    if isinstance(state, PendulumState):
        return state.as_array()
    return np.asarray(state, dtype=np.float64)


def _as_params_array(params) -> np.ndarray:
    if isinstance(params, ModelParams):
        return params.as_array()
    return np.asarray(params, dtype=np.float64)


def check_bounds(y: np.ndarray) -> None:
    z0, _, z1, _, z2, _ = y
    if not abs(z2) < 1.0:
        raise OutOfBounds(f"|z2| = {abs(z2)} must be < 1")
    if (1.0 + z2) ** 2 - 4.0 * z0**2 <= 0.0:
        raise OutOfBounds(f"|z0| = {abs(z0)} reaches (1 + z2)/2 = {(1 + z2) / 2}")
    if (1.0 - z2) ** 2 - 4.0 * z1**2 <= 0.0:
        raise OutOfBounds(f"|z1| = {abs(z1)} reaches (1 - z2)/2 = {(1 - z2) / 2}")


# ----------------------------------------------------------------------------
# compiled kernels


@njit(cache=True)
def hamiltonian_kernel(y, p):
    z0, t0, z1, t1, z2, t2 = y[0], y[1], y[2], y[3], y[4], y[5]
    j0, j1, nu0, nu1, nu01, de = p[_J0], p[_J1], p[_NU0], p[_NU1], p[_NU01], p[_DE]
    a = 1.0 + z2
    b = 1.0 - z2
    d = t0 - t1
    h = -j0 * math.sqrt(a * a - 4.0 * z0 * z0) * math.cos(t0)
    h += 0.25 * nu0 * (a * a + 4.0 * z0 * z0)
    h -= j1 * math.sqrt(b * b - 4.0 * z1 * z1) * math.cos(t1)
    h += 0.25 * nu1 * (b * b + 4.0 * z1 * z1)
    h -= nu01 * (z0 + z1 - z2 * (z0 - z1)) * math.sin(t2) * math.sin(d)
    h += 0.5 * nu01 * (1.0 - z2 * z2 + 4.0 * z0 * z1) * (2.0 + math.cos(t2) * math.cos(d))
    h -= de * z2
    return h


@njit(cache=True)
def averaged_hamiltonian_kernel(y, p):
    # theta2-average of H': the sin(theta2), cos(theta2) terms drop out
    z0, t0, z1, t1, z2 = y[0], y[1], y[2], y[3], y[4]
    j0, j1, nu0, nu1, nu01, de = p[_J0], p[_J1], p[_NU0], p[_NU1], p[_NU01], p[_DE]
    a = 1.0 + z2
    b = 1.0 - z2
    h = -j0 * math.sqrt(a * a - 4.0 * z0 * z0) * math.cos(t0)
    h += 0.25 * nu0 * (a * a + 4.0 * z0 * z0)
    h -= j1 * math.sqrt(b * b - 4.0 * z1 * z1) * math.cos(t1)
    h += 0.25 * nu1 * (b * b + 4.0 * z1 * z1)
    h += nu01 * (1.0 - z2 * z2 + 4.0 * z0 * z1)
    h -= de * z2
    return h


@njit(cache=True)
def eom_full_kernel(y, p, out):
    z0, t0, z1, t1, z2, t2 = y[0], y[1], y[2], y[3], y[4], y[5]
    j0, j1, nu0, nu1, nu01, de = p[_J0], p[_J1], p[_NU0], p[_NU1], p[_NU01], p[_DE]
    a = 1.0 + z2
    b = 1.0 - z2
    s0 = math.sqrt(a * a - 4.0 * z0 * z0)
    s1 = math.sqrt(b * b - 4.0 * z1 * z1)
    d = t0 - t1
    sd, cd = math.sin(d), math.cos(d)
    st2, ct2 = math.sin(t2), math.cos(t2)
    mix = z0 + z1 - z0 * z2 + z1 * z2
    pop = 1.0 + 4.0 * z0 * z1 - z2 * z2
    drive = 0.5 * pop * ct2 * sd + mix * st2 * cd
    rot = 2.0 + ct2 * cd
    out[0] = -j0 * s0 * math.sin(t0) + nu01 * drive
    out[1] = 2.0 * z0 * (nu0 + 2.0 * j0 * math.cos(t0) / s0) + nu01 * (2.0 * z1 * rot - b * st2 * sd)
    out[2] = -j1 * s1 * math.sin(t1) - nu01 * drive
    out[3] = 2.0 * z1 * (nu1 + 2.0 * j1 * math.cos(t1) / s1) + nu01 * (2.0 * z0 * rot - a * st2 * sd)
    out[4] = 0.5 * nu01 * (2.0 * mix * ct2 * sd + pop * st2 * cd)
    out[5] = (
        -de
        - j0 * a * math.cos(t0) / s0
        + j1 * b * math.cos(t1) / s1
        + 0.5 * nu0 * a
        - 0.5 * nu1 * b
        - nu01 * (z2 * rot + (z1 - z0) * st2 * sd)
    )


@njit(cache=True)
def eom_averaged_kernel(y, p, out):
    z0, t0, z1, t1, z2 = y[0], y[1], y[2], y[3], y[4]
    j0, j1, nu0, nu1, nu01, de = p[_J0], p[_J1], p[_NU0], p[_NU1], p[_NU01], p[_DE]
    a = 1.0 + z2
    b = 1.0 - z2
    s0 = math.sqrt(a * a - 4.0 * z0 * z0)
    s1 = math.sqrt(b * b - 4.0 * z1 * z1)
    out[0] = -j0 * math.sin(t0) * s0
    out[1] = 2.0 * z0 * (nu0 + 2.0 * j0 * math.cos(t0) / s0) + 4.0 * nu01 * z1
    out[2] = -j1 * math.sin(t1) * s1
    out[3] = 2.0 * z1 * (nu1 + 2.0 * j1 * math.cos(t1) / s1) + 4.0 * nu01 * z0
    out[4] = 0.0
    # theta2 advances with the theta2-averaged rate; it does not feed back
    out[5] = (
        -de
        - j0 * a * math.cos(t0) / s0
        + j1 * b * math.cos(t1) / s1
        + 0.5 * nu0 * a
        - 0.5 * nu1 * b
        - 2.0 * nu01 * z2
    )


# ----------------------------------------------------------------------------
# public API


def hamiltonian(state, params) -> float:
    """Renormalized energy H' of a state."""
    y = _as_state_array(state)
    check_bounds(y)
    return float(hamiltonian_kernel(y, _as_params_array(params)))


def averaged_hamiltonian(state, params) -> float:
    """Conserved energy of the theta2-averaged (and two-mode) dynamics."""
    y = _as_state_array(state)
    check_bounds(y)
    return float(averaged_hamiltonian_kernel(y, _as_params_array(params)))


def eom_full(state, params) -> np.ndarray:
    """Time derivatives of all six variables, ordered like the state."""
    y = _as_state_array(state)
    check_bounds(y)
    out = np.empty(6)
    eom_full_kernel(y, _as_params_array(params), out)
    return out


def eom_averaged(state, params, z2: float | None = None) -> np.ndarray:
    """(z0dot, theta0dot, z1dot, theta1dot) of the theta2-averaged model.

    ``state`` is either a full 6-vector/PendulumState or (z0, theta0, z1, theta1)
    together with ``z2``.
    """
    y = _as_state_array(state)
    if y.size == 4:
        if z2 is None:
            raise ValueError("z2 is required with a 4-component state")
        y = np.array([y[0], y[1], y[2], y[3], z2, 0.0])
    elif z2 is not None:
        y = y.copy()
        y[4] = z2
    check_bounds(y)
    out = np.empty(6)
    eom_averaged_kernel(y, _as_params_array(params), out)
    return out[:4]


def linearized_matrix(params: ModelParams, z2: float) -> np.ndarray:
    """Jacobian of the averaged field at z_l = theta_l = 0, acting on (z0, theta0, z1, theta1).

    Interaction terms carry the factor N (the nu coefficients), consistent with
    the averaged equations it is derived from.
    """
    if not abs(z2) < 1:
        raise OutOfBounds("|z2| must be < 1")
    a, b = 1.0 + z2, 1.0 - z2
    p = params
    return np.array(
        [
            [0.0, -p.j0 * a, 0.0, 0.0],
            [2.0 * (p.nu0 + 2.0 * p.j0 / a), 0.0, 4.0 * p.nu01, 0.0],
            [0.0, 0.0, 0.0, -p.j1 * b],
            [4.0 * p.nu01, 0.0, 2.0 * (p.nu1 + 2.0 * p.j1 / b), 0.0],
        ]
    )


def eom_linearized(state4, params: ModelParams, z2: float) -> np.ndarray:
    return linearized_matrix(params, z2) @ np.asarray(state4, dtype=float)


def normal_mode_frequencies(params: ModelParams, z2: float) -> tuple[float, float, float, float]:
    """(omega_minus, omega0, omega1, omega_plus) of the linearized coupled oscillators.

    omega_l^2 = 2 J_l NU_l (1 +- z2) + 4 J_l^2 and
    omega_pm^2 = [w0^2 + w1^2 +- sqrt((w0^2 - w1^2)^2 + 64 (1 - z2^2) J0 J1 NU01^2)] / 2.
    """
    if not abs(z2) <= 1:
        raise OutOfBounds("|z2| must be <= 1")
    p = params
    w0_sq = 2.0 * p.j0 * p.nu0 * (1.0 + z2) + 4.0 * p.j0**2
    w1_sq = 2.0 * p.j1 * p.nu1 * (1.0 - z2) + 4.0 * p.j1**2
    coupling = 64.0 * (1.0 - z2 * z2) * p.j0 * p.j1 * p.nu01**2
    root = math.sqrt((w0_sq - w1_sq) ** 2 + coupling)
    minus_sq = 0.5 * (w0_sq + w1_sq - root)
    plus_sq = 0.5 * (w0_sq + w1_sq + root)
    if minus_sq < 0 or w0_sq < 0 or w1_sq < 0:
        raise NegativeSquare(f"omega_minus^2 = {minus_sq:.3g}: not an oscillatory neighbourhood")
    return math.sqrt(minus_sq), math.sqrt(w0_sq), math.sqrt(w1_sq), math.sqrt(plus_sq)


# ----------------------------------------------------------------------------
# lab frame


@dataclass(frozen=True)
class LabState:
    """Mode populations (fractions of N) and phases of b_jl = sqrt(N_jl) exp(i phi_jl)."""

    n_L0: float
    n_R0: float
    n_L1: float
    n_R1: float
    phi_L0: float = 0.0
    phi_R0: float = 0.0
    phi_L1: float = 0.0
    phi_R1: float = 0.0

    @property
    def populations(self) -> np.ndarray:
        return np.array([self.n_L0, self.n_R0, self.n_L1, self.n_R1])

    @property
    def phases(self) -> np.ndarray:
        return np.array([self.phi_L0, self.phi_R0, self.phi_L1, self.phi_R1])


# Rows: total number, z0, z1, z2.  Phases transform with -M.
TRANSFORM = np.array(
    [
        [1.0, 1.0, 1.0, 1.0],
        [1.0, -1.0, 0.0, 0.0],
        [0.0, 0.0, 1.0, -1.0],
        [1.0, 1.0, -1.0, -1.0],
    ]
)
_TRANSFORM_INV = np.linalg.inv(TRANSFORM)


def to_pendulum(lab: LabState) -> tuple[PendulumState, float]:
    """Lab-frame populations/phases -> (pendulum state, total phase theta_N)."""
    n = lab.populations
    if np.any(n <= 0):
        raise DegeneratePopulation("every mode population must be > 0 for its phase to be defined")
    if abs(n.sum() - 1.0) > 1e-12:
        raise ValueError(f"populations must sum to 1, got {n.sum()!r}")
    _, z0, z1, z2 = TRANSFORM @ n
    theta_n, t0, t1, t2 = -TRANSFORM @ lab.phases
    return PendulumState(z0, t0, z1, t1, z2, t2), float(theta_n)


def from_pendulum(state: PendulumState, total_phase: float = 0.0) -> LabState:
    y = _as_state_array(state)
    check_bounds(y)
    z0, t0, z1, t1, z2, t2 = y
    n = _TRANSFORM_INV @ np.array([1.0, z0, z1, z2])
    phi = -_TRANSFORM_INV @ np.array([total_phase, t0, t1, t2])
    return LabState(*n, *phi)


def lab_hamiltonian(lab: LabState, params: ModelParams) -> float:
    """2 H / N - E0 - E1 evaluated directly from the mode amplitudes.

    Independent of the pendulum variables; used to cross-check ``hamiltonian``.
    """
    n = lab.populations
    phi = lab.phases
    e = (params.e0, params.e0, params.e1, params.e1)
    nu = (params.nu0, params.nu0, params.nu1, params.nu1)
    j = (params.j0, params.j0, params.j1, params.j1)
    partner = (1, 0, 3, 2)  # other well, same level
    other_level = (2, 3, 0, 1)  # same well, other level
    total = 0.0
    for k in range(4):
        total += (e[k] + nu[k] * n[k]) * n[k]
        total -= j[k] * math.sqrt(n[k] * n[partner[k]]) * math.cos(phi[k] - phi[partner[k]])
        q = other_level[k]
        total += params.nu01 * (2.0 + math.cos(2.0 * (phi[k] - phi[q]))) * n[k] * n[q]
    return 2.0 * total - params.e0 - params.e1


# ----------------------------------------------------------------------------
# regimes


class Regime(str, enum.Enum):
    RABI = "Rabi"
    MIXED = "Mixed"
    JOSEPHSON = "Josephson"
    FOCK = "Fock"
    INVALID = "Invalid"


VALIDATED_THRESHOLD = 0.1


@dataclass(frozen=True)
class RegimeIndicators:
    chi0: float
    chi1: float
    chi01: float
    regime: Regime
    validity: str          # "validated" | "marginal" | "invalid"
    fock: str              # "yes" | "no" | "undetermined"
    reasons: tuple = ()

    @property
    def ordered(self) -> bool:
        return self.chi1 < self.chi0


def classify_regime(params: ModelParams, n_atoms: int | None = None) -> RegimeIndicators:
    """chi indicators, validity of the four-mode truncation and the dynamical regime.

    Invalid when J_l / dE > 0.1, chi01 > 1 or V0 < E1 (the latter only when
    ``params.v0`` is known).  chi01 in (0.1, 1] is reported as "marginal".
    """
    chi0, chi1, chi01 = params.chi0, params.chi1, params.chi01
    reasons = []
    if params.j0 / params.delta_e > VALIDATED_THRESHOLD:
        reasons.append("J0/dE > 0.1")
    if params.j1 / params.delta_e > VALIDATED_THRESHOLD:
        reasons.append("J1/dE > 0.1")
    if chi01 > 1.0:
        reasons.append("chi01 > 1")
    if params.v0 is not None and params.v0 < params.e1:
        reasons.append("V0 < E1")

    if reasons:
        validity = "invalid"
    elif chi01 > VALIDATED_THRESHOLD:
        validity = "marginal"
    else:
        validity = "validated"

    if n_atoms is None:
        fock = "undetermined"
    else:
        fock = "yes" if min(chi0, chi1) > float(n_atoms) ** 2 else "no"

    if reasons:
        regime = Regime.INVALID
    elif fock == "yes":
        regime = Regime.FOCK
    elif chi0 < 1.0 and chi1 < 1.0:
        regime = Regime.RABI
    elif chi0 > 1.0 and chi1 > 1.0:
        regime = Regime.JOSEPHSON
    else:
        regime = Regime.MIXED
    return RegimeIndicators(chi0, chi1, chi01, regime, validity, fock, tuple(reasons))
