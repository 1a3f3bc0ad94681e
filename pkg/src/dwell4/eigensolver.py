"""Single-particle spectrum of the Duffing double well and the four-mode coefficients.

Energies are in recoil units and lengths in units of the well separation, so the
single-particle Hamiltonian reads

    H_sp = -(1 / 4 pi^2) d^2/dz^2 + v0 (1 - 4 z^2)^2

with minima at z = +-1/2.  The lowest two doublets give the ground (l = 0) and
excited (l = 1) levels; symmetric/antisymmetric recombination of each doublet
gives the left/right localized modes.
"""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from scipy.linalg import eig_banded, LinAlgError

from .errors import (
    ConfigError,
    DomainTooSmall,
    NegativeSplitting,
    NotConverged,
    ParityViolation,
)

KINETIC_PREFACTOR = 1.0 / (4.0 * math.pi**2)
BOUNDARY_TOL = 1e-6


@dataclass(frozen=True)
class PotentialSpec:
    """Duffing barrier plus the grid it is sampled on.

    ``stencil_order`` is the accuracy order of the central-difference Laplacian
    (2 gives the plain 3-point rule).
    """

    v0: float
    domain_halfwidth: float = 1.5
    grid_points: int = 512
    stencil_order: int = 8

    def __post_init__(self):
        if not self.v0 > 0:
            raise ConfigError(f"v0 must be positive, got {self.v0}")
        if not self.domain_halfwidth >= 1:
            raise ConfigError("domain_halfwidth must be >= 1 so both wells are interior")
        if int(self.grid_points) != self.grid_points or self.grid_points < 64:
            raise ConfigError("grid_points must be an integer >= 64")
        if self.stencil_order not in (2, 4, 6, 8, 10, 12):
            raise ConfigError("stencil_order must be an even integer in [2, 12]")

    @property
    def grid(self) -> np.ndarray:
        # Dirichlet walls at +-L are not part of the unknowns.
        L = self.domain_halfwidth
        return np.linspace(-L, L, self.grid_points + 2)[1:-1]

    @property
    def dz(self) -> float:
        return 2.0 * self.domain_halfwidth / (self.grid_points + 1)

    def potential(self, z=None):
        z = self.grid if z is None else np.asarray(z)
        return self.v0 * (1.0 - 4.0 * z**2) ** 2

    def cache_key(self) -> str:
        key = f"v0={float(self.v0)!r};n={self.grid_points};L={float(self.domain_halfwidth)!r}"
        if self.stencil_order != 8:
            key += f";p={self.stencil_order}"
        return key


@dataclass(frozen=True)
class EigenSolution:
    spec: PotentialSpec
    energies: np.ndarray        # (k,)
    wavefunctions: np.ndarray   # (k, n), sum |psi|^2 dz = 1
    grid: np.ndarray
    # (e1 - e0, e3 - e2) from extended-precision Rayleigh quotients; the
    # doublet splittings are far below eps * ||H|| in float64.
    splittings: np.ndarray | None = None

    @property
    def dz(self) -> float:
        return self.spec.dz

    def parities(self) -> np.ndarray:
        """Overlap <phi(z)|phi(-z)>: +1 for even states, -1 for odd ones."""
        psi = self.wavefunctions
        return np.sum(psi * psi[:, ::-1], axis=1) * self.dz


@dataclass(frozen=True)
class LocalizedModes:
    psi_L0: np.ndarray
    psi_R0: np.ndarray
    psi_L1: np.ndarray
    psi_R1: np.ndarray
    grid: np.ndarray

    def left(self, level: int) -> np.ndarray:
        return (self.psi_L0, self.psi_L1)[level]

    def right(self, level: int) -> np.ndarray:
        return (self.psi_R0, self.psi_R1)[level]


@dataclass(frozen=True)
class ModelParams:
    """Coefficients of the four-mode Hamiltonian, interactions premultiplied by N.

    ``v0`` is optional bookkeeping used only by the validity check V0 >= E1.
    """

    e0: float
    e1: float
    j0: float
    j1: float
    nu0: float
    nu1: float
    nu01: float
    delta_e: float = field(default=None)
    v0: float | None = None

    def __post_init__(self):
        if self.delta_e is None:
            object.__setattr__(self, "delta_e", self.e1 - self.e0)

    @property
    def chi0(self) -> float:
        return self.nu0 / (2.0 * self.j0)

    @property
    def chi1(self) -> float:
        return self.nu1 / (2.0 * self.j1)

    @property
    def chi01(self) -> float:
        return self.nu01 / self.delta_e

    def as_array(self) -> np.ndarray:
        """Packed form used by the compiled vector fields."""
        return np.array(
            [self.e0, self.e1, self.j0, self.j1, self.nu0, self.nu1, self.nu01, self.delta_e],
            dtype=np.float64,
        )

    def replace(self, **changes) -> "ModelParams":
        d = asdict(self)
        d.update(changes)
        if ("e0" in changes or "e1" in changes) and "delta_e" not in changes:
            d["delta_e"] = d["e1"] - d["e0"]
        return ModelParams(**d)

    def to_dict(self) -> dict:
        d = {k: float(getattr(self, k)) for k in ("e0", "e1", "j0", "j1", "nu0", "nu1", "nu01", "delta_e")}
        if self.v0 is not None:
            d["v0"] = float(self.v0)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParams":
        allowed = {"e0", "e1", "j0", "j1", "nu0", "nu1", "nu01", "delta_e", "v0"}
        unknown = set(d) - allowed
        if unknown:
            raise ConfigError(f"unknown ModelParams keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in d.items()})

    @classmethod
    def from_json(cls, text: str) -> "ModelParams":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class CoefficientIntegrals:
    """The gamma-independent part of ModelParams; nu_x = gamma * u_x_per_gamma."""

    e0: float
    e1: float
    j0: float
    j1: float
    u0_per_gamma: float
    u1_per_gamma: float
    u01_per_gamma: float
    v0: float | None = None

    def at(self, gamma: float) -> ModelParams:
        if gamma < 0:
            raise ConfigError("gamma must be >= 0")
        return ModelParams(
            e0=self.e0,
            e1=self.e1,
            j0=self.j0,
            j1=self.j1,
            nu0=gamma * self.u0_per_gamma,
            nu1=gamma * self.u1_per_gamma,
            nu01=gamma * self.u01_per_gamma,
            delta_e=self.e1 - self.e0,
            v0=self.v0,
        )

    def to_dict(self) -> dict:
        return {
            "e0": self.e0,
            "e1": self.e1,
            "j0": self.j0,
            "j1": self.j1,
            "u0_per_gamma": self.u0_per_gamma,
            "u1_per_gamma": self.u1_per_gamma,
            "u01_per_gamma": self.u01_per_gamma,
        }


def _second_derivative_stencil(order: int) -> np.ndarray:
    """Central coefficients c_{-m..m} with sum c_k f(x + k h) = h^2 f''(x) + O(h^{order+2})."""
    m = order // 2
    offsets = np.arange(-m, m + 1, dtype=float)
    vander = np.vander(offsets, increasing=True).T
    rhs = np.zeros(2 * m + 1)
    rhs[2] = 2.0
    return np.linalg.solve(vander, rhs)


def hamiltonian_bands(spec: PotentialSpec) -> np.ndarray:
    """Lower-banded storage of the discrete H_sp (see scipy.linalg.eig_banded)."""
    n = spec.grid_points
    c = _second_derivative_stencil(spec.stencil_order)
    m = spec.stencil_order // 2
    scale = -KINETIC_PREFACTOR / spec.dz**2
    bands = np.zeros((m + 1, n))
    bands[0] = scale * c[m] + spec.potential()
    for k in range(1, m + 1):
        bands[k, : n - k] = scale * c[m + k]
    return bands


def apply_hamiltonian(spec: PotentialSpec, psi: np.ndarray) -> np.ndarray:
    """Discrete H_sp applied to grid samples (zero Dirichlet padding).

    Works in the dtype of ``psi``; pass np.longdouble arrays for extended precision.
    """
    dtype = psi.dtype
    c = _second_derivative_stencil(spec.stencil_order).astype(dtype)
    m = spec.stencil_order // 2
    padded = np.concatenate([np.zeros(m, dtype), psi, np.zeros(m, dtype)])
    lap = np.zeros_like(psi)
    n = psi.size
    for k in range(-m, m + 1):
        lap += c[m + k] * padded[m + k : m + k + n]
    dz = dtype.type(spec.dz)
    kin = dtype.type(KINETIC_PREFACTOR)
    return -kin * lap / dz**2 + spec.potential(spec.grid.astype(dtype)) * psi


def _fix_sign(phi: np.ndarray, z: np.ndarray) -> np.ndarray:
    # positive at the largest |phi| sample in the left half
    left = np.flatnonzero(z < 0)
    idx = left[np.argmax(np.abs(phi[left]))]
    return phi if phi[idx] > 0 else -phi


def solve_spectrum(spec: PotentialSpec, n_states: int = 4) -> EigenSolution:
    """Lowest ``n_states`` eigenpairs of H_sp, ascending and L2-normalized."""
    if n_states < 4:
        raise ConfigError("at least the four lowest states are required")
    try:
        energies, vecs = eig_banded(
            hamiltonian_bands(spec), lower=True, select="i", select_range=(0, n_states - 1)
        )
    except LinAlgError as exc:
        raise NotConverged(str(exc)) from exc
    if energies.size != n_states or not np.all(np.isfinite(energies)):
        raise NotConverged(f"eigensolver returned {energies.size} of {n_states} states")

    z = spec.grid
    psi = vecs.T.copy()
    psi /= np.sqrt(np.sum(psi**2, axis=1) * spec.dz)[:, None]
    psi = np.array([_fix_sign(p, z) for p in psi])

    # Project onto exact parity (removes round-off mixing inside a doublet) and
    # refine energies by Rayleigh quotients in extended precision.
    par = np.sum(psi * psi[:, ::-1], axis=1) * spec.dz
    ld = np.longdouble
    rayleigh = np.empty(n_states, dtype=ld)
    for i in range(n_states):
        if abs(abs(par[i]) - 1.0) < 1e-6:
            p = 0.5 * (psi[i] + np.sign(par[i]) * psi[i, ::-1])
            psi[i] = p / np.sqrt(np.sum(p**2) * spec.dz)
        q = psi[i].astype(ld)
        rayleigh[i] = np.sum(q * apply_hamiltonian(spec, q)) / np.sum(q * q)
    splittings = np.array([rayleigh[1] - rayleigh[0], rayleigh[3] - rayleigh[2]], dtype=np.float64)
    energies = rayleigh.astype(np.float64)

    edge = np.max(np.abs(psi[:4][:, [0, -1]]))
    if edge > BOUNDARY_TOL:
        raise DomainTooSmall(
            f"|psi| = {edge:.3g} at the boundary; increase domain_halfwidth"
        )
    return EigenSolution(spec=spec, energies=energies, wavefunctions=psi, grid=z, splittings=splittings)


def build_localized_modes(sol: EigenSolution) -> LocalizedModes:
    """Left/right modes (phi_{2l} +- phi_{2l+1}) / sqrt(2) for l = 0, 1."""
    par = sol.parities()[:4]
    expected = np.array([1.0, -1.0, 1.0, -1.0])
    if sol.wavefunctions.shape[0] < 4 or np.any(np.abs(par - expected) > 1e-6):
        raise ParityViolation(f"doublet states must alternate parity, overlaps = {par}")

    z = sol.grid
    left_half = z < 0
    out = []
    for level in (0, 1):
        even = sol.wavefunctions[2 * level]
        odd = sol.wavefunctions[2 * level + 1]
        plus = (even + odd) / math.sqrt(2.0)
        minus = (even - odd) / math.sqrt(2.0)
        if np.sum(plus[left_half] ** 2) >= np.sum(minus[left_half] ** 2):
            out.extend([plus, minus])
        else:
            out.extend([minus, plus])
    return LocalizedModes(psi_L0=out[0], psi_R0=out[1], psi_L1=out[2], psi_R1=out[3], grid=z)


def hopping_integral(sol: EigenSolution, modes: LocalizedModes, level: int) -> float:
    """J_l = -<psi_L|H_sp|psi_R>, evaluated with the same discrete operator."""
    ld = np.longdouble
    right = modes.right(level).astype(ld)
    h_right = apply_hamiltonian(sol.spec, right)
    return -float(np.sum(modes.left(level).astype(ld) * h_right) * ld(sol.dz))


def level_energy_integral(sol: EigenSolution, modes: LocalizedModes, level: int, side: str = "L") -> float:
    psi = modes.left(level) if side == "L" else modes.right(level)
    return float(np.sum(psi * apply_hamiltonian(sol.spec, psi)) * sol.dz)


def interaction_integrals(modes: LocalizedModes, dz: float, side: str = "L") -> tuple[float, float, float]:
    """(int psi_0^4, int psi_1^4, int psi_0^2 psi_1^2) by the trapezoidal rule."""
    p0 = modes.psi_L0 if side == "L" else modes.psi_R0
    p1 = modes.psi_L1 if side == "L" else modes.psi_R1
    return (
        float(np.trapezoid(p0**4, dx=dz)),
        float(np.trapezoid(p1**4, dx=dz)),
        float(np.trapezoid(p0**2 * p1**2, dx=dz)),
    )


def compute_integrals(sol: EigenSolution, modes: LocalizedModes) -> CoefficientIntegrals:
    eps = sol.energies
    split = sol.splittings if sol.splittings is not None else np.array([eps[1] - eps[0], eps[3] - eps[2]])
    if split[0] < 0 or split[1] < 0:
        raise NegativeSplitting(f"doublet ordering violated: {eps[:4]}")
    u0, u1, u01 = interaction_integrals(modes, sol.dz)
    return CoefficientIntegrals(
        e0=float(0.5 * (eps[0] + eps[1])),
        e1=float(0.5 * (eps[2] + eps[3])),
        j0=float(0.5 * split[0]),
        j1=float(0.5 * split[1]),
        u0_per_gamma=u0,
        u1_per_gamma=u1,
        u01_per_gamma=u01,
        v0=sol.spec.v0,
    )


def compute_model_params(sol: EigenSolution, modes: LocalizedModes, gamma: float) -> ModelParams:
    """Level, hopping and (N-premultiplied) interaction energies at scale ``gamma``."""
    return compute_integrals(sol, modes).at(gamma)


def solve_integrals(spec: PotentialSpec) -> CoefficientIntegrals:
    sol = solve_spectrum(spec)
    return compute_integrals(sol, build_localized_modes(sol))


def model_params(v0: float, gamma: float, cache: "CoefficientCache | None" = None, **grid) -> ModelParams:
    """One-call pipeline: spectrum -> modes -> coefficients for (v0, gamma)."""
    spec = PotentialSpec(v0=v0, **grid)
    integrals = cache.get_or_compute(spec) if cache is not None else solve_integrals(spec)
    return integrals.at(gamma)


def write_wavefunctions_csv(sol: EigenSolution, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["z", "psi0", "psi1", "psi2", "psi3"])
        for i, z in enumerate(sol.grid):
            writer.writerow([f"{z:.17e}"] + [f"{sol.wavefunctions[k, i]:.17e}" for k in range(4)])


def default_cache_path() -> Path:
    env = os.environ.get("DWELL4_CACHE")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "dwell4" / "coefficients.json"


class CoefficientCache:
    """JSON-backed store of gamma-independent integrals.

    Writers re-read the file, merge, and atomically replace it, so concurrent
    processes lose at most an identical entry (values are deterministic).
    """

    def __init__(self, path=None):
        self.path = Path(path) if path is not None else default_cache_path()
        self._memory: dict[str, dict] = {}

    def _read(self) -> dict:
        try:
            with open(self.path) as fh:
                data = json.load(fh)
        except FileNotFoundError:
            return {}
        except json.JSONDecodeError:
            # a torn file is treated as empty; entries get recomputed
            return {}
        return data if isinstance(data, dict) else {}

    def get(self, spec: PotentialSpec) -> CoefficientIntegrals | None:
        key = spec.cache_key()
        entry = self._memory.get(key)
        if entry is None:
            entry = self._read().get(key)
        if entry is None:
            return None
        self._memory[key] = entry
        return CoefficientIntegrals(**entry, v0=spec.v0)

    def put(self, spec: PotentialSpec, integrals: CoefficientIntegrals) -> None:
        key = spec.cache_key()
        entry = integrals.to_dict()
        self._memory[key] = entry
        self.path.parent.mkdir(parents=True, exist_ok=True)
        data = self._read()
        data[key] = entry
        fd, tmp = tempfile.mkstemp(dir=self.path.parent, prefix=".dwell4-", suffix=".json")
        with os.fdopen(fd, "w") as fh:
            json.dump(data, fh, indent=1, sort_keys=True)
        os.replace(tmp, self.path)

    def get_or_compute(self, spec: PotentialSpec) -> CoefficientIntegrals:
        hit = self.get(spec)
        if hit is not None:
            return hit
        integrals = solve_integrals(spec)
        self.put(spec, integrals)
        return integrals
