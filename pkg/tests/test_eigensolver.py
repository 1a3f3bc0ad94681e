import json
import math
import threading

import numpy as np
import pytest

from dwell4.eigensolver import (
    CoefficientCache,
    ModelParams,
    PotentialSpec,
    build_localized_modes,
    compute_integrals,
    compute_model_params,
    hopping_integral,
    interaction_integrals,
    level_energy_integral,
    model_params,
    solve_integrals,
    solve_spectrum,
    write_wavefunctions_csv,
    _second_derivative_stencil,
)
from dwell4.errors import ConfigError, DomainTooSmall, NegativeSplitting, ParityViolation


@pytest.mark.parametrize("kwargs", [dict(v0=0), dict(v0=-1), dict(v0=5, domain_halfwidth=0.9),
                                    dict(v0=5, grid_points=32), dict(v0=5, stencil_order=3)])
def test_spec_rejects_invalid(kwargs):
    with pytest.raises(ConfigError):
        PotentialSpec(**kwargs)


def test_stencil_reproduces_polynomial_second_derivatives():
    for order in (2, 4, 8):
        c = _second_derivative_stencil(order)
        k = np.arange(-(order // 2), order // 2 + 1)
        # exact on x^p for p <= order + 1
        for p in range(order + 2):
            expected = p * (p - 1) if p == 2 else 0.0
            assert abs(np.sum(c * k**p) - expected) < 1e-9


def test_cache_key_format():
    assert PotentialSpec(8.75).cache_key() == "v0=8.75;n=512;L=1.5"
    assert PotentialSpec(8.75, stencil_order=2).cache_key().endswith(";p=2")


@pytest.fixture(scope="module")
def sol5():
    return solve_spectrum(PotentialSpec(5.0))


def test_spectrum_is_sorted_normalized_and_parity_alternating(sol5):
    assert np.all(np.diff(sol5.energies) > 0)
    norms = np.sum(sol5.wavefunctions**2, axis=1) * sol5.dz
    assert np.allclose(norms, 1.0, atol=1e-10)
    assert np.allclose(sol5.parities(), [1, -1, 1, -1], atol=1e-8)


def test_harmonic_level_spacing():
    sol = solve_spectrum(PotentialSpec(8.75))
    de = 0.5 * (sol.energies[2] + sol.energies[3]) - 0.5 * (sol.energies[0] + sol.energies[1])
    assert abs(de / (4 / math.pi * math.sqrt(8.75)) - 1) < 0.10


def test_excited_doublet_splits_more():
    sol = solve_spectrum(PotentialSpec(3.75))
    e = sol.energies
    assert e[1] - e[0] < e[3] - e[2]


def test_domain_too_small():
    with pytest.raises(DomainTooSmall):
        solve_spectrum(PotentialSpec(0.5, domain_halfwidth=1.0, grid_points=128))


def test_localized_modes(sol5):
    m = build_localized_modes(sol5)
    z, dz = m.grid, sol5.dz
    assert np.sum(m.psi_L0[z < 0] ** 2) * dz > 0.99
    for level in (0, 1):
        assert abs(np.sum(m.left(level) * m.right(level)) * dz) < 1e-8
        # mirror images (the grid is symmetric)
        assert np.max(np.abs(m.left(level) - m.right(level)[::-1])) < 1e-10


def test_excited_local_mode_has_one_node(sol5):
    m = build_localized_modes(sol5)
    z = m.grid
    left = m.psi_L1[z < 0]
    big = left[np.abs(left) > 1e-3 * np.abs(left).max()]
    assert np.count_nonzero(np.diff(np.sign(big))) == 1
    # "near-zero on z > 0" read as weight: the barrier tail carries ~1%
    assert np.sum(m.psi_L1[z > 0] ** 2) * sol5.dz < 0.02


def test_parity_violation(sol5):
    shuffled = type(sol5)(sol5.spec, sol5.energies, sol5.wavefunctions[[1, 0, 2, 3]], sol5.grid, sol5.splittings)
    with pytest.raises(ParityViolation):
        build_localized_modes(shuffled)


def test_negative_splitting(sol5):
    bad = type(sol5)(sol5.spec, sol5.energies, sol5.wavefunctions, sol5.grid, -np.abs(sol5.splittings))
    with pytest.raises(NegativeSplitting):
        compute_integrals(bad, build_localized_modes(sol5))


@pytest.mark.parametrize("v0", [3.0, 5.0, 8.75, 12.0, 20.0])
def test_hopping_equivalence(v0):
    sol = solve_spectrum(PotentialSpec(v0))
    modes = build_localized_modes(sol)
    ints = compute_integrals(sol, modes)
    for level, j in ((0, ints.j0), (1, ints.j1)):
        assert abs(hopping_integral(sol, modes, level) / j - 1) < 1e-8
    # level energies from the localized modes equal the doublet means
    assert abs(level_energy_integral(sol, modes, 0) - ints.e0) < 1e-9


def test_left_right_symmetry(sol5):
    modes = build_localized_modes(sol5)
    a = interaction_integrals(modes, sol5.dz, "L")
    b = interaction_integrals(modes, sol5.dz, "R")
    assert np.allclose(a, b, rtol=1e-10, atol=0)


def test_grid_convergence():
    a = solve_integrals(PotentialSpec(5.0, grid_points=512)).to_dict()
    b = solve_integrals(PotentialSpec(5.0, grid_points=1024)).to_dict()
    for k in a:
        assert abs(a[k] / b[k] - 1) < 1e-6, k


def test_hopping_decreases_with_barrier():
    vals = [solve_integrals(PotentialSpec(v)) for v in np.linspace(3, 20, 8)]
    j0 = [v.j0 for v in vals]
    j1 = [v.j1 for v in vals]
    assert np.all(np.diff(j0) < 0) and np.all(np.diff(j1) < 0)
    assert all(v.j1 > v.j0 for v in vals)


def test_interactions_linear_in_gamma():
    ints = solve_integrals(PotentialSpec(5.0))
    p1, p2 = ints.at(1e-3), ints.at(3e-3)
    for k in ("nu0", "nu1", "nu01"):
        assert math.isclose(getattr(p2, k), 3 * getattr(p1, k), rel_tol=1e-14)
    zero = ints.at(0.0)
    assert zero.nu0 == zero.nu1 == zero.nu01 == 0.0
    assert zero.j0 > 0 and zero.j1 > 0
    with pytest.raises(ConfigError):
        ints.at(-1.0)


def test_compute_model_params_matches_pipeline(sol5):
    p = compute_model_params(sol5, build_localized_modes(sol5), 2.5e-3)
    q = model_params(5.0, 2.5e-3)
    assert p.to_dict() == q.to_dict()
    assert p.j1 > p.j0 > 0 and p.delta_e > 0 and min(p.nu0, p.nu1, p.nu01) > 0


def test_model_params_json_round_trip():
    p = model_params(5.0, 2.5e-3)
    q = ModelParams.from_json(p.to_json())
    assert q == p
    with pytest.raises(ConfigError):
        ModelParams.from_dict({**p.to_dict(), "extra": 1.0})
    assert ModelParams(0, 2, 0.1, 0.2, 0, 0, 0).delta_e == 2


def test_cache_round_trip_and_concurrent_writers(tmp_path):
    path = tmp_path / "c.json"
    specs = [PotentialSpec(v) for v in (3.0, 4.0, 5.0, 6.0)]
    errors = []

    def work(spec):
        try:
            CoefficientCache(path).get_or_compute(spec)
        except Exception as exc:  # pragma: no cover
            errors.append(exc)

    threads = [threading.Thread(target=work, args=(s,)) for s in specs * 2]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not errors
    data = json.loads(path.read_text())
    assert set(data) <= {s.cache_key() for s in specs}
    fresh = CoefficientCache(path)
    for s in specs:
        hit = fresh.get_or_compute(s)
        assert hit.to_dict() == solve_integrals(s).to_dict()
    assert CoefficientCache(tmp_path / "missing.json").get(specs[0]) is None


def test_torn_cache_file_is_ignored(tmp_path):
    path = tmp_path / "c.json"
    path.write_text("{not json")
    assert CoefficientCache(path).get(PotentialSpec(5.0)) is None


def test_wavefunction_csv(tmp_path, sol5):
    path = tmp_path / "wf.csv"
    write_wavefunctions_csv(sol5, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "z,psi0,psi1,psi2,psi3"
    assert len(lines) == sol5.grid.size + 1
