import csv
import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dipolar_gates.crystal import Geometry, harmonic_trap, lattice_with_marker, minimize_equilibrium
from dipolar_gates.errors import ImaginaryFrequencyError
from dipolar_gates.phonons import (
    DynamicalMatrix,
    build_dynamical_matrix,
    classify_modes,
    local_modes,
    marker_target_weight,
    normal_modes,
    reflection_operator,
    write_spectrum_csv,
)
from dipolar_gates.params import ModelParams

# frequency * sqrt(r_d), participation number, marker+target weight
FROZEN_LOCAL = {
    0.8: {"x": (10.081489497766839, 1.8681266197224429, 0.9103622248043669),
          "y": (50.731425675964026, 1.9802702445507352, 0.9958743802124892),
          "z": (48.935484523410615, 1.0832066936128646, 0.9604217485846588)},
    0.9: {"x": (8.66615930369314, 1.953640000324779, 0.7951447902824581),
          "y": (50.394053581260124, 1.9411261150427472, 0.9884714621672772),
          "z": (49.26586514085128, 1.2284264453302416, 0.8995481687106709)},
}


def _stub_dm(h, mass=1.0):
    eq = SimpleNamespace(geometry=SimpleNamespace(n=len(h) // 3))
    return DynamicalMatrix(h, np.arange(len(h)), mass, eq)


@pytest.mark.parametrize("b", [0.8, 0.9])
def test_frozen_local_modes(marker_setups, b):
    s = marker_setups[b]
    spec = s.spectrum
    loc = local_modes(spec)
    assert sorted(loc) == ["x", "y", "z"]
    for axis, (freq, pn, weight) in FROZEN_LOCAL[b].items():
        k = loc[axis]
        assert spec.frequencies[k] * math.sqrt(30) == pytest.approx(freq, rel=1e-6)
        assert spec.participation[k] == pytest.approx(pn, rel=1e-6)
        assert marker_target_weight(spec, s.equilibrium.geometry, k) == pytest.approx(weight, rel=1e-6)


def test_local_mode_parity(marker_setups):
    spec = marker_setups[0.8].spectrum
    loc = local_modes(spec)
    # longitudinal local mode is odd under the mirror through the target
    assert spec.parity[loc["x"]] == -1
    assert spec.parity[loc["y"]] == 1 and spec.parity[loc["z"]] == 1


def test_local_modes_split_from_bands(marker_setups):
    s = marker_setups[0.8]
    edges = s.labels.band_edges
    f = s.spectrum.frequencies
    loc = local_modes(s.spectrum)
    # x and y are pushed above their bands, the frozen-z marker pulls z below
    assert f[loc["x"]] > edges[0][1]
    assert f[loc["y"]] > edges[1][1]
    assert f[loc["z"]] < edges[2][0]


def test_orthonormal_and_parity(marker_setups):
    spec = marker_setups[0.8].spectrum
    v = spec.vectors
    np.testing.assert_allclose(v.T @ v, np.eye(v.shape[1]), atol=1e-10)
    op = reflection_operator(marker_setups[0.8].equilibrium.geometry)
    sub = op[np.ix_(spec.coords, spec.coords)]
    np.testing.assert_allclose(sub @ v, v * spec.parity[None, :], atol=1e-9)


def test_eigen_sum_matches_trace(marker_setups):
    s = marker_setups[0.9]
    dm = build_dynamical_matrix(s.equilibrium, s.spectrum.mass)
    assert np.sum(s.spectrum.mass * s.spectrum.frequencies**2) == pytest.approx(np.trace(dm.entries), rel=1e-10)


def test_acoustic_sum_rule(bare_chain):
    dm = build_dynamical_matrix(bare_chain.equilibrium, 30.0)
    h = dm.entries.reshape(50, 3, 50, 3)
    # rigid x translation costs nothing on an untrapped ring
    assert np.abs(h[:, 0, :, 0].sum(axis=1)).max() < 1e-9
    spec = bare_chain.spectrum
    assert np.sum(spec.frequencies == 0) == 1
    assert np.max(np.abs(spec.zeta[0, :, 0] - 1 / math.sqrt(50))) < 1e-10


def test_bare_chain_bands(bare_chain):
    spec = bare_chain.spectrum
    assert not spec.local.any()
    assert sorted(set(spec.branch)) == ["acoustic_x", "optical_y", "optical_z"]
    edges = bare_chain.labels.band_edges
    assert edges[0] == pytest.approx((0.0, 1.2677689144604312), abs=1e-9)
    assert edges[1] == pytest.approx((9.106674685537817, 9.128709291752768), rel=1e-9)
    assert edges[2] == pytest.approx((9.062444748409735, 9.128709291752772), rel=1e-9)
    # the acoustic band follows the nearest-neighbour-free lattice sum: top at k = pi
    top = math.sqrt(sum(24 / j**5 * (1 - math.cos(math.pi * j)) for j in range(1, 2000)) / 30)
    assert edges[0][1] == pytest.approx(top, rel=1e-6)


def test_two_molecule_branches(two_mol):
    _, setup = two_mol
    spec = setup.spectrum
    labels = classify_modes(spec)
    assert labels.branch.count("acoustic_x") == 2
    assert not spec.local.any()


def test_localization_grows_as_marker_approaches(marker_setups):
    w = []
    for b in (0.6, 0.7, 0.8, 0.9):
        s = marker_setups[b]
        k = local_modes(s.spectrum)["z"]
        w.append(marker_target_weight(s.spectrum, s.equilibrium.geometry, k))
    assert all(a > b for a, b in zip(w, w[1:]))


def test_degenerate_basis_is_reproducible(bare_chain):
    dm = build_dynamical_matrix(bare_chain.equilibrium, 30.0)
    a = normal_modes(dm)
    b = normal_modes(dm)
    assert np.array_equal(a.vectors, b.vectors)
    assert np.array_equal(a.frequencies, b.frequencies)


def test_symmetry_off_gives_same_frequencies(marker_setups):
    s = marker_setups[0.7]
    dm = build_dynamical_matrix(s.equilibrium, s.spectrum.mass)
    plain = normal_modes(dm, symmetry=None)
    assert plain.parity is None
    np.testing.assert_allclose(plain.frequencies, s.spectrum.frequencies, atol=1e-10)


def test_imaginary_frequency_rejected():
    h = np.diag([1.0, 2.0, -0.5])
    with pytest.raises(ImaginaryFrequencyError):
        normal_modes(_stub_dm(h), symmetry=None)


def test_tiny_eigenvalue_is_zero_mode():
    spec = normal_modes(_stub_dm(np.diag([1e-12, -1e-12, 4.0])), symmetry=None)
    assert spec.frequencies[0] == 0.0 and spec.frequencies[1] == 0.0
    assert spec.frequencies[2] == pytest.approx(2.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(0, 2**31 - 1), st.floats(0.5, 50))
def test_random_matrices(n, seed, mass):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(3 * n, 3 * n))
    h = a @ a.T + 0.1 * np.eye(3 * n)
    spec = normal_modes(_stub_dm(h, mass), symmetry=None)
    v = spec.vectors
    np.testing.assert_allclose(v.T @ v, np.eye(3 * n), atol=1e-10)
    np.testing.assert_allclose(h @ v, v * (mass * spec.frequencies**2)[None, :], atol=1e-8 * np.abs(h).max())
    assert np.all(np.diff(spec.frequencies) >= 0)
    np.testing.assert_allclose(spec.molecule_weights().sum(axis=1), 1.0, atol=1e-12)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.3, 1.0), st.floats(20, 40))
def test_open_chain_symmetric_modes(omega_long, omega_perp):
    # a harmonically trapped chain is mirror symmetric about its centre
    n = 4
    geo = Geometry(np.column_stack([np.arange(n) - 1.5, np.zeros(n), np.zeros(n)]), ["crystal"] * n)
    eq = minimize_equilibrium(geo, harmonic_trap(n, 30, omega_long, omega_perp), check_stability=False)
    spec = normal_modes(build_dynamical_matrix(eq, 30))
    assert spec.parity is not None
    # centre of mass along x oscillates at the trap frequency
    assert np.min(np.abs(spec.frequencies - omega_long)) < 1e-7 * omega_long


def test_reflection_operator_requires_symmetry():
    geo = lattice_with_marker(8, 0.8, 3, boundary="open")
    assert reflection_operator(geo) is None
    assert reflection_operator(lattice_with_marker(7, 0.8, 3, boundary="open")) is not None


def test_spectrum_csv(two_mol, tmp_path):
    _, setup = two_mol
    spec = setup.spectrum
    write_spectrum_csv(spec, tmp_path / "s.csv", tmp_path / "z.csv")
    rows = list(csv.DictReader(open(tmp_path / "s.csv")))
    assert list(rows[0]) == ["k", "omega", "branch", "ipr"]
    assert len(rows) == spec.n_modes
    assert float(rows[3]["omega"]) == spec.frequencies[3]
    zrows = list(csv.DictReader(open(tmp_path / "z.csv")))
    assert len(zrows) == spec.n_modes * 2 * 3


def test_local_modes_requires_classification(two_mol):
    _, setup = two_mol
    spec = normal_modes(build_dynamical_matrix(setup.equilibrium, 30.0))
    with pytest.raises(ValueError, match="classify_modes"):
        local_modes(spec)
