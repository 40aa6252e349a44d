import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dipolar_gates.errors import ConvergenceError
from dipolar_gates.rotor import basis_states, cos_element, stark_spectrum, stark_sweep, write_stark_csv
from oracles import cos_element_quadrature, rotor_ground_second_order


def _level(levels, n, m):
    return next(lv for lv in levels if lv.N == n and lv.M == m)


def test_basis_order():
    assert basis_states(1) == [(0, 0), (1, -1), (1, 0), (1, 1)]
    assert len(basis_states(20)) == 21**2


@pytest.mark.parametrize("n,m", [(0, 0), (1, 0), (1, 1), (2, -1), (3, 2)])
def test_cos_element_against_quadrature(n, m):
    assert cos_element(n, m) == pytest.approx(cos_element_quadrature(n, m), abs=1e-9)


def test_zero_field():
    levels = stark_spectrum(1.3, 1.0, 0.0)
    for lv in levels:
        assert lv.energy == pytest.approx(1.3 * lv.N * (lv.N + 1), abs=1e-12)
        assert lv.induced_dipole == 0.0
    assert len(levels) == sum(2 * n + 1 for n in range(11))


def test_small_field_perturbative_dipole():
    ground = _level(stark_spectrum(1.0, 1.0, 0.01), 0, 0)
    assert ground.induced_dipole == pytest.approx(rotor_ground_second_order(1.0, 1.0, 0.01), rel=1e-3)


def test_ground_dipole_saturates_monotonically():
    fields = np.linspace(0, 10, 41)
    d = [_level(stark_spectrum(1.0, 1.0, e), 0, 0).induced_dipole for e in fields]
    assert np.all(np.diff(d) > 0)
    assert 0.7 < d[-1] < 1.0


def test_level_invariants():
    for lv in stark_spectrum(1.0, 2.0, 3.0):
        assert np.linalg.norm(lv.amplitudes) == pytest.approx(1.0, abs=1e-12)
        assert abs(lv.induced_dipole) <= 2.0
        assert lv.label == (lv.N, abs(lv.M))


def test_plus_minus_m_degenerate():
    levels = stark_spectrum(1.0, 1.0, 4.0)
    for lv in levels:
        if lv.M > 0:
            assert _level(levels, lv.N, -lv.M).energy == pytest.approx(lv.energy, abs=1e-12)


@pytest.mark.parametrize("field", [0.5, 2.0, 7.0])
def test_hellmann_feynman_matches_finite_difference(field):
    h = 1e-4
    up = stark_spectrum(1.0, 1.0, field + h)
    down = stark_spectrum(1.0, 1.0, field - h)
    for lv in stark_spectrum(1.0, 1.0, field):
        if lv.N > 3:
            continue
        fd = -(_level(up, lv.N, lv.M).energy - _level(down, lv.N, lv.M).energy) / (2 * h)
        assert lv.induced_dipole == pytest.approx(fd, rel=1e-6, abs=1e-9)


@pytest.mark.parametrize("field", [1.0, 10.0])
def test_cutoff_convergence(field):
    a = stark_spectrum(1.0, 1.0, field, n_max=20)
    b = stark_spectrum(1.0, 1.0, field, n_max=40)
    for lv in a:
        ref = _level(b, lv.N, lv.M)
        assert lv.energy == pytest.approx(ref.energy, rel=1e-10, abs=1e-10)


def test_cutoff_too_small():
    with pytest.raises(ConvergenceError, match="n_max"):
        stark_spectrum(1.0, 1.0, 50.0, n_max=6)
    with pytest.raises(ValueError):
        stark_spectrum(1.0, 1.0, 1.0, n_max=3)
    with pytest.raises(ValueError):
        stark_spectrum(1.0, 1.0, -1.0)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 5), st.floats(0.2, 3), st.floats(0, 3), st.floats(0.5, 4))
def test_energy_scaling(B, mu, field, s):
    # H(s B, mu, s E) = s H(B, mu, E)
    a = stark_spectrum(B, mu, field)
    b = stark_spectrum(s * B, mu, s * field)
    for la, lb in zip(a, b):
        assert (la.N, la.M) == (lb.N, lb.M)
        assert lb.energy == pytest.approx(s * la.energy, rel=1e-10, abs=1e-10)


def test_sweep_and_csv(tmp_path):
    rows = stark_sweep(1.0, 1.0, np.linspace(0, 10, 51))
    assert rows == sorted(rows, key=lambda r: (r[0], r[1], r[2]))
    assert all(r[2] >= 0 for r in rows)
    assert len(rows) == 51 * sum(n + 1 for n in range(11))
    write_stark_csv(rows[:5], tmp_path / "s.csv")
    out = list(csv.reader(open(tmp_path / "s.csv")))
    assert out[0] == ["E_b", "label_N", "label_absM", "energy", "dipole"]
    assert float(out[1][3]) == rows[0][3]


def test_sweep_continuation_detects_coarse_grid():
    # a fine grid tracks labels; a single giant step cannot be verified by overlap
    stark_sweep(1.0, 1.0, np.linspace(0, 10, 101))
    with pytest.raises(ValueError, match="continuation"):
        stark_sweep(1.0, 1.0, [0.0, 10.0])
