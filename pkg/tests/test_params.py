import math

import pytest
import scipy.constants as const
from hypothesis import given, settings
from hypothesis import strategies as st

from dipolar_gates.params import (
    BINDINGS,
    UNIT_TAGS,
    ModelParams,
    PhysicalBinding,
    load_params,
    parse_config,
    params_from_mapping,
    to_dimensionless,
    to_physical,
    tweezer_constraints,
)

LICS = BINDINGS["LiCs"]


def test_defaults():
    p = ModelParams()
    assert p.mass == 30
    assert p.omega_perp == pytest.approx(50 / math.sqrt(30))
    assert p.boundary == "periodic"


@pytest.mark.parametrize("kw", [
    {"epsilon": 0.5}, {"epsilon": -0.1}, {"r_d": 0}, {"b_over_a": 0}, {"n_molecules": 1},
    {"boundary": "ring"}, {"delta_u_bar": 0}, {"delta_u_bar": 1}, {"boundary": "harmonic"},
    {"omega_perp": -1.0},
])
def test_invalid_params_rejected(kw):
    with pytest.raises(ValueError):
        ModelParams(**kw)


def test_crystal_phase_guard():
    with pytest.raises(ValueError, match="crystalline"):
        ModelParams(r_d=0.5).require_crystal()
    assert ModelParams(r_d=2).require_crystal().r_d == 2


def test_config_parsing(tmp_path):
    text = "# comment\nr_d = 40\nepsilon=0.05  # trailing\nboundary = open\nomega_long = none\n\n"
    raw = parse_config(text)
    assert raw == {"r_d": "40", "epsilon": "0.05", "boundary": "open", "omega_long": "none"}
    path = tmp_path / "p.cfg"
    path.write_text(text)
    p = load_params(path)
    assert p.r_d == 40 and p.epsilon == 0.05 and p.boundary == "open" and p.omega_long is None
    assert p.omega_perp == pytest.approx(50 / math.sqrt(40))


def test_config_errors():
    with pytest.raises(ValueError, match="line 2"):
        parse_config("r_d = 3\nbogus\n")
    with pytest.raises(ValueError):
        parse_config(" = 3")


def test_override_keeps_omega_perp_tied_to_r_d():
    base = ModelParams()
    p = params_from_mapping({"r_d": "50"}, base)
    assert p.omega_perp == pytest.approx(50 / math.sqrt(50))


def test_lics_spacing_and_energy_unit():
    u = LICS.units(30)
    assert u.length == pytest.approx(630e-9, rel=0.05)
    assert u.frequency == pytest.approx(35e3, rel=0.15)
    # frozen regression values
    assert u.length == pytest.approx(6.271133790536e-07, rel=1e-10)
    assert u.frequency == pytest.approx(to_physical(30, "LiCs", 1.0, "frequency"))


def test_zero_maps_to_zero():
    for tag in UNIT_TAGS:
        assert to_physical(ModelParams(), LICS, 0.0, tag) == 0.0


def test_unknown_tag():
    with pytest.raises(ValueError, match="unknown unit tag"):
        to_physical(ModelParams(), LICS, 1.0, "charge")


@settings(max_examples=50, deadline=None)
@given(value=st.floats(-1e6, 1e6).filter(lambda v: v == 0 or abs(v) > 1e-200), r_d=st.floats(1.5, 500),
       tag=st.sampled_from(UNIT_TAGS), name=st.sampled_from(sorted(BINDINGS)))
def test_round_trip(value, r_d, tag, name):
    back = to_dimensionless(r_d, name, to_physical(r_d, name, value, tag), tag)
    assert back == pytest.approx(value, rel=1e-12, abs=1e-300)


@settings(max_examples=30, deadline=None)
@given(r1=st.floats(0.5, 1000), r2=st.floats(0.5, 1000))
def test_spacing_decreases_with_r_d(r1, r2):
    if r1 == r2:
        return
    lo, hi = sorted((r1, r2))
    assert LICS.spacing(lo) > LICS.spacing(hi)


def test_unit_system_consistency():
    u = LICS.units(30)
    # hbar^2/(m a^2) in crystal energy units is 1/r_d
    assert const.hbar**2 / (LICS.mass_kg * u.length**2) / u.energy == pytest.approx(1 / 30)
    assert u.mass * 30 == pytest.approx(LICS.mass_kg)
    assert u.time * u.frequency == pytest.approx(1.0)


def test_binding_validation():
    with pytest.raises(ValueError):
        PhysicalBinding("bad", dipole_moment=-1, mass=10)
    assert PhysicalBinding("ok", 1.0, 10.0).rotational_constant_B is None


def test_tweezer_window_lics():
    p = ModelParams()
    a = LICS.spacing(30)
    win = tweezer_constraints(p, 1e-6 / a, LICS)
    assert 0.6e3 / 2 <= win.omega_min <= 0.6e3 * 2
    assert 6e3 / 2 <= win.omega_max <= 6e3 * 2
    assert not win.empty


def test_tweezer_limits():
    p = ModelParams()
    assert math.isinf(tweezer_constraints(p, 0.0, LICS).omega_max)
    with pytest.raises(ValueError):
        tweezer_constraints(p, -1.0, LICS)
    # very wide tweezer: empty window is a value, not an error
    assert tweezer_constraints(p, 1e6, LICS).empty


@settings(max_examples=30, deadline=None)
@given(s1=st.floats(0.5, 100), s2=st.floats(0.5, 100), sigma=st.floats(0.1, 10))
def test_tweezer_monotone(s1, s2, sigma):
    p = ModelParams()
    lo, hi = sorted((s1, s2))
    w_lo = tweezer_constraints(p, sigma, LICS, lo)
    w_hi = tweezer_constraints(p, sigma, LICS, hi)
    assert w_hi.omega_max <= w_lo.omega_max
    assert w_hi.omega_min == w_lo.omega_min
    assert tweezer_constraints(p, 2 * sigma, LICS, lo).omega_min == w_lo.omega_min
