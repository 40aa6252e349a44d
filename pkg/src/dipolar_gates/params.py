"""Dimensionless unit system, model parameters and physical bindings.

Internally every quantity is measured in the crystal units

    length     a        (mean interparticle spacing)
    energy     D / a^3  (dipole-dipole energy at spacing a)
    frequency  D / (hbar a^3)
    hbar       1

With a = D = hbar = 1 the molecule mass is fixed by the interaction-to-kinetic
ratio r_d = D m / (hbar^2 a), i.e. ``m = r_d``. Physical values only appear at
the I/O boundary through :class:`PhysicalBinding`.

Frequencies in physical units are angular frequencies; ``"frequency"`` converts
to rad/s, so 35e3 rad/s is what is usually quoted as "35 kHz".
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import scipy.constants as const

DEBYE = 1e-21 / const.c  # C m
BOUNDARIES = ("periodic", "open", "harmonic")


@dataclass(frozen=True)
class UnitSystem:
    """SI values of the crystal units for one molecule species at given r_d."""

    length: float  # a [m]
    energy: float  # D/a^3 [J]
    frequency: float  # D/(hbar a^3) [rad/s]
    mass: float  # hbar^2 a / D [kg]; the molecule mass is r_d of these

    @property
    def time(self):
        return 1.0 / self.frequency

    @property
    def force(self):
        return self.energy / self.length


@dataclass(frozen=True)
class ModelParams:
    r_d: float = 30.0
    epsilon: float = 0.1
    b_over_a: float = 0.8
    omega_perp: float | None = None  # [D/(hbar a^3)], default 50/sqrt(r_d)
    omega_long: float | None = None
    n_molecules: int = 50
    boundary: str = "periodic"
    delta_u_bar: float = 0.1

    def __post_init__(self):
        if not self.r_d > 0:
            raise ValueError(f"r_d must be positive, got {self.r_d}")
        if not 0 <= self.epsilon < 0.5:
            raise ValueError(f"epsilon must lie in [0, 0.5), got {self.epsilon}")
        if not self.b_over_a > 0:
            raise ValueError(f"b_over_a must be positive, got {self.b_over_a}")
        if self.n_molecules < 2:
            raise ValueError("need at least two molecules")
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")
        if not 0 < self.delta_u_bar < 1:
            raise ValueError(f"delta_u_bar must lie in (0, 1), got {self.delta_u_bar}")
        if self.omega_perp is None:
            object.__setattr__(self, "omega_perp", 50.0 / math.sqrt(self.r_d))
        if self.omega_perp <= 0:
            raise ValueError("omega_perp must be positive")
        if self.omega_long is not None and self.omega_long <= 0:
            raise ValueError("omega_long must be positive when given")
        if self.boundary == "harmonic" and self.omega_long is None:
            raise ValueError("harmonic boundary needs omega_long")

    @property
    def mass(self):
        """Molecule mass in crystal units (hbar = D = a = 1)."""
        return self.r_d

    def require_crystal(self):
        """Crystal scenarios need the crystalline phase r_d > 1."""
        if self.r_d <= 1:
            raise ValueError(f"r_d = {self.r_d} is not in the crystalline phase (r_d > 1)")
        return self

    def with_(self, **changes):
        return replace(self, **changes)

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _coerce(name, text):
    text = text.strip()
    if name == "boundary":
        return text
    if name == "n_molecules":
        return int(text)
    if name == "omega_long" and text.lower() in ("", "none"):
        return None
    return float(text)


PARAM_KEYS = tuple(f.name for f in fields(ModelParams))


def parse_config(text):
    """Parse ``key = value`` lines (``#`` starts a comment) into a dict.

    Unknown keys are kept so callers can route scenario-level settings; use
    :func:`params_from_mapping` to build a :class:`ModelParams`.
    """
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ValueError(f"line {lineno}: empty key")
        out[key] = value
    return out


def params_from_mapping(mapping, base=None):
    """Build ModelParams from string or typed values; other keys are ignored."""
    values = base.as_dict() if base is not None else {}
    for key, value in mapping.items():
        if key in PARAM_KEYS:
            values[key] = _coerce(key, value) if isinstance(value, str) else value
    if base is not None and "r_d" in mapping and "omega_perp" not in mapping:
        # keep the 50/sqrt(r_d) default tied to r_d
        values["omega_perp"] = None
    return ModelParams(**values)


def load_params(path):
    return params_from_mapping(parse_config(Path(path).read_text()))


@dataclass(frozen=True)
class PhysicalBinding:
    name: str
    dipole_moment: float  # induced dipole [Debye]
    mass: float  # [u]
    rotational_constant_B: float | None = None  # [GHz]
    spin_rotation_gamma: float | None = None  # [MHz]
    wavelength: float | None = None  # optical lattice [nm]
    notes: str = field(default="", compare=False)

    def __post_init__(self):
        for f in ("dipole_moment", "mass", "rotational_constant_B", "spin_rotation_gamma", "wavelength"):
            v = getattr(self, f)
            if v is not None and not v > 0:
                raise ValueError(f"{f} must be positive, got {v}")

    @property
    def D(self):
        """Dipole coupling constant mu^2/(4 pi eps0) in J m^3."""
        mu = self.dipole_moment * DEBYE
        return mu**2 / (4 * math.pi * const.epsilon_0)

    @property
    def mass_kg(self):
        return self.mass * const.atomic_mass

    def spacing(self, r_d):
        """Lattice spacing a = D m / (hbar^2 r_d) in metres."""
        if not r_d > 0:
            raise ValueError("r_d must be positive")
        return self.D * self.mass_kg / (const.hbar**2 * r_d)

    def units(self, r_d):
        a = self.spacing(r_d)
        energy = self.D / a**3
        return UnitSystem(
            length=a,
            energy=energy,
            frequency=energy / const.hbar,
            mass=const.hbar**2 * a / self.D,
        )


BINDINGS = {
    # LiCs: induced moment ~3 D in the bias field, 7Li133Cs
    "LiCs": PhysicalBinding(
        "LiCs", dipole_moment=3.0, mass=140.0, rotational_constant_B=5.6, wavelength=600.0,
        notes="induced dipole; optical lattice near 600 nm",
    ),
    # SrO: bare moment; an upper bound for the induced one
    "SrO": PhysicalBinding(
        "SrO", dipole_moment=8.9, mass=104.0, rotational_constant_B=10.1,
        notes="bare dipole moment",
    ),
}


def get_binding(name_or_binding):
    if isinstance(name_or_binding, PhysicalBinding):
        return name_or_binding
    try:
        return BINDINGS[name_or_binding]
    except KeyError:
        raise KeyError(f"unknown binding {name_or_binding!r}; known: {sorted(BINDINGS)}") from None


_SCALE = {
    "length": lambda u: u.length,
    "energy": lambda u: u.energy,
    "frequency": lambda u: u.frequency,
    "time": lambda u: u.time,
    "mass": lambda u: u.mass,
    "force": lambda u: u.force,
}
UNIT_TAGS = tuple(_SCALE)


def _scale(params, binding, tag):
    if tag not in _SCALE:
        raise ValueError(f"unknown unit tag {tag!r}; expected one of {UNIT_TAGS}")
    r_d = params.r_d if isinstance(params, ModelParams) else float(params)
    return _SCALE[tag](get_binding(binding).units(r_d))


def to_physical(params, binding, value, tag):
    """Convert a dimensionless ``value`` with unit ``tag`` to SI.

    ``params`` may be a ModelParams or a bare r_d.
    """
    return value * _scale(params, binding, tag)


def to_dimensionless(params, binding, value, tag):
    return value / _scale(params, binding, tag)


@dataclass(frozen=True)
class TweezerWindow:
    omega_min: float  # rad/s
    omega_max: float  # rad/s
    safety: float

    @property
    def empty(self):
        return not self.omega_min <= self.omega_max


def tweezer_constraints(params, sigma_tw, binding, safety=10.0):
    """Admissible tweezer trap frequencies for moving the marker.

    The lower bound keeps the marker ground state narrower than the lattice
    spacing, ``sqrt(hbar / 2 m w) <= a``. The upper bound keeps the tweezer
    force on register molecules below the crystal restoring force,
    ``3 sqrt(e) D / a^4 >= safety * m w^2 sigma_tw``.

    ``sigma_tw`` is in units of a. An empty window is returned, not raised.
    """
    if sigma_tw < 0 or safety <= 0:
        raise ValueError("sigma_tw must be non-negative and safety positive")
    binding = get_binding(binding)
    a = binding.spacing(params.r_d if isinstance(params, ModelParams) else float(params))
    m = binding.mass_kg
    omega_min = const.hbar / (2 * m * a**2)
    if sigma_tw == 0:
        omega_max = math.inf
    else:
        force = 3 * math.sqrt(math.e) * binding.D / a**4
        omega_max = math.sqrt(force / (safety * m * sigma_tw * a))
    return TweezerWindow(omega_min, omega_max, safety)
