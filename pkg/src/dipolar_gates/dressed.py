"""Microwave-dressed three-level (Lambda) system and state-dependent dipoles.

Rotating-frame Hamiltonian, basis (|g>, |e>, |r>):

    H = -Delta |r><r| + sum_{u=g,e} (Omega_u e^{i phi_u} |u><r| + h.c.)

The bright state |alpha_0> = sin(nu) e^{i eta}|g> + cos(nu) e^{-i eta}|e>
couples to |r> with strength Omega_eff; the dark state |beta_0> does not.
The qubit operator sigma_w is defined through the bright-state projector,
``sigma_w = 1 - 2 |alpha_0><alpha_0|``, and carries the axis label
w = (sin 2nu cos 2eta, sin 2nu sin 2eta, cos 2nu). With sigma_z|g> = +|g>
its Bloch axis in the standard Pauli basis is ``pauli_axis(nu, eta)``,
which differs from w by the sign of the x component.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import DipolarError

PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


class AdiabaticityError(DipolarError, ValueError):
    pass


@dataclass(frozen=True)
class LambdaDrive:
    omega_g: float
    omega_e: float
    phi_g: float = 0.0
    phi_e: float = 0.0
    delta: float = 0.0

    def __post_init__(self):
        if self.omega_g < 0 or self.omega_e < 0:
            raise ValueError("Rabi magnitudes must be non-negative")

    @property
    def omega_eff(self):
        return math.hypot(self.omega_g, self.omega_e)

    @property
    def nu(self):
        return math.atan2(self.omega_g, self.omega_e)

    @property
    def eta(self):
        return 0.5 * (self.phi_g - self.phi_e)

    def flipped(self):
        """Drive with (nu, eta) -> (pi/2 - nu, eta + pi/2); negates sigma_w."""
        return LambdaDrive(self.omega_e, self.omega_g, self.phi_g + math.pi / 2,
                           self.phi_e - math.pi / 2, self.delta)

    def hamiltonian(self):
        h = np.zeros((3, 3), dtype=complex)
        h[2, 2] = -self.delta
        h[0, 2] = self.omega_g * np.exp(1j * self.phi_g)
        h[1, 2] = self.omega_e * np.exp(1j * self.phi_e)
        h[2, 0], h[2, 1] = np.conj(h[0, 2]), np.conj(h[1, 2])
        return h


def mixing_angles(delta_over_omega_eff):
    """(xi_alpha, xi_gamma) for the bright/excited pair.

    tan(xi_alpha) = (-x + sqrt(4 + x^2)) / 2 and, for the orthogonal
    combination, tan(xi_gamma) = (-x - sqrt(4 + x^2)) / 2, x = Delta/Omega_eff.
    """
    x = float(delta_over_omega_eff)
    root = math.sqrt(4.0 + x * x)
    # cancellation-free form of (-x + root) / 2 for large positive x
    t_alpha = 2.0 / (x + root) if x > 0 else (-x + root) / 2
    t_gamma = -2.0 / (root - x) if x < 0 else (-x - root) / 2
    return math.atan(t_alpha), math.atan(t_gamma)


def bright_dark(nu, eta):
    a0 = np.array([math.sin(nu) * np.exp(1j * eta), math.cos(nu) * np.exp(-1j * eta)])
    b0 = np.array([math.cos(nu) * np.exp(1j * eta), -math.sin(nu) * np.exp(-1j * eta)])
    return a0, b0


def w_vector(nu, eta):
    return np.array([math.sin(2 * nu) * math.cos(2 * eta), math.sin(2 * nu) * math.sin(2 * eta),
                     math.cos(2 * nu)])


def pauli_axis(nu, eta):
    """Bloch axis n of sigma_w = n . sigma in the (|g>, |e>) basis."""
    w = w_vector(nu, eta)
    return np.array([-w[0], w[1], w[2]])


def sigma_w(nu, eta):
    a0, _ = bright_dark(nu, eta)
    return np.eye(2) - 2 * np.outer(a0, a0.conj())


def dressed_states(drive):
    """Columns |alpha_Omega>, |beta_Omega>, |gamma_Omega> in the (g, e, r) basis."""
    if drive.omega_eff == 0:
        raise ValueError("drive has zero effective Rabi frequency")
    xa, xg = mixing_angles(drive.delta / drive.omega_eff)
    a0, b0 = bright_dark(drive.nu, drive.eta)
    # phase of <alpha_0|H|r>
    theta = 0.5 * (drive.phi_g + drive.phi_e)
    r = np.exp(-1j * theta)
    a0 = np.append(a0, 0)
    b0 = np.append(b0, 0)
    er = np.array([0, 0, r])
    return np.column_stack([
        math.cos(xa) * a0 + math.sin(xa) * er,
        b0,
        math.cos(xg) * a0 + math.sin(xg) * er,
    ])


@dataclass(frozen=True)
class DressedDipole:
    xi_alpha: float
    xi_gamma: float
    nu: float
    eta: float
    mu0: float  # bare qubit-state moment [Debye]
    mu1: float  # (1/2) sin^2(xi_alpha) (mu_rr - mu0) [Debye]

    @property
    def w(self):
        return w_vector(self.nu, self.eta)

    @property
    def identity_coefficient(self):
        return self.mu0 + self.mu1

    @property
    def sigma_coefficient(self):
        return -self.mu1

    def operator(self):
        """2x2 dipole operator mu0 + 2 mu1 |alpha_0><alpha_0| on (|g>, |e>)."""
        return self.identity_coefficient * np.eye(2) + self.sigma_coefficient * sigma_w(self.nu, self.eta)


def dressed_dipole(mu0, mu_rr, drive):
    """Dressed dipole for ``drive``; ``drive=None`` is an idle qubit."""
    if drive is None:
        return DressedDipole(0.0, 0.0, 0.0, 0.0, float(mu0), 0.0)
    if drive.omega_eff == 0:
        raise ValueError("drive has zero effective Rabi frequency")
    xa, xg = mixing_angles(drive.delta / drive.omega_eff)
    mu1 = 0.5 * math.sin(xa) ** 2 * (mu_rr - mu0)
    return DressedDipole(xa, xg, drive.nu, drive.eta, float(mu0), mu1)


@dataclass(frozen=True)
class RampCheck:
    passed: bool
    margin: float


def adiabatic_ramp_check(omega_eff, delta, tau_ramp, safety=10.0):
    """Ramp time against Omega_eff / Delta^2; margin = tau Delta^2 / Omega_eff."""
    if omega_eff <= 0 or tau_ramp <= 0:
        raise ValueError("omega_eff and tau_ramp must be positive")
    if math.isinf(delta):
        return RampCheck(True, math.inf)
    if delta == 0:
        return RampCheck(False, 0.0)
    margin = tau_ramp * delta**2 / omega_eff
    return RampCheck(margin >= safety, margin)


def sin2_to_omega_eff(s, delta):
    """Omega_eff giving sin^2(xi_alpha) = s at detuning delta (0 <= s < 1/2)."""
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    nz = s > 0
    t = np.sqrt(s[nz] / (1 - s[nz]))
    x = (1 - t**2) / t
    with np.errstate(divide="ignore"):
        out[nz] = np.where(x > 0, delta / x, np.inf)
    return out


@dataclass
class ModulationSchedule:
    t: np.ndarray
    mu1: np.ndarray  # signed target; state-dependent operator is -mu1(t) sigma_w(nu, eta)
    omega_eff: np.ndarray
    nu: np.ndarray
    eta: np.ndarray
    flipped: np.ndarray  # True where the sign-flipped control pair is used
    identity_correction: np.ndarray  # bias-field correction to the identity part [Debye]
    first_harmonic: float
    ramp_margin: float

    @property
    def bias_correction_needed(self):
        return bool(np.any(self.identity_correction != 0))

    def realized_mu1(self, delta, delta_mu):
        """Signed sigma_w(nu, eta) coefficient rebuilt from the controls (sign as ``mu1``)."""
        out = np.zeros_like(self.t)
        for i, om in enumerate(self.omega_eff):
            if om == 0:
                continue
            xa = math.pi / 4 if math.isinf(om) else mixing_angles(delta / om)[0]
            m = 0.5 * math.sin(xa) ** 2 * delta_mu
            out[i] = -m if self.flipped[i] else m
        return out


def modulation_schedule(mu1_peak, omega0, horizon, delta, delta_mu, nu=math.pi / 4, eta=0.0,
                        n_points=1000, safety=10.0):
    """Controls realising mu1(t) = mu1_peak cos(omega0 t) on [0, horizon].

    ``delta_mu = mu_rr - mu0``. The magnitude is set by Omega_eff(t); on
    half-cycles where the cosine is negative the control pair is flipped.
    Each quarter period must satisfy the adiabatic ramp condition at the
    peak Omega_eff, otherwise AdiabaticityError is raised. The identity part
    mu0 + |mu1(t)| is compensated by the emitted bias correction -|mu1(t)|.
    """
    if delta_mu == 0 or mu1_peak < 0 or horizon < 0:
        raise ValueError("need delta_mu != 0, mu1_peak >= 0, horizon >= 0")
    s_peak = 2 * mu1_peak / abs(delta_mu)
    if s_peak >= 0.5 and not (delta == 0 and s_peak == 0.5):
        raise ValueError(f"mu1_peak needs sin^2(xi) = {s_peak:.3g}, not reachable (max 1/2)")
    t = np.linspace(0.0, horizon, n_points)
    target = mu1_peak * np.cos(omega0 * t)
    s = 2 * np.abs(target) / abs(delta_mu)
    omega_eff = sin2_to_omega_eff(s, delta) if delta > 0 else np.where(s > 0, np.inf, 0.0)
    # sign of the unflipped moment is sign(delta_mu); flip where target has the other sign
    flipped = np.sign(target) * np.sign(delta_mu) < 0
    nus = np.where(flipped, math.pi / 2 - nu, nu)
    etas = np.where(flipped, eta + math.pi / 2, eta)
    peak = float(sin2_to_omega_eff(np.array([s_peak]), delta)[0]) if delta > 0 else math.inf
    if omega0 > 0 and mu1_peak > 0:
        check = adiabatic_ramp_check(peak, delta, math.pi / (2 * omega0), safety)
        if not check.passed:
            raise AdiabaticityError(
                f"quarter period {math.pi / (2 * omega0):.3g} too short: margin {check.margin:.3g} < {safety}"
            )
        margin = check.margin
    else:
        margin = math.inf
    periods = math.floor(omega0 * horizon / (2 * math.pi)) if omega0 > 0 else 0
    if periods >= 1:
        tt = np.linspace(0, 2 * math.pi * periods / omega0, 20000, endpoint=False)
        first = 2 * np.mean(mu1_peak * np.cos(omega0 * tt) * np.cos(omega0 * tt))
    else:
        first = mu1_peak
    return ModulationSchedule(t, target, omega_eff, nus, etas, flipped, -np.abs(target),
                              float(first), margin)


@dataclass
class LeakageBudget:
    x: tuple
    y: float
    s: float
    z: float
    effective_rabi: float
    flags: dict
    flip_flop: float | None = None

    @property
    def leading(self):
        return max(*self.x, self.y, self.s, self.z)

    def as_dict(self):
        d = {"x": list(self.x), "y": self.y, "s": self.s, "z": self.z,
             "effective_rabi": self.effective_rabi, "flags": dict(self.flags)}
        if self.flip_flop is not None:
            d["flags"]["flip_flop"] = self.flip_flop
        return d

    def to_json(self, path=None):
        text = json.dumps(self.as_dict(), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def leakage_budget(omega1, omega2, omega_e, delta_2photon, gamma_sr, B, mu_er=None, xi_alpha=None,
                   weak_factor=10.0):
    """Order-of-magnitude admixtures of the two-photon dressing scheme.

    All frequencies in one common unit. Flags report each regime condition
    separately; nothing is enforced.
    """
    if delta_2photon <= 0 or gamma_sr <= 0 or B <= 0:
        raise ValueError("delta_2photon, gamma_sr and B must be positive")
    x = (omega1 / delta_2photon, omega2 / delta_2photon)
    flags = {
        "delta_le_gamma_sr": delta_2photon <= gamma_sr,
        "weak_drive": max(omega1, omega2) * weak_factor <= delta_2photon,
        "gamma_sr_over_B": gamma_sr / B,
        "gamma_sr_over_B_ok": 1e-3 <= gamma_sr / B <= 0.1,
    }
    ff = None
    if mu_er is not None:
        if xi_alpha is None:
            raise ValueError("flip-flop estimate needs xi_alpha")
        ff = math.tan(xi_alpha) ** 2 * abs(mu_er) ** 2
    return LeakageBudget(x, omega1 / delta_2photon, omega1 * omega2 / delta_2photon**2,
                         omega_e / gamma_sr, omega1 * omega2 / delta_2photon, flags, ff)
