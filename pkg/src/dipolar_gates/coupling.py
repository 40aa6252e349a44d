"""Spin-phonon couplings, effective spin model and gate figures of merit.

Conventions (hbar = D = a = 1):

* Detunings are ``Delta_k = omega_k - omega0``.
* ``EffectiveSpinModel.U[i, j]`` is the coefficient of ``sigma_i sigma_j``
  for the unordered pair {i, j}, so the spin Hamiltonian is
  ``sum_{i<j} U_ij sigma_i sigma_j``. The ordered double sum of the
  polaron-transformed Hamiltonian counts each pair twice, giving

      U_ij = (eps^2 / 2) v_dd(r_ij) + eps^2 sum_k lambda_k^i lambda_k^j / Delta_k.
"""
from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import optimize
from scipy.sparse import diags

from ._fmt import fnum
from .crystal import (
    DEFAULT_IMAGES,
    harmonic_trap,
    lattice_with_marker,
    default_trap,
    minimize_equilibrium,
    pair_coupling_tensors,
    two_molecule_geometry,
)
from .errors import ConvergenceError, InfeasibleError, ResonanceError
from .phonons import build_dynamical_matrix, classify_modes, local_modes, normal_modes

RESONANCE_GUARD = 1e-9
ZERO_COUPLING = 1e-10


@dataclass
class CouplingTable:
    kappa: np.ndarray  # (M, n, n) kappa_k^{ij}, symmetric in (i, j), zero diagonal
    lam: np.ndarray  # (M, n) lambda_k^i
    omega: np.ndarray  # (M,) mode frequencies
    x0: np.ndarray  # (M,) zero-point amplitudes sqrt(1 / 2 m omega_k)
    zeta: np.ndarray  # (M, n, 3)
    mode_index: np.ndarray  # (M,) index into the source PhononSpectrum
    vdd: np.ndarray  # (n, n) image-summed v_dd(r_ij)
    pairs: list  # adjacent pairs entering the displacement bound
    marker: int | None = None
    target: int | None = None
    omega0: float | None = None
    resonant_mode: int | None = None  # row in this table

    @property
    def n_molecules(self):
        return self.lam.shape[1]

    @property
    def detunings(self):
        if self.omega0 is None:
            raise ValueError("drive frequency omega0 is not set")
        return self.omega - self.omega0

    def at(self, omega0):
        """Copy of the table with the drive frequency set."""
        return replace(self, omega0=float(omega0))

    def row_of(self, spectrum_index):
        hits = np.flatnonzero(self.mode_index == spectrum_index)
        if not len(hits):
            raise ValueError(f"mode {spectrum_index} carries no spin-phonon coupling")
        return int(hits[0])


def spin_phonon_couplings(spec, eq, params=None, images=DEFAULT_IMAGES, drop_uncoupled=True):
    """Couplings kappa_k^{ij} = x0_k grad v_dd(r_ij) . (zeta_k^i - zeta_k^j).

    Zero-frequency modes are dropped when their coupling vanishes (rigid
    translations) and rejected otherwise. Modes with no coupling at all
    are dropped too unless ``drop_uncoupled`` is False.
    """
    geo = eq.geometry
    v, g, _ = pair_coupling_tensors(eq.positions, geo, images)
    zeta = spec.zeta
    dz = zeta[:, :, None, :] - zeta[:, None, :, :]  # (M, n, n, 3)
    unit = np.einsum("ijc,kijc->kij", g, dz)
    scale = np.abs(unit).max(axis=(1, 2))
    zero = spec.frequencies <= 0
    if np.any(zero & (scale > ZERO_COUPLING)):
        k = int(np.flatnonzero(zero & (scale > ZERO_COUPLING))[0])
        raise ValueError(f"mode {k} has zero frequency but nonzero spin-phonon coupling")
    keep = ~zero
    if drop_uncoupled:
        keep &= scale > ZERO_COUPLING
    idx = np.flatnonzero(keep)
    omega = spec.frequencies[idx]
    x0 = np.sqrt(1.0 / (2.0 * spec.mass * omega))
    kappa = x0[:, None, None] * unit[idx]
    lam = kappa.sum(axis=2)

    pairs = [tuple(sorted(p)) for p in geo.chain_neighbors()]
    if geo.marker is not None and geo.target is not None:
        pairs.append((geo.target, geo.marker))
    return CouplingTable(kappa, lam, omega, x0, zeta[idx], idx, v, pairs, geo.marker, geo.target)


@dataclass
class EffectiveSpinModel:
    U: np.ndarray  # (n, n) pair coefficients, zero diagonal
    direct: np.ndarray
    phonon: np.ndarray
    B_eff: np.ndarray
    E_p: float
    omega0: float
    epsilon: float
    rwa_ok: bool
    rwa_margin: float  # (omega0 / eps) / max(|v_dd|, |kappa|)
    marker: int | None = None
    target: int | None = None

    @property
    def U0(self):
        if self.marker is None:
            raise ValueError("no marker in this model")
        return float(self.U[self.marker, self.target])

    @property
    def U_res(self):
        """Largest |U_ij| over all pairs other than (marker, target)."""
        a = np.abs(self.U).copy()
        if self.marker is not None:
            a[self.marker, self.target] = a[self.target, self.marker] = 0.0
        return float(a.max())


def _check_resonance(delta):
    if np.any(np.abs(delta) < RESONANCE_GUARD):
        k = int(np.argmin(np.abs(delta)))
        raise ResonanceError(f"drive resonant with mode {k}: |Delta| = {abs(delta[k]):.3e}")


def pmi_matrix(lam, delta, epsilon):
    """Phonon-mediated pair coefficients eps^2 sum_k lam^i lam^j / Delta_k."""
    _check_resonance(delta)
    u = epsilon**2 * np.einsum("ki,kj,k->ij", lam, lam, 1.0 / delta)
    np.fill_diagonal(u, 0.0)
    return u


def effective_spin_model(table, epsilon, omega0=None, rwa_factor=10.0):
    """Polaron-transformed spin model at drive frequency ``omega0``.

    RWA validity is flagged (``rwa_ok``) when both the direct couplings and
    the kappa's are ``rwa_factor`` times smaller than omega0/eps.
    """
    if omega0 is not None:
        table = table.at(omega0)
    delta = table.detunings
    direct = 0.5 * epsilon**2 * table.vdd
    np.fill_diagonal(direct, 0.0)
    phonon = pmi_matrix(table.lam, delta, epsilon)
    u = direct + phonon
    b_eff = 2 * epsilon * table.vdd.sum(axis=1)
    e_p = float(np.sum(table.lam**2 * epsilon**2 / (2 * delta[:, None])))
    scale = max(np.abs(table.vdd).max(), np.abs(table.kappa).max() if table.kappa.size else 0.0)
    margin = math.inf if epsilon == 0 or scale == 0 else table.omega0 / (epsilon * scale)
    return EffectiveSpinModel(u, direct, phonon, b_eff, e_p, float(table.omega0), float(epsilon),
                              bool(margin >= rwa_factor), float(margin), table.marker, table.target)


def _displacement_kernel(table):
    """Per adjacent pair and mode the vector (zeta^i - zeta^j) x0_k."""
    i, j = np.array(table.pairs).T
    return (table.zeta[:, i, :] - table.zeta[:, j, :]).transpose(1, 0, 2) * table.x0[None, :, None]


def displacement_bound(table, epsilon, omega0=None):
    """Worst-case relative displacement (in units of a) of adjacent molecules.

    For every adjacent pair the vector
    ``sum_k (zeta_k^i - zeta_k^j) x0_k sum_l |eps lambda_k^l / Delta_k|``
    is formed and its largest norm is returned.
    """
    if omega0 is not None:
        table = table.at(omega0)
    delta = table.detunings
    _check_resonance(delta)
    return _bound(_displacement_kernel(table), np.abs(table.lam).sum(axis=1), delta, epsilon)


def _bound(kernel, lam_abs, delta, epsilon):
    s = epsilon * lam_abs / np.abs(delta)
    return float(np.linalg.norm(np.einsum("pkc,k->pc", kernel, s), axis=1).max())


def displacement_oracle(table, epsilon, omega0=None):
    """Brute-force maximum of the polaron displacement over spin states.

    Under the polaron transformation ``a_k + a_k^dag`` shifts by
    ``-sum_l eps lambda_k^l sigma_l / Delta_k``; the induced relative
    displacement of each adjacent pair is maximised over all 2^n spin
    configurations. Only usable for small n.
    """
    if omega0 is not None:
        table = table.at(omega0)
    delta = table.detunings
    _check_resonance(delta)
    n = table.n_molecules
    if n > 16:
        raise ValueError("displacement oracle limited to 16 molecules")
    kernel = _displacement_kernel(table)
    best = 0.0
    for spins in itertools.product((-1.0, 1.0), repeat=n):
        shift = -epsilon * (table.lam @ np.array(spins)) / delta
        best = max(best, np.linalg.norm(np.einsum("pkc,k->pc", kernel, shift), axis=1).max())
    return float(best)


@dataclass
class DetuningSolution:
    omega0: float
    delta_R: float
    delta_u: float


def optimize_detuning(table, epsilon, target_delta_u, resonant_mode=None, far_factor=10.0):
    """Drive frequencies closest to the resonant mode with Delta u = target.

    Returns a dict with keys ``"below"`` (omega0 < omega_R, Delta_R > 0) and
    ``"above"`` (omega0 > omega_R, Delta_R < 0); a side is None when no
    detuning between omega_R and the next coupled mode (or omega0 = 0,
    or ``far_factor * max omega`` when none) satisfies the bound. Raises
    InfeasibleError when neither side is feasible. ``resonant_mode`` is a
    row of ``table``; it defaults to ``table.resonant_mode``.
    """
    if not target_delta_u > 0:
        raise InfeasibleError("target displacement must be positive")
    if epsilon <= 0:
        raise InfeasibleError("no spin-phonon coupling at epsilon = 0")
    r = table.resonant_mode if resonant_mode is None else resonant_mode
    if r is None:
        raise ValueError("no resonant mode designated")
    w = table.omega
    w_r = w[r]
    kernel = _displacement_kernel(table)
    lam_abs = np.abs(table.lam).sum(axis=1)

    def excess(w0):
        return _bound(kernel, lam_abs, w - w0, epsilon) - target_delta_u

    out = {}
    for side, sgn in (("below", -1), ("above", 1)):
        others = w[(sgn * (w - w_r) > 0)]
        if len(others):
            far = others.min() if sgn > 0 else others.max()
        else:
            far = 0.0 if sgn < 0 else far_factor * w.max()
        lo = w_r + sgn * 1e3 * RESONANCE_GUARD
        hi = far - sgn * (1e3 * RESONANCE_GUARD if len(others) else 0.0)
        if sgn * (hi - lo) <= 0:
            out[side] = None
            continue
        # best point in the gap
        res = optimize.minimize_scalar(excess, bounds=sorted((lo, hi)), method="bounded",
                                       options={"xatol": 1e-12 * max(1.0, w_r)})
        best = res.x
        if excess(best) > 0:
            out[side] = None
            continue
        if excess(lo) <= 0:
            w0 = lo
        else:
            w0 = optimize.brentq(excess, lo, best, xtol=1e-15, rtol=1e-13)
            # stay on the feasible side of the root
            while excess(w0) > 0:
                w0 += sgn * 1e-14 * max(1.0, abs(w0))
        out[side] = DetuningSolution(float(w0), float(w_r - w0), float(excess(w0) + target_delta_u))
    if all(v is None for v in out.values()):
        raise InfeasibleError(
            f"displacement bound {target_delta_u} cannot be met on either side of mode {r}"
        )
    return out


@dataclass
class GateMetrics:
    U0: float
    U_res: float
    ratio: float
    omega0: float
    delta_R: float | None
    delta_u: float | None
    E_p: float
    rwa_ok: bool

    def gate_time(self, phi):
        """Time to accumulate phase ``phi`` under U0 sigma sigma (hbar = 1)."""
        if self.U0 == 0:
            return math.inf
        return abs(phi) / abs(self.U0)

    def as_dict(self):
        return {
            "U0": self.U0, "U_res": self.U_res, "ratio": self.ratio, "omega0": self.omega0,
            "delta_R": self.delta_R, "delta_u": self.delta_u, "E_p": self.E_p, "rwa_ok": self.rwa_ok,
        }


def gate_metrics(model, delta_R=None, delta_u=None):
    u0, ures = model.U0, model.U_res
    ratio = math.inf if ures == 0 else abs(u0) / ures
    return GateMetrics(u0, ures, float(ratio), model.omega0, delta_R, delta_u, model.E_p, bool(model.rwa_ok))


def analytic_gate_estimates(params):
    """Closed-form U0 and U_res magnitudes for both PMI signs.

    ``"+"`` is the case where the phonon-mediated term adds to the direct
    marker-target coupling, ``"-"`` where it subtracts.
    """
    eps, b, du = params.epsilon, params.b_over_a, params.delta_u_bar
    direct0 = eps**2 / b**3
    pm0 = 3 * eps * du / b**4
    res_pm = eps * du * 0.75 * (2 * b**3 - 3 * b) / (1 + b**2) ** 3.5
    return {
        "+": {"U0_analytic": direct0 + pm0, "U_res_analytic": eps**2 / 2 + res_pm},
        "-": {"U0_analytic": direct0 - pm0, "U_res_analytic": eps**2 / 2 - res_pm},
    }


def polaron_oracle(lam, detuning, epsilon, direct=0.0, cutoff=40, tol=1e-8):
    """Exact sigma-sigma coefficient for two spins and one bosonic mode.

    Diagonalises ``Delta n + (eps/2) sum_i lam_i s_i (a + a^dag) + direct s_1 s_2``
    in each spin sector s in {+1, -1}^2, follows the dressed vacuum (largest
    overlap with the Fock vacuum) and returns
    ``(E_uu + E_dd - E_ud - E_du) / 4``. The calculation is repeated at
    twice the cutoff; a change above ``tol`` raises ConvergenceError.
    """
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (2,):
        raise ValueError("polaron oracle handles exactly two spins")
    if abs(detuning) < RESONANCE_GUARD:
        raise ResonanceError("oracle detuning too close to zero")

    def coefficient(nmax):
        n = np.arange(nmax + 1)
        off = np.sqrt(n[1:])
        energies = {}
        for s in itertools.product((1, -1), repeat=2):
            g = 0.5 * epsilon * (lam[0] * s[0] + lam[1] * s[1])
            h = diags([detuning * n, g * off, g * off], [0, 1, -1]).toarray()
            vals, vecs = np.linalg.eigh(h)
            k = int(np.argmax(np.abs(vecs[0])))
            energies[s] = vals[k] + direct * s[0] * s[1]
        return (energies[1, 1] + energies[-1, -1] - energies[1, -1] - energies[-1, 1]) / 4

    c1 = coefficient(cutoff)
    c2 = coefficient(2 * cutoff)
    if abs(c2 - c1) > tol:
        raise ConvergenceError(f"polaron oracle not converged in Fock cutoff {cutoff}: shift {abs(c2 - c1):.3e}")
    return float(c2)


def formula_pair_coefficient(lam, detuning, epsilon, direct=0.0):
    """Effective-model sigma-sigma coefficient for the same two-spin system."""
    lam = np.asarray(lam, dtype=float)
    return direct + epsilon**2 * lam[0] * lam[1] / detuning


# ---------------------------------------------------------------- scenarios

@dataclass
class CrystalSetup:
    """Equilibrium, spectrum and coupling table of one geometry."""

    equilibrium: object
    spectrum: object
    table: CouplingTable
    labels: object = field(default=None, repr=False)


def two_molecule_setup(params):
    """Two molecules in a harmonic trap; the longitudinal frequency defaults
    to nu = sqrt(6 / m), which puts the equilibrium spacing at 1."""
    m = params.mass
    nu = params.omega_long if params.omega_long is not None else math.sqrt(6.0 / m)
    trap = harmonic_trap(2, m, nu, params.omega_perp)
    eq = minimize_equilibrium(two_molecule_geometry((6.0 / (m * nu**2)) ** 0.2), trap)
    spec = normal_modes(build_dynamical_matrix(eq, m))
    table = spin_phonon_couplings(spec, eq, params)
    # breathing x mode is the only coupled one
    table.resonant_mode = int(np.argmax(np.abs(table.lam).sum(axis=1)))
    return CrystalSetup(eq, spec, table)


def marker_chain_setup(params, marker_site=None, resonant_axis="z", with_marker=True):
    """Chain of ``n_molecules`` with a marker above ``marker_site``.

    The resonant mode is the local mode on ``resonant_axis``.
    """
    params.require_crystal()
    n = params.n_molecules
    site = n // 2 if marker_site is None else marker_site
    geo = lattice_with_marker(n, params.b_over_a, site if with_marker else None, boundary=params.boundary)
    eq = minimize_equilibrium(geo, default_trap(geo, params))
    spec = normal_modes(build_dynamical_matrix(eq, params.mass))
    labels = classify_modes(spec, eq.geometry)
    table = spin_phonon_couplings(spec, eq, params)
    if with_marker:
        loc = local_modes(spec)
        if resonant_axis not in loc:
            raise ValueError(f"no local mode on axis {resonant_axis}")
        table.resonant_mode = table.row_of(loc[resonant_axis])
    return CrystalSetup(eq, spec, table, labels)


def matched_side(table):
    """Detuning side on which the PMI adds to the direct marker-target term."""
    m, t, r = table.marker, table.target, table.resonant_mode
    direct = table.vdd[m, t]
    prod = table.lam[r, m] * table.lam[r, t]
    # PMI sign is sign(prod / Delta_R); want it equal to sign(direct)
    return "below" if prod * direct > 0 else "above"


def gate_point(setup, epsilon, delta_u_bar, side="matched"):
    """Optimise the detuning and evaluate the gate metrics at one point."""
    table = setup.table
    sols = optimize_detuning(table, epsilon, delta_u_bar)
    if side == "matched":
        side = matched_side(table)
    sol = sols[side]
    if sol is None:
        raise InfeasibleError(f"no feasible detuning on the {side} side")
    model = effective_spin_model(table, epsilon, sol.omega0)
    return gate_metrics(model, sol.delta_R, sol.delta_u), model


# -------------------------------------------------------------------- export

def write_coupling_csv(table, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "omega", "i", "j", "kappa", "lambda_i"])
        for k in range(len(table.omega)):
            for i in range(table.n_molecules):
                for j in range(table.n_molecules):
                    if i != j and table.kappa[k, i, j] != 0:
                        w.writerow([int(table.mode_index[k]), fnum(table.omega[k]), i, j,
                                    fnum(table.kappa[k, i, j]), fnum(table.lam[k, i])])


def write_spin_model_csv(model, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i", "j", "U", "direct", "phonon"])
        n = len(model.U)
        for i in range(n):
            for j in range(i + 1, n):
                w.writerow([i, j, fnum(model.U[i, j]), fnum(model.direct[i, j]),
                            fnum(model.phonon[i, j])])


def summary_json(metrics, path=None):
    text = json.dumps({k: (None if isinstance(v, float) and math.isinf(v) else v)
                       for k, v in metrics.as_dict().items()}, indent=2, sort_keys=True)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text
