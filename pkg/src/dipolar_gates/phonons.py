"""Dynamical matrix, normal modes and local-mode classification."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from ._fmt import fnum
from .errors import ImaginaryFrequencyError

AXES = "xyz"
ZERO_TOL = 1e-8


@dataclass
class DynamicalMatrix:
    entries: np.ndarray  # (d, d) second derivatives on the free coordinates, D/a^5
    coords: np.ndarray  # flat coordinate index 3*molecule + axis for each row
    mass: float
    equilibrium: object = field(repr=False)

    @property
    def n_molecules(self):
        return self.equilibrium.geometry.n


def build_dynamical_matrix(eq, mass):
    """Second derivatives of dipolar + trap energy at the equilibrium ``eq``.

    Frozen coordinates are removed. ``mass`` is the molecule mass in crystal
    units (``ModelParams.mass``).
    """
    free = eq.free_mask()
    h = eq.hessian()[np.ix_(free, free)]
    h = 0.5 * (h + h.T)
    return DynamicalMatrix(h, np.flatnonzero(free), float(mass), eq)


@dataclass
class PhononSpectrum:
    frequencies: np.ndarray  # (M,) ascending, D/(hbar a^3)
    vectors: np.ndarray  # (d, M) orthonormal columns on the free coordinates
    coords: np.ndarray
    n_molecules: int
    mass: float
    parity: np.ndarray | None = None  # +1/-1 under the mirror, when symmetric
    branch: list | None = None
    local: np.ndarray | None = None

    @property
    def n_modes(self):
        return len(self.frequencies)

    @property
    def zeta(self):
        """Mode functions as (M, n_molecules, 3), zero on frozen coordinates."""
        z = np.zeros((self.n_modes, self.n_molecules * 3))
        z[:, self.coords] = self.vectors.T
        return z.reshape(self.n_modes, self.n_molecules, 3)

    def molecule_weights(self):
        """Per-molecule weight sum_alpha zeta^2, shape (M, n_molecules)."""
        return np.sum(self.zeta**2, axis=2)

    def axis_weights(self):
        return np.sum(self.zeta**2, axis=1)

    @property
    def participation(self):
        """Participation number 1 / sum_i w_i^2 of each mode."""
        w = self.molecule_weights()
        return 1.0 / np.sum(w**2, axis=1)

    @property
    def ipr(self):
        return 1.0 / self.participation


def reflection_operator(geometry, center_x=None, tol=1e-6):
    """Mirror x -> 2 c - x as a signed permutation on all 3n coordinates.

    Returns None when the geometry is not mirror symmetric about ``center_x``.
    The default centre is the target site if a marker is present, else the
    first crystal molecule (periodic) or the centroid (finite chains).
    """
    pos = geometry.positions
    if center_x is None:
        if geometry.target is not None:
            center_x = pos[geometry.target, 0]
        elif geometry.boundary == "periodic":
            center_x = pos[geometry.crystal_indices[0], 0]
        else:
            center_x = pos[:, 0].mean()
    mirrored = pos.copy()
    mirrored[:, 0] = 2 * center_x - pos[:, 0]
    n = geometry.n
    perm = np.empty(n, dtype=int)
    for i in range(n):
        d = pos - mirrored[i]
        if geometry.boundary == "periodic":
            d[:, 0] -= geometry.length * np.round(d[:, 0] / geometry.length)
        dist = np.linalg.norm(d, axis=1)
        j = int(np.argmin(dist))
        if dist[j] > tol or geometry.layer[j] != geometry.layer[i]:
            return None
        perm[i] = j
    if len(set(perm)) != n:
        return None
    op = np.zeros((3 * n, 3 * n))
    sign = np.array([-1.0, 1.0, 1.0])
    for i, j in enumerate(perm):
        for a in range(3):
            op[3 * j + a, 3 * i + a] = sign[a]
    return op


def _canonical_basis(v):
    """Deterministic orthonormal basis of span(v), independent of the input basis."""
    if v.shape[1] == 1:
        return v
    proj = v @ v.T
    order = np.argsort(-np.round(np.diag(proj), 12), kind="stable")
    basis = []
    for idx in order:
        c = proj[:, idx].copy()
        for b in basis:
            c -= (b @ c) * b
        nrm = np.linalg.norm(c)
        if nrm > 1e-6:
            basis.append(c / nrm)
        if len(basis) == v.shape[1]:
            break
    return np.column_stack(basis)


def _fix_sign(v):
    for k in range(v.shape[1]):
        i = np.argmax(np.abs(v[:, k]) - 1e-9 * np.arange(v.shape[0]))
        if v[i, k] < 0:
            v[:, k] = -v[:, k]
    return v


def _eigh_deterministic(h, degenerate_tol):
    w, v = np.linalg.eigh(h)
    out = v.copy()
    start = 0
    while start < len(w):
        stop = start + 1
        while stop < len(w) and w[stop] - w[start] < degenerate_tol * max(1.0, abs(w[start])):
            stop += 1
        if stop - start > 1:
            out[:, start:stop] = _canonical_basis(v[:, start:stop])
        start = stop
    return w, out


def normal_modes(dm, symmetry="auto", degenerate_tol=1e-9):
    """Solve the normal-mode problem ``Phi zeta = m omega^2 zeta``.

    With ``symmetry="auto"`` the mirror operator of the equilibrium geometry
    is used (when it exists) to split the problem into even and odd sectors,
    so every mode has definite parity and degenerate pairs get a
    reproducible basis. Pass ``symmetry=None`` to skip this. Eigenvalues below
    -1e-8 raise ImaginaryFrequencyError; |eigenvalue| <= 1e-8 gives omega = 0.
    """
    h = dm.entries
    coords = dm.coords
    op = None
    if symmetry == "auto":
        full = reflection_operator(dm.equilibrium.geometry)
        if full is not None:
            sub = full[np.ix_(coords, coords)]
            # the mirror must map free coordinates onto free coordinates
            if np.allclose(np.abs(sub).sum(axis=0), 1.0) and np.allclose(sub @ h, h @ sub, atol=1e-8):
                op = sub
    elif symmetry is not None:
        op = symmetry

    if op is None:
        w, v = _eigh_deterministic(h, degenerate_tol)
        parity = None
    else:
        ws, vs, ps = [], [], []
        for sgn in (1.0, -1.0):
            p = 0.5 * (np.eye(len(h)) + sgn * op)
            pw, pv = np.linalg.eigh(p)
            basis = _canonical_basis(pv[:, pw > 0.5])
            if basis.shape[1] == 0:
                continue
            hb = basis.T @ h @ basis
            wb, vb = _eigh_deterministic(0.5 * (hb + hb.T), degenerate_tol)
            ws.append(wb)
            vs.append(basis @ vb)
            ps.append(np.full(len(wb), sgn))
        w = np.concatenate(ws)
        v = np.hstack(vs)
        parity = np.concatenate(ps)
        order = np.argsort(w, kind="stable")
        w, v, parity = w[order], v[:, order], parity[order]

    if w[0] < -ZERO_TOL:
        raise ImaginaryFrequencyError(f"negative eigenvalue {w[0]:.3e} of the dynamical matrix")
    w = np.where(np.abs(w) <= ZERO_TOL, 0.0, w)
    omega = np.sqrt(w / dm.mass)
    v = _fix_sign(v)
    return PhononSpectrum(omega, v, coords, dm.n_molecules, dm.mass, parity)


@dataclass
class ModeLabels:
    branch: list  # per mode: acoustic_x, optical_y, optical_z, local_x, ... or mixed
    local: np.ndarray  # bool per mode
    dominant_axis: np.ndarray  # 0/1/2, or -1 for mixed
    band_edges: dict  # axis -> (low, high) of the extended modes


def classify_modes(spec, geometry=None, axis_threshold=0.9, band_gap_fraction=0.02,
                   localization_threshold=4.0, reference=None):
    """Branch and localization labels.

    A mode belongs to an axis when more than ``axis_threshold`` of its norm
    lies on that axis. It is local when its participation number is below
    ``localization_threshold`` and its frequency lies outside the band of
    its axis by more than ``band_gap_fraction`` of the bandwidth. Bands come
    from ``reference`` (e.g. the marker-free spectrum) when given, otherwise
    from the extended modes of ``spec`` itself.

    The labels are also stored on ``spec``.
    """
    aw = spec.axis_weights()
    dom = np.argmax(aw, axis=1)
    dom = np.where(aw[np.arange(spec.n_modes), dom] > axis_threshold, dom, -1)
    pn = spec.participation

    if reference is not None:
        ref_aw = reference.axis_weights()
        ref_dom = np.argmax(ref_aw, axis=1)
        src_freq, src_axis = reference.frequencies, ref_dom
    else:
        ext = pn >= localization_threshold
        if not ext.any():
            ext = np.ones(spec.n_modes, dtype=bool)
        src_freq, src_axis = spec.frequencies[ext], dom[ext]
    edges = {}
    for a in range(3):
        f = src_freq[src_axis == a]
        if len(f):
            edges[a] = (float(f.min()), float(f.max()))

    # the acoustic branch is the one reaching zero frequency (or the lowest)
    lows = {a: e[0] for a, e in edges.items()}
    acoustic = min(lows, key=lows.get) if lows else None

    local = np.zeros(spec.n_modes, dtype=bool)
    branch = []
    for k in range(spec.n_modes):
        a = dom[k]
        if a < 0:
            branch.append("mixed")
            continue
        is_local = False
        if pn[k] < localization_threshold and a in edges:
            lo, hi = edges[a]
            gap = band_gap_fraction * max(hi - lo, 1e-12)
            f = spec.frequencies[k]
            is_local = f > hi + gap or f < lo - gap
        local[k] = is_local
        if is_local:
            branch.append(f"local_{AXES[a]}")
        else:
            branch.append(f"{'acoustic' if a == acoustic else 'optical'}_{AXES[a]}")
    spec.branch = branch
    spec.local = local
    return ModeLabels(branch, local, dom, edges)


def local_modes(spec):
    """Map axis letter -> index of the local mode on that axis."""
    if spec.local is None:
        raise ValueError("classify_modes has not been run on this spectrum")
    out = {}
    for k in np.flatnonzero(spec.local):
        axis = spec.branch[k][-1]
        if axis in out:
            raise ValueError(f"more than one local mode on axis {axis}")
        out[axis] = int(k)
    return out


def marker_target_weight(spec, geometry, k):
    w = spec.molecule_weights()[k]
    return float(w[geometry.marker] + w[geometry.target])


def write_spectrum_csv(spec, path, zeta_path=None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "omega", "branch", "ipr"])
        branch = spec.branch or ["unclassified"] * spec.n_modes
        for k, (om, br, ipr) in enumerate(zip(spec.frequencies, branch, spec.ipr)):
            w.writerow([k, fnum(om), br, fnum(ipr)])
    if zeta_path is not None:
        z = spec.zeta
        with open(zeta_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "molecule", "axis", "amplitude"])
            for k in range(spec.n_modes):
                for i in range(spec.n_molecules):
                    for a in range(3):
                        w.writerow([k, i, AXES[a], fnum(z[k, i, a])])
