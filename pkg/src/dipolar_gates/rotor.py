"""Rigid rotor in a static bias field.

H = B N^2 - mu_b E_b cos(theta), block diagonal in M_N. Energies come out in
the units of ``B`` and induced dipoles in units of ``mu_b``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from ._fmt import fnum
from .errors import ConvergenceError

LEAK_TOL = 1e-8


def cos_element(n, m):
    """<N+1, M| cos(theta) |N, M>."""
    return np.sqrt(((n + 1) ** 2 - m**2) / ((2 * n + 1) * (2 * n + 3)))


def basis_states(n_max):
    """All (N, M_N) with N <= n_max, ordered by (N, M_N)."""
    return [(n, m) for n in range(n_max + 1) for m in range(-n, n + 1)]


@dataclass
class StarkLevel:
    N: int  # adiabatic label
    M: int
    energy: float
    induced_dipole: float
    amplitudes: np.ndarray  # over basis_states(n_max); nonzero only in the M block

    @property
    def label(self):
        return (self.N, abs(self.M))


def _block(B, mu_b, E_b, m, n_max):
    ns = np.arange(abs(m), n_max + 1)
    diag = B * ns * (ns + 1.0)
    off = -mu_b * E_b * cos_element(ns[:-1], m)
    return ns, diag, off


def _block_eig(B, mu_b, E_b, m, n_max):
    ns, diag, off = _block(B, mu_b, E_b, m, n_max)
    if len(ns) == 1:
        return ns, diag.copy(), np.ones((1, 1))
    w, v = eigh_tridiagonal(diag, off)
    # deterministic sign: first nonzero amplitude positive
    for k in range(v.shape[1]):
        i = np.flatnonzero(np.abs(v[:, k]) > 1e-14)[0]
        if v[i, k] < 0:
            v[:, k] *= -1
    return ns, w, v


def stark_spectrum(B, mu_b, E_b, n_max=20, check=True):
    """Levels with N <= n_max // 2, sorted by energy then (N, M).

    Within one M block the tridiagonal Hamiltonian has a simple spectrum,
    so the k-th eigenvalue is adiabatically connected to N = |M| + k.
    Raises ConvergenceError when a returned level has more than 1e-8
    population in the two highest N shells.
    """
    if n_max < 4:
        raise ValueError("n_max must be at least 4")
    if E_b < 0 or B <= 0:
        raise ValueError("need E_b >= 0 and B > 0")
    index = {s: i for i, s in enumerate(basis_states(n_max))}
    keep = n_max // 2
    levels = []
    for m in range(-keep, keep + 1):
        ns, w, v = _block_eig(B, mu_b, E_b, m, n_max)
        cos_off = cos_element(ns[:-1], m)
        for k in range(keep - abs(m) + 1):
            vec = v[:, k]
            if check and len(ns) > 2 and np.sum(vec[ns >= n_max - 1] ** 2) > LEAK_TOL:
                raise ConvergenceError(
                    f"basis cutoff n_max={n_max} too small at E_b={E_b}: level N={abs(m) + k} leaks"
                )
            dip = mu_b * 2 * np.sum(vec[:-1] * vec[1:] * cos_off)
            amp = np.zeros(len(index))
            amp[[index[(n, m)] for n in ns]] = vec
            levels.append(StarkLevel(int(abs(m) + k), m, float(w[k]), float(dip), amp))
    levels.sort(key=lambda lv: (round(lv.energy, 10), lv.N, lv.M))
    return levels


def stark_sweep(B, mu_b, fields, n_max=20, continuation=True):
    """Levels over a field grid, one row per (E_b, N, |M|).

    With ``continuation`` the within-block ordering labels are checked
    against eigenvector-overlap tracking between successive fields; a
    mismatch or an overlap below 0.9 raises ValueError (grid too coarse).
    """
    fields = np.asarray(fields, dtype=float)
    rows = []
    keep = n_max // 2
    prev = {}
    for e in fields:
        for lv in stark_spectrum(B, mu_b, e, n_max):
            if lv.M < 0:
                continue
            rows.append((float(e), lv.N, lv.M, lv.energy, lv.induced_dipole))
        if continuation:
            for m in range(keep + 1):
                _, _, v = _block_eig(B, mu_b, e, m, n_max)
                v = v[:, : keep - m + 1]
                if m in prev:
                    ov = np.abs(prev[m].T @ v)
                    track = np.argmax(ov, axis=0)
                    if np.any(ov.max(axis=0) < 0.9) or np.any(track != np.arange(v.shape[1])):
                        raise ValueError(f"label continuation failed near E_b={e} in block M={m}")
                prev[m] = v
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    return rows


def write_stark_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["E_b", "label_N", "label_absM", "energy", "dipole"])
        for e, n, m, en, d in rows:
            w.writerow([fnum(e), n, m, fnum(en), fnum(d)])
