"""Crystal geometries and equilibrium positions.

Molecules carry dipoles along z. The pair potential is

    v_dd(r) = (1 - 3 n_z^2) / r^3          [D/a^3, r in a]

Periodic chains are closed along x with an explicit image sum on top of the
minimum-image convention; the 1/r^3 tail is absolutely convergent in 1D.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from ._fmt import fnum
from .errors import CollapseError, ConvergenceError, SingularPairError, UnstableEquilibriumError

DEFAULT_IMAGES = 30
COLLAPSE_DISTANCE = 0.1


def vdd(r):
    """Dipole-dipole energy for separation(s) ``r`` of shape (..., 3)."""
    r = np.asarray(r, dtype=float)
    r2 = np.sum(r * r, axis=-1)
    if np.any(r2 == 0):
        raise SingularPairError("v_dd evaluated at zero separation")
    return (r2 - 3 * r[..., 2] ** 2) / r2**2.5


def vdd_grad(r):
    """Analytic gradient of :func:`vdd`, shape (..., 3), in D/a^4.

    Equals (3/r^4) (n_x(5n_z^2-1), n_y(5n_z^2-1), n_z(5n_z^2-3)).
    """
    r = np.asarray(r, dtype=float)
    r2 = np.sum(r * r, axis=-1)
    if np.any(r2 == 0):
        raise SingularPairError("v_dd gradient evaluated at zero separation")
    z = r[..., 2]
    r5 = r2**2.5
    g = r * ((-3.0 / r5) + 15.0 * z**2 / (r5 * r2))[..., None]
    g[..., 2] -= 6.0 * z / r5
    return g


def vdd_hess(r):
    """Analytic Hessian of :func:`vdd`, shape (..., 3, 3), in D/a^5."""
    r = np.asarray(r, dtype=float)
    r2 = np.sum(r * r, axis=-1)
    if np.any(r2 == 0):
        raise SingularPairError("v_dd Hessian evaluated at zero separation")
    z = r[..., 2]
    r5 = r2**2.5
    r7 = r5 * r2
    r9 = r7 * r2
    eye = np.eye(3)
    ez = eye[2]
    rr = r[..., :, None] * r[..., None, :]
    # 1/r^3 part
    h = -3.0 * eye / r5[..., None, None] + 15.0 * rr / r7[..., None, None]
    # -3 z^2 / r^5 part
    zr = z[..., None] * r  # z r_a
    cross = zr[..., :, None] * ez[None, :] + ez[:, None] * zr[..., None, :]
    h -= 3.0 * (
        2.0 * np.outer(ez, ez) / r5[..., None, None]
        - 10.0 * cross / r7[..., None, None]
        - 5.0 * (z**2)[..., None, None] * eye / r7[..., None, None]
        + 35.0 * (z**2)[..., None, None] * rr / r9[..., None, None]
    )
    return h


@dataclass
class Geometry:
    positions: np.ndarray  # (n, 3) in units of a
    layer: tuple  # "crystal" | "marker" per molecule
    boundary: str = "open"  # periodic | open | harmonic
    length: float | None = None  # period L for periodic chains
    frozen: np.ndarray | None = None  # (n, 3) bool, True = coordinate held fixed
    target: int | None = None  # crystal molecule under the marker

    def __post_init__(self):
        self.positions = np.array(self.positions, dtype=float).reshape(-1, 3)
        self.layer = tuple(self.layer)
        if len(self.layer) != len(self.positions):
            raise ValueError("layer tags and positions differ in length")
        if self.frozen is None:
            self.frozen = np.zeros(self.positions.shape, dtype=bool)
        self.frozen = np.array(self.frozen, dtype=bool).reshape(self.positions.shape)
        if self.n_markers > 1:
            raise ValueError("at most one marker molecule is supported")
        if self.boundary == "periodic":
            if not self.length or self.length <= 0:
                raise ValueError("periodic geometry needs a positive length")
            self.positions[:, 0] = np.mod(self.positions[:, 0], self.length)

    @property
    def n(self):
        return len(self.positions)

    @property
    def n_markers(self):
        return sum(t == "marker" for t in self.layer)

    @property
    def marker(self):
        for i, t in enumerate(self.layer):
            if t == "marker":
                return i
        return None

    @property
    def crystal_indices(self):
        return [i for i, t in enumerate(self.layer) if t == "crystal"]

    def copy(self, positions=None):
        return replace(
            self,
            positions=self.positions.copy() if positions is None else positions,
            frozen=self.frozen.copy(),
        )

    def chain_neighbors(self):
        """Adjacent crystal pairs along the chain (wrapping for periodic)."""
        idx = sorted(self.crystal_indices, key=lambda i: self.positions[i, 0])
        pairs = list(zip(idx[:-1], idx[1:]))
        if self.boundary == "periodic" and len(idx) > 2:
            pairs.append((idx[-1], idx[0]))
        return pairs


@dataclass
class Trap:
    """Harmonic confinement ``0.5 * spring * (r - center)^2`` per coordinate."""

    spring: np.ndarray  # (n, 3) in D/a^5
    center: np.ndarray  # (n, 3)

    def energy(self, x):
        return 0.5 * np.sum(self.spring * (x - self.center) ** 2)

    def grad(self, x):
        return self.spring * (x - self.center)


def lattice_with_marker(n, b_over_a, marker_site=None, boundary="periodic", spacing=1.0):
    """Perfect chain of ``n`` molecules plus (optionally) a marker above one site.

    Pass ``marker_site=None`` for the bare chain. The marker sits at height
    ``b_over_a`` directly above ``marker_site``; its z coordinate is frozen.
    Open chains have the x coordinate of both end molecules clamped.
    """
    if n < 2 or (n < 3 and boundary != "harmonic"):
        raise ValueError("chain scenarios need n >= 3")
    if boundary not in ("periodic", "open", "harmonic"):
        raise ValueError(f"unknown boundary {boundary!r}")
    if marker_site is not None and not 0 <= marker_site < n:
        raise IndexError(f"marker_site {marker_site} out of range for n = {n}")
    x = spacing * np.arange(n, dtype=float)
    if boundary == "harmonic":
        x -= x.mean()
    pos = np.zeros((n, 3))
    pos[:, 0] = x
    layer = ["crystal"] * n
    frozen = np.zeros((n, 3), dtype=bool)
    if boundary == "open":
        frozen[0, 0] = frozen[-1, 0] = True
    if marker_site is not None:
        pos = np.vstack([pos, [x[marker_site], 0.0, b_over_a]])
        layer.append("marker")
        frozen = np.vstack([frozen, [False, False, True]])
    return Geometry(
        pos,
        layer,
        boundary=boundary,
        length=n * spacing if boundary == "periodic" else None,
        frozen=frozen,
        target=marker_site,
    )


def two_molecule_geometry(spacing_guess=1.0):
    pos = np.array([[-0.5, 0.0, 0.0], [0.5, 0.0, 0.0]]) * spacing_guess
    return Geometry(pos, ("crystal", "crystal"), boundary="harmonic")


def default_trap(geometry, params):
    """Trap from ModelParams: transverse omega_perp for every molecule,
    longitudinal omega_long (if any) for crystal molecules only.

    The marker is trapped transversely in y; its x is free and its z frozen.
    """
    m = params.mass
    n = geometry.n
    spring = np.zeros((n, 3))
    center = np.zeros((n, 3))
    k_perp = m * params.omega_perp**2
    spring[:, 1] = k_perp
    spring[:, 2] = k_perp
    if params.omega_long is not None:
        spring[geometry.crystal_indices, 0] = m * params.omega_long**2
    mk = geometry.marker
    if mk is not None:
        spring[mk, 0] = 0.0
        spring[mk, 2] = 0.0
        center[mk, 2] = geometry.positions[mk, 2]
    return Trap(spring, center)


def harmonic_trap(n, mass, omega_long, omega_perp):
    spring = np.tile([mass * omega_long**2, mass * omega_perp**2, mass * omega_perp**2], (n, 1))
    return Trap(spring, np.zeros((n, 3)))


def _separations(x, geometry, images):
    """Pair separations r_i - r_j, shape (n, n, S, 3), with the i == j mask."""
    d = x[:, None, :] - x[None, :, :]
    n = len(x)
    if geometry.boundary == "periodic":
        L = geometry.length
        d[..., 0] -= L * np.round(d[..., 0] / L)
        shifts = L * np.arange(-images, images + 1)
    else:
        shifts = np.zeros(1)
    d = np.repeat(d[:, :, None, :], len(shifts), axis=2)
    d[..., 0] += shifts
    mask = ~np.eye(n, dtype=bool)
    # keep diagonal finite; those entries are masked out
    d[np.arange(n), np.arange(n), :, 0] = 1.0
    return d, mask


def pair_energy(x, geometry, images=DEFAULT_IMAGES):
    """Total dipolar energy 0.5 * sum_{i != j} v_dd(r_i - r_j) (plus images)."""
    d, mask = _separations(np.asarray(x, float), geometry, images)
    v = vdd(d).sum(axis=2)
    return 0.5 * np.sum(v[mask])


def pair_energy_unordered(x, geometry, images=DEFAULT_IMAGES):
    """Same energy summed over unordered pairs i < j."""
    d, _ = _separations(np.asarray(x, float), geometry, images)
    v = vdd(d).sum(axis=2)
    iu = np.triu_indices(len(x), 1)
    return np.sum(v[iu])


def pair_grad(x, geometry, images=DEFAULT_IMAGES):
    d, mask = _separations(np.asarray(x, float), geometry, images)
    g = vdd_grad(d).sum(axis=2) * mask[..., None]
    return g.sum(axis=1)


def pair_coupling_tensors(x, geometry, images=DEFAULT_IMAGES):
    """Image-summed v_dd, gradient and Hessian per ordered pair.

    Returns (v, g, h) with shapes (n, n), (n, n, 3), (n, n, 3, 3); the
    diagonal is zero.
    """
    d, mask = _separations(np.asarray(x, float), geometry, images)
    v = vdd(d).sum(axis=2) * mask
    g = vdd_grad(d).sum(axis=2) * mask[..., None]
    h = vdd_hess(d).sum(axis=2) * mask[..., None, None]
    return v, g, h


def pair_hessian(x, geometry, images=DEFAULT_IMAGES):
    """Full (3n, 3n) Hessian of the dipolar energy."""
    n = len(x)
    _, _, h = pair_coupling_tensors(x, geometry, images)
    full = -h.transpose(0, 2, 1, 3).reshape(3 * n, 3 * n)
    diag = h.sum(axis=1)
    for i in range(n):
        full[3 * i : 3 * i + 3, 3 * i : 3 * i + 3] = diag[i]
    return full


def total_energy(x, geometry, trap, images=DEFAULT_IMAGES):
    return pair_energy(x, geometry, images) + trap.energy(x)


def total_hessian(x, geometry, trap, images=DEFAULT_IMAGES):
    return pair_hessian(x, geometry, images) + np.diag(trap.spring.ravel())


def min_pair_distance(x, geometry):
    d, mask = _separations(np.asarray(x, float), geometry, 0)
    r = np.linalg.norm(d[:, :, 0, :], axis=-1)
    return r[mask].min()


@dataclass
class EquilibriumResult:
    geometry: Geometry
    energy: float
    gradient_norm: float
    iterations: int
    trap: Trap = field(repr=False)
    images: int = DEFAULT_IMAGES

    @property
    def positions(self):
        return self.geometry.positions

    def hessian(self):
        return total_hessian(self.positions, self.geometry, self.trap, self.images)

    def free_mask(self):
        return ~self.geometry.frozen.ravel()


def minimize_equilibrium(initial, trap, tol=1e-10, max_iter=100_000, images=DEFAULT_IMAGES,
                         check_stability=True):
    """Relax ``initial`` to the nearest local minimum of dipolar + trap energy.

    Uses a damped Newton iteration with the analytic gradient and Hessian
    on the free coordinates. Raises ConvergenceError when the
    gradient infinity-norm does not reach ``tol``, CollapseError when two
    molecules come closer than 0.1 a, and UnstableEquilibriumError when the
    Hessian has a negative direction below -1e-8.
    """
    geo = initial.copy()
    if min_pair_distance(geo.positions, geo) < COLLAPSE_DISTANCE:
        raise CollapseError("initial configuration has coincident molecules")
    free = ~geo.frozen.ravel()
    base = geo.positions.ravel().copy()

    def unpack(q):
        full = base.copy()
        full[free] = q
        return full.reshape(-1, 3)

    def fun(q):
        return total_energy(unpack(q), geo, trap, images)

    def jac(q):
        x = unpack(q)
        return (pair_grad(x, geo, images) + trap.grad(x)).ravel()[free]

    def hess(q):
        return total_hessian(unpack(q), geo, trap, images)[np.ix_(free, free)]

    def guard(q):
        x = unpack(q)
        if min_pair_distance(x, geo) < COLLAPSE_DISTANCE:
            raise CollapseError(
                f"pair distance fell below {COLLAPSE_DISTANCE} a during minimization"
            )

    q, nit = _newton(fun, jac, hess, base[free], tol, max_iter, guard)
    x = unpack(q)
    gnorm = float(np.max(np.abs(jac(q)))) if q.size else 0.0
    if not np.isfinite(gnorm) or gnorm > tol:
        raise ConvergenceError(
            f"minimizer stopped with |grad|_inf = {gnorm:.3e} > {tol:.1e} after {nit} iterations"
        )
    guard(q)
    out = geo.copy(positions=x)
    if out.boundary == "periodic":
        out.positions[:, 0] = np.mod(out.positions[:, 0], out.length)
    result = EquilibriumResult(out, float(fun(q)), gnorm, int(nit), trap, images)
    if check_stability:
        check_equilibrium_stability(result)
    return result


def _newton(fun, jac, hess, q, gtol, max_iter, guard, max_step=0.05):
    """Damped Newton with an eigen-regularised Hessian.

    Null directions (e.g. the translation mode of an untrapped periodic chain)
    are projected out; negative curvature is replaced by its magnitude.
    Steps are capped at ``max_step`` (units of a) per coordinate.
    """
    if q.size == 0:
        return q, 0
    e = fun(q)
    g = jac(q)
    stalled = 0
    best = np.inf
    for it in range(max_iter):
        gmax = np.max(np.abs(g))
        # the pair sums have a round-off floor near 1e-12; accept gtol once
        # further Newton steps stop helping
        if gmax <= 0.1 * gtol or (gmax <= gtol and stalled >= 2):
            return q, it
        w, v = np.linalg.eigh(hess(q))
        scale = max(np.max(np.abs(w)), 1.0)
        keep = np.abs(w) > 1e-11 * scale
        gv = v.T @ g
        step = -(v[:, keep] @ (gv[keep] / np.abs(w[keep])))
        if not np.any(keep) or np.max(np.abs(step)) == 0.0:
            step = -g / scale
        big = np.max(np.abs(step))
        if big > max_step:
            step *= max_step / big
        gn = np.linalg.norm(g)
        alpha = 1.0
        while True:
            trial = q + alpha * step
            e_t = fun(trial)
            g_t = jac(trial)
            # near convergence the energy is flat to round-off; fall back on |g|
            if e_t < e - 1e-4 * alpha * abs(g @ step) or (
                e_t <= e + 1e-13 * max(abs(e), 1.0) and np.linalg.norm(g_t) < gn
            ):
                break
            alpha *= 0.5
            if alpha < 1e-10:
                raise ConvergenceError(
                    f"line search failed at |grad|_inf = {np.max(np.abs(g)):.3e} after {it} iterations"
                )
        best = min(best, gmax)
        stalled = stalled + 1 if np.max(np.abs(g_t)) > 0.5 * best else 0
        q, e, g = trial, e_t, g_t
        guard(q)
        if stalled >= 50:
            # a truncated image sum is periodic only up to its tail, so short
            # rings can sit on a gradient floor above gtol
            raise ConvergenceError(
                f"stalled at |grad|_inf = {np.max(np.abs(g)):.3e} after {it + 1} iterations; "
                "raise the image count or loosen tol"
            )
    raise ConvergenceError(
        f"no convergence after {max_iter} iterations, |grad|_inf = {np.max(np.abs(g)):.3e}"
    )


def check_equilibrium_stability(eq, tol=1e-8):
    free = eq.free_mask()
    h = eq.hessian()[np.ix_(free, free)]
    w, v = np.linalg.eigh(h)
    if w[0] < -tol:
        k = np.argmax(np.abs(v[:, 0]))
        coord = np.flatnonzero(free)[k]
        axis = "xyz"[coord % 3]
        raise UnstableEquilibriumError(
            f"negative curvature {w[0]:.3e} dominated by molecule {coord // 3} axis {axis}"
        )
    return w[0]


def write_geometry_csv(geometry, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "layer", "x", "y", "z"])
        for i, (t, p) in enumerate(zip(geometry.layer, geometry.positions)):
            w.writerow([i, t, *(fnum(c) for c in p)])


def read_geometry_csv(path, boundary="open", length=None):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    pos = [[float(r["x"]), float(r["y"]), float(r["z"])] for r in rows]
    return Geometry(pos, [r["layer"] for r in rows], boundary=boundary, length=length)
