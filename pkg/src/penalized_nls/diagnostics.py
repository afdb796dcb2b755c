"""Checks of the asymptotic laws on computed states."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .domain import Field
from .errors import ZeroMass
from .limit_ground_state import concentration_energy
from .penalized import local_energy


def smooth_step(t):
    """C^∞ transition: 1 for t ≤ 0, 0 for t ≥ 1."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1 - t, 1.0)), 0.0)
        b = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
    return a / (a + b)


def radial_cutoff(mesh, center, plateau, support):
    r = np.linalg.norm(mesh.points - np.asarray(center), axis=1)
    vals = smooth_step((r - plateau) / (support - plateau))
    vals[mesh.boundary] = 0.0
    return Field(mesh, vals)


def cutoff_radii(region, mesh, plateau_factor=1.5, ramp_factor=0.5):
    """Plateau and support radii about x0, shrunk if needed to stay inside the box."""
    Rc = region.shape.circumradius(region.x0)
    room = mesh.distance_to_box(region.x0)
    plateau = min(plateau_factor * Rc, Rc + 0.5 * (room - Rc))
    support = min(plateau + ramp_factor * Rc, Rc + 0.95 * (room - Rc))
    return plateau, support


def barycenter_cutoff(region, mesh):
    plateau, support = cutoff_radii(region, mesh)
    return radial_cutoff(mesh, region.x0, plateau, support)


def barycenter(u, psi):
    """∫x|ψu|² / ∫|ψu|²."""
    mesh = u.mesh
    dens = mesh.weights * (psi.values * u.values) ** 2
    m = float(np.sum(dens))
    if not m > 0:
        raise ZeroMass("ψu vanishes identically")
    if mesh.radial:
        return np.asarray(mesh.center, dtype=float)
    return dens @ mesh.points / m


def barycenter_gradient(u, psi):
    """(β, dual vectors ∂β_j/∂u_i) for the pin term."""
    mesh = u.mesh
    a = mesh.weights * psi.values**2
    m = float(np.dot(a, u.values**2))
    if not m > 0:
        raise ZeroMass("ψu vanishes identically")
    if mesh.radial:
        c = np.asarray(mesh.center, dtype=float)
        return c, np.zeros((mesh.N, mesh.n_nodes))
    beta = (a * u.values**2) @ mesh.points / m
    grads = (2 * a * u.values / m)[None, :] * (mesh.points - beta).T
    return beta, grads


# ------------------------------------------------------------------- peaks


def peak(u):
    """First maximising node (lexicographic) refined by per-axis quadratic fits."""
    mesh = u.mesh
    k = int(np.argmax(u.values))
    value = float(u.values[k])
    if mesh.radial:
        i = k
        r = mesh.radii[i]
        if 0 < i < mesh.M - 1:
            r += _parabola_offset(u.values[i - 1], u.values[i], u.values[i + 1]) * mesh.h
        pt = np.asarray(mesh.center, dtype=float).copy()
        pt[0] += r
        return pt, value
    idx = np.unravel_index(k, mesh.shape)
    grid = u.grid()
    pt = mesh.points[k].copy()
    for a in range(mesh.N):
        i = idx[a]
        if 0 < i < mesh.M - 1:
            lo = list(idx)
            hi = list(idx)
            lo[a] -= 1
            hi[a] += 1
            pt[a] += _parabola_offset(grid[tuple(lo)], grid[tuple(idx)], grid[tuple(hi)]) * mesh.h
    return pt, value


def _parabola_offset(fm, f0, fp):
    den = fm - 2 * f0 + fp
    if den >= 0:
        return 0.0
    return float(np.clip(0.5 * (fm - fp) / den, -0.5, 0.5))


def distance_to_complement(region, point):
    return float(region.shape.signed_distance(np.atleast_1d(point))[0])


# --------------------------------------------------------------- energetics


@dataclass
class EnergyRow:
    eps: float
    energy: float
    rescaled: float
    predicted: float
    rel_error: float


@dataclass
class EnergyAsymptotics:
    rows: list
    monotone: bool | None

    @property
    def last_error(self):
        return self.rows[-1].rel_error


def energy_asymptotics(results, target_value, constants, N=None):
    """ε^{-N}J_ε against C(x̄) = b_{V(x̄)} for a list of SolveResults ordered by decreasing ε.

    target_value is V(x̄).
    """
    if not results:
        raise ValueError("sweep is empty")
    predicted = concentration_energy(target_value, constants)
    rows = []
    for res in results:
        N_ = res.field.mesh.N if N is None else N
        J = res.diagnostics.value
        scaled = J / res.eps**N_
        rows.append(EnergyRow(res.eps, J, scaled, predicted, abs(scaled - predicted) / predicted))
    if len(rows) < 2:
        monotone = None
    else:
        errs = [r.rel_error for r in rows]
        monotone = all(b < a for a, b in zip(errs, errs[1:]))
    return EnergyAsymptotics(rows, monotone)


# -------------------------------------------------------------- certificate


def original_problem_certificate(problem, u):
    """Whether u^{p-1} ≤ μ(ε²H + V) at every node outside Λ, and the worst margin."""
    vals = u.values if isinstance(u, Field) else np.asarray(u)
    out = ~problem.inside
    if not np.any(out):
        return True, math.inf
    up = np.maximum(vals[out], 0.0)
    margin = float(np.min(problem.coef[out] - up ** (problem.p - 1)))
    return margin >= 0, margin


# ---------------------------------------------------------------- envelopes


@dataclass
class EnvelopeSpec:
    mode: str
    C: float
    lam: float
    anchor: np.ndarray
    nu: float = 0.0
    lam_two_point: float = float("nan")
    N: int = 1
    anchor_point: np.ndarray = None
    anchor_value: float = float("nan")
    anchor_distance: float = float("nan")

    def __post_init__(self):
        if self.mode not in ("fast", "slow"):
            raise ValueError(f"unknown envelope mode {self.mode!r}")

    def log_shape(self, points, eps):
        """log of envelope / C."""
        d = np.linalg.norm(points - self.anchor, axis=1)
        r2 = np.sum(points**2, axis=1)
        s = -(self.lam / eps) * d / (1 + d)
        if self.mode == "fast":
            return s - (self.N - 2) / 2 * np.log1p(r2)
        return s - (self.nu / eps) * np.log1p(r2)

    def __call__(self, points, eps):
        return self.C * np.exp(self.log_shape(points, eps))


def _far_points(u, anchor, rho):
    mesh = u.mesh
    pts = mesh.points
    if mesh.radial:
        d = np.abs(mesh.radii - np.linalg.norm(np.asarray(anchor) - np.asarray(mesh.center)))
    else:
        d = np.linalg.norm(pts - anchor, axis=1)
    return pts, d


def fit_envelope(u, eps, anchor, rho, mode="fast", floor=1e-300):
    """Anchor C at radius ρ from the peak, λ (and ν in slow mode) from a log fit.

    λ comes from the two points at radius ρ and at the outer edge of the region where u
    still exceeds floor; slow mode gets ν from a third, intermediate point.
    """
    mesh = u.mesh
    anchor = np.asarray(anchor, dtype=float)
    pts, d = _far_points(u, anchor, rho)
    vals = np.maximum(u.values, 0.0)
    shell = np.abs(d - rho) <= 0.51 * mesh.h * (math.sqrt(mesh.N) if not mesh.radial else 1.0)
    if not np.any(shell):
        shell = np.abs(d - rho) == np.min(np.abs(d - rho))
    spec = EnvelopeSpec(mode=mode, C=1.0, lam=0.0, anchor=anchor, N=mesh.N)
    usable = (d > rho) & (vals > floor) & ~mesh.boundary
    # log-ratio relative to the anchor shell
    k_anchor = np.flatnonzero(shell)[np.argmax(vals[shell])]
    la = math.log(max(vals[k_anchor], floor))
    s = d / (1 + d)
    r2 = np.sum(pts**2, axis=1)
    if np.any(usable):
        far = np.flatnonzero(usable)
        k_out = far[np.argmax(d[far])]
        # stay away from the Dirichlet layer: use the point at 80% of the usable depth
        target = rho + 0.8 * (d[k_out] - rho)
        k_out = far[np.argmin(np.abs(d[far] - target))]
        lo = math.log(vals[k_out])
        ds = s[k_out] - s[k_anchor]
        if mode == "fast":
            poly = -(mesh.N - 2) / 2 * (math.log1p(r2[k_out]) - math.log1p(r2[k_anchor]))
            lam = eps * (la - lo + poly) / ds if ds > 0 else 0.0
            nu = 0.0
        else:
            k_mid = far[np.argmin(np.abs(d[far] - (rho + 0.5 * (d[k_out] - rho))))]
            A = np.array(
                [
                    [(s[k] - s[k_anchor]) / eps, (math.log1p(r2[k]) - math.log1p(r2[k_anchor])) / eps]
                    for k in (k_mid, k_out)
                ]
            )
            b = np.array([la - math.log(vals[k_mid]), la - lo])
            try:
                lam, nu = np.linalg.solve(A, b)
            except np.linalg.LinAlgError:
                lam, nu = 0.0, 0.0
            if nu <= 0:
                nu = 1e-6
                lam = eps * (b[1] - A[1, 1] * nu) / ds if ds > 0 else 0.0
        spec.lam = max(float(lam), 0.0)
        spec.nu = float(nu)
    spec.lam_two_point = spec.lam
    spec.anchor_point = pts[k_anchor].copy()
    spec.anchor_value = float(max(vals[k_anchor], floor))
    spec.anchor_distance = float(d[k_anchor])
    spec.C = float(spec.anchor_value / math.exp(spec.log_shape(pts[k_anchor : k_anchor + 1], eps)[0]))
    return spec


def decay_envelope_check(u, envelope, eps, rho):
    """Whether u ≤ envelope at every node farther than ρ from the anchor; worst u/envelope there."""
    pts, d = _far_points(u, envelope.anchor, rho)
    sel = d > rho
    if not np.any(sel):
        return True, 0.0
    vals = np.maximum(u.values[sel], 0.0)
    with np.errstate(under="ignore"):
        logE = math.log(envelope.C) + envelope.log_shape(pts[sel], eps)
    pos = vals > 0
    if not np.any(pos):
        return True, 0.0
    worst = float(np.max(np.log(vals[pos]) - logE[pos]))
    ratio = math.exp(min(worst, 700.0))
    return ratio <= 1.0 + 1e-12, ratio


def admissible_envelope(u, eps, anchor, rho, mode="fast"):
    """Two-point fit; if it fails to dominate, λ is lowered to the largest dominating value.

    C stays anchored at the ρ-shell, so every admissible λ keeps envelope = u there.
    """
    env = fit_envelope(u, eps, anchor, rho, mode=mode)
    ok, _ = decay_envelope_check(u, env, eps, rho)
    if ok:
        return env
    pts, d = _far_points(u, env.anchor, rho)
    sel = (d > rho) & (u.values > 0)
    flat = EnvelopeSpec(mode=mode, C=1.0, lam=0.0, anchor=env.anchor, nu=env.nu, N=env.N)
    rest = flat.log_shape(pts[sel], eps)
    rest_a = flat.log_shape(env.anchor_point[None, :], eps)[0]
    s = d[sel] / (1 + d[sel])
    s_a = env.anchor_distance / (1 + env.anchor_distance)
    slack = math.log(env.anchor_value) - rest_a + rest - np.log(u.values[sel])
    ds = s - s_a
    with np.errstate(divide="ignore", invalid="ignore"):
        bound = np.where(ds > 0, eps * slack / ds, np.where(slack >= 0, np.inf, -np.inf))
    lam = float(np.min(bound)) if bound.size else 0.0
    env.lam = max(lam, 0.0) * (1 - 1e-9) if np.isfinite(lam) else env.lam
    env.C = float(env.anchor_value / math.exp(env.log_shape(env.anchor_point[None, :], eps)[0]))
    return env


# -------------------------------------------------------------------- tails


def tail_energy_fraction(problem, u, neighborhood_mask):
    """∫_{box∖U}(ε²|∇u|² + Vu²) / ∫_box(same)."""
    vals = u.values if isinstance(u, Field) else np.asarray(u)
    total = local_energy(problem, vals, np.ones_like(neighborhood_mask, dtype=bool))
    if total <= 0:
        return 0.0
    return local_energy(problem, vals, ~neighborhood_mask) / total


def dilated_mask(region, mesh, width):
    """Nodes within distance width of Λ."""
    return region.shape.signed_distance(mesh.points) > -width


def loglog_slope(eps, values, floor=1e-300):
    x = np.log(np.asarray(eps, dtype=float))
    y = np.log(np.maximum(np.asarray(values, dtype=float), floor))
    return float(np.polyfit(x, y, 1)[0])


def rescaled_profile_error(u, center, eps, profile, z_max=5.0):
    """Relative L² distance between u(x_ε + εz) and U_{V(x̄)}(|z|) on |z| ≤ z_max."""
    mesh = u.mesh
    d = np.linalg.norm(mesh.points - np.asarray(center), axis=1)
    sel = d <= z_max * eps
    ref = profile(d[sel] / eps)
    w = mesh.weights[sel]
    den = float(np.dot(w, ref**2))
    return math.sqrt(float(np.dot(w, (u.values[sel] - ref) ** 2)) / den) if den > 0 else math.inf


@dataclass
class SweepRecord:
    eps: float
    energy: float
    rescaled_energy: float
    predicted: float
    peak: np.ndarray
    peak_value: float
    barycenter: np.ndarray
    certificate_holds: bool
    certificate_margin: float
    envelope_dominated: bool
    envelope_worst_ratio: float
    envelope_lambda: float
    nehari_residual: float
    gradient_norm: float = float("nan")
    converged: bool = True
    iterations: int = 0
    tail_fraction: float = float("nan")
    sup_ratio: float = float("nan")
    dist_to_boundary: float = float("nan")
    profile_error: float = float("nan")
    a_level: float = float("nan")
    c_upper: float = float("nan")
    predicted_boundary: float = float("nan")
    predicted_sup: float = float("nan")
    status: str = "ok"


@dataclass
class SweepReport:
    name: str
    N: int
    mode: str
    records: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def sort(self):
        self.records.sort(key=lambda r: -r.eps)

    @property
    def passed(self):
        return all(c["pass"] for c in self.checks.values() if c.get("acceptance", True))
