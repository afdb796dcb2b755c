"""Critical points of J_ε: Nehari ground states, pinned and symmetric states, test-path levels.

Descent directions are Riesz representatives of J'_ε in the ‖·‖_ε inner product (the
Sobolev gradient of H¹_V), so one unit step is well scaled independently of ε and h.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics as diag
from .domain import Field
from .errors import DegenerateDirection, InvalidParameters, MaxIterExceeded, PinEscape
from .penalized import NehariDiagnostics, diagnose, nehari_scale

ARMIJO_C = 1e-4
ENERGY_RTOL = 1e-10


@dataclass
class SeedSpec:
    y: np.ndarray
    plateau: float
    support: float

    def __post_init__(self):
        self.y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if not 0 < self.plateau < self.support:
            raise InvalidParameters("seed cutoff needs 0 < plateau < support")


def default_seed(problem, y):
    plateau, support = diag.cutoff_radii(problem.region, problem.mesh, plateau_factor=1.5, ramp_factor=0.5)
    return SeedSpec(y=y, plateau=plateau, support=support)


@dataclass
class SolveResult:
    field: Field
    diagnostics: NehariDiagnostics
    iterations: int
    peak: np.ndarray
    peak_value: float
    converged: bool
    eps: float
    mode: str = "ground"
    barycenter: np.ndarray = None
    history: list = field(default_factory=list, repr=False)
    target: np.ndarray = None

    def to_dict(self):
        return {
            "eps": self.eps,
            "mode": self.mode,
            "energy": self.diagnostics.value,
            "nehari_residual": self.diagnostics.nehari_residual,
            "gradient_norm": self.diagnostics.gradient_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "peak": [float(v) for v in self.peak],
            "peak_value": self.peak_value,
            "barycenter": None if self.barycenter is None else [float(v) for v in self.barycenter],
            "target": None if self.target is None else [float(v) for v in self.target],
        }


# ------------------------------------------------------------------- seeds


def test_function(problem, y, profile, seed=None):
    """(t_{ε,y}, w_{ε,y}) with w = t η(x) U_{V(y)}((y-x)/ε) on the Nehari manifold."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    Vy = problem.V.at(y)
    if not Vy > 0:
        raise InvalidParameters(f"V(y) = {Vy} must be positive")
    seed = seed or default_seed(problem, y)
    U = profile if math.isclose(profile.params.nu, Vy, rel_tol=1e-14) else profile.rescaled(Vy)
    mesh = problem.mesh
    if mesh.radial:
        if not mesh.is_symmetric_about(y):
            raise InvalidParameters("radial meshes only carry test functions centred at the mesh centre")
        d = mesh.radii
    else:
        d = np.linalg.norm(mesh.points - y, axis=1)
    room = mesh.distance_to_box(y)
    if room <= 0 or U(np.array([room / problem.eps]))[0] > 1e-4 * U.u0:
        warnings.warn(f"test profile at ε = {problem.eps} is clipped by the box", stacklevel=2)
    eta = diag.smooth_step((np.linalg.norm(mesh.points - problem.region.x0, axis=1) - seed.plateau) / (seed.support - seed.plateau))
    vals = eta * U(d / problem.eps)
    vals[mesh.boundary] = 0.0
    t = nehari_scale(problem, vals)
    return t, Field(mesh, t * vals)


def seed_field(problem, seed, profile):
    """w_{ε,y} sampled on the mesh and projected on the Nehari manifold."""
    return test_function(problem, seed.y, profile, seed)[1]


def warm_start(previous, problem, eps_previous):
    """Rescale a solution about its peak by ε_prev/ε and project it on the Nehari manifold."""
    mesh = problem.mesh
    u = previous.field if isinstance(previous, SolveResult) else previous
    center, _ = diag.peak(u)
    k = eps_previous / problem.eps
    if mesh.radial:
        r = mesh.radii
        vals = np.interp((r - center[0] + mesh.center[0]) * k, r, u.values, right=0.0)
    else:
        from scipy.interpolate import RegularGridInterpolator

        interp = RegularGridInterpolator(tuple(u.mesh.axes), u.grid(), bounds_error=False, fill_value=0.0)
        vals = interp(center + (mesh.points - center) * k)
    vals[mesh.boundary] = 0.0
    t = nehari_scale(problem, vals)
    return Field(mesh, t * vals)


# ------------------------------------------------------------------ descent


def _symmetrizer(mesh):
    perms = mesh.reflections()

    def sym(v):
        for perm in perms:
            v = 0.5 * (v + v[perm])
        return v

    return sym


class _Pin:
    def __init__(self, problem, target, psi, scale):
        self.target = np.atleast_1d(np.asarray(target, dtype=float))
        self.psi = psi
        self.scale = scale
        self.kappa = 0.0
        self.mesh = problem.mesh

    def energy(self, u):
        if self.kappa == 0:
            return 0.0
        beta = diag.barycenter(Field(self.mesh, u), self.psi)
        return self.kappa * self.scale * float(np.sum((beta - self.target) ** 2))

    def dual(self, u):
        if self.kappa == 0:
            return 0.0
        beta, grads = diag.barycenter_gradient(Field(self.mesh, u), self.psi)
        return 2 * self.kappa * self.scale * ((beta - self.target) @ grads)

    def metric_solver(self, problem, u):
        """Riesz map of ‖·‖²_ε + 2κs|β'(u)·|², the pin's Gauss-Newton term added by Woodbury."""
        _, G = diag.barycenter_gradient(Field(self.mesh, u), self.psi)
        G = G.copy()
        G[:, self.mesh.boundary] = 0.0
        c = 2 * self.kappa * self.scale
        AG = np.stack([problem.riesz(g) for g in G])
        small = np.eye(G.shape[0]) / c + G @ AG.T

        def solve(d):
            z = problem.riesz(d)
            return z - AG.T @ np.linalg.solve(small, G @ z)

        return solve


def _descend(problem, u, tol_grad, max_iter, pin=None, symmetric=False, metric="sobolev", history=None):
    """Projected descent on the Nehari manifold with Armijo backtracking.

    Returns (u, iterations, converged).
    """
    sym = _symmetrizer(problem.mesh) if symmetric else None
    if sym is not None:
        u = sym(u)
    u = nehari_scale(problem, u) * u

    def total(v):
        return problem.energy(v) + (pin.energy(v) if pin is not None else 0.0)

    if metric == "sobolev":
        alpha0 = 1.0

        def direction(d):
            return problem.riesz(d)
    elif metric == "l2":
        h = problem.mesh.h
        alpha0 = 1.0 / (problem.eps**2 * 8 * problem.N / h**2 + float(np.max(problem.Vn)))

        def direction(d):
            return d / problem.w
    else:
        raise InvalidParameters(f"unknown metric {metric!r}")

    J = total(u)
    if history is not None:
        history.append(J)
    alpha = alpha0
    rel_change = math.inf
    for it in range(max_iter + 1):
        d = problem.dual_gradient(u)
        if pin is not None:
            d = d + pin.dual(u)
            d[problem.mesh.boundary] = 0.0
        if sym is not None:
            d = sym(d)
        if metric == "sobolev" and pin is not None and pin.kappa > 0:
            z = pin.metric_solver(problem, u)(d)
        else:
            z = direction(d)
        if sym is not None:
            z = sym(z)
        gn2 = float(np.dot(d, z))
        gn = math.sqrt(max(gn2, 0.0)) if metric == "sobolev" else math.sqrt(max(float(np.dot(d, problem.riesz(d))), 0.0))
        norm = math.sqrt(problem.norm_sq(u))
        if gn < tol_grad * norm and (it == 0 or rel_change < ENERGY_RTOL):
            return u, it, True
        if it == max_iter:
            break
        accepted = False
        while alpha >= 1e-14 * alpha0:
            trial = u - alpha * z
            try:
                trial = nehari_scale(problem, trial) * trial
            except DegenerateDirection:
                alpha *= 0.5
                continue
            Jt = total(trial)
            if Jt <= J - ARMIJO_C * alpha * gn2:
                accepted = True
                break
            alpha *= 0.5
        if not accepted:
            # no representable decrease left
            return u, it, gn < tol_grad * norm
        rel_change = abs(J - Jt) / max(abs(J), 1e-300)
        u, J = trial, Jt
        if history is not None:
            history.append(J)
        alpha = min(2.0 * alpha, alpha0)
    return u, max_iter, False


def _result(problem, u, iterations, converged, mode, history, target=None):
    field_ = Field(problem.mesh, u)
    pk, pv = diag.peak(field_)
    psi = diag.barycenter_cutoff(problem.region, problem.mesh)
    return SolveResult(
        field=field_,
        diagnostics=diagnose(problem, u),
        iterations=iterations,
        peak=pk,
        peak_value=pv,
        converged=converged,
        eps=problem.eps,
        mode=mode,
        barycenter=diag.barycenter(field_, psi),
        history=history,
        target=None if target is None else np.atleast_1d(np.asarray(target, dtype=float)),
    )


def minimize_nehari(problem, seed, tol_grad=1e-8, max_iter=5000, metric="sobolev", symmetric=False, raise_on_fail=False):
    """Minimise J_ε over the Nehari manifold starting from seed."""
    u = (seed.values if isinstance(seed, Field) else np.asarray(seed, dtype=float)).copy()
    history = []
    u, it, ok = _descend(problem, u, tol_grad, max_iter, symmetric=symmetric, metric=metric, history=history)
    res = _result(problem, u, it, ok, "symmetric" if symmetric else "ground", history)
    if not ok and raise_on_fail:
        raise MaxIterExceeded(f"no convergence in {max_iter} iterations at ε = {problem.eps}", res)
    return res


def solve_symmetric(problem, center, profile, tol_grad=1e-8, max_iter=5000, seed=None):
    """Nehari minimiser in the subspace of functions even about center (each axis)."""
    if not problem.mesh.is_symmetric_about(center):
        raise InvalidParameters("symmetric mode needs a mesh centred at the symmetry point")
    if seed is None:
        seed = test_function(problem, center, profile)[1]
    res = minimize_nehari(problem, seed, tol_grad, max_iter, symmetric=True)
    res.target = np.atleast_1d(np.asarray(center, dtype=float))
    return res


DEFAULT_KAPPAS = (10.0, 1.0, 0.1, 0.0)


def solve_pinned(
    problem,
    target,
    profile,
    kappas=DEFAULT_KAPPAS,
    tol_grad=1e-8,
    max_iter=5000,
    seed=None,
    drift_radius=None,
):
    """Barycenter-pinned descent continued along the κ schedule, ending unpinned.

    The pin energy is κ ε^N b_{V(x*)} |β(u) - x*|² / ρ².
    """
    target = np.atleast_1d(np.asarray(target, dtype=float))
    region = problem.region
    if not region.contains(target)[0]:
        raise InvalidParameters("pin target must lie in Λ")
    Vt = problem.V.at(target)
    if seed is None:
        seed = test_function(problem, target, profile)[1]
    u = (seed.values if isinstance(seed, Field) else np.asarray(seed)).copy()
    U = profile.rescaled(Vt)
    scale = problem.eps**problem.N * U.energy / region.rho**2
    psi = diag.barycenter_cutoff(region, problem.mesh)
    pin = _Pin(problem, target, psi, scale)
    history = []
    total_it = 0
    ok = False
    schedule = list(kappas)
    if not schedule or schedule[-1] != 0:
        schedule.append(0.0)
    for kappa in schedule:
        pin.kappa = kappa
        u, it, ok = _descend(problem, u, tol_grad, max_iter, pin=pin, history=history)
        total_it += it
    res = _result(problem, u, total_it, ok, "pinned", history, target)
    radius = region.rho / 2 if drift_radius is None else drift_radius
    drift = float(np.linalg.norm(res.barycenter - target))
    if drift > radius:
        raise PinEscape(f"barycenter drifted {drift:.3g} > {radius:.3g} from the pin target", res)
    return res


# --------------------------------------------------------------- test path


def inset_width(eps, rho):
    """δ(ε) = √(ερ): δ → 0 while δ/ε → ∞."""
    return math.sqrt(eps * rho)


def inset_samples(problem, n_boundary=None, n_interior=9):
    """Points of ∂Λ_ε and a subsample of Λ_ε (always including argmax V over Λ_ε nodes)."""
    region, mesh = problem.region, problem.mesh
    delta = inset_width(problem.eps, region.rho)
    nb = n_boundary or {1: 2, 2: 32, 3: 64}[problem.N]
    boundary = region.shape.inset_boundary(delta, nb)
    pts = mesh.points
    deep = region.shape.signed_distance(pts) > delta
    cand = pts[deep & ~mesh.boundary]
    if cand.shape[0] == 0:
        return delta, boundary, cand
    Vc = problem.V(cand)
    best = cand[int(np.argmax(Vc))]
    step = max(1, cand.shape[0] // n_interior)
    interior = np.concatenate([best[None, :], cand[::step]])
    return delta, boundary, interior


@dataclass
class TestPathLevels:
    a_eps: float
    c_upper: float
    boundary_levels: np.ndarray
    interior_levels: np.ndarray
    delta: float


def test_path_levels(problem, profile, boundary_points, interior_points):
    """a_ε = max of J_ε(w_{ε,y}) over ∂Λ_ε samples; c_ε upper bound = max over all samples."""
    from .penalized import functional

    def level(y):
        return functional(problem, test_function(problem, y, profile)[1])

    b = np.array([level(y) for y in boundary_points])
    i = np.array([level(y) for y in interior_points])
    a = float(np.max(b)) if b.size else float("nan")
    c = float(np.max(np.concatenate([b, i]))) if (b.size + i.size) else float("nan")
    return TestPathLevels(a, c, b, i, inset_width(problem.eps, problem.region.rho))


test_function.__test__ = False
test_path_levels.__test__ = False
TestPathLevels.__test__ = False
