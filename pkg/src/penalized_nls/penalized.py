"""Penalized nonlinearity g_ε, its primitive, the functional J_ε and the Nehari manifold."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy import optimize
from scipy.sparse.linalg import splu

from .domain import Field, PotentialSpec, RegionSpec, _as_points, penalization_potential
from .errors import BracketFailure, DegenerateDirection, InvalidParameters


def penalized_nonlinearity(s, inside, coef, p):
    """χ s_+^p + (1-χ) min(coef, |s|^{p-1}) s_+ with coef = μ(ε²H + V)."""
    s = np.asarray(s, dtype=float)
    sp_ = np.maximum(s, 0.0)
    power = sp_**p
    trunc = np.minimum(coef, sp_ ** (p - 1)) * sp_
    return np.where(inside, power, trunc)


def penalized_primitive(s, inside, coef, p):
    """Closed-form G_ε(x, s) = ∫_0^s g_ε, split at the threshold a = coef^{1/(p-1)}."""
    s = np.asarray(s, dtype=float)
    coef = np.asarray(coef, dtype=float)
    sp_ = np.maximum(s, 0.0)
    a = coef ** (1 / (p - 1))
    low = sp_ ** (p + 1) / (p + 1)
    high = a ** (p + 1) / (p + 1) + 0.5 * coef * (sp_**2 - a**2)
    outside = np.where(sp_ <= a, low, high)
    return np.where(inside, low, outside)


@dataclass(eq=False)
class PenalizedProblem:
    V: PotentialSpec
    region: RegionSpec
    eps: float
    p: float
    mesh: object
    mode: str = None

    def __post_init__(self):
        if not self.eps > 0:
            raise InvalidParameters("eps must be positive")
        N = self.mesh.N
        if not (self.p > 1 and 1 / self.p > (N - 2) / (N + 2)):
            raise InvalidParameters(f"p = {self.p} outside the subcritical range for N = {N}")
        if self.mode is None:
            self.mode = "high_dim" if N >= 3 else "low_dim"
        self.H_fn = penalization_potential(self.region, N, self.mode, self.V)

    @property
    def N(self):
        return self.mesh.N

    @cached_property
    def Vn(self):
        return self.V(self.mesh.points)

    @cached_property
    def Hn(self):
        return self.H_fn(self.mesh.points)

    @cached_property
    def inside(self):
        return self.region.contains(self.mesh.points)

    @cached_property
    def coef(self):
        return self.region.mu * (self.eps**2 * self.Hn + self.Vn)

    @property
    def w(self):
        return self.mesh.weights

    @cached_property
    def _free_idx(self):
        return np.flatnonzero(self.mesh.free)

    @cached_property
    def operator(self):
        """ε²K + diag(wV) on free nodes: the Gram matrix of ‖·‖_ε."""
        idx = self._free_idx
        return (self.eps**2 * self.mesh.stiffness_free + sp.diags(self.w[idx] * self.Vn[idx])).tocsc()

    @cached_property
    def _lu(self):
        return splu(self.operator)

    def riesz(self, dual):
        """Representative z of a dual vector in the ‖·‖_ε inner product."""
        idx = self._free_idx
        z = np.zeros(self.mesh.n_nodes)
        z[idx] = self._lu.solve(dual[idx])
        return z

    # nodal kernels on flat arrays
    def g(self, u):
        return penalized_nonlinearity(u, self.inside, self.coef, self.p)

    def G(self, u):
        return penalized_primitive(u, self.inside, self.coef, self.p)

    def norm_sq(self, u):
        return self.eps**2 * self.mesh.grad_sq(u) + float(np.dot(self.w, self.Vn * u**2))

    def energy(self, u):
        return 0.5 * self.norm_sq(u) - float(np.dot(self.w, self.G(u)))

    def dual_gradient(self, u):
        """Vector of ∂J/∂u_i; zero on Dirichlet nodes."""
        d = self.eps**2 * (self.mesh.stiffness @ u) + self.w * (self.Vn * u - self.g(u))
        d[self.mesh.boundary] = 0.0
        return d

    def pointwise(self, x):
        pts = _as_points(x, self.N)
        inside = self.region.contains(pts)
        coef = self.region.mu * (self.eps**2 * self.H_fn(pts) + self.V(pts))
        return inside, coef


def g_eps(problem, x, s):
    inside, coef = problem.pointwise(x)
    return penalized_nonlinearity(s, inside, coef, problem.p)


def G_eps(problem, x, s):
    inside, coef = problem.pointwise(x)
    return penalized_primitive(s, inside, coef, problem.p)


def _vals(u):
    return u.values if isinstance(u, Field) else np.asarray(u, dtype=float)


def functional(problem, u):
    """J_ε(u) = ½∫(ε²|∇u|² + Vu²) - ∫G_ε(x, u)."""
    return problem.energy(_vals(u))


def eps_norm_sq(problem, u):
    return problem.norm_sq(_vals(u))


def gradient(problem, u):
    """Nodal representation of J'_ε(u): -ε²Δ_h u + Vu - g_ε(x, u).

    Pairing with a field v through the quadrature weights gives the directional derivative.
    """
    u = _vals(u)
    d = problem.dual_gradient(u)
    return Field(problem.mesh, d / problem.w)


def pair(problem, grad, v):
    return float(np.dot(problem.w, _vals(grad) * _vals(v)))


def dual_norm(problem, u):
    """‖J'_ε(u)‖ in the dual of (H¹_V, ‖·‖_ε)."""
    d = problem.dual_gradient(_vals(u))
    return math.sqrt(max(float(np.dot(d, problem.riesz(d))), 0.0))


@dataclass
class NehariDiagnostics:
    value: float
    nehari_residual: float
    gradient_norm: float


def nehari_residual(problem, u):
    u = _vals(u)
    n2 = problem.norm_sq(u)
    return (n2 - float(np.dot(problem.w, problem.g(u) * u))) / n2


def diagnose(problem, u):
    u = _vals(u)
    return NehariDiagnostics(
        value=problem.energy(u),
        nehari_residual=nehari_residual(problem, u),
        gradient_norm=dual_norm(problem, u),
    )


def nehari_scale(problem, u, rtol=1e-12, t_max=1e8):
    """The unique t > 0 with ⟨J'_ε(tu), tu⟩ = 0."""
    u = _vals(u)
    w, inside = problem.w, problem.inside
    n2 = problem.norm_sq(u)
    up = np.maximum(u, 0.0)
    if n2 <= 0 or not np.any(up[inside] > 0) or np.dot(w[inside], up[inside] ** (problem.p + 1)) <= 0:
        raise DegenerateDirection("u_+ vanishes on the region")

    # ψ(t) = ⟨J'(tu), tu⟩ / t²; strictly decreasing, positive near 0
    def psi(t):
        return n2 - float(np.dot(w, problem.g(t * u) * u)) / t

    lo = hi = 1.0
    if psi(1.0) > 0:
        while psi(hi) > 0:
            hi *= 2.0
            if hi > t_max:
                raise BracketFailure(f"no sign change of the Nehari quotient up to t = {t_max:g}")
        lo = hi / 2
    else:
        while psi(lo) <= 0:
            lo /= 2.0
            if lo < 1 / t_max:
                raise BracketFailure("Nehari quotient nonpositive down to tiny t")
        hi = lo * 2
    return optimize.brentq(psi, lo, hi, xtol=1e-300, rtol=rtol, maxiter=500)


def nehari_project(problem, u):
    """(t, t·u) with t·u on the Nehari manifold."""
    t = nehari_scale(problem, u)
    vals = t * _vals(u)
    return t, Field(problem.mesh, vals) if isinstance(u, Field) else vals


def local_energy(problem, u, mask):
    """∫_A (ε²|∇u|² + Vu²) over the nodes in mask."""
    u = _vals(u)
    dens = problem.eps**2 * problem.mesh.grad_density(u) + problem.w * problem.Vn * u**2
    return float(np.sum(dens[mask]))


@dataclass
class LowerBoundReport:
    skipped: bool
    residual: float
    power_on_region: float = float("nan")
    coercive_part: float = float("nan")
    holds_a: bool = False
    local_energy_scaled: float = float("nan")
    holds_b: bool = False
    sup_ratio: float = float("nan")
    holds_c: bool = False
    coercivity: bool = False
    note: str = ""

    @property
    def all_hold(self):
        return (not self.skipped) and self.holds_a and self.holds_b and self.holds_c


def nehari_lower_bounds(problem, u, c_ref=None, residual_tol=1e-6, slack=1e-9):
    """Integral, local-energy and sup lower bounds valid on the Nehari manifold.

    (a) ∫_Λ u_+^{p+1} ≥ (1-μ)‖u‖²_ε
    (b) ε^{-N} ∫_Λ (ε²|∇u|² + Vu²), compared with c_ref when given (else positivity)
    (c) sup_Λ u_+^{p-1} / V ≥ 1
    plus the coercivity bound J_ε(u) ≥ (½ - 1/(p+1))(1-μ)‖u‖²_ε.
    """
    u = _vals(u)
    res = nehari_residual(problem, u)
    if abs(res) > residual_tol:
        return LowerBoundReport(skipped=True, residual=res, note=f"Nehari residual {res:.2e} above {residual_tol:g}")
    p, mu, inside, w = problem.p, problem.region.mu, problem.inside, problem.w
    n2 = problem.norm_sq(u)
    up = np.maximum(u, 0.0)
    power = float(np.dot(w[inside], up[inside] ** (p + 1)))
    coercive = (1 - mu) * n2
    loc = local_energy(problem, u, inside) / problem.eps**problem.N
    ref = 0.0 if c_ref is None else c_ref
    with np.errstate(divide="ignore"):
        ratio = float(np.max(up[inside] ** (p - 1) / problem.Vn[inside]))
    J = problem.energy(u)
    return LowerBoundReport(
        skipped=False,
        residual=res,
        power_on_region=power,
        coercive_part=coercive,
        holds_a=power >= coercive * (1 - slack),
        local_energy_scaled=loc,
        holds_b=loc > ref,
        sup_ratio=ratio,
        holds_c=ratio >= 1 - 1e-6,
        coercivity=J >= (0.5 - 1 / (p + 1)) * coercive * (1 - slack),
    )
