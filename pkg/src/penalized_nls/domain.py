"""Potentials, the region Λ, grids and the penalization potential H."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy import optimize
from scipy.spatial import cKDTree

from .errors import InvalidParameters, ModeDimensionMismatch
from .limit_ground_state import energy_exponent

DECAY_CLASSES = ("fast", "quadratic_slow", "nondecaying")


def _as_points(x, N):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0 or (x.ndim == 1 and N > 1):
        x = x.reshape(1, -1)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[-1] != N:
        raise InvalidParameters(f"expected points of dimension {N}, got shape {x.shape}")
    return x


# ---------------------------------------------------------------- potentials


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    N: int
    evaluator: Callable[[np.ndarray], np.ndarray]
    decay_class: str
    description: str = ""
    asymptotic_class: str | None = None

    def __post_init__(self):
        if self.decay_class not in DECAY_CLASSES:
            raise InvalidParameters(f"unknown decay class {self.decay_class!r}")

    def __call__(self, points):
        pts = _as_points(points, self.N)
        return np.asarray(self.evaluator(pts), dtype=float).reshape(pts.shape[0])

    def at(self, point):
        return float(self(np.atleast_1d(point))[0])


def inverse_poly4(N):
    def V(x):
        r2 = np.sum(x**2, axis=-1)
        return 1.0 / (1.0 + r2**2)

    return V, "1/(1+|x|^4)", "fast"


def gaussian_bump(N, amplitude=0.5, width=0.5, background=0.5, center=None):
    c = np.zeros(N) if center is None else np.asarray(center, dtype=float)

    def V(x):
        r2 = np.sum(x**2, axis=-1)
        d2 = np.sum((x - c) ** 2, axis=-1)
        return background / (1.0 + r2) + amplitude * np.exp(-d2 / (2 * width**2))

    desc = f"{background}/(1+|x|^2) + {amplitude} exp(-|x-c|^2/(2*{width}^2))"
    return V, desc, "quadratic_slow" if background > 0 else "fast"


def ring_max(N, amplitude=0.5, radius=1.0, width=0.3, background=0.5):
    def V(x):
        r = np.sqrt(np.sum(x**2, axis=-1))
        return background / (1.0 + r**2) + amplitude * np.exp(-((r - radius) ** 2) / (2 * width**2))

    desc = f"{background}/(1+|x|^2) + {amplitude} exp(-(|x|-{radius})^2/(2*{width}^2))"
    return V, desc, "quadratic_slow" if background > 0 else "fast"


BUILTIN_POTENTIALS = {
    "inverse_poly4": inverse_poly4,
    "gaussian_bump": gaussian_bump,
    "ring_max": ring_max,
}


def expression_potential(N, expression):
    """Compile an expression in x, y, z (coordinates) and r = |x| with sympy."""
    import sympy

    names = ["x", "y", "z"][:N]
    syms = sympy.symbols(names + ["r"], real=True)
    expr = sympy.sympify(expression, locals={s.name: s for s in syms})
    unknown = {s.name for s in expr.free_symbols} - {s.name for s in syms}
    if unknown:
        raise InvalidParameters(f"unknown symbols {sorted(unknown)} in potential {expression!r}")
    f = sympy.lambdify(syms, expr, modules="numpy")

    def V(x):
        r = np.sqrt(np.sum(x**2, axis=-1))
        out = f(*[x[:, i] for i in range(N)], r)
        return np.broadcast_to(np.asarray(out, dtype=float), r.shape)

    return V, expression


def make_potential(N, name=None, expression=None, decay_class=None, **params):
    if (name is None) == (expression is None):
        raise InvalidParameters("give exactly one of a built-in name or an expression")
    if name is not None:
        if name not in BUILTIN_POTENTIALS:
            raise InvalidParameters(f"unknown built-in potential {name!r}")
        V, desc, natural = BUILTIN_POTENTIALS[name](N, **params)
    else:
        V, desc = expression_potential(N, expression)
        natural = None
    return PotentialSpec(
        N=N,
        evaluator=V,
        decay_class=decay_class or natural or "fast",
        description=desc,
        asymptotic_class=natural,
    )


# ------------------------------------------------------------------- regions


def _sphere_directions(N, n):
    if N == 1:
        return np.array([[-1.0], [1.0]])
    if N == 2:
        a = 2 * np.pi * np.arange(n) / n
        return np.stack([np.cos(a), np.sin(a)], axis=1)
    # Fibonacci lattice
    k = np.arange(n) + 0.5
    z = 1 - 2 * k / n
    phi = np.pi * (1 + 5**0.5) * k
    s = np.sqrt(1 - z**2)
    return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)


def _boundary_density(N):
    return {1: 2, 2: 1024, 3: 4096}[N]


class Shape:
    """A bounded open set with sampled boundary. Subclasses set N and center."""

    N: int
    center: np.ndarray

    def contains(self, points):
        raise NotImplementedError

    def boundary(self, n=None):
        """Boundary points and outward unit normals."""
        raise NotImplementedError

    @cached_property
    def _tree(self):
        pts, _ = self.boundary(_boundary_density(self.N))
        return cKDTree(pts)

    def signed_distance(self, points):
        """Distance to the boundary, positive inside."""
        pts = _as_points(points, self.N)
        d, _ = self._tree.query(pts)
        return np.where(self.contains(pts), d, -d)

    def circumradius(self, center=None):
        c = self.center if center is None else np.asarray(center, dtype=float)
        pts, _ = self.boundary(_boundary_density(self.N))
        return float(np.max(np.linalg.norm(pts - c, axis=1)))

    def inset_boundary(self, delta, n=None):
        """Points at depth delta inside the boundary (boundary of the inset domain)."""
        pts, normals = self.boundary(n)
        inset = pts - delta * normals
        return inset[self.contains(inset)]


@dataclass(eq=False)
class Ball(Shape):
    center: np.ndarray
    radius: float

    def __post_init__(self):
        self.center = np.atleast_1d(np.asarray(self.center, dtype=float))
        self.N = self.center.size

    def contains(self, points):
        pts = _as_points(points, self.N)
        return np.linalg.norm(pts - self.center, axis=1) < self.radius

    def signed_distance(self, points):
        pts = _as_points(points, self.N)
        return self.radius - np.linalg.norm(pts - self.center, axis=1)

    def boundary(self, n=None):
        d = _sphere_directions(self.N, n or _boundary_density(self.N))
        return self.center + self.radius * d, d

    def describe(self):
        return f"ball(center={self.center.tolist()}, radius={self.radius})"


@dataclass(eq=False)
class Annulus(Shape):
    center: np.ndarray
    inner: float
    outer: float

    def __post_init__(self):
        self.center = np.atleast_1d(np.asarray(self.center, dtype=float))
        self.N = self.center.size
        if not 0 < self.inner < self.outer:
            raise InvalidParameters("annulus needs 0 < inner < outer")

    def contains(self, points):
        pts = _as_points(points, self.N)
        r = np.linalg.norm(pts - self.center, axis=1)
        return (r > self.inner) & (r < self.outer)

    def signed_distance(self, points):
        pts = _as_points(points, self.N)
        r = np.linalg.norm(pts - self.center, axis=1)
        return np.minimum(r - self.inner, self.outer - r)

    def boundary(self, n=None):
        d = _sphere_directions(self.N, n or _boundary_density(self.N))
        pts = np.concatenate([self.center + self.outer * d, self.center + self.inner * d])
        normals = np.concatenate([d, -d])
        return pts, normals

    def describe(self):
        return f"annulus(center={self.center.tolist()}, inner={self.inner}, outer={self.outer})"


@dataclass(eq=False)
class Superlevel(Shape):
    """{V > level}, assumed star-shaped about center and contained in B(center, search_radius)."""

    potential: PotentialSpec
    level: float
    center: np.ndarray
    search_radius: float = 50.0

    def __post_init__(self):
        self.center = np.atleast_1d(np.asarray(self.center, dtype=float))
        self.N = self.center.size
        if not self.potential.at(self.center) > self.level:
            raise InvalidParameters("superlevel set center must satisfy V(center) > level")

    def contains(self, points):
        return self.potential(points) > self.level

    def _radius_along(self, direction):
        def f(t):
            return self.potential.at(self.center + t * direction) - self.level

        if f(self.search_radius) > 0:
            raise InvalidParameters(f"superlevel set is not bounded within radius {self.search_radius}")
        # bracket the first crossing on a coarse ray grid
        ts = np.linspace(0.0, self.search_radius, 2001)
        vals = self.potential(self.center + ts[:, None] * direction) - self.level
        k = int(np.argmax(vals <= 0))
        return optimize.brentq(f, ts[k - 1], ts[k], xtol=1e-14, rtol=4 * np.finfo(float).eps)

    def _normal(self, point):
        h = 1e-6
        g = np.empty(self.N)
        for i in range(self.N):
            e = np.zeros(self.N)
            e[i] = h
            g[i] = (self.potential.at(point + e) - self.potential.at(point - e)) / (2 * h)
        norm = np.linalg.norm(g)
        return -g / norm if norm > 0 else (point - self.center) / np.linalg.norm(point - self.center)

    def boundary(self, n=None):
        n = n or _boundary_density(self.N)
        cache = self.__dict__.setdefault("_boundary_cache", {})
        if n not in cache:
            dirs = _sphere_directions(self.N, n)
            pts = np.array([self.center + self._radius_along(d) * d for d in dirs])
            normals = np.array([self._normal(q) for q in pts])
            cache[n] = (pts, normals)
        return cache[n]

    def describe(self):
        return f"{{V > {self.level}}}"


@dataclass(eq=False)
class RegionSpec:
    shape: Shape
    x0: np.ndarray
    rho: float
    rho0: float | None = None
    beta_pen: float = 1.0
    mu: float = 0.5

    def __post_init__(self):
        self.x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        if self.rho0 is None:
            self.rho0 = self.rho / 2
        if not self.rho > 0:
            raise InvalidParameters("rho must be positive")
        if not 0 < self.rho0 < self.rho:
            raise InvalidParameters("rho0 must lie in (0, rho)")
        if not self.beta_pen > 0:
            raise InvalidParameters("penalization exponent must be positive")
        if not 0 < self.mu < 1:
            raise InvalidParameters("mu must lie in (0, 1)")

    @property
    def N(self):
        return self.shape.N

    def contains(self, points):
        return self.shape.contains(points)

    def ball_inside(self, n=None):
        """Whether the closed ball B(x0, ρ) sits in Λ (sampled on its boundary)."""
        d = _sphere_directions(self.N, n or _boundary_density(self.N))
        return bool(np.all(self.shape.contains(self.x0 + self.rho * d)))


# ---------------------------------------------------------------- meshes


class _MeshBase:
    N: int

    def quad(self, values):
        return float(np.dot(self.weights, values))

    def field(self, values):
        return Field(self, values)

    def sample(self, fn):
        """Field from a function of points; Dirichlet nodes are zeroed."""
        vals = np.asarray(fn(self.points), dtype=float).reshape(self.n_nodes).copy()
        vals[self.boundary] = 0.0
        return Field(self, vals)

    @cached_property
    def free(self):
        return ~self.boundary

    @cached_property
    def stiffness_free(self):
        K = self.stiffness
        idx = np.flatnonzero(self.free)
        return K[idx][:, idx].tocsc()


@dataclass(frozen=True, eq=False)
class Mesh(_MeshBase):
    """Uniform tensor grid on [-L, L]^N + center with homogeneous Dirichlet boundary."""

    N: int
    L: float
    M: int
    center: tuple = None

    def __post_init__(self):
        if self.N not in (1, 2, 3):
            raise InvalidParameters("tensor meshes support N in {1, 2, 3}")
        if self.M < 16:
            raise InvalidParameters("need at least 16 points per axis")
        if not self.L > 0:
            raise InvalidParameters("half-width must be positive")
        c = (0.0,) * self.N if self.center is None else tuple(float(v) for v in np.atleast_1d(self.center))
        object.__setattr__(self, "center", c)

    radial = False

    @property
    def h(self):
        return 2 * self.L / (self.M - 1)

    @property
    def shape(self):
        return (self.M,) * self.N

    @property
    def n_nodes(self):
        return self.M**self.N

    @cached_property
    def axes(self):
        return [np.linspace(c - self.L, c + self.L, self.M) for c in self.center]

    @cached_property
    def points(self):
        grids = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    @cached_property
    def weights(self):
        w1 = np.full(self.M, self.h)
        w1[[0, -1]] *= 0.5
        w = w1
        for _ in range(self.N - 1):
            w = np.multiply.outer(w, w1)
        return w.ravel()

    @cached_property
    def boundary(self):
        idx = np.indices(self.shape).reshape(self.N, -1)
        return np.any((idx == 0) | (idx == self.M - 1), axis=0)

    @cached_property
    def stiffness(self):
        """K with uᵀKu = Σ_edges h^N ((u_j - u_i)/h)²."""
        D = sp.diags([-np.ones(self.M - 1), np.ones(self.M - 1)], [0, 1], shape=(self.M - 1, self.M))
        one = sp.identity(self.M, format="csr")
        K1 = (D.T @ D).tocsr()
        K = sp.csr_matrix((self.n_nodes, self.n_nodes))
        for axis in range(self.N):
            factors = [one] * self.N
            factors[axis] = K1
            term = factors[0]
            for f in factors[1:]:
                term = sp.kron(term, f, format="csr")
            K = K + term
        return (self.h ** (self.N - 2) * K).tocsr()

    def grad_sq(self, values):
        u = np.asarray(values).reshape(self.shape)
        return float(sum(np.sum(np.diff(u, axis=a) ** 2) for a in range(self.N)) * self.h ** (self.N - 2))

    def grad_density(self, values):
        """Per-node share of Σ_edges h^N |Δu/h|² (each edge split between its ends)."""
        u = np.asarray(values).reshape(self.shape)
        out = np.zeros(self.shape)
        for a in range(self.N):
            e = np.diff(u, axis=a) ** 2 * (0.5 * self.h ** (self.N - 2))
            lo = [slice(None)] * self.N
            hi = [slice(None)] * self.N
            lo[a] = slice(0, -1)
            hi[a] = slice(1, None)
            out[tuple(lo)] += e
            out[tuple(hi)] += e
        return out.ravel()

    def distance_to_box(self, point):
        point = np.atleast_1d(point)
        return float(np.min(self.L - np.abs(point - np.asarray(self.center))))

    def margin_ok(self, shape):
        pts, _ = shape.boundary()
        return bool(np.all(np.abs(pts - np.asarray(self.center)) <= 0.75 * self.L))

    def is_symmetric_about(self, point):
        return bool(np.allclose(np.atleast_1d(point), self.center, atol=1e-12))

    def reflections(self):
        """Index permutations for the reflections x_i -> 2c_i - x_i."""
        idx = np.arange(self.n_nodes).reshape(self.shape)
        return [np.flip(idx, axis=a).ravel() for a in range(self.N)]

    def describe(self):
        return {"kind": "tensor", "N": self.N, "L": self.L, "M": self.M, "h": self.h, "center": list(self.center)}


@dataclass(frozen=True, eq=False)
class RadialMesh(_MeshBase):
    """Radial finite-volume grid r_i = i·h on [0, R] about center; u(R) = 0."""

    N: int
    R: float
    M: int
    center: tuple = None

    radial = True

    def __post_init__(self):
        if self.M < 16:
            raise InvalidParameters("need at least 16 radial points")
        c = (0.0,) * self.N if self.center is None else tuple(float(v) for v in np.atleast_1d(self.center))
        object.__setattr__(self, "center", c)

    @property
    def L(self):
        return self.R

    @property
    def h(self):
        return self.R / (self.M - 1)

    @property
    def shape(self):
        return (self.M,)

    @property
    def n_nodes(self):
        return self.M

    @cached_property
    def radii(self):
        return np.linspace(0.0, self.R, self.M)

    @cached_property
    def points(self):
        pts = np.zeros((self.M, self.N))
        pts[:, 0] = self.radii
        return pts + np.asarray(self.center)

    @cached_property
    def weights(self):
        from .limit_ground_state import sphere_area

        r, h = self.radii, self.h
        outer = np.minimum(r + h / 2, self.R)
        inner = np.maximum(r - h / 2, 0.0)
        return sphere_area(self.N) / self.N * (outer**self.N - inner**self.N)

    @cached_property
    def _edge(self):
        from .limit_ground_state import sphere_area

        mid = 0.5 * (self.radii[1:] + self.radii[:-1])
        return sphere_area(self.N) * mid ** (self.N - 1) / self.h

    @cached_property
    def boundary(self):
        b = np.zeros(self.M, dtype=bool)
        b[-1] = True
        return b

    @cached_property
    def stiffness(self):
        D = sp.diags([-np.ones(self.M - 1), np.ones(self.M - 1)], [0, 1], shape=(self.M - 1, self.M))
        return (D.T @ sp.diags(self._edge) @ D).tocsr()

    def grad_sq(self, values):
        return float(np.sum(self._edge * np.diff(values) ** 2))

    def grad_density(self, values):
        e = 0.5 * self._edge * np.diff(values) ** 2
        out = np.zeros(self.M)
        out[:-1] += e
        out[1:] += e
        return out

    def distance_to_box(self, point):
        return float(self.R - np.linalg.norm(np.atleast_1d(point) - np.asarray(self.center)))

    def margin_ok(self, shape):
        pts, _ = shape.boundary()
        return bool(np.all(np.linalg.norm(pts - np.asarray(self.center), axis=1) <= 0.75 * self.R))

    def is_symmetric_about(self, point):
        return bool(np.allclose(np.atleast_1d(point), self.center, atol=1e-12))

    def reflections(self):
        return []

    def describe(self):
        return {"kind": "radial", "N": self.N, "R": self.R, "M": self.M, "h": self.h, "center": list(self.center)}


@dataclass(eq=False)
class Field:
    """Nodal values of a grid function; Dirichlet nodes must vanish."""

    mesh: Mesh | RadialMesh
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(self.mesh.n_nodes)
        if not np.all(np.isfinite(self.values)):
            raise InvalidParameters("field has non-finite values")
        if np.any(self.values[self.mesh.boundary] != 0.0):
            raise InvalidParameters("field does not vanish on the Dirichlet boundary")

    def __mul__(self, t):
        return Field(self.mesh, t * self.values)

    __rmul__ = __mul__

    def grid(self):
        return self.values.reshape(self.mesh.shape)


# -------------------------------------------------------------- penalization


def penalization_potential(region, N, mode, potential=None):
    """H as a function of points: zero on Λ, Hardy-type (high_dim) or power-type (low_dim) outside."""
    if mode == "high_dim":
        if N < 3:
            raise ModeDimensionMismatch("high_dim penalization needs N >= 3")
    elif mode == "low_dim":
        if N > 2:
            raise ModeDimensionMismatch("low_dim penalization needs N <= 2")
        if potential is not None and potential.decay_class != "quadratic_slow":
            raise ModeDimensionMismatch("low_dim penalization needs a quadratic_slow potential")
    else:
        raise ModeDimensionMismatch(f"unknown penalization mode {mode!r}")
    x0, rho, rho0, beta = region.x0, region.rho, region.rho0, region.beta_pen

    def H(points):
        pts = _as_points(points, N)
        d = np.linalg.norm(pts - x0, axis=1)
        out = np.zeros(pts.shape[0])
        outside = ~region.contains(pts)
        do = d[outside]
        with np.errstate(divide="ignore", invalid="ignore"):
            if mode == "high_dim":
                ratio = math.log(rho / rho0) / np.log(do / rho0)
                out[outside] = (N - 2) ** 2 / (4 * do**2) * ratio ** (1 + beta)
            else:
                out[outside] = 1.0 / do ** (2 + beta)
        return out

    return H


def hardy_form(u, H, mesh=None):
    """∫(|∇u|² - H u²) with forward differences and trapezoid weights."""
    mesh = u.mesh if mesh is None else mesh
    Hn = H(mesh.points) if callable(H) else np.asarray(H)
    return mesh.grad_sq(u.values) - mesh.quad(Hn * u.values**2)


def h1_norm_sq(u):
    mesh = u.mesh
    return mesh.grad_sq(u.values) + mesh.quad(u.values**2)


def hardy_suite():
    """Ten smooth 3D test functions for the positivity check of the quadratic form.

    Λ is taken as the unit ball about 0, so the suite mixes bumps inside Λ, shells
    straddling ∂Λ, off-centre and anisotropic bumps, and slowly decaying tails.
    """

    def r(x):
        return np.linalg.norm(x, axis=1)

    return [
        ("gauss", lambda x: np.exp(-r(x) ** 2)),
        ("gauss_wide", lambda x: np.exp(-r(x) ** 2 / 2)),
        ("gauss_off", lambda x: np.exp(-np.sum((x - [1.2, 0.0, 0.0]) ** 2, axis=1) / 0.3)),
        ("shell", lambda x: np.exp(-((r(x) - 1.3) ** 2) / 0.1)),
        ("shell_in", lambda x: np.exp(-((r(x) - 1.0) ** 2) / 0.05)),
        ("poly_gauss", lambda x: (1 + x[:, 0] ** 2) * np.exp(-r(x) ** 2 / 1.5)),
        ("aniso", lambda x: np.exp(-x[:, 0] ** 2 / 2 - x[:, 1] ** 2 / 0.5 - x[:, 2] ** 2)),
        ("sech", lambda x: 1 / np.cosh(2 * r(x))),
        ("slow_tail", lambda x: (1 + r(x) ** 2) ** -0.25 * np.exp(-r(x) ** 2 / 4)),
        ("dipole", lambda x: x[:, 0] * np.exp(-r(x) ** 2)),
    ]


# ---------------------------------------------------------------- hypotheses


@dataclass
class Check:
    name: str
    holds: bool
    margin: float
    detail: str = ""
    advisory: bool = False


@dataclass
class HypothesisReport:
    checks: list = field(default_factory=list)

    def add(self, name, holds, margin, detail="", advisory=False):
        self.checks.append(Check(name, bool(holds), float(margin), detail, advisory))

    @property
    def all_pass(self):
        return all(c.holds for c in self.checks if not c.advisory)

    @property
    def failures(self):
        return [c.name for c in self.checks if not c.holds and not c.advisory]

    @property
    def warnings(self):
        return [c.name for c in self.checks if not c.holds and c.advisory]

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self):
        return {
            c.name: {"holds": c.holds, "margin": c.margin, "detail": c.detail, "advisory": c.advisory}
            for c in self.checks
        }

    def __str__(self):
        lines = []
        for c in self.checks:
            flag = "ok  " if c.holds else ("warn" if c.advisory else "FAIL")
            lines.append(f"[{flag}] {c.name:<28} margin={c.margin:+.4e}  {c.detail}")
        return "\n".join(lines)


def _region_samples(region, mesh=None, per_axis=None):
    if mesh is not None:
        pts = mesh.points
        if mesh.radial:
            return pts[region.contains(pts)]
        return pts[region.contains(pts)]
    bpts, _ = region.shape.boundary()
    lo, hi = bpts.min(axis=0), bpts.max(axis=0)
    n = per_axis or {1: 2001, 2: 201, 3: 41}[region.N]
    axes = [np.linspace(a, b, n) for a, b in zip(lo, hi)]
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    return pts[region.contains(pts)]


def validate_hypotheses(V, region, p, mesh=None, level_tol=0.05, c_slow=1e-3):
    """Sample V over Λ and ∂Λ and report every hypothesis with its margin; never raises."""
    rep = HypothesisReport()
    N = region.N
    rep.add("subcritical", 1 / p > (N - 2) / (N + 2), 1 / p - (N - 2) / (N + 2), "1/p > (N-2)/(N+2)")
    fast_ok = 1 / p < (N - 2) / N
    slow = V.decay_class == "quadratic_slow"
    rep.add(
        "decay_condition",
        fast_ok or slow,
        (N - 2) / N - 1 / p if not slow else 1.0,
        "1/p < (N-2)/N" if not slow else "declared quadratic_slow",
    )
    if V.asymptotic_class is not None and V.asymptotic_class != V.decay_class:
        rep.add(
            "declared_decay_class",
            False,
            0.0,
            f"declared {V.decay_class} but the formula decays as {V.asymptotic_class}; holds on the truncated box only",
            advisory=True,
        )

    inner = _region_samples(region, mesh)
    bpts, _ = region.shape.boundary()
    if inner.size == 0:
        rep.add("region_sampled", False, 0.0, "no sample points inside the region")
        return rep
    Vi, Vb = V(inner), V(bpts)
    sup_in, inf_in = float(np.max(Vi)), float(min(np.min(Vi), np.min(Vb)))
    sup_b, inf_b = float(np.max(Vb)), float(np.min(Vb))
    spread = sup_in - inf_in
    rep.add("V_nonnegative", np.min(Vi) >= 0 and np.min(Vb) >= 0, min(np.min(Vi), np.min(Vb)))
    rep.add("inf_V_positive", inf_in > 0, inf_in, "inf over Λ of V > 0")
    rep.add("sup_gt_inf", spread > 0, spread, "sup_Λ V > inf_Λ V")
    scale = spread if spread > 0 else max(abs(sup_in), 1.0)
    rep.add(
        "boundary_level_line",
        sup_b - inf_b <= level_tol * scale,
        level_tol * scale - (sup_b - inf_b),
        f"sup_∂Λ V - inf_∂Λ V = {sup_b - inf_b:.3e}",
    )
    rep.add(
        "inf_equals_boundary",
        np.min(Vi) >= sup_b - level_tol * scale,
        float(np.min(Vi)) - (sup_b - level_tol * scale),
        f"inf_Λ V = {float(np.min(Vi)):.6g}, sup_∂Λ V = {sup_b:.6g}",
    )
    theta = energy_exponent(N, p)
    if inf_in > 0:
        ratio = sup_in**theta / inf_in**theta
        rep.add("gap_condition", ratio < 2, 2 - ratio, f"sup V^θ / inf V^θ = {ratio:.4f}, θ = {theta:.4g}")
    else:
        rep.add("gap_condition", False, -np.inf, "inf V = 0")
    rep.add("ball_inside", region.ball_inside(), 0.0, f"B({region.x0.tolist()}, {region.rho}) ⊂ Λ")
    rep.add("x0_inside", bool(region.contains(region.x0)[0]), 0.0)
    if mesh is not None:
        rep.add("box_margin", mesh.margin_ok(region.shape), 0.0, "Λ at least L/4 inside the box")
        if slow:
            far = mesh.points[mesh.boundary]
            r2 = np.sum((far - np.asarray(mesh.center)) ** 2, axis=1)
            c = float(np.min(V(far) * r2))
            rep.add("slow_far_field", c >= c_slow, c - c_slow, f"min V|x|² on box boundary = {c:.3e}")
    return rep


def suggest_half_width(eps, N, lam=1.0, target=1e-10, L_max=1e3):
    """Smallest L with (1+L²)^{-(N-2)/2} exp(-λL/(ε(1+L))) < target, or None if unattainable."""

    def env(L):
        return (1 + L**2) ** (-(N - 2) / 2) * math.exp(-lam * L / (eps * (1 + L)))

    if env(L_max) >= target:
        return None
    return optimize.brentq(lambda L: env(L) - target, 1e-9, L_max)
