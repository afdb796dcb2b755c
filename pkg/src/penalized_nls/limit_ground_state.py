"""Radial ground state of the limit problem -Δu + νu = u^p in R^N.

The profile U_ν is obtained by shooting on u(0): trajectories that overshoot
cross zero, trajectories that undershoot turn back upward. After bisection the
trajectory is followed until it has decayed by a few orders of magnitude and
then continued with the exact decaying solution of the linearised equation,
r^{-(N-2)/2} K_{(N-2)/2}(√ν r), which avoids the exponential instability of
the shooting tail.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special
from scipy.integrate import simpson, solve_ivp
from scipy.interpolate import CubicHermiteSpline

from .errors import (
    DegenerateProfile,
    InvalidParameters,
    NoBracket,
    NonpositivePotential,
    ToleranceNotMet,
)

DECAY_FLOOR = 1e-12


def sphere_area(N):
    """Surface measure of the unit sphere S^{N-1} (2 for N = 1)."""
    return 2.0 * math.pi ** (N / 2) / math.gamma(N / 2)


def energy_exponent(N, p):
    """θ = (p+1)/(p-1) - N/2, the exponent in b_ν = ν^θ b_1."""
    return (p + 1) / (p - 1) - N / 2


@dataclass(frozen=True)
class LimitProblemParams:
    N: int
    p: float
    nu: float = 1.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise InvalidParameters(f"dimension must be a positive integer, got {self.N}")
        if not self.p > 1:
            raise InvalidParameters(f"exponent p must exceed 1, got {self.p}")
        if not 1 / self.p > (self.N - 2) / (self.N + 2):
            raise InvalidParameters(
                f"p = {self.p} is not subcritical in dimension {self.N}"
            )
        if not self.nu > 0:
            raise InvalidParameters(f"frequency must be positive, got {self.nu}")


@dataclass(frozen=True, eq=False)
class GroundStateProfile:
    params: LimitProblemParams
    radii: np.ndarray
    values: np.ndarray
    derivatives: np.ndarray
    energy: float
    r_max: float
    u0: float
    decay_floor: float = DECAY_FLOOR
    _spline: CubicHermiteSpline = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self._spline is None:
            spline = CubicHermiteSpline(self.radii, self.values, self.derivatives)
            object.__setattr__(self, "_spline", spline)

    def __call__(self, r):
        """Evaluate U_ν at radii r (zero beyond R_max)."""
        r = np.abs(np.asarray(r, dtype=float))
        out = np.zeros_like(r)
        inside = r <= self.r_max
        out[inside] = self._spline(r[inside])
        return out

    @property
    def b_nu(self):
        return self.energy

    def integrals(self):
        """(∫|∇U|², ∫U², ∫U^{p+1}) over R^N."""
        return _radial_integrals(self.params, self.radii, self.values, self.derivatives)

    def residuals(self):
        grad2, mass, power = self.integrals()
        N, p, nu = self.params.N, self.params.p, self.params.nu
        nehari = (grad2 + nu * mass - power) / power
        pohozaev = ((N - 2) / 2 * grad2 + N / 2 * nu * mass - N / (p + 1) * power) / power
        return {"nehari": float(nehari), "pohozaev": float(pohozaev)}

    def rescaled(self, nu):
        """Exact profile at a new frequency: U_ν(r) = ν^{1/(p-1)} U_1(√ν r)."""
        if not nu > 0:
            raise NonpositivePotential(f"frequency must be positive, got {nu}")
        p, N = self.params.p, self.params.N
        k = nu / self.params.nu
        amp = k ** (1 / (p - 1))
        sq = math.sqrt(k)
        return GroundStateProfile(
            params=LimitProblemParams(N, p, nu),
            radii=self.radii / sq,
            values=amp * self.values,
            derivatives=amp * sq * self.derivatives,
            energy=self.energy * k ** energy_exponent(N, p),
            r_max=self.r_max / sq,
            u0=amp * self.u0,
            decay_floor=self.decay_floor,
        )


@dataclass(frozen=True)
class EnergyConstants:
    """S_{p+1} and the conjugate exponent r with 1/r = 1/2 - 1/(p+1)."""

    N: int
    p: float
    S: float

    @property
    def r(self):
        return 2 * (self.p + 1) / (self.p - 1)

    @property
    def b1(self):
        return self.S ** self.r / self.r

    @classmethod
    def from_b1(cls, N, p, b1):
        r = 2 * (p + 1) / (p - 1)
        return cls(N=N, p=p, S=(r * b1) ** (1 / r))


def _radial_integrals(params, radii, values, derivatives):
    N, p = params.N, params.p
    weight = sphere_area(N) * radii ** (N - 1)
    grad2 = simpson(weight * derivatives**2, x=radii)
    mass = simpson(weight * values**2, x=radii)
    power = simpson(weight * np.abs(values) ** (p + 1), x=radii)
    return grad2, mass, power


def _rhs(N, p, nu):
    def f(r, y):
        u, du = y
        damping = -(N - 1) / r * du if r > 0 else 0.0
        return [du, damping + nu * u - math.copysign(abs(u) ** p, u)]

    return f


def _start(u0, params):
    """Regularised initial data away from the r = 0 singularity."""
    N, p, nu = params.N, params.p, params.nu
    r0 = 0.0 if N == 1 else 1e-4 / math.sqrt(nu)
    c = (nu * u0 - u0**p) / N
    return r0, [u0 + 0.5 * c * r0**2, c * r0]


def _integrate(u0, params, r_end, extra_events=(), dense=False):
    def crosses_zero(r, y):
        return y[0]

    crosses_zero.terminal = True
    crosses_zero.direction = -1

    def turns_up(r, y):
        return y[1]

    turns_up.terminal = True
    turns_up.direction = 1

    r0, y0 = _start(u0, params)
    return solve_ivp(
        _rhs(params.N, params.p, params.nu),
        (r0, r_end),
        y0,
        method="DOP853",
        rtol=1e-12,
        atol=1e-16 * max(u0, 1.0),
        events=[crosses_zero, turns_up, *extra_events],
        dense_output=dense,
    )


def _classify(u0, params, r_end):
    """+1 if u(0) overshoots (crosses zero), -1 if it undershoots, 0 if undecided."""
    sol = _integrate(u0, params, r_end)
    if sol.t_events[0].size:
        return 1
    if sol.t_events[1].size:
        return -1
    return 0


def _tail(params, r, r_match, u_match):
    """Decaying linearised solution through (r_match, u_match) and its derivative."""
    N, nu = params.N, params.nu
    order = (N - 2) / 2
    k = math.sqrt(nu)
    z, zm = k * r, k * r_match
    ratio = special.kve(order, z) / special.kve(order, zm) * np.exp(-(z - zm))
    u = u_match * (r / r_match) ** (-order) * ratio
    # d/dz [z^{-a} K_a(z)] = -z^{-a} K_{a+1}(z)
    du = -k * u * special.kve(order + 1, z) / special.kve(order, z)
    return u, du


def shoot_ground_state(params, tol=1e-13, decay_floor=DECAY_FLOOR, match_fraction=1e-4, dr=None):
    """Shoot the positive radial ground state U_ν of -Δu + νu = u^p."""
    if not tol > 0:
        raise InvalidParameters("tol must be positive")
    N, p, nu = params.N, params.p, params.nu
    r_cap = 200.0 / math.sqrt(nu)

    equilibrium = nu ** (1 / (p - 1))
    lo = equilibrium * (1 + 1e-6)
    if _classify(lo, params, r_cap) != -1:
        raise NoBracket(f"u(0) = {lo} just above the constant state does not undershoot")
    hi = 2.0 * equilibrium
    for _ in range(60):
        side = _classify(hi, params, r_cap)
        if side == 1:
            break
        if side == -1:
            lo = hi
        hi *= 2.0
    else:
        raise NoBracket("no overshooting initial value found")

    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            raise ToleranceNotMet(f"bisection stalled at width {(hi - lo) / hi:.3e} > {tol:.1e}")
        side = _classify(mid, params, r_cap)
        if side == 0:
            raise ToleranceNotMet(f"trajectory from u(0) = {mid!r} undecided up to r = {r_cap}")
        if side > 0:
            hi = mid
        else:
            lo = mid
    u0 = 0.5 * (lo + hi)

    u_match = match_fraction * u0

    def reaches_match(r, y):
        return y[0] - u_match

    reaches_match.terminal = True
    reaches_match.direction = -1
    sol = _integrate(u0, params, r_cap, extra_events=[reaches_match], dense=True)
    if not sol.t_events[2].size:
        raise ToleranceNotMet("trajectory left the ground-state branch before decaying")
    r_match = float(sol.t_events[2][0])

    # tail decays like exp(-√ν r); stop once below the floor
    decay = math.log(u_match / (0.1 * decay_floor)) / math.sqrt(nu)
    r_max = r_match + decay
    if r_max > r_cap:
        warnings.warn(f"profile truncated at the cap r = {r_cap:.3g} before reaching the decay floor")
        r_max = r_cap
    if dr is None:
        dr = 2e-3 / math.sqrt(nu)
    n = int(math.ceil(r_max / dr))
    n += n % 2  # even number of intervals for Simpson
    radii = np.linspace(0.0, r_max, n + 1)
    values = np.empty_like(radii)
    derivs = np.empty_like(radii)
    r0 = sol.t[0]
    core = (radii >= r0) & (radii <= r_match)
    y = sol.sol(radii[core])
    values[core], derivs[core] = y[0], y[1]
    if r0 > 0:
        # regularised expansion for the sliver [0, r0)
        head = radii < r0
        c = (nu * u0 - u0**p) / N
        values[head] = u0 + 0.5 * c * radii[head] ** 2
        derivs[head] = c * radii[head]
    tail = radii > r_match
    values[tail], derivs[tail] = _tail(params, radii[tail], r_match, u_match)

    grad2, mass, power = _radial_integrals(params, radii, values, derivs)
    energy = 0.5 * (grad2 + nu * mass) - power / (p + 1)
    return GroundStateProfile(
        params=params,
        radii=radii,
        values=values,
        derivatives=derivs,
        energy=float(energy),
        r_max=float(r_max),
        u0=float(u0),
        decay_floor=decay_floor,
    )


def limit_energy(profile):
    """I_ν(U_ν) = ½∫(|∇U|² + νU²) - ∫U^{p+1}/(p+1) by radial quadrature."""
    values = np.asarray(profile.values)
    if values.size == 0 or np.max(np.abs(values)) <= profile.decay_floor:
        raise DegenerateProfile("profile has no mass above the decay floor")
    if np.abs(values[-1]) > 1e3 * profile.decay_floor:
        warnings.warn(f"profile tail {values[-1]:.2e} exceeds the decay floor; energy is truncated")
    p, nu = profile.params.p, profile.params.nu
    grad2, mass, power = _radial_integrals(profile.params, profile.radii, values, profile.derivatives)
    return float(0.5 * (grad2 + nu * mass) - power / (p + 1))


def energy_scaling_check(params, nus, tol=1e-13):
    """Compare shot b_ν with the scaling prediction b_1 ν^θ for each ν."""
    base = shoot_ground_state(LimitProblemParams(params.N, params.p, 1.0), tol=tol)
    theta = energy_exponent(params.N, params.p)
    rows = []
    for nu in nus:
        if not nu > 0:
            raise InvalidParameters(f"frequency must be positive, got {nu}")
        if nu == 1.0:
            b = base.energy
        else:
            b = shoot_ground_state(LimitProblemParams(params.N, params.p, nu), tol=tol).energy
        predicted = base.energy * nu**theta
        rows.append((nu, b, predicted, abs(b - predicted) / abs(b)))
    return rows


def energy_constants(N, p, tol=1e-13):
    """S_{p+1} from b_1 via S^r / r = b_1."""
    profile = shoot_ground_state(LimitProblemParams(N, p, 1.0), tol=tol)
    return EnergyConstants.from_b1(N, p, profile.energy)


def concentration_energy(V_value, constants):
    """C(y) = (S^r/r) V(y)^θ, only defined where V(y) > 0."""
    if not V_value > 0:
        raise NonpositivePotential(f"concentration energy undefined for V = {V_value}")
    return constants.S**constants.r / constants.r * V_value ** energy_exponent(constants.N, constants.p)


def _radial_quotient(N, p, R, M):
    r = np.linspace(0.0, R, M)
    h = r[1] - r[0]
    area = sphere_area(N)
    mid = 0.5 * (r[1:] + r[:-1])
    edge = area * mid ** (N - 1) / h
    outer = np.minimum(r + h / 2, R)
    inner = np.maximum(r - h / 2, 0.0)
    cell = area / N * (outer**N - inner**N)
    q = p + 1
    # optimise in mass-scaled variables; raw nodal values are badly conditioned for N > 1
    scale = np.sqrt(cell[:-1])

    def fun(w):
        u = np.append(w / scale, 0.0)
        du = np.diff(u)
        A = np.sum(edge * du**2) + np.sum(cell * u**2)
        B = np.sum(cell * np.abs(u) ** q)
        gA = 2 * cell * u
        gA[:-1] -= 2 * edge * du
        gA[1:] += 2 * edge * du
        gB = q * cell * np.abs(u) ** (q - 1) * np.sign(u)
        Q = A / B ** (2 / q)
        g = gA / B ** (2 / q) - (2 / q) * A * B ** (-2 / q - 1) * gB
        return Q, g[:-1] / scale

    w0 = np.exp(-r[:-1] ** 2) * scale
    res = optimize.minimize(
        fun, w0, jac=True, method="L-BFGS-B",
        options={"maxiter": 100000, "maxfun": 100000, "ftol": 1e-16, "gtol": 1e-14, "maxcor": 30},
    )
    return float(res.fun)


def sobolev_constant_direct(N, p, R=20.0, M=1001):
    """S_{p+1}² by direct minimisation of the Sobolev quotient over radial grid functions.

    Two grids (h and h/2) are combined by Richardson extrapolation of the O(h²) error.
    """
    coarse = _radial_quotient(N, p, R, M)
    fine = _radial_quotient(N, p, R, 2 * M - 1)
    return (4 * fine - coarse) / 3
