"""Independent checks shared by the unit and acceptance tests."""
import numpy as np
from scipy import integrate

from penalized_nls.penalized import eps_norm_sq, functional, gradient, pair

# (p+1)G ≤ g·s and t ↦ g(ts)/t are identities on whole branches, so the two
# sides differ only by rounding of the closed forms
ULP_SLACK = 8 * np.finfo(float).eps


def random_states(problem, rng, n, s_max=4.0):
    """n random (x, s) pairs with x drawn on the mesh box, half of them inside Λ."""
    N, L = problem.N, problem.mesh.L
    centre = problem.region.x0
    r = problem.region.shape.circumradius() if hasattr(problem.region.shape, "circumradius") else 1.0
    near = centre + rng.uniform(-1, 1, size=(n // 2, N)) * r
    far = rng.uniform(-L, L, size=(n - n // 2, N))
    x = np.vstack([near, far])
    s = rng.uniform(-1.0, s_max, size=n)
    s[: n // 10] = rng.uniform(0, 1e-3, size=n // 10)
    inside, coef = problem.pointwise(x)
    return x, s, inside, coef


def nonlinearity_properties(problem, rng, n=10_000):
    """Counts of violations of the four nonlinearity properties on n random samples each."""
    from penalized_nls.penalized import penalized_nonlinearity as g, penalized_primitive as G

    p = problem.p
    out = {}

    # g(x, s)/s → 0: bounded by s^{p-1} for s > 0
    x, s, inside, coef = random_states(problem, rng, n, s_max=1e-2)
    s = np.abs(s) + 1e-300
    out["g1"] = int(np.sum(g(s, inside, coef, p) / s > s ** (p - 1) * (1 + ULP_SLACK)))

    x, s, inside, coef = random_states(problem, rng, n)
    sp_ = np.maximum(s, 0)
    gv = g(s, inside, coef, p)
    bad = gv > sp_**p * (1 + ULP_SLACK)
    bad |= ~inside & (gv > coef * sp_ * (1 + ULP_SLACK))
    out["g2"] = int(np.sum(bad))

    x, s, inside, coef = random_states(problem, rng, n)
    s = np.abs(s)
    gs = g(s, inside, coef, p) * s
    Gv = G(s, inside, coef, p)
    bad = inside & ((p + 1) * Gv > gs * (1 + ULP_SLACK))
    bad |= ~inside & (2 * Gv > gs * (1 + ULP_SLACK))
    out["g3"] = int(np.sum(bad))

    x, s, inside, coef = random_states(problem, rng, n)
    t = np.sort(rng.uniform(1e-3, 5.0, size=(n, 2)), axis=1)
    q1 = g(t[:, 0] * s, inside, coef, p) * s / t[:, 0]
    q2 = g(t[:, 1] * s, inside, coef, p) * s / t[:, 1]
    out["g4"] = int(np.sum(q1 > q2 + ULP_SLACK * np.abs(q2)))
    return out


def primitive_by_quadrature(problem, x, s):
    """∫_0^s g_ε(x, σ) dσ with the kink at the threshold as a breakpoint."""
    from penalized_nls.penalized import g_eps

    inside, coef = problem.pointwise(x)
    a = float(coef[0]) ** (1 / (problem.p - 1))
    pts = [a] if (not inside[0] and 0 < a < s) else None
    val, _ = integrate.quad(lambda t: float(g_eps(problem, x, t)[0]), 0.0, s, points=pts, epsabs=0, epsrel=1e-13)
    return val


def random_field(problem, rng, scale=0.5, support=None):
    """Smooth-ish random field vanishing on the boundary (and outside support if given)."""
    mesh = problem.mesh
    vals = rng.normal(size=mesh.n_nodes) * scale
    vals[mesh.boundary] = 0.0
    if support is not None:
        vals[~support] = 0.0
    return mesh.field(vals)


def finite_difference_error(problem, u, v, delta=1e-5):
    """Relative gap between ⟨J'(u), v⟩ and the central difference of J along v."""
    fd = (functional(problem, u.values + delta * v.values) - functional(problem, u.values - delta * v.values)) / (2 * delta)
    an = pair(problem, gradient(problem, u), v)
    return abs(fd - an) / max(abs(an), abs(fd))


def closed_form_scale(problem, u):
    """Nehari scale for u supported in Λ, where g is the pure power."""
    up = np.maximum(u.values, 0.0)
    power = float(np.dot(problem.w, up ** (problem.p + 1)))
    return (eps_norm_sq(problem, u) / power) ** (1 / (problem.p - 1))
