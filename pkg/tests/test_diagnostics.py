import copy

import numpy as np
import pytest

from conftest import small_1d_problem, small_2d_problem
from penalized_nls import diagnostics as diag
from penalized_nls.domain import Mesh
from penalized_nls.errors import ZeroMass
from penalized_nls.limit_ground_state import energy_constants
from penalized_nls.solver import solve_pinned, test_function as make_test_function


@pytest.fixture(scope="module")
def pinned_1d(profile_1d):
    problem = small_1d_problem(eps=0.05, M=1601)
    return problem, solve_pinned(problem, [0.0], profile_1d)


def test_barycenter_of_even_field():
    mesh = Mesh(2, 3.0, 61)
    z = np.array([0.3, -0.6])
    u = mesh.sample(lambda x: np.exp(-4 * np.sum((x - z) ** 2, axis=1)))
    ones = mesh.field(np.where(mesh.boundary, 0.0, 1.0))
    assert np.allclose(diag.barycenter(u, ones), z, atol=1e-12)


def test_barycenter_zero_mass():
    mesh = Mesh(1, 1.0, 21)
    zero = mesh.field(np.zeros(mesh.n_nodes))
    ones = mesh.field(np.where(mesh.boundary, 0.0, 1.0))
    with pytest.raises(ZeroMass):
        diag.barycenter(zero, ones)
    with pytest.raises(ZeroMass):
        diag.barycenter_gradient(zero, ones)


def test_barycenter_gradient_matches_differences(rng):
    problem = small_2d_problem()
    mesh = problem.mesh
    psi = diag.barycenter_cutoff(problem.region, mesh)
    u = mesh.sample(lambda x: np.exp(-np.sum((x - 0.1) ** 2, axis=1) / 0.1))
    beta, G = diag.barycenter_gradient(u, psi)
    v = rng.normal(size=mesh.n_nodes)
    v[mesh.boundary] = 0
    d = 1e-6
    fd = (diag.barycenter(mesh.field(u.values + d * v), psi) - diag.barycenter(mesh.field(u.values - d * v), psi)) / (2 * d)
    assert np.allclose(G @ v, fd, rtol=1e-6, atol=1e-10)


def test_seed_barycenter_tracks_seed_point(profile_1d):
    for eps in (0.1, 0.05):
        problem = small_1d_problem(eps=eps, M=1601)
        psi = diag.barycenter_cutoff(problem.region, problem.mesh)
        w = make_test_function(problem, [0.2], profile_1d)[1]
        assert abs(diag.barycenter(w, psi)[0] - 0.2) < eps


def test_peak_tie_breaking():
    mesh = Mesh(2, 1.0, 21)
    vals = np.zeros(mesh.shape)
    vals[5, 7] = vals[12, 3] = 1.0
    pt, v = diag.peak(mesh.field(vals.ravel()))
    assert v == 1.0
    assert np.allclose(pt, mesh.points[np.ravel_multi_index((5, 7), mesh.shape)])


def test_peak_sub_grid_refinement():
    mesh = Mesh(1, 1.0, 41)
    u = mesh.sample(lambda x: 1 - (x[:, 0] - 0.013) ** 2)
    assert diag.peak(u)[0][0] == pytest.approx(0.013, abs=1e-12)


def test_energy_asymptotics_rows(pinned_1d):
    problem, res = pinned_1d
    const = energy_constants(1, 3)
    one = diag.energy_asymptotics([res], problem.V.at([0.0]), const)
    assert len(one.rows) == 1 and one.monotone is None
    assert one.last_error < 0.1
    assert one.rows[0].rescaled == pytest.approx(res.diagnostics.value / 0.05)


def test_certificate_holds_and_fails_when_inflated(pinned_1d, profile_1d):
    problem, res = pinned_1d
    ok, margin = diag.original_problem_certificate(problem, res.field)
    assert ok and margin > 0
    # at ε = 0.05 the tail outside Λ is ~1e-5, so inflate a wider state instead
    problem = small_1d_problem(eps=0.2)
    res = solve_pinned(problem, [0.0], profile_1d)
    bad, m10 = diag.original_problem_certificate(problem, 10.0 * res.field)
    assert not bad and m10 < 0


def test_certificate_for_inside_support(problem_1d):
    vals = np.where(problem_1d.inside, 1.0, 0.0)
    vals[problem_1d.mesh.boundary] = 0.0
    ok, margin = diag.original_problem_certificate(problem_1d, vals)
    assert ok and margin >= 0


def test_envelope_dominates_and_doubled_rate_fails(pinned_1d):
    problem, res = pinned_1d
    env = diag.admissible_envelope(res.field, problem.eps, res.peak, problem.region.rho, mode="slow")
    ok, ratio = diag.decay_envelope_check(res.field, env, problem.eps, problem.region.rho)
    assert ok and ratio <= 1 + 1e-12
    tight = copy.deepcopy(env)
    tight.lam = 2 * env.lam_two_point
    tight.C = env.anchor_value / np.exp(tight.log_shape(env.anchor_point[None, :], problem.eps)[0])
    ok2, ratio2 = diag.decay_envelope_check(res.field, tight, problem.eps, problem.region.rho)
    assert not ok2 and ratio2 > 1


def test_envelope_mode_validation():
    with pytest.raises(ValueError):
        diag.EnvelopeSpec(mode="medium", C=1.0, lam=1.0, anchor=np.zeros(1))


def test_tail_fraction_trivial_cases(pinned_1d, problem_1d):
    problem, res = pinned_1d
    whole = np.ones(problem.mesh.n_nodes, dtype=bool)
    assert diag.tail_energy_fraction(problem, res.field, whole) == 0.0
    vals = np.where(problem_1d.inside, 1.0, 0.0)
    vals[problem_1d.mesh.boundary] = 0.0
    # the forward-difference gradient reaches one node past Λ, so dilate by a cell
    U = diag.dilated_mask(problem_1d.region, problem_1d.mesh, 1.01 * problem_1d.mesh.h)
    assert diag.tail_energy_fraction(problem_1d, vals, U) == 0.0
    assert 0 < diag.tail_energy_fraction(problem, res.field, problem.inside) < 1


def test_loglog_slope():
    eps = np.array([0.2, 0.1, 0.05])
    assert diag.loglog_slope(eps, 3 * eps**2) == pytest.approx(2.0, abs=1e-12)


def test_rescaled_profile_error(profile_1d):
    mesh = Mesh(1, 5.0, 4001)
    eps = 0.1
    u = mesh.sample(lambda x: profile_1d(np.abs(x[:, 0]) / eps))
    assert diag.rescaled_profile_error(u, [0.0], eps, profile_1d) < 1e-12
    assert diag.rescaled_profile_error(2.0 * u, [0.0], eps, profile_1d) == pytest.approx(1.0, rel=1e-12)
