"""End-to-end acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line that is echoed in the terminal summary.
"""
import math
import time
import warnings

import numpy as np
import pytest
from scipy.integrate import quad

from conftest import ACCEPTANCE_LINES, small_1d_problem, small_2d_problem
from oracles import closed_form_scale, finite_difference_error, nonlinearity_properties, random_field
from penalized_nls.config import bundled_configs, load_config
from penalized_nls.domain import Ball, Mesh, RegionSpec, h1_norm_sq, hardy_form, hardy_suite, penalization_potential
from penalized_nls.limit_ground_state import LimitProblemParams, energy_exponent, limit_energy, shoot_ground_state
from penalized_nls.penalized import nehari_scale
from penalized_nls.sweep import SweepContext, run_sweep

# V = 1/(1+x⁴) in 1D with p = 3: b_1 = 4/3 from the sech profile, θ = 3/2, V = 9/10 on ∂Λ
B1_1D = 4 / 3


def C_1d(v):
    return B1_1D * v**1.5


def record(k, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'} criterion {k}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert passed, line


@pytest.fixture(scope="module")
def bundled():
    out = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for name in bundled_configs():
            cfg = load_config(name)
            out[name] = (cfg, run_sweep(cfg, write=False))
    return out


def test_criterion_1_limit_oracle():
    t0 = time.perf_counter()
    prof = shoot_ground_state(LimitProblemParams(1, 3, 1.0))
    b = limit_energy(prof)
    dt = time.perf_counter() - t0
    e0, eb = abs(prof.u0 - math.sqrt(2)), abs(b - 4 / 3)
    record(1, e0 < 1e-6 and eb < 1e-6 and dt < 1.0, f"|u(0)-√2| = {e0:.2e}, |b-4/3| = {eb:.2e}, {dt:.2f} s")


def test_criterion_2_energy_scaling():
    t0 = time.perf_counter()
    worst = 0.0
    for N, p in ((1, 3), (3, 3)):
        b1 = shoot_ground_state(LimitProblemParams(N, p, 1.0)).energy
        theta = (p + 1) / (p - 1) - N / 2
        assert energy_exponent(N, p) == theta
        for nu in (0.5, 2.0):
            b = shoot_ground_state(LimitProblemParams(N, p, nu)).energy
            worst = max(worst, abs(b / (b1 * nu**theta) - 1))
    dt = time.perf_counter() - t0
    record(2, worst < 1e-5 and dt < 10.0, f"worst relative deviation {worst:.2e}, {dt:.2f} s")


def test_criterion_3_nehari_closed_form(rng):
    problem = small_1d_problem()
    worst = 0.0
    for _ in range(100):
        u = random_field(problem, rng, support=problem.inside)
        worst = max(worst, abs(nehari_scale(problem, u) / closed_form_scale(problem, u) - 1))
    record(3, worst < 1e-10, f"worst relative gap {worst:.2e} over 100 fields")


def test_criterion_4_nonlinearity_and_gradient(rng):
    counts = {}
    fd = 0.0
    for make in (small_1d_problem, small_2d_problem):
        problem = make()
        for k, v in nonlinearity_properties(problem, rng, n=10_000).items():
            counts[k] = counts.get(k, 0) + v
    problem = small_2d_problem()
    for _ in range(20):
        fd = max(fd, finite_difference_error(problem, random_field(problem, rng, 0.8), random_field(problem, rng)))
    ok = all(v == 0 for v in counts.values()) and fd < 1e-6
    record(4, ok, f"violations {counts} (10⁴ samples each, 1D and 2D), worst FD gap {fd:.2e}")


def test_criterion_5_ground_state_asymptotics():
    cfg = load_config("inverse_poly4_1d").with_overrides(mode="ground")
    t0 = time.perf_counter()
    report = run_sweep(cfg, write=False)
    dt = time.perf_counter() - t0
    target = C_1d(0.9)
    errs = [abs(r.rescaled_energy - target) / target for r in report.records]
    monotone = all(b < a for a, b in zip(errs, errs[1:]))
    ok = all(r.converged for r in report.records) and monotone and errs[-1] < 0.10 and dt < 120
    record(5, ok, f"errors vs inf_Λ C = {target:.6f}: {[round(e, 4) for e in errs]}, {dt:.1f} s")


def test_criterion_6_max_concentration(bundled):
    cfg, report = bundled["inverse_poly4_1d"]
    assert cfg.sweep.mode == "pinned" and cfg.sweep.target == [0.0]
    rho = cfg.problem.region["rho"]
    bad = [
        r.eps
        for r in report.records
        if r.eps <= 0.1 and not (abs(r.peak[0]) <= 2 * r.eps and r.dist_to_boundary >= rho / 2)
    ]
    last = report.records[-1]
    err = abs(last.rescaled_energy - C_1d(1.0)) / C_1d(1.0)
    ok = not bad and last.eps == 0.05 and err < 0.10 and all(r.converged for r in report.records)
    detail = ", ".join(f"ε={r.eps}: x={r.peak[0]:.2e}, dist={r.dist_to_boundary:.3f}" for r in report.records)
    record(6, ok, f"{detail}; energy error at 0.05 {err:.2e}")


def test_criterion_7_certificate(bundled):
    parts, ok = [], True
    for name, (cfg, report) in bundled.items():
        last = min(report.records, key=lambda r: r.eps)
        good = last.converged and last.certificate_holds and last.certificate_margin > 0
        ok &= good
        parts.append(f"{name} ε={last.eps} margin {last.certificate_margin:.3e}")
    record(7, ok, "; ".join(parts))


def test_criterion_8_test_path_levels(bundled):
    parts, ok = [], True
    for name, (cfg, report) in bundled.items():
        if cfg.mesh.kind == "radial":
            parts.append(f"{name}: test paths need off-centre seeds, not representable on a radial mesh")
            continue
        ctx = SweepContext(cfg)
        last = min(report.records, key=lambda r: r.eps)
        N = cfg.N
        if name == "inverse_poly4_1d":
            ref_a, ref_c = C_1d(0.9), C_1d(1.0)
        else:
            ref_a, ref_c = ctx.C(ctx.sup_boundary_V), ctx.C(ctx.sup_V)
        a, c = last.a_level / last.eps**N, last.c_upper / last.eps**N
        ea, ec = abs(a - ref_a) / ref_a, abs(c - ref_c) / ref_c
        good = ea < 0.10 and ec < 0.10 and last.c_upper > last.a_level
        ok &= good
        parts.append(f"{name} ε={last.eps}: a err {ea:.3g}, c_upper err {ec:.3g}, gap {c - a:.4g}")
    record(8, ok, "; ".join(parts))


def _continuum_form(f, df, H):
    """4π∫(f'² - H f²) r² dr for radial f, by adaptive quadrature with the kink of H at r = 1."""
    grad = quad(lambda r: df(r) ** 2 * r * r, 0, 12, limit=400, points=[1.0])[0]
    pot = quad(lambda r: H(r) * f(r) ** 2 * r * r, 1, 12, limit=400)[0]
    return 4 * math.pi * (grad - pot)


def test_criterion_9_positivity_form():
    region = RegionSpec(Ball(np.zeros(3), 1.0), np.zeros(3), 0.5)
    H = penalization_potential(region, 3, "high_dim")
    coarse, fine = Mesh(3, 4.0, 41), Mesh(3, 4.0, 81)
    Hc, Hf = H(coarse.points), H(fine.points)
    worst, neg = math.inf, []
    for name, f in hardy_suite():
        qc = [hardy_form(m.sample(f), Hm, m) / h1_norm_sq(m.sample(f)) for m, Hm in ((coarse, Hc), (fine, Hf))]
        worst = min(worst, qc[0])
        neg.append((name, max(-qc[0], 0.0), max(-qc[1], 0.0)))
    # negative parts: an observed order is only defined where the coarse one is nonzero
    orders = [math.log2(a / b) if b > 0 else math.inf for _, a, b in neg if a > 0]
    neg_ok = all(o >= 1 for o in orders)

    # discretisation error of the form itself against continuum values (radial members)
    rho, rho0 = region.rho, region.rho0

    def H_r(r):
        return 0.0 if r < 1 else 1 / (4 * r * r) * (math.log(rho / rho0) / math.log(r / rho0)) ** 2

    radial = {
        "gauss": (lambda r: math.exp(-r * r), lambda r: -2 * r * math.exp(-r * r)),
        "shell": (lambda r: math.exp(-((r - 1.3) ** 2) / 0.1), lambda r: -20 * (r - 1.3) * math.exp(-((r - 1.3) ** 2) / 0.1)),
        "sech": (lambda r: 1 / math.cosh(2 * r), lambda r: -2 * math.tanh(2 * r) / math.cosh(2 * r)),
    }
    err_orders = {}
    for name, (f, df) in radial.items():
        exact = _continuum_form(f, df, H_r)
        errs = []
        for m, Hm in ((coarse, Hc), (fine, Hf)):
            u = m.sample(lambda x: np.vectorize(f)(np.linalg.norm(x, axis=1)))
            errs.append(abs(hardy_form(u, Hm, m) - exact) / abs(exact))
        err_orders[name] = math.log2(errs[0] / errs[1])
    ok = worst >= -1e-6 and neg_ok and min(err_orders.values()) >= 1
    n_neg = sum(1 for _, a, _ in neg if a > 0)
    record(
        9,
        ok,
        f"min form/‖u‖²_H¹ over 10 members {worst:.4g}; {n_neg} negative at M=41"
        f"{' (order vacuous)' if n_neg == 0 else f', orders {orders}'}; "
        f"continuum error orders {{{', '.join(f'{k}: {v:.2f}' for k, v in err_orders.items())}}}",
    )


def test_criterion_10_tail_law(bundled):
    from penalized_nls.diagnostics import loglog_slope

    parts, ok = [], True
    for name, (cfg, report) in bundled.items():
        eps = [r.eps for r in report.records]
        slope = loglog_slope(eps, [r.tail_fraction for r in report.records])
        ok &= slope >= 1.7
        parts.append(f"{name} slope {slope:.3g}")
    record(10, ok, "; ".join(parts))


def test_criterion_11_peak_bound(bundled):
    ratios = [(name, r.eps, r.sup_ratio) for name, (cfg, rep) in bundled.items() for r in rep.records if r.converged]
    n_all = sum(len(rep.records) for _, rep in bundled.values())
    worst = min(ratios, key=lambda t: t[2])
    ok = len(ratios) == n_all and worst[2] >= 1 - 1e-6
    record(11, ok, f"{len(ratios)} converged states, smallest sup ratio {worst[2]:.6f} ({worst[0]}, ε={worst[1]})")
