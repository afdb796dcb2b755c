"""Tabulate b_1, S and the peak height of the limit ground state for a few (N, p)."""
import numpy as np

from penalized_nls.limit_ground_state import LimitProblemParams, energy_constants, shoot_ground_state, sobolev_constant_direct

CASES = [(1, 2), (1, 3), (1, 5), (2, 3), (3, 2), (3, 3), (3, 4)]

print(f"{'N':>2} {'p':>3} {'u(0)':>12} {'b_1':>14} {'S':>12} {'S (quotient)':>14} {'b_2/b_1':>10} {'2^θ':>10}")
for N, p in CASES:
    prof = shoot_ground_state(LimitProblemParams(N, p, 1.0))
    const = energy_constants(N, p)
    b2 = shoot_ground_state(LimitProblemParams(N, p, 2.0)).energy
    theta = (p + 1) / (p - 1) - N / 2
    S_direct = np.sqrt(sobolev_constant_direct(N, p)) if N in (1, 3) else float("nan")
    print(f"{N:>2} {p:>3} {prof.u0:12.8f} {const.b1:14.10f} {const.S:12.8f} {S_direct:14.8f} {b2 / const.b1:10.6f} {2**theta:10.6f}")
