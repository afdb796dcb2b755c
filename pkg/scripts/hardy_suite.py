"""Quadratic form ∫|∇u|² - H u² over the analytic suite, for a ladder of meshes.

Λ is the unit ball, ρ = 0.5; values are normalised by ‖u‖²_H¹.
"""
import sys

import numpy as np

from penalized_nls.domain import Ball, Mesh, RegionSpec, h1_norm_sq, hardy_form, hardy_suite, penalization_potential

sizes = [int(m) for m in sys.argv[1:]] or [21, 41, 81]
region = RegionSpec(Ball(np.zeros(3), 1.0), np.zeros(3), 0.5)
H = penalization_potential(region, 3, "high_dim")
meshes = [Mesh(3, 4.0, M) for M in sizes]
Hs = [H(m.points) for m in meshes]

print(f"{'member':12s}" + "".join(f"   M={M:<8d}" for M in sizes))
for name, f in hardy_suite():
    row = []
    for m, Hm in zip(meshes, Hs):
        u = m.sample(f)
        row.append(hardy_form(u, Hm, m) / h1_norm_sq(u))
    print(f"{name:12s}" + "".join(f"  {v:11.6f}" for v in row))
