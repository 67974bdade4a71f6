"""
Memory kernels and telegraph equations
======================================

A heat flux with Mittag-Leffler memory kernel gives the same temperature as the
fractional telegraph equation, and an exponential kernel gives the classical
(Cattaneo) telegraph equation. Both solvers are run here side by side.
"""

import numpy as np

from fracheat import scenarios, solvers

for nt in (50, 100, 200):
    a = solvers.solve_pde(scenarios.ml_memory(lam=1.0, nu=0.5), 50, nt)
    b = solvers.solve_pde(scenarios.ml_telegraph(lam=1.0, nu=0.5), 50, nt)
    print(f"nt={nt:4d}  |memory - telegraph| = {np.max(np.abs(a.solution - b.solution)):.2e}")

for tau in (0.25, 1.0):
    rep = solvers.solve_pde(scenarios.cattaneo(tau), 50, 400)
    ref = scenarios.cattaneo_reference(rep, tau)
    print(f"tau={tau:<5}  |exponential kernel - classical| = "
          f"{np.max(np.abs(rep.solution - ref)):.2e}")
