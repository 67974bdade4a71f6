"""
Tracking the source-type solution of the porous medium equation
===============================================================

Without memory the equation reduces to ``T_t = (T^m T_x)_x``. Starting the
conservative solver on the source-type profile at ``t0`` it follows the
spreading front over one decade of time while conserving mass to rounding.
"""

import numpy as np

from fracheat import scenarios, solvers

spec, exact, p = scenarios.barenblatt(m=1.0, decades=1.0)
print(f"r0 = {p.r0:.6f}, t0 = {p.t0:.6f}")

for nx in (50, 100, 200):
    rep = solvers.solve_pde(spec, nx, 2 * nx)
    mask = scenarios.edge_mask(rep, p)
    print(f"nx={nx:4d}  error away from front {rep.max_error(exact, mask):.2e}  "
          f"mass drift {rep.diagnostics['max_mass_drift_per_step']:.1e}")

rep = solvers.solve_pde(spec, 200, 400)
dx = rep.x[1] - rep.x[0]
for k in (0, rep.t.size // 2, rep.t.size - 1):
    support = rep.x[rep.solution[k] > 1e-12]
    print(f"t={rep.t[k]:.3f}  front {p.front(rep.t[k]):.3f}  "
          f"numerical support [{support[0]:.3f}, {support[-1]:.3f}]  "
          f"mass {np.sum(rep.solution[k]) * dx:.6f}")
