"""
Growth of the separable Mittag-Leffler solution
===============================================

The separable solution of the nonlinear telegraph equation with memory is a
fixed spatial profile ``(x + C2)^(1/(1+gamma))`` multiplied by a time factor
``f(t) = C1 t E_{nu,2}(-lam^nu t^nu) + C2``. This script tabulates ``f`` for a
few memory orders and checks it against a direct PDE solve.
"""

import numpy as np

from fracheat import scenarios, solvers
from fracheat.solutions import Prop21Solution, TelegraphParams, prop21_time

t = np.linspace(0.0, 4.0, 9)

# nu = 1 saturates at C2 + C1 / lam; for nu < 1 the factor keeps growing like t^(1-nu)
print("t      " + "  ".join(f"nu={nu:<5}" for nu in (0.25, 0.5, 0.75, 1.0)))
factors = [prop21_time(Prop21Solution(TelegraphParams(1.0, 1.0, nu), 1.0, 1.0), t)
           for nu in (0.25, 0.5, 0.75, 1.0)]
for i, tv in enumerate(t):
    print(f"{tv:<6.2f} " + "  ".join(f"{f[i]:<8.5f}" for f in factors))

# the solver started from the same data reproduces the closed form
spec, exact = scenarios.prop21(gamma=1.0, lam=1.0, nu=0.5)
for nx in (50, 100, 200):
    rep = solvers.solve_pde(spec, nx, 10 * nx)
    print(f"nx={nx:4d}  max error {rep.max_error(exact):.3e}")
