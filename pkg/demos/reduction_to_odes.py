"""
Reducing the PDE to a system of fractional ODEs
===============================================

For ``gamma = 1`` the operator ``(T^gamma T_x)_x`` maps the span of
``1, x, x^2`` into itself, so solutions of the form
``f(t) x^2 + g(t) x + h(t)`` satisfy a closed system of ODEs. The same holds
for ``1, x^2`` under the composite Caputo time operator.
"""

import numpy as np

from fracheat import solvers, subspace
from fracheat.fracops import TimeGrid
from fracheat.subspace import PowerExpr

P = PowerExpr.parse

system = subspace.reduce([P("1"), P("x"), P("x2")], 1, subspace.telegraph())
print(system.to_text())
print()

small = subspace.reduce([P("1"), P("x2")], 1, subspace.caputo_composite())
print(small.to_text())
print()

# integrate the two-dimensional system numerically at nu = 1/2; the
# x^2 coefficient b obeys a closed equation of its own
grid = TimeGrid.uniform(0.2, 400)
rep = solvers.solve_reduced(small, [1.0, 0.5], [0.0, 0.0], grid, subs={subspace.NU: 0.5})
for k in range(0, rep.t.size, 100):
    a, b = rep.solution[k]
    print(f"t={rep.t[k]:.3f}  a={a:.6f}  b={b:.6f}")
print(f"finite on [0, 0.2]: {bool(np.all(np.isfinite(rep.solution)))}")
