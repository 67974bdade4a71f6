"""Fractional heat conduction with memory: special functions, discrete
fractional operators, invariant-subspace reductions, closed-form solutions
and solvers."""

__version__ = "0.1.0"
