"""Ready-made problems with exact or reference solutions.

Each builder returns an :class:`~fracheat.solvers.EquationSpec` (plus the
oracle where one exists); the command line, the demos and the tests share
them.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from fracheat.solutions import (
    BarenblattParams,
    Prop21Solution,
    Prop23Solution,
    TelegraphParams,
    WaveSolution,
    barenblatt_eval,
    prop21_eval,
    prop21_space,
    prop23_eval,
    prop23_source,
    wave_eval,
)
from fracheat.solvers import (
    Classical,
    EquationSpec,
    KernelSpec,
    Memory,
    SolverReport,
    Telegraph,
    Wave,
    classical_telegraph_reference,
)

Array = np.ndarray
Oracle = Callable[[Array, Array], Array]


def _zero(t: Array) -> Array:
    return 0.0 * np.asarray(t, dtype=float)


def _sine(x: Array) -> Array:
    return np.sin(np.pi * np.asarray(x, dtype=float))


def prop21(
    gamma: float = 1.0,
    lam: float = 1.0,
    nu: float = 0.5,
    C1: float = 1.0,
    C2: float = 1.0,
    domain: tuple[float, float] = (0.0, 1.0),
    tfinal: float = 1.0,
    grading: float | None = None,
) -> tuple[EquationSpec, Oracle]:
    """Telegraph problem with initial and boundary data from the separable
    Mittag-Leffler solution. The time mesh grading defaults to ``2 / nu``."""
    if grading is None:
        grading = 2.0 / nu
    sol = Prop21Solution(TelegraphParams(gamma, lam, nu), C1, C2)
    xl, xr = domain

    def exact(x: Array, t: Array) -> Array:
        return prop21_eval(sol, x, t)

    spec = EquationSpec(
        Telegraph(gamma, lam, nu),
        ic=lambda x: prop21_eval(sol, x, 0.0),
        ic_rate=lambda x: sol.C1 * prop21_space(sol, x),
        bc_left=lambda t: prop21_eval(sol, xl, t),
        bc_right=lambda t: prop21_eval(sol, xr, t),
        domain=domain, tfinal=tfinal, time_grading=grading, label="prop21")
    return spec, exact


def prop23(gamma: float = 2.5, lam: float = 1.0, nu: float = 0.5) -> tuple[EquationSpec, Oracle]:
    """Sourced telegraph problem with the self-similar power solution.

    The solution is singular at ``t = 0``, so only the pointwise (quadrature)
    residual route applies; the data callables evaluate the oracle.
    """
    p = TelegraphParams(gamma, lam, nu)
    sol = Prop23Solution(p)

    def exact(x: Array, t: Array) -> Array:
        return prop23_eval(sol, x, t)

    spec = EquationSpec(
        Telegraph(gamma, lam, nu),
        ic=lambda x: exact(x, 0.5), bc_left=lambda t: exact(0.5, t),
        bc_right=lambda t: exact(1.5, t), domain=(0.5, 1.5), tstart=0.5,
        source=lambda x, t: prop23_source(p, x, t), label="prop23")
    return spec, exact


def wave(gamma: float = 2.0, nu: float = 0.5) -> tuple[EquationSpec, Oracle]:
    """Wave-type problem with the power solution (singular at ``t = 0``)."""
    sol = WaveSolution(gamma, nu)

    def exact(x: Array, t: Array) -> Array:
        return wave_eval(sol, x, t)

    spec = EquationSpec(
        Wave(gamma, nu), ic=lambda x: exact(x, 0.5), bc_left=lambda t: exact(0.5, t),
        bc_right=lambda t: exact(1.5, t), domain=(0.5, 1.5), tstart=0.5, label="wave")
    return spec, exact


def negative_control(gamma: float = 1.0, lam: float = 1.0, nu: float = 0.5,
                     ) -> tuple[EquationSpec, Oracle]:
    """The telegraph equation with a function that does not solve it, ``T = x``."""
    spec, _ = prop21(gamma, lam, nu)

    def wrong(x: Array, t: Array) -> Array:
        return np.asarray(x, dtype=float) + 0.0 * np.asarray(t, dtype=float)

    return spec, wrong


def cattaneo(tau: float = 1.0, tfinal: float = 1.0) -> EquationSpec:
    """Linear memory equation with an exponential kernel; equivalent to the
    classical telegraph equation (see :func:`cattaneo_reference`)."""
    return EquationSpec(
        Memory(KernelSpec("exponential", tau=tau), 0.0), ic=_sine,
        bc_left=_zero, bc_right=_zero, tfinal=tfinal, label="cattaneo")


def cattaneo_reference(report: SolverReport, tau: float = 1.0, refine: int = 4) -> Array:
    """The explicit classical telegraph solution at the report's nodes.

    The report must use a uniform time grid; the reference takes *refine*
    substeps per step.
    """
    nt = report.t.size - 1
    _, T = classical_telegraph_reference(_sine, report.x, report.t[-1] - report.t[0],
                                         refine * nt, tau=tau)
    return T[::refine]


def ml_memory(lam: float = 1.0, nu: float = 0.5, tfinal: float = 1.0) -> EquationSpec:
    """Linear memory equation with the Mittag-Leffler kernel."""
    return EquationSpec(
        Memory(KernelSpec("mittag_leffler", lam=lam, nu=nu), 0.0), ic=_sine,
        bc_left=_zero, bc_right=_zero, tfinal=tfinal, label="ml_memory")


def ml_telegraph(lam: float = 1.0, nu: float = 0.5, tfinal: float = 1.0) -> EquationSpec:
    """Linear telegraph equation matching :func:`ml_memory`."""
    return EquationSpec(
        Telegraph(0.0, lam, nu), ic=_sine, bc_left=_zero, bc_right=_zero,
        tfinal=tfinal, label="ml_telegraph")


def barenblatt(m: float = 1.0, decades: float = 1.0, half_width: float = 2.0,
               ) -> tuple[EquationSpec, Oracle, BarenblattParams]:
    """Porous-medium problem started on the source solution at ``t = t0``."""
    p = BarenblattParams(m)
    t_start = p.t0

    def exact(x: Array, t: Array) -> Array:
        return barenblatt_eval(p, x, t)

    spec = EquationSpec(
        Classical(m), ic=lambda x: exact(x, t_start), bc_left=_zero, bc_right=_zero,
        domain=(-half_width, half_width), tstart=t_start,
        tfinal=(10.0**decades - 1.0) * t_start, label="barenblatt")
    return spec, exact, p


def edge_mask(report: SolverReport, p: BarenblattParams, margin: int = 5) -> Array:
    """Samples farther than *margin* cells from the free boundary."""
    dx = report.x[1] - report.x[0]
    front = p.front(report.t)[:, None]
    return np.abs(np.abs(report.x[None, :]) - front) > margin * dx
