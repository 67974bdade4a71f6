import json
import math
import pathlib

import numpy as np
import pytest
import sympy as sp

from fracheat import scenarios
from fracheat import subspace as ss
from fracheat.errors import (
    BlowUpError,
    CFLError,
    ConfigError,
    DomainError,
    NegativityWarning,
    NonlinearSolveError,
)
from fracheat.fracops import SampledFunction, TimeGrid, telegraph_apply
from fracheat.solvers import (
    Classical,
    Conduction,
    EquationSpec,
    KernelSpec,
    Memory,
    Telegraph,
    Wave,
    classical_telegraph_reference,
    convergence_study,
    grid_defect,
    is_monotone_decreasing,
    solve_fode_composite,
    solve_fode_multiterm,
    solve_pde,
    solve_reduced,
    verify_residual,
)
from fracheat.specfun import mittag_leffler

GOLDEN = json.loads((pathlib.Path(__file__).parent / "data" / "golden.json").read_text())


def _sine(x):
    return np.sin(np.pi * x)


def _zero(t):
    return 0.0 * np.asarray(t, dtype=float)


# {{{ spatial operator


@pytest.mark.parametrize("gamma,interface", [(0.0, "arithmetic"), (1.0, "arithmetic"),
                                             (2.5, "harmonic"), (1.5, "arithmetic")])
def test_conduction_jacobian(gamma, interface):
    x = np.linspace(0.0, 1.0, 21)
    T = 1.0 + 0.5 * np.sin(3 * x)
    cond = Conduction(x, gamma, interface)
    lower, diag, upper = cond.jacobian(T)
    dense = np.diag(diag) + np.diag(upper, 1) + np.diag(lower, -1)
    fd = np.empty_like(dense)
    for j in range(1, x.size - 1):
        e = np.zeros_like(T)
        e[j] = 1e-7
        fd[:, j - 1] = (cond.apply(T + e) - cond.apply(T - e)) / 2e-7
    assert np.allclose(dense, fd, rtol=1e-6, atol=1e-4)


def test_conduction_is_conservative():
    x = np.linspace(-1.0, 1.0, 41)
    cond = Conduction(x, 2.0)
    T = np.maximum(1.0 - x**2, 0.0) ** 2 + 0.1 * x
    # the interior sum telescopes to the two boundary fluxes
    p = cond.phi(T)
    flux = 0.5 * (p[:-1] + p[1:]) * np.diff(T)
    total = np.sum(cond.apply(T)) * cond.dx**2
    assert total == pytest.approx(flux[-1] - flux[0], abs=1e-14)


def test_conduction_second_order():
    errors = []
    for nx in (40, 80, 160):
        x = np.linspace(0.5, 1.5, nx + 1)
        T = x**2
        exact = (6 * x**2)[1:-1]  # F[x^2] for gamma = 1
        errors.append(np.max(np.abs(Conduction(x, 1.0).apply(T) - exact)))
    assert errors[0] / errors[1] == pytest.approx(4.0, rel=0.05)
    assert errors[1] / errors[2] == pytest.approx(4.0, rel=0.05)


# }}}


# {{{ fractional ODEs


def test_multiterm_homogeneous_matches_closed_form():
    g = TimeGrid.graded(5.0, 1024, 2.0)
    r = solve_fode_multiterm(lambda u: 0 * u, 1.0, 0.5, 1.0, 1.0, g)
    exact = g.nodes * mittag_leffler(0.5, 2.0, -g.nodes**0.5) + 1.0
    assert np.max(np.abs(r.solution[:, 0] - exact)) <= 1e-5


def test_multiterm_caputo_form_is_affine():
    g = TimeGrid.uniform(1.0, 64)
    r = solve_fode_multiterm(lambda u: 0 * u, 1.0, 0.5, 2.0, -1.0, g, form="caputo")
    assert np.max(np.abs(r.solution[:, 0] - (2.0 - g.nodes))) <= 1e-12


def test_multiterm_without_damping_is_exact():
    g = TimeGrid.uniform(1.0, 64)
    r = solve_fode_multiterm(lambda u: 0 * u, 0.0, 0.5, 0.0, 1.0, g)
    assert np.max(np.abs(r.solution[:, 0] - g.nodes)) <= 1e-14


def test_reduced_system_decouples():
    system = ss.reduce([ss.PowerExpr.parse(s) for s in ("1", "x", "x2")], 1, ss.telegraph())
    g = TimeGrid.graded(1.0, 256, 2.0)
    three = solve_reduced(system, [0.1, 0.0, 0.0], [0.0, 0.0, 0.0], g,
                          subs={ss.LAMBDA: 1, ss.NU: sp.Rational(1, 2)})
    one = solve_fode_multiterm(lambda u: 6 * u**2, 1.0, 0.5, 0.1, 0.0, g)
    assert three.names == ("f", "g", "h")
    assert np.max(np.abs(three.solution[:, 0] - one.solution[:, 0])) <= 1e-14
    assert np.all(three.solution[:, 1:] == 0.0)


def test_fixed_point_agrees_with_newton():
    g = TimeGrid.graded(1.0, 256, 2.0)
    a = solve_fode_multiterm(lambda u: 6 * u**2, 1.0, 0.5, 0.1, 0.0, g)
    b = solve_fode_multiterm(lambda u: 6 * u**2, 1.0, 0.5, 0.1, 0.0, g, method="fixed_point")
    assert np.max(np.abs(a.solution - b.solution)) <= 1e-11


def test_multiterm_blow_up():
    g = TimeGrid.uniform(3.0, 300)
    with pytest.raises((BlowUpError, NonlinearSolveError)):
        solve_fode_multiterm(lambda u: 6 * u**2, 1.0, 0.5, 1.0, 1.0, g)


def test_composite_constant_forcing():
    nu, c = 0.5, 2.0
    g = TimeGrid.uniform(1.0, 64)
    r = solve_fode_composite(lambda u: c + 0 * u, nu, 1.0, 0.5, g)
    exact = 1.0 + 0.5 * g.nodes + c * g.nodes ** (1 + nu) / math.gamma(2 + nu)
    assert np.max(np.abs(r.solution[:, 0] - exact)) <= 1e-13


def test_composite_affine():
    g = TimeGrid.uniform(1.0, 64)
    r = solve_fode_composite(lambda u: 0 * u, 0.5, [1.0, 2.0], [0.5, -1.0], g)
    expected = np.array([1.0, 2.0]) + g.nodes[:, None] * np.array([0.5, -1.0])
    assert np.max(np.abs(r.solution - expected)) <= 1e-14


def test_composite_quadratic_golden():
    ref = GOLDEN["composite_b"]
    times = np.array(ref["t"])

    def run(n):
        r = solve_fode_composite(lambda u: 6 * u**2, 0.5, 1.0, 0.0, TimeGrid.uniform(0.5, n))
        return np.interp(times, r.t, r.solution[:, 0])

    coarse, fine = run(1024), run(4096)
    # self-convergence pin and the independent series oracle
    assert np.max(np.abs(coarse - fine) / np.abs(fine)) <= 1e-3
    assert np.max(np.abs(coarse - ref["value"]) / np.abs(ref["value"])) <= 1e-3
    assert np.all(np.diff(coarse) > 0.0)


def test_composite_blow_up():
    with pytest.raises(BlowUpError):
        solve_fode_composite(lambda u: 6 * u**2, 0.5, 1.0, 0.0, TimeGrid.uniform(1.0, 400))


def test_composite_reduced_system():
    system = ss.reduce([ss.PowerExpr.parse("1"), ss.PowerExpr.parse("x2")], 1,
                       ss.caputo_composite())
    g = TimeGrid.uniform(0.3, 256)
    r = solve_reduced(system, [1.0, 0.5], [0.0, 0.0], g, subs={ss.NU: sp.Rational(1, 2)})
    b = solve_fode_composite(lambda u: 6 * u**2, 0.5, 0.5, 0.0, g)
    assert r.names == ("a", "b")
    assert np.max(np.abs(r.solution[:, 1] - b.solution[:, 0])) <= 1e-14


def test_fode_validation():
    g = TimeGrid.uniform(1.0, 16)
    with pytest.raises(DomainError):
        solve_fode_multiterm(lambda u: u, 1.0, 1.2, 0.0, 0.0, g)
    with pytest.raises(ConfigError):
        solve_fode_multiterm(lambda u: u, 1.0, 0.5, 0.0, 0.0, g, method="bisection")


# }}}


# {{{ lift of reduced systems


def test_reduced_system_lift():
    # the assembled field's PDE defect is the basis combination of the ODE
    # defects, up to the O(dx^2) error of the conservative x-stencil
    system = ss.reduce([ss.PowerExpr.parse(s) for s in ("1", "x", "x2")], 1, ss.telegraph())
    field_rhs, _ = system.vector_field({ss.LAMBDA: 1, ss.NU: sp.Rational(1, 2)})
    init = np.array([0.2, 0.1, 0.3])
    spec = EquationSpec(
        Telegraph(1.0, 1.0, 0.5), ic=lambda x: 0.2 * x**2 + 0.1 * x + 0.3,
        ic_rate=lambda x: 0.0 * x, bc_left=_zero, bc_right=_zero, time_grading=2.0)
    grid = spec.time_grid(256)
    r = solve_reduced(system, init, [0, 0, 0], grid, subs={ss.LAMBDA: 1, ss.NU: 0.5})

    U = r.solution
    ode = telegraph_apply(SampledFunction(grid, U), 1.0, 0.5, initial_slope=np.zeros(3)).values
    ode = ode - np.array([field_rhs(u) for u in U])

    x = spec.space_grid(200)
    basis = np.stack([x**2, x, np.ones_like(x)])
    values = U @ basis
    lifted = grid_defect(values, x, grid, spec)
    combined = np.abs(ode @ basis)[:, 1:-1]
    combined[grid.nodes < 0.1] = 0.0
    assert np.max(np.abs(lifted - combined)) <= 1e-3 * (1.0 + np.max(combined))


# }}}


# {{{ partial differential equations


def test_prop21_pde_refinement():
    spec, exact = scenarios.prop21()
    errors = [solve_pde(spec, nx, 10 * nx).max_error(exact) for nx in (25, 50, 100)]
    assert errors[0] / errors[1] >= 1.5 and errors[1] / errors[2] >= 1.5
    assert errors[-1] <= 1e-5


def test_linear_wave_against_mittag_leffler():
    nu = 0.5
    spec = EquationSpec(Wave(0.0, nu), ic=_sine, bc_left=_zero, bc_right=_zero,
                        time_grading=2.0)

    def exact(x, t):
        return np.sin(np.pi * x) * mittag_leffler(1 + nu, 1.0, -(np.pi**2) * t ** (1 + nu))

    errors = [solve_pde(spec, nx, 4 * nx).max_error(exact) for nx in (20, 40, 80)]
    assert errors[0] / errors[1] >= 1.5 and errors[1] / errors[2] >= 1.5
    assert errors[-1] <= 1e-3


def test_classical_linear_temporal_order():
    # m = 0 is the heat equation; with a fine x-grid the error is the
    # implicit Euler time error
    spec = EquationSpec(Classical(0.0), ic=_sine, bc_left=_zero, bc_right=_zero, tfinal=0.1)

    def exact(x, t):
        return np.exp(-(np.pi**2) * t) * np.sin(np.pi * x)

    xs = np.linspace(0.0, 1.0, 401)
    semi = 4.0 / (xs[1] - xs[0]) ** 2 * np.sin(np.pi * (xs[1] - xs[0]) / 2) ** 2

    def discrete_exact(x, t):
        return np.exp(-semi * t) * np.sin(np.pi * x)

    errors = []
    for nt in (10, 20, 40, 80):
        r = solve_pde(spec, 400, nt)
        errors.append(r.max_error(discrete_exact))
    orders = [math.log2(a / b) for a, b in zip(errors, errors[1:])]
    assert all(0.85 <= o <= 1.15 for o in orders)
    # dt = 1.25e-3 leaves a first-order time error of this size
    assert r.max_error(exact) <= 3e-3


def test_cattaneo_equivalence_small():
    spec = scenarios.cattaneo(1.0)
    r = solve_pde(spec, 40, 200)
    ref = scenarios.cattaneo_reference(r, 1.0)
    assert np.max(np.abs(r.solution - ref)) <= 1e-3


def test_mittag_leffler_memory_equals_telegraph_small():
    a = solve_pde(scenarios.ml_memory(), 30, 150)
    b = solve_pde(scenarios.ml_telegraph(), 30, 150)
    assert np.max(np.abs(a.solution - b.solution)) <= 1e-3


def test_barenblatt_positivity_and_mass():
    spec, exact, p = scenarios.barenblatt(1.0, decades=1.0)
    r = solve_pde(spec, 100, 200)
    assert r.clip_events == 0
    assert np.min(r.solution) >= -1e-12
    assert r.diagnostics["max_mass_drift_per_step"] <= 1e-8
    mask = scenarios.edge_mask(r, p)
    assert r.max_error(exact, mask) <= 2e-2


def test_negative_data_warns_and_counts_clips():
    spec = EquationSpec(Classical(1.0), ic=lambda x: np.sin(2 * np.pi * x),
                        bc_left=_zero, bc_right=_zero, tfinal=0.01)
    with pytest.warns(NegativityWarning):
        r = solve_pde(spec, 20, 5)
    assert r.clip_events > 0


def test_memory_kernels_build():
    for ks in (KernelSpec("exponential", tau=0.5), KernelSpec("mittag_leffler", lam=1, nu=0.5),
               KernelSpec("power_law", nu=0.3),
               KernelSpec("custom", lags=(0.0, 1.0, 2.0), values=(1.0, 0.5, 0.25))):
        spec = EquationSpec(Memory(ks, 0.0), ic=_sine, bc_left=_zero, bc_right=_zero)
        r = solve_pde(spec, 10, 20)
        assert np.all(np.isfinite(r.solution))
    with pytest.raises(ConfigError):
        KernelSpec("gaussian").build()


def test_solver_is_deterministic():
    spec, _ = scenarios.prop21()
    a = solve_pde(spec, 20, 100).to_json()
    b = solve_pde(spec, 20, 100).to_json()
    assert a == b


def test_cfl_guard():
    x = np.linspace(0.0, 1.0, 101)
    with pytest.raises(CFLError):
        classical_telegraph_reference(_sine, x, 1.0, 10)


def test_spec_validation():
    with pytest.raises(ConfigError):
        EquationSpec(Classical(1.0), _sine, _zero, _zero, domain=(1.0, 0.0))
    with pytest.raises(ConfigError):
        EquationSpec(Classical(1.0), _sine, _zero, _zero, interface="geometric")
    with pytest.raises(DomainError):
        EquationSpec(Telegraph(-1.0), _sine, _zero, _zero)
    with pytest.raises(DomainError):
        Telegraph(1.0, 1.0, 1.0)


# }}}


# {{{ verification harness


def test_verify_prop21_converges():
    spec, exact = scenarios.prop21()
    rep = verify_residual(exact, spec)
    assert rep.converging
    assert rep.defects[-1] < rep.defects[0]


def test_verify_negative_control():
    spec, wrong = scenarios.negative_control()
    rep = verify_residual(wrong, spec)
    assert not rep.converging
    assert min(rep.defects) >= 0.5


def test_verify_solver_report():
    spec, _ = scenarios.prop21()
    r = solve_pde(spec, 50, 500)
    rep = verify_residual(r, spec)
    assert rep.defects[0] <= 1e-2


def test_verify_quadrature_route():
    spec, exact = scenarios.wave(2.0, 0.5)
    rep = verify_residual(exact, spec, resolutions=(2e-2, 1e-2, 5e-3), route="quadrature",
                          points=[(1.0, 1.0), (0.7, 1.3)])
    assert rep.converging


def test_verify_rejects_unknown_route():
    spec, exact = scenarios.prop21()
    with pytest.raises(ConfigError):
        verify_residual(exact, spec, route="spectral")


def test_convergence_study_threads_preserve_order():
    spec, exact = scenarios.prop21()

    def run(nx):
        return 1.0 / nx, solve_pde(spec, nx, 5 * nx).max_error(exact)

    seq = convergence_study(run, [10, 20, 40])
    par = convergence_study(run, [10, 20, 40], workers=3)
    assert seq == par
    assert is_monotone_decreasing(seq, 1.5)
    assert not is_monotone_decreasing(list(reversed(seq)))


# }}}
