r"""Solvers for the reduced fractional ODEs and the 1-D memory heat PDEs.

Every time-nonlocal model is integrated in its Volterra form. With
:math:`u = T - T(\cdot, 0)`, :math:`T_1 = \partial_t T(\cdot, 0)` and
:math:`R = F[T] + g`:

=========== ============================================================
telegraph   :math:`u + \lambda^\nu J^\nu u = t T_1 + J^2 R`
wave        :math:`u = t T_1 + J^{1 + \nu} R`
memory      :math:`u = \tilde K * F[T] + J^1 g`, :math:`\tilde K = \int_0^s K`
classical   implicit Euler for :math:`T_t = F[T] + g`
=========== ============================================================

The history integrals use the product-trapezoidal weights of
:mod:`fracheat.fracops`, and each step solves one nonlinear system by Newton's
method. :math:`F[T] = \partial_x (T^\gamma \partial_x T)` is discretized
conservatively with the interface conductivity averaged from the two adjacent
nodes, so every Newton Jacobian is tridiagonal.

The telegraph operator defaults to the flux form
:math:`\frac{d}{dt} J^\nu \partial_t T`, which is what the Mittag-Leffler
memory kernel produces. The Caputo form differs by
:math:`T_1 t^{\nu - 1} / \Gamma(\nu)` and is available as ``form="caputo"``.
History before :math:`t = 0` is taken to be quiescent.
"""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, NamedTuple, Sequence

import numpy as np
from scipy import integrate, linalg

from fracheat import fracops
from fracheat.errors import (
    BlowUpError,
    CFLError,
    ConfigError,
    DomainError,
    NegativityWarning,
    NonlinearSolveError,
)
from fracheat.fracops import Kernel, PowerKernel, SampledFunction, TimeGrid
from fracheat.solutions import real_power
from fracheat.specfun import rgamma

Array = np.ndarray

#: magnitude treated as finite-time blow-up
BLOWUP = 1.0e12
NEWTON_RTOL = 1.0e-12
NEWTON_MAXIT = 50
#: minimum defect reduction per refinement counted as convergence
CONVERGENCE_FACTOR = 1.5


# {{{ model description


@dataclass(frozen=True)
class KernelSpec:
    """Serializable choice of memory kernel."""

    kind: str = "exponential"
    tau: float = 1.0
    lam: float = 1.0
    nu: float = 0.5
    lags: tuple[float, ...] = ()
    values: tuple[float, ...] = ()

    def build(self) -> Kernel:
        if self.kind == "exponential":
            return fracops.exponential(self.tau)
        if self.kind == "mittag_leffler":
            return fracops.mittag_leffler_kernel(self.lam, self.nu)
        if self.kind == "power_law":
            return fracops.power_law(self.nu)
        if self.kind == "custom":
            return fracops.custom(np.array(self.lags), np.array(self.values))
        raise ConfigError(f"unknown kernel kind: {self.kind!r}")


@dataclass(frozen=True)
class Telegraph:
    gamma: float = 1.0
    lam: float = 1.0
    nu: float = 0.5
    form: str = "flux"

    def __post_init__(self) -> None:
        if not 0.0 < self.nu < 1.0:
            raise DomainError(f"nu must lie in (0, 1): {self.nu!r}")
        if self.lam < 0.0:
            raise DomainError(f"lambda must be non-negative: {self.lam!r}")
        if self.form not in ("flux", "caputo"):
            raise ConfigError(f"unknown telegraph form: {self.form!r}")


@dataclass(frozen=True)
class Wave:
    gamma: float = 1.0
    nu: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 < self.nu < 1.0:
            raise DomainError(f"nu must lie in (0, 1): {self.nu!r}")


@dataclass(frozen=True)
class Memory:
    kernel: KernelSpec = field(default_factory=KernelSpec)
    gamma: float = 0.0


@dataclass(frozen=True)
class Classical:
    m: float = 1.0

    @property
    def gamma(self) -> float:
        return self.m


Model = Telegraph | Wave | Memory | Classical


@dataclass(frozen=True)
class EquationSpec:
    """One model equation on :math:`[x_L, x_R] \\times [t_0, t_0 + T]` with
    Dirichlet data.

    *ic* and *ic_rate* map ``x`` to :math:`T(x, t_0)` and
    :math:`\\partial_t T(x, t_0)`; *bc_left*/*bc_right* map ``t`` to boundary
    values; *source* maps ``(x, t)`` to :math:`g`. *time_grading* is the
    exponent of the graded time mesh (``1`` is uniform).
    """

    model: Model
    ic: Callable[[Array], Array]
    bc_left: Callable[[Array], Array]
    bc_right: Callable[[Array], Array]
    domain: tuple[float, float] = (0.0, 1.0)
    tfinal: float = 1.0
    tstart: float = 0.0
    ic_rate: Callable[[Array], Array] | None = None
    source: Callable[[Array, Array], Array] | None = None
    time_grading: float = 1.0
    interface: str = "arithmetic"
    label: str = ""

    def __post_init__(self) -> None:
        xl, xr = self.domain
        if not xl < xr:
            raise ConfigError(f"empty domain: {self.domain!r}")
        if not self.tfinal > 0.0:
            raise ConfigError(f"final time must be positive: {self.tfinal!r}")
        if self.time_grading < 1.0:
            raise ConfigError(f"time grading must be >= 1: {self.time_grading!r}")
        if self.interface not in ("arithmetic", "harmonic"):
            raise ConfigError(f"unknown interface average: {self.interface!r}")
        if self.model.gamma == -1.0:
            raise DomainError("gamma = -1 is excluded")

    def time_grid(self, nt: int) -> TimeGrid:
        end = self.tstart + self.tfinal
        if self.time_grading == 1.0:
            return TimeGrid.uniform(end, nt, tstart=self.tstart)
        return TimeGrid.graded(end, nt, self.time_grading, tstart=self.tstart)

    def space_grid(self, nx: int) -> Array:
        if nx < 2:
            raise ConfigError(f"need at least 2 space intervals: {nx!r}")
        return np.linspace(self.domain[0], self.domain[1], nx + 1)

    def to_dict(self) -> dict[str, Any]:
        model = asdict(self.model)
        model["type"] = type(self.model).__name__.lower()
        return {
            "model": model,
            "domain": list(self.domain),
            "tstart": self.tstart,
            "tfinal": self.tfinal,
            "time_grading": self.time_grading,
            "interface": self.interface,
            "label": self.label,
            "has_source": self.source is not None,
        }


# }}}


# {{{ spatial operator


class Conduction:
    r"""Conservative three-point discretization of
    :math:`\partial_x (T^\gamma \partial_x T)` on a uniform grid.

    With *clip* (the solver default) negative values are replaced by zero
    inside :math:`T^\gamma`; without it the real odd power is used, which
    exists when :math:`\gamma` is a ratio with odd denominator.
    """

    def __init__(
        self, x: Array, gamma: float, interface: str = "arithmetic", clip: bool = True
    ) -> None:
        self.x = np.asarray(x, dtype=float)
        self.dx = float(self.x[1] - self.x[0])
        if not np.allclose(np.diff(self.x), self.dx, rtol=1e-10, atol=0):
            raise ConfigError("space grid must be uniform")
        self.gamma = float(gamma)
        self.harmonic = interface == "harmonic"
        self.clip = clip

    def phi(self, T: Array) -> Array:
        if self.gamma == 0.0:
            return np.ones_like(T)
        if not self.clip:
            return np.asarray(real_power(T, self.gamma)) * np.ones_like(T)
        return np.maximum(T, 0.0) ** self.gamma

    def dphi(self, T: Array) -> Array:
        if self.gamma == 0.0:
            return np.zeros_like(T)
        if not self.clip:
            return self.gamma * np.asarray(real_power(T, self.gamma - 1.0)) * np.ones_like(T)
        tp = np.maximum(T, 0.0)
        with np.errstate(divide="ignore"):
            out = self.gamma * tp ** (self.gamma - 1.0)
        return np.where(tp > 0.0, out, 0.0)

    def _interface(self, pa: Array, pb: Array) -> tuple[Array, Array, Array]:
        """Average and its partials with respect to both sides."""
        if not self.harmonic:
            return 0.5 * (pa + pb), np.full_like(pa, 0.5), np.full_like(pa, 0.5)
        s = pa + pb
        safe = np.where(s > 0, s, 1.0)
        k = np.where(s > 0, 2.0 * pa * pb / safe, 0.0)
        return k, np.where(s > 0, 2 * pb**2 / safe**2, 0.0), np.where(s > 0, 2 * pa**2 / safe**2, 0.0)

    def apply(self, T: Array) -> Array:
        """Interior values of the operator; *T* includes both boundary nodes."""
        p = self.phi(T)
        k, _, _ = self._interface(p[:-1], p[1:])
        flux = k * np.diff(T)
        return np.diff(flux) / self.dx**2

    def jacobian(self, T: Array) -> tuple[Array, Array, Array]:
        """Sub-, main and super-diagonal with respect to interior nodes."""
        p, dp = self.phi(T), self.dphi(T)
        k, ka, kb = self._interface(p[:-1], p[1:])
        d = np.diff(T)
        # flux_j = k_j (T_{j+1} - T_j) between nodes j and j+1
        dflux_left = -k + ka * dp[:-1] * d
        dflux_right = k + kb * dp[1:] * d

        h2 = self.dx**2
        diag = (dflux_left[1:] - dflux_right[:-1]) / h2
        upper = dflux_right[1:-1] / h2
        lower = -dflux_left[1:-1] / h2
        return lower, diag, upper


# }}}


# {{{ reports


@dataclass
class SolverReport:
    """Trajectory plus diagnostics; ``solution[n]`` is the state at ``t[n]``."""

    t: Array
    solution: Array
    residual_norms: Array
    params: dict[str, Any]
    x: Array | None = None
    names: tuple[str, ...] | None = None
    iterations: Array | None = None
    clip_events: int = 0
    convergence: list[tuple[float, float]] | None = None
    diagnostics: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.solution.shape[0] != self.t.size:
            raise ValueError("solution rows must match time nodes")
        if not np.all(np.isfinite(self.residual_norms)):
            raise ValueError("residual norms must be finite")

    def max_error(
        self,
        exact: Callable[[Array, Array], Array],
        mask: Array | None = None,
    ) -> float:
        """Max-norm error against ``exact(x, t)`` over the space-time samples
        selected by *mask*."""
        if self.x is None:
            ref = np.asarray(exact(None, self.t[:, None]), dtype=float)
        else:
            ref = exact(self.x[None, :], self.t[:, None])
        err = np.abs(self.solution - ref)
        if mask is not None:
            err = err[mask]
        return float(np.max(err))

    def rows(self) -> list[tuple[float, float, float]]:
        """Long-format ``(t, x, T)`` samples."""
        xs = self.x if self.x is not None else np.arange(self.solution.shape[1], dtype=float)
        return [(float(t), float(x), float(v))
                for t, row in zip(self.t, self.solution)
                for x, v in zip(xs, row)]

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "params": self.params,
            "t": self.t.tolist(),
            "residual_norms": self.residual_norms.tolist(),
            "clip_events": self.clip_events,
            "diagnostics": self.diagnostics,
        }
        if self.x is not None:
            out["x"] = self.x.tolist()
        if self.names is not None:
            out["names"] = list(self.names)
        if self.iterations is not None:
            out["iterations"] = self.iterations.tolist()
        if self.convergence is not None:
            out["convergence"] = [list(c) for c in self.convergence]
        out["solution"] = self.solution.tolist()
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


# }}}


# {{{ nonlinear step


def _guard(v: Array, where: str) -> None:
    if not np.all(np.isfinite(v)) or np.max(np.abs(v)) > BLOWUP:
        raise BlowUpError(f"solution exceeded {BLOWUP:g} in {where}")


def _newton_banded(
    cond: Conduction,
    guess: Array,
    base: Array,
    a: float,
    b: float,
    c: Array,
    bl: float,
    br: float,
) -> tuple[Array, float, int]:
    r"""Solve :math:`a (v - base) - b F[v] = c` for the interior values *v*."""
    v = guess.copy()
    full = np.empty(v.size + 2)
    full[0], full[-1] = bl, br
    for it in range(1, NEWTON_MAXIT + 1):
        full[1:-1] = v
        g = a * (v - base) - b * cond.apply(full) - c
        lo, di, up = cond.jacobian(full)
        ab = np.zeros((3, v.size))
        ab[0, 1:] = -b * up
        ab[1] = a - b * di
        ab[2, :-1] = -b * lo
        delta = linalg.solve_banded((1, 1), ab, g)
        v -= delta
        _guard(v, "Newton iteration")
        if np.max(np.abs(delta)) <= NEWTON_RTOL * max(1.0, np.max(np.abs(v))):
            full[1:-1] = v
            res = a * (v - base) - b * cond.apply(full) - c
            return v, float(np.max(np.abs(res))), it
    raise NonlinearSolveError(f"Newton did not converge in {NEWTON_MAXIT} iterations")


# }}}


# {{{ PDE solvers


def _weights(grid: TimeGrid, kernel: Kernel) -> Array:
    return fracops.convolution_weights(grid, kernel)


def solve_pde(spec: EquationSpec, nx: int, nt: int) -> SolverReport:
    """Solve *spec* with *nx* space and *nt* time intervals."""
    x = spec.space_grid(nx)
    grid = spec.time_grid(nt)
    t = grid.nodes
    model = spec.model
    cond = Conduction(x, model.gamma, spec.interface)

    xi = x[1:-1]
    T = np.empty((nt + 1, nx + 1))
    T[0] = np.asarray(spec.ic(x), dtype=float) * np.ones_like(x)
    left = np.asarray(spec.bc_left(t), dtype=float) * np.ones_like(t)
    right = np.asarray(spec.bc_right(t), dtype=float) * np.ones_like(t)
    T[:, 0], T[:, -1] = left, right

    base = T[0, 1:-1].copy()
    rate = np.zeros_like(xi) if spec.ic_rate is None else np.asarray(spec.ic_rate(xi), float) * np.ones_like(xi)
    if spec.source is None:
        gsrc = np.zeros((nt + 1, xi.size))
    else:
        gsrc = np.asarray(spec.source(xi[None, :], t[:, None]), dtype=float) * np.ones((nt + 1, xi.size))

    tau = t - t[0]
    u = np.zeros((nt + 1, xi.size))       # T - T(., t0) at interior nodes
    hist = np.zeros((nt + 1, xi.size))    # history integrand
    hist[0] = cond.apply(T[0]) + (0.0 if isinstance(model, Memory) else gsrc[0])

    residuals = np.zeros(nt + 1)
    iters = np.zeros(nt + 1, dtype=int)
    clips = 0

    if isinstance(model, Telegraph):
        lnu = model.lam**model.nu
        w_mem = _weights(grid, PowerKernel(model.nu))
        w_src = _weights(grid, PowerKernel(2.0))
        drift = tau[:, None] * rate[None, :]
        if model.form == "caputo":
            drift = drift + lnu * tau[:, None] ** (1 + model.nu) * rgamma(2 + model.nu) * rate[None, :]
    elif isinstance(model, Wave):
        lnu = 0.0
        w_mem = None
        w_src = _weights(grid, PowerKernel(1.0 + model.nu))
        drift = tau[:, None] * rate[None, :]
    elif isinstance(model, Memory):
        lnu = 0.0
        w_mem = None
        w_src = _weights(grid, model.kernel.build().integrated())
        # the source enters through J^1 g
        drift = _weights(grid, PowerKernel(1.0)) @ gsrc
    elif isinstance(model, Classical):
        w_src = None
    else:
        raise ConfigError(f"unknown model: {model!r}")

    for n in range(1, nt + 1):
        if isinstance(model, Classical):
            dt = t[n] - t[n - 1]
            a, b = 1.0, dt
            c = u[n - 1] + dt * gsrc[n]
        else:
            a = 1.0 + lnu * (w_mem[n, n] if w_mem is not None else 0.0)
            b = w_src[n, n]
            c = drift[n] + w_src[n, :n] @ hist[:n]
            if not isinstance(model, Memory):
                c = c + b * gsrc[n]
            if w_mem is not None:
                c = c - lnu * (w_mem[n, :n] @ u[:n])

        guess = T[n - 1, 1:-1]
        v, res, it = _newton_banded(cond, guess, base, a, b, c, left[n], right[n])
        T[n, 1:-1] = v
        u[n] = v - base
        fv = cond.apply(T[n])
        hist[n] = fv if isinstance(model, Memory) else fv + gsrc[n]
        residuals[n], iters[n] = res, it
        if model.gamma != 0.0:
            clips += int(np.count_nonzero(v < 0.0))

    if clips:
        warnings.warn(f"{clips} negative values clipped in T**gamma", NegativityWarning,
                      stacklevel=2)

    diagnostics: dict[str, Any] = {}
    if isinstance(model, Classical):
        mass = cond.dx * (0.5 * (T[:, 0] + T[:, -1]) + T[:, 1:-1].sum(axis=1))
        diagnostics["mass"] = mass.tolist()
        diagnostics["max_mass_drift_per_step"] = float(np.max(np.abs(np.diff(mass))))

    params = spec.to_dict()
    params.update(nx=nx, nt=nt)
    return SolverReport(t=t, solution=T, residual_norms=residuals, params=params, x=x,
                        iterations=iters, clip_events=clips, diagnostics=diagnostics)


def classical_telegraph_reference(
    ic: Callable[[Array], Array],
    x: Array,
    tfinal: float,
    nt: int,
    tau: float = 1.0,
    bc: tuple[float, float] = (0.0, 0.0),
) -> tuple[Array, Array]:
    r"""Explicit three-level scheme for
    :math:`\tau T_{tt} + T_t = T_{xx}` with :math:`T_t(x, 0) = 0`.

    Independent of the memory machinery; used as a reference solution.

    :raises CFLError: if :math:`\Delta t > \sqrt{\tau} \Delta x`.
    :returns: ``(t, T)`` with ``T[n]`` the state at ``t[n]``.
    """
    x = np.asarray(x, dtype=float)
    dx = x[1] - x[0]
    dt = tfinal / nt
    if dt > math.sqrt(tau) * dx:
        raise CFLError(f"dt = {dt:.3g} exceeds the stability limit {math.sqrt(tau) * dx:.3g}")

    def lap(v: Array) -> Array:
        out = np.zeros_like(v)
        out[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / dx**2
        return out

    T = np.empty((nt + 1, x.size))
    T[0] = ic(x)
    T[0, 0], T[0, -1] = bc
    # Taylor start using T_tt(0) = T_xx(0) / tau
    T[1] = T[0] + 0.5 * dt**2 * lap(T[0]) / tau
    T[1, 0], T[1, -1] = bc

    cp = tau / dt**2 + 0.5 / dt
    cm = tau / dt**2 - 0.5 / dt
    for n in range(1, nt):
        T[n + 1] = (2.0 * tau / dt**2 * T[n] - cm * T[n - 1] + lap(T[n])) / cp
        T[n + 1, 0], T[n + 1, -1] = bc

    return np.linspace(0.0, tfinal, nt + 1), T


# }}}


# {{{ fractional ODE solvers


def _fd_jacobian(f: Callable[[Array], Array], u: Array) -> Array:
    f0 = f(u)
    jac = np.empty((f0.size, u.size))
    for i in range(u.size):
        h = 1.0e-7 * max(1.0, abs(u[i]))
        e = np.zeros_like(u)
        e[i] = h
        jac[:, i] = (f(u + e) - f0) / h
    return jac


def _vector(u: Any) -> Array:
    return np.atleast_1d(np.asarray(u, dtype=float))


def _fode_step(
    rhs: Callable[[Array], Array],
    jac: Callable[[Array], Array],
    guess: Array,
    a: float,
    b: float,
    c: Array,
    method: str,
) -> tuple[Array, float, int]:
    """Solve ``a w - b f(u0 + w) = c`` (expressed directly in the state)."""
    v = guess.copy()
    for it in range(1, NEWTON_MAXIT + 1):
        g = a * v - b * rhs(v) - c
        if method == "newton":
            delta = np.linalg.solve(a * np.eye(v.size) - b * jac(v), g)
        else:
            delta = g / a
        v = v - delta
        _guard(v, "fractional ODE step")
        if np.max(np.abs(delta)) <= NEWTON_RTOL * max(1.0, np.max(np.abs(v))):
            return v, float(np.max(np.abs(a * v - b * rhs(v) - c))), it
    raise NonlinearSolveError(f"{method} iteration did not converge in {NEWTON_MAXIT} steps")


def solve_fode_multiterm(
    rhs: Callable[[Array], Array],
    lam: float,
    nu: float,
    init: Any,
    slopes: Any,
    grid: TimeGrid,
    jac: Callable[[Array], Array] | None = None,
    source: Callable[[Array], Array] | None = None,
    form: str = "flux",
    method: str = "newton",
    names: Sequence[str] | None = None,
) -> SolverReport:
    r"""Solve :math:`u'' + \lambda^\nu D^{2 - \nu} u = f(u) + s(t)`.

    :arg rhs: vector field ``f(u) -> array``.
    :arg source: optional explicit forcing ``s(t) -> array`` (vectorized in t).
    :arg method: ``"newton"`` or ``"fixed_point"`` per-step iteration.
    """
    if not 0.0 < nu < 1.0:
        raise DomainError(f"nu must lie in (0, 1): {nu!r}")
    if lam < 0.0:
        raise DomainError(f"lambda must be non-negative: {lam!r}")
    if form not in ("flux", "caputo"):
        raise ConfigError(f"unknown telegraph form: {form!r}")
    if method not in ("newton", "fixed_point"):
        raise ConfigError(f"unknown iteration: {method!r}")

    u0, u1 = _vector(init), _vector(slopes) * np.ones_like(_vector(init))
    t = grid.nodes
    tau = t - t[0]
    lnu = lam**nu

    w_mem = _weights(grid, PowerKernel(nu))
    w_src = _weights(grid, PowerKernel(2.0))
    src = np.zeros((t.size, u0.size)) if source is None else \
        np.asarray(source(t), dtype=float).reshape(u0.size, -1).T * np.ones((t.size, u0.size))
    drift = tau[:, None] * u1[None, :]
    if form == "caputo":
        drift = drift + lnu * tau[:, None] ** (1 + nu) * rgamma(2 + nu) * u1[None, :]

    def frhs(v: Array) -> Array:
        return _vector(rhs(v))

    fjac = (lambda v: np.atleast_2d(jac(v))) if jac is not None else (lambda v: _fd_jacobian(frhs, v))

    U = np.empty((t.size, u0.size))
    U[0] = u0
    R = np.empty_like(U)
    R[0] = frhs(u0) + src[0]
    residuals = np.zeros(t.size)
    iters = np.zeros(t.size, dtype=int)

    for n in range(1, t.size):
        a = 1.0 + lnu * w_mem[n, n]
        b = w_src[n, n]
        c = (drift[n] - lnu * (w_mem[n, :n] @ (U[:n] - u0)) + w_src[n, :n] @ R[:n]
             + b * src[n] + a * u0)
        v, residuals[n], iters[n] = _fode_step(frhs, fjac, U[n - 1], a, b, c, method)
        U[n] = v
        R[n] = frhs(v) + src[n]

    params = {"model": "fode_multiterm", "lambda": lam, "nu": nu, "form": form,
              "init": u0.tolist(), "slopes": u1.tolist(), "nt": grid.n,
              "grading": grid.grading, "method": method}
    return SolverReport(t=t, solution=U, residual_norms=residuals, params=params,
                        names=tuple(names) if names else None, iterations=iters)


def solve_fode_composite(
    rhs: Callable[[Array], Array],
    nu: float,
    init: Any,
    slopes: Any,
    grid: TimeGrid,
    source: Callable[[Array], Array] | None = None,
    names: Sequence[str] | None = None,
    corrections: int = 1,
) -> SolverReport:
    r"""Solve :math:`D^\nu_C u' = f(u) + s(t)` by the fractional Adams method.

    The equivalent integral equation
    :math:`u = u_0 + t u_1 + J^{1 + \nu} [f(u) + s]` is advanced with a
    product-rectangle predictor and *corrections* product-trapezoid
    corrector sweeps (``1`` is the classical PECE scheme).
    """
    if not 0.0 < nu < 1.0:
        raise DomainError(f"nu must lie in (0, 1): {nu!r}")
    u0, u1 = _vector(init), _vector(slopes) * np.ones_like(_vector(init))
    t = grid.nodes
    tau = t - t[0]

    kernel = PowerKernel(1.0 + nu)
    w_trap = _weights(grid, kernel)
    i0, _ = fracops._interval_moments(grid, kernel)
    w_rect = np.zeros_like(w_trap)
    w_rect[1:, :-1] = i0

    src = np.zeros((t.size, u0.size)) if source is None else \
        np.asarray(source(t), dtype=float).reshape(u0.size, -1).T * np.ones((t.size, u0.size))

    def frhs(v: Array) -> Array:
        return _vector(rhs(v))

    U = np.empty((t.size, u0.size))
    U[0] = u0
    R = np.empty_like(U)
    R[0] = frhs(u0) + src[0]
    residuals = np.zeros(t.size)

    for n in range(1, t.size):
        base = u0 + tau[n] * u1
        v = base + w_rect[n, :n] @ R[:n]
        _guard(v, "predictor")
        hist = base + w_trap[n, :n] @ R[:n]
        for _ in range(corrections):
            v = hist + w_trap[n, n] * (frhs(v) + src[n])
            _guard(v, "corrector")
        U[n] = v
        R[n] = frhs(v) + src[n]
        residuals[n] = float(np.max(np.abs(v - hist - w_trap[n, n] * R[n])))

    params = {"model": "fode_composite", "nu": nu, "init": u0.tolist(),
              "slopes": u1.tolist(), "nt": grid.n, "grading": grid.grading,
              "corrections": corrections}
    return SolverReport(t=t, solution=U, residual_norms=residuals, params=params,
                        names=tuple(names) if names else None)


def solve_reduced(
    system: Any,
    init: Any,
    slopes: Any,
    grid: TimeGrid,
    subs: dict | None = None,
    **kwargs: Any,
) -> SolverReport:
    """Dispatch a :class:`~fracheat.subspace.ReducedSystem` to the matching
    ODE solver. Symbolic parameters are replaced through *subs*."""
    import sympy as sp

    op = system.time_operator
    f, j = system.vector_field(subs)
    names = [str(u) for u in system.unknowns]
    source = None
    if system.source is not None:
        exprs = [sp.sympify(s).subs(subs or {}) for s in system.source]
        funcs = [sp.lambdify(system.t, e, "numpy") for e in exprs]

        def source(tv: Array) -> Array:
            tv = np.asarray(tv, dtype=float)
            safe = np.where(tv > 0, tv, np.nan)
            vals = [np.nan_to_num(fn(safe) * np.ones_like(tv), nan=0.0) for fn in funcs]
            return np.array(vals)

    def num(v: Any) -> float:
        return float(sp.sympify(v).subs(subs or {}))

    if op.kind == "telegraph":
        return solve_fode_multiterm(f, num(op.lam), num(op.nu), init, slopes, grid,
                                    jac=j, source=source, names=names, **kwargs)
    return solve_fode_composite(f, num(op.nu), init, slopes, grid, source=source,
                                names=names, **kwargs)


# }}}


# {{{ residual verification


class VerifyReport(NamedTuple):
    route: str
    #: (nx, nt) pairs for the grid route, finite-difference steps otherwise
    resolutions: list[Any]
    defects: list[float]
    #: successive log2 ratios of the defects
    slopes: list[float]
    #: every refinement reduced the defect by at least CONVERGENCE_FACTOR
    converging: bool

    def to_dict(self) -> dict[str, Any]:
        return self._asdict()


def _slopes(defects: Sequence[float]) -> list[float]:
    out = []
    for a, b in zip(defects[:-1], defects[1:]):
        out.append(float(math.log2(a / b)) if a > 0 and b > 0 else math.nan)
    return out


def _time_operator(spec: EquationSpec, f: SampledFunction, rate: Array | None) -> Array:
    model = spec.model
    if isinstance(model, Telegraph):
        return fracops.telegraph_apply(f, model.lam, model.nu, form=model.form,
                                       initial_slope=rate).values
    if isinstance(model, Wave):
        return fracops.caputo_high(f, 1.0 + model.nu, initial_slope=rate).values
    if isinstance(model, Classical):
        return np.gradient(f.values, f.t, axis=0, edge_order=2)
    raise ConfigError("grid route supports telegraph, wave and classical models")


def grid_defect(
    values: Array,
    x: Array,
    grid: TimeGrid,
    spec: EquationSpec,
    t_window: float = 0.1,
) -> Array:
    """Nodewise ``|time operator - F - g|`` on interior nodes, zero for
    ``t < t_start + t_window * T``."""
    cond = Conduction(x, spec.model.gamma, spec.interface, clip=False)
    rate = None if spec.ic_rate is None else np.asarray(spec.ic_rate(x), float) * np.ones_like(x)
    lhs = _time_operator(spec, SampledFunction(grid, values), rate)[:, 1:-1]
    rhs = np.array([cond.apply(row) for row in values])
    if spec.source is not None:
        rhs = rhs + spec.source(x[None, 1:-1], grid.nodes[:, None])
    defect = np.abs(lhs - rhs)
    defect[grid.nodes < spec.tstart + t_window * spec.tfinal] = 0.0
    return defect


def _rl_integral_quad(func: Callable[[float], float], t: float, order: float) -> float:
    """:math:`J^{order} f(t)` for *f* with an integrable singularity at 0."""
    half = 0.5 * t
    opts = {"epsabs": 1.0e-14, "epsrel": 1.0e-13, "limit": 200}
    head, _ = integrate.quad(lambda s: (t - s) ** (order - 1.0) * func(s), 0.0, half, **opts)
    tail, _ = integrate.quad(func, half, t, weight="alg", wvar=(0.0, order - 1.0), **opts)
    return (head + tail) * rgamma(order)


def quadrature_defect(
    solution: Callable[[Array, Array], Array],
    spec: EquationSpec,
    delta: float,
    points: Sequence[tuple[float, float]],
) -> float:
    r"""Max defect over *points* with the time operator in Riemann-Liouville
    form :math:`\partial_t^2 J^{\kappa}`, integrals by adaptive quadrature
    and derivatives by central differences of step *delta*.

    This form agrees with the power rule on :math:`t^\beta`,
    :math:`\beta > -1`, and so applies to solutions singular at :math:`t = 0`
    where Caputo integrals diverge.
    """
    model = spec.model
    if isinstance(model, Telegraph):
        lnu, kappa = model.lam**model.nu, model.nu
    elif isinstance(model, Wave):
        lnu, kappa = 1.0, 1.0 - model.nu
    else:
        raise ConfigError("quadrature route supports telegraph and wave models")

    def T(x: float, t: float) -> float:
        return float(solution(np.float64(x), np.float64(t)))

    def d2t(g: Callable[[float], float], t: float) -> float:
        return (g(t + delta) - 2.0 * g(t) + g(t - delta)) / delta**2

    cond = Conduction(np.array([-delta, 0.0, delta]), model.gamma, spec.interface,
                      clip=False)
    worst = 0.0
    for x, t in points:
        rl = d2t(lambda s: _rl_integral_quad(lambda r: T(x, r), s, kappa), t)
        lhs = lnu * rl
        if isinstance(model, Telegraph):
            lhs += d2t(lambda s: T(x, s), t)
        stencil = np.array([T(x - delta, t), T(x, t), T(x + delta, t)])
        rhs = float(cond.apply(stencil)[0])
        if spec.source is not None:
            rhs += float(spec.source(np.float64(x), np.float64(t)))
        scale = max(abs(lhs), abs(rhs), 1.0e-300)
        worst = max(worst, abs(lhs - rhs) / scale)
    return worst


def verify_residual(
    solution: Callable[[Array, Array], Array] | SolverReport,
    spec: EquationSpec,
    resolutions: Sequence[Any] = ((25, 256), (50, 512), (100, 1024)),
    route: str = "grid",
    t_window: float = 0.1,
    points: Sequence[tuple[float, float]] | None = None,
) -> VerifyReport:
    """Apply the discrete left- and right-hand operators independently to
    *solution* and report the max-norm defect at each resolution.

    ``route="grid"`` samples *solution* on the space-time grids of
    *resolutions* (``(nx, nt)`` pairs); a :class:`SolverReport` is checked on
    its own grid. ``route="quadrature"`` uses :func:`quadrature_defect` with
    *resolutions* as finite-difference steps.
    """
    if route == "quadrature":
        if points is None:
            points = [(x, t) for x in (0.6, 1.0, 1.4) for t in (0.6, 1.0, 1.4)]
        defects = [quadrature_defect(solution, spec, float(d), points) for d in resolutions]
    elif route == "grid":
        if isinstance(solution, SolverReport):
            grid = TimeGrid(solution.t, grading=float(solution.params.get("time_grading", 1.0)))
            d = grid_defect(solution.solution, solution.x, grid, spec, t_window)
            defects = [float(np.max(d))]
            resolutions = [tuple(solution.solution.shape)]
        else:
            defects = []
            for nx, nt in resolutions:
                x = spec.space_grid(nx)
                grid = spec.time_grid(nt)
                values = np.asarray(solution(x[None, :], grid.nodes[:, None]), dtype=float)
                values = values * np.ones((grid.n + 1, x.size))
                defects.append(float(np.max(grid_defect(values, x, grid, spec, t_window))))
    else:
        raise ConfigError(f"unknown route: {route!r}")

    slopes = _slopes(defects)
    converging = len(defects) > 1 and all(
        b * CONVERGENCE_FACTOR <= a for a, b in zip(defects[:-1], defects[1:]))
    return VerifyReport(route, list(resolutions), defects, slopes, converging)


# }}}


# {{{ convergence studies


class ConvergenceRow(NamedTuple):
    h: float
    error: float
    order: float


def _orders(hs: Sequence[float], errors: Sequence[float]) -> list[float]:
    out = [math.nan]
    for i in range(1, len(hs)):
        if errors[i] > 0 and errors[i - 1] > 0:
            out.append(math.log(errors[i - 1] / errors[i]) / math.log(hs[i - 1] / hs[i]))
        else:
            out.append(math.nan)
    return out


def convergence_study(
    run: Callable[[Any], tuple[float, float]],
    ladder: Sequence[Any],
    workers: int = 1,
) -> list[ConvergenceRow]:
    """Evaluate ``run(rung) -> (h, error)`` over *ladder*.

    Rungs are independent and may run on *workers* threads; the table order
    always follows *ladder*.
    """
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, ladder))
    else:
        results = [run(r) for r in ladder]
    hs = [h for h, _ in results]
    errors = [e for _, e in results]
    return [ConvergenceRow(h, e, o) for h, e, o in zip(hs, errors, _orders(hs, errors))]


def is_monotone_decreasing(rows: Sequence[ConvergenceRow], factor: float = 1.0) -> bool:
    """Whether each error is smaller than the previous one by *factor*."""
    return all(b.error * factor < a.error for a, b in zip(rows[:-1], rows[1:]))


# }}}


__all__ = [
    "KernelSpec", "Telegraph", "Wave", "Memory", "Classical", "EquationSpec",
    "Conduction", "SolverReport", "solve_pde", "classical_telegraph_reference",
    "solve_fode_multiterm", "solve_fode_composite", "solve_reduced", "VerifyReport",
    "grid_defect", "quadrature_defect", "verify_residual", "ConvergenceRow",
    "convergence_study", "is_monotone_decreasing",
]
