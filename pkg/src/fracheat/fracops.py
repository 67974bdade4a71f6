r"""Discrete fractional operators on (possibly graded) time grids.

All history integrals are evaluated by product integration: the sampled
function is interpolated piecewise linearly and integrated exactly against
the kernel on each subinterval, so weakly singular kernels such as
:math:`s^{\nu - 1} / \Gamma(\nu)` are handled analytically. The cost is
:math:`O(N^2)` per operator application.

The Caputo derivative of order :math:`\mu \in (0, 1)` uses the L1 scheme,
orders :math:`\mu \in (1, 2)` apply L1 of order :math:`\mu - 1` to a
second-order discrete first derivative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Callable, NamedTuple

import numpy as np

from fracheat.errors import (
    DomainError,
    InsufficientGridError,
    OrderRangeError,
    SingularKernelError,
)
from fracheat.specfun import gamma, is_pole, mittag_leffler, rgamma

Array = np.ndarray

# smooth-interval cutoff: below h / s_b < GAUSS_RATIO closed-form moments lose
# digits to cancellation and Gauss-Legendre on the kernel is used instead
GAUSS_RATIO = 1.0e-3
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_X = 0.5 * (_GL_X + 1.0)
_GL_W = 0.5 * _GL_W


# {{{ grids


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing time nodes :math:`t_0 < t_1 < \\cdots < t_N`.

    .. attribute:: grading

        Grading exponent *r* used to build the grid, ``1`` for uniform grids
        and ``None`` for user-supplied nodes.
    """

    nodes: Array
    grading: float | None = None

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 3:
            raise InsufficientGridError("a time grid needs at least N = 2 intervals")
        if not np.all(np.diff(nodes) > 0):
            raise ValueError("time nodes must be strictly increasing")
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def uniform(cls, tfinal: float, n: int, tstart: float = 0.0) -> TimeGrid:
        return cls(np.linspace(tstart, tfinal, n + 1), grading=1.0)

    @classmethod
    def graded(cls, tfinal: float, n: int, r: float, tstart: float = 0.0) -> TimeGrid:
        """Nodes :math:`t_k = t_0 + (T - t_0) (k / N)^r`, clustered at *tstart*."""
        if r < 1:
            raise ValueError(f"grading exponent must be >= 1: {r!r}")
        k = np.arange(n + 1) / n
        return cls(tstart + (tfinal - tstart) * k**r, grading=float(r))

    @property
    def n(self) -> int:
        """Number of intervals."""
        return self.nodes.size - 1

    @property
    def steps(self) -> Array:
        return np.diff(self.nodes)

    @property
    def is_uniform(self) -> bool:
        h = self.steps
        return bool(np.allclose(h, h[0], rtol=1.0e-12, atol=0.0))


@dataclass(frozen=True)
class SampledFunction:
    """Values of a function on the nodes of a :class:`TimeGrid`."""

    grid: TimeGrid
    values: Array

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=float)
        if values.shape[0] != self.grid.nodes.size:
            raise ValueError(
                f"expected {self.grid.nodes.size} samples, got {values.shape[0]}")
        if not np.all(np.isfinite(values)):
            raise ValueError("sampled values must be finite")
        object.__setattr__(self, "values", values)

    @classmethod
    def sample(cls, func: Callable[[Array], Array], grid: TimeGrid) -> SampledFunction:
        return cls(grid, np.asarray(func(grid.nodes), dtype=float))

    @property
    def t(self) -> Array:
        return self.grid.nodes

    def __add__(self, other: SampledFunction) -> SampledFunction:
        return SampledFunction(self.grid, self.values + other.values)

    def __mul__(self, a: float) -> SampledFunction:
        return SampledFunction(self.grid, a * self.values)

    __rmul__ = __mul__


def _as_sampled(f: SampledFunction | tuple[TimeGrid, Array]) -> SampledFunction:
    if isinstance(f, SampledFunction):
        return f
    grid, values = f
    return SampledFunction(grid, values)


# }}}


# {{{ kernels


class Kernel:
    r"""Convolution kernel :math:`K(s)`, :math:`s > 0`.

    Subclasses provide the iterated antiderivatives
    :math:`K^{(-k)}(s) = \int_0^s K^{(-k + 1)}(r) \,\mathrm{d}r` for
    ``k = 0, 1, 2``; :meth:`integrated` shifts them by one.
    """

    #: kernels with an integrable singularity at the origin
    singular = False

    def antiderivative(self, s: Array, k: int) -> Array:
        raise NotImplementedError

    def __call__(self, s: Array) -> Array:
        return self.antiderivative(s, 0)

    def integrated(self) -> Kernel:
        """The kernel :math:`\\int_0^s K(r) \\,\\mathrm{d}r`."""
        return _IntegratedKernel(self)

    def moments(self, sb: Array, h: Array) -> tuple[Array, Array]:
        r"""Return :math:`I_0 = \int_{s_b}^{s_b + h} K` and
        :math:`I_1 = \int_{s_b}^{s_b + h} K(s) (s_b + h - s) \,\mathrm{d}s`."""
        sb = np.asarray(sb, dtype=float)
        h = np.asarray(h, dtype=float)
        sa = sb + h

        a_lo = self.antiderivative(sb, 1)
        i0 = self.antiderivative(sa, 1) - a_lo
        i1 = self.antiderivative(sa, 2) - self.antiderivative(sb, 2) - h * a_lo

        smooth = (sb > 0) & (h < GAUSS_RATIO * sb)
        if np.any(smooth):
            sbs, hs = sb[smooth], h[smooth]
            nodes = sbs[:, None] + hs[:, None] * _GL_X[None, :]
            kv = self(nodes)
            i0[smooth] = hs * (kv @ _GL_W)
            i1[smooth] = hs**2 * (kv @ (_GL_W * (1.0 - _GL_X)))

        return i0, i1


class _IntegratedKernel(Kernel):
    def __init__(self, base: Kernel) -> None:
        self.base = base

    def antiderivative(self, s: Array, k: int) -> Array:
        return self.base.antiderivative(s, k + 1)

    def __repr__(self) -> str:
        return f"integrated({self.base!r})"


def _binomial_excess(q: float, x: Array) -> Array:
    # (1 + x)^q - 1 - q x without cancellation for small x
    x = np.asarray(x, dtype=float)
    out = np.expm1(q * np.log1p(x)) - q * x
    small = x < 1.0e-2
    if np.any(small):
        xs = x[small]
        term = np.ones_like(xs) * q
        total = np.zeros_like(xs)
        power = xs.copy()
        for k in range(2, 14):
            term = term * (q - k + 1) / k
            power = power * xs
            total += term * power
        out[small] = total
    return out


class PowerKernel(Kernel):
    r"""Riemann-Liouville kernel :math:`s^{\alpha - 1} / \Gamma(\alpha)`."""

    def __init__(self, alpha: float) -> None:
        if not alpha > 0:
            raise OrderRangeError(f"power kernel needs alpha > 0: {alpha!r}")
        self.alpha = float(alpha)
        self.singular = alpha < 1

    def antiderivative(self, s: Array, k: int) -> Array:
        a = self.alpha + k
        s = np.asarray(s, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(s > 0, s ** (a - 1) * rgamma(a), 0.0 if a > 1 else np.inf)

    def integrated(self) -> PowerKernel:
        return PowerKernel(self.alpha + 1)

    def moments(self, sb: Array, h: Array) -> tuple[Array, Array]:
        a = self.alpha
        sb = np.asarray(sb, dtype=float)
        h = np.asarray(h, dtype=float)

        pos = sb > 0
        x = np.where(pos, h / np.where(pos, sb, 1.0), 0.0)
        sbp = np.where(pos, sb, 1.0)

        i0 = np.where(pos, sbp**a * np.expm1(a * np.log1p(x)), h**a) * rgamma(a + 1)
        i1 = np.where(pos, sbp ** (a + 1) * _binomial_excess(a + 1, x), h ** (a + 1))
        i1 = i1 * rgamma(a + 2)
        return i0, i1

    def __repr__(self) -> str:
        return f"power_law({self.alpha!r})"


class ExponentialKernel(Kernel):
    r"""Maxwell-Cattaneo kernel :math:`e^{-s / \tau} / \tau`."""

    def __init__(self, tau: float) -> None:
        if not tau > 0:
            raise DomainError(f"relaxation time must be positive: {tau!r}")
        self.tau = float(tau)

    def antiderivative(self, s: Array, k: int) -> Array:
        tau = self.tau
        s = np.asarray(s, dtype=float)
        em = np.expm1(-s / tau)
        if k == 0:
            return np.exp(-s / tau) / tau
        if k == 1:
            return -em
        if k == 2:
            return s + tau * em
        if k == 3:
            return s**2 / 2 - tau * s - tau**2 * em
        raise ValueError(f"antiderivative order not available: {k}")

    def __repr__(self) -> str:
        return f"exponential({self.tau!r})"


class MittagLefflerKernel(Kernel):
    r"""Long-tail kernel :math:`E_{\nu}(-\lambda^\nu s^\nu)`.

    Its iterated antiderivatives are
    :math:`s^k E_{\nu, k + 1}(-\lambda^\nu s^\nu)`. In the limit
    :math:`\nu \to 1` it reduces to :math:`e^{-\lambda s}`.
    """

    def __init__(self, lam: float, nu: float) -> None:
        if not lam > 0:
            raise DomainError(f"lambda must be positive: {lam!r}")
        if not 0 < nu <= 1:
            raise OrderRangeError(f"nu must be in (0, 1]: {nu!r}")
        self.lam = float(lam)
        self.nu = float(nu)

    def antiderivative(self, s: Array, k: int) -> Array:
        s = np.asarray(s, dtype=float)
        z = -((self.lam * s) ** self.nu)
        return s**k * mittag_leffler(self.nu, k + 1.0, z)

    def __repr__(self) -> str:
        return f"mittag_leffler({self.lam!r}, {self.nu!r})"


class TabulatedKernel(Kernel):
    """Kernel given by samples on lags ``0 = s_0 < s_1 < ... < s_M``.

    Values are linearly interpolated; antiderivatives are accumulated on the
    table. A non-finite value at ``s_0`` is replaced by its neighbour.
    """

    def __init__(self, lags: Array, values: Array) -> None:
        lags = np.asarray(lags, dtype=float)
        values = np.array(values, dtype=float)
        if lags.ndim != 1 or lags.shape != values.shape or lags[0] != 0:
            raise ValueError("kernel table must start at lag 0 and match in shape")
        if not np.all(np.isfinite(values[1:])):
            raise SingularKernelError("tabulated kernel is non-finite at interior lags")
        if not np.isfinite(values[0]):
            values[0] = values[1]

        self.lags = lags
        tables = [values]
        for _ in range(3):
            prev = tables[-1]
            inc = 0.5 * np.diff(lags) * (prev[1:] + prev[:-1])
            tables.append(np.concatenate([[0.0], np.cumsum(inc)]))
        self.tables = tables

    def antiderivative(self, s: Array, k: int) -> Array:
        s = np.asarray(s, dtype=float)
        if np.any(s > self.lags[-1] * (1 + 1.0e-12)):
            raise SingularKernelError("kernel table does not cover the requested lags")
        return np.interp(s, self.lags, self.tables[k])

    def __repr__(self) -> str:
        return f"custom({self.lags.size} samples)"


def exponential(tau: float) -> ExponentialKernel:
    return ExponentialKernel(tau)


def mittag_leffler_kernel(lam: float, nu: float) -> MittagLefflerKernel:
    return MittagLefflerKernel(lam, nu)


def power_law(nu: float) -> PowerKernel:
    return PowerKernel(nu)


def custom(lags: Array, values: Array) -> TabulatedKernel:
    return TabulatedKernel(lags, values)


# }}}


# {{{ product integration weights


def _interval_moments(grid: TimeGrid, kernel: Kernel) -> tuple[Array, Array]:
    """Moment matrices ``I[n, j]`` of interval ``j`` (``t_{j-1}..t_j``) seen
    from node ``n``; entries with ``j > n`` vanish."""
    t = grid.nodes
    h = grid.steps
    n = grid.n

    if grid.is_uniform:
        # moments depend only on the lag m = n - j
        lag = np.arange(n) * h[0]
        i0_lag, i1_lag = kernel.moments(lag, np.full(n, h[0]))
        m = np.arange(1, n + 1)[:, None] - np.arange(1, n + 1)[None, :]
        valid = m >= 0
        mm = np.where(valid, m, 0)
        i0 = np.where(valid, i0_lag[mm], 0.0)
        i1 = np.where(valid, i1_lag[mm], 0.0)
    else:
        rows, cols = np.tril_indices(n)
        sb = t[rows + 1] - t[cols + 1]
        m0, m1 = kernel.moments(sb, h[cols])
        i0 = np.zeros((n, n))
        i1 = np.zeros((n, n))
        i0[rows, cols] = m0
        i1[rows, cols] = m1

    return i0, i1


def convolution_weights(grid: TimeGrid, kernel: Kernel) -> Array:
    r"""Lower-triangular matrix *W* such that
    :math:`\int_{t_0}^{t_n} K(t_n - \tau) f(\tau) \,\mathrm{d}\tau \approx
    \sum_j W_{nj} f_j` for piecewise linear *f*."""
    n = grid.n
    h = grid.steps
    i0, i1 = _interval_moments(grid, kernel)

    right = i1 / h[None, :]
    left = i0 - right

    w = np.zeros((n + 1, n + 1))
    w[1:, 1:] += right
    w[1:, :-1] += left
    return w


# }}}


# {{{ operators


def _check_order(mu: float, lo: float, hi: float) -> None:
    if not lo < mu < hi:
        raise OrderRangeError(f"order {mu!r} outside ({lo}, {hi})")


def caputo_l1(f: SampledFunction, mu: float) -> SampledFunction:
    r"""L1 approximation of the Caputo derivative of order :math:`\mu \in (0, 1)`.

    The value at the first node is set to zero (the Caputo derivative of a
    function with bounded derivative vanishes there).
    """
    _check_order(mu, 0.0, 1.0)
    f = _as_sampled(f)

    h = f.grid.steps
    slopes = np.diff(f.values, axis=0) / h.reshape(-1, *([1] * (f.values.ndim - 1)))
    i0, _ = _interval_moments(f.grid, PowerKernel(1.0 - mu))

    result = np.zeros_like(f.values)
    result[1:] = i0 @ slopes
    return SampledFunction(f.grid, result)


def _first_derivative(f: SampledFunction, initial_slope: float | Array | None) -> SampledFunction:
    g = np.gradient(f.values, f.t, axis=0, edge_order=2)
    if initial_slope is not None:
        g[0] = initial_slope
    return SampledFunction(f.grid, g)


def caputo_high(
    f: SampledFunction, mu: float, initial_slope: float | Array | None = None
) -> SampledFunction:
    r"""Caputo derivative of order :math:`\mu \in (1, 2)`.

    Evaluated as :math:`D^{\mu - 1}_C f'`, where :math:`f'` is the
    second-order discrete derivative (``numpy.gradient``). The slope at the
    first node is replaced by *initial_slope* when given.
    """
    _check_order(mu, 1.0, 2.0)
    f = _as_sampled(f)
    if f.grid.n < 4:
        raise InsufficientGridError("caputo_high needs at least 4 intervals")

    return caputo_l1(_first_derivative(f, initial_slope), mu - 1.0)


def rl_integral(f: SampledFunction, nu: float) -> SampledFunction:
    r"""Riemann-Liouville integral
    :math:`J^\nu f(t) = \frac{1}{\Gamma(\nu)} \int_0^t (t - \tau)^{\nu - 1} f(\tau) \,\mathrm{d}\tau`
    by product-trapezoidal quadrature, for :math:`\nu \in (0, 1)`."""
    _check_order(nu, 0.0, 1.0)
    return memory_convolution(PowerKernel(nu), f)


def memory_convolution(kernel: Kernel, f: SampledFunction) -> SampledFunction:
    r"""History integral :math:`\int_{t_0}^t K(t - \tau) f(\tau) \,\mathrm{d}\tau`."""
    f = _as_sampled(f)
    w = convolution_weights(f.grid, kernel)
    return SampledFunction(f.grid, w @ f.values)


class PowerRuleResult(NamedTuple):
    """``coefficient * t**exponent``; *continued* marks use outside the
    classical validity range of the rule."""

    coefficient: float
    exponent: float
    continued: bool = False


def power_rule(beta: float, mu: float, continuation: bool = False) -> PowerRuleResult:
    r"""Fractional derivative of :math:`t^\beta`,
    :math:`\frac{\Gamma(\beta + 1)}{\Gamma(\beta + 1 - \mu)} t^{\beta - \mu}`.

    The rule holds for :math:`\beta \in (-1, 0) \cup (0, \infty)`. With
    *continuation* the Gamma-ratio formula is used for any *beta* that keeps
    :math:`\Gamma(\beta + 1)` finite, and the result is flagged.

    :raises DomainError: outside the validity set (without *continuation*),
        or when :math:`\beta + 1` is a pole.
    """
    inside = (-1.0 < beta < 0.0) or beta > 0.0
    if not inside and not continuation:
        raise DomainError(f"power rule requires beta in (-1, 0) U (0, inf): {beta!r}")
    if is_pole(beta + 1.0):
        raise DomainError(f"Gamma(beta + 1) has a pole at beta = {beta!r}")

    coefficient = gamma(beta + 1.0) * rgamma(beta + 1.0 - mu)
    return PowerRuleResult(float(coefficient), beta - mu, continued=not inside)


def second_derivative(f: SampledFunction) -> SampledFunction:
    g = np.gradient(f.values, f.t, axis=0, edge_order=2)
    return SampledFunction(f.grid, np.gradient(g, f.t, axis=0, edge_order=2))


def telegraph_apply(
    f: SampledFunction,
    lam: float,
    nu: float,
    form: str = "flux",
    initial_slope: float | Array | None = None,
) -> SampledFunction:
    r"""Apply :math:`\frac{d^2}{dt^2} + \lambda^\nu \frac{d^{2 - \nu}}{dt^{2 - \nu}}` nodewise.

    *form* selects the fractional term:

    ``"caputo"``
        the Caputo derivative of order :math:`2 - \nu`, annihilating
        affine functions.
    ``"flux"``
        :math:`\frac{d}{dt} J^\nu f'`, the operator produced by a Gurtin-Pipkin
        flux with kernel :math:`E_\nu(-\lambda^\nu t^\nu)`. It differs from the
        Caputo form by :math:`f'(0) t^{\nu - 1} / \Gamma(\nu)`, annihilates
        constants and :math:`t E_{\nu, 2}(-\lambda^\nu t^\nu)`. That
        correction is singular at :math:`t_0` and omitted at the first node.
    """
    _check_order(nu, 0.0, 1.0)
    if form not in ("flux", "caputo"):
        raise ValueError(f"unknown telegraph form: {form!r}")
    f = _as_sampled(f)
    if f.grid.n < 8:
        raise InsufficientGridError("telegraph_apply needs at least 8 intervals")

    g = _first_derivative(f, initial_slope)
    frac = caputo_l1(g, 1.0 - nu).values
    if form == "flux":
        tau = f.t[1:] - f.t[0]
        shape = (-1, *([1] * (f.values.ndim - 1)))
        frac = frac.copy()
        frac[1:] += g.values[0] * (tau ** (nu - 1.0) / math.gamma(nu)).reshape(shape)

    result = second_derivative(f).values + lam**nu * frac
    return SampledFunction(f.grid, result)


# }}}


__all__ = [
    "TimeGrid", "SampledFunction", "Kernel", "PowerKernel", "ExponentialKernel",
    "MittagLefflerKernel", "TabulatedKernel", "exponential", "mittag_leffler_kernel",
    "power_law", "custom", "convolution_weights", "caputo_l1", "caputo_high",
    "rl_integral", "memory_convolution", "PowerRuleResult", "power_rule",
    "second_derivative", "telegraph_apply",
]
