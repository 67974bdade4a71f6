r"""Closed-form solutions of the memory heat equations and their constants.

Each solution is a small frozen dataclass with an ``*_eval`` function. Every
constant built from Gamma ratios has a validity predicate, so invalid
parameters are reported instead of producing complex or NaN values.

Solutions with separable power structure :math:`A x^p t^\beta` also provide
a term-by-term residual (:func:`prop23_residual`, :func:`wave_residual`),
built from :func:`~fracheat.fracops.power_rule` in time and
:func:`~fracheat.subspace.apply_F_term` in space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, NamedTuple

import numpy as np
import sympy as sp

from fracheat.errors import ConstantUndefinedError, DomainError, PoleError
from fracheat.fracops import power_rule
from fracheat.specfun import gamma, gamma_ratio, mittag_leffler
from fracheat.subspace import PowerTerm, apply_F_term

Array = np.ndarray


def _odd_denominator(p: float) -> Fraction | None:
    frac = Fraction(p).limit_denominator(1000)
    if abs(float(frac) - p) > 1.0e-13 or frac.denominator % 2 == 0:
        return None
    return frac


def _odd_over_odd(p: float) -> bool:
    """Whether *p* is a ratio of odd integers, so ``x ** p`` is an odd
    bijection of the real line (and so is its inverse power)."""
    frac = _odd_denominator(p)
    return frac is not None and frac.numerator % 2 == 1


def real_power(base: Any, p: float) -> Any:
    """Real-valued ``base ** p``.

    Negative bases are allowed only when *p* is a rational with odd
    denominator, in which case the sign is extracted.

    :raises DomainError: for a negative base and any other exponent.
    """
    b = np.asarray(base, dtype=float)
    if np.all(b >= 0.0):
        result = b**p
    else:
        frac = _odd_denominator(p)
        if frac is None:
            raise DomainError(f"negative base to the power {p!r} is not real")
        sign = np.where(b < 0.0, (-1.0) ** frac.numerator, 1.0)
        result = sign * np.abs(b) ** p
    return float(result) if result.ndim == 0 else result


# {{{ telegraph family


@dataclass(frozen=True)
class TelegraphParams:
    gamma: float = 1.0
    lam: float = 1.0
    nu: float = 0.5

    def __post_init__(self) -> None:
        if not self.gamma > 0.0:
            raise DomainError(f"gamma must be positive: {self.gamma!r}")
        if not self.lam > 0.0:
            raise DomainError(f"lambda must be positive: {self.lam!r}")
        # nu = 1 is the exponential (Cattaneo) limit and is allowed here
        if not 0.0 < self.nu <= 1.0:
            raise DomainError(f"nu must lie in (0, 1]: {self.nu!r}")


@dataclass(frozen=True)
class Prop21Solution:
    r"""Separable solution
    :math:`(x + a)^{1/(1+\gamma)} (C_1 t E_{\nu,2}(-\lambda^\nu t^\nu) + C_2)`.

    The shift *a* defaults to *C2*; it is an independent constant.
    """

    params: TelegraphParams
    C1: float = 1.0
    C2: float = 1.0
    shift: float | None = None

    @property
    def a(self) -> float:
        return self.C2 if self.shift is None else self.shift


def prop21_time(s: Prop21Solution, t: Any) -> Any:
    r""":math:`f(t) = C_1 t E_{\nu,2}(-\lambda^\nu t^\nu) + C_2`."""
    p = s.params
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise DomainError("t must be non-negative")
    if p.nu == 1.0:
        # t E_{1,2}(-lam t) = (1 - exp(-lam t)) / lam
        core = -np.expm1(-p.lam * t) / p.lam
    else:
        core = t * mittag_leffler(p.nu, 2.0, -((p.lam * t) ** p.nu))
    result = s.C1 * core + s.C2
    return float(result) if result.ndim == 0 else result


def prop21_space(s: Prop21Solution, x: Any) -> Any:
    return real_power(np.asarray(x, dtype=float) + s.a, 1.0 / (1.0 + s.params.gamma))


def prop21_eval(s: Prop21Solution, x: Any, t: Any) -> Any:
    """Evaluate on broadcast *x*, *t*."""
    x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
    result = prop21_space(s, x) * prop21_time(s, t)
    return float(result) if np.ndim(result) == 0 else result


def prop21_time_slope(s: Prop21Solution) -> float:
    """:math:`f'(0) = C_1`."""
    return s.C1


def _prop23_beta(p: TelegraphParams) -> float:
    return (p.nu - 2.0) / p.gamma


def prop23_bracket(p: TelegraphParams) -> float:
    r"""The quantity whose :math:`1/\gamma` power is the amplitude :math:`C`.

    :raises ConstantUndefinedError: if :math:`\Gamma(\beta + 1)` has a pole.
    """
    beta = _prop23_beta(p)
    try:
        ratio = gamma_ratio(beta + 1.0, beta + p.nu - 1.0)
    except PoleError as exc:
        raise ConstantUndefinedError(str(exc)) from exc
    g = p.gamma
    return p.lam**p.nu * ratio / ((2.0 / g) * (1.0 + 2.0 / g))


def prop23_valid(p: TelegraphParams) -> bool:
    """Whether the amplitude is a finite real number that solves the
    amplitude equation (a negative bracket needs ``1/gamma`` odd over odd)."""
    try:
        b = prop23_bracket(p)
    except ConstantUndefinedError:
        return False
    return b >= 0.0 or _odd_over_odd(1.0 / p.gamma)


def prop23_constant(p: TelegraphParams) -> float:
    if not prop23_valid(p):
        raise ConstantUndefinedError(f"amplitude is not real for {p}")
    return real_power(prop23_bracket(p), 1.0 / p.gamma)


@dataclass(frozen=True)
class Prop23Solution:
    params: TelegraphParams

    @property
    def C(self) -> float:
        return prop23_constant(self.params)


def _positive_t(t: Any) -> Array:
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0.0):
        raise DomainError("t must be positive")
    return t


def prop23_eval(s: Prop23Solution, x: Any, t: Any) -> Any:
    r""":math:`C (x^2 / t^{2 - \nu})^{1/\gamma}`."""
    p = s.params
    t = _positive_t(t)
    x = np.asarray(x, dtype=float)
    result = s.C * np.abs(x) ** (2.0 / p.gamma) * t ** (_prop23_beta(p))
    return float(result) if np.ndim(result) == 0 else result


def prop23_source(p: TelegraphParams, x: Any, t: Any) -> Any:
    """Source term for which :func:`prop23_eval` is an exact solution."""
    beta = _prop23_beta(p)
    t = _positive_t(t)
    x = np.asarray(x, dtype=float)
    c = prop23_constant(p)
    result = beta * (beta - 1.0) * c * np.abs(x) ** (2.0 / p.gamma) * t ** (beta - 2.0)
    return float(result) if np.ndim(result) == 0 else result


# }}}


# {{{ wave type


@dataclass(frozen=True)
class WaveSolution:
    r""":math:`(K x^2 / t^{\nu + 1})^{1/\gamma}` for
    :math:`\partial_t^\nu \partial_t T = \partial_x (T^\gamma \partial_x T)`."""

    gamma: float = 2.0
    nu: float = 0.5

    def __post_init__(self) -> None:
        if not self.gamma > 0.0:
            raise DomainError(f"gamma must be positive: {self.gamma!r}")
        if not 0.0 < self.nu < 1.0:
            raise DomainError(f"nu must lie in (0, 1): {self.nu!r}")

    @property
    def beta(self) -> float:
        return -(1.0 + self.nu) / self.gamma

    @property
    def K(self) -> float:
        return wave_constant(self.gamma, self.nu)


def wave_constant(g: float, nu: float) -> float:
    """:raises ConstantUndefinedError: at a Gamma pole of the numerator."""
    beta = -(1.0 + nu) / g
    try:
        ratio = gamma_ratio(1.0 + beta, beta - nu)
    except PoleError as exc:
        raise ConstantUndefinedError(str(exc)) from exc
    return ratio / ((2.0 / g) * (2.0 / g + 1.0))


def wave_stated_constraint(g: float, nu: float) -> bool:
    r""":math:`0 < \gamma - \nu < 1`, :math:`\gamma > 0`."""
    return g > 0.0 and 0.0 < g - nu < 1.0


def wave_positivity_constraint(g: float, nu: float) -> bool:
    r""":math:`\gamma + \nu < 1`, the condition given for :math:`K > 0`."""
    return g + nu < 1.0


def wave_valid(g: float, nu: float) -> bool:
    """Whether the solution is real: ``K >= 0`` (zero is the trivial
    solution), or ``1/gamma`` a ratio of odd integers."""
    try:
        k = wave_constant(g, nu)
    except ConstantUndefinedError:
        return False
    return k >= 0.0 or _odd_over_odd(1.0 / g)


def wave_eval(s: WaveSolution, x: Any, t: Any) -> Any:
    if not wave_valid(s.gamma, s.nu):
        raise ConstantUndefinedError(f"K = {s.K!r} gives no real solution for gamma={s.gamma}")
    t = _positive_t(t)
    x = np.asarray(x, dtype=float)
    result = real_power(s.K * x**2 / t ** (s.nu + 1.0), 1.0 / s.gamma)
    return float(result) if np.ndim(result) == 0 else result


class ValidityRow(NamedTuple):
    gamma: float
    nu: float
    K: float
    K_positive: bool
    stated: bool
    positivity: bool
    real: bool


def scan_validity(gammas: Any, nus: Any) -> list[ValidityRow]:
    """Tabulate the sign of :math:`K` next to both sufficient conditions."""
    rows = []
    for g in np.asarray(gammas, dtype=float):
        for nu in np.asarray(nus, dtype=float):
            try:
                k = wave_constant(g, nu)
            except ConstantUndefinedError:
                k = math.nan
            rows.append(ValidityRow(
                float(g), float(nu), k, bool(k > 0.0),
                wave_stated_constraint(g, nu), wave_positivity_constraint(g, nu),
                wave_valid(g, nu)))
    return rows


# }}}


# {{{ term-by-term residuals


class ResidualReport(NamedTuple):
    #: max |sum of matched terms| / max |term|
    relative: float
    #: terms as (label, coefficient, x exponent, t exponent)
    terms: list[tuple[str, float, float, float]]
    #: whether the power rule was used outside its classical range
    continued: bool


# exponents agreeing to this tolerance describe the same power of x or t
_EXPONENT_TOL = 1.0e-10


def _collect(terms: list[tuple[str, float, float, float]], continued: bool) -> ResidualReport:
    groups: list[tuple[float, float, float]] = []
    for _, c, px, pt in terms:
        for i, (gx, gt, total) in enumerate(groups):
            if abs(gx - px) <= _EXPONENT_TOL and abs(gt - pt) <= _EXPONENT_TOL:
                groups[i] = (gx, gt, total + c)
                break
        else:
            groups.append((px, pt, c))
    scale = max(abs(c) for _, c, _, _ in terms)
    defect = max(abs(total) for _, _, total in groups)
    return ResidualReport(defect / scale if scale > 0 else defect, terms, continued)


def _space_image(amplitude: float, p: float, g: float) -> tuple[float, float]:
    """Coefficient and exponent of ``F[amplitude * x**p]``; the amplitude
    power is taken as a real odd power so negative amplitudes are allowed."""
    # unit amplitude through the symbolic rule, the amplitude power separately
    img = apply_F_term(PowerTerm(sp.Integer(1), sp.Integer(0), sp.Float(p, 17)),
                       sp.Float(g, 17))
    return float(img.coeff) * real_power(amplitude, g + 1.0), float(img.exponent)


def prop23_residual(p: TelegraphParams) -> ResidualReport:
    r"""Residual of :func:`prop23_eval` in the sourced telegraph equation.

    Every contribution is a multiple of :math:`x^{2/\gamma} t^\kappa`: the
    second time derivative, the fractional term from the power rule, the
    nonlinear term from the single-term rule and the source.
    """
    c = prop23_constant(p)
    beta = _prop23_beta(p)
    px = 2.0 / p.gamma

    frac = power_rule(beta, 2.0 - p.nu, continuation=True)
    f_coeff, f_px = _space_image(c, px, p.gamma)
    terms = [
        ("d2t", c * beta * (beta - 1.0), px, beta - 2.0),
        ("frac", p.lam**p.nu * c * frac.coefficient, px, frac.exponent),
        ("-F", -f_coeff, f_px, beta * (p.gamma + 1.0)),
        ("-g", -beta * (beta - 1.0) * c, px, beta - 2.0),
    ]
    return _collect(terms, frac.continued)


def wave_residual(s: WaveSolution) -> ResidualReport:
    r"""Residual of :func:`wave_eval`, with the composite operator
    :math:`\partial_t^\nu \partial_t` applied by the power rule."""
    if not wave_valid(s.gamma, s.nu):
        raise ConstantUndefinedError(f"no real solution for gamma={s.gamma}, nu={s.nu}")
    amp = real_power(s.K, 1.0 / s.gamma)
    beta = s.beta
    px = 2.0 / s.gamma

    frac = power_rule(beta - 1.0, s.nu, continuation=True)
    f_coeff, f_px = _space_image(amp, px, s.gamma)
    terms = [
        ("dnu_dt", amp * beta * frac.coefficient, px, frac.exponent),
        ("-F", -f_coeff, f_px, beta * (s.gamma + 1.0)),
    ]
    return _collect(terms, frac.continued)


# }}}


# {{{ Barenblatt


@dataclass(frozen=True)
class BarenblattParams:
    r"""Self-similar source solution of :math:`T_t = (T^m T_x)_x` with unit mass."""

    m: float = 1.0

    def __post_init__(self) -> None:
        if not self.m > 0.0:
            raise DomainError(f"m must be positive: {self.m!r}")

    @property
    def r0(self) -> float:
        m = self.m
        return gamma(1.0 / m + 1.5) / (math.sqrt(math.pi) * gamma(1.0 / m + 1.0))

    @property
    def t0(self) -> float:
        return self.m * self.r0**2 / (2.0 * (self.m + 2.0))

    def scale(self, t: Any) -> Any:
        r""":math:`\lambda(t) = (t / t_0)^{1/(2 + m)}`."""
        return (_positive_t(t) / self.t0) ** (1.0 / (2.0 + self.m))

    def front(self, t: Any) -> Any:
        """Position of the free boundary."""
        return self.scale(t) * self.r0


def barenblatt_eval(p: BarenblattParams, x: Any, t: Any) -> Any:
    x = np.asarray(x, dtype=float)
    lam = p.scale(t)
    arg = 1.0 - (x / (lam * p.r0)) ** 2
    result = np.where(arg > 0.0, np.maximum(arg, 0.0) ** (1.0 / p.m) / lam, 0.0)
    return float(result) if np.ndim(result) == 0 else result


# }}}


__all__ = [
    "real_power", "TelegraphParams", "Prop21Solution", "prop21_time", "prop21_space",
    "prop21_eval", "prop21_time_slope", "prop23_bracket", "prop23_valid",
    "prop23_constant", "Prop23Solution", "prop23_eval", "prop23_source",
    "WaveSolution", "wave_constant", "wave_stated_constraint",
    "wave_positivity_constraint", "wave_valid", "wave_eval", "ValidityRow",
    "scan_validity", "ResidualReport", "prop23_residual", "wave_residual",
    "BarenblattParams", "barenblatt_eval",
]
