r"""Real-argument Gamma and two-parameter Mittag-Leffler functions.

The Mittag-Leffler function

.. math::

    E_{\alpha, \beta}(z) = \sum_{k = 0}^\infty \frac{z^k}{\Gamma(\alpha k + \beta)}

is summed directly for small :math:`|z|`. Elsewhere it is recovered by
numerically inverting its Laplace transform

.. math::

    \mathcal{L}[t^{\beta - 1} E_{\alpha, \beta}(z t^\alpha)](s)
        = \frac{s^{\alpha - \beta}}{s^\alpha - z}

at :math:`t = 1` on an optimal parabolic contour, following [Garrappa2015]_.
Poles of the transform lying to the right of the contour are added back as
residues.

.. [Garrappa2015] R. Garrappa, *Numerical Evaluation of Two and Three
    Parameter Mittag-Leffler Functions*, SIAM J. Numer. Anal. 53 (2015).
"""

from __future__ import annotations

import math
from typing import Any

import numpy as np
from scipy import special

from fracheat.errors import ConvergenceError, PoleError

#: Radius below which the Taylor series is used instead of contour inversion.
#: Both representations agree to ~1e-15 on the band 0.25 <= |z| <= 2 for the
#: parameter ranges exercised by the test-suite.
SERIES_RADIUS = 1.0

#: Iteration budget for both the series and the contour quadrature.
MAX_TERMS = 10_000

POLE_TOL = 1.0e-12

_LOG_EPS = math.log(np.finfo(float).eps)


# {{{ gamma


def _sinpi(x: np.ndarray) -> np.ndarray:
    # exact argument reduction: sin(pi x) = (-1)^n sin(pi (x - n))
    n = np.round(x)
    r = x - n
    sign = np.where(np.mod(n, 2) == 0, 1.0, -1.0)
    return sign * np.sin(np.pi * r)


def is_pole(x: Any, tol: float = POLE_TOL) -> Any:
    """Return *True* where *x* lies within *tol* of a non-positive integer."""
    x = np.asarray(x, dtype=float)
    return (x <= tol) & (np.abs(x - np.round(x)) <= tol)


def gamma(x: Any) -> Any:
    r"""Evaluate :math:`\Gamma(x)` for real *x*.

    Negative arguments use the reflection identity
    :math:`\Gamma(x) = \pi / (\sin(\pi x) \Gamma(1 - x))` with exact argument
    reduction in the sine, so the sign is always correct.

    :raises PoleError: if *x* is within :data:`POLE_TOL` of ``0, -1, -2, ...``.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(is_pole(xa)):
        raise PoleError(f"Gamma has a pole at x = {x!r}")

    neg = xa < 0.5
    safe = np.where(neg, 1.0 - xa, xa)
    g = special.gamma(safe)
    with np.errstate(divide="ignore"):
        # the reflected branch is discarded wherever its sine vanishes
        result = np.where(neg, np.pi / (_sinpi(xa) * g), g)

    return float(result) if result.ndim == 0 else result


def rgamma(x: Any) -> Any:
    """Reciprocal Gamma function; exactly zero at the poles."""
    xa = np.asarray(x, dtype=float)
    result = special.rgamma(xa)
    result = np.where(is_pole(xa), 0.0, result)
    return float(result) if result.ndim == 0 else result


def gamma_ratio(a: float, b: float) -> float:
    r"""Return :math:`\Gamma(a) / \Gamma(b)`, with ``0`` when *b* is a pole.

    :raises PoleError: if *a* is a pole (the ratio is infinite).
    """
    if is_pole(a):
        raise PoleError(f"Gamma has a pole at a = {a!r}")
    if is_pole(b):
        return 0.0

    # log-space avoids overflow for large arguments
    la, sa = special.gammaln(a), np.sign(gamma(a))
    lb, sb = special.gammaln(b), np.sign(gamma(b))
    return float(sa * sb * np.exp(la - lb))


# }}}


# {{{ Mittag-Leffler: series


def _ml_series(z: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    result = np.zeros_like(z)
    power = np.ones_like(z)
    small = 0
    for k in range(MAX_TERMS):
        term = power * rgamma(alpha * k + beta)
        result += term

        if np.all(np.abs(term) <= 1.0e-17 * np.maximum(np.abs(result), 1.0e-300)):
            # rgamma can vanish at isolated k, so require two quiet terms
            small += 1
            if small >= 2:
                return result
        else:
            small = 0

        power = power * z

    raise ConvergenceError(
        f"Mittag-Leffler series did not converge in {MAX_TERMS} terms "
        f"(alpha={alpha}, beta={beta})"
    )


# }}}


# {{{ Mittag-Leffler: Laplace transform inversion


def _optimal_param_bounded(
    phi_j: float, phi_j1: float, pj: float, qj: float, log_epsilon: float
) -> tuple[float, float, float]:
    fac = 1.01
    f_max = math.exp(log_epsilon - _LOG_EPS)

    sq_phi_j = math.sqrt(phi_j)
    threshold = 2.0 * math.sqrt(log_epsilon - _LOG_EPS)
    sq_phi_j1 = min(math.sqrt(phi_j1), threshold - sq_phi_j)

    small_p = pj < 1.0e-14
    small_q = qj < 1.0e-14

    f_bar = 1.0
    if small_p and small_q:
        sq_bar_j, sq_bar_j1 = sq_phi_j, sq_phi_j1
    elif small_p:
        sq_bar_j = sq_phi_j
        if sq_phi_j > 0:
            f_min = fac * (sq_phi_j / (sq_phi_j1 - sq_phi_j)) ** qj
        else:
            f_min = fac
        if f_min >= f_max:
            return 0.0, 0.0, math.inf
        f_bar = f_min + f_min / f_max * (f_max - f_min)
        fq = f_bar ** (-1.0 / qj)
        sq_bar_j1 = (2.0 * sq_phi_j1 - fq * sq_phi_j) / (2.0 + fq)
    elif small_q:
        sq_bar_j1 = sq_phi_j1
        f_min = fac * (sq_phi_j1 / (sq_phi_j1 - sq_phi_j)) ** pj
        if f_min >= f_max:
            return 0.0, 0.0, math.inf
        f_bar = f_min + f_min / f_max * (f_max - f_min)
        fp = f_bar ** (-1.0 / pj)
        sq_bar_j = (2.0 * sq_phi_j + fp * sq_phi_j1) / (2.0 - fp)
    else:
        f_min = fac * (sq_phi_j + sq_phi_j1) / (sq_phi_j1 - sq_phi_j) ** max(pj, qj)
        if f_min >= f_max:
            return 0.0, 0.0, math.inf
        f_min = max(f_min, 1.5)
        f_bar = f_min + f_min / f_max * (f_max - f_min)
        fp = f_bar ** (-1.0 / pj)
        fq = f_bar ** (-1.0 / qj)
        w = -phi_j1 / log_epsilon
        den = 2.0 + w - (1.0 + w) * fp + fq
        sq_bar_j = ((2.0 + w + fq) * sq_phi_j + fp * sq_phi_j1) / den
        sq_bar_j1 = (-(1.0 + w) * fq * sq_phi_j + (2.0 + w - (1.0 + w) * fp) * sq_phi_j1) / den

    log_epsilon = log_epsilon - math.log(f_bar)
    w = -(sq_bar_j1**2) / log_epsilon
    mu = (((1.0 + w) * sq_bar_j + sq_bar_j1) / (2.0 + w)) ** 2
    h = (
        -2.0 * math.pi / log_epsilon * (sq_bar_j1 - sq_bar_j)
        / ((1.0 + w) * sq_bar_j + sq_bar_j1)
    )
    n = math.ceil(math.sqrt(1.0 - log_epsilon / mu) / h)
    return mu, h, n


def _optimal_param_unbounded(
    phi_j: float, pj: float, log_epsilon: float
) -> tuple[float, float, float]:
    sq_phi_j = math.sqrt(phi_j)
    phibar = phi_j * 1.01 if phi_j > 0 else 0.01
    sq_phibar = math.sqrt(phibar)

    f_min, f_max, f_tar = 1.0, 10.0, 5.0
    for _ in range(MAX_TERMS):
        log_eps_phi = log_epsilon / phibar
        n = math.ceil(phibar / math.pi * (1.0 - 1.5 * log_eps_phi + math.sqrt(1.0 - 2.0 * log_eps_phi)))
        a = math.pi * n / phibar
        sq_mu = sq_phibar * abs(4.0 - a) / abs(7.0 - math.sqrt(1.0 + 12.0 * a))
        fbar = ((sq_phibar - sq_phi_j) / sq_mu) ** (-pj)
        if pj < 1.0e-14 or f_min < fbar < f_max:
            break
        sq_phibar = f_tar ** (-1.0 / pj) * sq_mu + sq_phi_j
        phibar = sq_phibar**2
    else:
        raise ConvergenceError("contour parameter search did not converge")

    mu = sq_mu**2
    h = (-3.0 * a - 2.0 + 2.0 * math.sqrt(1.0 + 12.0 * a)) / (4.0 - a) / n

    # keep round-off under control on very wide contours
    threshold = log_epsilon - _LOG_EPS
    if mu > threshold:
        q = 0.0 if abs(pj) < 1.0e-14 else f_tar ** (-1.0 / pj) * math.sqrt(mu)
        phibar = (q + sq_phi_j) ** 2
        if phibar < threshold:
            w = math.sqrt(_LOG_EPS / (_LOG_EPS - log_epsilon))
            u = math.sqrt(-phibar / _LOG_EPS)
            mu = threshold
            n = math.ceil(w * log_epsilon / 2.0 / math.pi / (u * w - 1.0))
            h = w / n
        else:
            return 0.0, 0.0, math.inf

    return mu, h, n


def _ml_laplace(z: float, alpha: float, beta: float, log_epsilon: float) -> float:
    theta = 0.0 if z > 0 else math.pi
    kmin = math.ceil(-alpha / 2.0 - theta / (2.0 * math.pi))
    kmax = math.floor(alpha / 2.0 - theta / (2.0 * math.pi))
    k = np.arange(kmin, kmax + 1)
    s_star = abs(z) ** (1.0 / alpha) * np.exp(1j * (theta + 2.0 * np.pi * k) / alpha)

    phi_star = (s_star.real + np.abs(s_star)) / 2.0
    order = np.argsort(phi_star, kind="stable")
    s_star, phi_star = s_star[order], phi_star[order]
    keep = phi_star > 1.0e-15
    s_star = np.concatenate([[0.0], s_star[keep]])
    phi_star = np.concatenate([[0.0], phi_star[keep]])

    npoles = s_star.size - 1
    p = np.concatenate([[max(0.0, -2.0 * (alpha - beta + 1.0))], np.ones(npoles)])
    q = np.concatenate([np.ones(npoles), [math.inf]])
    phi_star = np.concatenate([phi_star, [math.inf]])

    regions = [
        j for j in range(npoles + 1)
        if phi_star[j] < log_epsilon - _LOG_EPS and phi_star[j] < phi_star[j + 1]
    ]

    while True:
        params = []
        for j in regions:
            if j < npoles:
                params.append(_optimal_param_bounded(
                    phi_star[j], phi_star[j + 1], p[j], q[j], log_epsilon))
            else:
                params.append(_optimal_param_unbounded(phi_star[j], p[j], log_epsilon))

        best = min(range(len(params)), key=lambda i: params[i][2])
        mu, h, n = params[best]
        if n <= 200:
            break
        if log_epsilon > -1.0:
            raise ConvergenceError("no admissible contour for Mittag-Leffler inversion")
        log_epsilon += math.log(10.0)

    if not math.isfinite(n) or n > MAX_TERMS:
        raise ConvergenceError(f"contour quadrature needs {n} > {MAX_TERMS} nodes")

    u = h * np.arange(-n, n + 1)
    s = mu * (1j * u + 1.0) ** 2
    ds = -2.0 * mu * u + 2.0j * mu
    integrand = np.exp(s) * s ** (alpha - beta) / (s**alpha - z) * ds
    integral = h * np.sum(integrand) / (2.0j * np.pi)

    poles = s_star[regions[best] + 1:]
    if poles.size and np.max(poles.real) > 700.0:
        # the dominant real pole overflows double precision
        return math.inf
    residues = np.sum(poles ** (1.0 - beta) * np.exp(poles)) / alpha

    return float(np.real(integral + residues))


# }}}


def mittag_leffler(alpha: float, beta: float, z: Any) -> Any:
    r"""Evaluate the two-parameter Mittag-Leffler function :math:`E_{\alpha, \beta}(z)`.

    :arg alpha: positive order.
    :arg beta: real second parameter.
    :arg z: real argument, scalar or array.
    :raises ConvergenceError: if neither the series nor the contour quadrature
        reach double precision within :data:`MAX_TERMS`.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive: {alpha!r}")

    za = np.asarray(z, dtype=float)
    flat = za.ravel()
    result = np.empty_like(flat)

    near = np.abs(flat) <= SERIES_RADIUS
    if np.any(near):
        result[near] = _ml_series(flat[near], alpha, beta)

    log_epsilon = math.log(1.0e-15)
    for i in np.flatnonzero(~near):
        result[i] = _ml_laplace(float(flat[i]), alpha, beta, log_epsilon)

    result = result.reshape(za.shape)
    return float(result) if result.ndim == 0 else result
