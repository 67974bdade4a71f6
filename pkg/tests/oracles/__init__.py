"""Reference computations that do not use the package.

Everything here runs in :mod:`mpmath` at raised precision, so the values are
independent of the double-precision algorithms under test.
"""

from __future__ import annotations

import math

import mpmath as mp


def gamma(x: float, dps: int = 50) -> float:
    with mp.workdps(dps):
        return float(mp.gamma(mp.mpf(x)))


def _series_terms(alpha: float, beta: float, z: float, budget: int = 20_000):
    """Number of series terms and log10 of the largest one, or ``None`` when
    the series cannot be summed within *budget* terms."""
    if z == 0.0:
        return 1, -math.log10(abs(mp.gamma(beta))) if beta > 0 else 0.0
    lz = math.log(abs(z))
    peak = -math.inf
    for k in range(budget):
        arg = alpha * k + beta
        lg = float(mp.log(abs(mp.gamma(arg)))) if arg <= 0 else math.lgamma(arg)
        term = k * lz - lg
        peak = max(peak, term)
        if k > 10 and term < peak - 100.0 and term < -100.0:
            return k + 1, peak / math.log(10.0)
    return None


def ml_series(alpha: float, beta: float, z: float) -> float | None:
    """Brute-force power series with precision raised to absorb cancellation."""
    est = _series_terms(alpha, beta, z)
    if est is None:
        return None
    nterms, peak10 = est
    dps = int(max(peak10, 0.0)) + 40
    with mp.workdps(dps):
        zz, a, b = mp.mpf(z), mp.mpf(alpha), mp.mpf(beta)
        total = mp.mpf(0)
        for k in range(nterms):
            total += zz**k * mp.rgamma(a * k + b)
        value = total
        if abs(value) > mp.mpf(10) ** 300:
            return math.inf if value > 0 else -math.inf
        return float(value)


def ml_talbot(alpha: float, beta: float, z: float) -> float:
    """Numerical inverse Laplace transform of ``s**(alpha-beta)/(s**alpha - z)``
    at ``t = 1``."""
    with mp.workdps(40):
        a, b, zz = mp.mpf(alpha), mp.mpf(beta), mp.mpf(z)
        f = mp.invertlaplace(lambda s: s ** (a - b) / (s**a - zz), 1, method="talbot")
        return float(f)


def mittag_leffler(alpha: float, beta: float, z: float) -> tuple[float, str]:
    """Reference value and the method that produced it."""
    value = ml_series(alpha, beta, z)
    if value is not None:
        return value, "series"
    return ml_talbot(alpha, beta, z), "talbot"


def composite_quadratic(nu: float, coeff: float, b0: float, times, nterms: int = 4000,
                        dps: int = 40) -> list[float]:
    """Solution of ``D^{1+nu} b = coeff * b**2`` with ``b(0) = b0``, ``b'(0) = 0``.

    The Volterra form ``b = b0 + J^{1+nu}[coeff b^2]`` has a power series in
    ``s = t**(1+nu)`` whose coefficients follow from a Cauchy product.
    """
    with mp.workdps(dps):
        q = 1 + mp.mpf(nu)
        a = [mp.mpf(b0)]
        for k in range(nterms - 1):
            conv = mp.fsum(a[i] * a[k - i] for i in range(k + 1))
            a.append(coeff * mp.gamma(q * k + 1) / mp.gamma(q * k + q + 1) * conv)
        out = []
        for t in times:
            s = mp.mpf(t) ** q
            terms = [c * s**k for k, c in enumerate(a)]
            if abs(terms[-1]) > mp.mpf(10) ** (-25) * abs(terms[0]):
                raise ValueError(f"series not converged at t={t}")
            out.append(float(mp.fsum(terms)))
        return out
