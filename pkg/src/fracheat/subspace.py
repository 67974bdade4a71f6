r"""Invariant subspaces of the nonlinear conduction operator
:math:`F[T] = \partial_x (T^\gamma \partial_x T)`.

Functions are finite sums of power terms :math:`c (x + a)^p` (:class:`PowerExpr`).
Coefficients, shifts and exponents are :mod:`sympy` expressions, so rational
inputs stay exact and coefficients may contain indeterminates. A linear span
:math:`\langle f_1, \dots, f_n \rangle` is invariant if
:math:`F[\sum_i C_i f_i] = \sum_i \Phi_i(C) f_i`; substituting time-dependent
coordinates then turns the PDE into a system of fractional ODEs.

Example::

    >>> from fracheat.subspace import PowerExpr, reduce, telegraph
    >>> basis = [PowerExpr.parse(s) for s in ("1", "x", "x2")]
    >>> print(reduce(basis, 1, telegraph()).to_text())
    Dtt[f] + λ^ν*Dt^{2-ν}[f] = 6*f^2
    Dtt[g] + λ^ν*Dt^{2-ν}[g] = 6*f*g
    Dtt[h] + λ^ν*Dt^{2-ν}[h] = 2*f*h + g^2
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Iterable, Sequence

import numpy as np
import sympy as sp

from fracheat.errors import ClosureError, DependentBasisError, NotInvariantError

x = sp.Symbol("x", real=True)
_y = sp.Symbol("y", positive=True)

LAMBDA = sp.Symbol("λ", positive=True)
NU = sp.Symbol("ν", positive=True)
GAMMA = sp.Symbol("gamma", positive=True)

_LOCALS = {"x": x, "gamma": GAMMA, "γ": GAMMA, "lam": LAMBDA, "λ": LAMBDA,
           "nu": NU, "ν": NU}


def sympify(text: str) -> sp.Expr:
    """Parse *text* exactly, with ``gamma``, ``lam``/``λ`` and ``nu``/``ν``
    bound to the module's positive symbols."""
    return sp.sympify(text.replace("^", "**"), locals=dict(_LOCALS), rational=True)


def as_exact(value: Any) -> sp.Expr:
    """Convert to a sympy number, keeping ints, Fractions and strings exact."""
    if isinstance(value, sp.Basic):
        return value
    if isinstance(value, Fraction):
        return sp.Rational(value.numerator, value.denominator)
    if isinstance(value, str):
        return sp.sympify(value, rational=True)
    return sp.sympify(value)


def _is_zero(expr: sp.Expr) -> bool:
    if expr.is_zero:
        return True
    if expr.is_number:
        return bool(abs(complex(expr)) == 0)
    return sp.simplify(expr) == 0


def _same(a: sp.Expr, b: sp.Expr) -> bool:
    return a == b or _is_zero(a - b)


# {{{ power expressions


@dataclass(frozen=True)
class PowerTerm:
    """The term ``coeff * (x + shift) ** exponent``."""

    coeff: sp.Expr
    shift: sp.Expr
    exponent: sp.Expr

    def __post_init__(self) -> None:
        for name in ("coeff", "shift", "exponent"):
            object.__setattr__(self, name, as_exact(getattr(self, name)))

    @property
    def signature(self) -> tuple[sp.Expr, sp.Expr]:
        return (self.shift, self.exponent)

    def to_sympy(self) -> sp.Expr:
        return self.coeff * (x + self.shift) ** self.exponent


@dataclass(frozen=True)
class PowerExpr:
    """Immutable sum of :class:`PowerTerm` with merged signatures."""

    terms: tuple[PowerTerm, ...] = ()

    @classmethod
    def from_terms(cls, terms: Iterable[PowerTerm]) -> PowerExpr:
        merged: list[PowerTerm] = []
        for term in terms:
            shift = sp.Integer(0) if _is_zero(term.exponent) else term.shift
            term = PowerTerm(term.coeff, shift, term.exponent)
            for i, other in enumerate(merged):
                if _same(other.shift, term.shift) and _same(other.exponent, term.exponent):
                    merged[i] = PowerTerm(other.coeff + term.coeff, other.shift, other.exponent)
                    break
            else:
                merged.append(term)

        kept = []
        for t in merged:
            coeff = sp.expand(t.coeff)
            if not _is_zero(coeff):
                kept.append(PowerTerm(coeff, t.shift, t.exponent))
        return cls(tuple(kept))

    @classmethod
    def term(cls, coeff: Any = 1, shift: Any = 0, exponent: Any = 1) -> PowerExpr:
        return cls.from_terms([PowerTerm(as_exact(coeff), as_exact(shift), as_exact(exponent))])

    @classmethod
    def from_sympy(cls, expr: sp.Expr) -> PowerExpr:
        """Decompose a sympy expression in :data:`x` into power terms.

        :raises ClosureError: if some summand is not ``c * (x + a)**p``.
        """
        expr = sp.sympify(expr)
        terms = []
        for summand in sp.Add.make_args(expr):
            coeff, rest = sp.Integer(1), sp.Integer(1)
            for factor in sp.Mul.make_args(summand):
                if factor.has(x):
                    rest = rest * factor
                else:
                    coeff = coeff * factor

            if rest == 1:
                terms.append(PowerTerm(coeff, sp.Integer(0), sp.Integer(0)))
                continue

            base, exponent = rest.as_base_exp()
            shift = sp.expand(base - x)
            if shift.has(x):
                raise ClosureError(f"not a power of a shifted x: {rest}")
            terms.append(PowerTerm(coeff, shift, exponent))
        return cls.from_terms(terms)

    @classmethod
    def parse(cls, text: str, symbols: dict[str, Any] | None = None) -> PowerExpr:
        """Parse ``"1"``, ``"x"``, ``"x2"`` (shorthand for ``x**2``),
        ``"(x+C)^(2/gamma)"`` and similar strings."""
        text = re.sub(r"\bx(\d+)\b", r"x**\1", text.strip()).replace("^", "**")
        local = dict(_LOCALS)
        local.update(symbols or {})
        return cls.from_sympy(sp.sympify(text, locals=local, rational=True))

    def to_sympy(self) -> sp.Expr:
        return sp.Add(*[t.to_sympy() for t in self.terms])

    def __add__(self, other: PowerExpr) -> PowerExpr:
        return PowerExpr.from_terms(self.terms + other.terms)

    def scale(self, c: Any) -> PowerExpr:
        c = as_exact(c)
        return PowerExpr.from_terms(PowerTerm(c * t.coeff, t.shift, t.exponent) for t in self.terms)

    def __rmul__(self, c: Any) -> PowerExpr:
        return self.scale(c)

    def __str__(self) -> str:
        return str(self.to_sympy()) if self.terms else "0"

    def evaluate(self, xv: Any, subs: dict | None = None) -> Any:
        func = sp.lambdify(x, self.to_sympy().subs(subs or {}), "numpy")
        return func(np.asarray(xv, dtype=float)) + 0.0 * np.asarray(xv, dtype=float)


# }}}


# {{{ the nonlinear operator


def apply_F_term(term: PowerTerm, gamma: Any) -> PowerTerm:
    r"""Single-term rule
    :math:`F[c (x + a)^p] = c^{\gamma + 1} p (p(\gamma + 1) - 1) (x + a)^{p(\gamma + 1) - 2}`."""
    g = as_exact(gamma)
    p = term.exponent
    coeff = term.coeff ** (g + 1) * p * (p * (g + 1) - 1)
    return PowerTerm(sp.simplify(coeff), term.shift, sp.simplify(p * (g + 1) - 2))


def apply_F(expr: PowerExpr, gamma: Any) -> PowerExpr:
    r"""Apply :math:`F[T] = \partial_x (T^\gamma \partial_x T)` symbolically.

    Supported inputs are a single term (any exponent and *gamma*), any sum
    when :math:`\gamma = 0`, and sums sharing one shift when *gamma* is a
    positive integer.

    :raises ClosureError: for any other combination.
    """
    g = as_exact(gamma)
    if g == -1:
        raise ClosureError("gamma = -1 makes F logarithmic")

    if not expr.terms:
        return PowerExpr()
    if len(expr.terms) == 1 or g == 0:
        return PowerExpr.from_terms(apply_F_term(t, g) for t in expr.terms)

    if not (g.is_integer and g.is_positive):
        raise ClosureError(
            f"T**gamma of a {len(expr.terms)}-term expression does not expand "
            f"finitely for gamma = {g}")
    shifts = {t.shift for t in expr.terms}
    shift = expr.terms[0].shift
    if not all(_same(s, shift) for s in shifts):
        raise ClosureError("terms with different shifts do not close under F")

    ty = sp.Add(*[t.coeff * _y**t.exponent for t in expr.terms])
    image = sp.expand(sp.diff(ty**g * sp.diff(ty, _y), _y))

    terms = []
    for summand in sp.Add.make_args(image):
        coeff, exponent = summand.as_coeff_exponent(_y)
        if coeff.has(_y):
            raise ClosureError(f"could not collect power of x in {summand}")
        terms.append(PowerTerm(coeff, shift, exponent))
    return PowerExpr.from_terms(terms)


# }}}


# {{{ invariance and reduction


@dataclass(frozen=True)
class InvarianceResult:
    invariant: bool
    #: coordinate functions of the image, keyed by coefficient symbol
    coordinates: dict[sp.Symbol, sp.Expr]
    image: PowerExpr
    symbols: tuple[sp.Symbol, ...]


def _signature_matrix(
    exprs: Sequence[PowerExpr],
) -> tuple[list[tuple[sp.Expr, sp.Expr]], sp.Matrix]:
    keys: list[tuple[sp.Expr, sp.Expr]] = []
    for e in exprs:
        for t in e.terms:
            if not any(_same(t.shift, k[0]) and _same(t.exponent, k[1]) for k in keys):
                keys.append(t.signature)

    def row(k: tuple[sp.Expr, sp.Expr], e: PowerExpr) -> sp.Expr:
        for t in e.terms:
            if _same(t.shift, k[0]) and _same(t.exponent, k[1]):
                return t.coeff
        return sp.Integer(0)

    return keys, sp.Matrix([[row(k, e) for e in exprs] for k in keys])


def check_invariance(
    basis: Sequence[PowerExpr],
    gamma: Any,
    symbols: Sequence[sp.Symbol] | None = None,
) -> InvarianceResult:
    """Decide whether ``span(basis)`` is invariant under :func:`apply_F`.

    A generic element with indeterminate coefficients is mapped and its image
    is projected back onto the basis.

    :raises DependentBasisError: if the basis is linearly dependent.
    """
    n = len(basis)
    if symbols is None:
        symbols = sp.symbols(f"C1:{n + 1}")
    symbols = tuple(symbols)

    _, m = _signature_matrix(basis)
    if m.rank() < n:
        raise DependentBasisError("basis functions are linearly dependent")

    generic = PowerExpr()
    for c, f in zip(symbols, basis):
        generic = generic + f.scale(c)
    image = apply_F(generic, gamma)

    coordinates = _project(image, basis, symbols)
    return InvarianceResult(coordinates is not None, coordinates or {}, image, symbols)


def _project(
    image: PowerExpr, basis: Sequence[PowerExpr], symbols: Sequence[sp.Symbol]
) -> dict[sp.Symbol, sp.Expr] | None:
    keys, m = _signature_matrix([*basis, image])
    a, b = m[:, : len(basis)], m[:, len(basis)]

    phi = sp.symbols(f"Phi1:{len(basis) + 1}")
    solution = sp.linsolve((a, b), *phi)
    if not solution:
        return None
    (values,) = solution
    return {c: _tidy(v) for c, v in zip(symbols, values)}


def _tidy(expr: sp.Expr) -> sp.Expr:
    expr = sp.expand(expr)
    if any(not p.exp.is_number for p in expr.atoms(sp.Pow)):
        return sp.factor(sp.powsimp(expr, force=True))
    return expr


@dataclass(frozen=True)
class TimeOperator:
    """Time part of a reduced equation.

    ``telegraph``: :math:`d^2/dt^2 + \\lambda^\\nu d^{2 - \\nu}/dt^{2 - \\nu}`;
    ``caputo_composite``: :math:`d^\\nu/dt^\\nu \\, d/dt`.
    """

    kind: str
    lam: Any = LAMBDA
    nu: Any = NU

    def __post_init__(self) -> None:
        if self.kind not in ("telegraph", "caputo_composite"):
            raise ValueError(f"unknown time operator: {self.kind!r}")

    def apply_text(self, name: str) -> str:
        nu = _fmt(self.nu)
        if self.kind == "telegraph":
            order = "2-ν" if self.nu == NU else _fmt(2 - as_exact(self.nu))
            return f"Dtt[{name}] + {_fmt(self.lam)}^{nu}*Dt^{{{order}}}[{name}]"
        return f"Dt^{{{nu}}}[Dt[{name}]]"

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "lambda": _fmt(self.lam), "nu": _fmt(self.nu)}


def telegraph(lam: Any = LAMBDA, nu: Any = NU) -> TimeOperator:
    return TimeOperator("telegraph", lam, nu)


def caputo_composite(nu: Any = NU) -> TimeOperator:
    return TimeOperator("caputo_composite", LAMBDA, nu)


def _fmt(expr: Any) -> str:
    return sp.sstr(as_exact(expr)).replace("**", "^")


@dataclass(frozen=True)
class ReducedSystem:
    """Coupled fractional ODEs for the coordinates of a subspace solution."""

    unknowns: tuple[sp.Symbol, ...]
    time_operator: TimeOperator
    rhs: tuple[sp.Expr, ...]
    basis: tuple[PowerExpr, ...]
    gamma: sp.Expr
    source: tuple[sp.Expr, ...] | None = None
    t: sp.Symbol = field(default=sp.Symbol("t", positive=True))

    def equations(self) -> list[tuple[str, str]]:
        out = []
        for i, (u, r) in enumerate(zip(self.unknowns, self.rhs)):
            rhs = r if self.source is None else r + self.source[i]
            out.append((self.time_operator.apply_text(str(u)), _fmt(rhs)))
        return out

    def to_text(self) -> str:
        return "\n".join(f"{lhs} = {rhs}" for lhs, rhs in self.equations())

    def to_dict(self) -> dict[str, Any]:
        return {
            "unknowns": [str(u) for u in self.unknowns],
            "basis": [_fmt(b.to_sympy()) for b in self.basis],
            "gamma": _fmt(self.gamma),
            "time_operator": self.time_operator.to_dict(),
            "equations": [
                {"unknown": str(u), "lhs": lhs, "rhs": rhs}
                for u, (lhs, rhs) in zip(self.unknowns, self.equations())
            ],
        }

    def assemble(self) -> sp.Expr:
        """The field ``sum_i u_i(t) f_i(x)`` with the unknowns as symbols."""
        return sp.Add(*[u * f.to_sympy() for u, f in zip(self.unknowns, self.basis)])

    def vector_field(
        self, subs: dict | None = None
    ) -> tuple[Callable[[np.ndarray], np.ndarray], Callable[[np.ndarray], np.ndarray]]:
        """Numeric right-hand side and its Jacobian for the ODE solvers."""
        rhs = sp.Matrix([sp.sympify(r).subs(subs or {}) for r in self.rhs])
        jac = rhs.jacobian(sp.Matrix(self.unknowns))
        f = sp.lambdify([self.unknowns], rhs, "numpy")
        j = sp.lambdify([self.unknowns], jac, "numpy")

        def field_(u: np.ndarray) -> np.ndarray:
            return np.asarray(f(np.asarray(u, dtype=float)), dtype=float).reshape(-1)

        def jacobian(u: np.ndarray) -> np.ndarray:
            n = len(self.unknowns)
            return np.asarray(j(np.asarray(u, dtype=float)), dtype=float).reshape(n, n)

        return field_, jacobian


def default_names(basis: Sequence[PowerExpr]) -> list[tuple[str, int]]:
    """Conventional ``(name, basis index)`` pairs in display order.

    ``<1, x, x^2>`` uses ``f, g, h`` for the ``x^2, x, 1`` coordinates and
    ``<1, x^2>`` uses ``a, b``; one-dimensional spans use ``u`` and anything
    else ``u1, u2, ...`` in basis order.
    """
    n = len(basis)
    if n == 1:
        return [("u", 0)]

    monomial = {}
    for i, b in enumerate(basis):
        if len(b.terms) == 1 and b.terms[0].shift == 0 and b.terms[0].coeff == 1:
            monomial[b.terms[0].exponent] = i
    if len(monomial) == n:
        exps = set(monomial)
        if exps == {0, 1, 2}:
            return [("f", monomial[2]), ("g", monomial[1]), ("h", monomial[0])]
        if exps == {0, 2}:
            return [("a", monomial[0]), ("b", monomial[2])]
    return [(f"u{i + 1}", i) for i in range(n)]


def reduce(
    basis: Sequence[PowerExpr],
    gamma: Any,
    time_op: TimeOperator,
    names: Sequence[str] | None = None,
    source: PowerExpr | None = None,
) -> ReducedSystem:
    """Reduce ``time_op[T] = F[T] (+ source)`` on an invariant span.

    *source* may carry coefficients depending on the symbol ``t``; it must lie
    in the span.

    :raises NotInvariantError: if the span is not invariant (or the source
        does not lie in it).
    """
    if names is None:
        order = default_names(basis)
    else:
        order = [(name, i) for i, name in enumerate(names)]

    ordered = [basis[i] for _, i in order]
    symbols = tuple(sp.Symbol(name) for name, _ in order)

    result = check_invariance(ordered, gamma, symbols)
    if not result.invariant:
        raise NotInvariantError("span is not invariant under F")

    src = None
    if source is not None:
        coords = _project(source, ordered, symbols)
        if coords is None:
            raise NotInvariantError("source term does not lie in the span")
        src = tuple(coords[s] for s in symbols)

    return ReducedSystem(
        unknowns=symbols,
        time_operator=time_op,
        rhs=tuple(result.coordinates[s] for s in symbols),
        basis=tuple(ordered),
        gamma=as_exact(gamma),
        source=src,
    )


# }}}
