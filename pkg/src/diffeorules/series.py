"""Truncated power series, partial Bell polynomials, Lagrange inversion and
the closed-form coefficient formulas built on them.

Series coefficients are :class:`~diffeorules.algebra.RationalFunction`, so
one code path serves numeric and symbolic diffeomorphism coefficients alike.
Composition exists twice on purpose: the Bell-polynomial route is the
production path and the naive truncated-substitution route is its oracle in
the test suite.
"""

from __future__ import annotations

from fractions import Fraction
from math import comb, factorial
from typing import Callable, Mapping, Sequence

from .algebra import (
    AlgebraError,
    Monomial,
    Polynomial,
    RationalFunction,
    RF_MINUS_I,
    RF_ONE,
    RF_ZERO,
    Scalar,
    coupling,
    diffeo_coeff,
    fixed_offshell,
    rf,
)

CoeffFn = Callable[[int], RationalFunction]


def bell_partial(n: int, k: int, args: Sequence[RationalFunction]) -> RationalFunction:
    """Partial Bell polynomial ``B_{n,k}(x_1, ..., x_{n-k+1})``.

    Computed through the standard recurrence
    ``B_{n,k} = sum_j C(n-1, j-1) x_j B_{n-j,k-1}``; the set-partition
    enumeration serves as the independent oracle in the tests.
    """
    if n < 0 or k < 0:
        raise AlgebraError("Bell polynomial indices must be nonnegative")
    if k > n:
        return RF_ZERO
    if n > 0 and k > 0 and len(args) < n - k + 1:
        raise AlgebraError(f"B_{{{n},{k}}} needs {n - k + 1} arguments, got {len(args)}")
    table: dict[tuple[int, int], RationalFunction] = {(0, 0): RF_ONE}

    def get(m: int, j: int) -> RationalFunction:
        if j > m:
            return RF_ZERO
        if (m, j) in table:
            return table[(m, j)]
        if j == 0:
            value = RF_ONE if m == 0 else RF_ZERO
        else:
            value = RF_ZERO
            for step in range(1, m - j + 2):
                arg = args[step - 1]
                if arg.is_zero():
                    continue
                sub = get(m - step, j - 1)
                if sub.is_zero():
                    continue
                value = value + (arg * sub).scaled(Scalar(comb(m - 1, step - 1)))
        table[(m, j)] = value
        return value

    return get(n, k)


class PowerSeries:
    """Truncated series ``c_0 + c_1 t + ... + c_N t^N`` with RF coefficients."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Sequence[RationalFunction]):
        if not coeffs:
            raise AlgebraError("a power series needs at least the constant coefficient")
        self.coeffs = list(coeffs)

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @staticmethod
    def zero(order: int) -> "PowerSeries":
        return PowerSeries([RF_ZERO] * (order + 1))

    @staticmethod
    def identity(order: int) -> "PowerSeries":
        if order < 1:
            raise AlgebraError("the identity series needs order >= 1")
        coeffs = [RF_ZERO] * (order + 1)
        coeffs[1] = RF_ONE
        return PowerSeries(coeffs)

    def __getitem__(self, n: int) -> RationalFunction:
        return self.coeffs[n] if 0 <= n <= self.order else RF_ZERO

    def __eq__(self, other) -> bool:
        return isinstance(other, PowerSeries) and self.coeffs == other.coeffs

    def __add__(self, other: "PowerSeries") -> "PowerSeries":
        n = min(self.order, other.order)
        return PowerSeries([self[i] + other[i] for i in range(n + 1)])

    def __sub__(self, other: "PowerSeries") -> "PowerSeries":
        n = min(self.order, other.order)
        return PowerSeries([self[i] - other[i] for i in range(n + 1)])

    def __mul__(self, other: "PowerSeries") -> "PowerSeries":
        n = min(self.order, other.order)
        out = [RF_ZERO] * (n + 1)
        for i, ci in enumerate(self.coeffs[: n + 1]):
            if ci.is_zero():
                continue
            for j in range(n + 1 - i):
                cj = other[j]
                if not cj.is_zero():
                    out[i + j] = out[i + j] + ci * cj
        return PowerSeries(out)

    def __pow__(self, k: int) -> "PowerSeries":
        if k < 0:
            raise AlgebraError("series power must be nonnegative")
        out = PowerSeries([RF_ONE] + [RF_ZERO] * self.order)
        for _ in range(k):
            out = out * self
        return out

    def scaled(self, c: Scalar) -> "PowerSeries":
        return PowerSeries([x.scaled(c) for x in self.coeffs])

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.coeffs)

    def __str__(self) -> str:
        return " + ".join(f"({c})*t^{n}" for n, c in enumerate(self.coeffs) if not c.is_zero()) or "0"

    def __repr__(self) -> str:
        return f"PowerSeries({self})"


def compose(f: PowerSeries, g: PowerSeries) -> PowerSeries:
    """Coefficients of ``f(g(t))`` through the Bell-polynomial composition rule."""
    if not g[0].is_zero():
        raise AlgebraError("composition requires the inner series to vanish at 0")
    n = min(f.order, g.order)
    g_args = [g[m].scaled(Scalar(factorial(m))) for m in range(1, n + 1)]
    out = [f[0]] + [RF_ZERO] * n
    for m in range(1, n + 1):
        acc = RF_ZERO
        for k in range(1, m + 1):
            fk = f[k]
            if fk.is_zero():
                continue
            bell = bell_partial(m, k, g_args[: m - k + 1])
            if bell.is_zero():
                continue
            acc = acc + (fk * bell).scaled(Scalar(factorial(k)))
        out[m] = acc.scaled(Scalar(Fraction(1, factorial(m))))
    return PowerSeries(out)


def compose_naive(f: PowerSeries, g: PowerSeries) -> PowerSeries:
    """Oracle composition: substitute and truncate term by term."""
    if not g[0].is_zero():
        raise AlgebraError("composition requires the inner series to vanish at 0")
    n = min(f.order, g.order)
    out = PowerSeries([f[0]] + [RF_ZERO] * n)
    g_pow = PowerSeries([RF_ONE] + [RF_ZERO] * n)
    for k in range(1, n + 1):
        g_pow = g_pow * g
        fk = f[k]
        if not fk.is_zero():
            out = out + PowerSeries([c * fk for c in g_pow.coeffs])
    return out


def invert(f: PowerSeries) -> PowerSeries:
    """Compositional inverse of a series with ``c_0 = 0`` and scalar ``c_1``.

    Uses the Lagrange-inversion expression of the coefficients through Bell
    polynomials; the round trip ``compose(invert(f), f) == identity`` is the
    acceptance property.
    """
    if not f[0].is_zero():
        raise AlgebraError("inversion requires a vanishing constant term")
    f1 = f[1]
    if f1.is_zero():
        raise AlgebraError("inversion requires an invertible linear coefficient")
    if not f1.is_constant():
        raise AlgebraError("inversion implemented for scalar linear coefficient only")
    c1 = f1.constant_value()
    n_max = f.order
    args = [RF_ZERO] + [
        f[m].scaled(Scalar(-factorial(m))) for m in range(2, n_max + 1)
    ]
    out = [RF_ZERO] * (n_max + 1)
    if n_max >= 1:
        out[1] = rf(Scalar(1) / c1)
    inv_c1 = Scalar(1) / c1
    for n in range(2, n_max + 1):
        acc = RF_ZERO
        for k in range(1, n):
            bell = bell_partial(n - 1 + k, k, args[: n])
            if bell.is_zero():
                continue
            power = inv_c1
            for _ in range(n + k - 1):
                power = power * inv_c1
            acc = acc + bell.scaled(power)
        out[n] = acc.scaled(Scalar(Fraction(1, factorial(n))))
    return PowerSeries(out)


def fuss_catalan(m: int, a: int, b: int) -> Scalar:
    """Fuss-Catalan number ``F_m(a, b) = b/(ma+b) C(ma+b, m)`` exactly; the
    binomial form also covers m > ma+b, where the value is zero."""
    if m < 0 or a < 0 or b < 1:
        raise AlgebraError("fuss_catalan expects m >= 0, a >= 0, b >= 1")
    value = Fraction(b * comb(m * a + b, m), m * a + b)
    if value.denominator != 1:
        raise AlgebraError("Fuss-Catalan evaluation is not integral")
    return Scalar(value)


def fc_series(a: int, b: int, order: int) -> PowerSeries:
    """Generating series ``sum_m F_m(a,b) t^m`` truncated at ``order``."""
    return PowerSeries([rf(fuss_catalan(m, a, b)) for m in range(order + 1)])


def fc_functional_residual(a: int, order: int) -> PowerSeries:
    """Residual of the defining identity ``C = t*C^a + 1`` for ``b = 1``."""
    c = fc_series(a, 1, order)
    t = PowerSeries.identity(order)
    one = PowerSeries([RF_ONE] + [RF_ZERO] * order)
    return c - (t * c**a + one)


def _coeff_accessor(a) -> CoeffFn:
    if callable(a):
        return a
    if isinstance(a, Mapping):
        table = {int(k): rf(v) for k, v in a.items()}

        def lookup(j: int) -> RationalFunction:
            if j == 0:
                return RF_ONE
            if j < 0:
                raise AlgebraError("coefficient index must be nonnegative")
            if j not in table:
                raise AlgebraError(f"diffeomorphism coefficient a{j} is not bound")
            return table[j]

        return lookup
    raise AlgebraError("expected a coefficient mapping or accessor")


def symbolic_coeffs(j: int) -> RationalFunction:
    """Default accessor: a_0 = 1 and a_j the interned symbol for j >= 1."""
    if j == 0:
        return RF_ONE
    return rf(diffeo_coeff(j))


def _kinetic_args(a: CoeffFn, count: int) -> list[RationalFunction]:
    # x_m = (m+1)! a_m, the argument list of the kinetic-term Bell polynomials
    return [a(m).scaled(Scalar(factorial(m + 1))) for m in range(1, count + 1)]


def _tangent_args(a: CoeffFn, count: int) -> list[RationalFunction]:
    # x_m = m! a_{m-1}, the argument list with the tangent-to-identity head
    return [a(m - 1).scaled(Scalar(factorial(m))) for m in range(1, count + 1)]


def vertex_coefficients(n: int, a=symbolic_coeffs):
    """Induced couplings (f_n, c_{n-2}, g_n) of the n-valent vertex.

    f_n multiplies the sum of adjacent offshell variables, g_n = n f_n - c_{n-2}
    multiplies the mass-squared constant.  Valid for n >= 2.
    """
    if n < 2:
        raise AlgebraError("vertex coefficients need n >= 2")
    acc = _coeff_accessor(a) if not callable(a) else a
    kin = _kinetic_args(acc, max(n - 2, 0))
    f_n = bell_partial(n - 2, 1, kin) + bell_partial(n - 2, 2, kin)
    c_nm2 = bell_partial(n, 2, _tangent_args(acc, n - 1))
    g_n = f_n.scaled(Scalar(n)) - c_nm2
    return f_n, c_nm2, g_n


def gn_explicit(n: int, a=symbolic_coeffs) -> RationalFunction:
    """Mass-term coupling as the explicit double-product sum (n >= 3)."""
    if n < 3:
        raise AlgebraError("explicit mass coupling form needs n >= 3")
    acc = _coeff_accessor(a) if not callable(a) else a
    total = RF_ZERO
    for k in range(0, n - 1):
        weight = (n - k - 2) * k
        if weight:
            total = total + (acc(n - k - 2) * acc(k)).scaled(Scalar(weight))
    return total.scaled(Scalar(Fraction(n * factorial(n - 2), 2)))


def tree_sum_closed_form(n: int, a=symbolic_coeffs) -> RationalFunction:
    """Closed form of the one-offshell-leg tree sum b_n.

    b_1 = 1 and b_{n+1} = sum_k (n+k)!/n! B_{n,k}(-1! a_1, ..., -n! a_n).
    """
    if n < 1:
        raise AlgebraError("tree sums are indexed from 1")
    if n == 1:
        return RF_ONE
    acc = _coeff_accessor(a) if not callable(a) else a
    m = n - 1
    args = [acc(j).scaled(Scalar(-factorial(j))) for j in range(1, m + 1)]
    total = RF_ZERO
    for k in range(1, m + 1):
        bell = bell_partial(m, k, args[: m - k + 1])
        if not bell.is_zero():
            total = total + bell.scaled(Scalar(Fraction(factorial(m + k), factorial(m))))
    return total


def inverse_series_tree_sum(n: int, a=symbolic_coeffs, order: int | None = None) -> RationalFunction:
    """b_n as n! times the n-th coefficient of the inverse of the field map."""
    acc = _coeff_accessor(a) if not callable(a) else a
    size = order if order is not None else n
    coeffs = [RF_ZERO] + [acc(j - 1) for j in range(1, size + 1)]
    series = PowerSeries(coeffs)
    return invert(series)[n].scaled(Scalar(factorial(n)))


def tuned_diffeo_coeffs(s: int, max_j: int) -> dict[int, RationalFunction]:
    """Coefficients of the diffeomorphism that cancels a power-s interaction
    at the fixed offshell value xp.

    a_{s-2} = lambda_s / ((s-1)! xp), a_{j(s-2)} = a_{s-2}^j F_j(s-1, 1), and
    every other coefficient vanishes.
    """
    if s < 3:
        raise AlgebraError("interaction powers start at 3")
    lam = Polynomial.symbol(coupling(s)).scaled(Scalar(Fraction(1, factorial(s - 1))))
    base = RationalFunction(lam, Monomial.of(fixed_offshell()))
    out: dict[int, RationalFunction] = {}
    for k in range(1, max_j + 1):
        if k % (s - 2) == 0:
            j = k // (s - 2)
            out[k] = (base**j).scaled(fuss_catalan(j, s - 1, 1))
        else:
            out[k] = RF_ZERO
    return out


def coupling_linear_closed_form(
    s: int, n: int, a=symbolic_coeffs, b: CoeffFn | None = None
) -> RationalFunction:
    """Bell-sum form of the coupling-linear onshell tree sum S^(s)_n.

    With b_k the one-offshell tree sums of the same coefficients this equals
    -i lambda_s * delta_{n,s}.
    """
    if n < s:
        raise AlgebraError("the coupling-linear sum needs n >= s")
    acc = _coeff_accessor(a) if not callable(a) else a
    b_acc: CoeffFn = b if b is not None else (lambda k: tree_sum_closed_form(k, acc))
    tangent = _tangent_args(acc, n)
    b_args = [b_acc(j) for j in range(1, n + 1)]
    total = RF_ZERO
    for k in range(s, n + 1):
        left = bell_partial(k, s, tangent[: k - s + 1])
        if left.is_zero():
            continue
        right = bell_partial(n, k, b_args[: n - k + 1])
        if right.is_zero():
            continue
        total = total + left * right
    return total * RF_MINUS_I * rf(coupling(s))
