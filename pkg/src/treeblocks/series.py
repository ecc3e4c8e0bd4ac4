"""Exact truncated power series.

Coefficients are Python ``int`` or :class:`fractions.Fraction`; a fraction with
denominator 1 is always stored as ``int`` so integer pipelines stay on the fast
path.  Large products go through Kronecker substitution on GMP integers.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Iterable, Sequence, Union

import gmpy2
import mpmath

Coeff = Union[int, Fraction]

# below this length the schoolbook product beats packing
_KRONECKER_MIN = 24


class OrderMismatch(ValueError):
    pass


def norm(c) -> Coeff:
    """Reduce a rational-like value to ``int`` when it is integral."""
    if isinstance(c, int):
        return c
    c = Fraction(c)
    return c.numerator if c.denominator == 1 else c


def _pack(vals: Sequence[int], width: int) -> int:
    nbytes = width // 8
    return int.from_bytes(b"".join(v.to_bytes(nbytes, "little") for v in vals), "little")


def _unpack(x: int, width: int, count: int) -> list[int]:
    nbytes = width // 8
    raw = x.to_bytes(nbytes * count, "little")
    return [int.from_bytes(raw[i * nbytes:(i + 1) * nbytes], "little") for i in range(count)]


def _kron_nonneg(a: Sequence[int], b: Sequence[int], n: int) -> list[int]:
    bits = max(a).bit_length() + max(b).bit_length() + min(len(a), len(b)).bit_length() + 1
    width = -(-bits // 8) * 8
    prod = int(gmpy2.mpz(_pack(a, width)) * gmpy2.mpz(_pack(b, width)))
    # the packed product may hold fewer than len(a)+len(b)-1 slots; pad before cutting
    total = len(a) + len(b) - 1
    out = _unpack(prod, width, total) if prod.bit_length() <= width * total else None
    if out is None:  # pragma: no cover - cannot happen with the width above
        raise ArithmeticError("Kronecker slot overflow")
    return out[:n]


def int_convolve(a: Sequence[int], b: Sequence[int], n: int) -> list[int]:
    """First ``n`` coefficients of the product of two integer sequences."""
    a = list(a[:n])
    b = list(b[:n])
    if not a or not b:
        return [0] * n
    if min(len(a), len(b)) < _KRONECKER_MIN:
        out = [0] * n
        for i, x in enumerate(a):
            if x:
                for j, y in enumerate(b[: n - i]):
                    out[i + j] += x * y
        return out
    ap = [x if x > 0 else 0 for x in a]
    an = [-x if x < 0 else 0 for x in a]
    bp = [x if x > 0 else 0 for x in b]
    bn = [-x if x < 0 else 0 for x in b]
    out = [0] * n
    for u, v, sign in ((ap, bp, 1), (an, bn, 1), (ap, bn, -1), (an, bp, -1)):
        if any(u) and any(v):
            part = _kron_nonneg(u, v, n)
            for i, c in enumerate(part):
                out[i] += sign * c
    return out


def _lcm_den(coeffs: Iterable[Coeff]) -> int:
    return reduce(math.lcm, (c.denominator for c in coeffs if isinstance(c, Fraction)), 1)


def convolve(a: Sequence[Coeff], b: Sequence[Coeff], n: int) -> list[Coeff]:
    """Truncated Cauchy product of exact rational sequences."""
    da, db = _lcm_den(a), _lcm_den(b)
    ia = [int(c * da) for c in a]
    ib = [int(c * db) for c in b]
    raw = int_convolve(ia, ib, n)
    d = da * db
    if d == 1:
        return raw
    return [norm(Fraction(c, d)) for c in raw]


@dataclass(frozen=True)
class TruncSeries:
    """Power series known up to and including ``z**order``."""

    coeffs: tuple

    def __post_init__(self):
        if not self.coeffs:
            raise ValueError("a truncated series needs at least the constant term")
        object.__setattr__(self, "coeffs", tuple(norm(c) for c in self.coeffs))

    @classmethod
    def from_list(cls, coeffs: Iterable, order: int) -> "TruncSeries":
        c = list(coeffs)[: order + 1]
        c += [0] * (order + 1 - len(c))
        return cls(tuple(c))

    @classmethod
    def zero(cls, order: int) -> "TruncSeries":
        return cls((0,) * (order + 1))

    @classmethod
    def one(cls, order: int) -> "TruncSeries":
        return cls.from_list([1], order)

    @classmethod
    def var(cls, order: int) -> "TruncSeries":
        return cls.from_list([0, 1], order)

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def __getitem__(self, n: int) -> Coeff:
        return self.coeffs[n]

    def __len__(self):
        return len(self.coeffs)

    def _check(self, other: "TruncSeries"):
        if not isinstance(other, TruncSeries):
            return NotImplemented
        if other.order != self.order:
            raise OrderMismatch(f"orders {self.order} and {other.order} differ")
        return None

    def _coerce(self, other) -> "TruncSeries":
        if isinstance(other, TruncSeries):
            self._check(other)
            return other
        return TruncSeries.from_list([other], self.order)

    def __add__(self, other):
        other = self._coerce(other)
        return TruncSeries(tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))

    __radd__ = __add__

    def __neg__(self):
        return TruncSeries(tuple(-a for a in self.coeffs))

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, TruncSeries):
            c = norm(other)
            return TruncSeries(tuple(c * a for a in self.coeffs))
        self._check(other)
        return TruncSeries(tuple(convolve(self.coeffs, other.coeffs, self.order + 1)))

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if k < 0:
            return self.inverse() ** (-k)
        result = TruncSeries.one(self.order)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    def scale(self, c) -> "TruncSeries":
        """Substitute ``z -> c*z``."""
        c = norm(c)
        return TruncSeries(tuple(a * c**n for n, a in enumerate(self.coeffs)))

    def shift(self, k: int = 1) -> "TruncSeries":
        """Multiply by ``z**k`` and truncate."""
        return TruncSeries.from_list([0] * k + list(self.coeffs), self.order)

    def truncate(self, order: int) -> "TruncSeries":
        if order > self.order:
            raise OrderMismatch("cannot extend a truncated series")
        return TruncSeries(self.coeffs[: order + 1])

    def inverse(self) -> "TruncSeries":
        """Multiplicative inverse; needs a nonzero constant term."""
        c0 = self.coeffs[0]
        if c0 == 0:
            raise ZeroDivisionError("series with zero constant term is not invertible")
        n = self.order + 1
        a = self.coeffs
        inv0 = norm(Fraction(1) / c0)
        out = [inv0]
        for k in range(1, n):
            s = sum(a[j] * out[k - j] for j in range(1, k + 1))
            out.append(norm(-s * inv0))
        return TruncSeries(tuple(out))

    def __truediv__(self, other):
        if isinstance(other, TruncSeries):
            self._check(other)
            return self * other.inverse()
        d = Fraction(other)
        return TruncSeries(tuple(norm(a / d) for a in self.coeffs))

    def __eq__(self, other):
        if isinstance(other, TruncSeries):
            return self.coeffs == other.coeffs
        return NotImplemented

    def __hash__(self):
        return hash(self.coeffs)

    def is_zero(self) -> bool:
        return not any(self.coeffs)

    def first_nonzero(self) -> int | None:
        for i, c in enumerate(self.coeffs):
            if c:
                return i
        return None

    def __repr__(self):
        terms = [f"{c}*z^{i}" for i, c in enumerate(self.coeffs) if c]
        return f"TruncSeries({' + '.join(terms) or '0'}; O(z^{self.order + 1}))"

    # --- serialization -------------------------------------------------

    def to_json(self) -> str:
        return json.dumps({"order": self.order, "coeffs": [_rat_str(c) for c in self.coeffs]})

    @classmethod
    def from_json(cls, text: str) -> "TruncSeries":
        data = json.loads(text)
        coeffs = [Fraction(s) for s in data["coeffs"]]
        if len(coeffs) != data["order"] + 1:
            raise ValueError("coefficient count does not match order")
        return cls(tuple(coeffs))


def _rat_str(c: Coeff) -> str:
    c = Fraction(c)
    return str(c.numerator) if c.denominator == 1 else f"{c.numerator}/{c.denominator}"


def add(a: TruncSeries, b: TruncSeries) -> TruncSeries:
    return a + b


def mul(a: TruncSeries, b: TruncSeries) -> TruncSeries:
    return a * b


def derive(a: TruncSeries) -> TruncSeries:
    """Formal derivative; the result has order ``a.order - 1`` (min 0)."""
    if a.order == 0:
        return TruncSeries((0,))
    return TruncSeries(tuple(n * a.coeffs[n] for n in range(1, a.order + 1)))


def compose(outer: TruncSeries, inner: TruncSeries) -> TruncSeries:
    """``outer(inner(z))`` by Horner's rule; ``inner`` must vanish at 0."""
    if inner.coeffs[0] != 0:
        raise ValueError("inner series must have zero constant term")
    n = inner.order
    v = inner.first_nonzero()
    # inner = z^v * q, so outer coefficients beyond n // v never reach order n
    top = 0 if v is None else n // v
    if outer.order < top:
        raise OrderMismatch("outer series is truncated below the target order")
    acc = TruncSeries.from_list([outer.coeffs[top]], n)
    for k in range(top - 1, -1, -1):
        acc = acc * inner + outer.coeffs[k]
    return acc


def revert(a: TruncSeries) -> TruncSeries:
    """Compositional inverse of a series with a(0)=0 and a'(0)=1."""
    if a.coeffs[0] != 0 or a.order < 1 or a.coeffs[1] != 1:
        raise ValueError("reversion needs a(0) = 0 and a'(0) = 1")
    n = a.order
    # r(a(y)) = y, solved triangularly with the power table of a
    powers = [TruncSeries.one(n)]
    for _ in range(n):
        powers.append(powers[-1] * a)
    r = [0] * (n + 1)
    r[1] = 1
    for k in range(2, n + 1):
        r[k] = norm(-sum(r[j] * powers[j][k] for j in range(1, k)))
    return TruncSeries(tuple(r))


@dataclass(frozen=True)
class RealValue:
    value: mpmath.mpf
    bound: mpmath.mpf


def eval_real(a: TruncSeries, x, dps: int = 64) -> RealValue:
    """Partial sum at ``x`` with the crude remainder bound ``|a_N x^N| * N``."""
    with mpmath.workdps(dps):
        x = mpmath.mpf(x)
        acc = mpmath.mpf(0)
        for c in reversed(a.coeffs):
            acc = acc * x + _to_mpf(c)
        n = a.order
        bound = abs(_to_mpf(a.coeffs[n]) * x**n) * n
        return RealValue(+acc, +bound)


def _to_mpf(c: Coeff):
    if isinstance(c, Fraction):
        return mpmath.mpf(c.numerator) / c.denominator
    return mpmath.mpf(c)


@dataclass(frozen=True)
class UPoly:
    """Polynomial in the block weight ``u`` with exact coefficients."""

    coeffs: tuple = ()

    def __post_init__(self):
        c = [norm(x) for x in self.coeffs]
        while c and c[-1] == 0:
            c.pop()
        object.__setattr__(self, "coeffs", tuple(c))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def __add__(self, other):
        other = other if isinstance(other, UPoly) else UPoly((other,))
        n = max(len(self.coeffs), len(other.coeffs))
        a = self.coeffs + (0,) * (n - len(self.coeffs))
        b = other.coeffs + (0,) * (n - len(other.coeffs))
        return UPoly(tuple(x + y for x, y in zip(a, b)))

    __radd__ = __add__

    def __neg__(self):
        return UPoly(tuple(-x for x in self.coeffs))

    def __sub__(self, other):
        return self + (-(other if isinstance(other, UPoly) else UPoly((other,))))

    def __mul__(self, other):
        if not isinstance(other, UPoly):
            return UPoly(tuple(norm(other) * x for x in self.coeffs))
        if not self.coeffs or not other.coeffs:
            return UPoly()
        n = len(self.coeffs) + len(other.coeffs) - 1
        return UPoly(tuple(convolve(self.coeffs, other.coeffs, n)))

    __rmul__ = __mul__

    def __call__(self, u):
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * u + c
        return norm(acc) if not isinstance(acc, float) else acc

    def __bool__(self):
        return bool(self.coeffs)

    def __repr__(self):
        return "UPoly(" + " + ".join(f"{c}*u^{k}" for k, c in enumerate(self.coeffs) if c) + ")"


@dataclass(frozen=True)
class BiSeries:
    """Series in ``z`` whose coefficients are polynomials in ``u``."""

    coeffs: tuple

    def __post_init__(self):
        object.__setattr__(
            self, "coeffs", tuple(c if isinstance(c, UPoly) else UPoly((c,)) for c in self.coeffs)
        )

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def __getitem__(self, n: int) -> UPoly:
        return self.coeffs[n]

    @classmethod
    def from_series(cls, s: TruncSeries, upoly: UPoly | None = None) -> "BiSeries":
        """Lift ``s`` (optionally times a fixed polynomial in ``u``)."""
        f = upoly if upoly is not None else UPoly((1,))
        return cls(tuple(f * c for c in s.coeffs))

    def _check(self, other: "BiSeries"):
        if other.order != self.order:
            raise OrderMismatch(f"orders {self.order} and {other.order} differ")

    def __add__(self, other):
        if not isinstance(other, BiSeries):
            other = BiSeries((other,) + (0,) * self.order)
        self._check(other)
        return BiSeries(tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))

    __radd__ = __add__

    def __neg__(self):
        return BiSeries(tuple(-a for a in self.coeffs))

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, BiSeries):
            return BiSeries(tuple(a * other for a in self.coeffs))
        self._check(other)
        n = self.order + 1
        deg = max((c.degree for c in self.coeffs + other.coeffs), default=0)
        stride = 2 * max(deg, 0) + 1
        # flatten z^i u^k -> index i*stride + k so a single univariate product does the work
        flat_a = [0] * (n * stride)
        flat_b = [0] * (n * stride)
        for i, c in enumerate(self.coeffs):
            flat_a[i * stride:i * stride + len(c.coeffs)] = c.coeffs
        for i, c in enumerate(other.coeffs):
            flat_b[i * stride:i * stride + len(c.coeffs)] = c.coeffs
        prod = convolve(flat_a, flat_b, n * stride)
        return BiSeries(tuple(UPoly(tuple(prod[i * stride:(i + 1) * stride])) for i in range(n)))

    __rmul__ = __mul__

    def __eq__(self, other):
        if isinstance(other, BiSeries):
            return self.coeffs == other.coeffs
        return NotImplemented

    def __hash__(self):
        return hash(self.coeffs)

    def at(self, u) -> TruncSeries:
        """Specialize the weight variable to a number."""
        return TruncSeries(tuple(c(u) for c in self.coeffs))

    def derive(self) -> "BiSeries":
        if self.order == 0:
            return BiSeries((UPoly(),))
        return BiSeries(tuple(self.coeffs[n] * n for n in range(1, self.order + 1)))

    def shift(self, k: int = 1) -> "BiSeries":
        c = (UPoly(),) * k + self.coeffs
        return BiSeries(c[: self.order + 1])

    def to_json(self) -> str:
        return json.dumps(
            {"order": self.order, "coeffs": [[_rat_str(x) for x in c.coeffs] for c in self.coeffs]}
        )


def compose_bi(outer: TruncSeries | BiSeries, inner: BiSeries) -> BiSeries:
    """``outer(inner)`` with ``inner`` vanishing at ``z = 0``."""
    if inner.coeffs[0]:
        raise ValueError("inner series must have zero constant term")
    n = inner.order
    oc = outer.coeffs
    if len(oc) < n + 1:
        raise OrderMismatch("outer series is truncated below the target order")
    acc = BiSeries((oc[n],) + (0,) * n)
    for k in range(n - 1, -1, -1):
        acc = acc * inner + BiSeries((oc[k],) + (0,) * n)
    return acc
