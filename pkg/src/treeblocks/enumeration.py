"""Exact coefficient tables for tree-rooted maps and their 2-connected blocks."""
from __future__ import annotations

import enum
import hashlib
import json
import logging
import os
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb
from pathlib import Path

import gmpy2
from gmpy2 import mpq, mpz

from .series import (
    BiSeries,
    TruncSeries,
    UPoly,
    compose,
    compose_bi,
    derive,
    norm,
    revert,
)

log = logging.getLogger(__name__)


class VerificationError(AssertionError):
    """An exact identity failed; carries the first offending order."""

    def __init__(self, what: str, order: int | None = None):
        super().__init__(what if order is None else f"{what} (first failure at order {order})")
        self.order = order


class Provenance(enum.Enum):
    CLOSED_FORM = "closed_form"
    TRIANGULAR_SOLVE = "triangular_solve"
    BRUTE_FORCE = "brute_force"


@dataclass(frozen=True)
class SequenceTable:
    name: str
    values: tuple
    provenance: Provenance

    def __post_init__(self):
        if any((not isinstance(v, int)) or v < 0 for v in self.values):
            raise ValueError(f"{self.name}: entries must be nonnegative integers")


def catalan(n: int) -> int:
    if n < 0:
        raise ValueError("n must be nonnegative")
    return comb(2 * n, n) // (n + 1)


def shuffle_sum(n: int) -> int:
    """Sum over k of C(2n, 2k) Cat_k Cat_{n-k}: tree word shuffled into dual word."""
    return sum(comb(2 * n, 2 * k) * catalan(k) * catalan(n - k) for k in range(n + 1))


def mullin_count(n: int) -> int:
    """Number of tree-rooted maps with ``n`` edges, cross-checked two ways."""
    value = catalan(n) * catalan(n + 1)
    if value != shuffle_sum(n):
        raise VerificationError(f"Cat_n Cat_(n+1) disagrees with the shuffle sum at n={n}")
    return value


def series_M(N: int) -> TruncSeries:
    return TruncSeries(tuple(catalan(n) * catalan(n + 1) for n in range(N + 1)))


def dfinite_residual(M: TruncSeries) -> TruncSeries:
    """z^2(16z-1)M''' + 6z(16z-1)M'' + 6(18z-1)M' + 12M, truncated to order N-3."""
    N = M.order
    if N < 3:
        raise ValueError("need order at least 3")
    M1 = derive(M)
    M2 = derive(M1)
    M3 = derive(M2)
    K = N - 3
    m0, m1, m2, m3 = (s.truncate(K) for s in (M, M1, M2, M3))
    z = TruncSeries.var(K)
    poly2 = z * z * (16 * z - 1)
    poly1 = 6 * z * (16 * z - 1)
    poly0 = 6 * (18 * z - 1)
    return poly2 * m3 + poly1 * m2 + poly0 * m1 + 12 * m0


def verify_dfinite(N: int, M: TruncSeries | None = None) -> TruncSeries:
    if N < 8:
        raise ValueError("verify_dfinite needs N >= 8")
    res = dfinite_residual(M if M is not None else series_M(N))
    bad = res.first_nonzero()
    if bad is not None:
        raise VerificationError("D-finite equation residual is nonzero", bad)
    return res


# ---------------------------------------------------------------------------
# 2-connected blocks


def _dot(a, b, lo: int, hi: int, n: int):
    s = mpz(0)
    for j in range(lo, hi + 1):
        s += a[j] * b[n - j]
    return s


def _affine_dot(weights, P, lo: int, hi: int, n: int):
    """Like _dot, but the entry P[n-lo] may be an affine pair (c0, c1)."""
    c0 = mpz(0)
    c1 = mpz(0)
    for j in range(lo, hi + 1):
        v = P[n - j]
        if isinstance(v, tuple):
            c0 += weights[j] * v[0]
            c1 += weights[j] * v[1]
        else:
            c0 += weights[j] * v
    return c0, c1


def _exact(x, what: str):
    if x.denominator != 1:
        raise VerificationError(f"non-integral {what}")
    return mpz(x.numerator)


def ode_solve(N: int, u: Fraction) -> tuple[list[int], int]:
    """Coefficients of K(x) = M(w(s x)) with w = z ((uK + 1 - u)/K)^2.

    The composite is pushed through the linear ODE of M, which leaves one new
    unknown per order, so the whole table costs O(N^2) big-integer products.
    ``u = 0`` gives B itself (w = z/B^2 inverts z M(z)^2).  For ``u = p/q > 0``
    the variable is rescaled by ``s = p q`` so every intermediate stays integral.
    Returns ``(K_tilde, s)`` with ``[z^n] K = K_tilde[n] / s**n``.
    """
    u = Fraction(u)
    if u < 0:
        raise ValueError("u must be nonnegative")
    s = 1 if u == 0 else u.numerator * u.denominator
    one_minus_u = mpq(1 - u)
    smpz = mpz(s)
    K = [mpz(1)]
    inv = [mpz(1)]
    alpha = [mpz(1)]
    a2 = [mpz(1)]
    a4 = [mpz(1)]
    a6 = [mpz(1)]
    wp = [smpz]  # derivative of w~ in x
    P1: list = []
    P2: list = []
    P3: list = []
    # powers of s for the w~ factors in the residual
    s2, s3 = smpz**2, smpz**3
    for n in range(1, N + 1):
        # top entries of P1, P2, P3 as affine functions (c0 + c1 K_n) / s^k
        k1 = n - 1
        t = _dot(wp, P1, 1, k1, k1) if k1 >= 1 else mpz(0)
        p1 = (mpq(-t, s), mpq(n, s))
        P1.append(p1)
        if n >= 2:
            k2 = n - 2
            t = _dot(wp, P2, 1, k2, k2) if k2 >= 1 else mpz(0)
            p2 = (((n - 1) * p1[0] - t) / s, (n - 1) * p1[1] / s)
            P2.append(p2)
        if n >= 3:
            k3 = n - 3
            t = _dot(wp, P3, 1, k3, k3) if k3 >= 1 else mpz(0)
            p3 = (((n - 2) * p2[0] - t) / s, (n - 2) * p2[1] / s)
            P3.append(p3)
        r = n - 1
        c0 = mpq(12 * K[r]) - 6 * p1[0]
        c1 = -6 * p1[1]
        # (coef, alpha power table, P table, x-shift)
        for coef, table, P, sh in (
            (16 * s3, a6, P3, 3),
            (-s2, a4, P3, 2),
            (96 * s2, a4, P2, 2),
            (-6 * smpz, a2, P2, 1),
            (108 * smpz, a2, P1, 1),
        ):
            top = r - sh
            if top < 0:
                continue
            x0, x1 = _affine_dot(table, P, 0, top, top)
            c0 += coef * x0
            c1 += coef * x1
        Kn = _exact(-c0 / c1, f"coefficient at order {n}")
        K.append(Kn)
        P1[-1] = _exact(p1[0] + p1[1] * Kn, "P1 entry")
        if n >= 2:
            P2[-1] = _exact(p2[0] + p2[1] * Kn, "P2 entry")
        if n >= 3:
            P3[-1] = _exact(p3[0] + p3[1] * Kn, "P3 entry")
        inv.append(-_dot(K, inv, 1, n, n))
        if u == 0:
            alpha.append(inv[n])
        else:
            alpha.append(_exact(one_minus_u * inv[n], "weight ratio"))
        a2.append(_dot(alpha, alpha, 0, n, n))
        a4.append(_dot(a2, a2, 0, n, n))
        a6.append(_dot(a4, a2, 0, n, n))
        wp.append(smpz * (n + 1) * a2[n])
    return [int(x) for x in K], s


def _triangular_B(N: int) -> list[int]:
    """b_n = m_n - sum_{k<n} b_k [z^n] H^k with H = z M^2."""
    M = series_M(N)
    H = (M * M).shift(1)
    powers = [TruncSeries.one(N)]
    for _ in range(N):
        powers.append(powers[-1] * H)
    b = [1] + [0] * N
    for n in range(1, N + 1):
        b[n] = M[n] - sum(b[k] * powers[k][n] for k in range(n))
    return b


def cache_dir() -> Path:
    return Path(os.environ.get("TREEBLOCKS_CACHE", Path.home() / ".cache" / "treeblocks"))


def _load_cached_b(N: int) -> list[int] | None:
    path = cache_dir() / "b_table.json"
    try:
        data = json.loads(path.read_text())
    except (OSError, ValueError):
        return None
    vals = [int(x) for x in data.get("values", [])]
    digest = hashlib.sha256(",".join(map(str, vals)).encode()).hexdigest()
    if digest != data.get("sha256") or len(vals) <= N:
        return None
    return vals[: N + 1]


def _store_cached_b(vals: list[int]) -> None:
    path = cache_dir() / "b_table.json"
    try:
        old = json.loads(path.read_text())
        if len(old.get("values", [])) >= len(vals):
            return
    except (OSError, ValueError):
        pass
    digest = hashlib.sha256(",".join(map(str, vals)).encode()).hexdigest()
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps({"values": [str(v) for v in vals], "sha256": digest}))
        tmp.replace(path)
    except OSError as exc:  # a read-only home is not an error
        log.warning("could not write b_n cache: %s", exc)


@lru_cache(maxsize=8)
def _b_values(N: int, method: str) -> tuple:
    if method == "triangular":
        vals = _triangular_B(N)
    elif method == "ode":
        vals = _load_cached_b(N) if N > 64 else None
        if vals is None:
            vals, _ = ode_solve(N, Fraction(0))
            if N > 64:
                _store_cached_b(vals)
        else:
            # cheap guard against a stale or foreign cache file
            if vals[:65] != _triangular_B(64):
                raise VerificationError("cached b_n table disagrees with a fresh solve")
    else:
        raise ValueError(f"unknown method {method!r}")
    for n, v in enumerate(vals):
        if not isinstance(v, int) or v < 0:
            raise VerificationError(f"b_{n} = {v} is not a nonnegative integer")
    return tuple(vals)


def extract_B(N: int, method: str = "ode") -> TruncSeries:
    """The series B with M(z) = B(z M(z)^2), exact to order ``N``."""
    if method == "auto":
        method = "triangular" if N <= 64 else "ode"
    return TruncSeries(_b_values(N, method))


def b_table(N: int, method: str = "ode") -> SequenceTable:
    return SequenceTable("b", _b_values(N, method), Provenance.TRIANGULAR_SOLVE)


def m_table(N: int) -> SequenceTable:
    return SequenceTable("m", tuple(mullin_count(n) for n in range(N + 1)), Provenance.CLOSED_FORM)


def verify_B_roundtrip(B: TruncSeries, M: TruncSeries | None = None) -> None:
    N = B.order
    M = M if M is not None else series_M(N)
    H = (M * M).shift(1)
    diff = compose(B, H) - M
    bad = diff.first_nonzero()
    if bad is not None:
        raise VerificationError("M(z) != B(z M(z)^2)", bad)


# ---------------------------------------------------------------------------
# block-weighted maps


def bivariate_M(N: int, B: TruncSeries | None = None) -> BiSeries:
    """M(z,u) from M = u B(z M^2) + 1 - u, iterated until every order is fixed."""
    B = B if B is not None else extract_B(N, method="auto")
    if B.order < N:
        raise ValueError("B is truncated below N")
    B = B.truncate(N)
    u = UPoly((0, 1))
    one_minus_u = UPoly((1, -1))
    M = BiSeries((UPoly((1,)),) + (UPoly(),) * N)
    for _ in range(N):
        H = (M * M).shift(1)
        nxt = compose_bi(B, H) * u
        nxt = BiSeries((nxt[0] + one_minus_u,) + nxt.coeffs[1:])
        if nxt == M:
            break
        M = nxt
    if M.at(1) != series_M(N):
        raise VerificationError("M(z,1) does not specialize to M(z)")
    for n in range(1, N + 1):
        if M[n].degree > n:
            raise VerificationError(f"degree in u exceeds n at order {n}")
    return M


def weighted_coeffs(N: int, u) -> list[Fraction]:
    """[z^n] M(z,u) for n <= N at a fixed nonnegative rational ``u``."""
    u = Fraction(u)
    if u <= 0:
        raise ValueError("u must be positive")
    if u == 1:
        return [Fraction(x) for x in series_M(N).coeffs]
    K, s = ode_solve(N, u)
    out = [Fraction(1)]
    for n in range(1, N + 1):
        out.append(u * Fraction(K[n], s**n))
    return out


# ---------------------------------------------------------------------------
# series-parallel networks and the core series Q


@dataclass(frozen=True)
class SeriesParallel:
    A: TruncSeries
    A_bar: TruncSeries
    S: TruncSeries
    P: TruncSeries
    S_bar: TruncSeries
    P_bar: TruncSeries


def series_parallel_system(N: int) -> SeriesParallel:
    """Solve the crossing/non-crossing series-parallel system by iteration."""
    y = TruncSeries.var(N)
    zero = TruncSeries.zero(N)
    S = P = Sb = Pb = zero
    for _ in range(N + 2):
        S_new = (y + P) * (y + P) * (1 - y - P).inverse()
        P_new = (y + S) * ((1 - y - Sb) ** -2 - 1)
        Sb_new = (y + Pb) * ((1 - y - P) ** -2 - 1)
        Pb_new = (y + Sb) * (y + Sb) * (1 - y - Sb).inverse()
        if (S_new, P_new, Sb_new, Pb_new) == (S, P, Sb, Pb):
            break
        S, P, Sb, Pb = S_new, P_new, Sb_new, Pb_new
    else:  # pragma: no cover
        raise VerificationError("series-parallel iteration did not stabilise")
    A = y + S + P
    Ab = y + Sb + Pb
    for name, lhs, rhs in (("S = P_bar", S, Pb), ("P = S_bar", P, Sb), ("A = A_bar", A, Ab)):
        bad = (lhs - rhs).first_nonzero()
        if bad is not None:
            raise VerificationError(f"symmetry {name} fails", bad)
    return SeriesParallel(A, Ab, S, P, Sb, Pb)


def cubic_residual(A: TruncSeries) -> TruncSeries:
    y = TruncSeries.var(A.order)
    return A**3 + (y + 1) * A * A + (2 * y - 1) * A + y


def extract_Q(N: int, B: TruncSeries | None = None, A: TruncSeries | None = None) -> TruncSeries:
    """Q with B = 1 + 2y + 2yA + y A'(y) Q(A(y)); returned to order N-1."""
    B = B if B is not None else extract_B(N, method="auto")
    A = A if A is not None else series_parallel_system(N).A
    B, A = B.truncate(N), A.truncate(N)
    if A[0] != 0 or A[1] != 1:
        raise VerificationError("A must satisfy A(0) = 0 and A'(0) = 1")
    y = TruncSeries.var(N)
    rest = B - 1 - 2 * y - 2 * y * A
    if rest[0] != 0 or rest[1] != 0:
        raise VerificationError("B - 1 - 2y - 2yA must start at order 2")
    # divide by y A'(y): drop one order
    F = TruncSeries(rest.coeffs[1:]) * derive(A).inverse()
    Q = compose(F, revert(A.truncate(N - 1)))
    for k, q in enumerate(Q.coeffs):
        if not isinstance(q, int) or q < 0:
            raise VerificationError(f"Q coefficient {k} = {q} is not a nonnegative integer")
    return Q


def bqa_residual(B: TruncSeries, A: TruncSeries, Q: TruncSeries) -> TruncSeries:
    """B - (1 + 2y + 2yA + y A' Q(A)) to order min(B.order, Q.order + 1)."""
    N = min(B.order, Q.order + 1, A.order)
    B, A = B.truncate(N), A.truncate(N)
    y = TruncSeries.var(N)
    tail = derive(A) * compose(Q.truncate(N - 1), A.truncate(N - 1))
    return B - 1 - 2 * y - 2 * y * A - TruncSeries.from_list([0, *tail.coeffs], N)
