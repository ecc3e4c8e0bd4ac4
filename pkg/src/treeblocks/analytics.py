"""High-precision constants of the block-weighted model.

Everything is evaluated with mpmath at a caller-chosen number of decimal
digits.  Values of B and its derivatives near the radius rho_B combine the
exact coefficients b_n (n <= N) with a tail built from the asymptotic shape
b_n ~ C_b rho_B^-n n^-3; the error bound reported with each value is twice
the tail times the relative deviation of the last exact coefficient from that
shape.
"""
from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import lru_cache

import mpmath
from mpmath import mp, mpf

from .enumeration import extract_B, weighted_coeffs

DEFAULT_DPS = 64
DEFAULT_N_EXACT = 2000


class Regime(str, enum.Enum):
    SUBCRITICAL = "subcritical"
    CRITICAL = "critical"
    SUPERCRITICAL = "supercritical"


def as_mpf(x):
    """mpf from int, float, str, mpf or Fraction (exactly, at the current precision)."""
    if isinstance(x, Fraction):
        return mpf(x.numerator) / x.denominator
    return mpf(x)


def _check_u(u) -> None:
    if not u > 0:
        raise ValueError(f"block weight must be positive, got {u}")


# ---------------------------------------------------------------------------
# closed forms


@lru_cache(maxsize=16)
def _closed(dps: int) -> dict:
    with mp.workdps(dps + 10):
        pi = mp.pi
        rho_B = 4 * (3 * pi - 8) ** 2 / (9 * pi**2)
        B0 = 8 - 64 / (3 * pi)
        # coefficient of -Y in the expansion of B at rho_B (Y = 1 - y/rho_B)
        kappa = 8 * (10 - 3 * pi) * (3 * pi - 8) / (9 * pi * (4 - pi))
        # coefficient of -Y^2 ln Y
        xi = 2 * (3 * pi - 8) ** 3 / (27 * pi * (4 - pi) ** 3)
        roots = mpmath.polyroots([4, -24, 48, -5], maxsteps=200, extraprec=2 * dps)
        rho_A = min(mpmath.re(r) for r in roots if abs(mpmath.im(r)) < mpf(10) ** (-dps) and mpmath.re(r) > 0)
        vals = {
            "pi": pi,
            "rho_M": mpf(1) / 16,
            "rho_B": rho_B,
            "B0": B0,
            "kappa": kappa,
            "xi": xi,
            "C_b": 2 * xi,
            "rho_A": rho_A,
            "rho_A_closed": 2 - 3 * mpf(2) ** (mpf(-2) / 3),
            "u_C": 9 * pi * (4 - pi) / (420 * pi - 81 * pi**2 - 512),
        }
    with mp.workdps(dps):
        return {k: +v for k, v in vals.items()}


@dataclass(frozen=True)
class ModelConstants:
    rho_M: mpf
    rho_B: mpf
    rho_A: mpf
    u_C: mpf
    B_at_rho: mpf
    C_b: mpf
    precision: int

    def __post_init__(self):
        if not (self.rho_B < self.rho_A < mpf(1) / 8):
            raise AssertionError("radii out of order")
        if not (3 < self.u_C < mpf("3.1")):
            raise AssertionError("critical weight outside its sanity envelope")


def closed_constants(precision: int = DEFAULT_DPS) -> ModelConstants:
    c = _closed(precision)
    with mp.workdps(precision):
        return ModelConstants(
            rho_M=+c["rho_M"],
            rho_B=+c["rho_B"],
            rho_A=+c["rho_A"],
            u_C=+c["u_C"],
            B_at_rho=+c["B0"],
            C_b=+c["C_b"],
            precision=precision,
        )


def E_closed(u, dps: int = DEFAULT_DPS):
    """Mean of the offspring law when y = rho_B."""
    _check_u(u)
    with mp.workdps(dps):
        pi = mp.pi
        u = as_mpf(u)
        return 16 * (3 * pi - 8) * (10 - 3 * pi) / (3 * (4 - pi)) * u / ((21 * pi - 64) * u + 3 * pi)


def c_closed(u, dps: int = DEFAULT_DPS):
    """Tail constant: mu(2j) ~ c(u) j^-3 when y = rho_B."""
    _check_u(u)
    with mp.workdps(dps):
        pi = mp.pi
        u = as_mpf(u)
        return 4 * (3 * pi - 8) ** 3 / (9 * (4 - pi) ** 3) * u / ((21 * pi - 64) * u + 3 * pi)


def c_critical_closed(dps: int = DEFAULT_DPS):
    with mp.workdps(dps):
        pi = mp.pi
        return (3 * pi - 8) ** 2 / (12 * (10 - 3 * pi) * (4 - pi) ** 2)


def u_C_rational(digits: int = 30) -> Fraction:
    """u_C rounded to ``digits`` significant digits, as an exact rational."""
    with mp.workdps(digits + 20):
        s = mpmath.nstr(_closed(digits + 20)["u_C"], digits, min_fixed=-1, max_fixed=2)
    return Fraction(s)


# ---------------------------------------------------------------------------
# tail-corrected evaluation of B, B', B''


@lru_cache(maxsize=8)
def _b_mpf(N: int, dps: int) -> tuple:
    B = extract_B(N)
    with mp.workdps(dps + 10):
        return tuple(mpf(int(b)) for b in B.coeffs)


def _falling(n: int, d: int) -> int:
    out = 1
    for i in range(d):
        out *= n - i
    return out


def _tail_sum(x, s: int, start: int):
    """sum_{n >= start} x^n n^-s."""
    if x == 1:
        if s <= 1:
            return mpmath.inf
        return mpmath.zeta(s, start)
    return x**start * mpmath.lerchphi(x, s, start)


# n^(d) n^-3 as a combination of n^-k
_FALLING_OVER_CUBE = {0: {3: 1}, 1: {2: 1}, 2: {1: 1, 2: -1}}


@dataclass(frozen=True)
class TailCorrected:
    value: mpf
    error_bound: mpf
    partial: mpf
    tail: mpf


@lru_cache(maxsize=8)
def _last_deviation(N: int, dps: int):
    b = _b_mpf(N, dps)
    with mp.workdps(dps):
        c = _closed(dps)
        r = b[N] * c["rho_B"] ** N * mpf(N) ** 3
        return abs(r / c["C_b"] - 1)


def B_eval_tail_corrected(y, deriv_order: int = 0, N_exact: int = DEFAULT_N_EXACT, dps: int = DEFAULT_DPS) -> TailCorrected:
    if deriv_order not in (0, 1, 2):
        raise ValueError("deriv_order must be 0, 1 or 2")
    b = _b_mpf(N_exact, dps)
    with mp.workdps(dps + 10):
        c = _closed(dps)
        y = mpf(y)
        rho = c["rho_B"]
        if y < 0 or y > rho * (1 + mpf(10) ** (-dps + 5)):
            raise ValueError(f"y = {y} outside [0, rho_B]")
        y = min(y, rho)
        d = deriv_order
        partial = mpf(0)
        for n in range(N_exact, d - 1, -1):
            partial = partial * y + _falling(n, d) * b[n]
        if y == 0:
            return TailCorrected(+partial, mpf(0), +partial, mpf(0))
        x = y / rho
        tail = mpf(0)
        for k, coef in _FALLING_OVER_CUBE[d].items():
            tail += coef * _tail_sum(x, k, N_exact + 1)
        tail *= c["C_b"] * y ** (-d)
        err = 2 * _last_deviation(N_exact, dps) * abs(tail)
        return TailCorrected(+(partial + tail), +err, +partial, +tail)


def _B(y, d, N_exact, dps):
    return B_eval_tail_corrected(y, d, N_exact, dps).value


# ---------------------------------------------------------------------------
# y(u), rho(u)


def numeric_u_C(N_exact: int = DEFAULT_N_EXACT, dps: int = DEFAULT_DPS):
    """Weight at which 2 y u B'(y) = u B(y) + 1 - u is solved by y = rho_B.

    The equation is linear in u, so the root is explicit.
    """
    with mp.workdps(dps):
        rho = _closed(dps)["rho_B"]
        B = _B(rho, 0, N_exact, dps)
        B1 = _B(rho, 1, N_exact, dps)
        return 1 / (2 * rho * B1 - B + 1)


def _defining_gap(y, u, N_exact, dps):
    return 2 * y * u * _B(y, 1, N_exact, dps) - (u * _B(y, 0, N_exact, dps) + 1 - u)


class ConvergenceError(RuntimeError):
    pass


def solve_y_of_u(u, tol=None, N_exact: int = DEFAULT_N_EXACT, dps: int = DEFAULT_DPS, max_iter: int = 400):
    """Root of 2 y u B'(y) = u B(y) + 1 - u in [0, rho_B]; rho_B below criticality.

    The gap is increasing in y (its derivative is u B' + 2 u y B'' > 0), so
    plain bisection cannot fail.
    """
    _check_u(u)
    with mp.workdps(dps):
        u = as_mpf(u)
        rho = _closed(dps)["rho_B"]
        tol = mpf(10) ** (-(dps // 2)) if tol is None else mpf(tol)
        if _defining_gap(rho, u, N_exact, dps) <= 0:
            return rho
        lo, hi = mpf(0), rho
        for _ in range(max_iter):
            mid = (lo + hi) / 2
            if _defining_gap(mid, u, N_exact, dps) > 0:
                hi = mid
            else:
                lo = mid
            if hi - lo < tol:
                return (lo + hi) / 2
        raise ConvergenceError(f"bisection for y({u}) did not reach {tol}")


def rho_of_u(u, N_exact: int = DEFAULT_N_EXACT, dps: int = DEFAULT_DPS, y=None):
    _check_u(u)
    with mp.workdps(dps):
        u = as_mpf(u)
        y = solve_y_of_u(u, N_exact=N_exact, dps=dps) if y is None else mpf(y)
        return y / (u * _B(y, 0, N_exact, dps) + 1 - u) ** 2


# ---------------------------------------------------------------------------
# regime constants


@dataclass(frozen=True)
class RegimeConstants:
    """Constants of the model at weight u.

    ``q``, ``r``, ``s`` describe the singular expansion of M(z,u) at its
    radius; ``r`` exists only below criticality.  ``gamma`` is the height
    scaling constant of the block tree and is None below criticality, where
    the tree is not in the Brownian regime.
    """

    u: mpf
    regime: Regime
    y_u: mpf
    rho_u: mpf
    E_u: mpf
    c_u: mpf
    q: mpf | None = None
    r: mpf | None = None
    s: mpf | None = None
    sigma2: mpf | None = None
    gamma: mpf | None = None
    u_C: mpf | None = None
    tail_constant: mpf | None = None
    extras: dict = field(default_factory=dict)

    def to_json_dict(self, digits: int = 30) -> dict:
        out = {}
        for k, v in asdict(self).items():
            if isinstance(v, Regime):
                out[k] = v.value
            elif isinstance(v, mpf):
                out[k] = mpmath.nstr(v, digits)
            elif isinstance(v, dict):
                out[k] = {a: mpmath.nstr(b, digits) if isinstance(b, mpf) else b for a, b in v.items()}
            else:
                out[k] = v
        return out


def classify(u, dps: int = DEFAULT_DPS, critical_band=None) -> Regime:
    """Regime of ``u``; weights within ``critical_band`` of u_C count as critical.

    The default band (1e-25) admits the 30-digit rational stand-in for u_C.
    """
    _check_u(u)
    with mp.workdps(dps):
        band = mpf("1e-25") if critical_band is None else mpf(critical_band)
        gap = as_mpf(u) - _closed(dps)["u_C"]
        if abs(gap) <= band:
            return Regime.CRITICAL
        return Regime.SUBCRITICAL if gap < 0 else Regime.SUPERCRITICAL


def subcritical_qrs(u, dps: int = DEFAULT_DPS):
    """(q, r, s) of M(z,u) = q - r Z - s Z^2 ln Z + O(Z^2) as printed closed forms."""
    with mp.workdps(dps):
        pi = mp.pi
        u = as_mpf(u)
        q = 1 + u * (7 - 64 / (3 * pi))
        r = (8 * u * (3 * pi - 8) * (10 - 3 * pi) * (21 * pi * u + 3 * pi - 64 * u)) / (
            (243 * u - 27) * pi**3 - (1260 * u - 108) * pi**2 + 1536 * pi * u
        )
        s = (2 * u * (21 * pi * u + 3 * pi - 64 * u) ** 3 * (3 * pi - 8) ** 3) / (
            pi * (81 * pi**2 * u + 512 * u + 36 * pi - 420 * pi * u - 9 * pi**2) ** 3
        )
        return q, r, s


def subcritical_qrs_composed(u, dps: int = DEFAULT_DPS):
    """(q, r, s) re-derived by composing the expansion of B with the inverse of y/(uB+1-u)^2.

    With a = 1 - E(u): r = u kappa / a and s = u xi / a^3.
    """
    with mp.workdps(dps):
        c = _closed(dps)
        u = as_mpf(u)
        q = u * c["B0"] + 1 - u
        a = 1 - 2 * u * c["kappa"] / q
        return q, u * c["kappa"] / a, u * c["xi"] / a**3


def critical_qs(dps: int = DEFAULT_DPS):
    with mp.workdps(dps):
        pi = mp.pi
        den = 420 * pi - 81 * pi**2 - 512
        q = (864 * pi - 144 * pi**2 - 1280) / den
        s = 16 * mpmath.sqrt(6) * (10 - 3 * pi) ** mpf(1.5) * (4 - pi) / den
        return q, s


def regime_constants(u, N_exact: int = DEFAULT_N_EXACT, dps: int = DEFAULT_DPS, critical_band=None) -> RegimeConstants:
    _check_u(u)
    regime = classify(u, dps, critical_band)
    with mp.workdps(dps):
        c = _closed(dps)
        u = as_mpf(u)
        E = E_closed(u, dps)
        cu = c_closed(u, dps)
        common = dict(u=u, regime=regime, E_u=E, c_u=cu, u_C=c["u_C"])
        if regime is Regime.SUBCRITICAL:
            q, r, s = subcritical_qrs(u, dps)
            y = c["rho_B"]
            return RegimeConstants(
                y_u=y, rho_u=y / q**2, q=q, r=r, s=s, tail_constant=cu, **common
            )
        if regime is Regime.CRITICAL:
            q, s = critical_qs(dps)
            y = c["rho_B"]
            return RegimeConstants(
                y_u=y,
                rho_u=y / q**2,
                q=q,
                s=s,
                gamma=mpmath.sqrt(2 * cu),
                tail_constant=cu,
                extras={"q_from_B": u * c["B0"] + 1 - u},
                **common,
            )
        y = solve_y_of_u(u, N_exact=N_exact, dps=dps)
        B = _B(y, 0, N_exact, dps)
        B1 = _B(y, 1, N_exact, dps)
        B2 = _B(y, 2, N_exact, dps)
        q = u * B + 1 - u
        sigma2 = 1 + 2 * y * B2 / B1
        return RegimeConstants(
            y_u=y,
            rho_u=y / q**2,
            q=q,
            s=q / mpmath.sqrt(sigma2),
            sigma2=sigma2,
            gamma=mpmath.sqrt(sigma2) / 2,
            # the exact tail of mu(2j) at y < rho_B uses the actual normalizer
            tail_constant=c["C_b"] * u / q,
            extras={"mean_at_y": 2 * y * u * B1 / q, "log_ratio": mpmath.log(c["rho_B"] / y)},
            **common,
        )


# ---------------------------------------------------------------------------
# asymptotic trend reports


@dataclass
class TrendReport:
    name: str
    target: float
    ns: list
    ratios: list
    tolerance: float
    final_deviation: float
    monotone_tail: bool
    passed: bool
    notes: str = ""

    def to_json_dict(self) -> dict:
        return asdict(self)


def _sample_ns(N: int, count: int = 40) -> list[int]:
    ns = sorted({max(1, round(N * k / count)) for k in range(1, count + 1)})
    return ns


def verify_bn_asymptotics(N: int = DEFAULT_N_EXACT, tol: float = 0.15, dps: int = 30) -> TrendReport:
    """r_n = b_n rho_B^n n^3 against the limit constant C_b."""
    b = _b_mpf(N, dps)
    with mp.workdps(dps):
        c = _closed(dps)
        ns = _sample_ns(N)
        ratios = [b[n] * c["rho_B"] ** n * mpf(n) ** 3 / c["C_b"] for n in ns]
        devs = [abs(r - 1) for r in ratios]
        half = [d for n, d in zip(ns, devs) if n >= N // 2]
        monotone = all(x >= y for x, y in zip(half, half[1:]))
        dev_500 = abs(b[min(500, N)] * c["rho_B"] ** min(500, N) * mpf(min(500, N)) ** 3 / c["C_b"] - 1)
        passed = devs[-1] < tol and devs[-1] < dev_500 and monotone
        return TrendReport(
            name="b_n rho_B^n n^3 / C_b",
            target=1.0,
            ns=ns,
            ratios=[float(r) for r in ratios],
            tolerance=tol,
            final_deviation=float(devs[-1]),
            monotone_tail=monotone,
            passed=bool(passed),
            notes=f"C_b = {mpmath.nstr(c['C_b'], 15)}; deviation at n=500: {mpmath.nstr(dev_500, 6)}",
        )


def _frac_to_mpf(x: Fraction):
    return mpf(x.numerator) / mpf(x.denominator)


def verify_Mu_asymptotics(u, N: int = DEFAULT_N_EXACT, tol: float = 0.05, dps: int = 40,
                          N_exact: int = DEFAULT_N_EXACT) -> TrendReport:
    """Exact [z^n]M(z,u) at rational u against the predicted leading shape."""
    u = Fraction(u)
    _check_u(u)
    coeffs = weighted_coeffs(N, u)
    rc = regime_constants(u, N_exact=N_exact, dps=dps)
    with mp.workdps(dps):
        rho = rc.rho_u
        if rc.regime is Regime.SUBCRITICAL:
            def shape(n):
                return 2 * rc.s * rho ** (-n) * mpf(n) ** -3
            label = "2 s(u) rho(u)^-n n^-3"
        elif rc.regime is Regime.CRITICAL:
            def shape(n):
                return rc.s / (2 * mpmath.sqrt(mp.pi)) * rho ** (-n) * mpf(n) ** mpf(-1.5) / mpmath.sqrt(mpmath.log(n))
            label = "s_C/(2 sqrt(pi)) rho^-n n^-3/2 ln(n)^-1/2"
        else:
            def shape(n):
                return rc.s / (2 * mpmath.sqrt(mp.pi)) * rho ** (-n) * mpf(n) ** mpf(-1.5)
            label = "s(u)/(2 sqrt(pi)) rho(u)^-n n^-3/2"
        ns = _sample_ns(N)
        ratios = [_frac_to_mpf(coeffs[n]) / shape(n) for n in ns]
        devs = [abs(r - 1) for r in ratios]
        half = [d for n, d in zip(ns, devs) if n >= N // 2]
        monotone = all(x >= y for x, y in zip(half, half[1:]))
        passed = devs[-1] < tol and devs[-1] < devs[len(devs) // 4] and monotone
        return TrendReport(
            name=f"[z^n]M(z,{u}) / ({label})",
            target=1.0,
            ns=ns,
            ratios=[float(r) for r in ratios],
            tolerance=tol,
            final_deviation=float(devs[-1]),
            monotone_tail=monotone,
            passed=bool(passed),
            notes=f"regime={rc.regime.value}; rho(u)={mpmath.nstr(rho, 15)}",
        )


def emit_y_curve(grid, N_exact: int = DEFAULT_N_EXACT, dps: int = 30, tol=1e-12) -> list[tuple]:
    """Rows (u, y(u)) over ``grid``; fails if y increases by more than ``tol``."""
    rows = []
    for u in grid:
        rows.append((as_mpf(u), solve_y_of_u(u, N_exact=N_exact, dps=dps)))
    for (u0, y0), (u1, y1) in zip(rows, rows[1:]):
        if u1 > u0 and y1 > y0 + tol:
            raise AssertionError(f"y(u) increases between u={u0} and u={u1}")
    return rows
