"""Monte Carlo checks of the largest-block laws and of height scaling."""
from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import analytics
from .analytics import Regime
from .random_model import (
    OffspringDist,
    _powers_for,
    build_mu,
    conditioned_values,
    sample_block_tree,
    sizes_from_values,
)
from .rng import STREAM_TREE, stream_rng

SCHEMA = 1


@dataclass(frozen=True)
class ExperimentConfig:
    u: float
    n_grid: tuple
    replicas: int
    seed: int = 0
    regime: str = ""
    out: str | None = None
    threads: int = 1

    def __post_init__(self):
        if self.replicas < 100:
            raise ValueError("at least 100 replicas are required")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ValueError("n grid must be strictly increasing")


@dataclass
class TestReport:
    """``passed`` means |empirical - target| <= tolerance, or >= when ``comparison`` is "ge"."""

    name: str
    empirical: float
    target: float
    tolerance: float
    passed: bool
    runtime: float
    comparison: str = "le"
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        gap = abs(self.empirical - self.target)
        expect = gap <= self.tolerance if self.comparison == "le" else gap >= self.tolerance
        if bool(self.passed) != bool(expect):
            raise AssertionError(f"{self.name}: pass flag disagrees with the numbers")

    @classmethod
    def judge(cls, name, empirical, target, tolerance, runtime, comparison="le", **extras):
        gap = abs(empirical - target)
        ok = gap <= tolerance if comparison == "le" else gap >= tolerance
        return cls(name, float(empirical), float(target), float(tolerance), bool(ok), runtime, comparison, extras)

    def to_json_dict(self) -> dict:
        return {"schema": SCHEMA, **asdict(self)}

    def line(self) -> str:
        rel = "<=" if self.comparison == "le" else ">="
        return (f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: |{self.empirical:.4g} - {self.target:.4g}|"
                f" {rel} {self.tolerance:.4g}  ({self.runtime:.1f}s)")


def ks_distance(sample, cdf) -> float:
    """sup |empirical CDF - cdf| for a continuous target ``cdf`` (vectorized callable)."""
    x = np.sort(np.asarray(sample, dtype=float))
    n = len(x)
    if n == 0:
        raise ValueError("empty sample")
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def truncated_poisson_cdf(x, c, terms: int, lam_factor: float = 0.5):
    """exp(-lam) sum_{p < terms} lam^p / p!  with lam = lam_factor * c / x^2."""
    x = np.asarray(x, dtype=float)
    if terms < 1:
        raise ValueError("need at least one Poisson term")
    with np.errstate(divide="ignore"):
        lam = lam_factor * c / x**2
    return stats.poisson.cdf(terms - 1, lam)


def lam(x, c, lam_factor: float = 0.5):
    return lam_factor * c / np.asarray(x, dtype=float) ** 2


# ---------------------------------------------------------------------------
# replica runners


def _map_replicas(fn, replicas: int, threads: int):
    if threads <= 1:
        return [fn(i) for i in range(replicas)]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, range(replicas)))


def lb_samples(dist: OffspringDist, n: int, replicas: int, seed: int, top: int = 3, threads: int = 1) -> np.ndarray:
    """Array (replicas, top) of the largest block sizes LB_1..LB_top (0 when missing)."""
    if dist.regime is not Regime.SUPERCRITICAL:
        _powers_for(dist, 2 * n + 1, n)

    def one(i):
        vals = conditioned_values(dist, n, stream_rng(seed, STREAM_TREE, i))
        s = sizes_from_values(vals)
        if sum(s) != n:  # pragma: no cover
            raise AssertionError("block sizes do not add up to n")
        return (list(s[:top]) + [0] * top)[:top]

    return np.array(_map_replicas(one, replicas, threads), dtype=np.int64)


def height_samples(dist: OffspringDist, n: int, replicas: int, seed: int, threads: int = 1) -> np.ndarray:
    if dist.regime is not Regime.SUPERCRITICAL:
        _powers_for(dist, 2 * n + 1, n)

    def one(i):
        return sample_block_tree(n, dist=dist, seed=stream_rng(seed, STREAM_TREE, i)).height()

    return np.array(_map_replicas(one, replicas, threads), dtype=np.int64)


_DISTS: dict = {}


def offspring_law(u, N_exact: int = analytics.DEFAULT_N_EXACT) -> OffspringDist:
    key = (str(u), N_exact)
    if key not in _DISTS:
        _DISTS[key] = build_mu(u, N_exact=N_exact)
    return _DISTS[key]


# ---------------------------------------------------------------------------
# experiments


def exp_lb1_subcritical(u=1, n: int = 10**5, replicas: int = 2000, seed: int = 0, tol: float = 0.06,
                        threads: int = 1, N_exact: int = analytics.DEFAULT_N_EXACT) -> TestReport:
    t0 = time.time()
    dist = offspring_law(u, N_exact)
    if dist.regime is not Regime.SUBCRITICAL:
        raise ValueError("the giant-block CLT needs u < u_C")
    E = float(analytics.E_closed(u))
    c = float(analytics.c_closed(u))
    lb = lb_samples(dist, n, replicas, seed, top=2, threads=threads)
    z = (lb[:, 0] - (1 - E) * n) / math.sqrt(c * n * math.log(n))
    ks = ks_distance(z, stats.norm.cdf)
    return TestReport.judge(
        f"LB1 CLT u={float(u):g} n={n}", ks, 0.0, tol, time.time() - t0,
        mean=float(z.mean()), variance=float(z.var()), lb1_over_n=float(lb[:, 0].mean() / n),
        target_lb1_over_n=1 - E, lb2_over_sqrt_n_q95=float(np.quantile(lb[:, 1], 0.95) / math.sqrt(n)),
        replicas=replicas,
    )


def exp_lbj_tail(u, j: int, x_grid=None, n: int = 10**5, replicas: int = 5000, seed: int = 0,
                 tol: float = 0.05, lam_factor: float = 0.5, threads: int = 1,
                 N_exact: int = analytics.DEFAULT_N_EXACT) -> TestReport:
    """Empirical CDF of LB_j / sqrt(n) against the truncated Poisson limit.

    Below criticality LB_1 is the giant block, so the limit keeps j-1 Poisson
    terms; at criticality it keeps j.  ``lam_factor`` multiplies c(u)/x^2.
    """
    t0 = time.time()
    dist = offspring_law(u, N_exact)
    if dist.regime is Regime.SUPERCRITICAL:
        raise ValueError("no square-root block law above criticality")
    if dist.regime is Regime.SUBCRITICAL and j < 2:
        raise ValueError("below criticality the tail law starts at j = 2")
    terms = j - 1 if dist.regime is Regime.SUBCRITICAL else j
    c = float(analytics.c_closed(u))
    x_grid = np.linspace(0.1, 3.0, 59) if x_grid is None else np.asarray(x_grid, dtype=float)
    if len(x_grid) == 0:
        raise ValueError("empty x grid")
    lb = lb_samples(dist, n, replicas, seed, top=j, threads=threads)[:, j - 1] / math.sqrt(n)
    emp = np.array([(lb <= x).mean() for x in x_grid])
    dists = {}
    for f in sorted({lam_factor, 0.5, 1.0}):
        dists[f] = float(np.max(np.abs(emp - truncated_poisson_cdf(x_grid, c, terms, f))))
    best = min(dists, key=dists.get)
    return TestReport.judge(
        f"LB{j} tail u={float(u):.6g} n={n}", dists[lam_factor], 0.0, tol, time.time() - t0,
        lam_factor=lam_factor, sup_distance_by_lam_factor={str(k): v for k, v in dists.items()},
        best_lam_factor=best, c_u=c, terms=terms, replicas=replicas,
    )


def supercritical_centering(n, L):
    return (math.log(n) - 3 * math.log(math.log(n))) / L


def exp_supercritical_lb(u=5, n_grid=(10**4, 10**5, 10**6), replicas: int = 500, seed: int = 0,
                         iqr_ratio_max: float = 1.5, slope_tol: float = 0.10, threads: int = 1,
                         N_exact: int = analytics.DEFAULT_N_EXACT) -> list[TestReport]:
    """Logarithmic block sizes above criticality.

    The slope is the least-squares slope of median LB_1 against
    ln n - 3 ln ln n over the grid, compared with 1/ln(rho_B / y(u)).
    """
    t0 = time.time()
    dist = offspring_law(u, N_exact)
    if dist.regime is not Regime.SUPERCRITICAL:
        raise ValueError("needs u > u_C")
    L = math.log(float(analytics.closed_constants(30).rho_B) / dist.y)
    med, iqr, envelope_ok = [], [], True
    per_n = {}
    for k, n in enumerate(n_grid):
        lb1 = lb_samples(dist, n, replicas, seed + 7919 * k, top=1, threads=threads)[:, 0]
        resid = lb1 - supercritical_centering(n, L)
        q1, q3 = np.quantile(resid, [0.25, 0.75])
        iqr.append(float(q3 - q1))
        med.append(float(np.median(lb1)))
        envelope_ok &= bool((lb1 < 10 * math.log(n) / L).all())
        per_n[str(n)] = {"median_lb1": med[-1], "iqr_residual": iqr[-1], "median_residual": float(np.median(resid))}
    xs = np.array([L * supercritical_centering(n, L) for n in n_grid])
    slope = float(np.polyfit(xs, med, 1)[0])
    # diagnostic: same fit against the implicit centering ln n - 3 ln LB_1
    xs_impl = np.array([math.log(n) - 3 * math.log(m) for n, m in zip(n_grid, med)])
    slope_impl = float(np.polyfit(xs_impl, med, 1)[0])
    runtime = time.time() - t0
    ratio = max(iqr) / max(min(iqr), 1e-12)
    return [
        TestReport.judge(f"LB1 residual IQR ratio u={float(u):g}", ratio, 1.0, iqr_ratio_max - 1, runtime,
                         per_n=per_n, replicas=replicas),
        TestReport.judge(f"LB1 slope vs 1/ln(rho_B/y) u={float(u):g}", slope * L, 1.0, slope_tol, runtime,
                         slope=slope, target_slope=1 / L, slope_implicit_centering=slope_impl,
                         medians=med, n_grid=list(n_grid)),
        TestReport.judge(f"LB1 log envelope u={float(u):g}", 0.0 if envelope_ok else 1.0, 0.0, 0.0, runtime),
    ]


def _mean_ci(x):
    x = np.asarray(x, dtype=float)
    return float(x.mean()), float(1.96 * x.std(ddof=1) / math.sqrt(len(x)))


def height_statistics(u, n_grid, replicas: int, seed: int = 0, threads: int = 1,
                      N_exact: int = analytics.DEFAULT_N_EXACT) -> dict:
    """Normalized height means per n: gamma H / sqrt(2n), and with sqrt(log 2n) at criticality."""
    dist = offspring_law(u, N_exact)
    if dist.regime is Regime.SUBCRITICAL:
        raise ValueError("height scaling needs u >= u_C")
    rc = analytics.regime_constants(u, N_exact=N_exact, dps=30)
    gamma = float(rc.gamma)
    out = {"gamma": gamma, "regime": dist.regime.value, "rows": []}
    for k, n in enumerate(n_grid):
        h = height_samples(dist, n, replicas, seed + 104729 * k, threads)
        plain = gamma * h / math.sqrt(2 * n)
        row = {"n": n, "plain": _mean_ci(plain)[0], "plain_ci": _mean_ci(plain)[1],
               "mean_height": float(h.mean())}
        if dist.regime is Regime.CRITICAL:
            corr = plain * math.sqrt(math.log(2 * n))
            row["corrected"], row["corrected_ci"] = _mean_ci(corr)
        out["rows"].append(row)
    return out


def _drift(values) -> float:
    return max(values) / min(values) - 1


def exp_height_scaling(u, n_grid=(10**4, 10**5), replicas: int = 400, seed: int = 0, tol: float = 0.20,
                       threads: int = 1, N_exact: int = analytics.DEFAULT_N_EXACT) -> list[TestReport]:
    t0 = time.time()
    hs = height_statistics(u, n_grid, replicas, seed, threads, N_exact)
    rt = time.time() - t0
    rows = hs["rows"]
    if hs["regime"] == Regime.CRITICAL.value:
        corr = [r["corrected"] for r in rows]
        plain = [r["plain"] for r in rows]
        return [
            TestReport.judge("critical corrected height stability", _drift(corr), 0.0, tol, rt, rows=rows),
            TestReport.judge("critical uncorrected height drift", _drift(plain), 0.0, tol, rt,
                             comparison="ge", rows=rows),
        ]
    plain = [r["plain"] for r in rows]
    return [TestReport.judge(f"height stability u={float(u):g}", _drift(plain), 0.0, tol, rt,
                             rows=rows, gamma=hs["gamma"])]


def exp_height_universality(u1=5, u2=8, n: int = 10**5, replicas: int = 400, seed: int = 0, tol: float = 0.20,
                            threads: int = 1, N_exact: int = analytics.DEFAULT_N_EXACT) -> TestReport:
    t0 = time.time()
    a = height_statistics(u1, (n,), replicas, seed, threads, N_exact)
    b = height_statistics(u2, (n,), replicas, seed + 1, threads, N_exact)
    va, vb = a["rows"][0]["plain"], b["rows"][0]["plain"]
    return TestReport.judge(f"height universality u={u1} vs u={u2}", va / vb, 1.0, tol, time.time() - t0,
                            stats={str(u1): a, str(u2): b})


def write_report(reports, path) -> None:
    reports = reports if isinstance(reports, list) else [reports]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"schema": SCHEMA, "reports": [r.to_json_dict() for r in reports]}, fh, indent=2, default=float)
        fh.write("\n")
