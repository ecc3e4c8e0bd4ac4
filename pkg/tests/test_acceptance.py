"""One test per acceptance criterion, each at its stated tolerance.

Every test prints a single PASS/FAIL line; the lines are repeated in the
pytest terminal summary.
"""
import time
from collections import Counter
from fractions import Fraction

import numpy as np
from mpmath import mp, mpf
from scipy import stats

from treeblocks import analytics as an
from treeblocks import enumeration as en
from treeblocks import mapcraft as mc
from treeblocks import random_model as rm
from treeblocks import stats_harness as sh
from treeblocks import verify
from treeblocks.rng import STREAM_MAP, replica_rngs


def _finish(report_line, k, title, parts, t0, budget=None):
    elapsed = time.time() - t0
    if budget is not None:
        parts.append((f"runtime {elapsed:.0f}s < {budget}s", elapsed < budget))
    ok = all(p for _, p in parts)
    detail = "; ".join(f"{'ok' if p else 'FAILED'} {d}" for d, p in parts)
    report_line(f"[{'PASS' if ok else 'FAIL'}] criterion {k} {title}: {detail}")
    assert ok, detail


def test_criterion_1_identity_suite(report_line):
    t0 = time.time()
    checks = verify.identity_checks(256)
    parts = [(c.name, c.passed) for c in checks]
    sums = all(en.shuffle_sum(n) == en.mullin_count(n) for n in range(257))
    parts.append(("shuffle sum n <= 256", sums))
    _finish(report_line, 1, "exact identities N=256", parts, t0, 60)


def test_criterion_2_census_oracle(report_line):
    t0 = time.time()
    BM = en.bivariate_M(5)
    b = en.extract_B(5, method="triangular")
    parts = []
    for n in range(1, 6):
        maps = mc.enumerate_all(n)
        poly = Counter()
        two = 0
        codec = blocks = True
        for m in maps:
            codec &= mc.decode(mc.encode(m)) == m
            t = mc.block_decompose(m)
            blocks &= mc.reconstruct(t) == m
            k = t.num_blocks()
            poly[k] += 1
            two += k == 1
        coeffs = tuple(poly.get(i, 0) for i in range(BM[n].degree + 1))
        parts.append((f"n={n}: size {len(maps)}, polynomial, b_n={two}, round trips",
                      len(maps) == en.mullin_count(n) and coeffs == BM[n].coeffs and sum(poly.values()) == len(maps)
                      and two == b[n] and codec and blocks))
    _finish(report_line, 2, "brute-force census n<=5", parts, t0, 120)


def test_criterion_3_constants(report_line):
    t0 = time.time()
    c = an.closed_constants(64)
    with mp.workdps(64):
        rhoA_closed = 2 - 3 * mpf(2) ** (mpf(-2) / 3)
        uC_num = an.numeric_u_C()
        parts = [
            (f"rho_B = {mp.nstr(c.rho_B, 6)} ~ 0.091", abs(c.rho_B - mpf("0.091")) < mpf("0.0005")),
            (f"u_C = {mp.nstr(c.u_C, 6)} ~ 3.02", abs(c.u_C - mpf("3.02")) < mpf("0.005")),
            ("rho_A cubic root vs closed form", abs(c.rho_A - rhoA_closed) < mpf(10) ** -12
             and abs(4 * c.rho_A**3 - 24 * c.rho_A**2 + 48 * c.rho_A - 5) < mpf(10) ** -50),
            (f"numeric u_C off by {mp.nstr(uC_num - c.u_C, 3)}", abs(uC_num - c.u_C) < mpf(10) ** -4),
            ("E(u_C) = 1", abs(an.E_closed(c.u_C) - 1) < mpf(10) ** -4),
            (f"c(u_C) = {mp.nstr(an.c_closed(c.u_C), 5)} ~ 0.40", round(float(an.c_closed(c.u_C)), 2) == 0.40),
        ]
    _finish(report_line, 3, "constants at 64 digits", parts, t0)


def test_criterion_4_asymptotic_trends(report_line):
    t0 = time.time()
    reps = [an.verify_bn_asymptotics(2000, tol=0.15),
            an.verify_Mu_asymptotics(1, 2000),
            an.verify_Mu_asymptotics(5, 2000)]
    parts = [(f"{r.name}: deviation {r.final_deviation:.4f}, monotone {r.monotone_tail}", r.passed and r.monotone_tail)
             for r in reps]
    _finish(report_line, 4, "asymptotics with N=2000", parts, t0, 600)


def test_criterion_5_distributional(report_line):
    t0 = time.time()
    reps = [sh.exp_lb1_subcritical(1, n=10**5, replicas=2000, seed=0, tol=0.06),
            sh.exp_lbj_tail(1, 2, n=10**5, replicas=5000, seed=0, tol=0.05),
            sh.exp_lbj_tail(an.u_C_rational(30), 1, n=10**5, replicas=5000, seed=0, tol=0.05)]
    reps += sh.exp_supercritical_lb(5, (10**4, 10**5, 10**6), replicas=500, seed=0, iqr_ratio_max=1.5, slope_tol=0.10)
    parts = [(r.line()[7:].split("  (")[0], r.passed) for r in reps]
    _finish(report_line, 5, "Monte Carlo laws", parts, t0, 1800)


def test_criterion_6_height_proxy(report_line):
    t0 = time.time()
    reps = sh.exp_height_scaling(an.u_C_rational(30), (10**4, 10**5), replicas=400, seed=0, tol=0.20)
    reps.append(sh.exp_height_universality(5, 8, n=10**5, replicas=400, seed=0, tol=0.20))
    parts = [(r.line()[7:].split("  (")[0], r.passed) for r in reps]
    _finish(report_line, 6, "height scaling proxy", parts, t0)


def test_criterion_7_sampler_exactness(report_line):
    t0 = time.time()
    words = mc.enumerate_words(3)
    counts = Counter(mc.sample_uniform(3, rng).word for rng in replica_rngs(0, 10**5, STREAM_MAP))
    obs = np.array([counts.get(w, 0) for w in words])
    p_unif = stats.chisquare(obs).pvalue
    parts = [(f"uniform n=3 over {len(words)} maps, p = {p_unif:.3g}", p_unif > 1e-3 and obs.sum() == 10**5)]

    u = Fraction(2)
    dist = rm.build_mu(u, N_exact=64)
    reps = 50000
    dec = Counter(rm.sample_decorated_map(3, u, seed=1, dist=dist, replica=i).word for i in range(reps))
    w = np.array([2.0 ** mc.num_blocks(mc.decode(x)) for x in words])
    obs = np.array([dec.get(x, 0) for x in words])
    p_dec = stats.chisquare(obs, w / w.sum() * reps).pvalue
    parts.append((f"decorated u=2 n=3 against 2^b(m), p = {p_dec:.3g}", p_dec > 1e-3 and set(dec) <= set(words)))
    _finish(report_line, 7, "sampler exactness", parts, t0)
