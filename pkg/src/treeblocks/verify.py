"""The exact-identity suite behind ``treeblocks verify``."""
from __future__ import annotations

import time
from collections import Counter
from dataclasses import dataclass

from . import enumeration as en
from . import mapcraft as mc


@dataclass
class Check:
    name: str
    passed: bool
    detail: str
    seconds: float


def _run(name, fn) -> Check:
    t0 = time.time()
    try:
        detail = fn() or "ok"
        ok = True
    except AssertionError as exc:
        detail, ok = f"{type(exc).__name__}: {exc}", False
    return Check(name, ok, detail, time.time() - t0)


def identity_checks(N: int = 256) -> list[Check]:
    state: dict = {}

    def counts():
        for n in range(N + 1):
            en.mullin_count(n)
        M = en.series_M(N)
        state["M"] = M
        if any(M[n] != en.catalan(n) * en.catalan(n + 1) for n in range(N + 1)):
            raise AssertionError("series_M disagrees with Cat_n Cat_{n+1}")
        return f"n <= {N}"

    def ode():
        en.verify_dfinite(N, state["M"])
        return f"residual zero to order {N - 3}"

    def roundtrip():
        B = en.extract_B(N, method="auto")
        state["B"] = B
        en.verify_B_roundtrip(B, state["M"])
        if N >= 64 and en.extract_B(64, method="triangular") != en.extract_B(64, method="ode"):
            raise AssertionError("triangular and ODE-driven b_n disagree")
        return f"b_{N} has {int(B[N]).bit_length()} bits"

    def series_parallel():
        sp = en.series_parallel_system(N)
        state["A"] = sp.A
        bad = en.cubic_residual(sp.A).first_nonzero()
        if bad is not None:
            raise en.VerificationError("cubic for A fails", bad)
        return "S = P_bar, P = S_bar, A = A_bar; cubic residual zero"

    def bqa():
        Q = en.extract_Q(N, state["B"], state["A"])
        bad = en.bqa_residual(state["B"], state["A"], Q).first_nonzero()
        if bad is not None:
            raise en.VerificationError("B = 1 + 2y + 2yA + yA'Q(A) fails", bad)
        k = Q.first_nonzero()
        return f"Q nonnegative integers, first nonzero Q_{k} = {Q[k]}"

    return [
        _run("tree-rooted counts", counts),
        _run("D-finite equation", ode),
        _run("block substitution round trip", roundtrip),
        _run("series-parallel system", series_parallel),
        _run("core identity", bqa),
    ]


def census_checks(n_max: int = 5) -> list[Check]:
    B = en.extract_B(max(n_max, 1), method="triangular")
    BM = en.bivariate_M(n_max, B)

    def census():
        for n in range(1, n_max + 1):
            maps = mc.enumerate_all(n)
            blocks = Counter()
            two_conn = 0
            for m in maps:
                if mc.decode(mc.encode(m)).word != m.word:
                    raise AssertionError(f"codec round trip fails on {m.word}")
                t = mc.block_decompose(m)
                if mc.reconstruct(t).word != m.word:
                    raise AssertionError(f"block round trip fails on {m.word}")
                k = t.num_blocks()
                blocks[k] += 1
                two_conn += k == 1
            poly = [blocks.get(i, 0) for i in range(n + 1)]
            if tuple(poly[: BM[n].degree + 1]) != tuple(BM[n].coeffs) or sum(poly) != en.mullin_count(n):
                raise AssertionError(f"block census at n={n} is {poly}, series says {BM[n]}")
            if two_conn != B[n]:
                raise AssertionError(f"{two_conn} 2-connected maps of size {n}, b_{n} = {B[n]}")
        return f"n <= {n_max}"

    def cores():
        # the first core appears at size 6; only checked when the census reaches it
        if n_max < 6:
            return "skipped (needs n = 6)"
        Q = en.extract_Q(8)
        k = Q.first_nonzero()
        found = sum(mc.is_core(mc.decode(w)) for w in mc.catalog_2connected(6)[k + 1])
        if found != Q[k]:
            raise AssertionError(f"{found} cores of size {k + 1}, Q_{k} = {Q[k]}")
        return f"{found} cores of size {k + 1}"

    return [_run("brute-force census", census), _run("core count", cores)]
