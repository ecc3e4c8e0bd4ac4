"""Command-line entry point.

Every file written through ``--out`` gets a sibling ``<out>.manifest.json``
recording the command line, resolved configuration and its hash, the seed,
library versions, wall time and SHA-256 digests of the outputs.  Timings live
only in the manifest, so data files are byte-identical across runs with the
same arguments.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import platform
import sys
import time
from fractions import Fraction

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import mpmath

from . import __version__

log = logging.getLogger("treeblocks")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
SCHEMA = 1


class Failure(Exception):
    """A verification or experiment failed (exit code 1)."""


# ---------------------------------------------------------------------------
# output helpers


class Output:
    def __init__(self, args, argv=None):
        self.args = args
        self.argv = list(sys.argv[1:] if argv is None else argv)
        self.files: list[str] = []
        self.t0 = time.time()

    def emit(self, text: str, path: str | None = None):
        path = path if path is not None else self.args.out
        if path:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            self.files.append(path)
        else:
            sys.stdout.write(text)

    def manifest(self, extra: dict | None = None):
        if not self.files:
            return
        cfg = {k: v for k, v in sorted(vars(self.args).items()) if k not in ("func",)}
        cfg_text = json.dumps(cfg, sort_keys=True, default=str)
        man = {
            "schema": SCHEMA,
            "command_line": ["treeblocks", *self.argv],
            "config": json.loads(cfg_text),
            "config_sha256": hashlib.sha256(cfg_text.encode()).hexdigest(),
            "seed": getattr(self.args, "seed", None),
            "versions": _versions(),
            "wall_time_s": time.time() - self.t0,
            "outputs": {p: _sha256(p) for p in self.files},
        }
        if extra:
            man.update(extra)
        with open(self.files[0] + ".manifest.json", "w", encoding="utf-8") as fh:
            json.dump(man, fh, indent=2, default=str)
            fh.write("\n")


def _sha256(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _versions() -> dict:
    import gmpy2
    import numpy
    import scipy

    return {
        "treeblocks": __version__,
        "python": platform.python_version(),
        "numpy": numpy.__version__,
        "scipy": scipy.__version__,
        "mpmath": mpmath.__version__,
        "gmpy2": gmpy2.version(),
    }


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps({"schema": SCHEMA, **obj}, indent=2, default=str) + "\n"


def _weight(text: str):
    """Parse a weight: decimal strings become exact rationals, 'uC' the 30-digit critical value."""
    from .analytics import u_C_rational

    if text.lower() in ("uc", "u_c", "critical"):
        return u_C_rational()
    try:
        u = Fraction(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a weight: {text!r}") from None
    if u <= 0:
        raise argparse.ArgumentTypeError("u must be positive")
    return u


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(float(x)) for x in text.split(",") if x]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of integers: {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _fmt(x, digits=30) -> str:
    return mpmath.nstr(x, digits) if x is not None else None


# ---------------------------------------------------------------------------
# subcommands


def cmd_enumerate(args, out: Output):
    from . import enumeration as en

    N = args.n
    if args.seq == "m":
        vals = list(en.series_M(N).coeffs)
    elif args.seq == "b":
        vals = list(en.extract_B(N, method="auto").coeffs)
    elif args.seq == "a":
        vals = list(en.series_parallel_system(N).A.coeffs)
    else:
        Nq = N + 1
        vals = list(en.extract_Q(Nq, en.extract_B(Nq, method="auto")).coeffs)[: N + 1]
    if args.format == "csv":
        out.emit(_csv(["n", args.seq], [(i, str(v)) for i, v in enumerate(vals)]))
    else:
        out.emit(_json({"sequence": args.seq, "values": [str(v) for v in vals]}))


def cmd_constants(args, out: Output):
    from . import analytics as an

    with mpmath.mp.workdps(args.precision):
        c = an.closed_constants(args.precision)
        body = {
            "precision": args.precision,
            "rho_M": _fmt(c.rho_M, args.precision),
            "rho_B": _fmt(c.rho_B, args.precision),
            "rho_A": _fmt(c.rho_A, args.precision),
            "u_C": _fmt(c.u_C, args.precision),
            "B_at_rho_B": _fmt(c.B_at_rho, args.precision),
            "b_n_constant": _fmt(c.C_b, args.precision),
        }
        if args.u is not None:
            rc = an.regime_constants(args.u, N_exact=args.N_exact, dps=min(args.precision, 40))
            body["u"] = str(args.u)
            body["regime_constants"] = rc.to_json_dict(min(args.precision, 30))
            gap = an.as_mpf(args.u) - c.u_C
            body["distance_to_u_C"] = _fmt(gap, 10)
            if abs(gap) < mpmath.mpf("0.05"):
                body["critical_adjacent"] = {
                    "E_u": _fmt(an.E_closed(args.u), 20),
                    "c_u": _fmt(an.c_closed(args.u), 20),
                    "c_u_C": _fmt(an.c_critical_closed(), 20),
                }
    out.emit(_json(body))


def cmd_curve_y(args, out: Output):
    from . import analytics as an

    if args.steps < 2 or args.umax <= args.umin:
        raise argparse.ArgumentTypeError("need umin < umax and at least 2 steps")
    grid = [args.umin + (args.umax - args.umin) * Fraction(i, args.steps - 1) for i in range(args.steps)]
    rows = an.emit_y_curve(grid, N_exact=args.N_exact)
    out.emit(_csv(["u", "y"], [(mpmath.nstr(u, 15), mpmath.nstr(y, 20)) for u, y in rows]))


def cmd_asymptotics(args, out: Output):
    from . import analytics as an

    if args.seq == "b":
        rep = an.verify_bn_asymptotics(args.N)
    else:
        if args.u is None:
            raise argparse.ArgumentTypeError("--u is required for --seq Mu")
        rep = an.verify_Mu_asymptotics(args.u, args.N, N_exact=args.N_exact)
    out.emit(_json({"report": rep.to_json_dict()}))
    if not rep.passed:
        raise Failure(f"asymptotic trend check failed: {rep.name}")


def cmd_census(args, out: Output):
    from . import mapcraft as mc

    rows = mc.census_rows(args.n)
    if args.blocks:
        out.emit(_csv(["word", "blocks", "block_sizes"],
                      [(w, b, " ".join(map(str, s))) for w, b, s in rows]))
    else:
        out.emit(_csv(["word"], [(w,) for w, _, _ in rows]))


def cmd_sample_map(args, out: Output):
    from . import mapcraft as mc
    from . import random_model as rm
    from .rng import STREAM_MAP, stream_rng

    words = []
    dist = rm.build_mu(args.u, N_exact=max(64, args.K)) if args.u is not None else None
    for i in range(args.count):
        if dist is None:
            words.append(mc.sample_uniform(args.n, stream_rng(args.seed, STREAM_MAP, i)).word)
        else:
            try:
                words.append(rm.sample_decorated_map(args.n, args.u, args.seed, args.K, dist, replica=i).word)
            except rm.BlockTooLarge as exc:
                raise Failure(f"replica {i}: {exc}") from None
    out.emit("".join(w + "\n" for w in words))


def cmd_sample_tree(args, out: Output):
    from . import random_model as rm

    dist = rm.build_mu(args.u, N_exact=args.N_exact)
    header = ["replica", "LB_1", "LB_2", "LB_3", "height", "b_count"]
    if args.emit == "word":
        header.append("offspring")
    rows = []
    for i in range(args.count):
        tree = rm.sample_block_tree(args.n, dist=dist, seed=args.seed, replica=i)
        bs = rm.block_sizes(tree, float(args.u), with_height=args.emit != "sizes")
        row = [i, bs.LB(1), bs.LB(2), bs.LB(3), "" if bs.tree_height is None else bs.tree_height, bs.b_count]
        if args.emit == "word":
            row.append(" ".join(str(int(x)) for x in tree.offspring))
        rows.append(row)
    out.emit(_csv(header, rows))


def cmd_experiment(args, out: Output):
    from . import stats_harness as sh

    u, ns, R, seed, th = args.u, args.n, args.replicas, args.seed, args.threads
    if R < 100:
        raise argparse.ArgumentTypeError("--replicas must be at least 100")
    if args.name == "lb1":
        reports = [sh.exp_lb1_subcritical(u, ns[-1], R, seed, threads=th, N_exact=args.N_exact)]
    elif args.name == "lbj":
        reports = [sh.exp_lbj_tail(u, args.j, n=ns[-1], replicas=R, seed=seed, threads=th, N_exact=args.N_exact)]
    elif args.name == "super":
        reports = sh.exp_supercritical_lb(u, tuple(ns), R, seed, threads=th, N_exact=args.N_exact)
    else:
        reports = sh.exp_height_scaling(u, tuple(ns), R, seed, threads=th, N_exact=args.N_exact)
    timings = {r.name: r.runtime for r in reports}
    body = []
    for r in reports:
        d = r.to_json_dict()
        d.pop("runtime")
        d.pop("schema")
        body.append(d)
    out.emit(_json({"experiment": args.name, "u": str(u), "n": ns, "replicas": R, "seed": seed, "reports": body}))
    for r in reports:
        log.info(r.line())
    out.extra = {"timings_s": timings}
    if not all(r.passed for r in reports):
        raise Failure("; ".join(r.name for r in reports if not r.passed))


def cmd_verify(args, out: Output):
    from . import verify

    checks = verify.identity_checks(args.N)
    if args.census_n > 0:
        checks += verify.census_checks(args.census_n)
    lines = [f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail} ({c.seconds:.2f}s)" for c in checks]
    text = "\n".join(lines) + "\n"
    if args.out:
        out.emit(_json({"N": args.N, "checks": [
            {"name": c.name, "passed": c.passed, "detail": c.detail} for c in checks]}))
    sys.stderr.write(text) if args.out else sys.stdout.write(text)
    if not all(c.passed for c in checks):
        raise Failure("verification failed")


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML file with option defaults (flags win)")
    common.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    common.add_argument("--out", help="write the result to this file (plus a manifest)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="treeblocks", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("enumerate", parents=[common], help="exact integer tables")
    s.add_argument("--seq", choices=["m", "b", "q", "a"], required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--format", choices=["csv", "json"], default="csv")
    s.set_defaults(func=cmd_enumerate)

    s = sub.add_parser("constants", parents=[common], help="closed-form and regime constants")
    s.add_argument("--u", type=_weight)
    s.add_argument("--precision", type=int, default=64)
    s.add_argument("--format", choices=["json"], default="json")
    s.add_argument("--N-exact", dest="N_exact", type=int, default=2000)
    s.set_defaults(func=cmd_constants)

    s = sub.add_parser("curve-y", parents=[common], help="table of y(u)")
    s.add_argument("--umin", type=_weight, default=Fraction(1, 2))
    s.add_argument("--umax", type=_weight, default=Fraction(10))
    s.add_argument("--steps", type=int, default=96)
    s.add_argument("--N-exact", dest="N_exact", type=int, default=2000)
    s.set_defaults(func=cmd_curve_y)

    s = sub.add_parser("asymptotics", parents=[common], help="coefficient asymptotics trend reports")
    s.add_argument("--seq", choices=["b", "Mu"], required=True)
    s.add_argument("--u", type=_weight)
    s.add_argument("--N", type=int, default=2000)
    s.add_argument("--N-exact", dest="N_exact", type=int, default=2000)
    s.set_defaults(func=cmd_asymptotics)

    s = sub.add_parser("census", parents=[common], help="all tree-rooted maps of size n")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--blocks", action="store_true", help="add block count and block sizes")
    s.set_defaults(func=cmd_census)

    s = sub.add_parser("sample-map", parents=[common], help="random maps as Mullin words")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--count", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--u", type=_weight, help="block weight (default: uniform maps)")
    s.add_argument("--K", type=int, default=5, help="largest block size the decorator accepts")
    s.set_defaults(func=cmd_sample_map)

    s = sub.add_parser("sample-tree", parents=[common], help="random block trees")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--u", type=_weight, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--count", type=int, default=1)
    s.add_argument("--emit", choices=["sizes", "height", "word"], default="height")
    s.add_argument("--N-exact", dest="N_exact", type=int, default=2000)
    s.set_defaults(func=cmd_sample_tree)

    s = sub.add_parser("experiment", parents=[common], help="Monte Carlo experiments")
    s.add_argument("--name", choices=["lb1", "lbj", "super", "height"], required=True)
    s.add_argument("--u", type=_weight, required=True)
    s.add_argument("--n", type=_int_list, required=True)
    s.add_argument("--replicas", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--j", type=int, default=2)
    s.add_argument("--N-exact", dest="N_exact", type=int, default=2000)
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("verify", parents=[common], help="exact identity suite")
    s.add_argument("--N", type=int, default=256)
    s.add_argument("--census-n", dest="census_n", type=int, default=5)
    s.set_defaults(func=cmd_verify)
    return p


def _load_config(path: str, command: str) -> dict:
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    flat = {k: v for k, v in data.items() if not isinstance(v, dict)}
    flat.update(data.get(command, {}))
    return {k.replace("-", "_"): v for k, v in flat.items()}


def parse_args(argv):
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    subs = parser._subparsers._group_actions[0].choices
    if known.config and known.command in subs:
        try:
            cfg = _load_config(known.config, known.command)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            parser.error(f"cannot read config {known.config}: {exc}")
        sub = subs[known.command]
        acts = {a.dest: a for a in sub._actions}
        unknown = sorted(set(cfg) - set(acts) - {"config"})
        if unknown:
            parser.error(f"unknown config keys: {', '.join(unknown)}")
        # config values go through the same converters as flags
        for k, v in cfg.items():
            act = acts[k]
            if act.type is not None and not isinstance(v, bool):
                v = act.type(str(v) if not isinstance(v, list) else ",".join(map(str, v)))
            if act.choices is not None and v not in act.choices:
                parser.error(f"config value {k} = {v!r} is not one of {list(act.choices)}")
            act.required = False
            sub.set_defaults(**{k: v})
    return parser.parse_args(argv)


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    out = Output(args, argv)
    out.extra = None
    code = EXIT_OK
    try:
        args.func(args, out)
    except Failure as exc:
        sys.stderr.write(f"failure: {exc}\n")
        code = EXIT_FAIL
    except argparse.ArgumentTypeError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    except ValueError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return EXIT_USAGE
    out.manifest(out.extra)
    return code


if __name__ == "__main__":
    sys.exit(main())
