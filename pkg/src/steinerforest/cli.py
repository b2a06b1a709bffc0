"""Command line: ``sf solve``, ``sf gen`` and ``sf bench``.

Exit codes: 0 solved, 1 internal error or failed verification (bench),
2 infeasible, 3 resource cap, 4 input error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
import time
from fractions import Fraction
from pathlib import Path

from . import __version__
from .baselines import GuardError, brute_force_opt, two_approx_primal_dual
from .conforming import write_family
from .decomposition import read_td
from .epas import EnumerationCapError, solve_epas, write_zeta
from .fes import solve_fes, write_skeleton
from .generators import (
    Profile,
    gen_random_bounded,
    read_dimacs,
    sat_to_steiner_forest,
    tsat3_transform,
    write_layout,
)
from .instance import InfeasibleError, InstanceError, evaluate_solution, parse_instance, write_instance
from .vc import CoverCertificate, solve_vc

EXIT_OK, EXIT_FAIL, EXIT_INFEASIBLE, EXIT_CAP, EXIT_INPUT = 0, 1, 2, 3, 4
ALGOS = ("fes", "vc", "epas", "two-approx", "brute")
SCHEMA = 1


class UsageError(Exception):
    pass


def parse_eps(text):
    try:
        eps = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"bad eps {text!r}; expected num/den") from None
    if eps <= 0:
        raise UsageError("eps must be positive")
    return eps


def parse_cover(text):
    try:
        ids = [int(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise UsageError(f"bad cover list {text!r}") from None
    return frozenset(v - 1 for v in ids)


def digest(inst):
    return hashlib.sha256(write_instance(inst)).hexdigest()


def run_solver(inst, algo, eps=None, cover=None, td=None, max_seq=None, sidecar=None):
    """Run one algorithm and return a forest. ``sidecar`` collects optional
    debug artefacts (skeleton, zeta, family) as text."""
    sidecar = {} if sidecar is None else sidecar
    if algo == "fes":
        sk = []
        f = solve_fes(inst, skeleton_out=sk)
        if sk:
            sidecar["skeleton"] = write_skeleton(*sk)
        return f
    if algo == "vc":
        cert = None
        if cover is not None:
            cert = CoverCertificate(cover)
            cert.check(inst)
        return solve_vc(inst, cert)
    if algo == "epas":
        if eps is None:
            raise UsageError("eps required for --algo epas")
        zetas, fams = {}, []
        f = solve_epas(inst, td, eps, cap=max_seq, zeta_out=zetas, family_out=fams)
        sidecar["zeta"] = write_zeta(zetas)
        if fams:
            sidecar["family"] = write_family(fams[0])
        return f
    if algo == "two-approx":
        return two_approx_primal_dual(inst)
    if algo == "brute":
        return brute_force_opt(inst)[1]
    raise UsageError(f"unknown algorithm {algo!r}")


def run_report(inst, algo, eps=None, cover=None, td=None, max_seq=None, sidecar=None):
    """Solve and wrap the outcome; returns (exit code, report dict)."""
    rep = {
        "schema": SCHEMA,
        "version": __version__,
        "digest": digest(inst),
        "algo": algo,
        "params": {"eps": None if eps is None else str(eps),
                   "cover": None if cover is None else sorted(v + 1 for v in cover)},
        "status": None,
        "cost": None,
        "edges": None,
        "feasible": None,
        "time_ms": None,
        "checks": {},
        "message": "",
    }
    start = time.perf_counter()
    code = EXIT_OK
    try:
        f = run_solver(inst, algo, eps, cover, td, max_seq, sidecar)
    except InfeasibleError as exc:
        code, rep["status"], rep["message"] = EXIT_INFEASIBLE, "infeasible", f"solve: {exc}"
    except (GuardError, EnumerationCapError) as exc:
        code, rep["status"], rep["message"] = EXIT_CAP, "resource-cap", f"solve: {exc}"
    except (UsageError, InstanceError) as exc:
        code, rep["status"], rep["message"] = EXIT_INPUT, "input-error", f"input: {exc}"
    except Exception as exc:  # reported, not swallowed silently
        code, rep["status"], rep["message"] = EXIT_FAIL, "error", f"solve: {type(exc).__name__}: {exc}"
    else:
        cost, ok, bad = evaluate_solution(inst, f)
        rep.update(status="solved", cost=cost, feasible=ok,
                   edges=[[inst.edges[e][0] + 1, inst.edges[e][1] + 1] for e in f.sorted_edges()])
        if not ok:
            code = EXIT_FAIL
            rep["message"] = "verify: returned forest misses " + ", ".join(map(str, bad[:3]))
    rep["time_ms"] = round((time.perf_counter() - start) * 1000, 3)
    return code, rep


def _read_instance(path):
    try:
        return parse_instance(Path(path).read_bytes())
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except InstanceError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _human(rep):
    head = f"{rep['algo']}: {rep['status']}"
    if rep["status"] == "solved":
        head += f", cost {rep['cost']}, {'feasible' if rep['feasible'] else 'INFEASIBLE'}, {rep['time_ms']} ms"
        edges = " ".join(f"{u}-{v}" for u, v in rep["edges"])
        return head + "\nedges: " + (edges or "(none)")
    return head


def cmd_solve(args):
    try:
        inst = _read_instance(args.input)
        eps = parse_eps(args.eps) if args.eps is not None else None
        if args.algo == "epas" and eps is None:
            raise UsageError("eps required for --algo epas")
        cover = parse_cover(args.cover) if args.cover is not None else None
        td = None
        if args.td is not None:
            try:
                td = read_td(Path(args.td).read_text())
            except (OSError, ValueError) as exc:
                raise UsageError(f"cannot read decomposition {args.td}: {exc}") from None
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    sidecar = {}
    code, rep = run_report(inst, args.algo, eps, cover, td, args.max_seq, sidecar)
    for key, path in (("skeleton", args.emit_skeleton), ("zeta", args.dump_zeta), ("family", args.dump_family)):
        if path and key in sidecar:
            Path(path).write_text(sidecar[key])
    if args.json:
        print(json.dumps(rep, indent=2))
    else:
        print(_human(rep))
    if code not in (EXIT_OK,) and not args.json:
        print(rep["message"], file=sys.stderr)
    return code


def cmd_gen(args):
    try:
        if args.kind == "random":
            target, k = "none", 0
            if args.fes is not None and args.vc is not None:
                raise UsageError("choose at most one of --fes and --vc")
            if args.fes is not None:
                target, k = "fes", args.fes
            elif args.vc is not None:
                target, k = "vc", args.vc
            prof = Profile(args.n, args.m, args.demands, args.wmax, target, k)
            inst = gen_random_bounded(args.seed, prof)
            data = write_instance(inst)
            if args.out:
                Path(args.out).write_bytes(data)
            else:
                sys.stdout.write(data.decode())
            return EXIT_OK
        if not args.cnf:
            raise UsageError("--cnf required for sat")
        try:
            cnf = read_dimacs(Path(args.cnf).read_text())
        except OSError as exc:
            raise UsageError(f"cannot read {args.cnf}: {exc.strerror}") from None
        inst, layout = sat_to_steiner_forest(tsat3_transform(cnf))
        out = Path(args.out or Path(args.cnf).with_suffix(".sfp"))
        out.write_bytes(write_instance(inst))
        lay = Path(args.layout) if args.layout else out.with_suffix(".layout")
        lay.write_text(write_layout(layout))
        print(f"wrote {out} ({inst.vertex_count} vertices, {len(inst.edges)} edges), layout {lay}, budget {layout.budget}")
        return EXIT_OK
    except (UsageError, InstanceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


# ----------------------------------------------------------------------------
# bench

def _key(rep):
    return (rep["digest"], rep["algo"], rep["params"].get("eps"))


def load_results(path):
    path = Path(path)
    if not path.exists():
        return {"schema": SCHEMA, "reports": []}
    data = json.loads(path.read_text())
    data.setdefault("reports", [])
    return data


def save_results(path, data):
    """Atomic replace: write a temporary file next to the target, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(data, fh, indent=1)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _parse_algos(text):
    out = []
    for item in text.split(","):
        item = item.strip()
        name, _, eps = item.partition(":")
        if name not in ALGOS:
            raise UsageError(f"unknown algorithm {name!r}")
        if name == "epas" and not eps:
            raise UsageError("eps required for epas (use epas:num/den)")
        out.append((name, parse_eps(eps) if eps else None))
    return out


def cross_check(rep, brute):
    """Verification fields of rep against a brute-force report (or None)."""
    checks = {}
    if rep["status"] == "solved":
        checks["feasible"] = bool(rep["feasible"])
    if brute is None or rep["algo"] == "brute" or brute["status"] not in ("solved", "infeasible"):
        return checks
    if brute["status"] == "infeasible":
        checks["infeasible_consistent"] = rep["status"] == "infeasible"
        return checks
    if rep["status"] != "solved":
        checks["oracle_match"] = False
        return checks
    opt, c = brute["cost"], rep["cost"]
    if rep["algo"] in ("fes", "vc"):
        checks["oracle_match"] = c == opt
    elif rep["algo"] == "two-approx":
        checks["within_2"] = c <= 2 * opt
    elif rep["algo"] == "epas":
        checks["within_1_plus_eps"] = c <= (1 + Fraction(rep["params"]["eps"])) * opt
    return checks


def cmd_bench(args):
    try:
        algos = _parse_algos(args.algos)
        files = sorted(p for p in Path(args.corpus).iterdir() if p.suffix == ".sfp")
        if not files:
            raise UsageError(f"no .sfp files in {args.corpus}")
    except (UsageError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    data = load_results(args.out)
    index = {_key(r): r for r in data["reports"] if "digest" in r}
    rows, failed = [], False
    for path in files:
        try:
            inst = _read_instance(path)
        except UsageError as exc:
            print(f"skip {path.name}: {exc}", file=sys.stderr)
            failed = True
            continue
        dg = digest(inst)
        # brute first so every other cell can be checked against it
        ordered = sorted(algos, key=lambda a: a[0] != "brute")
        cells = []
        for name, eps in ordered:
            key = (dg, name, None if eps is None else str(eps))
            rep = index.get(key)
            if rep is None:
                _, rep = run_report(inst, name, eps, max_seq=args.max_seq)
                rep["instance"] = path.name
                brute = index.get((dg, "brute", None))
                rep["checks"] = cross_check(rep, brute)
                data["reports"].append(rep)
                index[key] = rep
                save_results(args.out, data)
            cells.append(rep)
        for rep in cells:
            ok = all(rep.get("checks", {}).values()) and rep["status"] in ("solved", "infeasible", "resource-cap")
            failed |= not ok
            rows.append((path.name, rep["algo"] + (f":{rep['params']['eps']}" if rep["params"].get("eps") else ""),
                         rep["status"], "-" if rep["cost"] is None else str(rep["cost"]), "ok" if ok else "FAIL"))
    widths = [max(len(r[i]) for r in rows + [("instance", "algo", "status", "cost", "check")]) for i in range(5)]
    for r in [("instance", "algo", "status", "cost", "check")] + rows:
        print("  ".join(x.ljust(w) for x, w in zip(r, widths)))
    return EXIT_FAIL if failed else EXIT_OK


# ----------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="sf", description="Steiner Forest solvers and tools")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("solve", help="solve one instance")
    s.add_argument("--algo", required=True, choices=ALGOS)
    s.add_argument("--input", required=True)
    s.add_argument("--eps", help="approximation parameter as num/den (epas)")
    s.add_argument("--cover", help="vertex cover, 1-based ids separated by commas (vc)")
    s.add_argument("--td", help="tree decomposition file (epas)")
    s.add_argument("--max-seq", type=int, default=None,
                   help="cap on enumeration transitions per bag (epas); SF_MAX_SEQ also works")
    s.add_argument("--emit-skeleton", metavar="PATH")
    s.add_argument("--dump-zeta", metavar="PATH")
    s.add_argument("--dump-family", metavar="PATH")
    s.add_argument("--json", action="store_true")
    s.set_defaults(func=cmd_solve)

    g = sub.add_parser("gen", help="generate an instance")
    g.add_argument("kind", choices=("random", "sat"))
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--n", type=int, default=8)
    g.add_argument("--m", type=int, default=None)
    g.add_argument("--demands", type=int, default=3)
    g.add_argument("--wmax", type=int, default=8)
    g.add_argument("--fes", type=int, default=None, help="plant a feedback edge set of this size")
    g.add_argument("--vc", type=int, default=None, help="plant a vertex cover of this size")
    g.add_argument("--cnf", help="DIMACS CNF input (sat)")
    g.add_argument("--out")
    g.add_argument("--layout", help="layout sidecar path (sat)")
    g.set_defaults(func=cmd_gen)

    b = sub.add_parser("bench", help="run algorithms over a corpus")
    b.add_argument("--corpus", required=True)
    b.add_argument("--algos", default="fes,vc,two-approx,brute")
    b.add_argument("--out", default="results.json")
    b.add_argument("--max-seq", type=int, default=None)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
