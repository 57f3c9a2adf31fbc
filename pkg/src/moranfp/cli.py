"""moranfp command line.

Exit codes: 0 ok, 1 usage error, 2 input/consistency error, 3 estimator
failure sentinel, 4 suppressor-audit violation.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import audit, engine, estimator, exact, families, potential
from .graph import (
    GraphConsistencyError,
    GraphFormatError,
    average_degree,
    from_mask,
    load_graph,
    require_process_graph,
    save_graph,
    to_mask,
    validate,
)

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_ESTIMATOR, EXIT_AUDIT = 0, 1, 2, 3, 4
ENUMERATE_CAP = 16  # drift --all enumerates 2^n - 2 subsets


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


# ---------------------------------------------------------------------------
# reports


def _fmt_float(x: float) -> str:
    return format(x, ".17g")


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, Fraction):
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, (float, np.floating)):
        return _fmt_float(float(v))
    s = str(v)
    if any(c in s for c in ',"\n'):
        s = '"' + s.replace('"', '""') + '"'
    return s


def _json_value(v) -> str:
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, Fraction):
        return json.dumps(f"{v.numerator}/{v.denominator}")
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return _fmt_float(v) if math.isfinite(v) else "null"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_json_value(x)}" for k, x in v.items()) + "}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_json_value(x) for x in v) + "]"
    return json.dumps(str(v))


def emit_report(records: Sequence[dict], fmt: str = "csv", fields: Sequence[str] | None = None) -> str:
    """CSV (header row first) or JSON lines. Rationals as "num/den", floats to 17 digits."""
    if fmt == "json":
        return "".join(_json_value(dict(r)) + "\n" for r in records)
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    if fields is None:
        fields = list(records[0]) if records else []
    lines = [",".join(fields)]
    for r in records:
        lines.append(",".join(_csv_cell(r.get(f)) for f in fields))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# argument helpers


def parse_rational(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"not a rational number: {text!r}") from None


def _rational_arg(text: str) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def _seed_arg(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer: {text!r}") from None
    if not 0 <= v < 1 << 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated integer list: {text!r}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: D401 - argparse hook
        raise UsageError(message)


def _read_text(path: str, stdin) -> str:
    if path == "-":
        return stdin.read()
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}") from None


def _load(args, stdin):
    if not args.graph:
        raise UsageError("--graph is required")
    g = load_graph(_read_text(args.graph, stdin))
    groups = {}
    gpath = getattr(args, "groups", None)
    if gpath is None and args.graph != "-" and os.path.exists(args.graph + ".groups"):
        gpath = args.graph + ".groups"
    if gpath:
        groups = families.load_groups(_read_text(gpath, stdin))
    return g, groups


def _vertex_set(text: str, g, groups) -> list[int]:
    """Comma-separated vertex ids and/or group names from the sidecar."""
    out: list[int] = []
    for tok in text.replace(",", " ").split():
        if tok in groups:
            out.extend(groups[tok])
            continue
        try:
            out.append(int(tok))
        except ValueError:
            raise InputError(f"unknown group {tok!r} (no such group in the sidecar file)") from None
    bad = [v for v in out if not 1 <= v <= g.n]
    if bad:
        raise InputError(f"vertex ids outside 1..{g.n}: {bad}")
    return sorted(set(out))


def _start(text: str, g, groups):
    if text == "uniform":
        return "uniform"
    S = _vertex_set(text, g, groups)
    if not S:
        raise InputError("start set is empty")
    return S[0] if len(S) == 1 and text not in groups else S


def _family_params(args) -> dict:
    out = {}
    for name in ("k", "a", "n"):
        v = getattr(args, name)
        if v is not None:
            if v.denominator != 1:
                raise UsageError(f"--{name} must be an integer")
            out[name] = int(v)
    if args.p is not None:
        out["p"] = float(args.p)
    if args.r is not None:
        out["r"] = args.r
    return out


# ---------------------------------------------------------------------------
# subcommands


def cmd_gen(args, stdin, stdout) -> int:
    if not args.family:
        raise UsageError("--family is required")
    params = _family_params(args)
    try:
        lg = families.generate(args.family, params, seed=args.seed)
    except KeyError as e:
        raise UsageError(f"family {args.family} needs --{e.args[0]}") from None
    except families.FamilyParameterError as e:
        raise UsageError(str(e)) from None
    text = save_graph(lg.graph)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        if lg.groups:
            with open(args.out + ".groups", "w", encoding="utf-8") as fh:
                fh.write(families.save_groups(lg.groups))
    else:
        stdout.write(text)
    return EXIT_OK


def cmd_info(args, stdin, stdout) -> int:
    g, groups = _load(args, stdin)
    rep = validate(g)
    rec = {
        "n": g.n,
        "m": g.m,
        "delta": g.max_degree,
        "min_degree": g.min_degree,
        "directed": g.directed,
        "connected": rep.connected,
        "strongly_connected": rep.strongly_connected,
        "avg_degree": average_degree(g),
        "phi_V": None if g.directed else potential.phi(g, g.vertices()),
        "lcm_D_bits": engine.lcm_upto(max(1, g.max_degree)).D.bit_length(),
        "violations": len(rep.invariant_violations),
        "groups": len(groups),
    }
    stdout.write(emit_report([rec], args.format or "json"))
    return EXIT_OK


def _need_r(args) -> Fraction:
    if args.r is None:
        raise UsageError("--r is required")
    if args.r <= 0:
        raise UsageError("--r must be positive")
    return args.r


def cmd_simulate(args, stdin, stdout) -> int:
    g, groups = _load(args, stdin)
    r = _need_r(args)
    start = _start(args.start, g, groups)
    mode = args.mode
    if args.max_steps is not None and mode == "active":
        mode = "capped"
    if mode == "threshold" and args.threshold is None:
        raise UsageError("--mode threshold needs --threshold P")
    if mode == "threshold" and g.directed:
        raise UsageError("threshold mode needs an undirected graph")
    require_process_graph(g)
    if args.trace:
        if args.runs != 1:
            raise UsageError("--trace records a single run; drop --runs")
        with open(args.trace, "w", encoding="utf-8") as fh:
            fh.write("step,spawner,target,n_mut,phi_num_scaled\n")
            out = engine.run(g, float(r), start, mode, threshold=args.threshold, max_steps=args.max_steps,
                             seed=args.seed, trace=lambda line: fh.write(line + "\n"))
        recs = [_outcome_record(0, out)]
    elif args.runs == 1:
        out = engine.run(g, float(r), start, mode, threshold=args.threshold, max_steps=args.max_steps, seed=args.seed)
        recs = [_outcome_record(0, out)]
    else:
        lcm = engine.lcm_upto(max(1, g.max_degree))
        thr = engine.threshold_scaled(args.threshold, lcm.D) if mode == "threshold" else -1
        blocks = estimator.replicate(g, float(r), args.runs, seed=args.seed, jobs=args.jobs, start=start,
                                     naive=mode == "naive", threshold_scaled=thr,
                                     max_steps=-1 if args.max_steps is None else args.max_steps)
        recs = []
        for b in blocks:
            for j in range(len(b.results)):
                recs.append({
                    "replica": len(recs),
                    "result": engine._RESULT_OF_CODE[int(b.results[j])].value,
                    "active_steps": int(b.active_steps[j]),
                    "naive_steps": int(b.naive_steps[j]) if b.naive_steps is not None else None,
                    "final_phi_scaled": int(b.phi_scaled[j]),
                    "seed": args.seed,
                })
    stdout.write(emit_report(recs, args.format or "json"))
    return EXIT_OK


def _outcome_record(i: int, out: engine.RunOutcome) -> dict:
    return {
        "replica": i,
        "result": out.result.value,
        "active_steps": out.active_steps,
        "naive_steps": out.naive_steps,
        "final_phi_scaled": out.final_phi_scaled,
        "seed": out.seed,
    }


def cmd_estimate(args, stdin, stdout) -> int:
    g, groups = _load(args, stdin)
    r = _need_r(args)
    if args.monte_carlo:
        start = _start(args.start, g, groups)
        mc = estimator.monte_carlo_fixation(g, float(r), args.runs, seed=args.seed, start=start, jobs=args.jobs)
        rec = {"value": mc.value, "n_runs": mc.runs, "fixated": mc.fixated, "ci_low": mc.ci_low,
               "ci_high": mc.ci_high, "total_active_steps": mc.total_active_steps, "seed": args.seed}
        stdout.write(emit_report([rec], args.format or "json"))
        return EXIT_OK
    if r <= 1:
        raise UsageError("the estimator needs r > 1 (use --monte-carlo for r <= 1)")
    if args.eps is None:
        raise UsageError("--eps is required")
    if not 0 < args.eps < 1:
        raise UsageError("--eps must lie in (0, 1)")
    if g.directed:
        raise UsageError("the estimator needs an undirected graph (use --monte-carlo)")
    est = estimator.estimate_fixation(g, r, args.eps, seed=args.seed, jobs=args.jobs)
    P = est.params.P if est.params else Fraction(0)
    rec = {
        "value": est.value,
        "n_runs": est.params.N if est.params else 0,
        "p_threshold_num": P.numerator,
        "p_threshold_den": P.denominator,
        "total_active_steps": est.total_active_steps,
        "capped": est.capped,
        "seed": args.seed,
    }
    stdout.write(emit_report([rec], args.format or "json"))
    return EXIT_ESTIMATOR if est.value == estimator.FAILURE else EXIT_OK


def cmd_exact(args, stdin, stdout) -> int:
    g, groups = _load(args, stdin)
    r = _need_r(args)
    start = _start(args.start, g, groups)
    if g.n > exact.STATE_CAP:
        raise InputError(f"exact solver handles n <= {exact.STATE_CAP}")
    require_process_graph(g)
    fx = exact.fixation_probability_exact(g, r, start, exact=g.n <= exact.EXACT_RATIONAL_CAP)
    at = exact.absorption_time_exact(g, r, start)
    rec = {
        "fixation": float(fx.value),
        "fixation_rational": fx.rational,
        "absorption_time": float(at.value),
        "n_states": fx.n_states,
        "residual": max(fx.residual, at.residual),
    }
    stdout.write(emit_report([rec], args.format or "json"))
    return EXIT_OK


def _drift_record(g, consts, S) -> dict:
    if g.n < 3:
        # rho(n) needs log log n > 0; the barrier column stays empty
        d = potential.cut_drift(g, S)
        return {"subset_bitmask": to_mask(S), "drift_num": d.numerator, "drift_den": d.denominator,
                "is_barrier": None}
    chk = potential.barrier_check(g, consts, S)
    return {"subset_bitmask": to_mask(S), "drift_num": chk.drift.numerator, "drift_den": chk.drift.denominator,
            "is_barrier": chk.is_barrier}


DRIFT_FIELDS = ["subset_bitmask", "drift_num", "drift_den", "is_barrier"]


def cmd_drift(args, stdin, stdout) -> int:
    g, groups = _load(args, stdin)
    consts = potential.ProcessConstants(args.r if args.r is not None else Fraction(2))
    if args.subset is not None:
        subsets: Iterable = [_vertex_set(args.subset, g, groups)]
    elif args.all:
        if g.n > ENUMERATE_CAP:
            raise InputError(f"--all enumerates subsets only for n <= {ENUMERATE_CAP}")
        subsets = (sorted(from_mask(m)) for m in range(1, (1 << g.n) - 1))
    else:
        raise UsageError("drift needs --subset S or --all")
    recs = [_drift_record(g, consts, S) for S in subsets]
    stdout.write(emit_report(recs, args.format or "csv", DRIFT_FIELDS))
    return EXIT_OK


def cmd_barrier(args, stdin, stdout) -> int:
    g, groups = _load(args, stdin)
    consts = potential.ProcessConstants(args.r if args.r is not None else Fraction(2))
    if args.subset is not None:
        S = _vertex_set(args.subset, g, groups)
    else:
        if g.n > potential.MIN_DRIFT_CAP:
            raise InputError(f"minimum-drift search handles n <= {potential.MIN_DRIFT_CAP}")
        S, _ = potential.min_drift_subset(g)
    stdout.write(emit_report([_drift_record(g, consts, sorted(S))], args.format or "csv", DRIFT_FIELDS))
    return EXIT_OK


def cmd_bench(args, stdin, stdout) -> int:
    r = _need_r(args)
    family = args.family or "double_star"
    if not args.sizes:
        raise UsageError("--sizes is required")
    recs = []
    for k in args.sizes:
        params = _family_params(args)
        params["n" if family in ("complete", "cycle", "path") else "k"] = k
        try:
            lg = families.generate(family, params, seed=args.seed)
        except (KeyError, families.FamilyParameterError) as e:
            raise UsageError(f"cannot build {family} with size {k}: {e}") from None
        t = estimator.mean_absorption_time(lg.graph, float(r), args.runs, seed=args.seed, jobs=args.jobs)
        recs.append({"kind": "size", "size": k, "n": lg.graph.n, "mean": t.mean, "stderr": t.stderr,
                     "runs": t.runs, "slope": None})
    if len(recs) >= 2:
        x = np.log([rec["n"] for rec in recs])
        y = np.log([rec["mean"] for rec in recs])
        slope = float(np.polyfit(x, y, 1)[0])
        recs.append({"kind": "fit", "size": None, "n": None, "mean": None, "stderr": None, "runs": None,
                     "slope": slope})
    fields = ["kind", "size", "n", "mean", "stderr", "runs", "slope"]
    stdout.write(emit_report(recs, args.format or "csv", fields))
    return EXIT_OK


def cmd_audit(args, stdin, stdout) -> int:
    r = args.r if args.r is not None else Fraction(2)
    if r <= 1:
        raise UsageError("the suppressor audits need r > 1")
    recs = []
    ok = True
    if not args.skip_undirected:
        a = int(args.a) if args.a is not None else families.default_undir_a(r)
        k = int(args.k) if args.k is not None else 28
        h = families.undir_suppressor(a, k, r)
        for c in audit.sigma_audit(h, r, samples=args.samples, seed=args.seed, max_size=args.max_size):
            ok &= c.ok
            recs.append({"check": "sigma", "a": a, "k": k, "size": c.state_size, "statistic": c.expected_change,
                         "bound": Fraction(0), "stderr": None, "ok": c.ok})
    if not args.skip_directed:
        a = args.dir_a if args.dir_a is not None else families.default_dir_a(r)
        c = audit.directed_audit(args.dir_k, a, r, level=args.level, runs=args.runs, seed=args.seed, jobs=args.jobs)
        ok &= c.ok
        recs.append({"check": "directed", "a": a, "k": args.dir_k, "size": len(
            families.dir_suppressor(args.dir_k, a).groups[f"X{c.level}"]), "statistic": c.frequency,
            "bound": c.bound, "stderr": c.stderr, "ok": c.ok})
    fields = ["check", "a", "k", "size", "statistic", "bound", "stderr", "ok"]
    stdout.write(emit_report(recs, args.format or "csv", fields))
    return EXIT_OK if ok else EXIT_AUDIT


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="moranfp", description="Moran process fixation tools")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, graph=True):
        if graph:
            sp.add_argument("--graph", help="graph file in moran-graph v1 format ('-' for stdin)")
            sp.add_argument("--groups", help="group sidecar file (default: GRAPH.groups when present)")
        sp.add_argument("--seed", type=_seed_arg, default=0, help="64-bit master seed (default 0)")
        sp.add_argument("--format", choices=("csv", "json"))
        return sp

    def family_flags(sp):
        sp.add_argument("--family", choices=families.FAMILIES)
        for name in ("k", "a", "n"):
            sp.add_argument(f"--{name}", type=_rational_arg)
        sp.add_argument("--p", type=_rational_arg, help="edge probability for random_connected")

    sp = common(sub.add_parser("gen", help="generate a family graph"), graph=False)
    family_flags(sp)
    sp.add_argument("--r", type=_rational_arg, help="attach sigma weights (undir_suppressor)")
    sp.add_argument("--out", help="write here (plus OUT.groups) instead of stdout")

    common(sub.add_parser("info", help="graph summary"))

    sp = common(sub.add_parser("simulate", help="seeded runs of the process"))
    sp.add_argument("--r", type=_rational_arg)
    sp.add_argument("--start", default="uniform")
    sp.add_argument("--mode", choices=engine.MODES, default="active")
    sp.add_argument("--threshold", type=_rational_arg)
    sp.add_argument("--max-steps", type=int)
    sp.add_argument("--runs", type=int, default=1)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--trace", help="write one CSV line per active step here")

    sp = common(sub.add_parser("estimate", help="fixation probability estimate"))
    sp.add_argument("--r", type=_rational_arg)
    sp.add_argument("--eps", type=_rational_arg)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--monte-carlo", action="store_true", help="plain runs to absorption instead")
    sp.add_argument("--runs", type=int, default=10_000)
    sp.add_argument("--start", default="uniform")

    sp = common(sub.add_parser("exact", help="exact fixation probability and absorption time"))
    sp.add_argument("--r", type=_rational_arg)
    sp.add_argument("--start", default="uniform")

    for name, helptext in (("drift", "cut drift of subsets"), ("barrier", "barrier predicate")):
        sp = common(sub.add_parser(name, help=helptext))
        sp.add_argument("--r", type=_rational_arg)
        sp.add_argument("--subset", help="comma-separated ids or a group name")
        if name == "drift":
            sp.add_argument("--all", action="store_true", help="every proper non-empty subset")

    sp = common(sub.add_parser("bench-absorption", help="mean absorption time across sizes"), graph=False)
    family_flags(sp)
    sp.add_argument("--r", type=_rational_arg)
    sp.add_argument("--sizes", type=_int_list)
    sp.add_argument("--runs", type=int, default=1000)
    sp.add_argument("--jobs", type=int, default=1)

    sp = common(sub.add_parser("suppressor-audit", help="sigma and directed suppressor checks"), graph=False)
    sp.add_argument("--r", type=_rational_arg)
    sp.add_argument("--a", type=_rational_arg, help="H_{a,k} width (default ceil(7r^2/2))")
    sp.add_argument("--k", type=_rational_arg, help="H_{a,k} size (default 28)")
    sp.add_argument("--samples", type=int, default=100)
    sp.add_argument("--max-size", type=int, default=40)
    sp.add_argument("--dir-k", type=int, default=15)
    sp.add_argument("--dir-a", type=int, help="G_{k,a} width (default ceil(4r))")
    sp.add_argument("--level", type=int, help="start group X_level (default k)")
    sp.add_argument("--runs", type=int, default=10_000)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--skip-undirected", action="store_true")
    sp.add_argument("--skip-directed", action="store_true")
    return p


COMMANDS = {
    "gen": cmd_gen,
    "info": cmd_info,
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "exact": cmd_exact,
    "drift": cmd_drift,
    "barrier": cmd_barrier,
    "bench-absorption": cmd_bench,
    "suppressor-audit": cmd_audit,
}


def run_command(argv: Sequence[str], stdin=None, stdout=None, stderr=None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
        if not args.command:
            raise UsageError("missing subcommand")
        buf = io.StringIO()
        code = COMMANDS[args.command](args, stdin, buf)
        stdout.write(buf.getvalue())
        return code
    except UsageError as e:
        stderr.write(f"moranfp: usage error: {e}\n")
        return EXIT_USAGE
    except (InputError, GraphFormatError, GraphConsistencyError, families.FamilyParameterError) as e:
        stderr.write(f"moranfp: input error: {e}\n")
        return EXIT_INPUT
    except ValueError as e:
        stderr.write(f"moranfp: input error: {e}\n")
        return EXIT_INPUT
    except SystemExit as e:  # --help
        return EXIT_OK if not e.code else EXIT_USAGE


def main() -> None:
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
