"""Command-line front end: instance and solution files, subcommands, and
the exit-code contract.

Instances travel as JSON objects with the squared-distance matrix,
dimension, budgets, and weights; a bare squared-distance CSV is accepted
as an alternative input with defaults applied. Solution files carry the
verdict, the witness in label form, and a realization rounded to 12
significant digits. Exit codes are 0 for yes/ok, 1 for no, 2 for any
error. EDMREPAIR_SEED supplies the default seed; stdout carries the
human-readable report and -o the machine-readable JSON.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from fractions import Fraction
from typing import Any, Optional

from . import oracle
from .approx import greedy_outliers, two_approx_outliers
from .core import DistanceSpace, Solution, WeightedInstance, as_pair
from .exact import alg1_branch, alg2_branch, compress, solve_eeo, solve_weeo
from .generators import (
    Graph,
    PlantedSpec,
    maxcut_reduction,
    paper_example,
    planted_instance,
    rank_reduction,
    vc_reduction,
)
from .geometry import is_embeddable, realize, strong_dim, verify_solution

EXIT_YES = 0
EXIT_NO = 1
EXIT_ERROR = 2


class CliError(Exception):
    """User-facing failure; message printed to stderr, exit code 2."""


def _num_in(v: Any) -> Any:
    """JSON value to a scalar; fractions travel as 'p/q' strings."""
    if isinstance(v, bool):
        raise CliError(f"not a number: {v!r}")
    if isinstance(v, (int, float)):
        return v
    if isinstance(v, str):
        try:
            return Fraction(v)
        except (ValueError, ZeroDivisionError) as e:
            raise CliError(f"bad numeric string {v!r}") from e
    raise CliError(f"not a number: {v!r}")


def _num_out(v: Any) -> Any:
    if isinstance(v, Fraction):
        return str(v)
    return v


def _sig12(x: float) -> float:
    return float(f"{float(x):.12g}")


def parse_instance(obj: Any) -> WeightedInstance:
    """InstanceFile JSON object to a WeightedInstance."""
    if not isinstance(obj, dict):
        raise CliError("instance file must contain a JSON object")
    if "sqdist" not in obj or "d" not in obj:
        raise CliError("instance file needs 'sqdist' and 'd'")
    known = {"labels", "sqdist", "d", "k_out", "k_mod", "W", "w_out", "w_mod"}
    extra = set(obj) - known
    if extra:
        raise CliError(f"unknown instance keys: {sorted(extra)}")
    matrix = [[_num_in(v) for v in row] for row in obj["sqdist"]]
    labels = obj.get("labels")
    try:
        space = DistanceSpace.from_matrix(matrix, labels)
    except (ValueError, TypeError) as e:
        raise CliError(str(e)) from e
    w_mod = None
    if "w_mod" in obj:
        w_mod = {}
        for key, val in obj["w_mod"].items():
            try:
                i, j = (int(part) for part in key.split(","))
            except ValueError as e:
                raise CliError(f"bad w_mod key {key!r}, expected 'i,j'") from e
            w_mod[as_pair(i, j)] = val
    try:
        return WeightedInstance.build(
            space,
            obj["d"],
            k_out=obj.get("k_out", 0),
            k_mod=obj.get("k_mod", 0),
            W=obj.get("W"),
            w_out=obj.get("w_out"),
            w_mod=w_mod,
        )
    except (ValueError, TypeError) as e:
        raise CliError(str(e)) from e


def serialize_instance(instance: WeightedInstance) -> dict:
    sp = instance.space
    return {
        "labels": list(sp.labels),
        "sqdist": [[_num_out(v) for v in row] for row in sp.sqdist],
        "d": instance.d,
        "k_out": instance.k_out,
        "k_mod": instance.k_mod,
        "W": instance.W,
        "w_out": list(instance.w_out),
        "w_mod": {f"{i},{j}": w for (i, j), w in sorted(instance.w_mod.items())},
    }


def solution_file(
    instance: WeightedInstance,
    sol: Optional[Solution],
    algorithm: str,
    seed: int,
    elapsed_ms: int,
) -> dict:
    sp = instance.space
    meta = {"algorithm": algorithm, "seed": seed, "elapsed_ms": elapsed_ms}
    if sol is None:
        return {
            "answer": "no",
            "outliers": [],
            "modifications": [],
            "cost": None,
            "meta": meta,
        }
    def fmt(v: Any) -> Any:
        return _sig12(v) if isinstance(v, float) else _num_out(v)

    mods = [
        {
            "pair": [sp.labels[i], sp.labels[j]],
            "old_sq": _num_out(sp.sqdist[i][j]),
            "new_sq": fmt(sol.modifications[(i, j)]),
        }
        for i, j in sorted(sol.modifications)
    ]
    out = {
        "answer": "yes",
        "outliers": [sp.labels[i] for i in sorted(sol.outliers)],
        "modifications": mods,
        "cost": sol.cost,
        "meta": meta,
    }
    if sol.realization is not None:
        survivors = [i for i in sp.points() if i not in sol.outliers]
        out["realization"] = [
            [_sig12(c) for c in sol.realization.coords[i]] for i in survivors
        ]
    return out


def load_solution(obj: Any, instance: WeightedInstance) -> Optional[Solution]:
    """SolutionFile JSON back to a Solution against its instance."""
    from .geometry import Realization

    if obj.get("answer") == "no":
        return None
    sp = instance.space
    index = {lab: i for i, lab in enumerate(sp.labels)}
    try:
        outliers = frozenset(index[lab] for lab in obj["outliers"])
        mods = {
            as_pair(index[m["pair"][0]], index[m["pair"][1]]): _num_in(
                m["new_sq"]
            )
            for m in obj["modifications"]
        }
    except KeyError as e:
        raise CliError(f"unknown label in solution file: {e}") from e
    re = None
    if "realization" in obj:
        survivors = [i for i in sp.points() if i not in outliers]
        if len(obj["realization"]) != len(survivors):
            raise CliError("realization length does not match survivors")
        re = Realization(
            instance.d,
            {
                i: tuple(float(c) for c in row)
                for i, row in zip(survivors, obj["realization"])
            },
        )
    return Solution(outliers, mods, re, obj["cost"])


def _read_json(path: str) -> Any:
    try:
        if path == "-":
            return json.load(sys.stdin)
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as e:
        raise CliError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise CliError(f"{path} is not valid JSON: {e}") from e


def _write_json(path: str, obj: Any) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as e:
        raise CliError(f"cannot write {path}: {e}") from e


def _read_matrix_csv(path: str) -> list[list[Any]]:
    def cell(s: str) -> Any:
        s = s.strip()
        try:
            return int(s)
        except ValueError:
            pass
        try:
            return float(s)
        except ValueError as e:
            raise CliError(f"bad CSV cell {s!r} in {path}") from e

    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [
                [cell(c) for c in row] for row in csv.reader(fh) if row
            ]
    except OSError as e:
        raise CliError(f"cannot read {path}: {e}") from e
    if not rows:
        raise CliError(f"{path} is empty")
    return rows


def _instance_from_args(args: argparse.Namespace) -> WeightedInstance:
    if getattr(args, "matrix_csv", None):
        if args.instance:
            raise CliError("give either an instance file or --matrix-csv")
        if getattr(args, "dim", None) is None:
            raise CliError("--matrix-csv needs --dim")
        matrix = _read_matrix_csv(args.matrix_csv)
        try:
            space = DistanceSpace.from_matrix(matrix)
            return WeightedInstance.build(
                space,
                args.dim,
                k_out=getattr(args, "k_out", 0) or 0,
                k_mod=getattr(args, "k_mod", 0) or 0,
                W=getattr(args, "budget_w", None),
            )
        except (ValueError, TypeError) as e:
            raise CliError(str(e)) from e
    if not args.instance:
        raise CliError("no instance given")
    inst = parse_instance(_read_json(args.instance))
    if getattr(args, "dim", None) is not None and args.dim != inst.d:
        try:
            return WeightedInstance.build(
                inst.space,
                args.dim,
                k_out=inst.k_out,
                k_mod=inst.k_mod,
                W=inst.W,
                w_out=inst.w_out,
                w_mod=inst.w_mod,
            )
        except (ValueError, TypeError) as e:
            raise CliError(str(e)) from e
    return inst


def _print_realization(space: DistanceSpace, coords: dict) -> None:
    for i in sorted(coords):
        vec = ", ".join(f"{_sig12(c):g}" for c in coords[i])
        print(f"  {space.labels[i]}: ({vec})")


def cmd_check(args: argparse.Namespace) -> int:
    inst = _instance_from_args(args)
    sp, d = inst.space, inst.d
    exact = True if args.exact else None
    pts = list(sp.points())
    if args.strong:
        sd = strong_dim(sp, pts, exact=exact) if pts else None
        ok = pts != [] and sd == d
        verdict = f"strongly {d}-embeddable" if ok else f"not strongly {d}-embeddable"
    else:
        ok = is_embeddable(sp, pts, d, exact=exact)
        verdict = f"embeddable in R^{d}" if ok else f"not embeddable in R^{d}"
    print(verdict)
    re = realize(sp, pts, d, exact=exact) if ok else None
    if re is not None:
        _print_realization(sp, re.coords)
    if args.output:
        payload = {
            "answer": "yes" if ok else "no",
            "dim": d,
            "strong": bool(args.strong),
        }
        if re is not None:
            payload["realization"] = [
                [_sig12(c) for c in re.coords[i]] for i in sorted(re.coords)
            ]
        _write_json(args.output, payload)
    return EXIT_YES if ok else EXIT_NO


def _describe(instance: WeightedInstance, sol: Optional[Solution]) -> str:
    if sol is None:
        return "no"
    sp = instance.space
    bits = [f"yes: cost {sol.cost}"]
    if sol.outliers:
        labs = ", ".join(sp.labels[i] for i in sorted(sol.outliers))
        bits.append(f"outliers {{{labs}}}")
    if sol.modifications:
        mods = "; ".join(
            f"({sp.labels[i]},{sp.labels[j]}) -> {_sig12(v):g}"
            for (i, j), v in sorted(sol.modifications.items())
        )
        bits.append(f"modifications {mods}")
    if not sol.outliers and not sol.modifications:
        bits.append("already embeddable")
    return ", ".join(bits)


def cmd_solve(args: argparse.Namespace) -> int:
    inst = _instance_from_args(args)
    seed = args.seed
    t0 = time.monotonic()
    try:
        if args.algo == "alg1":
            sol = alg1_branch(inst)
        elif args.algo == "alg2":
            sol = alg2_branch(inst)
        elif args.algo == "auto":
            sol = solve_eeo(inst)
        elif args.algo == "weeo":
            sol = solve_weeo(inst, seed=seed)
        else:
            sol = oracle.brute_force_weeo(inst, seed=seed)
    except ValueError as e:
        raise CliError(str(e)) from e
    except oracle.OracleBudgetError as e:
        raise CliError(str(e)) from e
    elapsed = int(round((time.monotonic() - t0) * 1000))
    print(_describe(inst, sol))
    if args.output:
        _write_json(
            args.output, solution_file(inst, sol, args.algo, seed, elapsed)
        )
    return EXIT_YES if sol is not None else EXIT_NO


def cmd_approx(args: argparse.Namespace) -> int:
    inst = _instance_from_args(args)
    sp, d = inst.space, inst.d
    seed = args.seed
    t0 = time.monotonic()
    if args.algo == "greedy":
        A = greedy_outliers(sp, d, exact=True if args.exact else None)
    else:
        if inst.k_mod != 0:
            raise CliError("two-approx handles outlier deletion only (k_mod must be 0)")
        if any(w != 1 for w in inst.w_out):
            raise CliError("two-approx requires unit outlier weights")
        A = two_approx_outliers(sp, d, seed=seed, trials=args.trials)
    elapsed = int(round((time.monotonic() - t0) * 1000))
    survivors = [i for i in sp.points() if i not in A]
    re = realize(sp, survivors, d)
    cost = sum(inst.out_weight(i) for i in A)
    sol = Solution(frozenset(A), {}, re, cost)
    within = verify_solution(inst, sol)
    labs = ", ".join(sp.labels[i] for i in sorted(A)) or "none"
    print(
        f"outlier set {{{labs}}} (size {len(A)}, "
        f"within budgets: {'yes' if within else 'no'})"
    )
    if args.output:
        payload = solution_file(
            inst, sol if within else None, args.algo, seed, elapsed
        )
        if not within:
            # feasible set exceeding the instance budgets: report it
            # without certifying yes
            payload["outliers"] = [sp.labels[i] for i in sorted(A)]
            payload["cost"] = cost
        payload["meta"]["trials"] = args.trials
        _write_json(args.output, payload)
    return EXIT_YES


def cmd_compress(args: argparse.Namespace) -> int:
    inst = _instance_from_args(args)
    t0 = time.monotonic()
    out = compress(inst)
    elapsed = int(round((time.monotonic() - t0) * 1000))
    sp = inst.space
    if out.answer is not None:
        sol = out.solution if out.answer else None
        print(f"solved outright: {_describe(inst, sol)}")
        if args.output:
            _write_json(
                args.output, solution_file(inst, sol, "compress", 0, elapsed)
            )
        return EXIT_YES if out.answer else EXIT_NO
    tr = out.trace
    red = tr.reduced
    forced = [[sp.labels[x], rule] for x, rule in tr.forced_outliers]
    if tr.partition is None:
        print(f"instance already small ({sp.n} points), returned unchanged")
    else:
        print(
            f"reduced {sp.n} points to {red.space.n} "
            f"(forced outliers: {len(forced)}, hitting set: {len(tr.hitting_set)})"
        )
    if args.output:
        _write_json(
            args.output,
            {
                "instance": serialize_instance(red),
                "trace": {
                    "hitting_set": [sp.labels[i] for i in sorted(tr.hitting_set)],
                    "forced_outliers": forced,
                    "kept_points": [sp.labels[i] for i in tr.index_map],
                    "marked_parts": len(tr.marked),
                    "elapsed_ms": elapsed,
                },
            },
        )
    return EXIT_YES


def _graph_from_file(path: str) -> Graph:
    obj = _read_json(path)
    if not isinstance(obj, dict) or "n" not in obj or "edges" not in obj:
        raise CliError("graph file needs 'n' and 'edges'")
    try:
        return Graph.build(obj["n"], [tuple(e) for e in obj["edges"]])
    except (ValueError, TypeError) as e:
        raise CliError(str(e)) from e


def cmd_generate(args: argparse.Namespace) -> int:
    truth_obj = None
    if args.kind == "paper":
        inst = paper_example()
    elif args.kind == "planted":
        if args.n is None or args.d is None:
            raise CliError("--kind planted needs --n and --d")
        try:
            spec = PlantedSpec.build(
                args.n,
                args.d,
                k_out_planted=args.k_out or 0,
                k_mod_planted=args.k_mod or 0,
                box=args.box,
                noise_kind=args.noise,
                seed=args.seed,
            )
            planted = planted_instance(spec)
        except ValueError as e:
            raise CliError(str(e)) from e
        inst = planted.instance
        sp = inst.space
        truth_obj = {
            "outliers": [sp.labels[i] for i in sorted(planted.truth.outliers)],
            "modifications": [
                {
                    "pair": [sp.labels[i], sp.labels[j]],
                    "old_sq": _num_out(sp.sqdist[i][j]),
                    "new_sq": _num_out(planted.truth.modifications[(i, j)]),
                }
                for i, j in sorted(planted.truth.modifications)
            ],
            "cost": planted.truth.cost,
            "opt_confirmed": planted.opt_confirmed,
        }
    elif args.kind in ("vc", "maxcut"):
        if not args.graph:
            raise CliError(f"--kind {args.kind} needs --graph")
        graph = _graph_from_file(args.graph)
        try:
            if args.kind == "vc":
                if args.k is None:
                    raise CliError("--kind vc needs --k")
                inst = vc_reduction(graph, args.k)
            else:
                if args.ell is None:
                    raise CliError("--kind maxcut needs --ell")
                inst = maxcut_reduction(graph, args.ell)
        except ValueError as e:
            raise CliError(str(e)) from e
    else:
        if not args.matrix:
            raise CliError("--kind rank needs --matrix")
        obj = _read_json(args.matrix)
        if args.h is None or args.k is None:
            raise CliError("--kind rank needs --h and --k")
        try:
            inst = rank_reduction(obj, args.h, args.k)
        except (ValueError, TypeError) as e:
            raise CliError(str(e)) from e
    _write_json(args.output, serialize_instance(inst))
    print(
        f"wrote {args.output} (kind={args.kind}, n={inst.space.n}, "
        f"d={inst.d}, k_out={inst.k_out}, k_mod={inst.k_mod})"
    )
    if truth_obj is not None:
        truth_path = args.truth_out or _truth_path(args.output)
        _write_json(truth_path, truth_obj)
        print(f"wrote ground truth {truth_path}")
    return EXIT_YES


def _truth_path(out: str) -> str:
    base, ext = os.path.splitext(out)
    return f"{base}.truth{ext or '.json'}"


def _default_seed() -> int:
    raw = os.environ.get("EDMREPAIR_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        return 0


def _add_input_args(p: argparse.ArgumentParser, with_budgets: bool) -> None:
    p.add_argument("instance", nargs="?", help="InstanceFile JSON path, or - for stdin")
    p.add_argument("--matrix-csv", help="bare squared-distance CSV instead of JSON")
    p.add_argument("--dim", type=int, help="embedding dimension (overrides the file)")
    if with_budgets:
        p.add_argument("--k-out", type=int, help="outlier budget for --matrix-csv")
        p.add_argument("--k-mod", type=int, help="modification budget for --matrix-csv")
        p.add_argument("--budget-w", type=int, help="weight budget for --matrix-csv")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="edmrepair",
        description="decide and repair Euclidean embeddability of distance data",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="test d-embeddability of an instance")
    _add_input_args(p, with_budgets=False)
    p.add_argument("--strong", action="store_true", help="test strong embeddability")
    p.add_argument("--exact", action="store_true", help="force the rational backend")
    p.add_argument("-o", "--output", help="write the verdict as JSON")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("solve", help="run an exact solver")
    _add_input_args(p, with_budgets=True)
    p.add_argument(
        "--algo",
        choices=["alg1", "alg2", "auto", "weeo", "brute"],
        default="auto",
        help="alg1/alg2/auto handle outliers only; weeo is the full solver",
    )
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--threads", type=int, default=0,
                   help="accepted for compatibility; execution is single-threaded")
    p.add_argument("--exact", action="store_true",
                   help="force the rational backend (geometry predicates already "
                        "fall back to it on rational inputs)")
    p.add_argument("-o", "--output", help="write a SolutionFile")
    p.set_defaults(fn=cmd_solve)

    p = sub.add_parser("approx", help="run an approximation algorithm")
    _add_input_args(p, with_budgets=True)
    p.add_argument("--algo", choices=["greedy", "two-approx"], default="greedy")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--exact", action="store_true")
    p.add_argument("-o", "--output", help="write a SolutionFile")
    p.set_defaults(fn=cmd_approx)

    p = sub.add_parser("compress", help="shrink an instance to an equivalent one")
    _add_input_args(p, with_budgets=True)
    p.add_argument("-o", "--output", help="write the reduced instance and trace")
    p.set_defaults(fn=cmd_compress)

    p = sub.add_parser("generate", help="write benchmark instances")
    p.add_argument(
        "--kind",
        choices=["planted", "vc", "maxcut", "rank", "paper"],
        required=True,
    )
    p.add_argument("--n", type=int, help="planted: number of points")
    p.add_argument("--d", type=int, help="planted: dimension")
    p.add_argument("--k-out", type=int, help="planted outliers / vc and rank budget")
    p.add_argument("--k-mod", type=int, help="planted scrambled pairs")
    p.add_argument("--box", type=int, default=10, help="planted coordinate range")
    p.add_argument(
        "--noise",
        choices=["random-inconsistent", "perturbed"],
        default="random-inconsistent",
    )
    p.add_argument("--graph", help="vc/maxcut: graph JSON with n and edges")
    p.add_argument("--k", type=int, help="vc: cover budget; rank: deletion budget")
    p.add_argument("--ell", type=int, help="maxcut: target cut size")
    p.add_argument("--matrix", help="rank: JSON file with the matrix rows")
    p.add_argument("--h", type=int, help="rank: required rank drop")
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--truth-out", help="ground-truth sidecar path (planted)")
    p.set_defaults(fn=cmd_generate)
    return ap


def main(argv: Optional[list[str]] = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
