"""Command-line front end.

Subcommands::

    evaluate   quads + query + products  -> answer with provenance
    summarize  answer + products         -> anonymized summary (+ private key)
    allocate   instance or summary       -> allocation result and settlement
    settle     result + key + products   -> provider payouts
    gen        scenario parameters       -> synthetic instance file(s)
    bench      instance files            -> CSV of runtimes and utilities

Exit status: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from datetime import datetime, timezone
from pathlib import Path

from . import bench as benchmod
from .allocation import (AllocationProblem, SolverConfig, brute_force, build_problem, load_problem,
                         solve_exact, solve_greedy, dump_problem)
from .allocation.exact import BACKENDS
from .errors import MarketError, MissingValue, ParseError
from .federation import FederatedAnswer, dump_answer, evaluate, load_graphs, load_query
from .market import (AllocationResult, Summary, Valuation, anonymize, dump_key, format_money, load_key,
                     load_products, load_valuation, parse_money, resolve_cheapest_offers, settle)
from .scenario import BUDGET_POLICIES, STUDY_D, STUDY_S, ScenarioSpec, generate, sweep

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
RESULT_FORMAT = "datamarket.result"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for data errors here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _money(text: str) -> int:
    try:
        return parse_money(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _read_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno, path=path) from None


def _emit(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


# -- result files ------------------------------------------------------------

def result_to_json(result: AllocationResult, problem: AllocationProblem, rule: str,
                   optimal: bool | None) -> dict:
    ids = problem.triple_ids
    purchased = [ids[i] for i in sorted(result.purchased)] if ids else sorted(result.purchased)
    data = {
        "format": RESULT_FORMAT,
        "version": 1,
        "rule": rule,
        "optimal": optimal,
        "chosen": sorted(result.chosen),
        "purchased": purchased,
        "payment_minor": result.payment,
        "utility_minor": result.utility,
        "payment": format_money(result.payment),
        "utility": format_money(result.utility),
    }
    if result.settlement:
        data["settlement_minor"] = dict(result.settlement)
        data["settlement"] = {k: format_money(v) for k, v in result.settlement.items()}
    return data


def _dumps(data: dict) -> str:
    return json.dumps(data, indent=2) + "\n"


# -- subcommands ---------------------------------------------------------------

def cmd_evaluate(args) -> int:
    endpoints = [ep for path in args.quads for ep in load_graphs(path)]
    query = load_query(args.query)
    products = load_products(args.products)
    answer = evaluate(query, endpoints, products)
    _emit(dump_answer(answer), args.out)
    return EXIT_OK


def cmd_summarize(args) -> int:
    answer = FederatedAnswer.from_json(_read_json(args.answer))
    products = load_products(args.products)
    resolved = resolve_cheapest_offers(answer.offers())
    mappings = answer.to_mappings(resolved)
    summary, key = anonymize(mappings, resolved, seed=args.seed, products=products)
    _emit(json.dumps(summary.to_json(), indent=2) + "\n", args.out)
    if args.key:
        Path(args.key).write_text(dump_key(key, resolved))
    return EXIT_OK


def _apply_valuation(problem: AllocationProblem, valuation: Valuation) -> AllocationProblem:
    if valuation.kind == "diminishing":
        return replace(problem, values=(0,) * problem.k, schedule=valuation.schedule)
    missing = [j for j in range(problem.k) if j not in valuation.linear]
    if missing:
        raise MissingValue(f"valuation assigns no value to mapping(s) {missing[:10]}")
    return replace(problem, values=tuple(valuation.linear[j] for j in range(problem.k)), schedule=None)


def _load_allocation_input(args) -> AllocationProblem:
    valuation = load_valuation(args.valuation) if args.valuation else None
    if args.summary:
        if valuation is None or args.budget is None:
            raise UsageError("--summary needs --valuation and --budget")
        return build_problem(Summary.from_json(_read_json(args.summary)), valuation, args.budget)
    problem = load_problem(args.instance)
    if valuation is not None:
        problem = _apply_valuation(problem, valuation)
    if args.budget is not None:
        problem = replace(problem, budget=args.budget)
    return problem


def _solver_config(args) -> SolverConfig:
    return SolverConfig(timeout=args.timeout, seed=args.seed, gap_tolerance=args.gap, backend=args.backend)


def cmd_allocate(args) -> int:
    if bool(args.key) != bool(args.products):
        raise UsageError("--key and --products go together")
    problem = _load_allocation_input(args)
    optimal = None
    if args.rule == "exact":
        sol = solve_exact(problem, _solver_config(args))
        result, optimal = sol.result, sol.optimal
    elif args.rule == "greedy":
        result = solve_greedy(problem)
    else:
        result, optimal = brute_force(problem), True
    if args.key:
        if not problem.triple_ids:
            raise ParseError("instance has no triple ids; settlement needs them", path=args.instance)
        key, resolved = load_key(args.key)
        purchased = frozenset(key[problem.triple_ids[i]] for i in result.purchased)
        settlement = settle(replace(result, purchased=purchased), resolved, load_products(args.products))
        result = replace(result, settlement=settlement)
    _emit(_dumps(result_to_json(result, problem, args.rule, optimal)), args.out)
    return EXIT_OK


def cmd_settle(args) -> int:
    data = _read_json(args.result)
    if data.get("format") != RESULT_FORMAT:
        raise ParseError(f"expected format {RESULT_FORMAT!r}", path=args.result)
    key, resolved = load_key(args.key)
    try:
        purchased = frozenset(key[a] for a in data["purchased"])
        result = AllocationResult(frozenset(data["chosen"]), purchased,
                                  int(data["payment_minor"]), int(data["utility_minor"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"result does not match the key: {exc}", path=args.result) from None
    settlement = settle(result, resolved, load_products(args.products))
    out = {"payment": format_money(result.payment), "payment_minor": result.payment,
           "settlement": {k: format_money(v) for k, v in settlement.items()},
           "settlement_minor": settlement}
    _emit(_dumps(out), args.out)
    return EXIT_OK


def cmd_gen(args) -> int:
    if args.full_grid:
        s_values, d_values = STUDY_S, STUDY_D
    else:
        if not args.s or not args.d:
            raise UsageError("gen needs --s and --d (or --full-grid)")
        s_values, d_values = args.s, args.d
    grid = [(s, d) for s in s_values for d in d_values]
    if len(grid) == 1 and args.replicates == 1:
        s, d = grid[0]
        problems = [generate(ScenarioSpec(s, d, args.seed, args.tpm), args.budget_policy)]
    else:
        problems = sweep(grid, args.replicates, args.seed, args.tpm, args.budget_policy)
    if args.out_dir:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        for p in problems:
            (out_dir / f"{p.meta['instance_id']}.json").write_text(dump_problem(p))
        return EXIT_OK
    if len(problems) > 1:
        raise UsageError("several instances requested; use --out-dir")
    _emit(dump_problem(problems[0]), args.out)
    return EXIT_OK


def _instance_files(paths: list[str]) -> list[Path]:
    files: list[Path] = []
    for raw in paths:
        path = Path(raw)
        if path.is_dir():
            files.extend(sorted(path.glob("*.json")))
        elif path.exists():
            files.append(path)
        else:
            raise ParseError("no such file or directory", path=raw)
    return files


def cmd_bench(args) -> int:
    rules = [r.strip() for r in args.rules.split(",") if r.strip()]
    unknown = sorted(set(rules) - set(benchmod.RULES))
    if unknown:
        raise UsageError(f"unknown rule(s) {unknown}; choose from {list(benchmod.RULES)}")
    files = _instance_files(args.instances)
    if not files:
        raise ParseError("no instance files found", path=" ".join(args.instances))
    problems = []
    for f in files:
        p = load_problem(f)
        if "instance_id" not in p.meta:
            p.meta["instance_id"] = f.stem
        problems.append(p)
    cfg = _solver_config(args)
    records = benchmod.run(problems, rules, cfg, workers=args.workers)
    meta = {
        "generated": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "instances": len(problems),
        "rules": ",".join(rules),
        "backend": cfg.backend,
        "timeout_s": f"{cfg.timeout:g}",
        "workers": args.workers,
        "note": "desk-scale per-solve timeout; timed-out exact solves report optimal=false and the incumbent",
    }
    if args.out is None or args.out == "-":
        benchmod.write_csv(records, sys.stdout, meta)
    else:
        with open(args.out, "w", newline="") as fh:
            benchmod.write_csv(records, fh, meta)
    if args.ratios:
        rows = benchmod.utility_ratio(records)
        with open(args.ratios, "w", newline="") as fh:
            benchmod.write_ratio_csv(rows, fh, {"generated": meta["generated"],
                                                "median_ratio": f"{benchmod.median_ratio(rows):.6f}"})
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--timeout", type=float, default=60.0, help="exact-solver time limit in seconds")
    p.add_argument("--backend", choices=sorted(BACKENDS), default="highs")
    p.add_argument("--gap", type=int, default=0, help="absolute optimality gap in minor units")
    p.add_argument("--seed", type=int, default=0, help="recorded in the solver configuration")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="datamarket", description="Data-marketplace allocation engine.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("evaluate", help="evaluate a BGP query over a federation")
    p.add_argument("--quads", nargs="+", required=True, help="quad files (subject predicate object graph .)")
    p.add_argument("--query", required=True)
    p.add_argument("--products", required=True)
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("summarize", help="anonymize an answer into a summary")
    p.add_argument("--answer", required=True)
    p.add_argument("--products", required=True)
    p.add_argument("--seed", type=int, default=0, help="seed of the anonymous-id shuffle")
    p.add_argument("--key", help="write the private anonymization key here")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("allocate", help="run an allocation rule")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--instance")
    src.add_argument("--summary")
    p.add_argument("--valuation", help="valuation file; overrides instance values")
    p.add_argument("--budget", type=_money, help="budget in major units, e.g. 0.65")
    p.add_argument("--rule", choices=("exact", "greedy", "brute"), default="exact")
    p.add_argument("--key", help="private key from summarize, for settlement")
    p.add_argument("--products", help="products file, for settlement")
    _add_solver_flags(p)
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_allocate)

    p = sub.add_parser("settle", help="split a result's payment among providers")
    p.add_argument("--result", required=True)
    p.add_argument("--key", required=True)
    p.add_argument("--products", required=True)
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_settle)

    p = sub.add_parser("gen", help="generate synthetic instances")
    p.add_argument("--s", type=int, nargs="+", help="mapping count(s)")
    p.add_argument("--d", type=float, nargs="+", help="diversity value(s) in [0, 1]")
    p.add_argument("--full-grid", action="store_true", help="s in {50..1000} x d in {0, 0.1, .., 1}")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--tpm", type=int, default=5, help="triples per mapping")
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--budget-policy", choices=sorted(BUDGET_POLICIES), default="half-total")
    p.add_argument("--out-dir")
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("bench", help="benchmark allocation rules")
    p.add_argument("--instances", nargs="+", required=True, help="instance files or directories")
    p.add_argument("--rules", default="exact,greedy", help="comma-separated subset of exact,greedy,brute")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--ratios", help="also write the greedy/exact ratio table here")
    _add_solver_flags(p)
    p.add_argument("-o", "--out")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # --help exits 0, bad usage exits 1
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"datamarket {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MarketError, ValueError, OSError) as exc:
        print(f"datamarket {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
