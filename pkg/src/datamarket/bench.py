"""Benchmark harness: run allocation rules over instances, record runtime and utility.

CSV layout (one row per instance and rule, after ``#``-prefixed metadata)::

    instance_id,s,d,rule,runtime_ms,utility_minor,payment_minor,optimal,timeout_ms,error
"""

from __future__ import annotations

import csv
import io
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence, TextIO

from .allocation import AllocationProblem, SolverConfig, brute_force, solve_exact, solve_greedy
from .errors import MissingPair

RULES = ("exact", "greedy", "brute")
CSV_COLUMNS = ("instance_id", "s", "d", "rule", "runtime_ms", "utility_minor",
               "payment_minor", "optimal", "timeout_ms", "error")
RATIO_COLUMNS = ("instance_id", "s", "d", "greedy_utility_minor", "exact_utility_minor", "ratio", "status")


@dataclass(frozen=True)
class BenchRecord:
    instance_id: str
    s: int | None
    d: float | None
    rule: str
    runtime_ms: float
    utility: int | None
    payment: int | None
    optimal: bool
    timeout_ms: float
    error: str = ""


@dataclass(frozen=True)
class RatioRow:
    instance_id: str
    s: int | None
    d: float | None
    greedy: int
    exact: int
    ratio: float
    # ok | degenerate | unproven
    status: str


def instance_id(problem: AllocationProblem, position: int) -> str:
    return str(problem.meta.get("instance_id", f"instance-{position:05d}"))


def solve_one(problem: AllocationProblem, rule: str, cfg: SolverConfig, iid: str = "") -> BenchRecord:
    """Solve once and time only the solver call."""
    s = problem.meta.get("s")
    d = problem.meta.get("d")
    timeout_ms = cfg.timeout * 1000 if rule == "exact" else 0.0
    start = time.perf_counter()
    try:
        if rule == "exact":
            sol = solve_exact(problem, cfg)
            result, optimal = sol.result, sol.optimal
        elif rule == "greedy":
            result, optimal = solve_greedy(problem), False
        elif rule == "brute":
            result, optimal = brute_force(problem), True
        else:
            raise ValueError(f"unknown rule {rule!r}")
    except Exception as exc:  # recorded per row, never aborts the suite
        runtime = (time.perf_counter() - start) * 1000
        return BenchRecord(iid, s, d, rule, runtime, None, None, False, timeout_ms,
                           f"{type(exc).__name__}: {exc}")
    runtime = (time.perf_counter() - start) * 1000
    return BenchRecord(iid, s, d, rule, runtime, result.utility, result.payment, optimal, timeout_ms)


def _task(args):
    problem, rule, cfg, iid = args
    return solve_one(problem, rule, cfg, iid)


def run(instances: Sequence[AllocationProblem], rules: Iterable[str], cfg: SolverConfig = SolverConfig(),
        workers: int = 1) -> list[BenchRecord]:
    """Solve every (instance, rule) pair once.

    With ``workers > 1`` pairs are spread over worker processes; runtimes
    stay per-solve, but concurrent solves compete for cores, so keep
    ``workers`` at or below the physical core count.
    """
    rules = [r for r in RULES if r in set(rules)]
    unknown = set(rules) - set(RULES)
    if unknown:
        raise ValueError(f"unknown rules {sorted(unknown)}")
    tasks = [(p, rule, cfg, instance_id(p, i)) for i, p in enumerate(instances) for rule in rules]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_task, tasks))
    else:
        records = [_task(t) for t in tasks]
    order = {r: i for i, r in enumerate(RULES)}
    return sorted(records, key=lambda r: (r.instance_id, order[r.rule]))


def utility_ratio(records: Iterable[BenchRecord]) -> list[RatioRow]:
    """Greedy over exact utility for each instance.

    Both utilities 0 counts as ratio 1. Rows whose exact solve did not prove
    optimality are kept with status ``unproven``; summaries exclude them.
    """
    pairs: dict[str, dict[str, BenchRecord]] = {}
    for rec in records:
        if rec.rule in ("greedy", "exact"):
            pairs.setdefault(rec.instance_id, {})[rec.rule] = rec
    rows = []
    for iid in sorted(pairs):
        pair = pairs[iid]
        if "greedy" not in pair or "exact" not in pair:
            raise MissingPair(f"instance {iid} lacks a {'greedy' if 'greedy' not in pair else 'exact'} record")
        g, e = pair["greedy"], pair["exact"]
        if g.error or e.error or g.utility is None or e.utility is None:
            raise MissingPair(f"instance {iid} has a failed solve: {g.error or e.error}")
        if e.utility == 0:
            ratio, status = (1.0, "ok") if g.utility == 0 else (math.nan, "degenerate")
        else:
            ratio, status = g.utility / e.utility, "ok"
        if not e.optimal:
            status = "unproven"
        rows.append(RatioRow(iid, e.s, e.d, g.utility, e.utility, ratio, status))
    return rows


def median_ratio(rows: Iterable[RatioRow], s: int | None = None) -> float:
    vals = [r.ratio for r in rows if r.status == "ok" and (s is None or r.s == s)]
    return statistics.median(vals) if vals else math.nan


def median_runtime(records: Iterable[BenchRecord], rule: str, s: int | None = None,
                   d: float | None = None) -> float:
    vals = [r.runtime_ms for r in records
            if r.rule == rule and (s is None or r.s == s) and (d is None or r.d == d)]
    return statistics.median(vals) if vals else math.nan


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.3f}" if not math.isnan(value) else "nan"
    return str(value)


def write_csv(records: Iterable[BenchRecord], out: TextIO, metadata: Mapping[str, object] = {}) -> None:
    for key, value in metadata.items():
        out.write(f"# {key}: {value}\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in records:
        d = "" if r.d is None else f"{r.d:g}"
        w.writerow([r.instance_id, _fmt(r.s), d, r.rule, f"{r.runtime_ms:.3f}", _fmt(r.utility),
                    _fmt(r.payment), _fmt(r.optimal), f"{r.timeout_ms:.0f}", r.error])


def write_ratio_csv(rows: Iterable[RatioRow], out: TextIO, metadata: Mapping[str, object] = {}) -> None:
    for key, value in metadata.items():
        out.write(f"# {key}: {value}\n")
    w = csv.writer(out, lineterminator="\n")
    w.writerow(RATIO_COLUMNS)
    for r in rows:
        d = "" if r.d is None else f"{r.d:g}"
        w.writerow([r.instance_id, _fmt(r.s), d, r.greedy, r.exact, f"{r.ratio:.6f}", r.status])


def read_csv(source: str | Path | TextIO) -> list[BenchRecord]:
    if isinstance(source, (str, Path)):
        text = Path(source).read_text()
    else:
        text = source.read()
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    out = []
    for row in csv.DictReader(io.StringIO("\n".join(lines))):
        out.append(BenchRecord(
            instance_id=row["instance_id"],
            s=int(row["s"]) if row["s"] else None,
            d=float(row["d"]) if row["d"] else None,
            rule=row["rule"],
            runtime_ms=float(row["runtime_ms"]),
            utility=int(row["utility_minor"]) if row["utility_minor"] else None,
            payment=int(row["payment_minor"]) if row["payment_minor"] else None,
            optimal=row["optimal"] == "true",
            timeout_ms=float(row["timeout_ms"]),
            error=row["error"],
        ))
    return out
