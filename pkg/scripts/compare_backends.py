"""Compare the two exact backends (HiGHS and the built-in branch and bound)
on the same instances: runtime, proven optimality and agreement.

    python scripts/compare_backends.py --s 20 50 --d 0.3 0.7 --replicates 3 --timeout 30
"""

from __future__ import annotations

import argparse
import time

from datamarket.allocation import SolverConfig, solve_exact
from datamarket.scenario import sweep


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--s", type=int, nargs="+", default=[20, 50])
    ap.add_argument("--d", type=float, nargs="+", default=[0.3, 0.7, 1.0])
    ap.add_argument("--replicates", type=int, default=3)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--timeout", type=float, default=30.0)
    args = ap.parse_args()

    print(f"{'instance':<28} {'highs ms':>9} {'bnb ms':>9} {'highs':>7} {'bnb':>7} agree")
    for p in sweep([(s, d) for s in args.s for d in args.d], args.replicates, args.seed):
        out = {}
        for backend in ("highs", "bnb"):
            t = time.perf_counter()
            sol = solve_exact(p, SolverConfig(timeout=args.timeout, backend=backend))
            out[backend] = (1000 * (time.perf_counter() - t), sol)
        (th, h), (tb, b) = out["highs"], out["bnb"]
        agree = h.result.utility == b.result.utility if h.optimal and b.optimal else "-"
        print(f"{p.meta['instance_id']:<28} {th:>9.1f} {tb:>9.1f} {str(h.optimal):>7} {str(b.optimal):>7} {agree}")


if __name__ == "__main__":
    main()
