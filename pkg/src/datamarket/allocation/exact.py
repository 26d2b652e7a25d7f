"""Exact allocation rule.

The integer program being solved is::

    max  sum_j r_j v_j - sum_i tau_i pi_i
    s.t. sum_{i in I_j} tau_i - |I_j| r_j >= 0      for every mapping j
         sum_i tau_i pi_i <= budget
         r, tau binary

Two backends prove optimality:

``highs``
    The program above handed to HiGHS through :func:`scipy.optimize.milp`.
    Each linking row is split into ``tau_i - r_j >= 0`` for ``i in I_j``;
    the binary solutions are the same and the LP relaxation is tighter.
``bnb``
    A self-contained depth-first branch and bound. At an optimum ``tau`` is
    the union of the chosen mappings' index sets, so it branches on mappings
    only and buys triples implicitly.

Bound used by ``bnb``. Let ``B`` be the triples bought on the current path and ``c_t`` the
number of still-undecided mappings that use an unbought triple ``t``. Any
completion ``A`` of the path pays ``pi_t`` once for every new triple and at
most ``c_t`` members of ``A`` share it, so charging each undecided mapping
``w_j = sum_{t in I_j \\ B} pi_t / c_t`` under-estimates what ``A`` adds to
the payment. Hence ``gain(A) <= sum_{j in A} (v_j - w_j)`` with
``sum_{j in A} w_j <= remaining budget``, and the fractional knapsack over
those profits and weights is a valid upper bound. It decomposes per mapping,
which keeps each node linear in the size of the open subproblem.
"""

from __future__ import annotations

import math
import sys
import time
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import Bounds, LinearConstraint, milp
from scipy.sparse import csr_matrix

from ..market import AllocationResult
from .greedy import solve_greedy
from .problem import AllocationProblem

_CHECK_EVERY = 256
# bounds are computed in floating point; utilities are integers
_EPS = 1e-7


@dataclass(frozen=True)
class SolverConfig:
    """Exact-solver settings.

    ``timeout`` is in seconds. ``backend`` is ``"highs"`` or ``"bnb"``.
    ``gap_tolerance`` (minor units) lets the
    search prune nodes that cannot beat the incumbent by more than that
    amount; 0 proves exact optimality. ``seed`` is accepted for
    reproducible configuration records; the serial search is deterministic
    and does not draw random numbers.
    """

    timeout: float = 60.0
    seed: int = 0
    gap_tolerance: int = 0
    backend: str = "highs"

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(f"unknown backend {self.backend!r}; choose from {sorted(BACKENDS)}")
        if not self.timeout > 0:
            raise ValueError("timeout must be positive")
        if self.gap_tolerance < 0:
            raise ValueError("gap_tolerance must be non-negative")


class ExactSolution(NamedTuple):
    result: AllocationResult
    optimal: bool
    # proven upper bound minus incumbent utility; 0 when optimal
    gap: int
    nodes: int


class _Timeout(Exception):
    pass


class _Search:
    def __init__(self, p: AllocationProblem, cfg: SolverConfig):
        self.p = p
        self.tol = cfg.gap_tolerance
        self.deadline = time.monotonic() + cfg.timeout
        self.prices = p.prices
        self.values = p.values
        self.req = [tuple(sorted(r)) for r in p.required]
        self.users = p.users()
        self.resid = [p.price_of(r) for r in p.required]
        self.bought = [False] * p.n
        self.count = [0] * p.n
        self.payment = 0
        self.value = 0
        self.chosen: list[int] = []
        self.nodes = 0

        start = solve_greedy(p)
        self.best = start.utility
        self.best_set = tuple(sorted(start.chosen))

        # mappings worth nothing or unaffordable even alone never help
        self.root = [j for j in range(p.k) if self.values[j] > 0 and self.resid[j] <= p.budget]
        for j in self.root:
            for t in self.req[j]:
                self.count[t] += 1

    # -- state changes, each paired with an undo ---------------------------

    def _release(self, j: int) -> None:
        for t in self.req[j]:
            self.count[t] -= 1

    def _restore(self, j: int) -> None:
        for t in self.req[j]:
            self.count[t] += 1

    def _buy(self, j: int) -> list[int]:
        new = []
        prices, bought, resid, users = self.prices, self.bought, self.resid, self.users
        for t in self.req[j]:
            if not bought[t]:
                bought[t] = True
                pt = prices[t]
                self.payment += pt
                if pt:
                    for u in users[t]:
                        resid[u] -= pt
                new.append(t)
        self.value += self.values[j]
        self.chosen.append(j)
        return new

    def _unbuy(self, j: int, new: list[int]) -> None:
        prices, bought, resid, users = self.prices, self.bought, self.resid, self.users
        for t in new:
            bought[t] = False
            pt = prices[t]
            self.payment -= pt
            if pt:
                for u in users[t]:
                    resid[u] += pt
        self.value -= self.values[j]
        self.chosen.pop()

    # -- search ------------------------------------------------------------

    def bound(self, open_: list[int], cap: int) -> tuple[float, list[int]]:
        """Upper bound on the extra utility reachable from ``open_`` and the
        positive-profit mappings ordered by profit density."""
        prices, count, bought = self.prices, self.count, self.bought
        items = []
        for j in open_:
            w = 0.0
            for t in self.req[j]:
                if not bought[t]:
                    w += prices[t] / count[t]
            profit = self.values[j] - w
            if profit > 0:
                items.append((profit / w if w > 0 else math.inf, profit, w, j))
        items.sort(key=lambda x: (-x[0], x[3]))
        room = float(cap)
        total = 0.0
        for _, profit, w, _j in items:
            if w <= room:
                room -= w
                total += profit
            else:
                total += profit * room / w
                break
        return total, [it[3] for it in items]

    def node(self, open_: list[int]) -> float:
        self.nodes += 1
        if self.nodes % _CHECK_EVERY == 0 and time.monotonic() > self.deadline:
            raise _Timeout
        cap = self.p.budget - self.payment
        resid = self.resid

        # drop mappings that no longer fit (residual minus remaining budget
        # never decreases along a path) and take free ones
        keep, dropped, free = [], [], []
        for j in open_:
            r = resid[j]
            if r > cap:
                dropped.append(j)
            elif r == 0:
                free.append(j)
            else:
                keep.append(j)
        for j in dropped:
            self._release(j)
        bought_free = []
        for j in free:
            self._release(j)
            bought_free.append(self._buy(j))

        try:
            here = self.value - self.payment
            if here > self.best:
                self.best = here
                self.best_set = tuple(sorted(self.chosen))
            if not keep:
                return float(here)
            extra, order = self.bound(keep, cap)
            ub = here + extra
            if math.floor(ub + _EPS) <= self.best + self.tol:
                return ub
            if not order:
                return ub
            j = order[0]
            rest = [x for x in keep if x != j]

            self._release(j)
            new = self._buy(j)
            try:
                self.node(rest)
            finally:
                self._unbuy(j, new)

            self.node(rest)
            self._restore(j)
            return ub
        finally:
            for j, new in zip(reversed(free), reversed(bought_free)):
                self._unbuy(j, new)
                self._restore(j)
            for j in dropped:
                self._restore(j)

    def run(self) -> ExactSolution:
        cap = self.p.budget
        root_extra, _ = self.bound(self.root, cap) if self.root else (0.0, [])
        root_ub = math.floor(root_extra + _EPS)
        limit = sys.getrecursionlimit()
        sys.setrecursionlimit(max(limit, 4 * self.p.k + 1000))
        try:
            self.node(list(self.root))
            optimal = True
        except _Timeout:
            optimal = False
        finally:
            sys.setrecursionlimit(limit)
        result = self.p.result_for(self.best_set)
        gap = 0 if optimal else max(0, root_ub - result.utility)
        return ExactSolution(result, optimal, gap, self.nodes)


def _milp_model(p: AllocationProblem):
    k, n = p.k, p.n
    # variables: r_0..r_{k-1}, tau_0..tau_{n-1}; milp minimizes
    c = np.concatenate([-np.asarray(p.values, dtype=float), np.asarray(p.prices, dtype=float)])
    rows, cols, data = [], [], []
    row = 0
    for j, req in enumerate(p.required):
        for t in sorted(req):
            rows += [row, row]
            cols += [k + t, j]
            data += [1.0, -1.0]
            row += 1
    for t in range(n):
        if p.prices[t]:
            rows.append(row)
            cols.append(k + t)
            data.append(float(p.prices[t]))
    A = csr_matrix((data, (rows, cols)), shape=(row + 1, k + n))
    lower = np.zeros(row + 1)
    upper = np.full(row + 1, np.inf)
    lower[row] = -np.inf
    upper[row] = p.budget
    return c, LinearConstraint(A, lower, upper)


def _solve_highs(p: AllocationProblem, cfg: SolverConfig) -> ExactSolution:
    greedy = solve_greedy(p)
    if p.k == 0:
        return ExactSolution(greedy, True, 0, 0)
    c, cons = _milp_model(p)
    # a relative gap of tol / sum(values) never exceeds tol in absolute terms
    rel_gap = cfg.gap_tolerance / max(1, sum(p.values))
    res = milp(c, constraints=cons, integrality=np.ones(c.size), bounds=Bounds(0, 1),
               options={"time_limit": cfg.timeout, "mip_rel_gap": rel_gap})
    best = greedy
    if res.x is not None:
        chosen = [j for j in range(p.k) if res.x[j] > 0.5]
        cand = p.result_for(chosen)
        if cand.payment <= p.budget and cand.utility > best.utility:
            best = cand
    optimal = res.status == 0
    gap = 0
    if not optimal:
        dual = getattr(res, "mip_dual_bound", None)
        if dual is not None and np.isfinite(dual):
            gap = max(0, math.floor(-dual + _EPS) - best.utility)
        else:
            gap = max(0, sum(p.values) - best.utility)
    nodes = int(getattr(res, "mip_node_count", 0) or 0)
    return ExactSolution(best, optimal, gap, nodes)


def _solve_bnb(p: AllocationProblem, cfg: SolverConfig) -> ExactSolution:
    return _Search(p, cfg).run()


BACKENDS = {"highs": _solve_highs, "bnb": _solve_bnb}


def solve_exact(p: AllocationProblem, cfg: SolverConfig = SolverConfig()) -> ExactSolution:
    """Utility-maximizing allocation under the budget.

    Returns the best allocation found with ``optimal=True`` when optimality
    was proven within ``cfg.timeout``; otherwise the incumbent (never worse
    than the greedy allocation) with ``optimal=False``. The returned
    allocation buys exactly the triples its mappings need.
    """
    if not p.linear:
        raise ValueError("the exact rule needs a linear valuation; use solve_greedy")
    return BACKENDS[cfg.backend](p, cfg)
