"""Greedy allocation by best utility-to-price ratio."""

from __future__ import annotations

from ..market import AllocationResult
from .problem import AllocationProblem


def solve_greedy(p: AllocationProblem) -> AllocationResult:
    order, purchased, payment = _run(p)
    return AllocationResult(frozenset(order), purchased, payment, p.value_of(order) - payment)


def greedy_order(p: AllocationProblem) -> list[int]:
    """Mapping indices in the order the greedy rule allocates them."""
    return _run(p)[0]


def _run(p: AllocationProblem) -> tuple[list[int], frozenset[int], int]:
    """Repeatedly allocate the unallocated mapping with the highest ratio.

    Each round every unallocated mapping ``i`` is priced by its residual
    price (triples not yet marked for purchase), ``u_i = v_i - price_i`` and
    ``ratio_i = u_i / price_i``. Only mappings with ``u_i >= 0`` that still fit
    the budget compete. A zero residual price counts as an infinite ratio.
    Ties go to the lowest mapping index. Ratios are compared by
    cross-multiplication, so no floating point is involved.

    Residual prices are maintained incrementally: buying a triple lowers the
    residual of exactly the mappings that use it.
    """
    prices = p.prices
    users = p.users()
    residual = [p.price_of(req) for req in p.required]
    bought = [False] * p.n
    remaining = list(range(p.k))
    chosen: list[int] = []
    payment = 0

    while remaining:
        if p.schedule is None:
            next_value = None
        else:
            next_value = p.schedule[len(chosen)] if len(chosen) < len(p.schedule) else 0
        best = -1
        best_u = best_pi = 0
        for i in remaining:
            pi = residual[i]
            if payment + pi > p.budget:
                continue
            u = (p.values[i] if next_value is None else next_value) - pi
            if u < 0:
                continue
            if best < 0:
                better = True
            elif pi == 0:
                better = best_pi != 0
            elif best_pi == 0:
                better = False
            else:
                better = u * best_pi > best_u * pi
            if better:
                best, best_u, best_pi = i, u, pi
        if best < 0:
            break
        chosen.append(best)
        payment += best_pi
        remaining.remove(best)
        for t in p.required[best]:
            if not bought[t]:
                bought[t] = True
                for j in users[t]:
                    residual[j] -= prices[t]

    return chosen, frozenset(t for t in range(p.n) if bought[t]), payment
