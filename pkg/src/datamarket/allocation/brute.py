"""Exhaustive enumeration of mapping subsets, used as a verification oracle."""

from __future__ import annotations

from ..errors import TooLarge
from ..market import AllocationResult
from .problem import AllocationProblem

MAX_BRUTE_K = 25


def brute_force(p: AllocationProblem, max_k: int = MAX_BRUTE_K) -> AllocationResult:
    """Best allocation over all ``2**k`` subsets of mappings.

    The payment of a subset is the price of the union of its required
    triples, so shared triples are paid once. Among equal utilities the
    subset with fewer mappings wins, then the lexicographically smaller
    sorted index tuple.
    """
    if p.k > max_k:
        raise TooLarge(f"brute force is limited to k <= {max_k}, got k={p.k}")
    masks = [sum(1 << t for t in req) for req in p.required]
    prices = p.prices
    budget = p.budget
    schedule = p.schedule
    best_key = None
    best: tuple[int, ...] = ()

    def price_of_new(mask: int, bought: int) -> int:
        new = mask & ~bought
        total = 0
        while new:
            low = new & -new
            total += prices[low.bit_length() - 1]
            new ^= low
        return total

    # depth-first over include/exclude decisions in index order
    stack = [(0, 0, 0, 0, ())]
    while stack:
        j, bought, payment, value, chosen = stack.pop()
        if j == p.k:
            if schedule is not None:
                value = sum(schedule[: len(chosen)])
            key = (-(value - payment), len(chosen), chosen)
            if best_key is None or key < best_key:
                best_key, best = key, chosen
            continue
        stack.append((j + 1, bought, payment, value, chosen))
        extra = price_of_new(masks[j], bought)
        if payment + extra <= budget:
            stack.append((j + 1, bought | masks[j], payment + extra,
                          value + p.values[j], chosen + (j,)))
    return p.result_for(best)
