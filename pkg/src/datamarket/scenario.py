"""Synthetic allocation instances with controllable triple diversity.

Random numbers come from numpy's PCG64. A scenario's seed feeds a
``SeedSequence`` that is split into three independent child streams, used
in this order:

    0. identifier assignment (slot permutation and extra draws)
    1. per-identifier prices
    2. per-mapping values

so changing how one quantity is drawn never shifts the others.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Callable, Iterable, Sequence

import numpy as np

from .allocation.problem import AllocationProblem

PRICE_MAX_MINOR = 100            # prices ~ U{$0.00 .. $1.00}
VALUE_RANGE_MINOR = (100, 200)   # per-triple value factor ~ U[$1.00, $2.00]
STUDY_S = (50, 100, 200, 500, 1000)
STUDY_D = tuple(i / 10 for i in range(11))


@dataclass(frozen=True)
class ScenarioSpec:
    s: int
    d: float
    seed: int
    triples_per_mapping: int = 5

    def __post_init__(self):
        if self.s < 1:
            raise ValueError("s must be >= 1")
        if not 0 <= self.d <= 1:
            raise ValueError("d must lie in [0, 1]")
        if self.triples_per_mapping < 1:
            raise ValueError("triples_per_mapping must be >= 1")

    @property
    def n(self) -> int:
        return self.s * self.triples_per_mapping

    @property
    def n_unique(self) -> int:
        return unique_count(self.n, self.d)

    @property
    def instance_id(self) -> str:
        return f"s{self.s}-d{self.d:g}-seed{self.seed}"


def unique_count(n: int, d: float) -> int:
    """``1 + d * (n - 1)`` rounded half-up, computed in exact decimal arithmetic."""
    x = 1 + Decimal(str(d)) * (n - 1)
    return int(x.quantize(Decimal(1), rounding=ROUND_HALF_UP))


def half_total_budget(prices: Sequence[int], required: Sequence[frozenset[int]]) -> int:
    """Half the cost of buying every distinct triple of the answer, rounded down."""
    return sum(prices) // 2


BUDGET_POLICIES: dict[str, Callable[[Sequence[int], Sequence[frozenset[int]]], int]] = {
    "half-total": half_total_budget,
}


def _streams(seed: int) -> list[np.random.Generator]:
    return [np.random.Generator(np.random.PCG64(c)) for c in np.random.SeedSequence(seed).spawn(3)]


def _draw(spec: ScenarioSpec, seed: int, budget_policy: str) -> AllocationProblem:
    assign_rng, price_rng, value_rng = _streams(seed)
    n, m, tpm = spec.n, spec.n_unique, spec.triples_per_mapping

    # every identifier is used at least once; remaining slots draw uniformly
    slot_ids = np.empty(n, dtype=np.int64)
    perm = assign_rng.permutation(n)
    slot_ids[perm[:m]] = np.arange(m)
    slot_ids[perm[m:]] = assign_rng.integers(0, m, size=n - m)

    prices = tuple(int(x) for x in price_rng.integers(0, PRICE_MAX_MINOR + 1, size=m))
    lo, hi = VALUE_RANGE_MINOR
    values = tuple(int(x) for x in np.rint(tpm * value_rng.uniform(lo, hi, size=spec.s)))
    required = tuple(frozenset(int(t) for t in slot_ids[j * tpm:(j + 1) * tpm]) for j in range(spec.s))
    budget = BUDGET_POLICIES[budget_policy](prices, required)
    meta = {
        "instance_id": spec.instance_id,
        "s": spec.s,
        "d": spec.d,
        "seed": spec.seed,
        "seed_used": seed,
        "triples_per_mapping": tpm,
        "n_unique": m,
        "budget_policy": budget_policy,
    }
    return AllocationProblem(values, prices, required, budget, meta=meta)


def _some_mapping_affordable(p: AllocationProblem) -> bool:
    return any(p.price_of(req) <= p.budget for req in p.required)


def generate(spec: ScenarioSpec, budget_policy: str = "half-total", max_retries: int = 100) -> AllocationProblem:
    """Draw one instance; deterministic in ``spec``.

    For ``d > 0`` an instance where no single mapping fits the budget is
    redrawn with the next seed (recorded as ``meta["seed_used"]``). At
    ``d = 0`` the answer holds one triple whose half-price budget can never
    buy it, so no redraw is attempted.
    """
    seed = spec.seed
    p = _draw(spec, seed, budget_policy)
    if spec.d > 0:
        for _ in range(max_retries):
            if _some_mapping_affordable(p):
                break
            seed += 1
            p = _draw(spec, seed, budget_policy)
    return p


def derive_seed(base_seed: int, grid_index: int, replicate: int) -> int:
    return int(np.random.SeedSequence([base_seed, grid_index, replicate]).generate_state(1)[0])


def sweep(grid: Iterable[tuple[int, float]], replicates: int, base_seed: int,
          triples_per_mapping: int = 5, budget_policy: str = "half-total") -> list[AllocationProblem]:
    """One instance per (s, d, replicate), in grid order then replicate order."""
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    out = []
    for gi, (s, d) in enumerate(grid):
        for r in range(replicates):
            spec = ScenarioSpec(s, d, derive_seed(base_seed, gi, r), triples_per_mapping)
            p = generate(spec, budget_policy)
            p.meta["replicate"] = r
            out.append(p)
    return out


def study_grid(s_values: Sequence[int] = STUDY_S, d_values: Sequence[float] = STUDY_D) -> list[tuple[int, float]]:
    return [(s, d) for s in s_values for d in d_values]


def total_cost(p: AllocationProblem) -> int:
    return sum(p.prices)


def budget_share(p: AllocationProblem) -> float:
    total = total_cost(p)
    return p.budget / total if total else math.nan
