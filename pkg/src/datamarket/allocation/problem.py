"""The normalized allocation instance and its file format."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from ..errors import MissingValue, ParseError
from ..market import AllocationResult, Summary, Valuation

INSTANCE_FORMAT = "datamarket.instance"
INSTANCE_VERSION = 1


@dataclass(frozen=True)
class AllocationProblem:
    """Mappings ``0..k-1`` each needing the triples ``required[j]`` (indices ``0..n-1``).

    With ``schedule`` set the valuation is diminishing: the t-th allocated
    mapping is worth ``schedule[t]`` and ``values`` is ignored.
    """

    values: tuple[int, ...]
    prices: tuple[int, ...]
    required: tuple[frozenset[int], ...]
    budget: int
    schedule: tuple[int, ...] | None = None
    triple_ids: tuple[str, ...] = ()
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        object.__setattr__(self, "prices", tuple(self.prices))
        object.__setattr__(self, "required", tuple(frozenset(r) for r in self.required))
        if self.schedule is not None:
            object.__setattr__(self, "schedule", tuple(self.schedule))
        object.__setattr__(self, "triple_ids", tuple(self.triple_ids))
        if len(self.values) != len(self.required):
            raise ValueError("values and required index sets differ in length")
        if self.budget < 0 or any(v < 0 for v in self.values) or any(p < 0 for p in self.prices):
            raise ValueError("values, prices and budget must be non-negative")
        n = len(self.prices)
        used = set()
        for j, req in enumerate(self.required):
            if not req:
                raise ValueError(f"mapping {j} requires no triples")
            if min(req) < 0 or max(req) >= n:
                raise ValueError(f"mapping {j} references a triple outside 0..{n - 1}")
            used |= req
        if len(used) != n:
            raise ValueError(f"triples {sorted(set(range(n)) - used)[:5]} are required by no mapping")
        if self.triple_ids and len(self.triple_ids) != n:
            raise ValueError("triple_ids must name every triple")
        if self.schedule is not None and any(a < b for a, b in zip(self.schedule, self.schedule[1:])):
            raise ValueError("diminishing schedule must be non-increasing")

    @property
    def k(self) -> int:
        return len(self.required)

    @property
    def n(self) -> int:
        return len(self.prices)

    @property
    def linear(self) -> bool:
        return self.schedule is None

    def users(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.n)]
        for j, req in enumerate(self.required):
            for t in req:
                out[t].append(j)
        return out

    def price_of(self, triples: Iterable[int]) -> int:
        return sum(self.prices[t] for t in triples)

    def value_of(self, chosen: Iterable[int]) -> int:
        chosen = list(chosen)
        if self.schedule is None:
            return sum(self.values[j] for j in chosen)
        return sum(self.schedule[: len(chosen)])

    def result_for(self, chosen: Iterable[int]) -> AllocationResult:
        """The allocation buying exactly the triples the chosen mappings need."""
        chosen = frozenset(chosen)
        purchased = frozenset().union(*(self.required[j] for j in chosen))
        payment = self.price_of(purchased)
        return AllocationResult(chosen, purchased, payment, self.value_of(chosen) - payment)

    def to_json(self) -> dict:
        data = {
            "format": INSTANCE_FORMAT,
            "version": INSTANCE_VERSION,
            "budget_minor": self.budget,
            "values_minor": list(self.values),
            "prices_minor": list(self.prices),
            "required": [sorted(r) for r in self.required],
        }
        if self.schedule is not None:
            data["schedule_minor"] = list(self.schedule)
        if self.triple_ids:
            data["triple_ids"] = list(self.triple_ids)
        if self.meta:
            data["meta"] = dict(self.meta)
        return data

    @classmethod
    def from_json(cls, data: dict) -> "AllocationProblem":
        if data.get("format") != INSTANCE_FORMAT:
            raise ParseError(f"expected format {INSTANCE_FORMAT!r}, got {data.get('format')!r}")
        if data.get("version") != INSTANCE_VERSION:
            raise ParseError(f"unsupported instance version {data.get('version')!r}")
        try:
            return cls(
                values=tuple(int(v) for v in data["values_minor"]),
                prices=tuple(int(p) for p in data["prices_minor"]),
                required=tuple(frozenset(int(t) for t in r) for r in data["required"]),
                budget=int(data["budget_minor"]),
                schedule=tuple(data["schedule_minor"]) if "schedule_minor" in data else None,
                triple_ids=tuple(data.get("triple_ids", ())),
                meta=dict(data.get("meta", {})),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"bad instance: {exc}") from None


def dump_problem(problem: AllocationProblem) -> str:
    return json.dumps(problem.to_json(), separators=(",", ":"), sort_keys=True) + "\n"


def load_problem(path: str | Path) -> AllocationProblem:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno, path=str(path)) from None
    try:
        return AllocationProblem.from_json(data)
    except ParseError as exc:
        raise ParseError(str(exc), path=str(path)) from None


def _anon_key(anon: str):
    # t1 < t2 < t10; anything else sorts after, by text
    return (0, int(anon[1:]), "") if anon[:1] == "t" and anon[1:].isdigit() else (1, 0, anon)


def build_problem(summary: Summary, valuation: Valuation, budget: int) -> AllocationProblem:
    """Index the summary's anonymous triples and attach values and budget."""
    ids = sorted({a for _, row in summary.rows for a in row}, key=_anon_key)
    index = {a: i for i, a in enumerate(ids)}
    required = tuple(frozenset(index[a] for a in row) for _, row in summary.rows)
    prices = tuple(summary.triple_info[a].price for a in ids)
    if valuation.kind == "linear":
        values = []
        for mapping, _ in summary.rows:
            if mapping not in valuation.linear:
                raise MissingValue(f"valuation assigns no value to mapping {mapping}")
            values.append(valuation.linear[mapping])
        return AllocationProblem(tuple(values), prices, required, budget, triple_ids=tuple(ids))
    return AllocationProblem((0,) * len(required), prices, required, budget,
                             schedule=valuation.schedule, triple_ids=tuple(ids))


def check_feasible(problem: AllocationProblem, result: AllocationResult) -> list[str]:
    """Return a list of violated result invariants (empty when sound)."""
    errs = []
    if result.payment > problem.budget:
        errs.append(f"payment {result.payment} exceeds budget {problem.budget}")
    if result.payment != problem.price_of(result.purchased):
        errs.append("payment differs from the price of the purchased triples")
    for j in result.chosen:
        if not problem.required[j] <= result.purchased:
            errs.append(f"mapping {j} chosen without all its triples")
    if result.utility != problem.value_of(result.chosen) - result.payment:
        errs.append("utility differs from value minus payment")
    if result.utility < 0:
        errs.append("negative utility")
    return errs

