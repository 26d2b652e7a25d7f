"""Economic domain model: products, offers, valuations, summaries, settlement.

Money is always an ``int`` number of minor currency units (cents). Decimal
strings such as ``"0.10"`` are only accepted at the file boundary and are
converted with :func:`parse_money`.
"""

from __future__ import annotations

import json
import random
from collections import defaultdict
from dataclasses import dataclass, field, replace
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

from .errors import MissingOffer, ParseError, SettlementMismatch, UnknownProduct

MINOR_PER_MAJOR = 100

PRODUCTS_FORMAT = "datamarket.products"
PRODUCTS_VERSION = 1


def parse_money(text: str | int | Decimal) -> int:
    """Convert a decimal amount in major units ("0.10") to minor units (10)."""
    try:
        amount = Decimal(str(text).strip().lstrip("$"))
    except InvalidOperation:
        raise ValueError(f"not a money amount: {text!r}") from None
    minor = amount * MINOR_PER_MAJOR
    if minor != minor.to_integral_value():
        raise ValueError(f"money amount {text!r} has sub-cent precision")
    return int(minor)


def format_money(minor: int) -> str:
    sign = "-" if minor < 0 else ""
    whole, frac = divmod(abs(minor), MINOR_PER_MAJOR)
    return f"{sign}{whole}.{frac:02d}"


def is_literal(term: str) -> bool:
    return term.startswith('"')


def is_resource(term: str) -> bool:
    # IRIs are written <...>; prefixed names and blank nodes always contain ':'
    if is_literal(term) or term.startswith("?"):
        return False
    return (term.startswith("<") and term.endswith(">")) or ":" in term


@dataclass(frozen=True, order=True)
class TripleAtom:
    """An RDF statement.

    Literal objects keep their surrounding double quotes (``'"8"'``), which
    is the marker distinguishing them from resource identifiers.
    """

    subject: str
    predicate: str
    object: str

    def __post_init__(self):
        for name in ("subject", "predicate", "object"):
            if not getattr(self, name):
                raise ValueError(f"empty {name} in triple")
        if not is_resource(self.subject):
            raise ValueError(f"subject must be a resource identifier: {self.subject!r}")
        if not is_resource(self.predicate):
            raise ValueError(f"predicate must be a resource identifier: {self.predicate!r}")
        if not (is_resource(self.object) or is_literal(self.object)):
            raise ValueError(f"object must be a resource or a quoted literal: {self.object!r}")

    def __iter__(self):
        return iter((self.subject, self.predicate, self.object))

    def __str__(self):
        return f"{self.subject} {self.predicate} {self.object} ."


@dataclass(frozen=True)
class DataProduct:
    product_id: str
    provider_id: str
    price_per_triple: int
    graph_ids: frozenset[str]
    metadata: Mapping[str, str | int | float] = field(default_factory=dict, compare=False)
    # keys of ``metadata`` that may appear in summaries; None exposes all of them
    exposed: frozenset[str] | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.price_per_triple < 0:
            raise ValueError(f"product {self.product_id}: negative price")
        if not self.graph_ids:
            raise ValueError(f"product {self.product_id}: no graphs")
        object.__setattr__(self, "graph_ids", frozenset(self.graph_ids))
        if self.exposed is not None:
            object.__setattr__(self, "exposed", frozenset(self.exposed))

    @property
    def public_metadata(self) -> dict[str, str | int | float]:
        if self.exposed is None:
            return dict(self.metadata)
        return {k: v for k, v in self.metadata.items() if k in self.exposed}


@dataclass(frozen=True)
class Offer:
    triple: TripleAtom
    product_id: str
    price: int


class ResolvedOffer(NamedTuple):
    price: int
    product_id: str


@dataclass(frozen=True)
class SolutionMapping:
    """Variable bindings plus the triples needed to realize them.

    ``bindings`` is normalized to a sorted tuple of ``(variable, term)`` pairs
    so mappings hash and compare by value.
    """

    bindings: tuple[tuple[str, str], ...]
    required_triples: frozenset[TripleAtom]

    def __post_init__(self):
        if isinstance(self.bindings, Mapping):
            object.__setattr__(self, "bindings", tuple(sorted(self.bindings.items())))
        object.__setattr__(self, "required_triples", frozenset(self.required_triples))

    def as_dict(self) -> dict[str, str]:
        return dict(self.bindings)


@dataclass(frozen=True)
class Valuation:
    """Customer valuation over solution mappings.

    ``linear`` maps a mapping index to its value. ``diminishing`` is a
    non-increasing schedule where the t-th allocated mapping (in allocation
    order) is worth ``schedule[t]``; positions past the end are worth 0.
    """

    kind: str
    linear: Mapping[int, int] = field(default_factory=dict)
    schedule: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in ("linear", "diminishing"):
            raise ValueError(f"unknown valuation kind {self.kind!r}")
        if any(v < 0 for v in self.linear.values()) or any(v < 0 for v in self.schedule):
            raise ValueError("valuations must be non-negative")
        if any(a < b for a, b in zip(self.schedule, self.schedule[1:])):
            raise ValueError("diminishing schedule must be non-increasing")

    @classmethod
    def from_values(cls, values: Iterable[int]) -> "Valuation":
        return cls("linear", linear=dict(enumerate(values)))

    @classmethod
    def diminishing_schedule(cls, schedule: Iterable[int]) -> "Valuation":
        return cls("diminishing", schedule=tuple(schedule))

    def value_of(self, chosen: Iterable[int]) -> int:
        chosen = list(chosen)
        if self.kind == "linear":
            return sum(self.linear[i] for i in chosen)
        return sum(self.schedule[: len(chosen)])


@dataclass(frozen=True)
class TripleInfo:
    price: int
    metadata: Mapping[str, str | int | float] = field(default_factory=dict)


@dataclass(frozen=True)
class Summary:
    """Anonymized view of a query answer revealed before payment."""

    rows: tuple[tuple[int, tuple[str, ...]], ...]
    triple_info: Mapping[str, TripleInfo]

    def __len__(self):
        return len(self.rows)

    def to_json(self) -> dict:
        return {
            "format": "datamarket.summary",
            "version": 1,
            "rows": [{"mapping": i, "triples": list(ids)} for i, ids in self.rows],
            "triples": {
                anon: {"price_minor": info.price, "metadata": dict(info.metadata)}
                for anon, info in self.triple_info.items()
            },
        }

    @classmethod
    def from_json(cls, data: dict) -> "Summary":
        _check_header(data, "datamarket.summary", 1)
        rows = tuple((int(r["mapping"]), tuple(r["triples"])) for r in data["rows"])
        info = {
            anon: TripleInfo(int(t["price_minor"]), dict(t.get("metadata", {})))
            for anon, t in data["triples"].items()
        }
        return cls(rows, info)


@dataclass(frozen=True)
class AllocationResult:
    """Outcome of an allocation rule.

    ``purchased`` holds triple indices of the allocation problem, or canonical
    :class:`TripleAtom` values once lifted back through the summary key.
    """

    chosen: frozenset[int]
    purchased: frozenset
    payment: int
    utility: int
    settlement: Mapping[str, int] = field(default_factory=dict, compare=False)


def resolve_cheapest_offers(offers: Iterable[Offer]) -> dict[TripleAtom, ResolvedOffer]:
    """Keep the cheapest offer for every distinct triple.

    Equal prices are broken toward the lexicographically smallest product id,
    so the result depends on the offers alone.
    """
    best: dict[TripleAtom, ResolvedOffer] = {}
    for offer in offers:
        cand = ResolvedOffer(offer.price, offer.product_id)
        cur = best.get(offer.triple)
        if cur is None or cand < cur:
            best[offer.triple] = cand
    return best


def collect_offers(triples_by_graph: Mapping[str, Iterable[TripleAtom]],
                   products: Iterable[DataProduct]) -> list[Offer]:
    offers = []
    for product in products:
        for gid in sorted(product.graph_ids):
            for triple in triples_by_graph.get(gid, ()):
                offers.append(Offer(triple, product.product_id, product.price_per_triple))
    return offers


def anonymize(answer: Sequence[SolutionMapping],
              resolved: Mapping[TripleAtom, ResolvedOffer],
              seed: int = 0,
              products: Iterable[DataProduct] = ()) -> tuple[Summary, dict[str, TripleAtom]]:
    """Build the summary plus the private key from anonymous id to triple.

    Ids are ``t1 .. tn`` assigned in a seeded shuffle of the sorted distinct
    triples. They never contain ':' or '"', so they cannot embed any resource
    identifier or literal of the underlying data.
    """
    by_id = {p.product_id: p for p in products}
    distinct = sorted({t for m in answer for t in m.required_triples})
    for t in distinct:
        if t not in resolved:
            raise MissingOffer(f"no offer resolves triple {t}")
    order = list(distinct)
    random.Random(seed).shuffle(order)
    anon_of = {t: f"t{i + 1}" for i, t in enumerate(order)}

    rows = tuple(
        (j, tuple(sorted((anon_of[t] for t in m.required_triples), key=_anon_sort_key)))
        for j, m in enumerate(answer)
    )
    info = {}
    for t in order:
        offer = resolved[t]
        product = by_id.get(offer.product_id)
        meta = product.public_metadata if product is not None else {}
        info[anon_of[t]] = TripleInfo(offer.price, meta)
    key = {a: t for t, a in anon_of.items()}
    return Summary(rows, info), key


def summarize(answer: Sequence[SolutionMapping],
              resolved: Mapping[TripleAtom, ResolvedOffer],
              seed: int = 0,
              products: Iterable[DataProduct] = ()) -> Summary:
    return anonymize(answer, resolved, seed, products)[0]


def _anon_sort_key(anon: str) -> int:
    return int(anon[1:])


def settle(result: AllocationResult,
           resolved: Mapping[TripleAtom, ResolvedOffer],
           products: Iterable[DataProduct]) -> dict[str, int]:
    """Split the customer's payment among the providers of purchased triples."""
    by_id = {p.product_id: p for p in products}
    totals: dict[str, int] = defaultdict(int)
    for triple in result.purchased:
        try:
            offer = resolved[triple]
        except KeyError:
            raise MissingOffer(f"purchased triple {triple} has no resolved offer") from None
        product = by_id.get(offer.product_id)
        if product is None:
            raise UnknownProduct(f"purchased triple {triple} references unknown product {offer.product_id}")
        totals[product.provider_id] += offer.price
    settlement = dict(sorted(totals.items()))
    if sum(settlement.values()) != result.payment:
        raise SettlementMismatch(
            f"provider payouts sum to {sum(settlement.values())}, payment is {result.payment}")
    return settlement


def lift_result(result: AllocationResult, triple_ids: Sequence[str],
                key: Mapping[str, TripleAtom]) -> AllocationResult:
    """Translate purchased triple indices back to canonical triples."""
    purchased = frozenset(key[triple_ids[i]] for i in result.purchased)
    return replace(result, purchased=purchased)


def _check_header(data: dict, fmt: str, version: int) -> None:
    if data.get("format") != fmt:
        raise ParseError(f"expected format {fmt!r}, got {data.get('format')!r}")
    if data.get("version") != version:
        raise ParseError(f"unsupported {fmt} version {data.get('version')!r}")


def load_products(path: str | Path) -> list[DataProduct]:
    """Read a products file.

    Layout::

        {"format": "datamarket.products", "version": 1,
         "products": [{"id": "P_A", "provider": "A", "price": "0.10",
                       "graphs": ["ex:ratings"], "metadata": {"rating": 9},
                       "expose": ["rating"]}]}

    ``expose`` is optional; without it every metadata key is public.
    """
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno, path=str(path)) from None
    _check_header(data, PRODUCTS_FORMAT, PRODUCTS_VERSION)
    products = []
    seen = set()
    for n, rec in enumerate(data.get("products", [])):
        try:
            product = DataProduct(
                product_id=str(rec["id"]),
                provider_id=str(rec["provider"]),
                price_per_triple=parse_money(rec["price"]),
                graph_ids=frozenset(rec["graphs"]),
                metadata=dict(rec.get("metadata", {})),
                exposed=frozenset(rec["expose"]) if "expose" in rec else None,
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise ParseError(f"product record {n}: {exc}", path=str(path)) from None
        if product.product_id in seen:
            raise ParseError(f"duplicate product id {product.product_id!r}", path=str(path))
        seen.add(product.product_id)
        products.append(product)
    return products


def dump_products(products: Iterable[DataProduct]) -> str:
    recs = []
    for p in products:
        rec = {
            "id": p.product_id,
            "provider": p.provider_id,
            "price": format_money(p.price_per_triple),
            "graphs": sorted(p.graph_ids),
            "metadata": dict(p.metadata),
        }
        if p.exposed is not None:
            rec["expose"] = sorted(p.exposed)
        recs.append(rec)
    return json.dumps({"format": PRODUCTS_FORMAT, "version": PRODUCTS_VERSION,
                       "products": recs}, indent=2) + "\n"


KEY_FORMAT = "datamarket.key"
VALUATION_FORMAT = "datamarket.valuation"


def _read_json(path: Path) -> dict:
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno, path=str(path)) from None


def dump_key(key: Mapping[str, TripleAtom], resolved: Mapping[TripleAtom, ResolvedOffer]) -> str:
    """Serialize the private anonymization key with the resolved offers it needs
    for settlement. Never hand this file to the allocation rule."""
    triples = {}
    for anon in sorted(key, key=_anon_sort_key):
        t = key[anon]
        offer = resolved[t]
        triples[anon] = {"triple": list(t), "product": offer.product_id, "price_minor": offer.price}
    return json.dumps({"format": KEY_FORMAT, "version": 1, "triples": triples}, indent=2) + "\n"


def load_key(path: str | Path) -> tuple[dict[str, TripleAtom], dict[TripleAtom, ResolvedOffer]]:
    path = Path(path)
    data = _read_json(path)
    try:
        _check_header(data, KEY_FORMAT, 1)
        key, resolved = {}, {}
        for anon, rec in data["triples"].items():
            t = TripleAtom(*rec["triple"])
            key[anon] = t
            resolved[t] = ResolvedOffer(int(rec["price_minor"]), str(rec["product"]))
    except ParseError as exc:
        raise ParseError(str(exc), path=str(path)) from None
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad key file: {exc}", path=str(path)) from None
    return key, resolved


def load_valuation(path: str | Path) -> Valuation:
    """Read a valuation file.

    Layout (money as decimal strings in major units)::

        {"format": "datamarket.valuation", "version": 1,
         "values": {"0": "0.25", "1": "0.35"}}

    or ``"schedule": ["0.50", "0.30", ...]`` for a diminishing valuation.
    """
    path = Path(path)
    data = _read_json(path)
    try:
        _check_header(data, VALUATION_FORMAT, 1)
        if "schedule" in data:
            return Valuation.diminishing_schedule(parse_money(v) for v in data["schedule"])
        return Valuation("linear", linear={int(k): parse_money(v) for k, v in data["values"].items()})
    except ParseError as exc:
        raise ParseError(str(exc), path=str(path)) from None
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad valuation file: {exc}", path=str(path)) from None


def dump_valuation(valuation: Valuation) -> str:
    data: dict = {"format": VALUATION_FORMAT, "version": 1}
    if valuation.kind == "linear":
        data["values"] = {str(k): format_money(v) for k, v in sorted(valuation.linear.items())}
    else:
        data["schedule"] = [format_money(v) for v in valuation.schedule]
    return json.dumps(data, indent=2) + "\n"
