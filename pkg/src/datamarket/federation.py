"""In-memory federated BGP evaluation with per-triple product provenance.

Triples only take part in evaluation if some data product that passes the
query's metadata filters contains a graph holding them. This is the effect of
wrapping every triple pattern as::

    GRAPH ?graph_i { <pattern> } ?product_i market:contains ?graph_i .

which :func:`rewrite_pattern` emits for audit purposes.
"""

from __future__ import annotations

import json
import operator
import re
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import MissingOffer, ParseError, UnknownGraph
from .market import (
    DataProduct,
    Offer,
    ResolvedOffer,
    SolutionMapping,
    TripleAtom,
    is_literal,
    is_resource,
)

_TERM_RE = re.compile(r'"(?:[^"\\]|\\.)*"(?:@[A-Za-z0-9-]+|\^\^\S+)?|\S+')


def is_variable(term: str) -> bool:
    return term.startswith("?") and len(term) > 1


def tokenize(line: str) -> list[str]:
    return _TERM_RE.findall(line)


@dataclass(frozen=True)
class NamedGraph:
    graph_id: str
    triples: frozenset[TripleAtom]


@dataclass(frozen=True)
class Endpoint:
    endpoint_id: str
    graphs: tuple[NamedGraph, ...]

    def __post_init__(self):
        if not self.graphs:
            raise ValueError(f"endpoint {self.endpoint_id} serves no graphs")
        ids = [g.graph_id for g in self.graphs]
        if len(set(ids)) != len(ids):
            raise ValueError(f"endpoint {self.endpoint_id} has duplicate graph ids")


@dataclass(frozen=True)
class TriplePattern:
    subject: str
    predicate: str
    object: str

    def __post_init__(self):
        for term in self:
            if not (is_variable(term) or is_resource(term) or is_literal(term)):
                raise ValueError(f"bad term in triple pattern: {term!r}")

    def __iter__(self) -> Iterator[str]:
        return iter((self.subject, self.predicate, self.object))

    def __str__(self):
        return f"{self.subject} {self.predicate} {self.object} ."

    @property
    def variables(self) -> list[str]:
        seen = []
        for t in self:
            if is_variable(t) and t not in seen:
                seen.append(t)
        return seen

    def match(self, triple: TripleAtom, bindings: Mapping[str, str] | None = None) -> dict[str, str] | None:
        out = dict(bindings or {})
        for term, value in zip(self, triple):
            if is_variable(term):
                bound = out.get(term)
                if bound is None:
                    out[term] = value
                elif bound != value:
                    return None
            elif term != value:
                return None
        return out


_OPS = {
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
    "=": operator.eq,
    "!=": operator.ne,
}


def _as_number(value):
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return value
    try:
        return float(str(value).strip('"'))
    except ValueError:
        return None


@dataclass(frozen=True)
class MetadataFilter:
    """Comparison over a product metadata key, e.g. ``?rating >= 8``."""

    variable: str
    op: str
    value: str | int | float

    def __post_init__(self):
        if self.op not in _OPS:
            raise ValueError(f"unsupported filter operator {self.op!r}")
        if not is_variable(self.variable):
            raise ValueError(f"filter must compare a variable, got {self.variable!r}")

    @property
    def key(self) -> str:
        return self.variable[1:]

    def accepts(self, metadata: Mapping[str, object]) -> bool:
        if self.key not in metadata:
            return False
        have = metadata[self.key]
        a, b = _as_number(have), _as_number(self.value)
        if a is not None and b is not None:
            return _OPS[self.op](a, b)
        return _OPS[self.op](str(have).strip('"'), str(self.value).strip('"'))

    def __str__(self):
        return f"FILTER ({self.variable} {self.op} {self.value})"


@dataclass(frozen=True)
class BGPQuery:
    projected_vars: tuple[str, ...]
    patterns: tuple[TriplePattern, ...]
    filters: tuple[MetadataFilter, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "projected_vars", tuple(self.projected_vars))
        object.__setattr__(self, "patterns", tuple(self.patterns))
        object.__setattr__(self, "filters", tuple(self.filters))
        if not self.patterns:
            raise ValueError("query has no triple patterns")
        known = {v for p in self.patterns for v in p.variables}
        for v in self.projected_vars:
            if v not in known:
                raise ValueError(f"projected variable {v} does not occur in any pattern")


def rewrite_pattern(tp: TriplePattern, fresh_index: int) -> str:
    g, p = f"?graph_{fresh_index}", f"?product_{fresh_index}"
    return f"GRAPH {g} {{ {tp} }} {p} market:contains {g} ."


def rewrite_query(query: BGPQuery, start: int = 1) -> str:
    """Render the whole query with every pattern wrapped in its product graph pattern."""
    lines = ["SELECT " + " ".join(query.projected_vars) + " WHERE {"]
    for n, tp in enumerate(query.patterns, start):
        lines.append("  " + rewrite_pattern(tp, n))
        for f in query.filters:
            lines.append(f"  ?product_{n} market:{f.key} {f.variable}_{n} . "
                         f"FILTER ({f.variable}_{n} {f.op} {f.value})")
    lines.append("}")
    return "\n".join(lines)


_REWRITTEN_RE = re.compile(r"GRAPH \?graph_(\d+) \{ (.*?) \} \?product_\1 market:contains \?graph_\1 \.")


def strip_rewrite(text: str) -> list[TriplePattern]:
    """Recover the original triple patterns from rewritten query text."""
    out = []
    for m in _REWRITTEN_RE.finditer(text):
        out.append(parse_pattern(m.group(2)))
    return out


def parse_pattern(text: str) -> TriplePattern:
    toks = tokenize(text)
    if toks and toks[-1] == ".":
        toks = toks[:-1]
    if len(toks) != 3:
        raise ValueError(f"triple pattern needs 3 terms, got {len(toks)}: {text!r}")
    return TriplePattern(*toks)


_FILTER_RE = re.compile(r"^FILTER\s*\(?\s*(\?\w+)\s*(<=|>=|!=|<|>|=)\s*(.+?)\s*\)?\s*$")


def parse_query(text: str, path: str | None = None) -> BGPQuery:
    """Parse the line-oriented query format.

    Line 1 (after comments) lists the projected variables, optionally after
    ``SELECT``. Each following line is one triple pattern ending in ``.``;
    trailing ``FILTER ?key op value`` lines compare product metadata.
    """
    projected: list[str] | None = None
    patterns: list[TriplePattern] = []
    filters: list[MetadataFilter] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            if projected is None:
                toks = line.split()
                if toks[0].upper() == "SELECT":
                    toks = toks[1:]
                if not toks or not all(is_variable(t) for t in toks):
                    raise ValueError("first line must list projected variables")
                projected = toks
            elif line.upper().startswith("FILTER"):
                m = _FILTER_RE.match(line)
                if not m:
                    raise ValueError(f"malformed filter: {line!r}")
                value = m.group(3)
                num = _as_number(value) if not value.startswith('"') else None
                filters.append(MetadataFilter(m.group(1), m.group(2), num if num is not None else value))
            else:
                if filters:
                    raise ValueError("triple patterns must precede filters")
                patterns.append(parse_pattern(line))
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno, path=path) from None
    if projected is None:
        raise ParseError("empty query", path=path)
    try:
        return BGPQuery(tuple(projected), tuple(patterns), tuple(filters))
    except ValueError as exc:
        raise ParseError(str(exc), path=path) from None


def load_query(path: str | Path) -> BGPQuery:
    path = Path(path)
    return parse_query(path.read_text(), path=str(path))


def parse_quads(text: str, default_endpoint: str = "default", path: str | None = None) -> list[Endpoint]:
    """Parse quad lines ``subject predicate object graph_id [.]``.

    A line ``@endpoint <id>`` assigns the following quads to that endpoint.
    Blank lines and lines starting with ``#`` are ignored.
    """
    graphs: dict[str, dict[str, set[TripleAtom]]] = {}
    current = default_endpoint
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("@endpoint"):
            parts = line.split()
            if len(parts) != 2:
                raise ParseError("expected '@endpoint <id>'", line=lineno, path=path)
            current = parts[1]
            continue
        toks = tokenize(line)
        if toks and toks[-1] == ".":
            toks = toks[:-1]
        if len(toks) != 4:
            raise ParseError(f"expected 4 terms (s p o graph), got {len(toks)}", line=lineno, path=path)
        try:
            triple = TripleAtom(*toks[:3])
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno, path=path) from None
        if is_literal(toks[3]):
            raise ParseError("graph id must not be a literal", line=lineno, path=path)
        graphs.setdefault(current, {}).setdefault(toks[3], set()).add(triple)
    return [
        Endpoint(eid, tuple(NamedGraph(gid, frozenset(ts)) for gid, ts in sorted(gs.items())))
        for eid, gs in sorted(graphs.items())
    ]


def load_graphs(path: str | Path) -> list[Endpoint]:
    path = Path(path)
    return parse_quads(path.read_text(), default_endpoint=path.stem, path=str(path))


@dataclass(frozen=True)
class PatternMatch:
    """One matched triple and every product able to supply it."""

    triple: TripleAtom
    products: tuple[str, ...]


Realization = tuple[PatternMatch, ...]


@dataclass(frozen=True)
class AnswerRow:
    bindings: tuple[tuple[str, str], ...]
    # one entry per distinct way of realizing the projected bindings,
    # each listing the matched triple of every pattern in query order
    realizations: tuple[Realization, ...]


@dataclass(frozen=True)
class FederatedAnswer:
    projected: tuple[str, ...]
    rows: tuple[AnswerRow, ...]
    prices: Mapping[str, int] = field(default_factory=dict)

    def __len__(self):
        return len(self.rows)

    def offers(self) -> list[Offer]:
        seen = set()
        out = []
        for row in self.rows:
            for real in row.realizations:
                for pm in real:
                    for pid in pm.products:
                        if (pm.triple, pid) not in seen:
                            seen.add((pm.triple, pid))
                            out.append(Offer(pm.triple, pid, self.prices[pid]))
        return out

    def to_mappings(self, resolved: Mapping[TripleAtom, ResolvedOffer]) -> list[SolutionMapping]:
        """Collapse each row to one solution mapping.

        When projection merged several realizations, the one with the lowest
        resolved price wins; ties go to the lexicographically smallest triple set.
        """
        out = []
        for row in self.rows:
            best = None
            for real in row.realizations:
                triples = frozenset(pm.triple for pm in real)
                try:
                    cost = sum(resolved[t].price for t in triples)
                except KeyError as exc:
                    raise MissingOffer(f"no resolved offer for {exc.args[0]}") from None
                cand = (cost, sorted(triples))
                if best is None or cand < best:
                    best = cand
            out.append(SolutionMapping(row.bindings, frozenset(best[1])))
        return out

    def to_json(self) -> dict:
        return {
            "format": "datamarket.answer",
            "version": 1,
            "projected": list(self.projected),
            "prices_minor": dict(sorted(self.prices.items())),
            "rows": [
                {
                    "bindings": dict(row.bindings),
                    "realizations": [
                        [{"triple": list(pm.triple), "products": list(pm.products)} for pm in real]
                        for real in row.realizations
                    ],
                }
                for row in self.rows
            ],
        }

    @classmethod
    def from_json(cls, data: dict) -> "FederatedAnswer":
        if data.get("format") != "datamarket.answer" or data.get("version") != 1:
            raise ParseError("not a datamarket.answer v1 document")
        rows = []
        for r in data["rows"]:
            reals = tuple(
                tuple(PatternMatch(TripleAtom(*m["triple"]), tuple(m["products"])) for m in real)
                for real in r["realizations"]
            )
            rows.append(AnswerRow(tuple(sorted(r["bindings"].items())), reals))
        return cls(tuple(data["projected"]), tuple(rows), dict(data.get("prices_minor", {})))


def _graph_index(federation: Iterable[Endpoint]) -> dict[str, set[TripleAtom]]:
    index: dict[str, set[TripleAtom]] = defaultdict(set)
    for ep in federation:
        for g in ep.graphs:
            index[g.graph_id] |= g.triples
    return index


def evaluate(query: BGPQuery, federation: Iterable[Endpoint], catalog: Iterable[DataProduct]) -> FederatedAnswer:
    """Evaluate a BGP over the union of all product-covered graphs."""
    graphs = _graph_index(federation)
    catalog = list(catalog)
    for product in catalog:
        missing = product.graph_ids - graphs.keys()
        if missing:
            raise UnknownGraph(f"product {product.product_id} references missing graph(s) {sorted(missing)}")

    eligible = [p for p in catalog if all(f.accepts(p.metadata) for f in query.filters)]
    suppliers: dict[TripleAtom, set[str]] = defaultdict(set)
    for product in eligible:
        for gid in product.graph_ids:
            for t in graphs[gid]:
                suppliers[t].add(product.product_id)
    prices = {p.product_id: p.price_per_triple for p in catalog}

    candidates = [[t for t in suppliers if tp.match(t) is not None] for tp in query.patterns]
    order = sorted(range(len(query.patterns)), key=lambda i: (len(candidates[i]), i))

    # partial solutions: (bindings, {pattern index: triple})
    partial: list[tuple[dict[str, str], dict[int, TripleAtom]]] = [({}, {})]
    bound: set[str] = set()
    for i in order:
        tp = query.patterns[i]
        join_vars = [v for v in tp.variables if v in bound]
        index: dict[tuple[str, ...], list[tuple[TripleAtom, dict[str, str]]]] = defaultdict(list)
        for t in candidates[i]:
            b = tp.match(t)
            index[tuple(b[v] for v in join_vars)].append((t, b))
        nxt = []
        for bindings, used in partial:
            for t, b in index.get(tuple(bindings[v] for v in join_vars), ()):
                merged = dict(bindings)
                merged.update(b)
                nxt.append((merged, {**used, i: t}))
        partial = nxt
        bound.update(tp.variables)
        if not partial:
            break

    grouped: dict[tuple[tuple[str, str], ...], set[tuple[TripleAtom, ...]]] = defaultdict(set)
    for bindings, used in partial:
        key = tuple(sorted((v, bindings[v]) for v in query.projected_vars))
        grouped[key].add(tuple(used[i] for i in range(len(query.patterns))))

    rows = []
    for key in sorted(grouped):
        reals = tuple(
            tuple(PatternMatch(t, tuple(sorted(suppliers[t]))) for t in triples)
            for triples in sorted(grouped[key])
        )
        rows.append(AnswerRow(key, reals))
    return FederatedAnswer(query.projected_vars, tuple(rows), prices)


def dump_answer(answer: FederatedAnswer) -> str:
    return json.dumps(answer.to_json(), indent=2, sort_keys=False) + "\n"


def project_rows(answer: FederatedAnswer) -> list[dict[str, str]]:
    return [dict(row.bindings) for row in answer.rows]


def iter_triples(federation: Sequence[Endpoint]) -> Iterator[TripleAtom]:
    for triples in _graph_index(federation).values():
        yield from triples
