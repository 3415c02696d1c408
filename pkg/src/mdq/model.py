"""Extended Hurtado-Mendelzon model: dimensions, categorical relations, instances."""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Iterator

from .terms import Null, is_const


class UnknownMember(KeyError):
    pass


class UnknownCategory(KeyError):
    pass


class ArityMismatch(ValueError):
    pass


class UnknownPredicate(KeyError):
    pass


@dataclass(frozen=True)
class Violation:
    kind: str
    element: tuple
    message: str

    def __str__(self) -> str:
        return f"{self.kind}: {self.message}"


@dataclass(frozen=True)
class DimensionSchema:
    name: str
    categories: tuple[str, ...]
    child_parent: tuple[tuple[str, str], ...] = ()

    def parents(self, category: str) -> list[str]:
        return [p for c, p in self.child_parent if c == category]

    def ancestors(self, category: str) -> set[str]:
        """Categories reachable upward from ``category`` (excluding itself)."""
        seen: set[str] = set()
        todo = self.parents(category)
        while todo:
            c = todo.pop()
            if c not in seen:
                seen.add(c)
                todo.extend(self.parents(c))
        return seen


@dataclass(frozen=True)
class Attribute:
    name: str
    category: str | None = None
    domain: str | None = None

    @property
    def categorical(self) -> bool:
        return self.category is not None


@dataclass(frozen=True)
class CategoricalRelationSchema:
    name: str
    attributes: tuple[Attribute, ...]

    @property
    def arity(self) -> int:
        return len(self.attributes)

    def categorical_positions(self) -> dict[int, str]:
        return {i: a.category for i, a in enumerate(self.attributes) if a.categorical}


@dataclass(frozen=True)
class EdgePredicate:
    """Parent-child predicate ``name(parent, child)`` for one schema edge."""

    name: str
    dimension: str
    child: str
    parent: str


@dataclass
class MDSchema:
    dimensions: dict[str, DimensionSchema] = field(default_factory=dict)
    edges: dict[str, EdgePredicate] = field(default_factory=dict)
    relations: dict[str, CategoricalRelationSchema] = field(default_factory=dict)
    # contextual / plain predicates: name -> attribute names
    predicates: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def categories(self) -> dict[str, str]:
        """category -> dimension"""
        return {c: d.name for d in self.dimensions.values() for c in d.categories}

    def category_dimension(self, category: str) -> str | None:
        return self.categories().get(category)

    def edge_predicate(self, child: str, parent: str) -> EdgePredicate | None:
        for e in self.edges.values():
            if e.child == child and e.parent == parent:
                return e
        return None

    def kind(self, pred: str) -> str | None:
        if pred in self.relations:
            return "categorical"
        if pred in self.edges:
            return "parent_child"
        if pred in self.categories():
            return "category"
        if pred in self.predicates:
            return "plain"
        return None

    def arity(self, pred: str) -> int | None:
        kind = self.kind(pred)
        if kind == "categorical":
            return self.relations[pred].arity
        if kind == "parent_child":
            return 2
        if kind == "category":
            return 1
        if kind == "plain":
            return len(self.predicates[pred])
        return None

    def arities(self) -> dict[str, int]:
        out = {}
        for p in [*self.relations, *self.edges, *self.categories(), *self.predicates]:
            out[p] = self.arity(p)
        return out

    def position_category(self, pred: str, index: int) -> str | None:
        """Category whose members populate ``pred[index]``, None if non-categorical."""
        kind = self.kind(pred)
        if kind == "categorical":
            return self.relations[pred].attributes[index].category
        if kind == "parent_child":
            e = self.edges[pred]
            return e.parent if index == 0 else e.child
        if kind == "category":
            return pred
        return None

    def is_dimensional(self, pred: str) -> bool:
        return self.kind(pred) in ("parent_child", "category")


@dataclass(frozen=True)
class RollupPair:
    child: str
    parent: str
    child_category: str
    parent_category: str


@dataclass
class DimensionInstance:
    schema: DimensionSchema
    membership: dict[str, tuple[str, ...]] = field(default_factory=dict)
    rollup_pairs: list[RollupPair] = field(default_factory=list)

    def category_of(self, member: str) -> str:
        for cat, members in self.membership.items():
            if member in members:
                return cat
        raise UnknownMember(member)

    def members(self) -> set[str]:
        return {m for ms in self.membership.values() for m in ms}


# -- database ------------------------------------------------------------------


class Database:
    """Set-semantics fact store, insertion ordered, with per-position indexes."""

    def __init__(self, arities: dict[str, int] | None = None):
        self.arities = dict(arities or {})
        self._facts: dict[str, dict[tuple, None]] = {}
        self._index: dict[str, dict[tuple[int, object], dict[tuple, None]]] = {}

    def declare(self, pred: str, arity: int | None = None) -> None:
        self._facts.setdefault(pred, {})
        if arity is not None:
            self.arities.setdefault(pred, arity)

    def add(self, pred: str, tup: Iterable) -> bool:
        tup = tuple(tup)
        arity = self.arities.get(pred)
        if arity is not None and arity != len(tup):
            raise ArityMismatch(f"{pred}: expected {arity} values, got {len(tup)}")
        rows = self._facts.setdefault(pred, {})
        if tup in rows:
            return False
        rows[tup] = None
        idx = self._index.get(pred)
        if idx is not None:
            for i, v in enumerate(tup):
                idx.setdefault((i, v), {})[tup] = None
        return True

    def discard(self, pred: str, tup: tuple) -> None:
        rows = self._facts.get(pred)
        if rows is not None and tup in rows:
            del rows[tup]
            self._index.pop(pred, None)

    def __contains__(self, item: tuple[str, tuple]) -> bool:
        pred, tup = item
        return tup in self._facts.get(pred, ())

    def tuples(self, pred: str) -> list[tuple]:
        return list(self._facts.get(pred, ()))

    def lookup(self, pred: str, bound: dict[int, object]) -> Iterable[tuple]:
        """Tuples of ``pred`` agreeing with ``bound`` (position -> value)."""
        rows = self._facts.get(pred)
        if not rows:
            return ()
        if not bound:
            return list(rows)
        idx = self._index.get(pred)
        if idx is None:
            idx = defaultdict(dict)
            for tup in rows:
                for i, v in enumerate(tup):
                    idx[(i, v)][tup] = None
            idx = self._index[pred] = dict(idx)
        best = None
        for i, v in bound.items():
            cand = idx.get((i, v))
            if cand is None:
                return ()
            if best is None or len(cand) < len(best):
                best = cand
        return [t for t in best if all(t[i] == v for i, v in bound.items())]

    def predicates(self) -> list[str]:
        return list(self._facts)

    def facts(self) -> Iterator[tuple[str, tuple]]:
        for pred, rows in self._facts.items():
            for tup in rows:
                yield pred, tup

    def __len__(self) -> int:
        return sum(len(r) for r in self._facts.values())

    def __eq__(self, other) -> bool:
        if not isinstance(other, Database):
            return NotImplemented
        mine = {p: set(r) for p, r in self._facts.items() if r}
        theirs = {p: set(r) for p, r in other._facts.items() if r}
        return mine == theirs

    def copy(self) -> "Database":
        db = Database(self.arities)
        for pred, rows in self._facts.items():
            db._facts[pred] = dict(rows)
        return db

    def update(self, other: "Database") -> None:
        for pred in other.predicates():
            self.declare(pred, other.arities.get(pred))
        for pred, tup in other.facts():
            self.add(pred, tup)

    def replace_term(self, old, new) -> int:
        """Substitute ``old`` by ``new`` everywhere; returns the number of rewritten tuples."""
        changed = 0
        for pred, rows in self._facts.items():
            hit = [t for t in rows if old in t]
            if not hit:
                continue
            changed += len(hit)
            new_rows = {}
            for t in rows:
                new_rows[tuple(new if v == old else v for v in t) if old in t else t] = None
            self._facts[pred] = new_rows
            self._index.pop(pred, None)
        return changed

    def has_nulls(self) -> bool:
        return any(isinstance(v, Null) for _, t in self.facts() for v in t)

    def __repr__(self) -> str:
        return f"Database({len(self)} facts over {len(self._facts)} predicates)"


def dimension_facts(schema: MDSchema, instances: dict[str, DimensionInstance]) -> Database:
    """Category and parent-child extensions induced by the dimension instances."""
    db = Database(schema.arities())
    for dim in schema.dimensions.values():
        for cat in dim.categories:
            db.declare(cat, 1)
    for e in schema.edges.values():
        db.declare(e.name, 2)
    for inst in instances.values():
        for cat, members in inst.membership.items():
            for m in members:
                db.add(cat, (m,))
        for pair in inst.rollup_pairs:
            e = schema.edge_predicate(pair.child_category, pair.parent_category)
            if e is not None:
                db.add(e.name, (pair.parent, pair.child))
    return db


# -- validation ----------------------------------------------------------------


def _find_cycle(nodes: Iterable[str], edges: Iterable[tuple[str, str]]) -> list[str] | None:
    succ = defaultdict(list)
    for a, b in edges:
        succ[a].append(b)
    color: dict[str, int] = {}
    for root in nodes:
        if color.get(root):
            continue
        path = [root]
        stack = [iter(succ[root])]
        color[root] = 1
        while stack:
            nxt = next(stack[-1], None)
            if nxt is None:
                color[path.pop()] = 2
                stack.pop()
            elif color.get(nxt) == 1:
                return path[path.index(nxt):]
            elif not color.get(nxt):
                color[nxt] = 1
                path.append(nxt)
                stack.append(iter(succ[nxt]))
    return None


def validate_schema(schema: MDSchema) -> list[Violation]:
    out: list[Violation] = []
    for dim in schema.dimensions.values():
        declared = set(dim.categories)
        for child, parent in dim.child_parent:
            for c in (child, parent):
                if c not in declared:
                    out.append(Violation("undeclared-category", (dim.name, c),
                                         f"dimension {dim.name}: edge mentions undeclared category {c}"))
        # DFS over the subgraph repeatedly to report every distinct cycle
        edges = set(dim.child_parent)
        while True:
            cyc = _find_cycle(sorted({c for e in edges for c in e}), sorted(edges))
            if cyc is None:
                break
            out.append(Violation("cycle", (dim.name, tuple(sorted(cyc))),
                                 f"dimension {dim.name}: categories {{{', '.join(sorted(cyc))}}} form a cycle"))
            # break the cycle to look for others
            edges.discard((cyc[-1], cyc[0]) if len(cyc) > 1 else (cyc[0], cyc[0]))
    cats = schema.categories()
    for rel in schema.relations.values():
        seen: set[str] = set()
        for a in rel.attributes:
            if a.name in seen:
                out.append(Violation("duplicate-attribute", (rel.name, a.name),
                                     f"relation {rel.name}: attribute {a.name} declared twice"))
            seen.add(a.name)
            if a.categorical and a.category not in cats:
                out.append(Violation("undeclared-category", (rel.name, a.category),
                                     f"relation {rel.name}: attribute {a.name} references unknown category {a.category}"))
    return out


def validate_instance(instance: DimensionInstance, strict: bool = True) -> list[Violation]:
    out: list[Violation] = []
    schema = instance.schema
    name = schema.name
    owner: dict[str, list[str]] = defaultdict(list)
    for cat, members in instance.membership.items():
        if cat not in schema.categories:
            out.append(Violation("undeclared-category", (name, cat),
                                 f"dimension {name}: members given for unknown category {cat}"))
        for m in members:
            owner[m].append(cat)
    for m, cats in owner.items():
        if len(cats) > 1:
            out.append(Violation("multi-category", (name, m),
                                 f"member {m} belongs to categories {', '.join(sorted(cats))}"))
    edges = set(schema.child_parent)
    per_edge: dict[tuple[str, str, str], set[str]] = defaultdict(set)
    for p in instance.rollup_pairs:
        if (p.child_category, p.parent_category) not in edges:
            out.append(Violation("dangling-edge", (name, p.child, p.parent),
                                 f"roll-up {p.child}->{p.parent} has no schema edge "
                                 f"{p.child_category}->{p.parent_category}"))
        if p.child_category not in owner.get(p.child, ()) or p.parent_category not in owner.get(p.parent, ()):
            out.append(Violation("dangling-member", (name, p.child, p.parent),
                                 f"roll-up {p.child}->{p.parent} uses members outside "
                                 f"{p.child_category}/{p.parent_category}"))
        per_edge[(p.child, p.child_category, p.parent_category)].add(p.parent)
    if strict:
        for (child, cc, pc), parents in sorted(per_edge.items()):
            if len(parents) > 1:
                out.append(Violation("non-functional", (name, child, cc, pc),
                                     f"member {child} rolls up to {', '.join(sorted(parents))} on edge {cc}->{pc}"))
    cyc = _find_cycle(sorted(owner), sorted({(p.child, p.parent) for p in instance.rollup_pairs}))
    if cyc is not None:
        out.append(Violation("cycle", (name, tuple(sorted(cyc))),
                             f"roll-up relation is cyclic over {{{', '.join(sorted(cyc))}}}"))
    return out


def rollup(instance: DimensionInstance, member: str, target: str) -> set[str]:
    """Members of ``target`` reachable from ``member`` in the reflexive-transitive roll-up."""
    if target not in instance.schema.categories:
        raise UnknownCategory(target)
    source = instance.category_of(member)
    if source == target:
        return {member}
    up = defaultdict(set)
    for p in instance.rollup_pairs:
        up[p.child].add(p.parent)
    seen = {member}
    todo = [member]
    while todo:
        m = todo.pop()
        for parent in up[m]:
            if parent not in seen:
                seen.add(parent)
                todo.append(parent)
    wanted = set(instance.membership.get(target, ()))
    return {m for m in seen if m in wanted}


def check_referential(db: Database, schema: MDSchema) -> list[Violation]:
    """Categorical values that are not members of their category (nulls are exempt)."""
    out = []
    for rel in schema.relations.values():
        for tup in db.tuples(rel.name):
            for i, attr in enumerate(rel.attributes):
                if not attr.categorical:
                    continue
                value = tup[i]
                if not is_const(value):
                    continue
                if (attr.category, (value,)) not in db:
                    out.append(Violation(
                        "referential", (rel.name, tup, attr.name),
                        f"{rel.name}{tup}: {value!s} is not a member of {attr.category} "
                        f"(bot <- {rel.name}(...), not {attr.category}({attr.name}))"))
    return out
