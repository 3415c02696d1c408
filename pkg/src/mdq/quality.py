"""The ontology as a context for assessing data quality.

A relation S under assessment is copied into the context as S^c, quality
predicates are defined by ordinary rules, and the quality version S^q is
computed by query answering over the cleaned context.  Queries over S are
answered in quality form by renaming S to S^q.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .answering import answer_cq
from .chase import ChaseConfig, NCViolation, chase
from .model import Database, MDSchema, UnknownPredicate
from .rules import ConjunctiveQuery, ContextPair, Ontology, Rule
from .terms import Atom, Var


class MissingQualityDefinition(KeyError):
    def __init__(self, predicate: str):
        super().__init__(predicate)
        self.predicate = predicate

    def __str__(self) -> str:
        return f"no quality version defined for {self.predicate}"


@dataclass
class ContextMapping:
    pairs: list[ContextPair] = field(default_factory=list)

    @classmethod
    def from_ontology(cls, onto: Ontology) -> "ContextMapping":
        return cls(list(onto.mappings))


@dataclass
class QualityDefinition:
    predicate_rules: list[Rule] = field(default_factory=list)
    version_rules: list[Rule] = field(default_factory=list)
    versions: dict[str, str] = field(default_factory=dict)  # S -> S^q

    @classmethod
    def from_ontology(cls, onto: Ontology, base: Ontology | None = None) -> "QualityDefinition":
        """Rules of ``onto`` absent from ``base``, split by whether they define some S^q."""
        known = set(base.rules) if base is not None else set()
        targets = set(onto.quality.values())
        defs = cls(versions=dict(onto.quality))
        for r in onto.rules:
            if r in known:
                continue
            if any(h.pred in targets for h in r.head):
                defs.version_rules.append(r)
            else:
                defs.predicate_rules.append(r)
        return defs

    @property
    def rules(self) -> list[Rule]:
        return [*self.predicate_rules, *self.version_rules]


@dataclass(frozen=True)
class Discarded:
    predicate: str
    tuple: tuple
    reason: str


@dataclass
class RelationQuality:
    relation: str
    quality_relation: str
    base_count: int
    quality_count: int
    discarded: list[Discarded] = field(default_factory=list)

    @property
    def ratio(self) -> Fraction:
        if self.base_count == 0:
            return Fraction(1)
        return Fraction(self.quality_count, self.base_count)


@dataclass
class QualityReport:
    relations: list[RelationQuality] = field(default_factory=list)
    violations: list[Discarded] = field(default_factory=list)  # context facts removed by NCs

    def relation(self, name: str) -> RelationQuality:
        for r in self.relations:
            if r.relation == name:
                return r
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "relations": [
                {"relation": r.relation, "quality_relation": r.quality_relation,
                 "base_count": r.base_count, "quality_count": r.quality_count,
                 "ratio": str(r.ratio),
                 "discarded": [{"tuple": list(d.tuple), "reason": d.reason} for d in r.discarded]}
                for r in self.relations
            ],
            "discarded": [{"predicate": d.predicate, "tuple": list(d.tuple), "reason": d.reason}
                          for d in self.violations],
        }


def build_context(db: Database, mapping: ContextMapping, schema: MDSchema | None = None) -> Database:
    """``db`` plus the contextual copies; extra context attributes get fresh nulls."""
    from .terms import Null

    out = db.copy()
    next_null = 1
    for pair in mapping.pairs:
        if schema is not None:
            for p in (pair.base, pair.context):
                if schema.kind(p) is None:
                    raise UnknownPredicate(p)
        out.declare(pair.context, len(pair.correspondence))
        for tup in db.tuples(pair.base):
            row = []
            for k, idx in enumerate(pair.correspondence):
                if idx is None:
                    row.append(Null(next_null, "context", (pair.context, k)))
                    next_null += 1
                else:
                    row.append(tup[idx])
            out.add(pair.context, tuple(row))
    return out


def discard_violations(ctx: Database, onto: Ontology, config: ChaseConfig = ChaseConfig()
                       ) -> tuple[Database, list[Discarded], list[NCViolation]]:
    """Remove the extensional non-dimensional facts that take part in an NC violation."""
    result = chase(ctx, onto, config)
    clean = ctx.copy()
    removed: list[Discarded] = []
    for v in result.nc_violations:
        for pred, tup in v.facts:
            if onto.schema.is_dimensional(pred) or (pred, tup) not in ctx:
                continue
            d = Discarded(pred, tup, v.rule)
            if d not in removed:
                removed.append(d)
                clean.discard(pred, tup)
    return clean, removed, result.nc_violations


def _version_query(qpred: str, arity: int) -> ConjunctiveQuery:
    xs = tuple(Var(f"x{i}") for i in range(arity))
    return ConjunctiveQuery(qpred, xs, (Atom(qpred, xs),))


def compute_quality_version(ctx: Database, onto: Ontology, defs: QualityDefinition, relation: str,
                            *, depth_budget: int | None = None) -> set[tuple]:
    """Null-free extension of the quality version of ``relation`` over ``ctx``."""
    if relation not in defs.versions:
        raise MissingQualityDefinition(relation)
    qpred = defs.versions[relation]
    arity = onto.schema.arity(qpred)
    if arity is None:
        arity = next(len(h.args) for r in defs.version_rules for h in r.head if h.pred == qpred)
    return answer_cq(ctx, [*onto.rules, *defs.rules], _version_query(qpred, arity), depth_budget=depth_budget)


def rewrite_query(q: ConjunctiveQuery, defs: QualityDefinition, schema: MDSchema | None = None) -> ConjunctiveQuery:
    """Replace each base relation of ``q`` by its quality version.

    With a schema, dimensional predicates and quality/contextual predicates are
    left alone and any other predicate without a quality version is an error.
    Without one, only predicates having a version are renamed.
    """
    quality_side = set(defs.versions.values())
    body = []
    for a in q.body:
        if a.pred in defs.versions:
            body.append(Atom(defs.versions[a.pred], a.args, a.negated))
            continue
        if schema is not None and not (schema.is_dimensional(a.pred) or a.pred in quality_side
                                       or a.pred in _defined(defs)):
            raise MissingQualityDefinition(a.pred)
        body.append(a)
    return ConjunctiveQuery(q.name + "^q" if q.body != tuple(body) else q.name, q.answer, tuple(body),
                            q.comparisons)


def _defined(defs: QualityDefinition) -> set[str]:
    return {h.pred for r in defs.rules for h in r.head}


def quality_assess(db: Database, onto: Ontology, mapping: ContextMapping, defs: QualityDefinition,
                   q: ConjunctiveQuery | None = None, *, config: ChaseConfig = ChaseConfig(),
                   depth_budget: int | None = None):
    """Full assessment: context, NC discard, quality versions, quality answers and report.

    Returns ``(answers, report, versions)`` where ``answers`` is None when no
    query was given and ``versions`` maps each assessed relation to S^q.
    """
    ctx = build_context(db, mapping, onto.schema)
    clean, removed, _ = discard_violations(ctx, onto, config)
    report = QualityReport(violations=removed)
    versions: dict[str, set[tuple]] = {}
    qdb = clean.copy()
    for relation, qpred in defs.versions.items():
        sq = compute_quality_version(clean, onto, defs, relation, depth_budget=depth_budget)
        versions[relation] = sq
        base = db.tuples(relation)
        rq = RelationQuality(relation, qpred, len(base), len(sq))
        for tup in base:
            if tup not in sq:
                rq.discarded.append(Discarded(relation, tup, _failure_reason(defs, qpred)))
        report.relations.append(rq)
        qdb.declare(qpred, onto.schema.arity(qpred))
        for tup in sorted(sq):
            qdb.add(qpred, tup)
    answers = None
    if q is not None:
        rq = rewrite_query(q, defs, onto.schema)
        # S^q is materialized, so only the ontology rules are needed here
        answers = answer_cq(qdb, [r for r in onto.rules if r not in defs.version_rules], rq,
                            depth_budget=depth_budget)
    return answers, report, versions


def _failure_reason(defs: QualityDefinition, qpred: str) -> str:
    labels = [r.label for r in defs.version_rules if any(h.pred == qpred for h in r.head)]
    return "fails quality condition of " + ", ".join(labels or [qpred])
