"""Rules, conjunctive queries and the ontology container."""
from __future__ import annotations

from dataclasses import dataclass, field

from .model import DimensionInstance, MDSchema
from .terms import Atom, Comparison, Term, Var, format_term


@dataclass(frozen=True)
class Rule:
    kind: str  # "tgd" | "egd" | "nc"
    label: str
    body: tuple[Atom, ...]
    head: tuple[Atom, ...] = ()
    comparisons: tuple[Comparison, ...] = ()
    existentials: tuple[Var, ...] = ()
    equality: tuple[Term, Term] | None = None
    line: int = field(default=0, compare=False)

    @property
    def positive_body(self) -> tuple[Atom, ...]:
        return tuple(a for a in self.body if not a.negated)

    @property
    def negated_body(self) -> tuple[Atom, ...]:
        return tuple(a for a in self.body if a.negated)

    def body_vars(self) -> set[Var]:
        return {v for a in self.positive_body for v in a.vars()}

    def head_vars(self) -> set[Var]:
        out = {v for a in self.head for v in a.vars()}
        if self.equality:
            out.update(v for v in self.equality if isinstance(v, Var))
        return out

    def frontier(self) -> set[Var]:
        """Universal variables shared between body and head."""
        return self.body_vars() & self.head_vars()

    def __str__(self) -> str:
        return format_rule(self)


@dataclass(frozen=True)
class ConjunctiveQuery:
    name: str
    answer: tuple[Term, ...]
    body: tuple[Atom, ...]
    comparisons: tuple[Comparison, ...] = ()

    @property
    def answer_vars(self) -> tuple[Var, ...]:
        seen: list[Var] = []
        for t in self.answer:
            if isinstance(t, Var) and t not in seen:
                seen.append(t)
        return tuple(seen)

    def vars(self) -> set[Var]:
        return {v for a in self.body for v in a.vars()}

    @property
    def is_boolean(self) -> bool:
        return not self.answer_vars

    def __str__(self) -> str:
        head = f"{self.name}({', '.join(format_term(t) for t in self.answer)})"
        return f"{head} <- {format_body(self.body, self.comparisons)}"


@dataclass(frozen=True)
class ContextPair:
    """``base(x...) -> context(y...)``: copy base tuples into a contextual relation."""

    base: str
    context: str
    correspondence: tuple[int | None, ...]  # per context position: base index or None (fresh null)
    base_arity: int


@dataclass
class Ontology:
    schema: MDSchema = field(default_factory=MDSchema)
    instances: dict[str, DimensionInstance] = field(default_factory=dict)
    rules: list[Rule] = field(default_factory=list)
    constraints: list[Rule] = field(default_factory=list)
    queries: dict[str, ConjunctiveQuery] = field(default_factory=dict)
    data_bindings: dict[str, str] = field(default_factory=dict)
    mappings: list[ContextPair] = field(default_factory=list)
    quality: dict[str, str] = field(default_factory=dict)

    @property
    def egds(self) -> list[Rule]:
        return [r for r in self.constraints if r.kind == "egd"]

    @property
    def ncs(self) -> list[Rule]:
        return [r for r in self.constraints if r.kind == "nc"]

    def rule(self, label: str) -> Rule:
        for r in [*self.rules, *self.constraints]:
            if r.label == label:
                return r
        raise KeyError(label)

    def is_empty(self) -> bool:
        s = self.schema
        return not (s.dimensions or s.relations or s.predicates or self.rules
                    or self.constraints or self.queries)


def format_body(atoms, comparisons=()) -> str:
    return ", ".join([*(str(a) for a in atoms), *(str(c) for c in comparisons)])


def format_rule(rule: Rule) -> str:
    body = format_body(rule.body, rule.comparisons)
    if rule.kind == "tgd":
        ex = ""
        if rule.existentials:
            ex = "exists " + ", ".join(v.name for v in rule.existentials) + ": "
        head = ", ".join(str(a) for a in rule.head)
        return f"tgd {rule.label}: {ex}{head} <- {body}."
    if rule.kind == "egd":
        left, right = rule.equality
        return f"egd {rule.label}: {format_term(left)} = {format_term(right)} <- {body}."
    return f"nc {rule.label}: <- {body}."
