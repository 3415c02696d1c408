"""Static analysis of dimensional rules: syntactic forms, finite-rank positions,
sticky marking, weak-stickiness and EGD separability."""
from __future__ import annotations

import enum
import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import networkx as nx

from .model import MDSchema
from .rules import Ontology, Rule
from .terms import Atom, Var

log = logging.getLogger(__name__)


class Form(enum.Enum):
    REFERENTIAL_NC = "referential-nc"
    DIMENSIONAL_EGD = "dimensional-egd"
    DIMENSIONAL_NC = "dimensional-nc"
    DIMENSIONAL_TGD = "dimensional-tgd"
    DOWNCAST_TGD = "downcast-tgd"
    GENERIC = "generic"


@dataclass(frozen=True)
class RuleClass:
    form: Form
    direction: str | None = None  # upward | downward | mixed, dimensional TGDs only
    note: str = ""

    def __str__(self) -> str:
        return self.form.value + (f" ({self.direction})" if self.direction else "")


class Position(NamedTuple):
    predicate: str
    index: int

    def __str__(self) -> str:
        return f"{self.predicate}[{self.index}]"


# -- classification -----------------------------------------------------------------


def _cat_positions(atom: Atom, schema: MDSchema) -> list[int]:
    return [i for i in range(len(atom.args)) if schema.position_category(atom.pred, i) is not None]


def _shared_only_categorical(atoms: list[Atom], schema: MDSchema) -> bool:
    counts = Counter(v for a in atoms for v in a.args if isinstance(v, Var))
    for a in atoms:
        for i, t in enumerate(a.args):
            if isinstance(t, Var) and counts[t] > 1 and schema.position_category(a.pred, i) is None:
                return False
    return True


def _navigation(rule: Rule, schema: MDSchema) -> str | None:
    body_cat_values = set()
    for a in rule.positive_body:
        if schema.kind(a.pred) == "categorical":
            body_cat_values.update(a.args[i] for i in _cat_positions(a, schema))
    head_values = {t for a in rule.head for t in a.args}
    dirs = set()
    for d in rule.positive_body:
        if schema.kind(d.pred) != "parent_child":
            continue
        parent, child = d.args
        if child in body_cat_values and parent in head_values:
            dirs.add("upward")
        if parent in body_cat_values and child in head_values:
            dirs.add("downward")
    if len(dirs) == 2:
        return "mixed"
    return dirs.pop() if dirs else None


def classify_rule(rule: Rule, schema: MDSchema) -> RuleClass:
    """Most specific syntactic form of ``rule`` over ``schema``."""
    kinds = [schema.kind(a.pred) for a in rule.positive_body]
    cat_atoms = [a for a in rule.positive_body if schema.kind(a.pred) == "categorical"]
    dimensional_body = bool(cat_atoms) and all(k in ("categorical", "parent_child") for k in kinds)

    if rule.kind == "nc":
        neg = rule.negated_body
        if (len(rule.positive_body) == 1 and cat_atoms and len(neg) == 1
                and schema.kind(neg[0].pred) == "category" and not rule.comparisons):
            r = cat_atoms[0]
            e = neg[0].args[0]
            if any(r.args[i] == e for i in _cat_positions(r, schema)):
                return RuleClass(Form.REFERENTIAL_NC)
        if not neg and dimensional_body:
            return RuleClass(Form.DIMENSIONAL_NC)
        return RuleClass(Form.GENERIC)

    if rule.kind == "egd":
        if dimensional_body and not rule.negated_body:
            return RuleClass(Form.DIMENSIONAL_EGD)
        return RuleClass(Form.GENERIC)

    # TGDs
    if not dimensional_body or rule.comparisons:
        return RuleClass(Form.GENERIC)
    ex = set(rule.existentials)
    body_atoms = list(rule.positive_body)
    if not _shared_only_categorical(body_atoms, schema):
        return RuleClass(Form.GENERIC)
    body_cat_values = {a.args[i] for a in body_atoms for i in _cat_positions(a, schema)}
    body_noncat_values = {a.args[i] for a in cat_atoms for i in range(len(a.args))
                          if schema.position_category(a.pred, i) is None}

    head_cat = [a for a in rule.head if schema.kind(a.pred) == "categorical"]
    head_pc = [a for a in rule.head if schema.kind(a.pred) == "parent_child"]
    if len(head_cat) != 1 or len(head_cat) + len(head_pc) != len(rule.head):
        return RuleClass(Form.GENERIC)
    target = head_cat[0]

    ex_categorical = any(
        t in ex for a in rule.head for i, t in enumerate(a.args)
        if schema.position_category(a.pred, i) is not None)

    def frontier_ok(atoms) -> bool:
        for a in atoms:
            for i, t in enumerate(a.args):
                if t in ex:
                    continue
                if schema.position_category(a.pred, i) is not None:
                    if isinstance(t, Var) and t not in body_cat_values:
                        return False
                elif isinstance(t, Var) and t not in body_noncat_values:
                    return False
        return True

    if ex_categorical:
        # downward navigation inventing category members
        if len(cat_atoms) != len(body_atoms) or not frontier_ok(rule.head):
            return RuleClass(Form.GENERIC)
        body_cats = {schema.position_category(a.pred, i) for a in cat_atoms for i in _cat_positions(a, schema)}
        dims = schema.categories()
        for i in _cat_positions(target, schema):
            ch = schema.position_category(target.pred, i)
            for cb in body_cats:
                if dims.get(cb) != dims.get(ch) or cb == ch:
                    continue
                if cb not in schema.dimensions[dims[ch]].ancestors(ch):
                    return RuleClass(Form.GENERIC, note=f"{cb} is below {ch}")
        return RuleClass(Form.DOWNCAST_TGD, "downward")

    if head_pc or not frontier_ok([target]):
        return RuleClass(Form.GENERIC)
    direction = _navigation(rule, schema)
    if direction == "mixed":
        log.warning("rule %s navigates both upward and downward", rule.label)
    return RuleClass(Form.DIMENSIONAL_TGD, direction)


# -- dependency graph and finite-rank positions ------------------------------------------


@dataclass
class DependencyGraph:
    nodes: set[Position] = field(default_factory=set)
    normal_edges: set[tuple[Position, Position]] = field(default_factory=set)
    special_edges: set[tuple[Position, Position]] = field(default_factory=set)

    def edges(self) -> Iterator[tuple[Position, Position, bool]]:
        for e in sorted(self.normal_edges):
            yield (*e, False)
        for e in sorted(self.special_edges):
            yield (*e, True)


def _occurrences(atoms, var) -> list[Position]:
    return [Position(a.pred, i) for a in atoms for i, t in enumerate(a.args) if t == var]


def dependency_graph(tgds: list[Rule]) -> DependencyGraph:
    g = DependencyGraph()
    for r in tgds:
        for a in [*r.positive_body, *r.head]:
            g.nodes.update(Position(a.pred, i) for i in range(len(a.args)))
        ex_positions = [p for z in r.existentials for p in _occurrences(r.head, z)]
        for v in sorted(r.frontier()):
            for p in _occurrences(r.positive_body, v):
                for q in _occurrences(r.head, v):
                    g.normal_edges.add((p, q))
                for q in ex_positions:
                    g.special_edges.add((p, q))
    return g


def infinite_rank_positions(g: DependencyGraph) -> set[Position]:
    """Positions reachable from a strongly connected component that contains a special edge."""
    dg = nx.DiGraph()
    dg.add_nodes_from(g.nodes)
    dg.add_edges_from(g.normal_edges)
    dg.add_edges_from(g.special_edges)
    comp_of = {}
    for k, comp in enumerate(nx.strongly_connected_components(dg)):
        for p in comp:
            comp_of[p] = k
    seeds = {p for a, b in g.special_edges if comp_of[a] == comp_of[b] for p in (a, b)}
    out = set(seeds)
    for s in seeds:
        out |= nx.descendants(dg, s)
    return out


def compute_finite_positions(tgds: list[Rule]) -> tuple[DependencyGraph, set[Position]]:
    g = dependency_graph(tgds)
    return g, g.nodes - infinite_rank_positions(g)


# -- marking ------------------------------------------------------------------------


def marking_rounds(tgds: list[Rule]) -> Iterator[frozenset[tuple[str, Var]]]:
    """Successive marked sets of the sticky-marking fixpoint (base step first)."""
    marked = {(r.label, v) for r in tgds for v in r.body_vars() if v not in r.head_vars()}
    yield frozenset(marked)
    by_label = {r.label: r for r in tgds}
    while True:
        positions = {p for (label, v) in marked for p in _occurrences(by_label[label].positive_body, v)}
        new = set(marked)
        for r in tgds:
            for v in r.frontier():
                if (r.label, v) not in new and any(q in positions for q in _occurrences(r.head, v)):
                    new.add((r.label, v))
        if new == marked:
            return
        marked = new
        yield frozenset(marked)


def mark_variables(tgds: list[Rule]) -> set[tuple[str, Var]]:
    final = frozenset()
    for final in marking_rounds(tgds):
        pass
    return set(final)


# -- verdicts ------------------------------------------------------------------------


@dataclass(frozen=True)
class Verdict:
    accepted: bool
    witness: tuple[str, Var] | None = None
    reason: str = ""

    def __bool__(self) -> bool:
        return self.accepted


def _repeated_body_vars(rule: Rule) -> list[Var]:
    counts = Counter(t for a in rule.positive_body for t in a.args if isinstance(t, Var))
    return [v for v in sorted(counts) if counts[v] > 1]


def is_weakly_sticky(tgds: list[Rule]) -> Verdict:
    _, pi_f = compute_finite_positions(tgds)
    marked = mark_variables(tgds)
    for r in tgds:
        for v in _repeated_body_vars(r):
            if (r.label, v) not in marked:
                continue
            occ = _occurrences(r.positive_body, v)
            if not any(p in pi_f for p in occ):
                return Verdict(False, (r.label, v),
                               f"variable {v} of rule {r.label} is marked, repeated, and occurs only at "
                               f"infinite-rank positions {', '.join(map(str, sorted(occ)))}")
    return Verdict(True)


def is_sticky(tgds: list[Rule]) -> Verdict:
    marked = mark_variables(tgds)
    for r in tgds:
        for v in _repeated_body_vars(r):
            if (r.label, v) in marked:
                return Verdict(False, (r.label, v), f"marked variable {v} of rule {r.label} occurs more than once")
    return Verdict(True)


@dataclass(frozen=True)
class Separability:
    guaranteed: bool
    reason: str = ""

    def __bool__(self) -> bool:
        return self.guaranteed

    def __str__(self) -> str:
        return "Guaranteed" if self.guaranteed else f"NotGuaranteed: {self.reason}"


def check_separability(egds: list[Rule], tgds: list[Rule], schema: MDSchema) -> Separability:
    for e in egds:
        for t in e.equality:
            if not isinstance(t, Var):
                continue
            occ = _occurrences(e.positive_body, t)
            if any(schema.position_category(p.predicate, p.index) is None for p in occ):
                return Separability(False, f"EGD {e.label} equates non-categorical variable {t}")
    if egds:
        for r in tgds:
            if classify_rule(r, schema).form is Form.DOWNCAST_TGD:
                return Separability(False, f"rule {r.label} has an existential categorical variable; "
                                           "separability is application dependent")
    return Separability(True)


@dataclass
class AnalysisResult:
    classes: dict[str, RuleClass]
    graph: DependencyGraph
    pi_f: set[Position]
    marking: set[tuple[str, Var]]
    weakly_sticky: Verdict
    sticky: Verdict
    separability: Separability

    def to_dict(self) -> dict:
        def verdict(v: Verdict) -> dict:
            return {"accepted": v.accepted,
                    "witness": {"rule": v.witness[0], "variable": v.witness[1].name} if v.witness else None,
                    "reason": v.reason}

        return {
            "rules": {label: {"form": c.form.value, "direction": c.direction} for label, c in self.classes.items()},
            "positions": sorted(str(p) for p in self.graph.nodes),
            "finite_positions": sorted(str(p) for p in self.pi_f),
            "normal_edges": sorted([str(a), str(b)] for a, b in self.graph.normal_edges),
            "special_edges": sorted([str(a), str(b)] for a, b in self.graph.special_edges),
            "marked": sorted([label, v.name] for label, v in self.marking),
            "weakly_sticky": verdict(self.weakly_sticky),
            "sticky": verdict(self.sticky),
            "separability": {"guaranteed": self.separability.guaranteed, "reason": self.separability.reason},
        }


def analyze(onto: Ontology) -> AnalysisResult:
    tgds = onto.rules
    graph, pi_f = compute_finite_positions(tgds)
    classes = {r.label: classify_rule(r, onto.schema) for r in [*onto.rules, *onto.constraints]}
    return AnalysisResult(
        classes=classes,
        graph=graph,
        pi_f=pi_f,
        marking=mark_variables(tgds),
        weakly_sticky=is_weakly_sticky(tgds),
        sticky=is_sticky(tgds),
        separability=check_separability(onto.egds, tgds, onto.schema),
    )
