"""Conjunctive query answering.

``answer_bcq`` / ``answer_cq`` run a deterministic top-down backtracking search
for resolution proof schemas: query atoms are resolved left to right, each by a
ground match against the database, by reuse of an isomorphic atom resolved in
another subtree, or by expanding a TGD whose head unifies with it.  Decisions
live on an explicit stack and are undone by popping it.

An atom that is var(q)-isomorphic to one of its own ancestors is not expanded
again; instead it consumes the answers recorded so far for that ancestor, and
the search is repeated until no new answers appear.  ``answer_via_chase`` is
the independent oracle: chase, then evaluate.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Iterator

from .analysis import is_weakly_sticky
from .chase import BudgetExceeded, ChaseConfig, chase, homomorphisms
from .model import Database
from .rules import ConjunctiveQuery, Ontology, Rule
from .terms import (
    Atom,
    Comparison,
    Skolem,
    Var,
    compare,
    is_const,
    match_fact,
    rename,
    resolve,
    resolve_atom,
    term_vars,
    unify_atoms,
    walk,
)

log = logging.getLogger(__name__)

DEFAULT_DEPTH_BUDGET = 64


class DepthBudgetExceeded(RuntimeError):
    """The search was cut by its budget; absence of a proof is not established."""


class NotWeaklySticky(ValueError):
    pass


def default_depth_budget() -> int:
    return int(os.environ.get("MDQ_DEPTH_BUDGET", DEFAULT_DEPTH_BUDGET))


@dataclass
class ProofNode:
    atom: object
    kind: str  # fact | rule | reuse | table | comparison
    rule: str | None = None
    children: list["ProofNode"] = field(default_factory=list)

    def leaves(self) -> Iterator["ProofNode"]:
        if not self.children:
            yield self
        for c in self.children:
            yield from c.leaves()

    def render(self, indent: int = 0) -> list[str]:
        tag = {"fact": "[db]", "rule": f"[{self.rule}]", "reuse": "[reuse]",
               "table": "[tabled]", "comparison": "[cmp]"}[self.kind]
        lines = ["  " * indent + f"{self.atom} {tag}"]
        for c in self.children:
            lines.extend(c.render(indent + 1))
        return lines

    def to_dict(self) -> dict:
        out = {"atom": str(self.atom), "kind": self.kind}
        if self.rule:
            out["rule"] = self.rule
        if self.children:
            out["children"] = [c.to_dict() for c in self.children]
        return out


@dataclass
class ResolutionProofSchema:
    roots: list[ProofNode]

    def leaves(self) -> Iterator[ProofNode]:
        for r in self.roots:
            yield from r.leaves()

    def render(self) -> str:
        return "\n".join(line for r in self.roots for line in r.render())


@dataclass(frozen=True)
class _Goal:
    item: object  # Atom | Comparison | None (marker)
    id: int
    parent: int | None
    ancestors: tuple[int, ...] = ()
    depth: int = 0
    marker_for: int | None = None


@dataclass(frozen=True)
class _Record:
    goal: int
    parent: int | None
    item: object
    kind: str
    detail: object = None


@dataclass(frozen=True)
class _State:
    pending: tuple[_Goal, ...]
    subst: dict
    records: tuple[_Record, ...]
    next_id: int
    expanded: dict  # goal id -> (atom, call key)


@dataclass(frozen=True)
class Frame:
    """One entry of the decision stack."""

    state: _State
    choices: Iterator
    decision: str


def canonical(atom: Atom, query_vars: frozenset) -> tuple:
    """Key identifying ``atom`` up to renaming of non-query variables."""
    names: dict[Var, int] = {}

    def c(t):
        if isinstance(t, Var):
            if t in query_vars:
                return ("q", t.name)
            return ("v", names.setdefault(t, len(names)))
        if isinstance(t, Skolem):
            return ("f", t.rule, t.var, tuple(c(a) for a in t.args))
        return ("c", t)

    return (atom.pred, tuple(c(a) for a in atom.args))


def _ground(t) -> bool:
    return not any(True for _ in term_vars(t))


class TopDownSolver:
    def __init__(self, db: Database, tgds: list[Rule], depth_budget: int | None = None,
                 max_steps: int = 2_000_000, max_iterations: int = 64):
        self.db = db
        self.tgds = list(tgds)
        self.depth_budget = depth_budget if depth_budget is not None else default_depth_budget()
        self.max_steps = max_steps
        self.max_iterations = max_iterations
        self.by_pred: dict[str, list[tuple[Rule, int]]] = {}
        for r in self.tgds:
            for j, h in enumerate(r.head):
                self.by_pred.setdefault(h.pred, []).append((r, j))
        self.trace: list[tuple[int, str]] = []
        self.table: dict[tuple, dict] = {}
        self.cut = False
        self.iterations = 0

    # -- public driver
    def solve(self, query: ConjunctiveQuery, first_only: bool = False
              ) -> Iterator[tuple[dict, Callable[[], ResolutionProofSchema]]]:
        """Solutions as (substitution, proof schema builder) pairs."""
        qvars = frozenset(query.vars())
        self.table = {}
        self.trace = []
        self.cut = False
        self.steps = 0
        for it in range(self.max_iterations):
            self.iterations = it + 1
            self.changed = False
            self.consumed = False
            for state in self._dfs(query, qvars):
                yield state.subst, partial(self._schema, state)
                if first_only:
                    return
            if not (self.changed and self.consumed):
                return
        raise DepthBudgetExceeded(f"no fixpoint after {self.max_iterations} iterations")

    # -- search
    def _dfs(self, query: ConjunctiveQuery, qvars) -> Iterator[_State]:
        goals = [_Goal(a, i, None) for i, a in enumerate(query.body)]
        goals += [_Goal(c, len(goals) + i, None) for i, c in enumerate(query.comparisons)]
        init = _State(tuple(goals), {}, (), len(goals), {})
        stack = [Frame(init, iter([("start", init)]), "start")]
        while stack:
            frame = stack[-1]
            nxt = next(frame.choices, None)
            if nxt is None:
                stack.pop()
                continue
            self.steps += 1
            if self.steps > self.max_steps:
                raise DepthBudgetExceeded(f"more than {self.max_steps} search steps")
            decision, cand = nxt
            cand = self._settle(cand, qvars)
            if cand is None:
                continue
            self.trace.append((len(stack), decision))
            if not cand.pending:
                yield cand
                continue
            stack.append(Frame(cand, self._choices(cand, qvars), decision))

    def _settle(self, st: _State, qvars) -> _State | None:
        """Evaluate ground comparisons and close finished subtrees."""
        pending = list(st.pending)
        records = list(st.records)
        while True:
            progressed = False
            keep = []
            for g in pending:
                if isinstance(g.item, Comparison):
                    left, right = resolve(g.item.left, st.subst), resolve(g.item.right, st.subst)
                    if _ground(left) and _ground(right):
                        if not compare(left, g.item.op, right):
                            return None
                        records.append(_Record(g.id, g.parent, Comparison(left, g.item.op, right), "comparison"))
                        progressed = True
                        continue
                keep.append(g)
            pending = keep
            k = 0
            while k < len(pending) and isinstance(pending[k].item, Comparison):
                k += 1
            if k < len(pending) and pending[k].item is None:
                if k > 0:
                    return None  # a comparison of the finished subtree never became ground
                marker = pending.pop(0)
                atom, key = st.expanded[marker.marker_for]
                instance = resolve_atom(atom, st.subst)
                st2 = _State(tuple(pending), st.subst, tuple(records), st.next_id, st.expanded)
                self._table_add(key, instance, partial(self._node, marker.marker_for, st2))
                progressed = True
            if not progressed:
                break
        if not any(not isinstance(g.item, Comparison) for g in pending) and pending:
            return None  # only non-ground comparisons left
        return _State(tuple(pending), st.subst, tuple(records), st.next_id, st.expanded)

    def _table_add(self, key, instance: Atom, proof) -> None:
        """Record an answer for a call pattern; ``proof`` builds its proof tree on demand."""
        answers = self.table.setdefault(key, {})
        if instance not in answers:
            answers[instance] = proof
            self.changed = True

    def _choices(self, st: _State, qvars) -> Iterator[tuple[str, _State]]:
        idx = next(i for i, g in enumerate(st.pending) if not isinstance(g.item, Comparison))
        g = st.pending[idx]
        rest = st.pending[:idx] + st.pending[idx + 1:]
        atom = resolve_atom(g.item, st.subst)
        key = canonical(atom, qvars)

        def resolved(s2, kind, detail=None, extra_records=()):
            rec = _Record(g.id, g.parent, g.item, kind, detail)
            return _State(rest, s2, st.records + (rec,) + tuple(extra_records), st.next_id, st.expanded)

        # an atom isomorphic to one of its own ancestors consumes that ancestor's answers
        for anc in g.ancestors:
            anc_atom, anc_key = st.expanded[anc]
            if anc_atom.pred != atom.pred:
                continue
            if key == anc_key or key == canonical(resolve_atom(anc_atom, st.subst), qvars):
                self.consumed = True
                yield from self._ground_matches(atom, st, resolved)
                for n, (ans, node) in enumerate(list(self.table.get(anc_key, {}).items())):
                    fresh = rename([ans], f"t{st.next_id}_{n}")[0]
                    s2 = unify_atoms(atom, fresh, st.subst)
                    if s2 is not None:
                        yield f"table {ans}", resolved(s2, "table", node)
                return

        # reuse of an isomorphic atom resolved in a different subtree
        for rec in st.records:
            if rec.kind == "comparison" or rec.item.pred != atom.pred or rec.goal in g.ancestors:
                continue
            other = resolve_atom(rec.item, st.subst)
            if canonical(other, qvars) != key:
                continue
            if other == atom:
                yield f"reuse #{rec.goal}", resolved(st.subst, "reuse", rec.goal)
                return
            s2 = unify_atoms(atom, other, st.subst)
            if s2 is not None:
                yield f"reuse #{rec.goal}", resolved(s2, "reuse", rec.goal)
            break

        yield from self._ground_matches(atom, st, resolved, key)

        if g.depth >= self.depth_budget:
            if self.by_pred.get(atom.pred):
                self.cut = True
            return
        for rule, j in self.by_pred.get(atom.pred, ()):
            if any(type(h) is str and type(t) is str and h != t for h, t in zip(rule.head[j].args, atom.args)):
                continue
            suffix = str(st.next_id)
            body = rename(rule.positive_body, suffix)
            head = rename(rule.head, suffix)
            frontier = sorted(Var(f"{v.name}#{suffix}") for v in rule.frontier())
            sk = {Var(f"{z.name}#{suffix}"): Skolem(rule.label, z.name, tuple(frontier)) for z in rule.existentials}
            head_atom = Atom(head[j].pred, tuple(sk.get(t, t) for t in head[j].args))
            s2 = unify_atoms(atom, head_atom, st.subst)
            if s2 is None:
                continue
            nid = st.next_id
            new_goals = []
            for a in body:
                new_goals.append(_Goal(a, nid, g.id, g.ancestors + (g.id,), g.depth + 1))
                nid += 1
            for c in rule.comparisons:
                c = Comparison(_rename_term(c.left, suffix), c.op, _rename_term(c.right, suffix))
                new_goals.append(_Goal(c, nid, g.id, g.ancestors + (g.id,), g.depth + 1))
                nid += 1
            marker = _Goal(None, nid, g.parent, marker_for=g.id)
            nid += 1
            expanded = dict(st.expanded)
            expanded[g.id] = (g.item, key)
            rec = _Record(g.id, g.parent, g.item, "rule", rule.label)
            yield (f"rule {rule.label}",
                   _State(tuple(new_goals) + (marker,) + rest, s2, st.records + (rec,), nid, expanded))

    def _ground_matches(self, atom: Atom, st: _State, resolved, key=None):
        bound = {i: t for i, t in enumerate(atom.args) if _ground(t) and not isinstance(t, Skolem)}
        if any(isinstance(t, Skolem) and _ground(t) for t in atom.args):
            return
        for tup in self.db.lookup(atom.pred, bound):
            if len(tup) != len(atom.args):
                continue
            s2 = match_fact(atom, tup, st.subst)
            if s2 is None:
                continue
            if key is not None:
                inst = Atom(atom.pred, tup)
                if inst not in self.table.get(key, {}):
                    self._table_add(key, inst, partial(ProofNode, inst, "fact"))
            yield f"fact {atom.pred}{tup}", resolved(s2, "fact", tup)

    # -- proof schemas
    def _node(self, goal_id: int, st: _State) -> ProofNode:
        by_parent: dict[int | None, list[_Record]] = {}
        own = None
        for rec in st.records:
            by_parent.setdefault(rec.parent, []).append(rec)
            if rec.goal == goal_id:
                own = rec
        return self._build(own, by_parent, st.subst)

    def _build(self, rec: _Record, by_parent, subst) -> ProofNode:
        item = rec.item
        shown = resolve_atom(item, subst) if isinstance(item, Atom) else item
        if rec.kind == "rule":
            kids = [self._build(r, by_parent, subst) for r in by_parent.get(rec.goal, [])]
            return ProofNode(shown, "rule", rec.detail, kids)
        if rec.kind == "table":
            return ProofNode(shown, "table", None, [rec.detail()])
        return ProofNode(shown, rec.kind)

    def _schema(self, st: _State) -> ResolutionProofSchema:
        by_parent: dict[int | None, list[_Record]] = {}
        for rec in st.records:
            by_parent.setdefault(rec.parent, []).append(rec)
        return ResolutionProofSchema([self._build(r, by_parent, st.subst) for r in by_parent.get(None, [])])


def _rename_term(t, suffix: str):
    if isinstance(t, Var):
        return Var(f"{t.name}#{suffix}")
    return t


def _check_ws(tgds: list[Rule], enforce_ws: bool) -> None:
    if enforce_ws:
        verdict = is_weakly_sticky(tgds)
        if not verdict:
            raise NotWeaklySticky(verdict.reason)


def answer_bcq(db: Database, tgds: list[Rule], q: ConjunctiveQuery, *, depth_budget: int | None = None,
               enforce_ws: bool = True, solver: TopDownSolver | None = None
               ) -> tuple[bool, ResolutionProofSchema | None]:
    """Decide a boolean CQ; on acceptance also return the proof schema."""
    _check_ws(tgds, enforce_ws)
    solver = solver or TopDownSolver(db, tgds, depth_budget)
    for _, schema in solver.solve(q, first_only=True):
        return True, schema()
    if solver.cut:
        raise DepthBudgetExceeded(f"no proof found within depth budget {solver.depth_budget}")
    return False, None


def answer_cq(db: Database, tgds: list[Rule], q: ConjunctiveQuery, *, depth_budget: int | None = None,
              enforce_ws: bool = True, solver: TopDownSolver | None = None,
              proofs: dict | None = None) -> set[tuple]:
    """Certain answers of ``q``: constant tuples only, derived by the top-down search."""
    _check_ws(tgds, enforce_ws)
    solver = solver or TopDownSolver(db, tgds, depth_budget)
    out: set[tuple] = set()
    for subst, schema in solver.solve(q):
        tup = tuple(resolve(t, subst) for t in q.answer)
        if all(is_const(v) for v in tup):
            if tup not in out and proofs is not None:
                proofs[tup] = schema()
            out.add(tup)
    if solver.cut:
        raise DepthBudgetExceeded(f"search cut at depth {solver.depth_budget}; answers may be incomplete")
    return out


def evaluate(q: ConjunctiveQuery, db: Database) -> set[tuple]:
    """Plain CQ evaluation over ``db``; null-valued answers are dropped."""
    out = set()
    for h in homomorphisms(q.body, db, comparisons=q.comparisons):
        tup = tuple(resolve(t, h) for t in q.answer)
        if all(is_const(v) for v in tup):
            out.add(tup)
    return out


def answer_via_chase(db: Database, onto: Ontology, q: ConjunctiveQuery,
                     config: ChaseConfig = ChaseConfig()) -> set[tuple]:
    result = chase(db, onto, config)
    if not result.terminated:
        raise BudgetExceeded(result.error)
    return evaluate(q, result.facts)


def with_answer(q: ConjunctiveQuery, values: tuple) -> ConjunctiveQuery:
    """Boolean instance of ``q`` with its answer variables fixed to ``values``."""
    sub = {}
    for t, v in zip(q.answer, values):
        if isinstance(t, Var):
            sub[t] = v
    body = tuple(resolve_atom(a, sub) for a in q.body)
    comps = tuple(Comparison(resolve(c.left, sub), c.op, resolve(c.right, sub)) for c in q.comparisons)
    return ConjunctiveQuery(q.name, (), body, comps)
