"""Restricted / oblivious chase with labeled nulls, EGD unification and
post-hoc negative-constraint checking."""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Iterator

from .model import Database
from .rules import Ontology, Rule
from .terms import Atom, Comparison, Null, Var, compare, is_const, match_fact, resolve, walk


class BudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class ChaseConfig:
    variant: str = "restricted"
    max_steps: int = 100_000
    max_nulls: int = 100_000
    seed: int | None = None

    def __post_init__(self):
        if self.variant not in ("restricted", "oblivious"):
            raise ValueError(f"unknown chase variant {self.variant!r}")
        if self.max_steps <= 0 or self.max_nulls <= 0:
            raise ValueError("chase budgets must be positive")


@dataclass
class TraceEntry:
    step: int
    rule: str
    trigger: dict
    added: list[tuple[str, tuple]] = field(default_factory=list)
    merged: tuple | None = None  # (old, new) for EGD steps


@dataclass
class ChaseState:
    facts: Database
    step: int = 0
    trace: list[TraceEntry] = field(default_factory=list)
    nulls: list[Null] = field(default_factory=list)
    applied: set = field(default_factory=set)

    def fresh_null(self, rule: str, position: tuple[str, int], config: ChaseConfig) -> Null:
        if len(self.nulls) >= config.max_nulls:
            raise BudgetExceeded(f"more than {config.max_nulls} labeled nulls")
        n = Null(len(self.nulls) + 1, rule, position)
        self.nulls.append(n)
        return n


@dataclass(frozen=True)
class HardViolation:
    rule: str
    trigger: tuple
    values: tuple


@dataclass
class UnificationOutcome:
    substitutions: list[tuple] = field(default_factory=list)
    hard_violations: list[HardViolation] = field(default_factory=list)


@dataclass(frozen=True)
class NCViolation:
    rule: str
    trigger: tuple  # sorted (variable name, value) pairs
    facts: tuple  # (predicate, tuple) images of the positive body atoms


@dataclass
class ChaseResult:
    state: ChaseState
    terminated: bool
    egd_violations: list[HardViolation]
    nc_violations: list[NCViolation]
    error: str | None = None

    @property
    def facts(self) -> Database:
        return self.state.facts


# -- homomorphisms -------------------------------------------------------------------


def _bound_positions(atom: Atom, subst) -> dict[int, object]:
    out = {}
    for i, t in enumerate(atom.args):
        t = walk(t, subst)
        if not isinstance(t, Var):
            out[i] = t
    return out


def homomorphisms(atoms, db: Database, subst: dict | None = None,
                  comparisons: tuple[Comparison, ...] = ()) -> Iterator[dict]:
    """All extensions of ``subst`` mapping the positive ``atoms`` into ``db``.

    The next atom joined is the one with most bound positions (ties by order);
    comparisons are tested as soon as they are ground.
    """
    atoms = [a for a in atoms if not a.negated]
    subst = dict(subst or {})

    def ground(c: Comparison, s) -> bool:
        return not isinstance(walk(c.left, s), Var) and not isinstance(walk(c.right, s), Var)

    def rec(remaining, pending, s):
        still = []
        for c in pending:
            if ground(c, s):
                if not compare(walk(c.left, s), c.op, walk(c.right, s)):
                    return
            else:
                still.append(c)
        if not remaining:
            if still:
                return
            yield s
            return
        best = max(range(len(remaining)), key=lambda k: (len(_bound_positions(remaining[k], s)), -k))
        atom = remaining[best]
        rest = remaining[:best] + remaining[best + 1:]
        for tup in db.lookup(atom.pred, _bound_positions(atom, s)):
            if len(tup) != len(atom.args):
                continue
            s2 = match_fact(atom, tup, s)
            if s2 is not None:
                yield from rec(rest, still, s2)

    yield from rec(atoms, list(comparisons), subst)


def _trigger_key(rule: Rule, h: dict) -> tuple:
    return tuple(sorted((v.name, h[v]) for v in rule.body_vars()))


def _ground(atom: Atom, h: dict) -> tuple:
    return tuple(resolve(t, h) for t in atom.args)


# -- rule application ----------------------------------------------------------------


def apply_tgd(state: ChaseState, tgd: Rule, config: ChaseConfig = ChaseConfig()) -> list[tuple[str, tuple]]:
    """Fire every active trigger of ``tgd`` found in the current facts; returns the atoms added."""
    added_all = []
    triggers = list(homomorphisms(tgd.body, state.facts, comparisons=tgd.comparisons))
    for h in triggers:
        key = (tgd.label, _trigger_key(tgd, h))
        if config.variant == "oblivious":
            if key in state.applied:
                continue
        elif next(homomorphisms(tgd.head, state.facts, h), None) is not None:
            continue
        state.applied.add(key)
        if state.step >= config.max_steps:
            raise BudgetExceeded(f"more than {config.max_steps} chase steps")
        state.step += 1
        ext = dict(h)
        for z in tgd.existentials:
            pos = next((a.pred, i) for a in tgd.head for i, t in enumerate(a.args) if t == z)
            ext[z] = state.fresh_null(tgd.label, pos, config)
        entry = TraceEntry(state.step, tgd.label, {v.name: h[v] for v in sorted(tgd.body_vars())})
        for atom in tgd.head:
            fact = _ground(atom, ext)
            if state.facts.add(atom.pred, fact):
                entry.added.append((atom.pred, fact))
        state.trace.append(entry)
        added_all.extend(entry.added)
    return added_all


def apply_egd(state: ChaseState, egd: Rule, config: ChaseConfig = ChaseConfig()) -> UnificationOutcome:
    """Enforce ``egd`` by merging nulls; distinct constants become hard violations."""
    out = UnificationOutcome()
    left, right = egd.equality
    while True:
        merged = False
        for h in homomorphisms(egd.body, state.facts, comparisons=egd.comparisons):
            a, b = resolve(left, h), resolve(right, h)
            if a == b:
                continue
            if is_const(a) and is_const(b):
                hv = HardViolation(egd.label, _trigger_key(egd, h), (a, b))
                if hv not in out.hard_violations:
                    out.hard_violations.append(hv)
                continue
            if is_const(a) or (isinstance(a, Null) and isinstance(b, Null) and a.id < b.id):
                old, new = b, a
            else:
                old, new = a, b
            state.facts.replace_term(old, new)
            state.step += 1
            state.trace.append(TraceEntry(state.step, egd.label,
                                          {v.name: h[v] for v in sorted(egd.body_vars())}, merged=(old, new)))
            out.substitutions.append((old, new))
            merged = True
            break
        if not merged:
            return out


def check_ncs(db: Database, ncs: list[Rule]) -> list[NCViolation]:
    """Triggers of negative constraints.  A negated atom over a null is not a violation."""
    out = []
    for nc in ncs:
        for h in homomorphisms(nc.body, db, comparisons=nc.comparisons):
            violated = True
            for neg in nc.negated_body:
                tup = _ground(neg, h)
                if not all(is_const(v) for v in tup) or (neg.pred, tup) in db:
                    violated = False
                    break
            if violated:
                facts = tuple((a.pred, _ground(a, h)) for a in nc.positive_body)
                out.append(NCViolation(nc.label, _trigger_key(nc, h), facts))
    return out


def chase(db: Database, onto: Ontology, config: ChaseConfig = ChaseConfig()) -> ChaseResult:
    state = ChaseState(db.copy())
    rules = list(onto.rules)
    rng = random.Random(config.seed) if config.seed is not None else None
    egd_violations: list[HardViolation] = []
    terminated, error = True, None
    try:
        while True:
            order = list(rules)
            if rng is not None:
                rng.shuffle(order)
            progress = False
            for r in order:
                if apply_tgd(state, r, config):
                    progress = True
            for e in onto.egds:
                outcome = apply_egd(state, e, config)
                progress = progress or bool(outcome.substitutions)
                for hv in outcome.hard_violations:
                    if hv not in egd_violations:
                        egd_violations.append(hv)
            if not progress:
                break
    except BudgetExceeded as exc:
        terminated, error = False, str(exc)
    return ChaseResult(state, terminated, egd_violations, check_ncs(state.facts, onto.ncs), error)


def replay(initial: Database, trace: list[TraceEntry]) -> Database:
    """Rebuild the chased facts from the initial database and a trace."""
    db = initial.copy()
    for entry in trace:
        for pred, tup in entry.added:
            db.add(pred, tup)
        if entry.merged:
            db.replace_term(*entry.merged)
    return db
