"""Terms, atoms and substitutions shared by the chase and the top-down engine.

Constants are plain strings.  Variables, labeled nulls and Skolem terms are
small frozen dataclasses so they can never collide with a constant.
"""
from __future__ import annotations

import re

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Union


class Var:
    """A logic variable, identified by its name.  Hashing is cached: variables
    are dictionary keys in every substitution."""

    __slots__ = ("name", "_hash")

    def __init__(self, name: str):
        object.__setattr__(self, "name", name)
        object.__setattr__(self, "_hash", hash(("Var", name)))

    def __setattr__(self, key, value):
        raise AttributeError("Var is immutable")

    def __eq__(self, other) -> bool:
        return self is other or (type(other) is Var and other.name == self.name)

    def __hash__(self) -> int:
        return self._hash

    def __lt__(self, other: "Var") -> bool:
        return self.name < other.name

    def __reduce__(self):
        return (Var, (self.name,))

    def __repr__(self) -> str:
        return f"Var({self.name!r})"

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Null:
    """A labeled null.  Identity is the ordinal alone; provenance is metadata."""

    id: int
    origin_rule: str = field(default="", compare=False)
    origin_position: tuple[str, int] | None = field(default=None, compare=False)

    def __str__(self) -> str:
        return f"_:n{self.id}"

    def __lt__(self, other: "Null") -> bool:
        return self.id < other.id


@dataclass(frozen=True)
class Skolem:
    """Placeholder for the null a TGD trigger invents, used during top-down search."""

    rule: str
    var: str
    args: tuple

    def __str__(self) -> str:
        inner = ",".join(str(a) for a in self.args)
        return f"f_{self.rule}_{self.var}({inner})"


Term = Union[str, Var, Null, Skolem]

OPS = ("=", "<=", "<")


def is_const(t) -> bool:
    return isinstance(t, str)


def is_null(t) -> bool:
    return isinstance(t, (Null, Skolem))


@dataclass(frozen=True)
class Atom:
    pred: str
    args: tuple
    negated: bool = False

    @property
    def arity(self) -> int:
        return len(self.args)

    def vars(self) -> Iterator[Var]:
        for a in self.args:
            yield from term_vars(a)

    def __str__(self) -> str:
        body = f"{self.pred}({', '.join(format_term(a) for a in self.args)})"
        return f"not {body}" if self.negated else body


@dataclass(frozen=True)
class Comparison:
    left: Term
    op: str
    right: Term

    def vars(self) -> Iterator[Var]:
        yield from term_vars(self.left)
        yield from term_vars(self.right)

    def __str__(self) -> str:
        return f"{format_term(self.left)} {self.op} {format_term(self.right)}"


def term_vars(t) -> Iterator[Var]:
    if isinstance(t, Var):
        yield t
    elif isinstance(t, Skolem):
        for a in t.args:
            yield from term_vars(a)


_BARE_CONST = re.compile(r"^(?:[A-Z][A-Za-z0-9_]*(?:\^[A-Za-z]+)?'*|-?\d+(?:\.\d+)?)$")


def format_term(t) -> str:
    if not isinstance(t, str):
        return str(t)
    if _BARE_CONST.match(t):
        return t
    return '"' + t.replace("\\", "\\\\").replace('"', '\\"') + '"'


def compare(left, op: str, right) -> bool:
    """Evaluate a ground comparison.  Nulls compare as unknown, hence false."""
    if not (is_const(left) and is_const(right)):
        if op == "=" and left == right and not isinstance(left, Var):
            return True
        return False
    if op == "=":
        return left == right
    if op == "<=":
        return left <= right
    if op == "<":
        return left < right
    raise ValueError(f"unknown comparison operator {op!r}")


# -- substitutions -----------------------------------------------------------

Subst = Mapping[Var, Term]


def walk(t, subst: Subst):
    while type(t) is Var and t in subst:
        t = subst[t]
    return t


def resolve(t, subst: Subst):
    """Apply a triangular substitution all the way down."""
    if type(t) is str:
        return t
    t = walk(t, subst)
    if isinstance(t, Skolem):
        return Skolem(t.rule, t.var, tuple(resolve(a, subst) for a in t.args))
    return t


def resolve_atom(atom: Atom, subst: Subst) -> Atom:
    return Atom(atom.pred, tuple(resolve(a, subst) for a in atom.args), atom.negated)


def occurs(v: Var, t, subst: Subst) -> bool:
    t = walk(t, subst)
    if t == v:
        return True
    if isinstance(t, Skolem):
        return any(occurs(v, a, subst) for a in t.args)
    return False


def unify(a, b, subst: dict) -> dict | None:
    """Most general unifier extending ``subst`` (copied), or None."""
    s = dict(subst)
    stack = [(a, b)]
    while stack:
        x, y = stack.pop()
        x, y = walk(x, s), walk(y, s)
        if x == y:
            continue
        if isinstance(x, Var):
            if occurs(x, y, s):
                return None
            s[x] = y
        elif isinstance(y, Var):
            if occurs(y, x, s):
                return None
            s[y] = x
        elif isinstance(x, Skolem) and isinstance(y, Skolem):
            if (x.rule, x.var, len(x.args)) != (y.rule, y.var, len(y.args)):
                return None
            stack.extend(zip(x.args, y.args))
        else:
            return None
    return s


def unify_atoms(a: Atom, b: Atom, subst: dict) -> dict | None:
    if a.pred != b.pred or len(a.args) != len(b.args):
        return None
    return unify(Skolem("", "", a.args), Skolem("", "", b.args), subst)


def match_fact(atom: Atom, fact: tuple, subst: dict) -> dict | None:
    """One-way matching of ``atom`` onto a ground tuple."""
    s = None
    for arg, val in zip(atom.args, fact):
        arg = walk(arg, s if s is not None else subst)
        if isinstance(arg, Var):
            if s is None:
                s = dict(subst)
            s[arg] = val
        elif isinstance(arg, Skolem):
            u = unify(arg, val, s if s is not None else subst)
            if u is None:
                return None
            s = u
        elif arg != val:
            return None
    return s if s is not None else dict(subst)


def rename(atoms: Iterable[Atom], suffix: str) -> list[Atom]:
    def ren(t):
        if isinstance(t, Var):
            return Var(f"{t.name}#{suffix}")
        if isinstance(t, Skolem):
            return Skolem(t.rule, t.var, tuple(ren(a) for a in t.args))
        return t

    return [Atom(a.pred, tuple(ren(x) for x in a.args), a.negated) for a in atoms]
