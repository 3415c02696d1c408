"""Ontology DSL (``.mdq``) parser, pretty-printer and CSV data loader.

Grammar sketch, one statement per ``.``-terminated line group::

    dimension Hospital.
    category Ward in Hospital = {W1, W2}.
    rollup UnitWard: Ward -> Unit = {W1 -> Standard, W2 -> Standard}.
    relation PatientWard(ward: Ward, day: Day; patient).
    predicate TakenByNurse(time, patient, nurse, status).
    tgd up: PatientUnit(u, d; p) <- PatientWard(w, d; p), UnitWard(u, w).
    tgd down: exists z: Shifts(w, d; n, z) <- WorkingSchedules(u, d; n, t), UnitWard(u, w).
    egd same: t = t2 <- Thermometer(w, t; n), Thermometer(w2, t2; n2), UnitWard(u, w), UnitWard(u, w2).
    nc ref: <- PatientUnit(u, d; p), not Unit(u).
    query MarkShifts(d) <- Shifts(W1, d, Mark, s).
    data Shifts from "shifts.csv".
    map Measurements(t, p, v) -> Measurements^c(t, p, v).
    quality Measurements -> Measurements^q.
    import "other.mdq".

Identifiers starting with a lowercase letter or ``_`` are variables; capitalised
identifiers, numbers and double-quoted strings are constants.
"""
from __future__ import annotations

import csv
import os
import re
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

from .model import (
    ArityMismatch,
    Attribute,
    CategoricalRelationSchema,
    Database,
    DimensionInstance,
    DimensionSchema,
    EdgePredicate,
    MDSchema,
    RollupPair,
    UnknownPredicate,
    dimension_facts,
)
from .rules import ConjunctiveQuery, ContextPair, Ontology, Rule, format_rule
from .terms import Atom, Comparison, Var, format_term, term_vars


@dataclass(frozen=True)
class Diagnostic:
    line: int
    col: int
    message: str
    file: str = "<input>"

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.col}: {self.message}"


class ParseError(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("\n".join(str(d) for d in diagnostics))


class DSLSyntaxError(ParseError):
    pass


class ScopeError(ParseError):
    pass


_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r\f]+)
  | (?P<nl>\n)
  | (?P<comment>[%\#][^\n]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<op><-|->|<=|>=|[(),;.:={}<>])
  | (?P<number>-?\d+(?:\.\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*(?:\^[A-Za-z]+)?'*)
""", re.VERBOSE)

KEYWORDS = {"dimension", "category", "rollup", "relation", "predicate", "tgd", "egd",
            "nc", "query", "data", "map", "quality", "import"}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str, file: str = "<input>") -> list[Token]:
    out = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise DSLSyntaxError([Diagnostic(line, pos - line_start + 1,
                                             f"unexpected character {text[pos]!r}", file)])
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            out.append(Token(kind, m.group(), line, m.start() - line_start + 1))
        pos = m.end()
    out.append(Token("eof", "", line, pos - line_start + 1))
    return out


def _unquote(s: str) -> str:
    return re.sub(r"\\(.)", r"\1", s[1:-1])


class _Syntax(Exception):
    def __init__(self, tok: Token, message: str):
        self.tok = tok
        self.message = message


@dataclass
class _Stmt:
    keyword: str
    tok: Token
    data: dict
    file: str = "<input>"


class _Parser:
    def __init__(self, tokens: list[Token], file: str):
        self.toks = tokens
        self.i = 0
        self.file = file
        self.anon = 0

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        return self.tok.kind == "op" and self.tok.text == text

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise _Syntax(self.tok, f"expected {text!r}, found {self.tok.text or 'end of input'!r}")
        t = self.tok
        self.i += 1
        return t

    def ident(self, what: str = "identifier") -> Token:
        if self.tok.kind != "ident":
            raise _Syntax(self.tok, f"expected {what}, found {self.tok.text or 'end of input'!r}")
        t = self.tok
        self.i += 1
        return t

    def string(self) -> str:
        if self.tok.kind != "string":
            raise _Syntax(self.tok, "expected a quoted string")
        t = self.tok
        self.i += 1
        return _unquote(t.text)

    # -- grammar
    def program(self) -> tuple[list[_Stmt], list[Diagnostic]]:
        stmts, diags = [], []
        while self.tok.kind != "eof":
            start = self.i
            try:
                stmts.append(self.statement())
            except _Syntax as e:
                diags.append(Diagnostic(e.tok.line, e.tok.col, e.message, self.file))
                # resynchronise after the next terminator
                self.i = max(self.i, start + 1)
                while self.tok.kind != "eof" and not self.at("."):
                    self.i += 1
                if self.at("."):
                    self.i += 1
        return stmts, diags

    def statement(self) -> _Stmt:
        tok = self.tok
        if tok.kind != "ident" or tok.text not in KEYWORDS:
            raise _Syntax(tok, f"expected a statement keyword, found {tok.text!r}")
        self.i += 1
        self.anon = 0
        data = getattr(self, "_" + tok.text)()
        self.expect(".")
        return _Stmt(tok.text, tok, data, self.file)

    def _dimension(self):
        return {"name": self.ident("dimension name")}

    def _category(self):
        name = self.ident("category name")
        if self.tok.kind != "ident" or self.tok.text != "in":
            raise _Syntax(self.tok, "expected 'in <dimension>'")
        self.i += 1
        dim = self.ident("dimension name")
        members = []
        if self.at("="):
            self.i += 1
            self.expect("{")
            if not self.at("}"):
                members.append(self.constant())
                while self.at(","):
                    self.i += 1
                    members.append(self.constant())
            self.expect("}")
        return {"name": name, "dimension": dim, "members": members}

    def _rollup(self):
        pred = None
        if self.tok.kind == "ident" and self.peek().kind == "op" and self.peek().text == ":":
            pred = self.ident()
            self.i += 1
        child = self.ident("child category")
        self.expect("->")
        parent = self.ident("parent category")
        pairs = []
        if self.at("="):
            self.i += 1
            self.expect("{")
            while not self.at("}"):
                c = self.constant()
                self.expect("->")
                p = self.constant()
                pairs.append((c, p))
                if not self.at(","):
                    break
                self.i += 1
            self.expect("}")
        return {"pred": pred, "child": child, "parent": parent, "pairs": pairs}

    def _relation(self):
        name = self.ident("relation name")
        self.expect("(")
        cat, noncat = [], []
        section = cat
        while not self.at(")"):
            attr = self.ident("attribute name")
            kind = None
            if self.at(":"):
                self.i += 1
                kind = self.ident("category or domain tag")
            section.append((attr, kind))
            if self.at(","):
                self.i += 1
            elif self.at(";"):
                if section is noncat:
                    raise _Syntax(self.tok, "only one ';' allowed in a relation schema")
                self.i += 1
                section = noncat
            elif not self.at(")"):
                raise _Syntax(self.tok, "expected ',', ';' or ')'")
        self.expect(")")
        return {"name": name, "categorical": cat, "noncategorical": noncat}

    def _predicate(self):
        name = self.ident("predicate name")
        self.expect("(")
        attrs = []
        while not self.at(")"):
            attrs.append(self.ident("attribute name"))
            if not self.at(","):
                break
            self.i += 1
        self.expect(")")
        return {"name": name, "attributes": attrs}

    def label(self) -> Token | None:
        if (self.tok.kind == "ident" and self.tok.text != "exists"
                and self.peek().kind == "op" and self.peek().text == ":"):
            t = self.ident()
            self.i += 1
            return t
        return None

    def _tgd(self):
        label = self.label()
        existentials = []
        if self.tok.kind == "ident" and self.tok.text == "exists":
            self.i += 1
            existentials.append(self.variable())
            while self.at(","):
                self.i += 1
                existentials.append(self.variable())
            self.expect(":")
        head = [self.atom()]
        while self.at(","):
            self.i += 1
            head.append(self.atom())
        self.expect("<-")
        body, comps = self.body()
        return {"label": label, "existentials": existentials, "head": head, "body": body, "comparisons": comps}

    def _egd(self):
        label = self.label()
        left = self.term()
        self.expect("=")
        right = self.term()
        self.expect("<-")
        body, comps = self.body()
        return {"label": label, "equality": (left, right), "body": body, "comparisons": comps}

    def _nc(self):
        label = self.label()
        self.expect("<-")
        body, comps = self.body()
        return {"label": label, "body": body, "comparisons": comps}

    def _query(self):
        head = self.atom()
        self.expect("<-")
        body, comps = self.body()
        return {"head": head, "body": body, "comparisons": comps}

    def _data(self):
        pred = self.ident("predicate name")
        if self.tok.kind != "ident" or self.tok.text != "from":
            raise _Syntax(self.tok, "expected 'from \"file\"'")
        self.i += 1
        return {"pred": pred, "file": self.string()}

    def _map(self):
        base = self.atom()
        self.expect("->")
        ctx = self.atom()
        return {"base": base, "context": ctx}

    def _quality(self):
        base = self.ident("base predicate")
        self.expect("->")
        q = self.ident("quality predicate")
        return {"base": base, "quality": q}

    def _import(self):
        return {"file": self.string(), "tok": self.tok}

    # -- terms and literals
    def variable(self) -> Var:
        t = self.ident("variable")
        if not _is_var_name(t.text):
            raise _Syntax(t, f"{t.text!r} is not a variable name")
        return Var(t.text)

    def constant(self) -> str:
        t = self.tok
        if t.kind == "string":
            self.i += 1
            return _unquote(t.text)
        if t.kind == "number" or (t.kind == "ident" and not _is_var_name(t.text)):
            self.i += 1
            return t.text
        raise _Syntax(t, f"expected a constant, found {t.text or 'end of input'!r}")

    def term(self):
        t = self.tok
        if t.kind == "ident" and _is_var_name(t.text):
            self.i += 1
            if t.text == "_":
                self.anon += 1
                return Var(f"_{self.anon}")
            return Var(t.text)
        return self.constant()

    def atom(self, negated: bool = False) -> tuple[Atom, Token]:
        name = self.ident("predicate name")
        self.expect("(")
        args = []
        while not self.at(")"):
            args.append(self.term())
            if self.at(",") or self.at(";"):
                self.i += 1
            elif not self.at(")"):
                raise _Syntax(self.tok, "expected ',', ';' or ')' in atom")
        self.expect(")")
        return Atom(name.text, tuple(args), negated), name

    def body(self):
        atoms, comps = [], []
        while True:
            negated = False
            if self.tok.kind == "ident" and self.tok.text == "not" and self.peek().kind == "ident":
                self.i += 1
                negated = True
            if (self.tok.kind == "ident" and not negated and self.peek().kind == "op"
                    and self.peek().text == "("):
                atoms.append(self.atom())
            elif negated:
                atoms.append(self.atom(negated=True))
            else:
                tok = self.tok
                left = self.term()
                op = self.tok
                if op.kind != "op" or op.text not in ("=", "<=", "<", ">=", ">"):
                    raise _Syntax(op, "expected a comparison operator")
                self.i += 1
                right = self.term()
                if op.text in (">", ">="):
                    left, right = right, left
                comps.append((Comparison(left, op.text.replace(">", "<"), right), tok))
            if not self.at(","):
                break
            self.i += 1
        return atoms, comps


def _is_var_name(name: str) -> bool:
    return name[0].islower() or name[0] == "_"


# -- resolution of statements into an Ontology ----------------------------------


class _Resolver:
    def __init__(self, onto: Ontology, file: str):
        self.onto = onto
        self.file = file
        self.diags: list[Diagnostic] = []
        self.counters: dict[str, int] = defaultdict(int)

    def err(self, tok: Token, message: str) -> None:
        self.diags.append(Diagnostic(tok.line, tok.col, message, self.file))

    def run(self, stmts: list[_Stmt]) -> None:
        order = ["dimension", "category", "rollup", "relation", "predicate", "tgd", "egd",
                 "nc", "query", "data", "map", "quality"]
        by_kind = defaultdict(list)
        for s in stmts:
            by_kind[s.keyword].append(s)
        for kw in order:
            for s in by_kind[kw]:
                self.file = s.file
                getattr(self, "_" + kw)(s)

    # declarations
    def _dimension(self, s):
        name = s.data["name"].text
        schema = self.onto.schema
        if name not in schema.dimensions:
            schema.dimensions[name] = DimensionSchema(name, ())
            self.onto.instances[name] = DimensionInstance(schema.dimensions[name])

    def _category(self, s):
        d = s.data
        schema = self.onto.schema
        dim = d["dimension"].text
        if dim not in schema.dimensions:
            self.err(d["dimension"], f"undeclared dimension {dim}")
            return
        cat = d["name"].text
        owner = schema.category_dimension(cat)
        if owner is not None and owner != dim:
            self.err(d["name"], f"category {cat} already declared in dimension {owner}")
            return
        ds = schema.dimensions[dim]
        if cat not in ds.categories:
            ds = DimensionSchema(dim, ds.categories + (cat,), ds.child_parent)
            self._set_dim(ds)
        inst = self.onto.instances[dim]
        members = list(inst.membership.get(cat, ()))
        members += [m for m in d["members"] if m not in members]
        inst.membership[cat] = tuple(members)

    def _set_dim(self, ds: DimensionSchema) -> None:
        self.onto.schema.dimensions[ds.name] = ds
        self.onto.instances[ds.name].schema = ds

    def _rollup(self, s):
        d = s.data
        schema = self.onto.schema
        cats = schema.categories()
        child, parent = d["child"].text, d["parent"].text
        for tok in (d["child"], d["parent"]):
            if tok.text not in cats:
                self.err(tok, f"undeclared category {tok.text}")
        if child not in cats or parent not in cats:
            return
        if cats[child] != cats[parent]:
            self.err(d["child"], f"categories {child} and {parent} belong to different dimensions")
            return
        dim = cats[child]
        name = d["pred"].text if d["pred"] else parent + child
        existing = schema.edge_predicate(child, parent)
        if existing is None:
            if schema.kind(name) is not None:
                self.err(d["pred"] or d["child"], f"predicate {name} already declared")
                return
            schema.edges[name] = EdgePredicate(name, dim, child, parent)
            ds = schema.dimensions[dim]
            self._set_dim(DimensionSchema(dim, ds.categories, ds.child_parent + ((child, parent),)))
        elif d["pred"] and existing.name != name:
            self.err(d["pred"], f"edge {child}->{parent} already named {existing.name}")
            return
        inst = self.onto.instances[dim]
        for c, p in d["pairs"]:
            pair = RollupPair(c, p, child, parent)
            if pair not in inst.rollup_pairs:
                inst.rollup_pairs.append(pair)

    def _relation(self, s):
        d = s.data
        schema = self.onto.schema
        name = d["name"].text
        if schema.kind(name) is not None:
            self.err(d["name"], f"predicate {name} already declared")
            return
        cats = schema.categories()
        attrs = []
        for tok, kind in d["categorical"]:
            if kind is None:
                self.err(tok, f"categorical attribute {tok.text} needs a category")
                continue
            if kind.text not in cats:
                self.err(kind, f"undeclared category {kind.text}")
            attrs.append(Attribute(tok.text, category=kind.text))
        for tok, kind in d["noncategorical"]:
            attrs.append(Attribute(tok.text, domain=kind.text if kind else None))
        schema.relations[name] = CategoricalRelationSchema(name, tuple(attrs))

    def _predicate(self, s):
        d = s.data
        schema = self.onto.schema
        name = d["name"].text
        if schema.kind(name) is not None:
            self.err(d["name"], f"predicate {name} already declared")
            return
        schema.predicates[name] = tuple(t.text for t in d["attributes"])

    # rules
    def check_atom(self, atom: Atom, tok: Token) -> bool:
        arity = self.onto.schema.arity(atom.pred)
        if arity is None:
            self.err(tok, f"undeclared predicate {atom.pred}")
            return False
        if arity != len(atom.args):
            self.err(tok, f"{atom.pred} expects {arity} arguments, got {len(atom.args)}")
            return False
        return True

    def label(self, s, kind: str) -> str:
        if s.data.get("label"):
            return s.data["label"].text
        self.counters[kind] += 1
        return f"{kind}{self.counters[kind]}"

    def _body(self, s):
        atoms = [a for a, _ in s.data["body"]]
        ok = all([self.check_atom(a, t) for a, t in s.data["body"]])
        return atoms, s.data["comparisons"], ok

    def _bound_checks(self, s, atoms, comps):
        """``atoms`` are substituted body atoms (aligned with the parsed ones), ``comps`` (comparison, token) pairs."""
        bound = {v for a in atoms if not a.negated for v in a.vars()}
        for a, (_, tok) in zip(atoms, s.data["body"]):
            if a.negated:
                for v in a.vars():
                    if v not in bound:
                        self.err(tok, f"variable {v} in negated atom is not bound by a positive atom")
        for c, tok in comps:
            for v in c.vars():
                if v not in bound:
                    self.err(tok, f"variable {v} in comparison is not bound by a body atom")
        return bound

    def _tgd(self, s):
        atoms, comps, ok = self._body(s)
        head = [a for a, _ in s.data["head"]]
        ok = all([self.check_atom(a, t) for a, t in s.data["head"]]) and ok
        ex = tuple(s.data["existentials"])
        sub, comps = _absorb_equalities(comps)
        atoms = [_subst_atom(a, sub) for a in atoms]
        head = [_subst_atom(a, sub) for a in head]
        if not ok:
            return
        bound = self._bound_checks(s, atoms, comps)
        for v in ex:
            if v in bound:
                self.err(s.tok, f"existential variable {v} also occurs in the body")
        for a, (_, tok) in zip(head, s.data["head"]):
            for v in a.vars():
                if v not in bound and v not in ex:
                    self.err(tok, f"head variable {v} is neither bound in the body nor declared existential")
        if any(a.negated for a in atoms):
            self.err(s.tok, "negation is only allowed in negative constraints")
        self.onto.rules.append(Rule("tgd", self.label(s, "tgd"), tuple(atoms), tuple(head),
                                    tuple(c for c, _ in comps), ex, line=s.tok.line))

    def _egd(self, s):
        atoms, comps, ok = self._body(s)
        left, right = s.data["equality"]
        sub, comps = _absorb_equalities(comps)
        atoms = [_subst_atom(a, sub) for a in atoms]
        left, right = _subst_term(left, sub), _subst_term(right, sub)
        if not ok:
            return
        bound = self._bound_checks(s, atoms, comps)
        for t in (left, right):
            for v in term_vars(t):
                if v not in bound:
                    self.err(s.tok, f"equated variable {v} is not bound in the body")
        self.onto.constraints.append(Rule("egd", self.label(s, "egd"), tuple(atoms), (), tuple(c for c, _ in comps),
                                          equality=(left, right), line=s.tok.line))

    def _nc(self, s):
        atoms, comps, ok = self._body(s)
        sub, comps = _absorb_equalities(comps)
        atoms = [_subst_atom(a, sub) for a in atoms]
        if not ok:
            return
        self._bound_checks(s, atoms, comps)
        self.onto.constraints.append(Rule("nc", self.label(s, "nc"), tuple(atoms), (), tuple(c for c, _ in comps),
                                          line=s.tok.line))

    def _query(self, s):
        atoms, comps, ok = self._body(s)
        head, htok = s.data["head"]
        sub, comps = _absorb_equalities(comps)
        atoms = [_subst_atom(a, sub) for a in atoms]
        answer = tuple(_subst_term(t, sub) for t in head.args)
        if not ok:
            return
        if any(a.negated for a in atoms):
            self.err(htok, "negation is not allowed in queries")
        bound = self._bound_checks(s, atoms, comps)
        for t in answer:
            for v in term_vars(t):
                if v not in bound:
                    self.err(htok, f"answer variable {v} does not occur in the query body")
        if head.pred in self.onto.queries:
            self.err(htok, f"query {head.pred} defined twice")
        self.onto.queries[head.pred] = ConjunctiveQuery(head.pred, answer, tuple(atoms), tuple(c for c, _ in comps))

    def _data(self, s):
        pred = s.data["pred"]
        if self.onto.schema.kind(pred.text) is None:
            self.err(pred, f"undeclared predicate {pred.text}")
            return
        self.onto.data_bindings[pred.text] = s.data["file"]

    def _map(self, s):
        base, btok = s.data["base"]
        ctx, ctok = s.data["context"]
        if not (self.check_atom(base, btok) and self.check_atom(ctx, ctok)):
            return
        pos = {}
        for i, t in enumerate(base.args):
            if not isinstance(t, Var) or t in pos:
                self.err(btok, "base side of a mapping must list distinct variables")
                return
            pos[t] = i
        corr, used = [], set()
        for t in ctx.args:
            if not isinstance(t, Var):
                self.err(ctok, "context side of a mapping must list variables")
                return
            if t in pos:
                if t in used:
                    self.err(ctok, f"base attribute {t} mapped twice")
                    return
                used.add(t)
            corr.append(pos.get(t))
        if len(used) != len(pos):
            self.err(ctok, "every base attribute must be mapped")
            return
        self.onto.mappings.append(ContextPair(base.pred, ctx.pred, tuple(corr), len(base.args)))

    def _quality(self, s):
        base, q = s.data["base"], s.data["quality"]
        schema = self.onto.schema
        for tok in (base, q):
            if schema.kind(tok.text) is None:
                self.err(tok, f"undeclared predicate {tok.text}")
                return
        if schema.arity(base.text) != schema.arity(q.text):
            self.err(q, f"quality version {q.text} must have the arity of {base.text}")
            return
        self.onto.quality[base.text] = q.text


def _subst_term(t, sub):
    while isinstance(t, Var) and t in sub:
        t = sub[t]
    return t


def _subst_atom(a: Atom, sub) -> Atom:
    return Atom(a.pred, tuple(_subst_term(t, sub) for t in a.args), a.negated)


def _absorb_equalities(comps):
    """Eliminate ``x = t`` comparisons by substitution; the rest are kept.

    ``comps`` holds (comparison, token) pairs; so does the returned remainder.
    """
    sub: dict[Var, object] = {}
    rest = []
    for c, tok in comps:
        left, right = _subst_term(c.left, sub), _subst_term(c.right, sub)
        if c.op == "=" and (isinstance(left, Var) or isinstance(right, Var)):
            if left == right:
                continue
            if isinstance(left, Var):
                sub[left] = right
            else:
                sub[right] = left
        else:
            rest.append((c, tok))
    rest = [(Comparison(_subst_term(c.left, sub), c.op, _subst_term(c.right, sub)), tok) for c, tok in rest]
    return sub, rest


def parse_program(text: str, base: Ontology | None = None, *, file: str = "<input>",
                  path: str | os.PathLike | None = None) -> Ontology:
    """Parse DSL text into an Ontology, extending ``base`` (copied) when given.

    Raises DSLSyntaxError or ScopeError carrying every diagnostic found.
    """
    import copy

    onto = copy.deepcopy(base) if base is not None else Ontology()
    stmts = _collect(text, file, Path(path).parent if path else Path("."), set())
    res = _Resolver(onto, file)
    res.run(stmts)
    if res.diags:
        raise ScopeError(sorted(res.diags, key=lambda d: (d.file, d.line, d.col)))
    return onto


def _collect(text: str, file: str, root: Path, seen: set) -> list[_Stmt]:
    parser = _Parser(tokenize(text, file), file)
    stmts, diags = parser.program()
    if diags:
        raise DSLSyntaxError(diags)
    out = []
    for s in stmts:
        if s.keyword == "import":
            target = (root / s.data["file"]).resolve()
            if target in seen:
                continue
            seen.add(target)
            if not target.exists():
                raise DSLSyntaxError([Diagnostic(s.tok.line, s.tok.col, f"cannot import {s.data['file']}", file)])
            out.extend(_collect(target.read_text(encoding="utf-8"), str(target), target.parent, seen))
        else:
            out.append(s)
    return out


def parse_file(path: str | os.PathLike, base: Ontology | None = None) -> Ontology:
    path = Path(path)
    return parse_program(path.read_text(encoding="utf-8"), base, file=str(path), path=path)


# -- pretty printer -----------------------------------------------------------------


def format_program(onto: Ontology) -> str:
    """Render an Ontology back to DSL text; parsing the result yields an equal Ontology."""
    schema = onto.schema
    lines = []
    for dim in schema.dimensions.values():
        lines.append(f"dimension {dim.name}.")
        inst = onto.instances.get(dim.name)
        for cat in dim.categories:
            members = inst.membership.get(cat, ()) if inst else ()
            lines.append(f"category {cat} in {dim.name} = {{{', '.join(format_term(m) for m in members)}}}.")
        for child, parent in dim.child_parent:
            e = schema.edge_predicate(child, parent)
            pairs = [p for p in (inst.rollup_pairs if inst else [])
                     if (p.child_category, p.parent_category) == (child, parent)]
            body = ", ".join(f"{format_term(p.child)} -> {format_term(p.parent)}" for p in pairs)
            lines.append(f"rollup {e.name}: {child} -> {parent} = {{{body}}}.")
    for rel in schema.relations.values():
        cat = [f"{a.name}: {a.category}" for a in rel.attributes if a.categorical]
        non = [a.name + (f": {a.domain}" if a.domain else "") for a in rel.attributes if not a.categorical]
        lines.append(f"relation {rel.name}({', '.join(cat)}; {', '.join(non)}).")
    for name, attrs in schema.predicates.items():
        lines.append(f"predicate {name}({', '.join(attrs)}).")
    # statements are resolved grouped by kind, so emit them in that order
    for r in [*onto.rules, *(c for c in onto.constraints if c.kind == "egd"),
              *(c for c in onto.constraints if c.kind != "egd")]:
        lines.append(format_rule(r))
    for q in onto.queries.values():
        lines.append(f"query {q}.")
    for pred, f in onto.data_bindings.items():
        lines.append(f'data {pred} from "{f}".')
    for m in onto.mappings:
        base_vars = [f"x{i}" for i in range(m.base_arity)]
        fresh = iter(f"y{i}" for i in range(len(m.correspondence)))
        ctx = [base_vars[c] if c is not None else next(fresh) for c in m.correspondence]
        lines.append(f"map {m.base}({', '.join(base_vars)}) -> {m.context}({', '.join(ctx)}).")
    for b, q in onto.quality.items():
        lines.append(f"quality {b} -> {q}.")
    return "\n".join(lines) + ("\n" if lines else "")


# -- data loading ----------------------------------------------------------------------


def load_data(onto: Ontology, tables: Mapping[str, Iterable[Iterable[str]]],
              include_dimensions: bool = True) -> Database:
    """Build a Database from raw rows (set semantics, no referential filtering)."""
    schema = onto.schema
    db = dimension_facts(schema, onto.instances) if include_dimensions else Database(schema.arities())
    for pred, rows in tables.items():
        arity = schema.arity(pred)
        if arity is None:
            raise UnknownPredicate(pred)
        db.declare(pred, arity)
        for n, row in enumerate(rows, start=1):
            row = tuple(str(v).strip() for v in row)
            if len(row) != arity:
                raise ArityMismatch(f"{pred} row {n}: expected {arity} values, got {len(row)}")
            db.add(pred, row)
    return db


def read_tables(onto: Ontology, data_dir: str | os.PathLike) -> dict[str, list[list[str]]]:
    """Read the CSV file bound to each predicate (default ``<dir>/<Pred>.csv``)."""
    data_dir = Path(data_dir)
    preds = [*onto.schema.relations, *onto.schema.predicates]
    tables = {}
    for pred in preds:
        f = data_dir / onto.data_bindings.get(pred, f"{pred}.csv")
        if not f.exists():
            if pred in onto.data_bindings:
                raise FileNotFoundError(f)
            continue
        with open(f, newline="", encoding="utf-8") as fh:
            tables[pred] = [row for row in csv.reader(fh) if row]
    return tables
