"""Random ontologies and instances over the hospital schema, for property tests."""
from __future__ import annotations

import copy
import random
from pathlib import Path

from mdq.model import Database, MDSchema
from mdq.parser import load_data, parse_file, parse_program
from mdq.rules import Ontology, Rule
from mdq.terms import Atom, Comparison, Var

FIXTURES = Path(__file__).resolve().parent.parent / "src" / "mdq" / "fixtures" / "hospital"

PATIENTS = ["TomWaits", "LouReed", "ElvisCostello"]
NURSES = ["Mark", "Helen", "Cathy", "Susan"]
VALUES = {
    "patient": PATIENTS,
    "nurse": NURSES,
    "shift": ["morning", "night"],
    "type": ["Certified", "NonCertified"],
}


def hospital() -> Ontology:
    return parse_file(FIXTURES / "hospital.mdq")


def domain(attr) -> str:
    return attr.domain or attr.name


class _Vars:
    def __init__(self):
        self.n = 0

    def __call__(self, prefix="v") -> Var:
        self.n += 1
        return Var(f"{prefix}{self.n}")


def _parent(schema: MDSchema, cat: str) -> str | None:
    dim = schema.dimensions[schema.category_dimension(cat)]
    ps = [p for c, p in dim.child_parent if c == cat]
    return ps[0] if ps else None


def _ancestors_chain(schema: MDSchema, cat: str) -> list[str]:
    out = [cat]
    while (p := _parent(schema, out[-1])) is not None:
        out.append(p)
    return out


def _path(schema: MDSchema, fresh, start: Var, cb: str, ch: str) -> tuple[Var, list[Atom]] | None:
    """Rollup atoms leading from a ``cb`` member to a ``ch`` member."""
    up = _ancestors_chain(schema, cb)
    if ch in up:
        cats, direction = up[: up.index(ch) + 1], "up"
    else:
        down = _ancestors_chain(schema, ch)
        if cb not in down:
            return None
        cats, direction = list(reversed(down[: down.index(cb) + 1])), "down"
    atoms, cur = [], start
    for a, b in zip(cats, cats[1:]):
        nxt = fresh("c")
        if direction == "up":
            e = schema.edge_predicate(a, b)
            atoms.append(Atom(e.name, (nxt, cur)))
        else:
            e = schema.edge_predicate(b, a)
            atoms.append(Atom(e.name, (cur, nxt)))
        cur = nxt
    return cur, atoms


def _members(onto: Ontology, cat: str) -> list[str]:
    inst = onto.instances[onto.schema.category_dimension(cat)]
    return list(inst.membership[cat])


def _body_atom(schema: MDSchema, rel: str, fresh) -> tuple[Atom, list, list]:
    attrs = schema.relations[rel].attributes
    args, cats, noncats = [], [], []
    for a in attrs:
        v = fresh("c" if a.category else "x")
        args.append(v)
        (cats if a.category else noncats).append((v, a))
    return Atom(rel, tuple(args)), cats, noncats


def random_dimensional_tgd(rng: random.Random, onto: Ontology, label: str) -> Rule:
    """Single categorical head atom, rollup navigation, shared variables categorical only."""
    schema = onto.schema
    fresh = _Vars()
    rels = sorted(schema.relations)
    head_rel = rng.choice(rels)
    body, cats, noncats = [], [], []
    a, c, n = _body_atom(schema, rng.choice(rels), fresh)
    body.append(a)
    cats += c
    noncats += n
    if rng.random() < 0.3:
        a2, c2, n2 = _body_atom(schema, rng.choice(rels), fresh)
        join = [(v2, v1) for v2, at2 in c2 for v1, at1 in c if at1.category == at2.category]
        if join:
            v2, v1 = rng.choice(join)
            a2 = Atom(a2.pred, tuple(v1 if t == v2 else t for t in a2.args))
            c2 = [(v1 if v == v2 else v, at) for v, at in c2]
            body.append(a2)
            cats += c2
            noncats += n2
    head_args, existentials = [], []
    for attr in schema.relations[head_rel].attributes:
        if attr.category:
            options = [(v, at.category) for v, at in cats
                       if schema.category_dimension(at.category) == schema.category_dimension(attr.category)]
            rng.shuffle(options)
            chosen = None
            for v, cb in options:
                if rng.random() < 0.9:
                    chosen = _path(schema, fresh, v, cb, attr.category)
                    if chosen:
                        break
            if chosen is None:
                head_args.append(rng.choice(_members(onto, attr.category)))
            else:
                end, atoms = chosen
                body.extend(atoms)
                head_args.append(end)
        else:
            same = [v for v, at in noncats if domain(at) == domain(attr)]
            if same and rng.random() < 0.75:
                head_args.append(rng.choice(same))
            else:
                z = fresh("z")
                existentials.append(z)
                head_args.append(z)
    return Rule("tgd", label, tuple(body), (Atom(head_rel, tuple(head_args)),), (), tuple(existentials))


def _downcast_options(schema: MDSchema):
    """(head relation, position, body relation, parent category) combinations that
    keep every body category at or above the head categories of its dimension."""
    out = []
    for h in sorted(schema.relations):
        hattrs = schema.relations[h].attributes
        for i, attr in enumerate(hattrs):
            p = _parent(schema, attr.category) if attr.category else None
            if p is None:
                continue
            for b in sorted(schema.relations):
                battrs = schema.relations[b].attributes
                if not any(at.category == p for at in battrs):
                    continue
                ok = all(
                    at.category in _ancestors_chain(schema, other.category)
                    for other in hattrs if other.category
                    for at in battrs if at.category
                    and schema.category_dimension(at.category) == schema.category_dimension(other.category))
                if ok:
                    out.append((h, i, b, p))
    return out


def random_downcast_tgd(rng: random.Random, onto: Ontology, label: str) -> Rule | None:
    """Existential category member below a body member, linked by a rollup head atom."""
    schema = onto.schema
    options = _downcast_options(schema)
    if not options:
        return None
    h, i, b, p = rng.choice(options)
    fresh = _Vars()
    atom, cats, noncats = _body_atom(schema, b, fresh)
    x = next(v for v, at in cats if at.category == p)
    z = fresh("w")
    existentials = [z]
    head_args = []
    for j, attr in enumerate(schema.relations[h].attributes):
        if j == i:
            head_args.append(z)
        elif attr.category:
            same = [v for v, at in cats if at.category == attr.category]
            head_args.append(rng.choice(same) if same else rng.choice(_members(onto, attr.category)))
        else:
            same = [v for v, at in noncats if domain(at) == domain(attr)]
            if same and rng.random() < 0.8:
                head_args.append(rng.choice(same))
            else:
                e = fresh("z")
                existentials.append(e)
                head_args.append(e)
    edge = schema.edge_predicate(schema.relations[h].attributes[i].category, p)
    head = (Atom(edge.name, (x, z)), Atom(h, tuple(head_args)))
    return Rule("tgd", label, (atom,), head, (), tuple(existentials))


def random_constraint(rng: random.Random, onto: Ontology, label: str) -> Rule:
    schema = onto.schema
    fresh = _Vars()
    rel = rng.choice(sorted(schema.relations))
    atom, cats, noncats = _body_atom(schema, rel, fresh)
    kind = rng.choice(["referential", "egd", "nc"])
    if kind == "referential":
        v, at = rng.choice(cats)
        return Rule("nc", label, (atom, Atom(at.category, (v,), negated=True)))
    v, at = rng.choice(cats)
    p = _parent(schema, at.category)
    extra = []
    if p is not None:
        up = fresh("c")
        extra.append(Atom(schema.edge_predicate(at.category, p).name, (up, v)))
    if kind == "egd" and noncats:
        atom2, cats2, noncats2 = _body_atom(schema, rel, fresh)
        j = [k for k, (v2, at2) in enumerate(cats2) if at2.category == at.category][0]
        v2 = cats2[j][0]
        if extra:
            extra.append(Atom(extra[0].pred, (extra[0].args[0], v2)))
        else:
            atom2 = Atom(atom2.pred, tuple(v if t == v2 else t for t in atom2.args))
        k = rng.randrange(len(noncats))
        return Rule("egd", label, (atom, atom2, *extra), equality=(noncats[k][0], noncats2[k][0]))
    if extra:
        member = rng.choice(_members(onto, p))
        extra[0] = Atom(extra[0].pred, (member, v))
    return Rule("nc", label, (atom, *extra))


def random_ws_ontology(rng: random.Random, base: Ontology | None = None, max_rules: int = 6,
                       downcast_rate: float = 0.3) -> Ontology:
    onto = copy.deepcopy(base or hospital())
    onto.rules, onto.constraints, onto.queries = [], [], {}
    for k in range(rng.randint(1, max_rules)):
        if rng.random() < downcast_rate:
            r = random_downcast_tgd(rng, onto, f"g{k}") or random_dimensional_tgd(rng, onto, f"g{k}")
        else:
            r = random_dimensional_tgd(rng, onto, f"g{k}")
        onto.rules.append(r)
    for k in range(rng.randint(0, 3)):
        onto.constraints.append(random_constraint(rng, onto, f"k{k}"))
    return onto


# -- instances -------------------------------------------------------------------------


def random_rows(rng: random.Random, onto: Ontology, n_facts: int,
                relations: list[str] | None = None) -> dict[str, list[list[str]]]:
    schema = onto.schema
    rels = relations or sorted(schema.relations)
    tables: dict[str, list[list[str]]] = {r: [] for r in rels}
    for _ in range(n_facts):
        rel = rng.choice(rels)
        row = []
        for attr in schema.relations[rel].attributes:
            if attr.category:
                row.append(rng.choice(_members(onto, attr.category)))
            else:
                row.append(rng.choice(VALUES.get(domain(attr), ["a", "b"])))
        tables[rel].append(row)
    return tables


def random_instance(rng: random.Random, onto: Ontology, n_facts: int, relations=None) -> Database:
    return load_data(onto, random_rows(rng, onto, n_facts, relations))


ORACLE_EXTRA = """
tgd ward_of_unit: exists w: UnitWard(u, w), PatientWard(w, d; p) <- PatientUnit(u, d; p).
"""

ORACLE_QUERIES = """
query Q1(d) <- Shifts(W1, d, Mark, s).
query Q2(d) <- Shifts(W2, d, Mark, s).
query Q3(d) <- Shifts(W4, d, Mark, s).
query Q4(p) <- PatientUnit(Standard, "2005-09-05", p).
query Q5(u) <- PatientUnit(u, "2005-10-05", ElvisCostello).
query Q6(w, d, n) <- Shifts(w, d, n, s).
query Q7(n, s) <- Shifts(w, d, n, s).
query Q8(i, p) <- PatientUnit(u, d, p), InstitutionUnit(i, u).
query Q9(p, n) <- PatientWard(w, d, p), Shifts(w, d, n, s).
query Q10(u, p) <- PatientUnit(u, d, p), DischargePatients(i, d, p).
query Q11(d) <- Shifts(w, d, n, s), d >= "2005-09-06".
query Q12() <- PatientUnit(Intensive, d, p).
query Q13(w, p) <- PatientWard(w, d, p).
query Q14(p) <- PatientWard(w, d, p), UnitWard(Standard, w), PatientUnit(Standard, d, p).
"""


def oracle_ontologies() -> dict[str, Ontology]:
    base = parse_file(FIXTURES / "discharge.mdq")
    base = parse_program(ORACLE_QUERIES, base)
    extended = parse_program(ORACLE_EXTRA, base)
    return {"discharge": base, "discharge+ward_of_unit": extended}


def oracle_queries(onto: Ontology):
    return [q for name, q in sorted(onto.queries.items(), key=lambda kv: (len(kv[0]), kv[0]))
            if name.startswith("Q")]
