import random

import pytest

from gen import FIXTURES, hospital, random_ws_ontology
from mdq.model import ArityMismatch, UnknownPredicate
from mdq.parser import (
    DSLSyntaxError,
    ParseError,
    ScopeError,
    format_program,
    load_data,
    parse_file,
    parse_program,
    read_tables,
)
from mdq.terms import Atom, Comparison, Var


def test_fixture_contents(hospital):
    s = hospital.schema
    assert set(s.dimensions) == {"Hospital", "Time", "Instrument"}
    assert s.relations["Shifts"].arity == 4
    assert [a.categorical for a in s.relations["Shifts"].attributes] == [True, True, False, False]
    assert [r.label for r in hospital.rules] == ["patient_unit", "unit_shifts"]
    assert [r.label for r in hospital.constraints] == [
        "same_thermometer", "patient_unit_ref", "patient_ward_ref", "shifts_ref", "intensive_closed"]
    shifts = hospital.rule("unit_shifts")
    assert shifts.existentials == (Var("z"),)
    assert shifts.head == (Atom("Shifts", (Var("w"), Var("d"), Var("n"), Var("z"))),)


def test_query_equalities_are_absorbed(hospital):
    q = hospital.queries["TomWaitsNoon"]
    assert q.body == (Atom("Measurements", (Var("t"), "TomWaits", Var("v"))),)
    assert q.answer == (Var("t"), "TomWaits", Var("v"))
    assert q.comparisons == (Comparison("2005-09-05T11:45", "<=", Var("t")),
                             Comparison(Var("t"), "<=", "2005-09-05T12:15"))


def test_greater_than_is_flipped(hospital):
    nc = hospital.rule("intensive_closed")
    assert nc.comparisons == (Comparison("2005-08", "<", Var("m")),)


def test_import_and_base_are_not_mutated(hospital):
    d = parse_file(FIXTURES / "discharge.mdq")
    assert "discharge_unit" in [r.label for r in d.rules]
    ext = parse_program("query Extra(p) <- PatientWard(w, d, p).", hospital)
    assert "Extra" in ext.queries and "Extra" not in hospital.queries


def test_round_trip_fixture():
    for name in ("hospital.mdq", "discharge.mdq"):
        onto = parse_file(FIXTURES / name)
        again = parse_program(format_program(onto))
        assert again.rules == onto.rules
        assert again.constraints == onto.constraints
        assert again.queries == onto.queries
        assert again.schema == onto.schema


@pytest.mark.parametrize("seed", range(40))
def test_round_trip_random_ontologies(seed):
    onto = random_ws_ontology(random.Random(seed), hospital())
    again = parse_program(format_program(onto))
    assert again.rules == onto.rules
    assert set(again.constraints) == set(onto.constraints)


def test_empty_program():
    assert parse_program("% nothing here\n").is_empty()


def test_default_labels():
    o = parse_program("predicate P(a).\ntgd P(x) <- P(x), x = A.\negd a = b <- P(a), P(b).\nnc <- P(x).")
    assert [r.label for r in [*o.rules, *o.constraints]] == ["tgd1", "egd1", "nc1"]
    assert o.rules[0].body == (Atom("P", ("A",)),)


def test_syntax_error_position():
    with pytest.raises(DSLSyntaxError) as exc:
        parse_program("predicate P(a).\ntgd r1: P(x) <- P(x\n.")
    (d,) = exc.value.diagnostics
    assert (d.line, d.col) == (3, 1)


def test_syntax_errors_recover_at_statement_end():
    with pytest.raises(ParseError) as exc:
        parse_program("predicate P(a.\npredicate Q(b).\ntgd r: <- .\n")
    assert len(exc.value.diagnostics) == 2


@pytest.mark.parametrize("text, fragment", [
    ("predicate P(a).\ntgd r: Q(x) <- P(x).", "undeclared predicate Q"),
    ("predicate P(a).\ntgd r: P(x, y) <- P(x).", "expects 1 arguments"),
    ("predicate P(a). predicate Q(a, b).\ntgd r: Q(x, y) <- P(x).", "head variable y"),
    ("predicate P(a).\ntgd r: exists x: P(x) <- P(x).", "existential variable x"),
    ("predicate P(a).\ntgd r: P(x) <- P(x), not P(x).", "negation is only allowed"),
    ("predicate P(a).\nquery Q(x) <- P(x).\nquery Q(x) <- P(x).", "defined twice"),
    ("predicate P(a).\nquery Q(x) <- P(x), y < x.", "variable y in comparison"),
    ("predicate P(a).\nquery Q(y) <- P(x).", "answer variable y"),
])
def test_scope_errors(text, fragment):
    with pytest.raises(ScopeError) as exc:
        parse_program(text)
    assert any(fragment in d.message for d in exc.value.diagnostics)


def test_load_data_errors(hospital):
    with pytest.raises(ArityMismatch, match="row 2"):
        load_data(hospital, {"PatientWard": [["W1", "2005-09-05", "A"], ["W1", "x"]]})
    with pytest.raises(UnknownPredicate):
        load_data(hospital, {"Nope": [["a"]]})


def test_read_tables(hospital):
    tables = read_tables(hospital, FIXTURES / "data")
    assert len(tables["Measurements"]) == 6
    assert tables["PatientWard"][2] == ["W3", "2005-09-07", "TomWaits"]
    db = load_data(hospital, tables)
    assert len(db.tuples("WorkingSchedules")) == 5
