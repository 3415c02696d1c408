"""Acceptance criteria, one test each.  Every test appends a PASS/FAIL line that
is printed in the terminal summary."""
import itertools
import math
import random
import subprocess
import sys
import time
from fractions import Fraction

import conftest
from gen import FIXTURES, hospital, oracle_ontologies, oracle_queries, random_instance, random_ws_ontology
from mdq.analysis import check_separability, is_weakly_sticky
from mdq.answering import answer_cq, answer_via_chase
from mdq.chase import chase
from mdq.parser import load_data, parse_file, parse_program, read_tables
from mdq.quality import (
    ContextMapping,
    QualityDefinition,
    build_context,
    discard_violations,
    quality_assess,
)
from mdq.rules import ConjunctiveQuery
from mdq.terms import Atom, Var


def record(n: int, ok: bool, detail: str) -> None:
    conftest.ACCEPTANCE_LINES.append(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")


def _tables(onto):
    return read_tables(onto, FIXTURES / "data")


def test_criterion_1_mark_shift_dates_both_engines():
    onto = parse_file(FIXTURES / "hospital.mdq")
    db = load_data(onto, _tables(onto))
    results, worst = {}, 0.0
    for name in ("MarkShiftsW1", "MarkShiftsW2"):
        q = onto.queries[name]
        for engine, fn in (("topdown", lambda: answer_cq(db, onto.rules, q)),
                           ("chase", lambda: answer_via_chase(db, onto, q))):
            t = time.perf_counter()
            results[(name, engine)] = fn()
            worst = max(worst, time.perf_counter() - t)
    ok = all(v == {("2005-09-09",)} for v in results.values()) and worst < 2.0
    distinct = sorted({tuple(sorted(v)) for v in results.values()})
    record(1, ok, f"topdown and chase answers for W1 and W2: {distinct}, slowest run {worst:.3f}s (< 2s)")
    assert ok


def _quality_inputs():
    onto = parse_file(FIXTURES / "hospital.mdq")
    ctx = parse_file(FIXTURES / "context.mdq", onto)
    full = parse_file(FIXTURES / "quality.mdq", ctx)
    db = load_data(onto, _tables(onto))
    return onto, ctx, full, db, ContextMapping.from_ontology(ctx), QualityDefinition.from_ontology(full, ctx)


QUALITY_ROWS = {("2005-09-05T12:10", "TomWaits", "38.2"), ("2005-09-06T11:50", "TomWaits", "37.1")}


def test_criterion_2_quality_version_and_ratio():
    onto, ctx, full, db, mapping, defs = _quality_inputs()
    answers, report, versions = quality_assess(db, ctx, mapping, defs, full.queries["TomWaitsNoon"])
    ratio = report.relation("Measurements").ratio
    ok = (versions["Measurements"] == QUALITY_ROWS
          and answers == {("2005-09-05T12:10", "TomWaits", "38.2")}
          and ratio == Fraction(2, 6))
    record(2, ok, f"Measurements^q has {len(versions['Measurements'])} rows, doctor query {sorted(answers)}, "
                  f"ratio {ratio}")
    assert ok


def test_criterion_3_intensive_care_discard():
    onto, ctx, full, db, mapping, defs = _quality_inputs()
    violations = chase(db, onto).nc_violations
    target = ("PatientWard", ("W3", "2005-09-07", "TomWaits"))
    unique = len(violations) == 1 and violations[0].rule == "intensive_closed" and target in violations[0].facts
    clean, removed, _ = discard_violations(build_context(db, mapping, ctx.schema), ctx)
    proofs = {}
    qpred = defs.versions["Measurements"]
    xs = tuple(Var(f"x{i}") for i in range(3))
    sq = answer_cq(clean, [*ctx.rules, *defs.rules], ConjunctiveQuery(qpred, xs, (Atom(qpred, xs),)),
                   proofs=proofs)
    used = {(l.atom.pred, l.atom.args) for s in proofs.values() for l in s.leaves() if l.kind == "fact"}
    ok = (unique and [(d.predicate, d.tuple) for d in removed] == [target]
          and target not in used and sq == QUALITY_ROWS)
    record(3, ok, f"{len(violations)} NC violation(s) [{violations[0].rule if violations else '-'}], "
                  f"discarded {[d.tuple for d in removed]}, absent from all {len(proofs)} quality proofs")
    assert ok


COUNTEREXAMPLE = """
predicate r(a, b). predicate s(a, b).
tgd r1: exists z: r(y, z) <- r(x, y).
tgd r2: s(x, z) <- r(x, y), r(y, z).
"""


def test_criterion_4_weak_stickiness_property():
    base = hospital()
    failures = []
    for seed in range(1000):
        onto = random_ws_ontology(random.Random(seed), base)
        if not is_weakly_sticky(onto.rules):
            failures.append(seed)
    v = is_weakly_sticky(parse_program(COUNTEREXAMPLE).rules)
    counter_ok = not v and v.witness is not None and v.witness[1] == Var("y")
    ok = not failures and counter_ok
    record(4, ok, f"{1000 - len(failures)}/1000 generated ontologies weakly sticky"
                  f"{' (rejected seeds ' + ', '.join(map(str, failures)) + ')' if failures else ''}; "
                  f"counterexample rejected with witness {v.witness[1] if v.witness else None}")
    assert counter_ok, "hand-built counterexample must be rejected with witness y"
    assert not failures, (
        f"seeds {failures}: upward dimensional rules combined with downcast rules close a cycle "
        "through special edges, so a marked join variable sits only at infinite-rank positions")


def test_criterion_5_separability():
    h = parse_file(FIXTURES / "hospital.mdq")
    d = parse_file(FIXTURES / "discharge.mdq")
    without = check_separability(h.egds, h.rules, h.schema)
    with_downcast = check_separability(d.egds, d.rules, d.schema)
    ok = bool(without) and not with_downcast
    record(5, ok, f"egd with dimensional rules: {without}; with the downcast rule: {with_downcast}")
    assert ok


# -- criterion 6 -----------------------------------------------------------------------

# exhaustively enumerated: every subset of this pool
POOL = {
    "PatientWard": [["W1", "2005-09-05", "TomWaits"], ["W3", "2005-09-07", "TomWaits"]],
    "PatientUnit": [["Standard", "2005-09-05", "LouReed"]],
    "WorkingSchedules": [["Standard", "2005-09-09", "Mark", "NonCertified"],
                         ["Intensive", "2005-09-05", "Cathy", "Certified"]],
    "DischargePatients": [["H1", "2005-10-05", "ElvisCostello"], ["H2", "2005-09-05", "LouReed"]],
    "Shifts": [["W1", "2005-09-09", "Mark", "morning"]],
}


def _pool_subsets():
    flat = [(rel, row) for rel, rows in POOL.items() for row in rows]
    for mask in itertools.product((False, True), repeat=len(flat)):
        tables = {}
        for keep, (rel, row) in zip(mask, flat):
            if keep:
                tables.setdefault(rel, []).append(row)
        yield tables


def _fixture_neighbourhood(onto):
    """The 25-fact fixture instance and every instance missing one of its facts."""
    full = _tables(onto)
    flat = [(rel, row) for rel, rows in sorted(full.items()) for row in rows]
    yield full
    for skip in range(len(flat)):
        tables = {}
        for k, (rel, row) in enumerate(flat):
            if k != skip:
                tables.setdefault(rel, []).append(row)
        yield tables


def test_criterion_6_oracle_equivalence():
    ontos = oracle_ontologies()
    mismatches, checked, instances = [], 0, 0
    random_counts = {"discharge": 200, "discharge+ward_of_unit": 60}
    for name, onto in ontos.items():
        queries = oracle_queries(onto)
        families = [("pool", _pool_subsets()), ("fixture", _fixture_neighbourhood(onto))]
        rng = random.Random(2024)
        larger = (random_instance(rng, onto, rng.randint(26, 40)) for _ in range(random_counts[name]))
        for family, dbs in [*((f, (load_data(onto, t) for t in ts)) for f, ts in families), ("random", larger)]:
            for k, db in enumerate(dbs):
                instances += 1
                for q in queries:
                    checked += 1
                    top, oracle = answer_cq(db, onto.rules, q), answer_via_chase(db, onto, q)
                    if top != oracle:
                        mismatches.append((name, family, k, q.name))
    elvis = ontos["discharge"]
    elvis_db = load_data(elvis, _tables(elvis))
    no_unit = answer_cq(elvis_db, elvis.rules, elvis.queries["ElvisUnit"]) == set()
    ok = not mismatches and no_unit and len(oracle_queries(elvis)) >= 10
    record(6, ok, f"{checked} query comparisons over {instances} instances "
                  f"(all {2 ** sum(map(len, POOL.values()))} pool subsets and the fixture neighbourhood "
                  f"per ontology, {sum(random_counts.values())} random instances of 26-40 facts), "
                  f"{len(mismatches)} mismatches; Elvis Costello's unit: none")
    assert ok, mismatches[:10]


# -- criterion 7 -----------------------------------------------------------------------

OPEN_QUERIES = ("Q6", "Q7", "Q8", "Q9", "Q13")


def _duplicate(tables, k):
    """``k`` disjoint copies of the data: non-categorical values get a copy suffix."""
    onto = hospital()
    out = {}
    for rel, rows in tables.items():
        attrs = onto.schema.relations[rel].attributes if rel in onto.schema.relations else None
        out[rel] = []
        for c in range(k):
            for row in rows:
                out[rel].append([v if attrs and a.categorical else f"{v}_{c}"
                                 for v, a in zip(row, attrs or [None] * len(row))])
    return out


def test_criterion_7_polynomial_scaling():
    onto = oracle_ontologies()["discharge"]
    base = _tables(onto)
    factors, times = (1, 2, 4, 8), []
    for k in factors:
        db = load_data(onto, _duplicate(base, k))
        best = math.inf
        for _ in range(3):
            t = time.perf_counter()
            for name in OPEN_QUERIES:
                answer_cq(db, onto.rules, onto.queries[name])
            best = min(best, time.perf_counter() - t)
        times.append(best)
    xs = [math.log(f) for f in factors]
    ys = [math.log(t) for t in times]
    mx, my = sum(xs) / len(xs), sum(ys) / len(ys)
    slope = sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / sum((x - mx) ** 2 for x in xs)
    ok = slope < 3
    record(7, ok, f"log-log slope {slope:.2f} (< 3) over x1/x2/x4/x8, times "
                  f"{', '.join(f'{t:.3f}s' for t in times)}")
    assert ok


# -- criterion 8 -----------------------------------------------------------------------

H = str(FIXTURES / "hospital.mdq")
D = str(FIXTURES / "discharge.mdq")
COMMANDS = [
    ["check", H], ["check", D],
    ["analyze", H], ["analyze", D],
    ["chase", H], ["chase", H, "--dump", "trace"], ["chase", D, "--variant", "oblivious"],
    *[["query", H, "--query", q, "--engine", "both", "--explain"]
      for q in ("MarkShiftsW1", "MarkShiftsW2", "MarkShiftsW4", "MarkShifts", "StandardPatientsSep5",
                "TomWaitsNoon")],
    ["query", D, "--query", "ElvisUnit", "--engine", "both"],
    ["assess", H, "--mapping", str(FIXTURES / "context.mdq"), "--quality", str(FIXTURES / "quality.mdq"),
     "--query", "TomWaitsNoon"],
]


def test_criterion_8_deterministic_cli():
    differing = []
    for cmd in COMMANDS:
        for fmt in ("text", "structured"):
            argv = [sys.executable, "-m", "mdq", *cmd, "--format", fmt]
            runs = [subprocess.run(argv, capture_output=True) for _ in range(2)]
            if any((r.stdout, r.stderr, r.returncode) != (runs[0].stdout, runs[0].stderr, runs[0].returncode)
                   for r in runs) or runs[0].returncode == 2:
                differing.append(" ".join(cmd[:1] + [fmt]))
    ok = not differing
    record(8, ok, f"{len(COMMANDS) * 2} fixture command runs repeated, {len(differing)} differing")
    assert ok, differing
