"""``mdq`` command line: check, analyze, chase, query and assess ontologies."""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .analysis import analyze
from .answering import DepthBudgetExceeded, NotWeaklySticky, answer_cq, answer_via_chase
from .chase import BudgetExceeded, ChaseConfig, chase
from .model import ArityMismatch, UnknownPredicate, check_referential, validate_instance, validate_schema
from .parser import ParseError, load_data, parse_file, read_tables
from .quality import ContextMapping, MissingQualityDefinition, QualityDefinition, quality_assess
from .terms import format_term

EXIT_OK, EXIT_NEGATIVE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    ontology: Path
    data: Path | None = None
    format: str = "text"
    options: dict = field(default_factory=dict)


def _csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for row in rows:
        w.writerow([format_term(v) if not isinstance(v, str) else v for v in row])
    return buf.getvalue()


def _cell(v) -> str:
    return v if isinstance(v, str) else str(v)


def _data_dir(cfg: RunConfig) -> Path | None:
    if cfg.data is not None:
        if not cfg.data.is_dir():
            raise UsageError(f"data directory {cfg.data} does not exist")
        return cfg.data
    default = cfg.ontology.parent / "data"
    return default if default.is_dir() else None


def _load(cfg: RunConfig, onto):
    data_dir = _data_dir(cfg)
    tables = read_tables(onto, data_dir) if data_dir else {}
    return load_data(onto, tables)


class _Out:
    def __init__(self, fmt: str):
        self.fmt = fmt
        self.doc: dict = {}
        self.lines: list[str] = []

    def text(self, s: str = "") -> None:
        self.lines.append(s)

    def render(self) -> str:
        if self.fmt == "structured":
            return json.dumps(self.doc, indent=2, sort_keys=True) + "\n"
        return "".join(line if line.endswith("\n") else line + "\n" for line in self.lines)


def cmd_check(cfg: RunConfig, out: _Out) -> int:
    onto = parse_file(cfg.ontology)
    problems = [*validate_schema(onto.schema)]
    for inst in onto.instances.values():
        problems.extend(validate_instance(inst))
    db = _load(cfg, onto)
    problems.extend(check_referential(db, onto.schema))
    result = chase(db, onto, ChaseConfig())
    out.doc = {
        "schema_violations": [{"kind": v.kind, "element": str(v.element), "message": v.message} for v in problems],
        "nc_violations": [{"rule": v.rule, "facts": [[p, list(map(_cell, t))] for p, t in v.facts]}
                          for v in result.nc_violations],
        "egd_violations": [{"rule": v.rule, "values": list(map(_cell, v.values))} for v in result.egd_violations],
        "facts": len(db),
        "rules": len(onto.rules),
        "constraints": len(onto.constraints),
    }
    out.text(f"facts: {len(db)}, rules: {len(onto.rules)}, constraints: {len(onto.constraints)}")
    for v in problems:
        out.text(f"{v.kind}: {v.message}")
    for v in result.nc_violations:
        out.text(f"violation {v.rule}: " + ", ".join(f"{p}({', '.join(map(_cell, t))})" for p, t in v.facts))
    for v in result.egd_violations:
        out.text(f"violation {v.rule}: {_cell(v.values[0])} != {_cell(v.values[1])}")
    bad = problems or result.nc_violations or result.egd_violations
    return EXIT_NEGATIVE if bad else EXIT_OK


def cmd_analyze(cfg: RunConfig, out: _Out) -> int:
    onto = parse_file(cfg.ontology)
    res = analyze(onto)
    out.doc = res.to_dict()
    for label, c in res.classes.items():
        d = f" ({c.direction})" if c.direction else ""
        out.text(f"rule {label}: {c.form.value}{d}")
    out.text("finite-rank positions: " + ", ".join(sorted(str(p) for p in res.pi_f)))
    out.text("marked: " + ", ".join(f"{label}.{v.name}" for label, v in sorted(res.marking)))
    ws = res.weakly_sticky
    out.text("weakly sticky: " + ("yes" if ws else f"no ({ws.reason})"))
    out.text("sticky: " + ("yes" if res.sticky else f"no ({res.sticky.reason})"))
    out.text("separability: " + ("Guaranteed" if res.separability else "NotGuaranteed")
             + (f" ({res.separability.reason})" if res.separability.reason else ""))
    return EXIT_OK if ws else EXIT_NEGATIVE


def cmd_chase(cfg: RunConfig, out: _Out) -> int:
    onto = parse_file(cfg.ontology)
    db = _load(cfg, onto)
    o = cfg.options
    config = ChaseConfig(o["variant"], o["max_steps"], o["max_nulls"])
    result = chase(db, onto, config)
    facts = sorted(((p, tuple(map(_cell, t))) for p, t in result.facts.facts()))
    trace = [{"step": e.step, "rule": e.rule,
              "trigger": {k: _cell(v) for k, v in e.trigger.items()},
              "added": [[p, list(map(_cell, t))] for p, t in e.added],
              "merged": [_cell(x) for x in e.merged] if e.merged else None}
             for e in result.state.trace]
    out.doc = {
        "terminated": result.terminated,
        "error": result.error,
        "steps": result.state.step,
        "nulls": len(result.state.nulls),
        "nc_violations": [{"rule": v.rule, "facts": [[p, list(map(_cell, t))] for p, t in v.facts]}
                          for v in result.nc_violations],
        "egd_violations": [{"rule": v.rule, "values": list(map(_cell, v.values))} for v in result.egd_violations],
    }
    if o["dump"] == "trace":
        out.doc["trace"] = trace
        for e in trace:
            line = f"{e['step']},{e['rule']}"
            if e["merged"]:
                line += f",merge {e['merged'][0]} -> {e['merged'][1]}"
            for p, t in e["added"]:
                line += "," + p + "(" + " ".join(t) + ")"
            out.text(line)
    else:
        out.doc["facts"] = [[p, list(t)] for p, t in facts]
        out.text(_csv([p, *t] for p, t in facts))
    if not result.terminated:
        print(f"chase stopped: {result.error}", file=sys.stderr)
    for v in result.nc_violations:
        print(f"violation {v.rule}: " + ", ".join(f"{p}({', '.join(map(_cell, t))})" for p, t in v.facts),
              file=sys.stderr)
    if not result.terminated or result.nc_violations or result.egd_violations:
        return EXIT_NEGATIVE
    return EXIT_OK


def _query(onto, name: str):
    if name not in onto.queries:
        raise UsageError(f"unknown query {name!r}; available: {', '.join(sorted(onto.queries)) or 'none'}")
    return onto.queries[name]


def cmd_query(cfg: RunConfig, out: _Out) -> int:
    onto = parse_file(cfg.ontology)
    db = _load(cfg, onto)
    o = cfg.options
    q = _query(onto, o["query"])
    results: dict[str, list] = {}
    proofs: dict = {}
    if o["engine"] in ("topdown", "both"):
        results["topdown"] = sorted(answer_cq(db, onto.rules, q, depth_budget=o["depth_budget"], proofs=proofs))
    if o["engine"] in ("chase", "both"):
        results["chase"] = sorted(answer_via_chase(db, onto, q))
    answers = next(iter(results.values()))
    agree = all(r == answers for r in results.values())
    out.doc = {"query": str(q), "answers": {k: [list(t) for t in v] for k, v in results.items()}, "agree": agree}
    out.text(_csv(answers))
    if not agree:
        print("engines disagree: " + json.dumps(out.doc["answers"], sort_keys=True), file=sys.stderr)
    if o["explain"] and proofs:
        out.doc["proofs"] = {",".join(t): [n.to_dict() for n in proofs[t].roots] for t in sorted(proofs)}
        for t in sorted(proofs):
            out.text(f"% proof of ({', '.join(t)})")
            for line in proofs[t].render().splitlines():
                out.text("% " + line)
    return EXIT_OK if agree else EXIT_NEGATIVE


def cmd_assess(cfg: RunConfig, out: _Out) -> int:
    o = cfg.options
    onto = parse_file(cfg.ontology)
    ctx_onto = parse_file(o["mapping"], onto) if o["mapping"] else onto
    full = parse_file(o["quality"], ctx_onto) if o["quality"] else ctx_onto
    mapping = ContextMapping.from_ontology(ctx_onto)
    defs = QualityDefinition.from_ontology(full, ctx_onto)
    if not defs.versions:
        raise UsageError("no quality versions declared (use a 'quality S -> S^q.' statement)")
    db = _load(cfg, onto)
    q = _query(full, o["query"]) if o["query"] else None
    answers, report, versions = quality_assess(db, ctx_onto, mapping, defs, q, depth_budget=o["depth_budget"])
    doc = report.to_dict()
    doc["versions"] = {rel: sorted(list(t) for t in tups) for rel, tups in sorted(versions.items())}
    if q is not None:
        doc["query"] = o["query"]
        doc["answers"] = [list(t) for t in sorted(answers)]
    out.doc = doc
    for r in report.relations:
        out.text(f"relation {r.relation}: {r.quality_count}/{r.base_count} quality tuples "
                 f"(ratio {r.ratio}) in {r.quality_relation}")
        for t in sorted(versions[r.relation]):
            out.text("  " + ",".join(t))
    if report.violations or any(r.discarded for r in report.relations):
        out.text("discarded:")
    for d in report.violations:
        out.text(f"  {d.predicate}({', '.join(map(_cell, d.tuple))}): violates {d.reason}")
    for r in report.relations:
        for d in r.discarded:
            out.text(f"  {d.predicate}({', '.join(map(_cell, d.tuple))}): {d.reason}")
    if q is not None:
        out.text(f"answers to {o['query']} over quality data:")
        out.text(_csv(sorted(answers)).rstrip("\n") if answers else "  (none)")
    return EXIT_OK


COMMANDS = {"check": cmd_check, "analyze": cmd_analyze, "chase": cmd_chase,
            "query": cmd_query, "assess": cmd_assess}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mdq", description="Multidimensional Datalog± ontologies: "
                                "analysis, chase, query answering and quality assessment.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("ontology", type=Path)
        sp.add_argument("--data", type=Path, default=None,
                        help="directory of CSV files (default: 'data' next to the ontology)")
        sp.add_argument("--format", choices=["text", "structured"], default="text")

    for name in ("check", "analyze"):
        common(sub.add_parser(name))
    sp = sub.add_parser("chase")
    common(sp)
    sp.add_argument("--variant", choices=["restricted", "oblivious"], default="restricted")
    sp.add_argument("--max-steps", type=int, default=100_000)
    sp.add_argument("--max-nulls", type=int, default=100_000)
    sp.add_argument("--dump", choices=["facts", "trace"], default="facts")
    sp = sub.add_parser("query")
    common(sp)
    sp.add_argument("--query", required=True)
    sp.add_argument("--engine", choices=["topdown", "chase", "both"], default="topdown")
    sp.add_argument("--depth-budget", type=int, default=None)
    sp.add_argument("--explain", action="store_true")
    sp = sub.add_parser("assess")
    common(sp)
    sp.add_argument("--mapping", type=Path, default=None)
    sp.add_argument("--quality", type=Path, default=None)
    sp.add_argument("--query", default=None)
    sp.add_argument("--report", choices=["text", "structured"], default=None,
                    help="alias of --format for the assessment report")
    sp.add_argument("--depth-budget", type=int, default=None)
    return p


def run(cfg: RunConfig, stdout=None) -> int:
    stdout = stdout or sys.stdout
    out = _Out(cfg.format)
    try:
        if not cfg.ontology.is_file():
            raise UsageError(f"cannot read ontology {cfg.ontology}")
        for key in ("mapping", "quality"):
            f = cfg.options.get(key)
            if f is not None and not Path(f).is_file():
                raise UsageError(f"cannot read {key} file {f}")
        status = COMMANDS[cfg.command](cfg, out)
    except ParseError as exc:
        for d in exc.diagnostics:
            print(str(d), file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, UnknownPredicate, ArityMismatch, FileNotFoundError, ValueError,
            MissingQualityDefinition) as exc:
        if isinstance(exc, NotWeaklySticky):
            print(f"rules are not weakly sticky: {exc}", file=sys.stderr)
            return EXIT_NEGATIVE
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DepthBudgetExceeded, BudgetExceeded) as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_NEGATIVE
    stdout.write(out.render())
    return status


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    fmt = args.format
    if getattr(args, "report", None):
        fmt = args.report
    options = {k: v for k, v in vars(args).items() if k not in ("command", "ontology", "data", "format")}
    return run(RunConfig(args.command, args.ontology, args.data, fmt, options))


if __name__ == "__main__":
    sys.exit(main())
