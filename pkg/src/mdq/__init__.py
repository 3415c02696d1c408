"""Multidimensional Datalog± ontologies for contextual data quality."""
from .analysis import analyze, check_separability, is_sticky, is_weakly_sticky
from .answering import (
    DepthBudgetExceeded,
    NotWeaklySticky,
    answer_bcq,
    answer_cq,
    answer_via_chase,
)
from .chase import BudgetExceeded, ChaseConfig, chase
from .model import Database
from .parser import ParseError, load_data, parse_file, parse_program, read_tables
from .quality import (
    ContextMapping,
    MissingQualityDefinition,
    QualityDefinition,
    build_context,
    compute_quality_version,
    quality_assess,
    rewrite_query,
)
from .rules import ConjunctiveQuery, Ontology, Rule

__all__ = [
    "BudgetExceeded", "ChaseConfig", "ConjunctiveQuery", "ContextMapping", "Database",
    "DepthBudgetExceeded", "MissingQualityDefinition", "NotWeaklySticky", "Ontology",
    "ParseError", "QualityDefinition", "Rule", "analyze", "answer_bcq", "answer_cq",
    "answer_via_chase", "build_context", "chase", "check_separability", "compute_quality_version",
    "is_sticky", "is_weakly_sticky", "load_data", "parse_file", "parse_program",
    "quality_assess", "read_tables", "rewrite_query",
]
