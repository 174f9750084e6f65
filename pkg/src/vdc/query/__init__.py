"""SQL-like federated query pipeline: parser, planner, executor, oracle."""

from .executor import (
    ResultSet,
    cell_text,
    execute_plan,
    result_to_csv,
    result_to_jsonl,
)
from .parser import QueryAst, parse_query
from .planner import Plan, plan_query
from .reference import reference_eval

__all__ = [
    "Plan",
    "QueryAst",
    "ResultSet",
    "cell_text",
    "execute_plan",
    "parse_query",
    "plan_query",
    "reference_eval",
    "result_to_csv",
    "result_to_jsonl",
]
