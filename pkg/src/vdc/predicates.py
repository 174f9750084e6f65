"""Predicate shapes shared by the query engine and the connectors.

Connectors only ever receive Compare and Contains (the pushable shapes);
the date predicates always run centrally on mediated rows.  The dataclasses
are pure data: each consumer evaluates them with its own code so that
pushed-down and central evaluation stay independently testable.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import UncertainDate

COMPARE_OPS = ("=", "!=", "<", ">", "<=", ">=")


@dataclass(frozen=True)
class Compare:
    column: str
    op: str
    literal: int | str | UncertainDate

    def __post_init__(self):
        if self.op not in COMPARE_OPS:
            raise ValueError(f"bad comparison operator {self.op!r}")


@dataclass(frozen=True)
class Contains:
    column: str
    needle: str


@dataclass(frozen=True)
class DateNear:
    column_a: str
    column_b: str
    k_years: int


@dataclass(frozen=True)
class DateWithin:
    column: str
    lo: UncertainDate
    hi: UncertainDate


Predicate = Compare | Contains | DateNear | DateWithin
