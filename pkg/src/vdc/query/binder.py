"""Semantic analysis shared by the planner and the reference evaluator:
relation resolution, column binding, output naming.

Keeping name resolution in one place means the oracle and the engine can
only diverge on evaluation strategy, which is exactly what the oracle is
meant to check.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

from ..errors import PlanError
from ..model import ColumnDescriptor, TableSchema
from .parser import ColumnRef, QueryAst

if TYPE_CHECKING:  # pragma: no cover
    from ..datacentre import Catalogue, Relation


@dataclass
class BoundRelation:
    alias: str  # display name: explicit alias or bare relation name
    relation: "Relation"
    first_slot: int


@dataclass
class Slot:
    rel_index: int
    col_index: int  # position within the relation's schema
    alias: str
    column: ColumnDescriptor


class Binding:
    """The joined row space of a query: relations in FROM/JOIN order and
    one slot per (relation, column)."""

    def __init__(self, ast: QueryAst, catalogue: "Catalogue"):
        self.ast = ast
        self.relations: list[BoundRelation] = []
        self.slots: list[Slot] = []
        seen_aliases = set()
        for term in (ast.relation, *(j.relation for j in ast.joins)):
            alias = term.display()
            if alias in seen_aliases:
                raise PlanError(f"duplicate relation alias {alias!r}")
            seen_aliases.add(alias)
            relation = catalogue.resolve_relation(term.name)
            self.relations.append(BoundRelation(alias, relation, len(self.slots)))
            for ci, col in enumerate(relation.schema.columns):
                self.slots.append(Slot(len(self.relations) - 1, ci, alias, col))

    def bind(self, ref: ColumnRef) -> int:
        """Slot index for a column reference; unknown or ambiguous fails."""
        matches = [
            i
            for i, s in enumerate(self.slots)
            if s.column.name == ref.name
            and (ref.qualifier is None or s.alias == ref.qualifier)
        ]
        if not matches:
            raise PlanError(f"unknown column {ref.text()!r}")
        if len(matches) > 1:
            raise PlanError(f"ambiguous column {ref.text()!r}")
        return matches[0]

    def output(self) -> tuple[list[int], TableSchema]:
        """Projected slot indices and the result schema.

        Single-relation queries keep bare column names; joins qualify every
        output column as ``<alias>_<column>`` to keep names unique.
        """
        if self.ast.select is None:
            indices = list(range(len(self.slots)))
        else:
            indices = [self.bind(c) for c in self.ast.select]
        multi = len(self.relations) > 1
        columns = []
        names = set()
        for i in indices:
            s = self.slots[i]
            name = f"{s.alias}_{s.column.name}" if multi else s.column.name
            if name in names:
                raise PlanError(f"duplicate output column {name!r}")
            names.add(name)
            columns.append(ColumnDescriptor(name, s.column.kind, date_text=s.column.date_text))
        schema = TableSchema("result", tuple(columns))
        return indices, schema
