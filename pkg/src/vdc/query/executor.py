"""Plan execution with exact multiset semantics and canonical output order.

The engine materializes operator results bottom-up (sources are desk-to-
archive scale, not warehouse scale), sorts the projected rows with the
canonical value order, and applies LIMIT last.  Coercion warnings collected
during scans travel with the result; rows whose date failed to coerce carry
a null in that cell, which naturally drops them from any predicate or join
key on the column while keeping them visible to unrelated queries.
"""

from __future__ import annotations

import csv
import io
import json
import unicodedata
from dataclasses import dataclass, field

from ..errors import CoercionError, ExecutionError
from ..model import (
    Row,
    TableSchema,
    UncertainDate,
    date_near,
    date_within,
    format_uncertain_date,
    row_sort_key,
    value_sort_key,
)
from ..predicates import Contains
from .planner import (
    BCompare,
    BContains,
    BDateNear,
    FilterNode,
    HashJoinNode,
    LimitNode,
    NestedLoopJoinNode,
    Plan,
    PlanNode,
    ProjectNode,
    ScanNode,
    UnionAllNode,
)

HASH_BUILD_CAP = 1_000_000  # rows; guards the hash-join build side


@dataclass
class ResultSet:
    schema: TableSchema
    rows: list[Row]
    warnings: list[CoercionError] = field(default_factory=list)


# -- the central predicate evaluator ----------------------------------------

def _contains(cell: str, needle: str) -> bool:
    hay = unicodedata.normalize("NFC", cell).casefold()
    return unicodedata.normalize("NFC", needle).casefold() in hay


def _compare(cell, op: str, literal) -> bool:
    if isinstance(cell, UncertainDate):
        same = (cell.earliest_day, cell.latest_day) == (
            literal.earliest_day,
            literal.latest_day,
        )
        return same if op == "=" else not same
    if op == "=":
        return cell == literal
    if op == "!=":
        return cell != literal
    if op == "<":
        return cell < literal
    if op == ">":
        return cell > literal
    if op == "<=":
        return cell <= literal
    return cell >= literal


def eval_bound(pred, row: Row) -> bool:
    """Evaluate one bound predicate; null never satisfies anything."""
    if isinstance(pred, BCompare):
        cell = row[pred.index]
        return cell is not None and _compare(cell, pred.op, pred.literal)
    if isinstance(pred, BContains):
        cell = row[pred.index]
        return cell is not None and _contains(cell, pred.needle)
    if isinstance(pred, BDateNear):
        a, b = row[pred.index_a], row[pred.index_b]
        return a is not None and b is not None and date_near(a, b, pred.k_years)
    a = row[pred.index]
    return a is not None and date_within(a, pred.lo, pred.hi)


def eval_raw(schema: TableSchema, preds, row: Row) -> bool:
    """Scan-level evaluation of raw-space Compare/Contains predicates.

    This is the engine-side ("central") route for predicates a connector
    cannot or must not evaluate itself.
    """
    for p in preds:
        cell = row[schema.index_of(p.column)]
        if cell is None:
            return False
        if isinstance(p, Contains):
            if not _contains(cell, p.needle):
                return False
        elif not _compare(cell, p.op, p.literal):
            return False
    return True


# -- operators ---------------------------------------------------------------

def _run(node: PlanNode, cap: int) -> tuple[list[Row], list[CoercionError]]:
    if isinstance(node, ScanNode):
        rows: list[Row] = []
        warnings: list[CoercionError] = []
        for row, warns in node.relation.scan_base(
            node.base_index, node.raw_preds, node.use_connector, eval_raw
        ):
            rows.append(row)
            warnings.extend(warns)
        return rows, warnings
    if isinstance(node, UnionAllNode):
        rows, warnings = [], []
        for child in node.children:
            r, w = _run(child, cap)
            rows.extend(r)
            warnings.extend(w)
        return rows, warnings
    if isinstance(node, FilterNode):
        rows, warnings = _run(node.child, cap)
        return [r for r in rows if all(eval_bound(p, r) for p in node.preds)], warnings
    if isinstance(node, HashJoinNode):
        left, lw = _run(node.left, cap)
        right, rw = _run(node.right, cap)
        if len(right) > cap:
            raise ExecutionError(
                f"hash join build side exceeds {cap} rows; raise the cap or filter first"
            )
        table: dict = {}
        for r in right:
            key_cell = r[node.right_index]
            if key_cell is None:
                continue
            table.setdefault(value_sort_key(key_cell), []).append(r)
        out = []
        for l in left:
            key_cell = l[node.left_index]
            if key_cell is None:
                continue
            for r in table.get(value_sort_key(key_cell), ()):
                out.append(l + r)
        return out, lw + rw
    if isinstance(node, NestedLoopJoinNode):
        left, lw = _run(node.left, cap)
        right, rw = _run(node.right, cap)
        out = []
        for l in left:
            lk = l[node.left_index]
            if lk is None:
                continue
            lkey = value_sort_key(lk)
            for r in right:
                rk = r[node.right_index]
                if rk is not None and value_sort_key(rk) == lkey:
                    out.append(l + r)
        return out, lw + rw
    if isinstance(node, ProjectNode):
        rows, warnings = _run(node.child, cap)
        return [tuple(r[i] for i in node.indices) for r in rows], warnings
    if isinstance(node, LimitNode):  # handled by execute_plan after sorting
        raise ExecutionError("LIMIT must be the plan root")
    raise ExecutionError(f"unknown plan node {type(node).__name__}")


def execute_plan(plan: Plan, max_hash_build: int = HASH_BUILD_CAP) -> ResultSet:
    """Run a plan: relational evaluation, canonical sort, then LIMIT."""
    root = plan.root
    limit = None
    if isinstance(root, LimitNode):
        limit = root.n
        root = root.child
    rows, warnings = _run(root, max_hash_build)
    rows.sort(key=row_sort_key)
    if limit is not None:
        rows = rows[:limit]
    warnings.sort(key=lambda w: (w.ref, w.column, w.text))
    return ResultSet(plan.schema, rows, warnings)


# -- result serialization ------------------------------------------------------

def cell_text(v) -> str:
    """Canonical textual form of a cell (nulls are empty)."""
    if v is None:
        return ""
    if isinstance(v, UncertainDate):
        return format_uncertain_date(v)
    return v if isinstance(v, str) else str(v)


def result_to_csv(rs: ResultSet) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(rs.schema.column_names())
    for row in rs.rows:
        writer.writerow([cell_text(v) for v in row])
    return buf.getvalue()


def result_to_jsonl(rs: ResultSet) -> str:
    names = rs.schema.column_names()
    lines = []
    for row in rs.rows:
        obj = {}
        for name, v in zip(names, row):
            if isinstance(v, UncertainDate):
                obj[name] = format_uncertain_date(v)
            else:
                obj[name] = v
        lines.append(json.dumps(obj, ensure_ascii=False))
    return "\n".join(lines) + ("\n" if lines else "")
