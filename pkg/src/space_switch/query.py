"""
Encrypted filter + aggregate queries over integer tables.

A query is a conjunction of column-vs-constant predicates and one
SUM of a product of columns over the qualifying rows:

    SELECT SUM(price * discount) FROM t
    WHERE quantity < 24 AND discount >= 5 AND discount <= 7

Every predicate runs in the digit space and stays tagged p; the masks are
multiplied together, the conjunction is lifted back to p^r once, and the
lifted mask is multiplied into the aggregate expression. On the clear
backend a whole column lives in one packed handle and the final sum is
taken over decoded slots. On the bgv backend every cell is its own
ciphertext and the rows are summed homomorphically before decryption.

ReferenceEngine answers the same plan with sqlite3 so results can be
checked exactly.

Example:
    >>> table = generate_q6_table(64, seed=7)
    >>> plan = q6_plan()
    >>> params = select_params(required_bitwidth(table.spec, plan), extra_depth=query_extra_depth(plan))
    >>> result = run_query(plan, encrypt_table(table, ClearEvaluator(params)))
    >>> with ReferenceEngine(table) as ref:
    ...     result.value == ref.run(plan)
    True
"""

import csv
import json
import logging
import re
import sqlite3
import time
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from types import TracebackType
from typing import Any

import numpy as np

from .compare import CompareOp, predicate
from .errors import InfeasibleParametersError, IngestError
from .evaluator import CipherHandle, Evaluator, ceil_log2
from .ledger import PIPELINE_STAGES, StageCost
from .params import MAX_BITWIDTH, Backend, ParamSet
from .space_switch import ExtractionStrategy, raise_mod

logger = logging.getLogger(__name__)

REPORT_SCHEMA = 1

# One ciphertext per cell keeps bgv tables small.
BGV_ROW_BUDGET = 4096

_IDENTIFIER = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")

SUMMATION_NOTES = {
    Backend.CLEAR: "packed columns; rows summed over decoded slots",
    Backend.BGV: "one ciphertext per cell; rows summed homomorphically before decryption",
}


@dataclass(frozen=True)
class TableSpec:
    """
    Shape of an integer table.

    Attributes:
        columns: Column names, in file order
        bitwidths: Bits per column; values lie in [0, 2^bits)
        rows: Number of data rows
    """

    columns: tuple[str, ...]
    bitwidths: tuple[int, ...]
    rows: int

    def __post_init__(self):
        if not self.columns:
            raise ValueError("A table needs at least one column")
        if len(self.columns) != len(self.bitwidths):
            raise ValueError(
                f"{len(self.columns)} columns but {len(self.bitwidths)} bit widths"
            )
        if len(set(self.columns)) != len(self.columns):
            raise ValueError(f"Duplicate column names in {self.columns}")
        for name in self.columns:
            if not _IDENTIFIER.match(name):
                raise ValueError(f"Column name {name!r} is not a plain identifier")
        for name, bits in zip(self.columns, self.bitwidths, strict=True):
            if not 1 <= bits <= MAX_BITWIDTH:
                raise ValueError(f"Column {name!r}: bit width {bits} outside [1, {MAX_BITWIDTH}]")
        if self.rows < 1:
            raise ValueError(f"A table needs at least one row, got {self.rows}")

    @classmethod
    def uniform(cls, columns: Sequence[str], bitwidth: int, rows: int) -> "TableSpec":
        return cls(tuple(columns), (bitwidth,) * len(columns), rows)

    def width(self, column: str) -> int:
        return self.bitwidths[self.index(column)]

    def index(self, column: str) -> int:
        try:
            return self.columns.index(column)
        except ValueError:
            raise ValueError(
                f"Unknown column {column!r}, table has {', '.join(self.columns)}"
            ) from None

    def to_dict(self) -> dict[str, Any]:
        return {
            "columns": list(self.columns),
            "bitwidths": list(self.bitwidths),
            "rows": self.rows,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "TableSpec":
        return cls(tuple(data["columns"]), tuple(int(b) for b in data["bitwidths"]), int(data["rows"]))


@dataclass(frozen=True)
class PlainTable:
    """A validated integer table held column-wise."""

    spec: TableSpec
    data: dict[str, tuple[int, ...]]

    def __post_init__(self):
        for name, bits in zip(self.spec.columns, self.spec.bitwidths, strict=True):
            values = self.data.get(name)
            if values is None:
                raise ValueError(f"Missing column {name!r}")
            if len(values) != self.spec.rows:
                raise ValueError(f"Column {name!r} has {len(values)} rows, expected {self.spec.rows}")
            for row, v in enumerate(values, start=1):
                _check_range(v, bits, row, name)

    def column(self, name: str) -> tuple[int, ...]:
        self.spec.index(name)
        return self.data[name]

    def rows(self) -> list[dict[str, int]]:
        return [
            {name: self.data[name][i] for name in self.spec.columns} for i in range(self.spec.rows)
        ]

    def write_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f)
            writer.writerow(self.spec.columns)
            for i in range(self.spec.rows):
                writer.writerow([self.data[name][i] for name in self.spec.columns])


def _check_range(value: int, bits: int, row: int, column: str) -> None:
    if not 0 <= value < 1 << bits:
        raise IngestError(
            f"Row {row}, column {column!r}: value {value} outside [0, {1 << bits}) "
            f"for a {bits}-bit column"
        )


def load_table(
    path: str | Path,
    spec: TableSpec | None = None,
    *,
    bitwidth: int = 8,
    bitwidths: Mapping[str, int] | None = None,
) -> PlainTable:
    """
    Read a UTF-8 CSV with a header row and integer cells.

    Without a spec, every column gets `bitwidth` bits unless `bitwidths`
    names it. Rows are numbered from 1, not counting the header.

    Raises:
        IngestError: If the header or a cell is malformed or out of range
        OSError: If the file cannot be read
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if not header:
            raise IngestError(f"{path}: missing header row")
        header = [h.strip() for h in header]
        records = [row for row in reader if row]
    if not records:
        raise IngestError(f"{path}: no data rows")

    if spec is None:
        widths = dict(bitwidths or {})
        try:
            spec = TableSpec(
                tuple(header),
                tuple(widths.get(name, bitwidth) for name in header),
                len(records),
            )
        except ValueError as e:
            raise IngestError(f"{path}: {e}") from e
    if tuple(header) != spec.columns:
        raise IngestError(f"{path}: header {header} does not match columns {list(spec.columns)}")
    if len(records) != spec.rows:
        raise IngestError(f"{path}: {len(records)} data rows, expected {spec.rows}")

    columns: dict[str, list[int]] = {name: [] for name in spec.columns}
    for row, record in enumerate(records, start=1):
        if len(record) != len(spec.columns):
            raise IngestError(f"Row {row}: {len(record)} cells, expected {len(spec.columns)}")
        for name, bits, cell in zip(spec.columns, spec.bitwidths, record, strict=True):
            try:
                value = int(cell.strip())
            except ValueError:
                raise IngestError(f"Row {row}, column {name!r}: {cell!r} is not an integer") from None
            _check_range(value, bits, row, name)
            columns[name].append(value)
    logger.debug("Loaded %d rows x %d columns from %s", spec.rows, len(spec.columns), path)
    return PlainTable(spec, {name: tuple(v) for name, v in columns.items()})


@dataclass
class EncryptedTable:
    """
    Encrypted columns bound to one evaluator.

    Attributes:
        spec: Table shape
        evaluator: Evaluator holding the keys
        columns: Per column, one packed handle (clear) or one handle per row (bgv)
    """

    spec: TableSpec
    evaluator: Evaluator
    columns: dict[str, list[CipherHandle]]

    @property
    def packed(self) -> bool:
        return self.evaluator.packs_slots

    def handles(self, column: str) -> list[CipherHandle]:
        self.spec.index(column)
        return self.columns[column]

    def decode_column(self, column: str) -> list[int]:
        ev = self.evaluator
        return [v for h in self.handles(column) for v in ev.decode(h)]


def _check_capacity(spec: TableSpec, ev: Evaluator) -> None:
    limit = ev.params.max_slots if ev.packs_slots else BGV_ROW_BUDGET
    if spec.rows > limit:
        raise IngestError(f"{spec.rows} rows exceed the {ev.name} backend's limit of {limit}")
    for name, bits in zip(spec.columns, spec.bitwidths, strict=True):
        if 1 << bits >= ev.modulus:
            raise InfeasibleParametersError(
                f"Column {name!r} needs {bits} bits, p^r = {ev.modulus} is too small"
            )


def encrypt_table(table: PlainTable, evaluator: Evaluator) -> EncryptedTable:
    """
    Encrypt a table in row order: one handle per column or one per cell.

    Raises:
        IngestError: If the table exceeds the backend's row capacity
        InfeasibleParametersError: If a column does not fit p^r
    """
    spec = table.spec
    _check_capacity(spec, evaluator)
    columns: dict[str, list[CipherHandle]] = {}
    for name in spec.columns:
        values = table.data[name]
        if evaluator.packs_slots:
            columns[name] = [evaluator.encrypt(list(values))]
        else:
            columns[name] = [evaluator.encrypt(v) for v in values]
    logger.info("Encrypted %d rows x %d columns on %s", spec.rows, len(spec.columns), evaluator.name)
    return EncryptedTable(spec, evaluator, columns)


def ingest_csv(path: str | Path, spec: TableSpec | None, evaluator: Evaluator) -> EncryptedTable:
    """
    Load and encrypt a CSV file.

    Raises:
        IngestError: On parse failure (row and column reported) or range violation
    """
    return encrypt_table(load_table(path, spec), evaluator)


@dataclass(frozen=True)
class Predicate:
    """`column op value` with an integer constant."""

    column: str
    op: CompareOp
    value: int

    def __post_init__(self):
        object.__setattr__(self, "op", CompareOp(self.op))

    @classmethod
    def parse(cls, text: str) -> "Predicate":
        """
        Parse "column:op:value", e.g. "quantity:lt:24".

        Raises:
            ValueError: If the text is malformed
        """
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"Predicate {text!r} is not of the form column:op:value")
        column, op, value = (p.strip() for p in parts)
        try:
            return cls(column, CompareOp(op), int(value))
        except ValueError:
            raise ValueError(
                f"Predicate {text!r}: op must be one of {', '.join(CompareOp)} "
                "and value an integer"
            ) from None

    def __str__(self) -> str:
        return f"{self.column} {self.op.sql} {self.value}"

    def to_dict(self) -> dict[str, Any]:
        return {"column": self.column, "op": str(self.op), "value": self.value}


@dataclass(frozen=True)
class QueryPlan:
    """
    Conjunction of predicates and SUM of a product of columns.

    Attributes:
        where: Predicates combined by AND (may be empty)
        sum: Columns multiplied together inside the SUM
    """

    where: tuple[Predicate, ...]
    sum: tuple[str, ...]

    def __post_init__(self):
        if not self.sum:
            raise ValueError("A plan needs at least one column to aggregate")

    def validate(self, spec: TableSpec) -> None:
        """
        Raises:
            ValueError: If a column is unknown or a constant is out of range
        """
        for pred in self.where:
            bits = spec.width(pred.column)
            if not 0 <= pred.value <= 1 << bits:
                raise ValueError(f"Constant in {pred} outside [0, {1 << bits}]")
        for column in self.sum:
            spec.index(column)

    def to_dict(self) -> dict[str, Any]:
        return {"where": [p.to_dict() for p in self.where], "sum": list(self.sum)}

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "QueryPlan":
        where = tuple(Predicate(p["column"], CompareOp(p["op"]), int(p["value"])) for p in data.get("where", []))
        return cls(where, tuple(data["sum"]))

    @classmethod
    def from_json(cls, text: str) -> "QueryPlan":
        try:
            return cls.from_dict(json.loads(text))
        except (KeyError, TypeError, json.JSONDecodeError) as e:
            raise ValueError(f"Invalid query plan: {e}") from e

    @classmethod
    def from_flags(cls, where: Sequence[str], sum_expr: str) -> "QueryPlan":
        """Build a plan from "col:op:value" strings and "a*b" for the SUM."""
        columns = tuple(c.strip() for c in sum_expr.split("*") if c.strip())
        return cls(tuple(Predicate.parse(w) for w in where), columns)

    def sql(self) -> str:
        text = f"SUM({' * '.join(self.sum)})"
        if self.where:
            text += " WHERE " + " AND ".join(str(p) for p in self.where)
        return text


def required_bitwidth(spec: TableSpec, plan: QueryPlan, backend: Backend | str = Backend.CLEAR) -> int:
    """
    Bits p^r must cover for this plan.

    Predicates need their column width. The aggregate needs the sum of its
    column widths, plus ceil(log2 rows) when rows are summed homomorphically.
    """
    plan.validate(spec)
    pred_bits = max((spec.width(p.column) for p in plan.where), default=1)
    agg_bits = sum(spec.width(c) for c in plan.sum)
    if Backend(backend) is Backend.BGV:
        agg_bits += ceil_log2(spec.rows)
    return max(pred_bits, agg_bits)


def query_extra_depth(plan: QueryPlan) -> int:
    """Levels beyond one comparison pipeline: AND tree, product tree and the mask multiply."""
    return ceil_log2(len(plan.where)) + ceil_log2(len(plan.sum)) + 1


@dataclass
class CostReport:
    """
    Per-stage cost of one query (or one benchmarked comparison).

    Attributes:
        params: Parameters the run used
        stages: Counters per stage; the pipeline stages are always present
        depth: Multiplicative depth of the final value
        strategy: Digit-extraction strategy
        summation: How rows were summed on this backend
        wall_clock: Seconds, informational only
    """

    params: ParamSet
    stages: dict[str, StageCost]
    depth: int
    strategy: ExtractionStrategy = ExtractionStrategy.SPACE_SWITCH
    summation: str = ""
    wall_clock: float = 0.0
    extra: dict[str, Any] = field(default_factory=dict[str, Any])

    def __post_init__(self):
        for name in PIPELINE_STAGES:
            self.stages.setdefault(name, StageCost())

    @property
    def totals(self) -> StageCost:
        total = StageCost()
        for cost in self.stages.values():
            total.merge(cost)
        return total

    def shares(self) -> dict[str, float]:
        """Each stage's fraction of the non-scalar multiplications."""
        total = self.totals.nonscalar_mults
        return {
            name: (cost.nonscalar_mults / total if total else 0.0)
            for name, cost in self.stages.items()
        }

    def _ordered(self) -> list[str]:
        rest = sorted(name for name in self.stages if name not in PIPELINE_STAGES)
        return [*PIPELINE_STAGES, *rest]

    def to_dict(self) -> dict[str, Any]:
        data: dict[str, Any] = {
            "schema": REPORT_SCHEMA,
            "backend": str(self.params.backend),
            "params": self.params.to_dict(),
            "strategy": str(self.strategy),
            "stages": {name: self.stages[name].to_dict() for name in self._ordered()},
            "totals": self.totals.to_dict(),
            "depth": self.depth,
            "summation": self.summation,
            "wall_clock_seconds": round(self.wall_clock, 4),
        }
        data.update(self.extra)
        return data

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    def render_text(self) -> str:
        p = self.params
        shares = self.shares()
        lines = [
            f"p={p.p} r={p.r} p^r={p.modulus} levels={p.levels} backend={p.backend} strategy={self.strategy}",
            f"{'stage':<16}{'nonscalar':>10}{'scalar':>8}{'adds':>8}{'share':>8}",
            "-" * 50,
        ]
        for name in self._ordered():
            cost = self.stages[name]
            lines.append(
                f"{name:<16}{cost.nonscalar_mults:>10}{cost.scalar_mults:>8}"
                f"{cost.additions:>8}{shares[name]:>8.1%}"
            )
        totals = self.totals
        lines.append("-" * 50)
        lines.append(
            f"{'total':<16}{totals.nonscalar_mults:>10}{totals.scalar_mults:>8}{totals.additions:>8}"
        )
        lines.append(f"depth {self.depth}, wall clock {self.wall_clock:.3f}s")
        if self.summation:
            lines.append(f"summation: {self.summation}")
        return "\n".join(lines)


@dataclass(frozen=True)
class QueryResult:
    value: int
    report: CostReport


def _check_fits(table: EncryptedTable, plan: QueryPlan) -> None:
    ev = table.evaluator
    need = required_bitwidth(table.spec, plan, ev.params.backend)
    if 1 << (need + 1) > ev.modulus:
        raise InfeasibleParametersError(
            f"Plan needs p^r >= 2^{need + 1}, parameters give p^r = {ev.modulus}"
        )


def _masked_value(
    plan: QueryPlan,
    cells: Mapping[str, CipherHandle],
    strategy: ExtractionStrategy,
) -> CipherHandle:
    """SUM argument for one batch of rows: product of columns times the lifted mask."""
    ev = next(iter(cells.values())).owner
    masks = [
        predicate(pred.op, cells[pred.column], pred.value, strategy=strategy).handle
        for pred in plan.where
    ]
    mask: CipherHandle | None = None
    if masks:
        with ev.ledger.stage("aggregation"):
            mask = ev.he_product(masks)
        mask = raise_mod(mask)
    with ev.ledger.stage("arithmetic"):
        value = ev.he_product([cells[c] for c in plan.sum])
        if mask is not None:
            value = ev.he_mul(value, mask)
    return value


def run_query(
    plan: QueryPlan,
    table: EncryptedTable,
    *,
    strategy: ExtractionStrategy = ExtractionStrategy.SPACE_SWITCH,
) -> QueryResult:
    """
    Evaluate a plan on an encrypted table.

    Returns:
        QueryResult with the decrypted SUM and the query's CostReport

    Raises:
        ValueError: If the plan references unknown columns
        InfeasibleParametersError: If p^r cannot hold the plan's values
        LevelExhaustedError: If the chain is too short, naming the stage
    """
    plan.validate(table.spec)
    _check_fits(table, plan)
    ev = table.evaluator
    ledger = ev.ledger
    before = ledger.stages
    start = time.perf_counter()

    columns = {name: table.handles(name) for name in {*plan.sum, *(p.column for p in plan.where)}}
    batches = len(next(iter(columns.values())))
    values = [
        _masked_value(plan, {name: hs[i] for name, hs in columns.items()}, strategy)
        for i in range(batches)
    ]
    if table.packed:
        total = sum(v for h in values for v in ev.decode(h))
        depth = max(h.depth for h in values)
    else:
        with ledger.stage("arithmetic"):
            summed = ev.he_sum(values)
        total = ev.decode(summed)[0]
        depth = summed.depth
    elapsed = time.perf_counter() - start

    after = ledger.stages
    stages = {name: cost - before.get(name, StageCost()) for name, cost in after.items()}
    report = CostReport(
        ev.params,
        stages,
        depth,
        ExtractionStrategy(strategy),
        SUMMATION_NOTES[ev.params.backend],
        elapsed,
        {"query": plan.to_dict(), "rows": table.spec.rows, "result": total},
    )
    logger.info("Query %s = %d (%d non-scalar mults)", plan.sql(), total, report.totals.nonscalar_mults)
    return QueryResult(total, report)


class ReferenceEngine:
    """
    Plaintext oracle: evaluates a QueryPlan with an in-memory sqlite3 database.

    Example:
        >>> with ReferenceEngine(table) as ref:
        ...     ref.run(q6_plan())
    """

    TABLE = "data"

    def __init__(self, table: PlainTable):
        self.spec = table.spec
        self._conn: sqlite3.Connection | None = sqlite3.connect(":memory:")
        columns = ", ".join(f'"{name}" INTEGER NOT NULL' for name in self.spec.columns)
        placeholders = ", ".join("?" for _ in self.spec.columns)
        with self._conn:
            self._conn.execute(f'CREATE TABLE "{self.TABLE}" ({columns})')
            self._conn.executemany(
                f'INSERT INTO "{self.TABLE}" VALUES ({placeholders})',
                zip(*(table.data[name] for name in self.spec.columns), strict=True),
            )

    def _get_connection(self) -> sqlite3.Connection:
        if self._conn is None:
            raise ValueError("ReferenceEngine is closed")
        return self._conn

    def close(self):
        if self._conn is not None:
            self._conn.close()
            self._conn = None

    def __enter__(self) -> "ReferenceEngine":
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc_val: BaseException | None,
        exc_tb: TracebackType | None,
    ) -> None:
        self.close()

    def run(self, plan: QueryPlan) -> int:
        plan.validate(self.spec)
        product = " * ".join(f'"{c}"' for c in plan.sum)
        sql = f'SELECT COALESCE(SUM({product}), 0) FROM "{self.TABLE}"'
        params: list[int] = []
        if plan.where:
            sql += " WHERE " + " AND ".join(f'"{p.column}" {p.op.sql} ?' for p in plan.where)
            params = [p.value for p in plan.where]
        (value,) = self._get_connection().execute(sql, params).fetchone()
        return int(value)


# Synthetic analog of the TPC-H Q6 lineitem columns, scaled to desk size.
Q6_COLUMNS = ("quantity", "price", "discount", "shipdate")
Q6_BITWIDTHS = (6, 8, 4, 8)


def generate_q6_table(rows: int, seed: int = 0) -> PlainTable:
    """
    Seeded lineitem-like table.

    quantity in [1, 50], price in [1, 255], discount in [0, 10] (percent),
    shipdate as a day offset in [0, 255].
    """
    rng = np.random.default_rng(seed)
    data = {
        "quantity": rng.integers(1, 51, size=rows),
        "price": rng.integers(1, 256, size=rows),
        "discount": rng.integers(0, 11, size=rows),
        "shipdate": rng.integers(0, 256, size=rows),
    }
    spec = TableSpec(Q6_COLUMNS, Q6_BITWIDTHS, rows)
    return PlainTable(spec, {name: tuple(int(v) for v in col) for name, col in data.items()})


def q6_plan(
    date_from: int = 64,
    date_to: int = 192,
    discount: int = 6,
    quantity: int = 24,
) -> QueryPlan:
    """
    Shipdate window, discount within one point of `discount`, small
    quantities; SUM(price * discount).
    """
    return QueryPlan(
        (
            Predicate("shipdate", CompareOp.GE, date_from),
            Predicate("shipdate", CompareOp.LT, date_to),
            Predicate("discount", CompareOp.GE, discount - 1),
            Predicate("discount", CompareOp.LE, discount + 1),
            Predicate("quantity", CompareOp.LT, quantity),
        ),
        ("price", "discount"),
    )
