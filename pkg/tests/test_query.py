"""Tests for table ingest and encrypted filter + aggregate queries."""

from pathlib import Path

import numpy as np
import pytest

from space_switch import (
    BGVEvaluator,
    ClearEvaluator,
    CompareOp,
    InfeasibleParametersError,
    IngestError,
    LevelExhaustedError,
    ParamSet,
    PlainTable,
    Predicate,
    QueryPlan,
    ReferenceEngine,
    TableSpec,
    encrypt_table,
    estimate_depth,
    generate_q6_table,
    ingest_csv,
    load_table,
    q6_plan,
    run_query,
    select_params,
)
from space_switch.query import query_extra_depth, required_bitwidth


def write_csv(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


@pytest.fixture
def small_table() -> PlainTable:
    spec = TableSpec(("qty", "price", "disc"), (6, 4, 4), 8)
    return PlainTable(
        spec,
        {
            "qty": (10, 30, 5, 23, 24, 1, 50, 12),
            "price": (5, 9, 4, 15, 7, 0, 8, 5),
            "disc": (3, 2, 7, 1, 4, 9, 6, 0),
        },
    )


def clear_table(table: PlainTable, plan: QueryPlan):
    params = select_params(required_bitwidth(table.spec, plan), extra_depth=query_extra_depth(plan))
    return encrypt_table(table, ClearEvaluator(params))


class TestTableSpec:
    def test_uniform(self):
        spec = TableSpec.uniform(["a", "b"], 8, 3)
        assert spec.bitwidths == (8, 8)
        assert spec.width("b") == 8
        assert TableSpec.from_dict(spec.to_dict()) == spec

    @pytest.mark.parametrize(
        "columns,bitwidths,rows,match",
        [
            ((), (), 1, "at least one column"),
            (("a", "b"), (8,), 1, "2 columns but 1 bit widths"),
            (("a", "a"), (8, 8), 1, "Duplicate column names"),
            (("a b",), (8,), 1, "not a plain identifier"),
            (("a",), (0,), 1, "outside \\[1, 24\\]"),
            (("a",), (25,), 1, "outside \\[1, 24\\]"),
            (("a",), (8,), 0, "at least one row"),
        ],
    )
    def test_invalid(self, columns, bitwidths, rows, match: str):
        with pytest.raises(ValueError, match=match):
            TableSpec(columns, bitwidths, rows)

    def test_unknown_column(self):
        with pytest.raises(ValueError, match="Unknown column 'z'"):
            TableSpec.uniform(["a"], 8, 1).index("z")


class TestPlainTable:
    def test_rows(self, small_table: PlainTable):
        rows = small_table.rows()
        assert len(rows) == 8
        assert rows[3] == {"qty": 23, "price": 15, "disc": 1}

    def test_missing_column(self):
        with pytest.raises(ValueError, match="Missing column 'b'"):
            PlainTable(TableSpec.uniform(["a", "b"], 4, 1), {"a": (1,)})

    def test_row_count(self):
        with pytest.raises(ValueError, match="has 2 rows, expected 1"):
            PlainTable(TableSpec.uniform(["a"], 4, 1), {"a": (1, 2)})

    def test_range_names_row(self):
        with pytest.raises(IngestError, match="Row 2, column 'a': value 16 outside \\[0, 16\\)"):
            PlainTable(TableSpec.uniform(["a"], 4, 2), {"a": (1, 16)})


class TestLoadTable:
    def test_roundtrip(self, tmp_path: Path, small_table: PlainTable):
        path = tmp_path / "t.csv"
        small_table.write_csv(path)
        loaded = load_table(path, small_table.spec)
        assert loaded == small_table

    def test_default_widths(self, tmp_path: Path):
        path = write_csv(tmp_path / "t.csv", "a, b\n1,2\n3,4\n")
        table = load_table(path, bitwidth=6, bitwidths={"b": 3})
        assert table.spec.columns == ("a", "b")
        assert table.spec.bitwidths == (6, 3)
        assert table.column("b") == (2, 4)

    def test_value_out_of_range(self, tmp_path: Path):
        path = write_csv(tmp_path / "t.csv", "a,b\n1,2\n3,256\n")
        with pytest.raises(IngestError, match="Row 2, column 'b': value 256"):
            load_table(path)

    def test_negative_value(self, tmp_path: Path):
        path = write_csv(tmp_path / "t.csv", "a\n-1\n")
        with pytest.raises(IngestError, match="Row 1"):
            load_table(path)

    def test_not_an_integer(self, tmp_path: Path):
        path = write_csv(tmp_path / "t.csv", "a,b\n1,2\n3,x\n")
        with pytest.raises(IngestError, match="Row 2, column 'b': 'x' is not an integer"):
            load_table(path)

    def test_ragged_row(self, tmp_path: Path):
        path = write_csv(tmp_path / "t.csv", "a,b\n1,2\n3\n")
        with pytest.raises(IngestError, match="Row 2: 1 cells, expected 2"):
            load_table(path)

    def test_empty_file(self, tmp_path: Path):
        path = write_csv(tmp_path / "t.csv", "")
        with pytest.raises(IngestError, match="missing header row"):
            load_table(path)

    def test_header_only(self, tmp_path: Path):
        path = write_csv(tmp_path / "t.csv", "a,b\n")
        with pytest.raises(IngestError, match="no data rows"):
            load_table(path)

    def test_header_mismatch(self, tmp_path: Path):
        path = write_csv(tmp_path / "t.csv", "a,c\n1,2\n")
        with pytest.raises(IngestError, match="does not match"):
            load_table(path, TableSpec.uniform(["a", "b"], 8, 1))

    def test_row_count_mismatch(self, tmp_path: Path):
        path = write_csv(tmp_path / "t.csv", "a\n1\n2\n")
        with pytest.raises(IngestError, match="2 data rows, expected 3"):
            load_table(path, TableSpec.uniform(["a"], 8, 3))

    def test_bad_header_name(self, tmp_path: Path):
        path = write_csv(tmp_path / "t.csv", "a,a\n1,2\n")
        with pytest.raises(IngestError, match="Duplicate"):
            load_table(path)

    def test_missing_file(self, tmp_path: Path):
        with pytest.raises(OSError):
            load_table(tmp_path / "absent.csv")


class TestEncryptTable:
    def test_ingest_packs_columns(self, tmp_path: Path):
        path = write_csv(tmp_path / "t.csv", "a,b\n1,2\n3,4\n5,6\n")
        ev = ClearEvaluator(ParamSet.create(23, 2, 4))
        enc = ingest_csv(path, None, ev)
        assert enc.packed
        assert [len(enc.handles(c)) for c in ("a", "b")] == [1, 1]
        assert enc.handles("a")[0].slots == 3
        assert enc.decode_column("a") == [1, 3, 5]
        assert enc.decode_column("b") == [2, 4, 6]

    def test_bgv_one_handle_per_cell(self):
        table = PlainTable(TableSpec.uniform(["a"], 3, 3), {"a": (1, 5, 7)})
        ev = BGVEvaluator(ParamSet.create(5, 2, 1, backend="bgv"), seed=1)
        enc = encrypt_table(table, ev)
        assert not enc.packed
        assert len(enc.handles("a")) == 3
        assert enc.decode_column("a") == [1, 5, 7]

    def test_slot_capacity(self, small_table: PlainTable):
        ev = ClearEvaluator(ParamSet.create(23, 2, 4, max_slots=4))
        with pytest.raises(IngestError, match="exceed the clear backend's limit of 4"):
            encrypt_table(small_table, ev)

    def test_column_too_wide(self):
        table = PlainTable(TableSpec.uniform(["a"], 8, 1), {"a": (200,)})
        with pytest.raises(InfeasibleParametersError, match="p\\^r = 125 is too small"):
            encrypt_table(table, ClearEvaluator(ParamSet.create(5, 3, 4)))


class TestPredicate:
    def test_parse(self):
        pred = Predicate.parse("qty:lt:24")
        assert pred == Predicate("qty", CompareOp.LT, 24)
        assert str(pred) == "qty < 24"

    def test_parse_strips_spaces(self):
        assert Predicate.parse(" price : ge : 5 ") == Predicate("price", CompareOp.GE, 5)

    def test_op_from_string(self):
        assert Predicate("a", "neq", 1).op is CompareOp.NEQ

    @pytest.mark.parametrize(
        "text,match",
        [
            ("qty<24", "not of the form"),
            ("qty:lt", "not of the form"),
            ("qty:between:24", "op must be one of"),
            ("qty:lt:many", "op must be one of"),
        ],
    )
    def test_parse_errors(self, text: str, match: str):
        with pytest.raises(ValueError, match=match):
            Predicate.parse(text)


class TestQueryPlan:
    def test_from_flags_and_sql(self):
        plan = QueryPlan.from_flags(["qty:lt:24", "price:ge:5"], "price * disc")
        assert plan.sum == ("price", "disc")
        assert plan.sql() == "SUM(price * disc) WHERE qty < 24 AND price >= 5"

    def test_no_where(self):
        assert QueryPlan((), ("a",)).sql() == "SUM(a)"

    def test_json_roundtrip(self):
        plan = q6_plan()
        assert QueryPlan.from_json(plan.to_json()) == plan

    def test_invalid_json(self):
        with pytest.raises(ValueError, match="Invalid query plan"):
            QueryPlan.from_json('{"where": []}')
        with pytest.raises(ValueError, match="Invalid query plan"):
            QueryPlan.from_json("not json")

    def test_needs_aggregate(self):
        with pytest.raises(ValueError, match="at least one column to aggregate"):
            QueryPlan((), ())

    def test_validate(self, small_table: PlainTable):
        spec = small_table.spec
        QueryPlan.from_flags(["qty:le:64"], "price").validate(spec)
        with pytest.raises(ValueError, match="Unknown column"):
            QueryPlan.from_flags(["weight:lt:3"], "price").validate(spec)
        with pytest.raises(ValueError, match="Unknown column"):
            QueryPlan.from_flags([], "price*weight").validate(spec)
        with pytest.raises(ValueError, match="outside \\[0, 64\\]"):
            QueryPlan.from_flags(["qty:lt:65"], "price").validate(spec)

    def test_required_bitwidth(self):
        spec = generate_q6_table(256).spec
        assert required_bitwidth(spec, q6_plan()) == 12
        assert required_bitwidth(spec, q6_plan(), "bgv") == 20

    def test_extra_depth(self):
        assert query_extra_depth(q6_plan()) == 5
        assert query_extra_depth(QueryPlan((), ("a",))) == 1


class TestRunQuery:
    def test_small_example(self, small_table: PlainTable):
        plan = QueryPlan.from_flags(["qty:lt:24", "price:ge:5"], "price*disc")
        result = run_query(plan, clear_table(small_table, plan))
        assert result.value == 30
        with ReferenceEngine(small_table) as ref:
            assert ref.run(plan) == 30

    def test_empty_qualifying_set(self, small_table: PlainTable):
        plan = QueryPlan.from_flags(["qty:gt:60"], "price*disc")
        assert run_query(plan, clear_table(small_table, plan)).value == 0
        with ReferenceEngine(small_table) as ref:
            assert ref.run(plan) == 0

    def test_no_predicates(self, small_table: PlainTable):
        plan = QueryPlan.from_flags([], "price")
        assert run_query(plan, clear_table(small_table, plan)).value == sum(small_table.column("price"))

    def test_q6_matches_reference(self):
        table = generate_q6_table(256, seed=7)
        plan = q6_plan()
        result = run_query(plan, clear_table(table, plan))
        with ReferenceEngine(table) as ref:
            expected = ref.run(plan)
        assert result.value == expected
        assert result.value > 0

    @pytest.mark.parametrize("seed", [1, 2, 3])
    def test_q6_windows(self, seed: int):
        table = generate_q6_table(64, seed=seed)
        plan = q6_plan(date_from=10, date_to=250, discount=3, quantity=40)
        result = run_query(plan, clear_table(table, plan))
        with ReferenceEngine(table) as ref:
            assert result.value == ref.run(plan)

    def test_report(self, small_table: PlainTable):
        plan = QueryPlan.from_flags(["qty:lt:24", "price:ge:5"], "price*disc")
        report = run_query(plan, clear_table(small_table, plan)).report
        for name in ("reduction", "digit-compare", "aggregation", "raise", "arithmetic"):
            assert name in report.stages
        totals = report.totals
        assert totals.nonscalar_mults == sum(c.nonscalar_mults for c in report.stages.values())
        assert sum(report.shares().values()) == pytest.approx(1.0)
        assert report.stages["arithmetic"].nonscalar_mults == 2
        data = report.to_dict()
        assert data["schema"] == 1
        assert data["result"] == 30
        assert data["rows"] == 8
        assert data["stages"]["digit-compare"]["nonscalar"] > 0
        text = report.render_text()
        assert "digit-compare" in text
        assert "total" in text

    def test_report_counts_only_this_query(self, small_table: PlainTable):
        plan = QueryPlan.from_flags(["qty:lt:24"], "price")
        enc = clear_table(small_table, plan)
        first = run_query(plan, enc).report
        second = run_query(plan, enc).report
        assert first.totals.nonscalar_mults == second.totals.nonscalar_mults

    def test_plan_too_wide(self):
        table = PlainTable(TableSpec.uniform(["a", "b"], 6, 2), {"a": (1, 2), "b": (3, 4)})
        enc = encrypt_table(table, ClearEvaluator(ParamSet.create(5, 3, 30)))
        with pytest.raises(InfeasibleParametersError, match="Plan needs"):
            run_query(QueryPlan.from_flags([], "a*b"), enc)

    def test_short_chain_names_stage(self, small_table: PlainTable):
        enc = encrypt_table(small_table, ClearEvaluator(ParamSet.create(23, 2, 3)))
        plan = QueryPlan.from_flags(["qty:lt:24"], "price")
        with pytest.raises(LevelExhaustedError) as excinfo:
            run_query(plan, enc)
        assert excinfo.value.stage == "reduction"

    def test_bgv_query(self):
        table = PlainTable(
            TableSpec(("flag", "amount"), (2, 1), 4),
            {"flag": (0, 3, 1, 2), "amount": (1, 1, 1, 0)},
        )
        plan = QueryPlan.from_flags(["flag:lt:2"], "amount")
        assert required_bitwidth(table.spec, plan, "bgv") == 3
        params = ParamSet.create(5, 2, estimate_depth(5, 2) + query_extra_depth(plan), backend="bgv")
        result = run_query(plan, encrypt_table(table, BGVEvaluator(params, seed=3)))
        assert result.value == 2
        assert "homomorphically" in result.report.summation
        with ReferenceEngine(table) as ref:
            assert ref.run(plan) == 2

    @pytest.mark.slow
    def test_bgv_two_predicates_32_rows(self):
        rng = np.random.default_rng(11)
        spec = TableSpec(("qty", "price", "disc"), (3, 2, 2), 32)
        table = PlainTable(
            spec,
            {
                name: tuple(int(v) for v in rng.integers(0, 1 << bits, size=32))
                for name, bits in zip(spec.columns, spec.bitwidths, strict=True)
            },
        )
        plan = QueryPlan.from_flags(["qty:lt:5", "disc:ge:1"], "price*disc")
        params = select_params(
            required_bitwidth(spec, plan, "bgv"), backend="bgv", extra_depth=query_extra_depth(plan)
        )
        result = run_query(plan, encrypt_table(table, BGVEvaluator(params, seed=2)))
        with ReferenceEngine(table) as ref:
            assert result.value == ref.run(plan)


class TestReferenceEngine:
    def test_closed(self, small_table: PlainTable):
        ref = ReferenceEngine(small_table)
        ref.close()
        with pytest.raises(ValueError, match="closed"):
            ref.run(QueryPlan((), ("qty",)))

    def test_all_ops(self, small_table: PlainTable):
        with ReferenceEngine(small_table) as ref:
            for op in CompareOp:
                plan = QueryPlan((Predicate("qty", op, 23),), ("price",))
                expected = sum(
                    p for q, p in zip(small_table.column("qty"), small_table.column("price"), strict=True)
                    if op.holds(q, 23)
                )
                assert ref.run(plan) == expected


class TestQ6Table:
    def test_deterministic(self):
        assert generate_q6_table(32, seed=4) == generate_q6_table(32, seed=4)

    def test_ranges(self):
        table = generate_q6_table(512, seed=0)
        assert min(table.column("quantity")) >= 1
        assert max(table.column("quantity")) <= 50
        assert max(table.column("discount")) <= 10
        assert table.spec.rows == 512
