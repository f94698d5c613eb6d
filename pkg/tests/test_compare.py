"""Tests for encrypted comparison predicates."""

import numpy as np
import pytest
import sympy

from space_switch import (
    ClearEvaluator,
    CompareOp,
    ExtractionStrategy,
    ModulusMismatchError,
    ParamSet,
    eq,
    estimate_depth,
    ge,
    gt,
    le,
    lt,
    lt_direct_prime,
    neq,
    predicate,
)
from space_switch.evaluator import ceil_log2
from space_switch.space_switch import EVAL_SLACK


def clear_evaluator(p: int, r: int) -> ClearEvaluator:
    return ClearEvaluator(ParamSet.create(p, r, estimate_depth(p, r)))


def balanced_pairs(m: int) -> tuple[list[int], list[int]]:
    """Every (a, b) in [0, m)^2 whose difference fits the balanced range."""
    half = (m - 1) // 2
    grid_a, grid_b = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    keep = np.abs(grid_a - grid_b) <= half
    return grid_a[keep].tolist(), grid_b[keep].tolist()


def space_switch_lt_mults(p: int, r: int) -> int:
    ev = clear_evaluator(p, r)
    lt(ev.encode_vector([1, 5]), ev.encode_vector([3, 2]), raise_result=True)
    return ev.ledger.nonscalar_mults


def direct_prime_mults(modulus: int) -> int:
    q = int(sympy.nextprime(modulus))
    ev = ClearEvaluator(ParamSet.create(q, 1, ceil_log2(q) + EVAL_SLACK))
    result = lt_direct_prime(ev.encode_vector([1, 5]), ev.encode_vector([3, 2]))
    assert result.decode() == [1, 0]
    return ev.ledger.nonscalar_mults


class TestCompareOp:
    def test_sql(self):
        assert [op.sql for op in CompareOp] == ["<", "<=", ">", ">=", "=", "!="]

    def test_holds(self):
        assert CompareOp.LE.holds(3, 3)
        assert not CompareOp.GT.holds(3, 3)
        assert CompareOp.NEQ.holds(2, 3)


class TestExhaustive:
    @pytest.mark.parametrize("p,r", [(3, 2), (5, 2), (5, 3), (7, 2), (7, 3)])
    @pytest.mark.parametrize("op", list(CompareOp))
    def test_all_balanced_pairs(self, p: int, r: int, op: CompareOp):
        ev = clear_evaluator(p, r)
        a, b = balanced_pairs(p**r)
        got = predicate(op, ev.encode_vector(a), ev.encode_vector(b)).decode()
        assert got == [int(op.holds(x, y)) for x, y in zip(a, b, strict=True)]


class TestPredicates:
    def test_docstring_example(self):
        ev = clear_evaluator(5, 2)
        assert lt(ev.encode_vector([3, 7, 9]), ev.encode_vector([5, 7, 2])).decode() == [1, 0, 0]

    def test_rewrites(self):
        ev = clear_evaluator(5, 3)
        a, b = ev.encode_vector([10, 40, 40]), ev.encode_vector([40, 40, 10])
        assert le(a, b).decode() == [1, 1, 0]
        assert gt(a, b).decode() == [0, 0, 1]
        assert ge(a, b).decode() == [0, 1, 1]
        assert eq(a, b).decode() == [0, 1, 0]
        assert neq(a, b).decode() == [1, 0, 1]

    def test_plain_operand_either_side(self):
        ev = clear_evaluator(5, 3)
        x = ev.encode_vector([10, 50, 51])
        assert lt(x, 51).decode() == [1, 1, 0]
        assert lt(51, x).decode() == [0, 0, 0]
        assert ge(50, x).decode() == [1, 1, 0]

    def test_result_tags(self):
        ev = clear_evaluator(5, 3)
        x, y = ev.encode_vector([1, 9]), ev.encode_vector([4, 2])
        low = lt(x, y)
        assert low.handle.ptxt_modulus == 5
        assert not low.raised
        high = lt(x, y, raise_result=True)
        assert high.handle.ptxt_modulus == 125
        assert high.raised
        assert high.decode() == [1, 0]

    def test_raised_result_feeds_arithmetic(self):
        ev = clear_evaluator(5, 3)
        x = ev.encode_vector([3, 30])
        mask = gt(x, 10, raise_result=True).handle
        assert ev.decode(ev.he_mul(mask, x)) == [0, 30]

    def test_stage_split(self):
        ev = clear_evaluator(5, 3)
        lt(ev.encode_vector([1]), ev.encode_vector([2]), raise_result=True)
        stages = ev.ledger.stages
        for name in ("reduction", "digit-compare", "aggregation", "raise"):
            assert stages[name].nonscalar_mults > 0
        assert stages["digit-compare"].evaluations == {"F_LT": 3, "F_EQ": 2}
        assert stages["aggregation"].nonscalar_mults == 3

    def test_eq_uses_only_f_eq(self):
        ev = clear_evaluator(5, 3)
        eq(ev.encode_vector([1]), ev.encode_vector([1]))
        assert ev.ledger.evaluations["F_EQ"] == 3
        assert ev.ledger.evaluations["F_LT"] == 0

    @pytest.mark.parametrize("strategy", list(ExtractionStrategy))
    def test_strategies_agree(self, strategy: ExtractionStrategy):
        ev = ClearEvaluator(ParamSet.create(3, 4, estimate_depth(3, 4, strategy)))
        a, b = balanced_pairs(81)
        got = lt(ev.encode_vector(a), ev.encode_vector(b), strategy=strategy).decode()
        assert got == [int(x < y) for x, y in zip(a, b, strict=True)]

    def test_two_constants_rejected(self):
        with pytest.raises(TypeError, match="must be a handle"):
            lt(1, 2)

    def test_operand_tag_checked(self):
        ev = clear_evaluator(5, 3)
        with pytest.raises(ModulusMismatchError, match="tagged p\\^r"):
            lt(ev.encode_vector([1], modulus=25), 3)

    def test_unknown_op(self):
        ev = clear_evaluator(5, 2)
        with pytest.raises(ValueError):
            predicate("between", ev.encode_vector([1]), 2)


class TestDirectPrimeBaseline:
    def test_needs_prime_field(self):
        ev = clear_evaluator(5, 2)
        x = ev.encode_vector([1])
        with pytest.raises(ModulusMismatchError, match="r = 1"):
            lt_direct_prime(x, x)

    def test_space_switch_beats_direct_from_625(self):
        assert space_switch_lt_mults(5, 4) < direct_prime_mults(625)

    def test_advantage_grows_with_domain(self):
        ratios = {
            m: direct_prime_mults(m) / space_switch_lt_mults(p, r)
            for m, (p, r) in {625: (5, 4), 2401: (7, 4), 3125: (5, 5)}.items()
        }
        assert ratios[625] > 1
        assert ratios[2401] > ratios[625]
        assert ratios[3125] > ratios[625]
