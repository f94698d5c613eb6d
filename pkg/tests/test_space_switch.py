"""Tests for digit reduction, modulus raising and the depth estimate."""

import pytest

from space_switch import (
    ClearEvaluator,
    ExtractionStrategy,
    LevelExhaustedError,
    ModulusMismatchError,
    ParamSet,
    change_mod_to_p,
    divide_by_p,
    estimate_depth,
    extraction_eval_counts,
    lt,
    raise_mod,
    reduce_to_digits,
)
from space_switch.ring import Residue, base_p_digits
from space_switch.space_switch import (
    EVAL_SLACK,
    DigitBundle,
    depth_breakdown,
    extraction_plan,
    lowest_digit_poly,
)

ALL_STRATEGIES = list(ExtractionStrategy)


def clear_evaluator(
    p: int, r: int, strategy: ExtractionStrategy = ExtractionStrategy.SPACE_SWITCH, seed: int = 0
) -> ClearEvaluator:
    return ClearEvaluator(ParamSet.create(p, r, estimate_depth(p, r, strategy)), seed)


class TestEvaluationCounts:
    def test_halevi_shoup(self):
        assert extraction_eval_counts(5, 4, ExtractionStrategy.HALEVI_SHOUP) == {"F_p": 6}

    def test_chen_han(self):
        assert extraction_eval_counts(5, 4, ExtractionStrategy.CHEN_HAN) == {
            "F_p": 3,
            "G_{p,4}": 1,
            "G_{p,3}": 1,
            "G_{p,2}": 1,
        }

    def test_geelen(self):
        assert extraction_eval_counts(5, 4, ExtractionStrategy.GEELEN) == {
            "G_{p,2}": 3,
            "G_{p,3}": 2,
            "G_{p,4}": 1,
        }

    def test_space_switch_needs_r_minus_one(self):
        assert extraction_eval_counts(5, 4, ExtractionStrategy.SPACE_SWITCH) == {
            "G_{p,4}": 1,
            "G_{p,3}": 1,
            "G_{p,2}": 1,
        }

    @pytest.mark.parametrize("strategy", ALL_STRATEGIES)
    def test_single_digit_needs_nothing(self, strategy: ExtractionStrategy):
        assert extraction_eval_counts(7, 1, strategy) == {}

    def test_bad_r(self):
        with pytest.raises(ValueError, match="at least 1"):
            extraction_plan(5, 0, ExtractionStrategy.SPACE_SWITCH)

    @pytest.mark.parametrize("strategy", ALL_STRATEGIES)
    def test_ledger_matches_plan(self, strategy: ExtractionStrategy):
        ev = clear_evaluator(3, 4, strategy)
        reduce_to_digits(ev.encode_vector(list(range(81))), strategy)
        assert dict(ev.ledger.stages["reduction"].evaluations) == extraction_eval_counts(3, 4, strategy)


class TestReduceToDigits:
    def test_known_digits(self):
        ev = clear_evaluator(5, 3)
        bundle = reduce_to_digits(ev.encode_vector([117, 33]))
        assert bundle.decode() == [(2, -2, 0), (-2, 2, 1)]
        assert bundle.recompose() == [117, 33]
        assert all(d.ptxt_modulus == 5 for d in bundle.digits)

    @pytest.mark.parametrize("p,r", [(3, 2), (3, 4), (5, 2), (5, 3), (7, 3)])
    @pytest.mark.parametrize("strategy", ALL_STRATEGIES)
    def test_every_residue(self, p: int, r: int, strategy: ExtractionStrategy):
        m = p**r
        ev = clear_evaluator(p, r, strategy)
        bundle = reduce_to_digits(ev.encode_vector(list(range(m))), strategy)
        assert bundle.decode() == [base_p_digits(Residue(v, m), p, r) for v in range(m)]

    def test_single_digit_is_free(self):
        ev = clear_evaluator(7, 1)
        bundle = reduce_to_digits(ev.encode_vector([3, 4]))
        assert bundle.decode() == [(3,), (-3,)]
        assert ev.ledger.nonscalar_mults == 0

    def test_space_switch_is_cheapest(self):
        costs = {}
        for strategy in ALL_STRATEGIES:
            ev = clear_evaluator(5, 4, strategy)
            reduce_to_digits(ev.encode_vector([1, 2, 3]), strategy)
            costs[strategy] = ev.ledger.nonscalar_mults
        assert costs[ExtractionStrategy.SPACE_SWITCH] == min(costs.values())

    def test_wrong_tag(self):
        ev = clear_evaluator(5, 3)
        with pytest.raises(ModulusMismatchError, match="expects tag 125"):
            reduce_to_digits(ev.encode_vector([1], modulus=25))

    def test_too_few_levels(self):
        ev = ClearEvaluator(ParamSet.create(5, 3, 2))
        with pytest.raises(LevelExhaustedError):
            reduce_to_digits(ev.encode_vector([1]))

    def test_bundle_checks_digit_count(self):
        ev = clear_evaluator(5, 3)
        digit = ev.encode_vector([1], modulus=5)
        with pytest.raises(ModulusMismatchError, match="cannot recompose"):
            DigitBundle((digit, digit), 125)
        with pytest.raises(ValueError, match="at least one digit"):
            DigitBundle((), 125)


class TestSpaceChanges:
    def test_divide_and_change(self):
        ev = clear_evaluator(5, 3)
        x = ev.encode_vector([50, 75])
        assert ev.decode(divide_by_p(x)) == [10, 15]
        low = change_mod_to_p(x)
        assert low.ptxt_modulus == 5
        assert ev.decode(low) == [0, 0]

    @pytest.mark.parametrize("p,r", [(3, 2), (3, 5), (5, 2), (5, 3), (5, 4), (7, 2), (7, 3), (11, 3), (23, 3)])
    def test_raise_roundtrip_over_seeds(self, p: int, r: int):
        half = p // 2
        values = list(range(-half, half + 1))
        params = ParamSet.create(p, r, estimate_depth(p, r))
        for seed in range(100):
            ev = ClearEvaluator(params, seed)
            x = ev.encode_vector(values)
            raised = raise_mod(change_mod_to_p(x))
            assert raised.ptxt_modulus == p**r
            assert ev.decode_balanced(raised) == values

    def test_raise_charges_stage(self):
        ev = clear_evaluator(5, 3)
        raise_mod(ev.encode_vector([1, -2], modulus=5))
        assert ev.ledger.stages["raise"].evaluations["G_{p,3}"] == 1

    def test_raise_is_identity_for_prime(self):
        ev = clear_evaluator(7, 1)
        x = ev.encode_vector([3])
        assert raise_mod(x) is x

    def test_raise_needs_p_tag(self):
        ev = clear_evaluator(5, 3)
        with pytest.raises(ModulusMismatchError, match="expects tag 5"):
            raise_mod(ev.encode_vector([1]))


class TestDepthEstimate:
    def test_breakdown_example(self):
        est = depth_breakdown(5, 3)
        assert est.reduction == 7
        assert est.compare == 3
        assert est.aggregation == 2
        assert est.raise_ == 4
        assert est.slack == EVAL_SLACK * 4
        assert estimate_depth(5, 3) == est.total == 24

    def test_prime_field(self):
        est = depth_breakdown(7, 1)
        assert (est.reduction, est.aggregation, est.raise_) == (0, 0, 0)
        assert est.slack == EVAL_SLACK

    @pytest.mark.parametrize("strategy", ALL_STRATEGIES)
    def test_estimate_covers_metered_depth(self, strategy: ExtractionStrategy):
        ev = clear_evaluator(5, 3, strategy)
        result = lt(ev.encode_vector([3, 60]), ev.encode_vector([7, 2]), strategy=strategy)
        assert result.decode() == [1, 0]
        assert result.handle.depth <= estimate_depth(5, 3, strategy)

    def test_lowest_digit_poly_rereads(self):
        g = lowest_digit_poly(5, 2, 125)
        assert g.modulus == 125
        assert lowest_digit_poly(5, 2).modulus == 25
