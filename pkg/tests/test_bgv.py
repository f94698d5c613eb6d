"""Tests for the toy BGV backend."""

from dataclasses import replace

import numpy as np
import pytest

from space_switch import (
    BGVEvaluator,
    DecryptionError,
    InfeasibleParametersError,
    LevelExhaustedError,
    ModulusMismatchError,
    ParamSet,
    Residue,
    RingElem,
    estimate_depth,
    keygen,
    lt,
    raise_mod,
    reduce_to_digits,
)
from space_switch.bgv import (
    bgv_add,
    bgv_mul_relin,
    decrypt,
    encrypt,
    gadget_bits,
    mod_switch,
    noise_budget,
)
from space_switch.space_switch import change_mod_to_p


@pytest.fixture(scope="module")
def params() -> ParamSet:
    return ParamSet.create(7, 3, 3, backend="bgv")


@pytest.fixture(scope="module")
def keys(params: ParamSet):
    return keygen(params, seed=1)


class TestKeys:
    def test_deterministic(self, params: ParamSet):
        sk1, _ = keygen(params, seed=5)
        sk2, _ = keygen(params, seed=5)
        assert sk1.s == sk2.s

    def test_secret_weight(self, params: ParamSet, keys):
        sk, rk = keys
        centered = sk.s.centered()
        assert sum(1 for c in centered if c) == params.hamming_weight == 16
        assert rk.base_bits == gadget_bits(params)

    def test_r_above_p_rejected(self):
        with pytest.raises(InfeasibleParametersError, match="r <= p"):
            ParamSet.create(3, 4, 2, backend="bgv")


class TestEncryptDecrypt:
    def test_identity_on_random_plaintexts(self, params: ParamSet, keys):
        sk, _ = keys
        rng = np.random.default_rng(0)
        for i, m in enumerate(rng.integers(0, params.modulus, size=1000).tolist()):
            ct = encrypt(Residue(m, params.modulus), sk, params, seed=i)
            assert decrypt(ct, sk).value == m

    def test_fresh_noise_budget(self, params: ParamSet, keys):
        sk, _ = keys
        ct = encrypt(Residue(5, 343), sk, params, seed=1)
        assert noise_budget(ct, sk) > 40

    def test_lower_tag(self, params: ParamSet, keys):
        sk, _ = keys
        ct = encrypt(Residue(6, 49), sk, params, seed=2)
        assert decrypt(ct, sk) == Residue(6, 49)

    def test_bad_tag(self, params: ParamSet, keys):
        sk, _ = keys
        with pytest.raises(ModulusMismatchError, match="not p\\^k"):
            encrypt(Residue(1, 11), sk, params)

    def test_wrapped_noise_detected(self, params: ParamSet, keys):
        sk, _ = keys
        ct = encrypt(Residue(1, 343), sk, params, seed=3)
        q = ct.modulus
        noisy = replace(ct, c0=ct.c0 + RingElem.constant(q // 3, params.n, q))
        with pytest.raises(DecryptionError, match="noise"):
            decrypt(noisy, sk)


class TestHomomorphicOps:
    def test_docstring_product(self):
        params = ParamSet.create(7, 3, 2, backend="bgv")
        sk, rk = keygen(params, seed=1)
        a = encrypt(Residue(3, 343), sk, params, seed=2)
        b = encrypt(Residue(4, 343), sk, params, seed=3)
        prod = bgv_mul_relin(a, b, rk, params)
        assert decrypt(prod, sk).value == 12
        assert prod.level == a.level - 1

    def test_mul_chain_keeps_budget(self, params: ParamSet, keys):
        sk, rk = keys
        ct = encrypt(Residue(2, 343), sk, params, seed=4)
        acc = ct
        budgets = [noise_budget(acc, sk)]
        for _ in range(params.levels):
            acc = bgv_mul_relin(acc, mod_switch_to(ct, acc.level, params), rk, params)
            budgets.append(noise_budget(acc, sk))
        assert decrypt(acc, sk).value == 2 ** (params.levels + 1) % 343
        assert all(b > 0 for b in budgets)
        assert all(b1 > b2 for b1, b2 in zip(budgets, budgets[1:]))

    def test_add(self, params: ParamSet, keys):
        sk, _ = keys
        a = encrypt(Residue(300, 343), sk, params, seed=5)
        b = encrypt(Residue(50, 343), sk, params, seed=6)
        assert decrypt(bgv_add(a, b), sk).value == 7

    def test_level_zero(self, params: ParamSet, keys):
        sk, rk = keys
        ct = encrypt(Residue(1, 343), sk, params, seed=7, level=0)
        with pytest.raises(LevelExhaustedError):
            mod_switch(ct, params)
        with pytest.raises(LevelExhaustedError):
            bgv_mul_relin(ct, ct, rk, params)

    def test_level_mismatch(self, params: ParamSet, keys):
        sk, _ = keys
        a = encrypt(Residue(1, 343), sk, params, seed=8)
        b = mod_switch(encrypt(Residue(1, 343), sk, params, seed=9), params)
        with pytest.raises(ModulusMismatchError, match="Level mismatch"):
            bgv_add(a, b)


def mod_switch_to(ct, level: int, params: ParamSet):
    while ct.level > level:
        ct = mod_switch(ct, params)
    return ct


class TestBGVEvaluator:
    def test_one_value_per_handle(self, params: ParamSet):
        ev = BGVEvaluator(params, seed=1)
        with pytest.raises(ValueError, match="one value per ciphertext"):
            ev.encrypt([1, 2])
        assert ev.encrypt(3).slots == 1

    def test_operations_align_levels(self, params: ParamSet):
        ev = BGVEvaluator(params, seed=1)
        a = ev.encrypt(5)
        sq = ev.he_mul(a, a)
        total = ev.he_add(sq, a)
        assert ev.decode(total) == [30]
        assert total.level == params.levels - 1

    def test_divide_by_p(self, params: ParamSet):
        ev = BGVEvaluator(params, seed=2)
        x = ev.encrypt(-14)
        q = ev.divide_by_p(x)
        assert q.ptxt_modulus == 49
        assert ev.decode_balanced(q) == [-2]

    def test_divide_by_p_keeps_budget(self, params: ParamSet):
        ev = BGVEvaluator(params, seed=5)
        for value in (-14, 0, 7, 49, 168):
            x = ev.encrypt(value)
            for h in (x, ev.he_mul_plain(ev.he_mul(x, ev.encrypt(1)), 1)):
                before = ev.noise_budget(h)
                after = ev.noise_budget(ev.divide_by_p(h))
                assert after >= before - 1

    def test_digits(self):
        params = ParamSet.create(5, 3, estimate_depth(5, 3), backend="bgv")
        ev = BGVEvaluator(params, seed=3)
        assert reduce_to_digits(ev.encrypt(117)).decode() == [(2, -2, 0)]

    def test_raise_roundtrip(self):
        params = ParamSet.create(5, 2, estimate_depth(5, 2), backend="bgv")
        for seed in range(2):
            ev = BGVEvaluator(params, seed=seed)
            for z in range(-2, 3):
                raised = raise_mod(change_mod_to_p(ev.encrypt(z)))
                assert ev.decode_balanced(raised) == [z]
                assert ev.noise_budget(raised) > 0

    @pytest.mark.parametrize(
        "p,r,pairs",
        [
            (5, 2, [(0, 0), (3, 9), (9, 3), (12, 0), (0, 12), (7, 7)]),
            (7, 2, [(20, 4), (4, 20)]),
            (5, 3, [(60, 1)]),
        ],
    )
    def test_lt_pipeline(self, p: int, r: int, pairs: list[tuple[int, int]]):
        params = ParamSet.create(p, r, estimate_depth(p, r), backend="bgv")
        ev = BGVEvaluator(params, seed=4)
        for a, b in pairs:
            result = lt(ev.encrypt(a), ev.encrypt(b), raise_result=True)
            assert result.decode() == [int(a < b)]
            assert ev.noise_budget(result.handle) > 0

    @pytest.mark.slow
    @pytest.mark.parametrize("p,r", [(5, 2), (5, 3), (7, 2)])
    def test_lt_random_pairs(self, p: int, r: int):
        params = ParamSet.create(p, r, estimate_depth(p, r), backend="bgv")
        ev = BGVEvaluator(params, seed=9)
        half = (p**r - 1) // 2
        rng = np.random.default_rng(p * 10 + r)
        for a, b in rng.integers(0, half + 1, size=(1000, 2)).tolist():
            result = lt(ev.encrypt(a), ev.encrypt(b), raise_result=True)
            assert result.decode() == [int(a < b)]
            assert ev.noise_budget(result.handle) > 0

    def test_shared_keys(self, params: ParamSet, keys):
        ev1 = BGVEvaluator(params, keys=keys)
        ev2 = BGVEvaluator(params, keys=keys)
        h = ev1.encrypt(42)
        assert ev2.decode(ev2.adopt(h.payload)) == [42]

    def test_adopt_checks_chain(self, params: ParamSet, keys):
        ev = BGVEvaluator(params, keys=keys)
        ct = encrypt(Residue(1, 343), keys[0], params, seed=1)
        with pytest.raises(ModulusMismatchError, match="does not match"):
            ev.adopt(replace(ct, level=ct.level - 1))
        with pytest.raises(ModulusMismatchError):
            ev.adopt(replace(ct, ptxt_modulus=11))
