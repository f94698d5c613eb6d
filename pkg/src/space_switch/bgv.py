"""
Toy leveled BGV over Z_Q[x]/(x^n + 1). Insecure, desk scale.

Each ciphertext encrypts one integer in the constant coefficient under a
plaintext modulus tag t = p^k:

    c0 + c1*s = m + t*e   (mod Q_level)

Encryption is symmetric (c1 uniform, c0 = m + t*e - c1*s). A product is
tensored, relinearised with a base-2^w gadget key and then modulus
switched, so every ciphertext multiplication consumes exactly one chain
prime. Every chain prime is 1 mod p^r, which keeps the plaintext fixed
under modulus switching and lets divide_by_p multiply by p^(-1) mod Q.

Example:
    >>> params = ParamSet.create(7, 3, levels=2, backend="bgv")
    >>> sk, rk = keygen(params, seed=1)
    >>> a = encrypt(Residue(3, 343), sk, params, seed=2)
    >>> b = encrypt(Residue(4, 343), sk, params, seed=3)
    >>> decrypt(bgv_mul_relin(a, b, rk, params), sk).value
    12
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING

import numpy as np

from .errors import DecryptionError, LevelExhaustedError, ModulusMismatchError
from .evaluator import CipherHandle, Evaluator
from .ledger import CostLedger
from .ring import (
    ERROR_TAIL_CUT,
    Residue,
    RingElem,
    Seed,
    balanced_mod,
    ring_dot,
    ring_scale,
    sample_error,
    sample_ternary,
    sample_uniform,
)

if TYPE_CHECKING:
    from .params import ParamSet

logger = logging.getLogger(__name__)


def gadget_bits(params: "ParamSet") -> int:
    """Gadget digit width w: two digits cover the widest level prime."""
    widest = max(q.bit_length() for q in params.chain[1:]) if params.levels else params.chain[0].bit_length()
    return (widest + 1) // 2


def _log_add(a: float, b: float) -> float:
    """log2(2^a + 2^b)."""
    hi, lo = max(a, b), min(a, b)
    if lo == -math.inf:
        return hi
    return hi + math.log2(1.0 + 2.0 ** (lo - hi))


@dataclass(frozen=True)
class SecretKey:
    """
    Ternary secret s with a fixed Hamming weight.

    Attributes:
        s: Secret polynomial, coefficients mod Q_L
        hamming_weight: Number of nonzero coefficients
    """

    s: RingElem
    hamming_weight: int

    def at(self, modulus: int) -> RingElem:
        return self.s if modulus == self.s.modulus else self.s.reduce(modulus)


@dataclass(frozen=True)
class RelinKey:
    """
    Encryptions of 2^(w*i) * s^2 under s, error scaled by p^r.

    Attributes:
        pairs: (b_i, a_i) with b_i = -a_i*s + p^r*e_i + 2^(w*i)*s^2 mod Q_L
        base_bits: Gadget digit width w
    """

    pairs: tuple[tuple[RingElem, RingElem], ...]
    base_bits: int
    _columns: dict[int, tuple[tuple[RingElem, ...], tuple[RingElem, ...]]] = field(
        default_factory=dict[int, tuple[tuple[RingElem, ...], tuple[RingElem, ...]]],
        init=False,
        repr=False,
        compare=False,
    )

    def at(self, modulus: int) -> tuple[tuple[RingElem, ...], tuple[RingElem, ...]]:
        """Key columns reduced to Q_level, as many as Q_level needs."""
        cached = self._columns.get(modulus)
        if cached is not None:
            return cached
        count = -(-modulus.bit_length() // self.base_bits)
        if count > len(self.pairs):
            raise ModulusMismatchError(f"Relinearisation key too short for modulus of {modulus.bit_length()} bits")
        bs = tuple(RingElem.from_ints(b.coeffs, modulus) for b, _ in self.pairs[:count])
        as_ = tuple(RingElem.from_ints(a.coeffs, modulus) for _, a in self.pairs[:count])
        self._columns[modulus] = (bs, as_)
        return bs, as_


@dataclass(frozen=True)
class BGVCiphertext:
    """
    A two-component ciphertext.

    Attributes:
        c0: First component over Z_{Q_level}
        c1: Second component over Z_{Q_level}
        ptxt_modulus: Plaintext tag p^t
        level: Index of the top chain prime still present
        noise_bits: log2 of a worst-case bound on |c0 + c1*s| (diagnostic)
    """

    c0: RingElem
    c1: RingElem
    ptxt_modulus: int
    level: int
    noise_bits: float

    @property
    def modulus(self) -> int:
        return self.c0.modulus


def keygen(params: "ParamSet", seed: Seed = None) -> tuple[SecretKey, RelinKey]:
    """
    Secret and relinearisation keys over the top modulus Q_L.

    Deterministic for a fixed integer seed.
    """
    rng = np.random.default_rng(params.seed if seed is None else seed)
    q_top = params.q_at(params.levels)
    s = sample_ternary(params.n, params.hamming_weight, rng, q_top)
    s2 = s * s
    w = gadget_bits(params)
    count = -(-q_top.bit_length() // w)
    t = params.modulus
    pairs: list[tuple[RingElem, RingElem]] = []
    for i in range(count):
        a = sample_uniform(params.n, q_top, rng)
        e = sample_error(params.n, params.sigma, rng, q_top)
        b = -(a * s) + ring_scale(e, t) + ring_scale(s2, 1 << (w * i))
        pairs.append((b, a))
    logger.debug("Generated keys: n=%d, weight %d, %d gadget digits of %d bits", params.n, params.hamming_weight, count, w)
    return SecretKey(s, params.hamming_weight), RelinKey(tuple(pairs), w)


def encrypt(
    m: Residue,
    sk: SecretKey,
    params: "ParamSet",
    seed: Seed = None,
    *,
    level: int | None = None,
) -> BGVCiphertext:
    """
    Symmetric encryption of one value under tag m.modulus.

    Raises:
        ModulusMismatchError: If m.modulus is not a power of p dividing p^r
    """
    t = m.modulus
    if t < params.p or params.modulus % t:
        raise ModulusMismatchError(f"Plaintext modulus {t} is not p^k for p={params.p}, k <= {params.r}")
    lvl = params.levels if level is None else level
    q = params.q_at(lvl)
    rng = np.random.default_rng(seed)
    c1 = sample_uniform(params.n, q, rng)
    e = sample_error(params.n, params.sigma, rng, q)
    c0 = RingElem.constant(m.value, params.n, q) + ring_scale(e, t) - c1 * sk.at(q)
    noise = math.log2(t * (0.5 + ERROR_TAIL_CUT * params.sigma))
    return BGVCiphertext(c0, c1, t, lvl, noise)


def _phase(ct: BGVCiphertext, sk: SecretKey) -> tuple[int, ...]:
    return (ct.c0 + ct.c1 * sk.at(ct.modulus)).centered()


def decrypt(ct: BGVCiphertext, sk: SecretKey) -> Residue:
    """
    Recover the plaintext under the ciphertext's tag.

    Raises:
        DecryptionError: If the noise wrapped around Q_level
    """
    v = _phase(ct, sk)
    t, q = ct.ptxt_modulus, ct.modulus
    if any(c % t for c in v[1:]) or max(abs(c) for c in v) >= q // 4:
        raise DecryptionError(
            f"Decryption invalid at level {ct.level}: noise exceeds the modulus budget"
        )
    return Residue.of(v[0], t)


def noise_budget(ct: BGVCiphertext, sk: SecretKey) -> float:
    """
    Remaining noise budget log2(Q_level / (2 * t * |e|)) in bits.

    Positive exactly while decryption is valid.
    """
    v = _phase(ct, sk)
    t = ct.ptxt_modulus
    m = balanced_mod(v[0], t)
    e_norm = max([abs(v[0] - m) // t, *(abs(c) // t for c in v[1:])])
    return math.log2(ct.modulus) - math.log2(2 * t * max(e_norm, 1))


def _check_pair(a: BGVCiphertext, b: BGVCiphertext) -> None:
    if a.ptxt_modulus != b.ptxt_modulus:
        raise ModulusMismatchError(f"Tag mismatch: {a.ptxt_modulus} vs {b.ptxt_modulus}")
    if a.level != b.level:
        raise ModulusMismatchError(f"Level mismatch: {a.level} vs {b.level}")


def bgv_add(a: BGVCiphertext, b: BGVCiphertext) -> BGVCiphertext:
    _check_pair(a, b)
    return BGVCiphertext(a.c0 + b.c0, a.c1 + b.c1, a.ptxt_modulus, a.level, _log_add(a.noise_bits, b.noise_bits))


def bgv_sub(a: BGVCiphertext, b: BGVCiphertext) -> BGVCiphertext:
    _check_pair(a, b)
    return BGVCiphertext(a.c0 - b.c0, a.c1 - b.c1, a.ptxt_modulus, a.level, _log_add(a.noise_bits, b.noise_bits))


def mod_switch(ct: BGVCiphertext, params: "ParamSet") -> BGVCiphertext:
    """
    Drop the top chain prime q, dividing the ciphertext by q with rounding
    that keeps it congruent mod t.

    Raises:
        LevelExhaustedError: If the ciphertext is already at level 0
    """
    if ct.level == 0:
        raise LevelExhaustedError("Cannot modulus switch below level 0")
    q = params.chain[ct.level]
    lower = params.q_at(ct.level - 1)
    t = ct.ptxt_modulus
    t_inv = pow(t, -1, q)

    def switch(c: RingElem) -> RingElem:
        out: list[int] = []
        for x in c.coeffs:
            delta = t * balanced_mod(x * t_inv, q)
            out.append((x - delta) // q)
        return RingElem.from_ints(out, lower)

    rounding = math.log2(t * (1 + params.hamming_weight) / 2)
    noise = _log_add(ct.noise_bits - math.log2(q), rounding)
    return BGVCiphertext(switch(ct.c0), switch(ct.c1), t, ct.level - 1, noise)


def bgv_mul_relin(
    a: BGVCiphertext, b: BGVCiphertext, rk: RelinKey, params: "ParamSet"
) -> BGVCiphertext:
    """
    Tensor, relinearise and modulus switch: the result sits one level lower.

    Raises:
        LevelExhaustedError: If the operands are at level 0
    """
    _check_pair(a, b)
    if a.level == 0:
        raise LevelExhaustedError("Multiplication needs a level, operands are at level 0")
    d0 = a.c0 * b.c0
    d1 = a.c0 * b.c1 + a.c1 * b.c0
    d2 = a.c1 * b.c1

    q = a.modulus
    bs, as_ = rk.at(q)
    w = rk.base_bits
    mask = (1 << w) - 1
    digits = [RingElem(tuple((c >> (w * i)) & mask for c in d2.coeffs), q) for i in range(len(bs))]
    c0 = d0 + ring_dot(digits, bs)
    c1 = d1 + ring_dot(digits, as_)

    n = params.n
    relin_noise = math.log2(params.modulus * len(bs) * n * (1 << w) * ERROR_TAIL_CUT * params.sigma)
    noise = _log_add(a.noise_bits + b.noise_bits + math.log2(n), relin_noise)
    product = BGVCiphertext(c0, c1, a.ptxt_modulus, a.level, noise)
    return mod_switch(product, params)


def mul_const_exact(ct: BGVCiphertext, u: Residue) -> BGVCiphertext:
    """
    Scale both components by a unit u mod Q_level.

    Raises:
        ModulusMismatchError: If u is not reduced mod Q_level
        ValueError: If u is not invertible mod Q_level
    """
    if u.modulus != ct.modulus:
        raise ModulusMismatchError(f"Constant modulus {u.modulus} vs ciphertext modulus {ct.modulus}")
    if math.gcd(u.value, u.modulus) != 1:
        raise ValueError(f"{u.value} is not invertible modulo Q")
    return replace(ct, c0=ring_scale(ct.c0, u), c1=ring_scale(ct.c1, u))


def _scale(ct: BGVCiphertext, c: int) -> BGVCiphertext:
    c = balanced_mod(c, ct.ptxt_modulus)
    noise = ct.noise_bits + math.log2(abs(c)) if c else -math.inf
    return BGVCiphertext(ring_scale(ct.c0, c), ring_scale(ct.c1, c), ct.ptxt_modulus, ct.level, noise)


class BGVEvaluator(Evaluator):
    """
    Evaluator backend over real BGV ciphertexts, one value per handle.

    Binary operations first bring both operands to the lower level by
    modulus switching.
    """

    name = "bgv"

    def __init__(
        self,
        params: "ParamSet",
        seed: Seed = None,
        *,
        ledger: CostLedger | None = None,
        keys: tuple[SecretKey, RelinKey] | None = None,
    ):
        super().__init__(params, ledger)
        base = params.seed if seed is None else seed
        self.secret_key, self.relin_key = keys if keys is not None else keygen(params, base)
        # encryption randomness must not replay the key stream
        self._rng = np.random.default_rng([base, 1]) if isinstance(base, int) else np.random.default_rng(base)

    def _aligned(self, a: CipherHandle, b: CipherHandle) -> tuple[BGVCiphertext, BGVCiphertext]:
        x: BGVCiphertext = a.payload
        y: BGVCiphertext = b.payload
        while x.level > y.level:
            x = mod_switch(x, self.params)
        while y.level > x.level:
            y = mod_switch(y, self.params)
        if a.level != b.level:
            logger.debug("Aligned operands at levels %d and %d to %d", a.level, b.level, x.level)
        return x, y

    def _encrypt(self, values: list[int], modulus: int) -> BGVCiphertext:
        if len(values) != 1:
            raise ValueError(f"The bgv backend holds one value per ciphertext, got {len(values)}")
        return encrypt(Residue(values[0], modulus), self.secret_key, self.params, self._rng)

    def _decode(self, h: CipherHandle) -> list[int]:
        return [decrypt(h.payload, self.secret_key).value]

    def _add(self, a: CipherHandle, b: CipherHandle) -> BGVCiphertext:
        return bgv_add(*self._aligned(a, b))

    def _sub(self, a: CipherHandle, b: CipherHandle) -> BGVCiphertext:
        return bgv_sub(*self._aligned(a, b))

    def _neg(self, a: CipherHandle) -> BGVCiphertext:
        ct: BGVCiphertext = a.payload
        return replace(ct, c0=-ct.c0, c1=-ct.c1)

    def _add_const(self, a: CipherHandle, c: int) -> BGVCiphertext:
        ct: BGVCiphertext = a.payload
        shift = RingElem.constant(c, self.params.n, ct.modulus)
        return replace(ct, c0=ct.c0 + shift, noise_bits=_log_add(ct.noise_bits, math.log2(ct.ptxt_modulus)))

    def _mul(self, a: CipherHandle, b: CipherHandle) -> BGVCiphertext:
        return bgv_mul_relin(*self._aligned(a, b), self.relin_key, self.params)

    def _mul_const(self, a: CipherHandle, c: int) -> BGVCiphertext:
        return _scale(a.payload, c)

    def _retag(self, a: CipherHandle, modulus: int) -> BGVCiphertext:
        return replace(a.payload, ptxt_modulus=modulus)

    def _divide_by_p(self, a: CipherHandle) -> BGVCiphertext:
        ct: BGVCiphertext = a.payload
        p_inv = Residue(pow(self.p, -1, ct.modulus), ct.modulus)
        out = mul_const_exact(ct, p_inv)
        return replace(out, ptxt_modulus=ct.ptxt_modulus // self.p, noise_bits=ct.noise_bits - math.log2(self.p))

    def slot_count(self, h: CipherHandle) -> int:
        return 1

    def noise_budget(self, h: CipherHandle) -> float:
        self._check_owner(h)
        return noise_budget(h.payload, self.secret_key)

    def adopt(self, ct: BGVCiphertext) -> CipherHandle:
        """
        Wrap a ciphertext read from disk as a fresh handle of this evaluator.

        Raises:
            ModulusMismatchError: If its tag is not a power of p up to p^r
        """
        self.check_tag(ct.ptxt_modulus)
        if ct.modulus != self.params.q_at(ct.level):
            raise ModulusMismatchError(f"Ciphertext modulus does not match level {ct.level} of this chain")
        return self._wrap(ct, ct.ptxt_modulus, ct.level, 0)
