"""
Modular integers and the negacyclic ring Z_q[x]/(x^n + 1).

Both evaluation backends sit on top of this module: the cleartext backend only
needs Residue and the balanced digit helpers, the toy BGV backend builds its
ciphertexts out of RingElem values.

Multiplication uses Kronecker substitution: both operands are packed into one
big integer with fixed-width byte slots, multiplied once by CPython's bignum
code, and unpacked. The schoolbook convolution is kept as the reference
oracle.
"""

import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

import numpy as np

from .errors import ModulusMismatchError

type Seed = int | np.random.Generator | None

# Error samples further than this many standard deviations out are redrawn.
ERROR_TAIL_CUT = 6.0


@dataclass(frozen=True)
class Residue:
    """
    An integer modulo m.

    Attributes:
        value: Canonical representative in [0, modulus)
        modulus: Positive modulus (a prime power p^e or a ciphertext modulus)
    """

    value: int
    modulus: int

    def __post_init__(self):
        if self.modulus < 1:
            raise ValueError(f"Modulus must be positive, got {self.modulus}")
        if not 0 <= self.value < self.modulus:
            raise ValueError(f"Residue {self.value} outside [0, {self.modulus})")

    @classmethod
    def of(cls, value: int, modulus: int) -> "Residue":
        """Reduce an arbitrary integer into a Residue."""
        return cls(value % modulus, modulus)

    @property
    def balanced(self) -> int:
        """Representative in (-m/2, m/2]."""
        return balanced_mod(self.value, self.modulus)


def balanced_mod(value: int, modulus: int) -> int:
    """Map value to the representative of its class in (-m/2, m/2]."""
    v = value % modulus
    return v - modulus if v > modulus // 2 else v


def balanced_rep(x: Residue) -> int:
    """
    Canonical signed representative of a residue.

    Example:
        >>> balanced_rep(Residue(117, 125))
        -8
    """
    return x.balanced


def base_p_digits(x: Residue, p: int, r: int) -> tuple[int, ...]:
    """
    Balanced base-p expansion of a residue modulo p^r.

    Args:
        x: Residue with modulus p^r
        p: Odd base
        r: Number of digits

    Returns:
        r digits d_i in (-p/2, p/2], least significant first, with
        sum(d_i * p^i) congruent to x.value mod p^r

    Raises:
        ModulusMismatchError: If x.modulus != p^r
    """
    if x.modulus != p**r:
        raise ModulusMismatchError(f"Expected modulus {p}^{r}, got {x.modulus}")
    half = p // 2
    v = x.balanced
    digits: list[int] = []
    for _ in range(r):
        d = (v + half) % p - half
        digits.append(d)
        v = (v - d) // p
    return tuple(digits)


@dataclass(frozen=True)
class RingElem:
    """
    Element of Z_q[x]/(x^n + 1) with coefficients in [0, q).

    Attributes:
        coeffs: n coefficients, constant term first
        modulus: Coefficient modulus q
    """

    coeffs: tuple[int, ...]
    modulus: int

    def __post_init__(self):
        n = len(self.coeffs)
        if n == 0 or n & (n - 1):
            raise ValueError(f"Ring degree must be a power of two, got {n}")
        q = self.modulus
        if any(not 0 <= c < q for c in self.coeffs):
            raise ValueError(f"Coefficients must lie in [0, {q})")

    @classmethod
    def from_ints(cls, values: Iterable[int], modulus: int) -> "RingElem":
        return cls(tuple(int(v) % modulus for v in values), modulus)

    @classmethod
    def zero(cls, n: int, modulus: int) -> "RingElem":
        return cls((0,) * n, modulus)

    @classmethod
    def constant(cls, c: int, n: int, modulus: int) -> "RingElem":
        return cls((c % modulus,) + (0,) * (n - 1), modulus)

    @classmethod
    def monomial(cls, degree: int, n: int, modulus: int) -> "RingElem":
        """x^degree, with x^n folded to -1."""
        sign = -1 if (degree // n) % 2 else 1
        coeffs = [0] * n
        coeffs[degree % n] = sign % modulus
        return cls(tuple(coeffs), modulus)

    @property
    def n(self) -> int:
        return len(self.coeffs)

    def centered(self) -> tuple[int, ...]:
        """Coefficients in the balanced range (-q/2, q/2]."""
        q = self.modulus
        return tuple(balanced_mod(c, q) for c in self.coeffs)

    def reduce(self, modulus: int) -> "RingElem":
        """Re-read the centered coefficients modulo a different modulus."""
        return RingElem.from_ints(self.centered(), modulus)

    def __add__(self, other: "RingElem") -> "RingElem":
        return ring_add(self, other)

    def __sub__(self, other: "RingElem") -> "RingElem":
        return ring_sub(self, other)

    def __mul__(self, other: "RingElem") -> "RingElem":
        return ring_mul(self, other)

    def __neg__(self) -> "RingElem":
        return ring_neg(self)


def _check_compatible(a: RingElem, b: RingElem) -> None:
    if a.n != b.n:
        raise ModulusMismatchError(f"Ring degree mismatch: {a.n} vs {b.n}")
    if a.modulus != b.modulus:
        raise ModulusMismatchError(f"Modulus mismatch: {a.modulus} vs {b.modulus}")


def ring_add(a: RingElem, b: RingElem) -> RingElem:
    _check_compatible(a, b)
    q = a.modulus
    return RingElem(tuple((x + y) % q for x, y in zip(a.coeffs, b.coeffs, strict=True)), q)


def ring_sub(a: RingElem, b: RingElem) -> RingElem:
    _check_compatible(a, b)
    q = a.modulus
    return RingElem(tuple((x - y) % q for x, y in zip(a.coeffs, b.coeffs, strict=True)), q)


def ring_neg(a: RingElem) -> RingElem:
    q = a.modulus
    return RingElem(tuple((-x) % q for x in a.coeffs), q)


def ring_scale(a: RingElem, c: Residue | int) -> RingElem:
    """Multiply every coefficient by a scalar."""
    q = a.modulus
    if isinstance(c, Residue):
        if c.modulus != q:
            raise ModulusMismatchError(f"Scalar modulus {c.modulus} vs ring modulus {q}")
        c = c.value
    return RingElem(tuple((x * c) % q for x in a.coeffs), q)


def _slot_width(max_a: int, max_b: int, terms: int) -> int:
    """Bytes per Kronecker slot so no convolution sum can spill over."""
    bits = max_a.bit_length() + max_b.bit_length() + terms.bit_length() + 1
    return (bits + 7) // 8


def _pack(values: Sequence[int], width: int) -> int:
    return int.from_bytes(b"".join(v.to_bytes(width, "little") for v in values), "little")


def _unpack(packed: int, width: int, count: int) -> list[int]:
    raw = packed.to_bytes(width * count, "little")
    return [int.from_bytes(raw[i * width : (i + 1) * width], "little") for i in range(count)]


def _fold_negacyclic(full: Sequence[int], n: int, q: int) -> RingElem:
    out = list(full[:n])
    for i in range(n, len(full)):
        out[i - n] -= full[i]
    return RingElem(tuple(v % q for v in out), q)


def ring_mul(a: RingElem, b: RingElem) -> RingElem:
    """
    Negacyclic product a*b mod (x^n + 1, q).

    Example:
        >>> x = RingElem.monomial(1, 4, 17)
        >>> (x * RingElem.monomial(3, 4, 17)).centered()
        (-1, 0, 0, 0)
    """
    _check_compatible(a, b)
    n, q = a.n, a.modulus
    max_a, max_b = max(a.coeffs), max(b.coeffs)
    if max_a == 0 or max_b == 0:
        return RingElem.zero(n, q)
    width = _slot_width(max_a, max_b, n)
    product = _pack(a.coeffs, width) * _pack(b.coeffs, width)
    return _fold_negacyclic(_unpack(product, width, 2 * n - 1), n, q)


def ring_dot(lhs: Sequence[RingElem], rhs: Sequence[RingElem]) -> RingElem:
    """
    Sum of products lhs[i] * rhs[i], unpacked once.

    Packing is linear, so the packed products can be summed before the single
    unpack as long as the slots have room for the extra carries.
    """
    if not lhs or len(lhs) != len(rhs):
        raise ValueError(f"Need equally many factors, got {len(lhs)} and {len(rhs)}")
    for a, b in zip(lhs, rhs, strict=True):
        _check_compatible(a, b)
        _check_compatible(a, lhs[0])
    n, q = lhs[0].n, lhs[0].modulus
    max_a = max(max(a.coeffs) for a in lhs)
    max_b = max(max(b.coeffs) for b in rhs)
    if max_a == 0 or max_b == 0:
        return RingElem.zero(n, q)
    width = _slot_width(max_a, max_b, n * len(lhs))
    total = sum(_pack(a.coeffs, width) * _pack(b.coeffs, width) for a, b in zip(lhs, rhs, strict=True))
    return _fold_negacyclic(_unpack(total, width, 2 * n - 1), n, q)


def ring_mul_schoolbook(a: RingElem, b: RingElem) -> RingElem:
    """Reference O(n^2) negacyclic convolution."""
    _check_compatible(a, b)
    n, q = a.n, a.modulus
    out = [0] * n
    for i, x in enumerate(a.coeffs):
        if x == 0:
            continue
        for j, y in enumerate(b.coeffs):
            k = i + j
            if k < n:
                out[k] += x * y
            else:
                out[k - n] -= x * y
    return RingElem(tuple(v % q for v in out), q)


def sample_ternary(n: int, hamming_weight: int, seed: Seed, modulus: int = 3) -> RingElem:
    """
    Ternary polynomial with exactly hamming_weight coefficients in {-1, 1}.

    The default modulus 3 is the smallest that keeps the signs; pass the
    ciphertext modulus to embed the key directly.

    Raises:
        ValueError: If hamming_weight is negative or exceeds n
    """
    if not 0 <= hamming_weight <= n:
        raise ValueError(f"Hamming weight {hamming_weight} must lie in [0, {n}]")
    rng = np.random.default_rng(seed)
    coeffs = [0] * n
    positions = rng.choice(n, size=hamming_weight, replace=False)
    signs = rng.choice(np.array([-1, 1]), size=hamming_weight)
    for pos, sign in zip(positions.tolist(), signs.tolist(), strict=True):
        coeffs[pos] = sign
    return RingElem.from_ints(coeffs, modulus)


def sample_error(n: int, sigma: float, seed: Seed, modulus: int | None = None) -> RingElem:
    """
    Rounded Gaussian error, rejection-sampled to |c| <= 6*sigma.

    Without a modulus the result lives mod 2*floor(6*sigma) + 1, the smallest
    odd modulus whose centered range holds every accepted value.

    Raises:
        ValueError: If sigma is not positive
    """
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    rng = np.random.default_rng(seed)
    bound = ERROR_TAIL_CUT * sigma
    values = np.rint(rng.normal(0.0, sigma, size=n))
    rejected = np.abs(values) > bound
    while rejected.any():
        values[rejected] = np.rint(rng.normal(0.0, sigma, size=int(rejected.sum())))
        rejected = np.abs(values) > bound
    return RingElem.from_ints(values.astype(np.int64).tolist(), modulus or 2 * math.floor(bound) + 1)


def sample_uniform(n: int, modulus: int, seed: Seed) -> RingElem:
    """Uniform ring element; 64 extra bits per coefficient keep the bias negligible."""
    rng = np.random.default_rng(seed)
    width = (modulus.bit_length() + 7) // 8 + 8
    raw = rng.bytes(width * n)
    return RingElem(
        tuple(int.from_bytes(raw[i * width : (i + 1) * width], "little") % modulus for i in range(n)),
        modulus,
    )
