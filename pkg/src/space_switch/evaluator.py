"""
Backend-agnostic leveled evaluation with cost metering.

An Evaluator owns a ParamSet and a CostLedger and hands out CipherHandle
values. Every homomorphic operation goes through the Evaluator base class,
which checks plaintext-modulus tags, levels and ownership, charges the
ledger, and delegates the arithmetic to a backend hook. ClearEvaluator keeps
slot vectors in the clear; the toy BGV backend lives in bgv.py.

Polynomials are evaluated with the Paterson-Stockmeyer method. The same
routine runs over a counting algebra to plan the baby-step size before
anything touches a ciphertext.

Example:
    >>> ev = ClearEvaluator(ParamSet.create(5, 3, levels=4))
    >>> x = ev.encode_vector([3, -2, 0], modulus=5)
    >>> ev.decode_balanced(ps_eval(build_F_EQ(5), x))
    [0, 0, 1]
"""

import logging
import math
from abc import ABC, abstractmethod
from collections.abc import Sequence
from dataclasses import dataclass, field
from functools import lru_cache
from typing import TYPE_CHECKING, Any, Protocol

import numpy as np

from .errors import (
    BackendMismatchError,
    LevelExhaustedError,
    ModulusMismatchError,
    SpaceSwitchError,
)
from .ledger import CostLedger
from .polynomials import INT64_SAFE_MODULUS, DensePoly, odd_part_decompose
from .ring import Residue, Seed, balanced_mod

if TYPE_CHECKING:
    from .params import ParamSet

logger = logging.getLogger(__name__)

DEFAULT_MAX_SLOTS = 1 << 17

# Above this degree the planner only tries baby-step sizes near sqrt(d).
FULL_PLAN_DEGREE = 1024


def ceil_log2(n: int) -> int:
    """Smallest e with 2^e >= n (0 for n <= 1)."""
    return 0 if n <= 1 else (n - 1).bit_length()


@dataclass(frozen=True, eq=False)
class CipherHandle:
    """
    An encrypted (or simulated) value bound to the evaluator that made it.

    Attributes:
        payload: Backend data (numpy slot vector or BGVCiphertext)
        ptxt_modulus: Plaintext modulus tag p^t
        level: Multiplicative levels still available
        depth: Longest multiplication chain behind this value
        owner: The evaluator that created the handle
    """

    payload: Any
    ptxt_modulus: int
    level: int
    depth: int
    owner: "Evaluator" = field(repr=False)

    @property
    def ledger(self) -> CostLedger:
        return self.owner.ledger

    @property
    def slots(self) -> int:
        return self.owner.slot_count(self)


class Evaluator(ABC):
    """
    Checked, metered homomorphic operations over an abstract backend.

    Subclasses implement the underscore hooks; they receive handles that
    already passed tag and ownership checks.
    """

    name = "abstract"
    # True when one handle carries a whole column of values
    packs_slots = False

    def __init__(self, params: "ParamSet", ledger: CostLedger | None = None):
        self.params = params
        self.ledger = ledger if ledger is not None else CostLedger()

    @property
    def p(self) -> int:
        return self.params.p

    @property
    def r(self) -> int:
        return self.params.r

    @property
    def modulus(self) -> int:
        return self.params.modulus

    @property
    def levels(self) -> int:
        return self.params.levels

    # backend hooks

    @abstractmethod
    def _encrypt(self, values: list[int], modulus: int) -> Any: ...

    @abstractmethod
    def _decode(self, h: CipherHandle) -> list[int]: ...

    @abstractmethod
    def _add(self, a: CipherHandle, b: CipherHandle) -> Any: ...

    @abstractmethod
    def _sub(self, a: CipherHandle, b: CipherHandle) -> Any: ...

    @abstractmethod
    def _neg(self, a: CipherHandle) -> Any: ...

    @abstractmethod
    def _add_const(self, a: CipherHandle, c: int) -> Any: ...

    @abstractmethod
    def _mul(self, a: CipherHandle, b: CipherHandle) -> Any: ...

    @abstractmethod
    def _mul_const(self, a: CipherHandle, c: int) -> Any: ...

    @abstractmethod
    def _retag(self, a: CipherHandle, modulus: int) -> Any: ...

    @abstractmethod
    def _divide_by_p(self, a: CipherHandle) -> Any: ...

    @abstractmethod
    def slot_count(self, h: CipherHandle) -> int: ...

    # checks

    def _wrap(self, payload: Any, modulus: int, level: int, depth: int) -> CipherHandle:
        return CipherHandle(payload, modulus, level, depth, self)

    def _check_owner(self, h: CipherHandle) -> None:
        if h.owner is not self:
            raise BackendMismatchError(
                f"Handle belongs to {h.owner.name} evaluator {id(h.owner):#x}, "
                f"not {self.name} evaluator {id(self):#x}"
            )

    def _check_pair(self, a: CipherHandle, b: CipherHandle) -> None:
        self._check_owner(a)
        self._check_owner(b)
        if a.ptxt_modulus != b.ptxt_modulus:
            raise ModulusMismatchError(f"Tag mismatch: {a.ptxt_modulus} vs {b.ptxt_modulus}")

    def check_tag(self, modulus: int) -> int:
        """
        Validate a plaintext tag p^t with 1 <= t <= r.

        Returns:
            The exponent t
        """
        t, rest = 0, modulus
        while rest > 1 and rest % self.p == 0:
            rest //= self.p
            t += 1
        if rest != 1 or not 1 <= t <= self.r:
            raise ModulusMismatchError(
                f"Tag {modulus} is not p^t for p={self.p}, 1 <= t <= {self.r}"
            )
        return t

    def _constant(self, a: CipherHandle, c: Residue | int) -> int:
        if isinstance(c, Residue):
            if c.modulus != a.ptxt_modulus:
                raise ModulusMismatchError(
                    f"Tag mismatch: constant mod {c.modulus} vs handle mod {a.ptxt_modulus}"
                )
            return c.value
        return c % a.ptxt_modulus

    # public operations

    def encrypt(self, values: int | Sequence[int], modulus: int | None = None) -> CipherHandle:
        """
        Encrypt one value (or a slot vector where the backend supports it).

        Values may be given balanced or canonical: anything in (-m/2, m).

        Raises:
            ValueError: If a value is out of range
        """
        m = self.modulus if modulus is None else modulus
        self.check_tag(m)
        items = [values] if isinstance(values, int) else [int(v) for v in values]
        for v in items:
            if not -m < 2 * v < 2 * m:
                raise ValueError(f"Value {v} does not fit plaintext modulus {m}")
        payload = self._encrypt([v % m for v in items], m)
        return self._wrap(payload, m, self.levels, 0)

    def decode(self, h: CipherHandle) -> list[int]:
        """Canonical residues in [0, tag) per slot."""
        self._check_owner(h)
        return self._decode(h)

    def decode_balanced(self, h: CipherHandle) -> list[int]:
        return [balanced_mod(v, h.ptxt_modulus) for v in self.decode(h)]

    def he_add(self, a: CipherHandle, b: CipherHandle) -> CipherHandle:
        self._check_pair(a, b)
        payload = self._add(a, b)
        self.ledger.record_add()
        return self._wrap(payload, a.ptxt_modulus, min(a.level, b.level), max(a.depth, b.depth))

    def he_sub(self, a: CipherHandle, b: CipherHandle) -> CipherHandle:
        self._check_pair(a, b)
        payload = self._sub(a, b)
        self.ledger.record_add()
        return self._wrap(payload, a.ptxt_modulus, min(a.level, b.level), max(a.depth, b.depth))

    def he_neg(self, a: CipherHandle) -> CipherHandle:
        self._check_owner(a)
        return self._wrap(self._neg(a), a.ptxt_modulus, a.level, a.depth)

    def he_add_plain(self, a: CipherHandle, c: Residue | int) -> CipherHandle:
        self._check_owner(a)
        payload = self._add_const(a, self._constant(a, c))
        self.ledger.record_add()
        return self._wrap(payload, a.ptxt_modulus, a.level, a.depth)

    def rsub_plain(self, c: Residue | int, a: CipherHandle) -> CipherHandle:
        """c - a with a single metered addition."""
        self._check_owner(a)
        negated = self._wrap(self._neg(a), a.ptxt_modulus, a.level, a.depth)
        payload = self._add_const(negated, self._constant(a, c))
        self.ledger.record_add()
        return self._wrap(payload, a.ptxt_modulus, a.level, a.depth)

    def he_mul(self, a: CipherHandle, b: CipherHandle) -> CipherHandle:
        """
        Slotwise product; consumes one level.

        Raises:
            LevelExhaustedError: If either operand has no level left
        """
        self._check_pair(a, b)
        level = min(a.level, b.level)
        if level < 1:
            raise LevelExhaustedError(
                f"Multiplication needs a level, operands have {a.level} and {b.level}",
                stage=self.ledger.current_stage,
            )
        payload = self._mul(a, b)
        depth = max(a.depth, b.depth) + 1
        self.ledger.record_mul(depth)
        return self._wrap(payload, a.ptxt_modulus, level - 1, depth)

    def he_mul_plain(self, a: CipherHandle, c: Residue | int) -> CipherHandle:
        self._check_owner(a)
        payload = self._mul_const(a, self._constant(a, c))
        self.ledger.record_scalar()
        return self._wrap(payload, a.ptxt_modulus, a.level, a.depth)

    def he_sum(self, handles: Sequence[CipherHandle]) -> CipherHandle:
        if not handles:
            raise ValueError("Cannot sum an empty list of handles")
        total = handles[0]
        for h in handles[1:]:
            total = self.he_add(total, h)
        return total

    def he_product(self, handles: Sequence[CipherHandle]) -> CipherHandle:
        """Balanced product tree: len - 1 multiplications, depth ceil(log2 len)."""
        if not handles:
            raise ValueError("Cannot multiply an empty list of handles")
        layer = list(handles)
        while len(layer) > 1:
            paired = [self.he_mul(layer[i], layer[i + 1]) for i in range(0, len(layer) - 1, 2)]
            if len(layer) % 2:
                paired.append(layer[-1])
            layer = paired
        return layer[0]

    def retag(self, a: CipherHandle, modulus: int) -> CipherHandle:
        """
        Change the plaintext modulus tag without touching the ciphertext.

        Lowering the tag reduces the plaintext; raising it leaves the new
        high digits undetermined.
        """
        self._check_owner(a)
        self.check_tag(modulus)
        if modulus == a.ptxt_modulus:
            return a
        return self._wrap(self._retag(a, modulus), modulus, a.level, a.depth)

    def divide_by_p(self, a: CipherHandle) -> CipherHandle:
        """
        Exact division by p, dropping the tag from p^t to p^(t-1).

        Raises:
            ModulusMismatchError: If the handle is already tagged p
        """
        self._check_owner(a)
        if a.ptxt_modulus <= self.p:
            raise ModulusMismatchError(f"Cannot divide by p={self.p} at tag {a.ptxt_modulus}")
        payload = self._divide_by_p(a)
        self.ledger.record_scalar()
        return self._wrap(payload, a.ptxt_modulus // self.p, a.level, a.depth)


class ClearEvaluator(Evaluator):
    """
    Cleartext backend: each handle holds a numpy vector of slot residues.

    Raising a tag adds a seeded random multiple of the old tag to every
    slot, the same ambiguity a real ciphertext has after modulus extension.
    """

    name = "clear"
    packs_slots = True

    def __init__(
        self,
        params: "ParamSet",
        seed: Seed = None,
        *,
        ledger: CostLedger | None = None,
        max_slots: int | None = None,
    ):
        super().__init__(params, ledger)
        if params.modulus >= INT64_SAFE_MODULUS:
            raise ValueError(f"p^r = {params.modulus} is too large for the clear backend")
        self.max_slots = max_slots if max_slots is not None else params.max_slots
        self._rng = np.random.default_rng(params.seed if seed is None else seed)

    def encode_vector(self, values: Sequence[int], modulus: int | None = None) -> CipherHandle:
        """One slot per value, fresh level and depth."""
        if isinstance(values, int):
            raise TypeError("encode_vector expects a sequence of integers")
        return self.encrypt(values, modulus)

    def _encrypt(self, values: list[int], modulus: int) -> np.ndarray:
        if not values:
            raise ValueError("Cannot encode an empty vector")
        if len(values) > self.max_slots:
            raise ValueError(f"{len(values)} values exceed the slot capacity {self.max_slots}")
        return np.array(values, dtype=np.int64)

    def _decode(self, h: CipherHandle) -> list[int]:
        return [int(v) for v in h.payload.tolist()]

    @staticmethod
    def _same_shape(a: CipherHandle, b: CipherHandle) -> None:
        if a.payload.shape != b.payload.shape:
            raise ValueError(f"Slot count mismatch: {a.payload.size} vs {b.payload.size}")

    def _add(self, a: CipherHandle, b: CipherHandle) -> np.ndarray:
        self._same_shape(a, b)
        return (a.payload + b.payload) % a.ptxt_modulus

    def _sub(self, a: CipherHandle, b: CipherHandle) -> np.ndarray:
        self._same_shape(a, b)
        return (a.payload - b.payload) % a.ptxt_modulus

    def _neg(self, a: CipherHandle) -> np.ndarray:
        return (-a.payload) % a.ptxt_modulus

    def _add_const(self, a: CipherHandle, c: int) -> np.ndarray:
        return (a.payload + c) % a.ptxt_modulus

    def _mul(self, a: CipherHandle, b: CipherHandle) -> np.ndarray:
        self._same_shape(a, b)
        return a.payload * b.payload % a.ptxt_modulus

    def _mul_const(self, a: CipherHandle, c: int) -> np.ndarray:
        return a.payload * c % a.ptxt_modulus

    def _retag(self, a: CipherHandle, modulus: int) -> np.ndarray:
        old = a.ptxt_modulus
        if modulus < old:
            return a.payload % modulus
        garbage = self._rng.integers(0, modulus // old, size=a.payload.shape, dtype=np.int64)
        return (a.payload + old * garbage) % modulus

    def _divide_by_p(self, a: CipherHandle) -> np.ndarray:
        p = self.p
        bad = np.nonzero(a.payload % p)[0]
        if bad.size:
            raise SpaceSwitchError(
                f"DivideByP on slot {int(bad[0])} holding {int(a.payload[bad[0]])}, "
                f"not a multiple of {p}"
            )
        return a.payload // p

    def slot_count(self, h: CipherHandle) -> int:
        return int(h.payload.size)


# Paterson-Stockmeyer


class _Algebra[V](Protocol):
    def mul(self, a: V, b: V) -> V: ...

    def scale(self, a: V, c: int) -> V: ...

    def add(self, a: V, b: V) -> V: ...

    def add_const(self, a: V, c: int) -> V: ...


@dataclass(frozen=True)
class _Tally:
    depth: int


class _CountingAlgebra:
    """Stands in for ciphertexts while planning: counts mults, tracks depth."""

    def __init__(self):
        self.mults = 0

    def mul(self, a: _Tally, b: _Tally) -> _Tally:
        self.mults += 1
        return _Tally(max(a.depth, b.depth) + 1)

    def scale(self, a: _Tally, c: int) -> _Tally:
        return a

    def add(self, a: _Tally, b: _Tally) -> _Tally:
        return _Tally(max(a.depth, b.depth))

    def add_const(self, a: _Tally, c: int) -> _Tally:
        return a


class _HandleAlgebra:
    def __init__(self, evaluator: Evaluator):
        self._ev = evaluator

    def mul(self, a: CipherHandle, b: CipherHandle) -> CipherHandle:
        return self._ev.he_mul(a, b)

    def scale(self, a: CipherHandle, c: int) -> CipherHandle:
        return self._ev.he_mul_plain(a, c)

    def add(self, a: CipherHandle, b: CipherHandle) -> CipherHandle:
        return self._ev.he_add(a, b)

    def add_const(self, a: CipherHandle, c: int) -> CipherHandle:
        return self._ev.he_add_plain(a, c)


class _PowerLadder[V]:
    """Memoised powers x^j, each built as x^(j//2) * x^(j - j//2)."""

    def __init__(self, x: V, algebra: _Algebra[V]):
        self._algebra = algebra
        self._powers: dict[int, V] = {1: x}

    def __getitem__(self, j: int) -> V:
        found = self._powers.get(j)
        if found is None:
            found = self._algebra.mul(self[j // 2], self[j - j // 2])
            self._powers[j] = found
        return found


def _vmul[V](u: int | V, v: int | V, algebra: _Algebra[V], m: int) -> int | V:
    if isinstance(u, int) and isinstance(v, int):
        return u * v % m
    if isinstance(u, int):
        u, v = v, u
    if isinstance(v, int):
        c = v % m
        if c == 0:
            return 0
        return u if c == 1 else algebra.scale(u, c)  # type: ignore[arg-type]
    return algebra.mul(u, v)  # type: ignore[arg-type]


def _vadd[V](u: int | V, v: int | V, algebra: _Algebra[V], m: int) -> int | V:
    if isinstance(u, int) and isinstance(v, int):
        return (u + v) % m
    if isinstance(u, int):
        u, v = v, u
    if isinstance(v, int):
        c = v % m
        return u if c == 0 else algebra.add_const(u, c)  # type: ignore[arg-type]
    return algebra.add(u, v)  # type: ignore[arg-type]


def _ps_run[V](
    polys: Sequence[Sequence[int]], x: V, k: int, algebra: _Algebra[V], m: int
) -> list[int | V]:
    """Evaluate every coefficient list at x on one shared power ladder."""
    ladder = _PowerLadder(x, algebra)

    def chunk(coeffs: Sequence[int], start: int) -> int | V:
        acc: int | V = coeffs[start]
        for j in range(1, min(k, len(coeffs) - start)):
            c = coeffs[start + j]
            if c:
                acc = _vadd(acc, _vmul(ladder[j], c, algebra, m), algebra, m)
        return acc

    def combine(chunks: list[int | V]) -> int | V:
        n = len(chunks)
        if n == 1:
            return chunks[0]
        h = 1 << ((n - 1).bit_length() - 1)
        low = combine(chunks[:h])
        high = combine(chunks[h:])
        if isinstance(high, int) and high % m == 0:
            return low
        return _vadd(low, _vmul(ladder[k * h], high, algebra, m), algebra, m)

    results: list[int | V] = []
    for coeffs in polys:
        chunks = [chunk(coeffs, start) for start in range(0, len(coeffs), k)]
        results.append(combine(chunks))
    return results


@dataclass(frozen=True)
class PSPlan:
    """
    A planned Paterson-Stockmeyer evaluation.

    Attributes:
        k: Baby-step size
        odd: Evaluate as x * H(x^2)
        nonscalar_mults: Ciphertext multiplications the plan performs
        depth: Multiplicative depth of the result
        degree: Degree of the (largest) polynomial
    """

    k: int
    odd: bool
    nonscalar_mults: int
    depth: int
    degree: int


type _Support = tuple[tuple[int, ...], ...]

# Placeholder coefficient for planning: nonzero and never 1.
_PLAN_COEFF = 2
_PLAN_MODULUS = 1 << 61


def _support(f: DensePoly) -> tuple[int, ...]:
    return tuple(i for i, c in enumerate(f.coeffs[: f.degree + 1]) if c)


def _pattern(support: tuple[int, ...]) -> list[int]:
    coeffs = [0] * ((support[-1] + 1) if support else 1)
    for i in support:
        coeffs[i] = _PLAN_COEFF
    return coeffs


def _simulate(supports: _Support, k: int, input_depth: int) -> tuple[int, int]:
    algebra = _CountingAlgebra()
    results = _ps_run([_pattern(s) for s in supports], _Tally(input_depth), k, algebra, _PLAN_MODULUS)
    depth = max((r.depth for r in results if isinstance(r, _Tally)), default=input_depth)
    return algebra.mults, depth - input_depth


def _candidate_ks(degree: int) -> list[int]:
    base = math.isqrt(degree) + 1  # ceil(sqrt(degree + 1))
    if degree <= FULL_PLAN_DEGREE:
        return list(range(1, 2 * base + 1))
    near = {base + delta for delta in range(-4, 5)}
    near |= {1 << e for e in range(base.bit_length() - 1, base.bit_length() + 2)}
    return sorted(k for k in near if k >= 1)


@lru_cache(maxsize=4096)
def _plan_supports(supports: _Support, input_depth: int) -> PSPlan:
    degree = max((s[-1] for s in supports if s), default=0)
    bound = ceil_log2(degree) + 1
    best: tuple[tuple[bool, int, int, int], PSPlan] | None = None
    for k in _candidate_ks(degree):
        mults, depth = _simulate(supports, k, input_depth)
        key = (depth > bound, mults, depth, k)
        if best is None or key < best[0]:
            best = (key, PSPlan(k, False, mults, depth, degree))
    assert best is not None
    return best[1]


def plan_ps(f: DensePoly) -> PSPlan:
    """
    Best direct plan for f: fewest multiplications within depth
    ceil(log2 d) + 1, ties broken by depth and then by smaller k.

    Example:
        >>> plan = plan_ps(DensePoly((0, 0, 0, 0, 1), 5))
        >>> plan.nonscalar_mults, plan.depth
        (2, 2)
    """
    return _plan_supports((_support(f),), 0)


def plan_ps_many(polys: Sequence[DensePoly]) -> PSPlan:
    """Plan for evaluating several polynomials on one power ladder."""
    return _plan_supports(tuple(_support(f) for f in polys), 0)


def _odd_plan(f: DensePoly) -> PSPlan:
    h = odd_part_decompose(f).h
    inner = _plan_supports((_support(h),), 1)
    # one squaring for y = x^2 and one final multiplication by x
    return PSPlan(inner.k, True, inner.nonscalar_mults + 2, inner.depth + 2, f.degree)


def choose_odd_path(f: DensePoly) -> PSPlan:
    """
    Pick between the direct plan and x * H(x^2) by (mults, depth).

    The odd path is only considered for odd polynomials of degree >= 3.
    """
    direct = plan_ps(f)
    if not (f.is_odd and f.degree >= 3):
        return direct
    odd = _odd_plan(f)
    chosen = odd if (odd.nonscalar_mults, odd.depth) < (direct.nonscalar_mults, direct.depth) else direct
    logger.debug(
        "%s degree %d: direct %d mults/depth %d, odd %d mults/depth %d -> %s",
        f.name or "poly",
        f.degree,
        direct.nonscalar_mults,
        direct.depth,
        odd.nonscalar_mults,
        odd.depth,
        "odd" if chosen.odd else "direct",
    )
    return chosen


def _as_handle(value: int | CipherHandle, x: CipherHandle) -> CipherHandle:
    if isinstance(value, CipherHandle):
        return value
    ev = x.owner
    return ev.he_add_plain(ev.he_mul_plain(x, 0), value)


def _check_level(plan: PSPlan, x: CipherHandle, name: str) -> None:
    if plan.depth > x.level:
        raise LevelExhaustedError(
            f"Evaluating {name or 'polynomial'} needs {plan.depth} levels, handle has {x.level}",
            stage=x.ledger.current_stage,
        )


def ps_eval(f: DensePoly, x: CipherHandle, odd_path: bool | None = None) -> CipherHandle:
    """
    Evaluate f at x with Paterson-Stockmeyer.

    Args:
        f: Polynomial over the handle's plaintext modulus
        x: Input handle
        odd_path: Force (True) or forbid (False) the x * H(x^2) form;
            None lets the planner choose

    Raises:
        ModulusMismatchError: If f.modulus differs from the handle's tag
        LevelExhaustedError: If the handle lacks the levels the plan needs
        ValueError: If odd_path is forced on a polynomial that is not odd
    """
    if f.modulus != x.ptxt_modulus:
        raise ModulusMismatchError(f"Polynomial modulus {f.modulus} vs tag {x.ptxt_modulus}")
    if odd_path is None:
        plan = choose_odd_path(f)
    elif odd_path:
        if not f.is_odd or f.degree < 1:
            raise ValueError(f"{f.name or 'Polynomial'} is not odd")
        plan = _odd_plan(f)
    else:
        plan = plan_ps(f)
    _check_level(plan, x, f.name)

    ev = x.owner
    m = f.modulus
    algebra = _HandleAlgebra(ev)
    if plan.odd:
        h = odd_part_decompose(f).h
        y = ev.he_mul(x, x)
        inner = _ps_run([h.coeffs[: h.degree + 1]], y, plan.k, algebra, m)[0]
        result = _vmul(inner, x, algebra, m)
    else:
        result = _ps_run([f.coeffs[: f.degree + 1]], x, plan.k, algebra, m)[0]
    if f.name:
        ev.ledger.record_evaluation(f.name)
    return _as_handle(result, x)


def ps_eval_many(polys: Sequence[DensePoly], x: CipherHandle) -> list[CipherHandle]:
    """
    Evaluate several polynomials at x sharing one power ladder.

    The ledger's shared_savings counter receives the multiplications saved
    against evaluating each polynomial on its own.
    """
    if not polys:
        return []
    for f in polys:
        if f.modulus != x.ptxt_modulus:
            raise ModulusMismatchError(f"Polynomial modulus {f.modulus} vs tag {x.ptxt_modulus}")
    plan = plan_ps_many(polys)
    names = "+".join(f.name or "poly" for f in polys)
    _check_level(plan, x, names)

    ev = x.owner
    algebra = _HandleAlgebra(ev)
    results = _ps_run([f.coeffs[: f.degree + 1] for f in polys], x, plan.k, algebra, polys[0].modulus)
    separate = sum(plan_ps(f).nonscalar_mults for f in polys)
    ev.ledger.record_savings(separate - plan.nonscalar_mults)
    for f in polys:
        if f.name:
            ev.ledger.record_evaluation(f.name)
    return [_as_handle(value, x) for value in results]


def create_evaluator(
    params: "ParamSet", seed: Seed = None, *, ledger: CostLedger | None = None
) -> Evaluator:
    """Evaluator for the backend named in params."""
    if params.backend == "bgv":
        from .bgv import BGVEvaluator

        return BGVEvaluator(params, seed, ledger=ledger)
    return ClearEvaluator(params, seed, ledger=ledger)
