"""
Parameter sets: plaintext base p, exponent r, ring degree and modulus chain.

ParamSet.create builds a chain of primes q = 1 mod 2p^r: a base prime of at
least 60 bits plus one prime of at least 45 bits per multiplicative level.
Every q is congruent to 1 modulo p^r, so modulus switching in the toy BGV
backend leaves the plaintext untouched.

select_params walks the desk-scale table of primes p <= 257, picks the
smallest r with p^r large enough for the requested bit width, predicts
the comparison cost of each candidate from polynomial supports alone and
returns the cheapest feasible one.

Example:
    >>> params = select_params(8)
    >>> params.modulus >= 2 ** 9
    True
"""

import logging
import math
from dataclasses import dataclass, replace
from enum import StrEnum
from functools import lru_cache
from typing import Any

import sympy

from .errors import InfeasibleParametersError
from .evaluator import DEFAULT_MAX_SLOTS, choose_odd_path, plan_ps, plan_ps_many
from .polynomials import INT64_SAFE_MODULUS, DensePoly, g_degree
from .space_switch import ExtractionStrategy, estimate_depth

logger = logging.getLogger(__name__)


class Backend(StrEnum):
    CLEAR = "clear"
    BGV = "bgv"


DEFAULT_RING_DEGREE = 64
BASE_PRIME_BITS = 60
LEVEL_PRIME_BITS = 45
DEFAULT_SIGMA = 3.2
MAX_DESK_PRIME = 257
MIN_BITWIDTH = 1
MAX_BITWIDTH = 24

INSECURE_BANNER = "INSECURE TOY PARAMETERS: no security claim, experimentation only"


def default_hamming_weight(n: int) -> int:
    return min(n // 4, 64)


def chain_prime_bits(modulus: int) -> tuple[int, int]:
    """
    (base, level) prime sizes for plaintext modulus p^r.

    Level primes absorb about t^3 of noise growth per multiplication and the
    base prime about t^2 of final headroom, t = p^r.
    """
    t_bits = modulus.bit_length()
    return max(BASE_PRIME_BITS, 2 * t_bits + 24), max(LEVEL_PRIME_BITS, 3 * t_bits + 16)


def _next_chain_prime(bits: int, step: int, used: set[int]) -> int:
    k = ((1 << bits) - 1) // step
    floor = 1 << (bits - 1)
    while k > 0:
        q = k * step + 1
        if q < floor:
            break
        if q not in used and sympy.isprime(q):
            used.add(q)
            return q
        k -= 1
    raise InfeasibleParametersError(f"No {bits}-bit prime q = 1 mod {step} left for the chain")


@lru_cache(maxsize=256)
def generate_chain(
    p: int,
    r: int,
    levels: int,
    base_bits: int = BASE_PRIME_BITS,
    level_bits: int = LEVEL_PRIME_BITS,
) -> tuple[int, ...]:
    """
    Distinct primes q_0..q_levels, each congruent to 1 mod 2p^r.

    Primes are searched downward from 2^bits, so the chain is deterministic.

    Raises:
        InfeasibleParametersError: If a bit size runs out of suitable primes
    """
    if levels < 0:
        raise ValueError(f"levels must be non-negative, got {levels}")
    step = 2 * p**r
    used: set[int] = set()
    chain = [_next_chain_prime(base_bits, step, used)]
    chain += [_next_chain_prime(level_bits, step, used) for _ in range(levels)]
    logger.debug("Chain for p=%d r=%d: %d primes", p, r, len(chain))
    return tuple(chain)


@dataclass(frozen=True)
class ParamSet:
    """
    One fully specified instance.

    Attributes:
        p: Odd prime plaintext base
        r: Exponent; the number space is Z_{p^r}
        chain: Ciphertext modulus primes, base prime first
        n: Ring degree (power of two)
        seed: Seed for every random draw made by evaluators
        backend: Evaluation backend
        sigma: Error standard deviation
        hamming_weight: Secret key weight; negative picks min(n/4, 64)
        max_slots: Slot capacity of the clear backend
    """

    p: int
    r: int
    chain: tuple[int, ...]
    n: int = DEFAULT_RING_DEGREE
    seed: int = 0
    backend: Backend = Backend.CLEAR
    sigma: float = DEFAULT_SIGMA
    hamming_weight: int = -1
    max_slots: int = DEFAULT_MAX_SLOTS

    def __post_init__(self):
        if self.p < 3 or not sympy.isprime(self.p):
            raise ValueError(f"p must be an odd prime, got {self.p}")
        if self.r < 1:
            raise ValueError(f"r must be at least 1, got {self.r}")
        if not self.chain:
            raise ValueError("The modulus chain needs at least one prime")
        for q in self.chain:
            if q % self.p == 0:
                raise ValueError(f"Chain prime {q} shares a factor with p={self.p}")
        if self.n < 2 or self.n & (self.n - 1):
            raise ValueError(f"Ring degree must be a power of two, got {self.n}")
        object.__setattr__(self, "backend", Backend(self.backend))
        if self.backend is Backend.BGV and self.r > self.p:
            raise InfeasibleParametersError(
                f"The BGV backend needs r <= p for exact division, got p={self.p} r={self.r}"
            )
        if self.hamming_weight < 0:
            object.__setattr__(self, "hamming_weight", default_hamming_weight(self.n))
        if self.hamming_weight > self.n:
            raise ValueError(f"Hamming weight {self.hamming_weight} exceeds n={self.n}")

    @classmethod
    def create(
        cls,
        p: int,
        r: int,
        levels: int,
        *,
        backend: Backend | str = Backend.CLEAR,
        n: int = DEFAULT_RING_DEGREE,
        seed: int = 0,
        sigma: float = DEFAULT_SIGMA,
        hamming_weight: int = -1,
        max_slots: int = DEFAULT_MAX_SLOTS,
    ) -> "ParamSet":
        """Build a ParamSet with a freshly generated chain of `levels` + 1 primes."""
        chain = generate_chain(p, r, levels, *chain_prime_bits(p**r))
        return cls(p, r, chain, n, seed, Backend(backend), sigma, hamming_weight, max_slots)

    @property
    def modulus(self) -> int:
        return self.p**self.r

    @property
    def levels(self) -> int:
        return len(self.chain) - 1

    def q_at(self, level: int) -> int:
        """Ciphertext modulus Q_level = q_0 * ... * q_level."""
        if not 0 <= level <= self.levels:
            raise ValueError(f"Level {level} outside [0, {self.levels}]")
        return math.prod(self.chain[: level + 1])

    def with_levels(self, levels: int) -> "ParamSet":
        chain = generate_chain(self.p, self.r, levels, *chain_prime_bits(self.modulus))
        return replace(self, chain=chain)

    def with_backend(self, backend: Backend | str) -> "ParamSet":
        return replace(self, backend=Backend(backend))

    def to_dict(self) -> dict[str, Any]:
        return {
            "p": self.p,
            "r": self.r,
            "modulus": self.modulus,
            "n": self.n,
            "levels": self.levels,
            "chain": list(self.chain),
            "log2_q": round(math.log2(self.q_at(self.levels)), 1),
            "seed": self.seed,
            "backend": str(self.backend),
            "sigma": self.sigma,
            "hamming_weight": self.hamming_weight,
            "error_sampler": "rounded gaussian, rejected beyond 6 sigma",
            "max_slots": self.max_slots,
            "security": INSECURE_BANNER,
        }


@dataclass(frozen=True)
class PipelineCost:
    """
    Predicted non-scalar multiplications of one LT + raise, per stage.

    Attributes:
        p: Plaintext base
        r: Exponent
        reduction: Lowest-digit evaluations G_{p,r}..G_{p,2}
        compare: F_LT on digit 0, shared F_LT/F_EQ on the rest
        aggregation: Lexicographic combination
        raise_: G_{p,r} after the result is back in Z_p
        depth: estimate_depth(p, r)
    """

    p: int
    r: int
    reduction: int
    compare: int
    aggregation: int
    raise_: int
    depth: int

    @property
    def modulus(self) -> int:
        return self.p**self.r

    @property
    def total(self) -> int:
        return self.reduction + self.compare + self.aggregation + self.raise_

    @property
    def score(self) -> int:
        return self.total * (self.depth + 1)

    def to_dict(self) -> dict[str, Any]:
        return {
            "p": self.p,
            "r": self.r,
            "modulus": self.modulus,
            "reduction": self.reduction,
            "digit-compare": self.compare,
            "aggregation": self.aggregation,
            "raise": self.raise_,
            "total": self.total,
            "depth": self.depth,
        }


def _pattern_poly(support: list[int], modulus: int) -> DensePoly:
    coeffs = [0] * (max(support) + 1)
    for i in support:
        coeffs[i] = 1
    return DensePoly(tuple(coeffs), modulus)


def _g_pattern(p: int, e: int) -> DensePoly:
    return _pattern_poly(list(range(1, g_degree(p, e) + 1, 2)), p**e)


def _lt_pattern(p: int) -> DensePoly:
    return _pattern_poly([*range(1, p - 1, 2), p - 1], p)


def _eq_pattern(p: int) -> DensePoly:
    return _pattern_poly([0, p - 1], p)


@lru_cache(maxsize=1024)
def predict_pipeline_cost(p: int, r: int) -> PipelineCost:
    """
    Multiplication counts for LT followed by raise_mod, from supports only.

    Coefficients of G_{p,e} and F_LT are treated as nonzero wherever the
    polynomial may be nonzero, so metered runs never exceed the prediction.
    """
    reduction = sum(choose_odd_path(_g_pattern(p, r - i)).nonscalar_mults for i in range(r - 1))
    lt_alone = plan_ps(_lt_pattern(p)).nonscalar_mults
    shared = plan_ps_many([_lt_pattern(p), _eq_pattern(p)]).nonscalar_mults
    compare = lt_alone + (r - 1) * shared
    aggregation = (r - 1) + max(r - 2, 0)
    raise_ = choose_odd_path(_g_pattern(p, r)).nonscalar_mults if r > 1 else 0
    return PipelineCost(p, r, reduction, compare, aggregation, raise_, estimate_depth(p, r))


def _smallest_r(p: int, target: int) -> int:
    r = 1
    while p**r < target:
        r += 1
    return r


def rank_params(
    bitwidth: int,
    depth_budget: int | None = None,
    *,
    headroom: bool = True,
    backend: Backend | str = Backend.CLEAR,
    extra_depth: int = 0,
    max_prime: int = MAX_DESK_PRIME,
) -> list[PipelineCost]:
    """
    Feasible (p, r) candidates for a bit width, cheapest first.

    Candidates are ranked by predicted mults * (depth + 1), then depth,
    then p^r.

    Raises:
        InfeasibleParametersError: If bitwidth is outside the supported range
    """
    if not MIN_BITWIDTH <= bitwidth <= MAX_BITWIDTH:
        raise InfeasibleParametersError(
            f"Bit width {bitwidth} outside [{MIN_BITWIDTH}, {MAX_BITWIDTH}]"
        )
    backend = Backend(backend)
    target = 1 << (bitwidth + 1 if headroom else bitwidth)
    feasible: list[PipelineCost] = []
    for p in sympy.primerange(3, max_prime + 1):
        r = _smallest_r(p, target)
        if backend is Backend.CLEAR and p**r >= INT64_SAFE_MODULUS:
            continue
        if backend is Backend.BGV and r > p:
            continue
        cost = predict_pipeline_cost(p, r)
        if depth_budget is not None and cost.depth + extra_depth > depth_budget:
            continue
        feasible.append(cost)
    feasible.sort(key=lambda c: (c.score, c.depth, c.modulus))
    return feasible


def select_params(
    bitwidth: int,
    depth_budget: int | None = None,
    *,
    headroom: bool = True,
    backend: Backend | str = Backend.CLEAR,
    extra_depth: int = 0,
    n: int = DEFAULT_RING_DEGREE,
    seed: int = 0,
    strategy: ExtractionStrategy | str = ExtractionStrategy.SPACE_SWITCH,
) -> ParamSet:
    """
    Cheapest desk-scale ParamSet for comparing values of `bitwidth` bits.

    With headroom (the default) p^r >= 2^(bitwidth+1), so the difference of
    two unsigned bitwidth-bit values never wraps. Candidates are ranked by the
    space-switch pipeline; the chain of the winner gets
    strategy_levels(p, r, strategy, extra_depth) levels.

    Args:
        bitwidth: Bits per compared value, 1..24
        depth_budget: Largest acceptable level count, None for no limit
        headroom: Reserve one extra bit for signed differences
        backend: Evaluation backend the parameters are for
        extra_depth: Levels needed on top of the comparison pipeline
        n: Ring degree
        seed: Evaluator seed
        strategy: Digit extraction the chain must have room for

    Raises:
        InfeasibleParametersError: If no candidate fits the budget
    """
    ranked = rank_params(
        bitwidth, depth_budget, headroom=headroom, backend=backend, extra_depth=extra_depth
    )
    if not ranked:
        raise InfeasibleParametersError(
            f"No (p, r) with p <= {MAX_DESK_PRIME} handles {bitwidth}-bit values "
            f"within depth {depth_budget}"
        )
    best = ranked[0]
    logger.info(
        "Selected p=%d r=%d for %d bits: %d mults, depth %d",
        best.p,
        best.r,
        bitwidth,
        best.total,
        best.depth,
    )
    levels = strategy_levels(best.p, best.r, strategy, extra_depth)
    return ParamSet.create(best.p, best.r, levels, backend=backend, n=n, seed=seed)


def strategy_levels(
    p: int, r: int, strategy: ExtractionStrategy | str, extra_depth: int = 0
) -> int:
    """Levels needed to run LT + raise with a given extraction strategy."""
    return estimate_depth(p, r, ExtractionStrategy(strategy)) + extra_depth
