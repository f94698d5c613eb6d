"""
Moving ciphertexts between number space Z_{p^r} and digit space Z_p.

reduce_to_digits splits a value tagged p^r into r balanced base-p digits,
each tagged p. The default strategy needs one lowest-digit evaluation per
digit except the last:

    a_i = G_{p,r-i}(b)        lowest digit of b, tag p^(r-i)
    b   = (b - a_i) / p       exact, tag drops to p^(r-i-1)

and the final b is the top digit. Three classic digit-extraction layouts
(Halevi-Shoup, Chen-Han, Geelen et al.) are kept for cost comparison; all
four produce identical digits.

raise_mod goes the other way for small values: it relabels a p-tagged
handle as p^r, which leaves the high digits undetermined, and evaluates
G_{p,r} to clear them.

Example:
    >>> ev = ClearEvaluator(ParamSet.create(5, 3, levels=estimate_depth(5, 3)))
    >>> bundle = reduce_to_digits(ev.encode_vector([117, 33]))
    >>> bundle.decode()
    [(2, -2, 0), (-2, 2, 1)]
"""

import logging
from collections import Counter
from collections.abc import Callable
from dataclasses import dataclass
from enum import StrEnum

from .errors import ModulusMismatchError
from .evaluator import CipherHandle, ceil_log2, ps_eval
from .polynomials import DensePoly, build_F_lift, build_G, g_degree

logger = logging.getLogger(__name__)

# Extra levels allowed per polynomial evaluation on top of ceil(log2 degree).
EVAL_SLACK = 2


class ExtractionStrategy(StrEnum):
    HALEVI_SHOUP = "halevi-shoup"
    CHEN_HAN = "chen-han"
    GEELEN = "geelen"
    SPACE_SWITCH = "space-switch"


@dataclass(frozen=True)
class DigitBundle:
    """
    The r digits of a value, least significant first, each tagged p.

    Attributes:
        digits: One handle per digit
        origin_modulus: p^r of the value they came from
    """

    digits: tuple[CipherHandle, ...]
    origin_modulus: int

    def __post_init__(self):
        if not self.digits:
            raise ValueError("A digit bundle needs at least one digit")
        p = self.digits[0].owner.p
        if p ** len(self.digits) != self.origin_modulus:
            raise ModulusMismatchError(
                f"{len(self.digits)} digits cannot recompose modulus {self.origin_modulus}"
            )
        for d in self.digits:
            if d.ptxt_modulus != p:
                raise ModulusMismatchError(f"Digit tagged {d.ptxt_modulus}, expected {p}")

    @property
    def p(self) -> int:
        return self.digits[0].owner.p

    def decode(self) -> list[tuple[int, ...]]:
        """Balanced digit tuples, one per slot."""
        per_digit = [d.owner.decode_balanced(d) for d in self.digits]
        return [tuple(column) for column in zip(*per_digit, strict=True)]

    def recompose(self) -> list[int]:
        """Canonical residues mod p^r rebuilt from the digits."""
        p, m = self.p, self.origin_modulus
        return [sum(d * p**i for i, d in enumerate(digits)) % m for digits in self.decode()]


@dataclass(frozen=True)
class PlannedEvaluation:
    """
    One polynomial evaluation in an extraction layout.

    Attributes:
        name: Polynomial label, "F_p" or "G_{p,e}"
        row: Digit row the evaluation belongs to
        lift: Column index a_{row,lift} it produces
    """

    name: str
    row: int
    lift: int


def _g_name(e: int) -> str:
    return f"G_{{p,{e}}}"


def extraction_plan(p: int, r: int, strategy: ExtractionStrategy) -> list[PlannedEvaluation]:
    """
    Ordered polynomial evaluations a strategy performs for r digits.

    Raises:
        ValueError: If r < 1
    """
    if r < 1:
        raise ValueError(f"r must be at least 1, got {r}")
    plan: list[PlannedEvaluation] = []
    if strategy is ExtractionStrategy.SPACE_SWITCH:
        for i in range(r - 1):
            plan.append(PlannedEvaluation(_g_name(r - i), i, r - 1 - i))
        return plan

    for i in range(r - 1):
        top = r - 1 - i
        match strategy:
            case ExtractionStrategy.HALEVI_SHOUP:
                plan += [PlannedEvaluation("F_p", i, k) for k in range(1, top + 1)]
            case ExtractionStrategy.CHEN_HAN:
                plan += [PlannedEvaluation("F_p", i, k) for k in range(1, top)]
                plan.append(PlannedEvaluation(_g_name(r - i), i, top))
            case ExtractionStrategy.GEELEN:
                plan += [PlannedEvaluation(_g_name(k + 1), i, k) for k in range(1, top + 1)]
    return plan


def extraction_eval_counts(p: int, r: int, strategy: ExtractionStrategy) -> dict[str, int]:
    """
    Planned polynomial evaluation counts, without touching ciphertexts.

    Example:
        >>> extraction_eval_counts(5, 4, ExtractionStrategy.CHEN_HAN)
        {'F_p': 3, 'G_{p,4}': 1, 'G_{p,3}': 1, 'G_{p,2}': 1}
    """
    return dict(Counter(step.name for step in extraction_plan(p, r, strategy)))


def divide_by_p(x: CipherHandle) -> CipherHandle:
    """DivideByP: exact division by p, tag p^t -> p^(t-1)."""
    return x.owner.divide_by_p(x)


def change_mod_to_p(x: CipherHandle) -> CipherHandle:
    """Relabel the plaintext modulus as p; costs nothing."""
    return x.owner.retag(x, x.owner.p)


def raise_mod(x: CipherHandle) -> CipherHandle:
    """
    Lift a p-tagged value with balanced representative in (-p/2, p/2] to p^r.

    Raises:
        ModulusMismatchError: If x is not tagged p
        LevelExhaustedError: If x lacks the levels for G_{p,r}
    """
    ev = x.owner
    if x.ptxt_modulus != ev.p:
        raise ModulusMismatchError(f"raise_mod expects tag {ev.p}, got {x.ptxt_modulus}")
    if ev.r == 1:
        return x
    with ev.ledger.stage("raise"):
        extended = ev.retag(x, ev.modulus)
        return ps_eval(build_G(ev.p, ev.r), extended)


def lowest_digit_poly(p: int, e: int, modulus: int | None = None) -> DensePoly:
    """G_{p,e}, optionally re-read at a larger tag."""
    g = build_G(p, e)
    return g if modulus is None or modulus == g.modulus else g.with_modulus(modulus)


def _peel(x: CipherHandle, lifted: list[list[CipherHandle]], row: int) -> CipherHandle:
    """Row start: subtract each earlier row's lifted digit and divide by p."""
    ev = x.owner
    y = x
    for j in range(row):
        y = ev.divide_by_p(ev.he_sub(y, lifted[j][row - j]))
    return y


def _rows(
    x: CipherHandle, fill: Callable[[CipherHandle, int, int], list[CipherHandle]]
) -> list[CipherHandle]:
    """
    Shared row recursion of the classic layouts.

    fill(row_start, row, top) returns a_{row,1..top}; the digit of a row is
    its start a_{row,0}.
    """
    r = x.owner.r
    lifted: list[list[CipherHandle]] = []
    for i in range(r):
        start = _peel(x, lifted, i)
        top = r - 1 - i
        lifted.append([start, *fill(start, i, top)] if top else [start])
    return [row[0] for row in lifted]


def _space_switch(x: CipherHandle) -> list[CipherHandle]:
    ev = x.owner
    b = x
    digits: list[CipherHandle] = []
    for i in range(ev.r - 1):
        a = ps_eval(build_G(ev.p, ev.r - i), b)
        digits.append(a)
        b = ev.divide_by_p(ev.he_sub(b, a))
    digits.append(b)
    return digits


def _halevi_shoup(x: CipherHandle) -> list[CipherHandle]:
    p, r = x.owner.p, x.owner.r

    def fill(start: CipherHandle, row: int, top: int) -> list[CipherHandle]:
        f = build_F_lift(p, r - row)
        chain = [start]
        for _ in range(top):
            chain.append(ps_eval(f, chain[-1]))
        return chain[1:]

    return _rows(x, fill)


def _chen_han(x: CipherHandle) -> list[CipherHandle]:
    p, r = x.owner.p, x.owner.r

    def fill(start: CipherHandle, row: int, top: int) -> list[CipherHandle]:
        chain = [start]
        if top > 1:
            f = build_F_lift(p, r - row)
            for _ in range(top - 1):
                chain.append(ps_eval(f, chain[-1]))
        chain.append(ps_eval(build_G(p, r - row), start))
        return chain[1:]

    return _rows(x, fill)


def _geelen(x: CipherHandle) -> list[CipherHandle]:
    p, r = x.owner.p, x.owner.r

    def fill(start: CipherHandle, row: int, top: int) -> list[CipherHandle]:
        tag = p ** (r - row)
        return [ps_eval(lowest_digit_poly(p, k + 1, tag), start) for k in range(1, top + 1)]

    return _rows(x, fill)


_STRATEGIES: dict[ExtractionStrategy, Callable[[CipherHandle], list[CipherHandle]]] = {
    ExtractionStrategy.SPACE_SWITCH: _space_switch,
    ExtractionStrategy.HALEVI_SHOUP: _halevi_shoup,
    ExtractionStrategy.CHEN_HAN: _chen_han,
    ExtractionStrategy.GEELEN: _geelen,
}


def reduce_to_digits(
    x: CipherHandle, strategy: ExtractionStrategy = ExtractionStrategy.SPACE_SWITCH
) -> DigitBundle:
    """
    Split a p^r-tagged value into its r balanced base-p digits.

    Evaluations are charged to the ledger stage "reduction".

    Args:
        x: Handle tagged p^r
        strategy: Digit-extraction layout

    Returns:
        DigitBundle whose digits are all tagged p

    Raises:
        ModulusMismatchError: If x is not tagged p^r
        LevelExhaustedError: If x lacks the levels the strategy needs
    """
    ev = x.owner
    if x.ptxt_modulus != ev.modulus:
        raise ModulusMismatchError(f"reduce_to_digits expects tag {ev.modulus}, got {x.ptxt_modulus}")
    with ev.ledger.stage("reduction"):
        raw = [x] if ev.r == 1 else _STRATEGIES[ExtractionStrategy(strategy)](x)
        digits = tuple(change_mod_to_p(d) for d in raw)
    logger.debug("Reduced p=%d r=%d with %s", ev.p, ev.r, strategy)
    return DigitBundle(digits, ev.modulus)


@dataclass(frozen=True)
class DepthEstimate:
    """
    Conservative multiplicative depth of the comparison pipeline, per stage.

    Attributes:
        reduction: Sum of ceil(log2 degree) along the deepest digit's chain
        compare: ceil(log2 p) for the digit comparison polynomials
        aggregation: r - 1 sequential combination steps
        raise_: ceil(log2 deg G_{p,r}) for modulus raising (0 when r = 1)
        slack: EVAL_SLACK per sequential polynomial evaluation
    """

    reduction: int
    compare: int
    aggregation: int
    raise_: int
    slack: int

    @property
    def total(self) -> int:
        return self.reduction + self.compare + self.aggregation + self.raise_ + self.slack


type _Path = tuple[int, int]  # (sum of log-degrees, evaluations)


def _reduction_path(p: int, r: int, strategy: ExtractionStrategy) -> _Path:
    def cost(degree: int) -> _Path:
        return (ceil_log2(degree), 1)

    def chain(a: _Path, b: _Path) -> _Path:
        return (a[0] + b[0], a[1] + b[1])

    def deeper(a: _Path, b: _Path) -> _Path:
        return max(a, b, key=lambda v: v[0] + EVAL_SLACK * v[1])

    if strategy is ExtractionStrategy.SPACE_SWITCH:
        total: _Path = (0, 0)
        for i in range(r - 1):
            total = chain(total, cost(g_degree(p, r - i)))
        return total

    lifted: list[list[_Path]] = []
    deepest: _Path = (0, 0)
    for i in range(r):
        start: _Path = (0, 0)
        for j in range(i):
            start = deeper(start, lifted[j][i - j])
        deepest = deeper(deepest, start)
        top = r - 1 - i
        row = [start]
        for k in range(1, top + 1):
            match strategy:
                case ExtractionStrategy.HALEVI_SHOUP:
                    row.append(chain(row[-1], cost(p)))
                case ExtractionStrategy.CHEN_HAN:
                    row.append(chain(row[-1], cost(p)) if k < top else chain(start, cost(g_degree(p, r - i))))
                case ExtractionStrategy.GEELEN:
                    row.append(chain(start, cost(g_degree(p, k + 1))))
        lifted.append(row)
    return deepest


def depth_breakdown(
    p: int, r: int, strategy: ExtractionStrategy = ExtractionStrategy.SPACE_SWITCH
) -> DepthEstimate:
    """
    Per-stage depth estimate for reduce, compare, aggregate and raise.

    Example:
        >>> depth_breakdown(5, 3).reduction
        7
    """
    if r < 1:
        raise ValueError(f"r must be at least 1, got {r}")
    log_depth, evaluations = _reduction_path(p, r, ExtractionStrategy(strategy))
    raise_depth = ceil_log2(g_degree(p, r)) if r > 1 else 0
    sequential = evaluations + 1 + (1 if r > 1 else 0)
    return DepthEstimate(
        reduction=log_depth,
        compare=ceil_log2(p),
        aggregation=r - 1,
        raise_=raise_depth,
        slack=EVAL_SLACK * sequential,
    )


def estimate_depth(
    p: int, r: int, strategy: ExtractionStrategy = ExtractionStrategy.SPACE_SWITCH
) -> int:
    """Levels that cover reduce + compare + aggregate + raise for (p, r)."""
    return depth_breakdown(p, r, strategy).total
