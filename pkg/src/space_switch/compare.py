"""
Encrypted comparison predicates over Z_{p^r}.

lt(a, b) works on the difference d = a - b. It splits d into balanced
base-p digits, evaluates F_LT (and F_EQ) on every digit in Z_p and folds
the per-digit answers lexicographically from the top digit down:

    LT = LT_{r-1}
    EQ = EQ_{r-1}
    for i = r-2 .. 0:
        LT = LT + EQ * LT_i
        EQ = EQ * EQ_i          (skipped for i = 0)

The other predicates are rewrites: gt swaps operands, ge/le/neq take the
complement 1 - x, and eq multiplies the F_EQ of every digit. Results stay
tagged p unless raise_result is set, which lifts them back to p^r.

Both operands must lie in balanced range: |a - b| <= (p^r - 1) / 2.

Example:
    >>> ev = ClearEvaluator(ParamSet.create(5, 2, levels=estimate_depth(5, 2)))
    >>> a, b = ev.encode_vector([3, 7, 9]), ev.encode_vector([5, 7, 2])
    >>> lt(a, b).decode()
    [1, 0, 0]
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass
from enum import StrEnum

from .errors import ModulusMismatchError
from .evaluator import CipherHandle, ps_eval, ps_eval_many
from .polynomials import build_F_EQ, build_F_LT
from .space_switch import ExtractionStrategy, raise_mod, reduce_to_digits

logger = logging.getLogger(__name__)

type Operand = CipherHandle | int


class CompareOp(StrEnum):
    LT = "lt"
    LE = "le"
    GT = "gt"
    GE = "ge"
    EQ = "eq"
    NEQ = "neq"

    @property
    def sql(self) -> str:
        return _SQL_OPERATORS[self]

    def holds(self, a: int, b: int) -> bool:
        """Integer semantics of the predicate."""
        return _PLAIN[self](a, b)


_SQL_OPERATORS = {
    CompareOp.LT: "<",
    CompareOp.LE: "<=",
    CompareOp.GT: ">",
    CompareOp.GE: ">=",
    CompareOp.EQ: "=",
    CompareOp.NEQ: "!=",
}

_PLAIN: dict[CompareOp, Callable[[int, int], bool]] = {
    CompareOp.LT: lambda a, b: a < b,
    CompareOp.LE: lambda a, b: a <= b,
    CompareOp.GT: lambda a, b: a > b,
    CompareOp.GE: lambda a, b: a >= b,
    CompareOp.EQ: lambda a, b: a == b,
    CompareOp.NEQ: lambda a, b: a != b,
}


@dataclass(frozen=True)
class PredicateResult:
    """
    An encrypted 0/1 predicate value.

    Attributes:
        handle: Result handle, tagged p (or p^r when raised)
        op: The predicate computed
        raised: True when the handle was lifted back to p^r
    """

    handle: CipherHandle
    op: CompareOp
    raised: bool

    def decode(self) -> list[int]:
        return self.handle.owner.decode(self.handle)


def _difference(a: Operand, b: Operand) -> CipherHandle:
    match a, b:
        case CipherHandle(), CipherHandle():
            return a.owner.he_sub(a, b)
        case CipherHandle(), int():
            return a.owner.he_add_plain(a, -b)
        case int(), CipherHandle():
            return b.owner.rsub_plain(a, b)
        case _:
            raise TypeError("At least one comparison operand must be a handle")


def _check_operand(x: Operand) -> None:
    if isinstance(x, CipherHandle) and x.ptxt_modulus != x.owner.modulus:
        raise ModulusMismatchError(
            f"Comparison operands must be tagged p^r={x.owner.modulus}, got {x.ptxt_modulus}"
        )


def _lt_digits(d: CipherHandle, strategy: ExtractionStrategy) -> CipherHandle:
    """LT(d, 0) folded over the digits of d, tagged p."""
    ev = d.owner
    p = ev.p
    bundle = reduce_to_digits(d, strategy)
    f_lt, f_eq = build_F_LT(p), build_F_EQ(p)

    with ev.ledger.stage("digit-compare"):
        lts: list[CipherHandle] = [ps_eval(f_lt, bundle.digits[0])]
        eqs: list[CipherHandle | None] = [None]
        for digit in bundle.digits[1:]:
            lt_i, eq_i = ps_eval_many([f_lt, f_eq], digit)
            lts.append(lt_i)
            eqs.append(eq_i)

    with ev.ledger.stage("aggregation"):
        top = ev.r - 1
        acc_lt = lts[top]
        acc_eq = eqs[top]
        for i in range(top - 1, -1, -1):
            assert acc_eq is not None
            acc_lt = ev.he_add(acc_lt, ev.he_mul(acc_eq, lts[i]))
            eq_i = eqs[i]
            if i > 0 and eq_i is not None:
                acc_eq = ev.he_mul(acc_eq, eq_i)
    return acc_lt


def _eq_digits(d: CipherHandle, strategy: ExtractionStrategy) -> CipherHandle:
    ev = d.owner
    bundle = reduce_to_digits(d, strategy)
    f_eq = build_F_EQ(ev.p)
    with ev.ledger.stage("digit-compare"):
        eqs = [ps_eval(f_eq, digit) for digit in bundle.digits]
    with ev.ledger.stage("aggregation"):
        return ev.he_product(eqs)


def _finish(result: CipherHandle, op: CompareOp, raise_result: bool) -> PredicateResult:
    if raise_result:
        result = raise_mod(result)
    return PredicateResult(result, op, raise_result)


def predicate(
    op: CompareOp | str,
    a: Operand,
    b: Operand,
    *,
    strategy: ExtractionStrategy = ExtractionStrategy.SPACE_SWITCH,
    raise_result: bool = False,
) -> PredicateResult:
    """
    Evaluate `a op b` slotwise; either operand may be a plain integer.

    Args:
        op: One of lt, le, gt, ge, eq, neq
        a: Left operand, tagged p^r (or an int)
        b: Right operand, tagged p^r (or an int)
        strategy: Digit-extraction layout for the reduction stage
        raise_result: Lift the 0/1 result back to p^r

    Returns:
        PredicateResult decoding to 0 or 1 per slot

    Raises:
        ModulusMismatchError: If a handle is not tagged p^r
        BackendMismatchError: If the handles come from different evaluators
        LevelExhaustedError: If the chain is too short for the pipeline
    """
    op = CompareOp(op)
    _check_operand(a)
    _check_operand(b)
    handle = a if isinstance(a, CipherHandle) else b
    if not isinstance(handle, CipherHandle):
        raise TypeError("At least one comparison operand must be a handle")
    ev = handle.owner

    match op:
        case CompareOp.LT | CompareOp.GE:
            with ev.ledger.stage("reduction"):
                d = _difference(a, b)
            result = _lt_digits(d, strategy)
        case CompareOp.GT | CompareOp.LE:
            with ev.ledger.stage("reduction"):
                d = _difference(b, a)
            result = _lt_digits(d, strategy)
        case CompareOp.EQ | CompareOp.NEQ:
            with ev.ledger.stage("reduction"):
                d = _difference(a, b)
            result = _eq_digits(d, strategy)

    if op in (CompareOp.GE, CompareOp.LE, CompareOp.NEQ):
        with ev.ledger.stage("aggregation"):
            result = ev.rsub_plain(1, result)
    logger.debug("Evaluated %s at p=%d r=%d via %s", op, ev.p, ev.r, strategy)
    return _finish(result, op, raise_result)


def lt(
    a: Operand,
    b: Operand,
    *,
    strategy: ExtractionStrategy = ExtractionStrategy.SPACE_SWITCH,
    raise_result: bool = False,
) -> PredicateResult:
    """1 where a < b."""
    return predicate(CompareOp.LT, a, b, strategy=strategy, raise_result=raise_result)


def le(
    a: Operand,
    b: Operand,
    *,
    strategy: ExtractionStrategy = ExtractionStrategy.SPACE_SWITCH,
    raise_result: bool = False,
) -> PredicateResult:
    return predicate(CompareOp.LE, a, b, strategy=strategy, raise_result=raise_result)


def gt(
    a: Operand,
    b: Operand,
    *,
    strategy: ExtractionStrategy = ExtractionStrategy.SPACE_SWITCH,
    raise_result: bool = False,
) -> PredicateResult:
    return predicate(CompareOp.GT, a, b, strategy=strategy, raise_result=raise_result)


def ge(
    a: Operand,
    b: Operand,
    *,
    strategy: ExtractionStrategy = ExtractionStrategy.SPACE_SWITCH,
    raise_result: bool = False,
) -> PredicateResult:
    return predicate(CompareOp.GE, a, b, strategy=strategy, raise_result=raise_result)


def eq(
    a: Operand,
    b: Operand,
    *,
    strategy: ExtractionStrategy = ExtractionStrategy.SPACE_SWITCH,
    raise_result: bool = False,
) -> PredicateResult:
    """1 where a == b: product of F_EQ over all digits."""
    return predicate(CompareOp.EQ, a, b, strategy=strategy, raise_result=raise_result)


def neq(
    a: Operand,
    b: Operand,
    *,
    strategy: ExtractionStrategy = ExtractionStrategy.SPACE_SWITCH,
    raise_result: bool = False,
) -> PredicateResult:
    return predicate(CompareOp.NEQ, a, b, strategy=strategy, raise_result=raise_result)


def lt_direct_prime(a: CipherHandle, b: CipherHandle) -> PredicateResult:
    """
    Baseline LT in a single large prime field: F_LT(a - b) over Z_p.

    The evaluator must be configured with r = 1 and p at least twice the
    value range, so no digit work is needed.

    Raises:
        ModulusMismatchError: If the evaluator's r is not 1
    """
    ev = a.owner
    if ev.r != 1:
        raise ModulusMismatchError(f"The direct-prime baseline needs r = 1, evaluator has r = {ev.r}")
    with ev.ledger.stage("reduction"):
        d = ev.he_sub(a, b)
    with ev.ledger.stage("digit-compare"):
        result = ps_eval(build_F_LT(ev.p), d)
    return PredicateResult(result, CompareOp.LT, False)
