"""
Verification harnesses and cost benchmarks.

verify runs one exhaustive (or sampled) oracle check and reports pass/fail
with counterexamples instead of raising:

    polys      G_{p,e}, F_p, F_EQ and F_LT against their defining tables
    digits     reduce_to_digits against the balanced base-p expansion
    compare    all six predicates against integer semantics
    roundtrip  raise_mod(change_mod_to_p(x)) == x under many garbage seeds

bench meters one encrypted LT followed by raise_mod for every requested
bit width and extraction strategy, next to the direct comparison over a
single prime just above 2^(bitwidth+1).

Example:
    >>> verify(VerifyMode.DIGITS, 3, 2).passed
    True
    >>> rows = bench([8], [ExtractionStrategy.SPACE_SWITCH])
    >>> rows[0].total_mults < rows[0].direct_mults
    True
"""

import csv
import io
import json
import logging
import math
import time
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from enum import StrEnum
from pathlib import Path
from typing import Any, TextIO

import numpy as np
import sympy

from .compare import CompareOp, lt, lt_direct_prime, predicate
from .errors import InfeasibleParametersError, SpaceSwitchError
from .evaluator import CipherHandle, ClearEvaluator, Evaluator, ceil_log2, create_evaluator
from .params import Backend, ParamSet, select_params, strategy_levels
from .polynomials import (
    build_F_EQ,
    build_F_LT,
    build_F_lift,
    build_G,
    lt_zero_truth,
    verify_lift,
    verify_lowest_digit,
    verify_truth_table,
)
from .query import REPORT_SCHEMA, CostReport
from .ring import Residue, base_p_digits
from .space_switch import (
    EVAL_SLACK,
    ExtractionStrategy,
    change_mod_to_p,
    estimate_depth,
    raise_mod,
    reduce_to_digits,
)

logger = logging.getLogger(__name__)

# Encrypted checks are exhaustive up to this p^r and sampled above it.
EXHAUSTIVE_LIMIT = 3125
SAMPLE_SIZE = 4096
ROUNDTRIP_SEEDS = 100

# bgv handles hold a single value, so encrypted checks there are sampled.
BGV_SAMPLE_SIZE = 8
BGV_ROUNDTRIP_SEEDS = 2

# Direct-prime baselines above this prime are bounded, not metered.
DIRECT_METER_LIMIT = 1 << 14

BENCH_SLOTS = 16


class VerifyMode(StrEnum):
    POLYS = "polys"
    DIGITS = "digits"
    COMPARE = "compare"
    ROUNDTRIP = "roundtrip"


@dataclass
class VerifyReport:
    """
    Outcome of one verification run.

    Attributes:
        mode: What was checked
        p: Plaintext base
        r: Exponent
        backend: Backend the encrypted checks ran on
        checked: Number of inputs (or table entries) checked
        exhaustive: False when the inputs were sampled
        counterexamples: Failing cases, at most a handful per check
        notes: Per-check summaries
    """

    mode: VerifyMode
    p: int
    r: int
    backend: Backend = Backend.CLEAR
    checked: int = 0
    exhaustive: bool = True
    counterexamples: list[dict[str, Any]] = field(default_factory=list[dict[str, Any]])
    notes: list[str] = field(default_factory=list[str])

    @property
    def passed(self) -> bool:
        return not self.counterexamples

    def fail(self, check: str, **details: Any) -> None:
        if sum(1 for c in self.counterexamples if c["check"] == check) < 10:
            self.counterexamples.append({"check": check, **details})

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema": REPORT_SCHEMA,
            "mode": str(self.mode),
            "p": self.p,
            "r": self.r,
            "backend": str(self.backend),
            "passed": self.passed,
            "checked": self.checked,
            "exhaustive": self.exhaustive,
            "counterexamples": self.counterexamples,
            "notes": self.notes,
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    def render_text(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        scope = "exhaustive" if self.exhaustive else "sampled"
        lines = [
            f"verify {self.mode} p={self.p} r={self.r} ({self.backend}): {status}, "
            f"{self.checked} inputs, {scope}"
        ]
        lines += [f"  {note}" for note in self.notes]
        for c in self.counterexamples:
            lines.append("  counterexample: " + ", ".join(f"{k}={v}" for k, v in c.items()))
        return "\n".join(lines)


def _verify_params(p: int, r: int, backend: Backend, seed: int) -> ParamSet:
    return ParamSet.create(p, r, estimate_depth(p, r), backend=backend, seed=seed)


def _sample_size(backend: Backend, samples: int | None) -> int:
    if samples is not None:
        return samples
    return BGV_SAMPLE_SIZE if backend is Backend.BGV else SAMPLE_SIZE


def _roundtrip_seeds(backend: Backend, seeds: int | None) -> int:
    if seeds is not None:
        return seeds
    return BGV_ROUNDTRIP_SEEDS if backend is Backend.BGV else ROUNDTRIP_SEEDS


def _batches(ev: Evaluator, values: np.ndarray) -> Iterable[np.ndarray]:
    size = ev.params.max_slots if ev.packs_slots else 1
    for start in range(0, len(values), size):
        yield values[start : start + size]


def _encrypt(ev: Evaluator, values: np.ndarray, modulus: int | None = None) -> CipherHandle:
    items = [int(v) for v in values]
    return ev.encrypt(items if ev.packs_slots else items[0], modulus)


def _verify_polys(report: VerifyReport) -> None:
    p, r = report.p, report.r
    for name, poly, truth in (
        ("F_EQ", build_F_EQ(p), {a: 1 if a == 0 else 0 for a in range(p)}),
        ("F_LT", build_F_LT(p), lt_zero_truth(p)),
    ):
        report.checked += p
        for x, got, want in verify_truth_table(poly, truth):
            report.fail(name, x=x, got=got, expected=want)
        report.notes.append(f"{name}: {p} points")

    for e in range(2, r + 1):
        try:
            g_failures = verify_lowest_digit(build_G(p, e), p, e)
            f_failures = verify_lift(build_F_lift(p, e), p, e)
        except SpaceSwitchError as err:
            report.fail(f"construct e={e}", error=str(err))
            continue
        points = min(p**e, 1 << 16)
        report.checked += 2 * points
        if p**e > 1 << 16:
            report.exhaustive = False
        for x, got, want in g_failures:
            report.fail(f"G_{{p,{e}}}", x=x, got=got, expected=want)
        for x, t, got in f_failures:
            report.fail(f"F_p e={e}", x=x, t=t, got=got)
        report.notes.append(f"G_{{p,{e}}} and F_p mod {p}^{e}: {points} points each")


def _verify_digits(
    report: VerifyReport, ev: Evaluator, strategy: ExtractionStrategy, samples: int
) -> None:
    p, r, m = report.p, report.r, ev.modulus
    if m <= EXHAUSTIVE_LIMIT and ev.packs_slots:
        xs = np.arange(m, dtype=np.int64)
    else:
        report.exhaustive = False
        rng = np.random.default_rng(ev.params.seed)
        xs = rng.integers(0, m, size=min(m, samples), dtype=np.int64)
    for batch in _batches(ev, xs):
        digits = reduce_to_digits(_encrypt(ev, batch), strategy).decode()
        for x, got in zip(batch.tolist(), digits, strict=True):
            want = base_p_digits(Residue(int(x), m), p, r)
            if got != want:
                report.fail("digits", x=int(x), got=list(got), expected=list(want))
    report.checked += len(xs)
    report.notes.append(f"{strategy}: {len(xs)} inputs")


def _valid_pairs(m: int) -> tuple[np.ndarray, np.ndarray]:
    """All (a, b) in [0, m)^2 with |a - b| <= (m - 1) / 2."""
    half = (m - 1) // 2
    a = np.arange(m, dtype=np.int64)
    lo = np.maximum(a - half, 0)
    hi = np.minimum(a + half, m - 1)
    counts = hi - lo + 1
    left = np.repeat(a, counts)
    offsets = np.arange(counts.sum(), dtype=np.int64) - np.repeat(np.cumsum(counts) - counts, counts)
    return left, np.repeat(lo, counts) + offsets


def _sampled_pairs(m: int, size: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    half = (m - 1) // 2
    rng = np.random.default_rng(seed)
    a = rng.integers(0, m, size=size, dtype=np.int64)
    b = np.clip(a + rng.integers(-half, half + 1, size=size, dtype=np.int64), 0, m - 1)
    return a, b


def _verify_compare(
    report: VerifyReport, ev: Evaluator, strategy: ExtractionStrategy, samples: int
) -> None:
    m = ev.modulus
    if m <= EXHAUSTIVE_LIMIT and ev.packs_slots:
        left, right = _valid_pairs(m)
    else:
        report.exhaustive = False
        left, right = _sampled_pairs(m, samples, ev.params.seed)
    size = ev.params.max_slots if ev.packs_slots else 1
    for op in CompareOp:
        for start in range(0, len(left), size):
            a, b = left[start : start + size], right[start : start + size]
            got = predicate(op, _encrypt(ev, a), _encrypt(ev, b), strategy=strategy).decode()
            for x, y, v in zip(a.tolist(), b.tolist(), got, strict=True):
                if v != int(op.holds(x, y)):
                    report.fail(str(op), a=x, b=y, got=v)
        report.notes.append(f"{op}: {len(left)} pairs")
    report.checked += len(left) * len(CompareOp)


def _verify_roundtrip(report: VerifyReport, params: ParamSet, seeds: int) -> None:
    p = params.p
    half = p // 2
    xs = np.arange(-half, half + 1, dtype=np.int64)
    for seed in range(seeds):
        ev = create_evaluator(params, seed)
        for batch in _batches(ev, xs):
            lifted = raise_mod(change_mod_to_p(_encrypt(ev, batch % p, p)))
            for x, got in zip(batch.tolist(), ev.decode_balanced(lifted), strict=True):
                if got != x:
                    report.fail("roundtrip", x=x, seed=seed, got=got)
    report.checked += len(xs) * seeds
    report.notes.append(f"{len(xs)} digits x {seeds} garbage seeds")


def verify(
    mode: VerifyMode | str,
    p: int,
    r: int,
    *,
    backend: Backend | str = Backend.CLEAR,
    seed: int = 0,
    strategy: ExtractionStrategy = ExtractionStrategy.SPACE_SWITCH,
    samples: int | None = None,
    seeds: int | None = None,
) -> VerifyReport:
    """
    Run one oracle check; failures are report content, not exceptions.

    samples sets how many inputs or pairs a sampled digits / compare check
    draws, and seeds how many garbage seeds the round trip runs. None keeps
    the backend default (BGV_SAMPLE_SIZE and BGV_ROUNDTRIP_SEEDS on bgv).

    Raises:
        InfeasibleParametersError: If (p, r) is not valid for the backend
        ValueError: If samples or seeds is not positive
    """
    if (samples is not None and samples < 1) or (seeds is not None and seeds < 1):
        raise ValueError(f"samples and seeds must be positive, got {samples} and {seeds}")
    mode, backend = VerifyMode(mode), Backend(backend)
    report = VerifyReport(mode, p, r, backend)
    start = time.perf_counter()
    if mode is VerifyMode.POLYS:
        _verify_polys(report)
    else:
        params = _verify_params(p, r, backend, seed)
        match mode:
            case VerifyMode.DIGITS:
                _verify_digits(report, create_evaluator(params), strategy, _sample_size(backend, samples))
            case VerifyMode.COMPARE:
                _verify_compare(report, create_evaluator(params), strategy, _sample_size(backend, samples))
            case VerifyMode.ROUNDTRIP:
                _verify_roundtrip(report, params, _roundtrip_seeds(backend, seeds))
    logger.info(
        "verify %s p=%d r=%d: %s in %.2fs",
        mode,
        p,
        r,
        "pass" if report.passed else "FAIL",
        time.perf_counter() - start,
    )
    return report


@dataclass
class BenchRow:
    """
    Metered cost of one LT + raise at one bit width and strategy.

    Attributes:
        bitwidth: Bits per compared value
        strategy: Digit-extraction layout
        report: Per-stage costs, None when the configuration was skipped
        correct: The encrypted results matched the integers
        direct_prime: Prime for the single-field baseline
        direct_mults: Baseline non-scalar multiplications
        direct_metered: False when direct_mults is a plan bound
        note: Why a row was skipped, if it was
    """

    bitwidth: int
    strategy: ExtractionStrategy
    report: CostReport | None
    correct: bool
    direct_prime: int
    direct_mults: int
    direct_metered: bool
    note: str = ""

    @property
    def total_mults(self) -> int:
        return self.report.totals.nonscalar_mults if self.report else 0

    def to_dict(self) -> dict[str, Any]:
        row: dict[str, Any] = {
            "bitwidth": self.bitwidth,
            "strategy": str(self.strategy),
            "p": None,
            "r": None,
            "modulus": None,
            "levels": None,
        }
        if self.report is not None:
            params = self.report.params
            shares = self.report.shares()
            row.update(p=params.p, r=params.r, modulus=params.modulus, levels=params.levels)
            for name, cost in self.report.stages.items():
                row[name] = cost.nonscalar_mults
            row["total"] = self.total_mults
            row["depth"] = self.report.depth
            row["aggregation_share"] = round(shares["aggregation"], 4)
            row["reduction_compare_share"] = round(
                shares["reduction"] + shares["digit-compare"], 4
            )
        row.update(
            correct=self.correct,
            direct_prime=self.direct_prime,
            direct_mults=self.direct_mults,
            direct_metered=self.direct_metered,
            note=self.note,
        )
        return row


def ps_mult_bound(degree: int) -> int:
    """Paterson-Stockmeyer multiplication bound 2*ceil(sqrt(d+1)) + ceil(log2 d)."""
    return 2 * math.isqrt(degree) + 2 + ceil_log2(degree)


def direct_prime_cost(bitwidth: int, seed: int = 0) -> tuple[int, int, bool]:
    """
    (prime, non-scalar multiplications, metered) for LT over one prime field.

    The prime is the next one above 2^(bitwidth+1). Primes up to
    DIRECT_METER_LIMIT are metered on the clear backend; larger ones report
    the Paterson-Stockmeyer bound for degree q - 1.
    """
    q = int(sympy.nextprime(1 << (bitwidth + 1)))
    if q > DIRECT_METER_LIMIT:
        return q, ps_mult_bound(q - 1), False
    params = ParamSet.create(q, 1, ceil_log2(q) + EVAL_SLACK, seed=seed)
    ev = ClearEvaluator(params, seed)
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 1 << bitwidth, size=BENCH_SLOTS).tolist()
    b = rng.integers(0, 1 << bitwidth, size=BENCH_SLOTS).tolist()
    result = lt_direct_prime(ev.encode_vector(a), ev.encode_vector(b))
    expected = [int(x < y) for x, y in zip(a, b, strict=True)]
    if result.decode() != expected:
        raise SpaceSwitchError(f"Direct-prime LT over Z_{q} returned wrong results")
    return q, ev.ledger.nonscalar_mults, True


def _bench_one(
    base: ParamSet, bitwidth: int, strategy: ExtractionStrategy, seed: int
) -> tuple[CostReport, bool]:
    params = base.with_levels(strategy_levels(base.p, base.r, strategy))
    ev = create_evaluator(params, seed)
    rng = np.random.default_rng(seed)
    slots = BENCH_SLOTS if ev.packs_slots else 1
    a = rng.integers(0, 1 << bitwidth, size=slots).tolist()
    b = rng.integers(0, 1 << bitwidth, size=slots).tolist()
    x = ev.encrypt(a if ev.packs_slots else a[0])
    y = ev.encrypt(b if ev.packs_slots else b[0])
    start = time.perf_counter()
    result = lt(x, y, strategy=strategy, raise_result=True)
    elapsed = time.perf_counter() - start
    correct = result.decode() == [int(u < v) for u, v in zip(a, b, strict=True)]
    report = CostReport(params, ev.ledger.stages, result.handle.depth, strategy, wall_clock=elapsed)
    logger.debug(
        "bench b=%d %s: %d mults in %.3fs", bitwidth, strategy, report.totals.nonscalar_mults, elapsed
    )
    return report, correct


def bench(
    bitwidths: Sequence[int],
    strategies: Sequence[ExtractionStrategy | str] = (ExtractionStrategy.SPACE_SWITCH,),
    *,
    backend: Backend | str = Backend.CLEAR,
    seed: int = 0,
) -> list[BenchRow]:
    """
    Meter LT + raise per bit width and strategy with the selected (p, r).

    Infeasible bit widths produce rows with a note instead of failing.
    """
    rows: list[BenchRow] = []
    for bitwidth in bitwidths:
        q, direct, metered = direct_prime_cost(bitwidth, seed)
        try:
            base = select_params(bitwidth, backend=backend, seed=seed)
        except InfeasibleParametersError as e:
            logger.warning("Skipping %d bits: %s", bitwidth, e)
            for strategy in strategies:
                rows.append(
                    BenchRow(bitwidth, ExtractionStrategy(strategy), None, False, q, direct, metered, str(e))
                )
            continue
        for strategy in map(ExtractionStrategy, strategies):
            report, correct = _bench_one(base, bitwidth, strategy, seed)
            rows.append(BenchRow(bitwidth, strategy, report, correct, q, direct, metered))
    return rows


def _columns(rows: Sequence[BenchRow]) -> list[str]:
    names: list[str] = []
    for row in rows:
        for key in row.to_dict():
            if key not in names:
                names.append(key)
    return names


def write_bench_csv(rows: Sequence[BenchRow], out: TextIO | str | Path) -> None:
    """CSV with one line per (bit width, strategy)."""
    if isinstance(out, str | Path):
        with Path(out).open("w", newline="", encoding="utf-8") as f:
            write_bench_csv(rows, f)
        return
    writer = csv.DictWriter(out, fieldnames=_columns(rows))
    writer.writeheader()
    for row in rows:
        writer.writerow(row.to_dict())


def bench_to_csv(rows: Sequence[BenchRow]) -> str:
    buf = io.StringIO()
    write_bench_csv(rows, buf)
    return buf.getvalue()


def bench_to_dict(rows: Sequence[BenchRow]) -> dict[str, Any]:
    return {
        "schema": REPORT_SCHEMA,
        "rows": [row.to_dict() for row in rows],
        "reports": [row.report.to_dict() for row in rows if row.report is not None],
    }


def bench_to_json(rows: Sequence[BenchRow], indent: int | None = 2) -> str:
    return json.dumps(bench_to_dict(rows), indent=indent)


def render_bench_text(rows: Sequence[BenchRow]) -> str:
    header = (
        f"{'bits':>4} {'strategy':<14} {'p^r':>10} {'total':>7} {'depth':>5} "
        f"{'agg%':>6} {'red+cmp%':>9} {'direct':>8}"
    )
    lines = [header, "-" * len(header)]
    for row in rows:
        if row.report is None:
            lines.append(f"{row.bitwidth:>4} {row.strategy:<14} skipped: {row.note}")
            continue
        params = row.report.params
        shares = row.report.shares()
        direct = f"{row.direct_mults}{'' if row.direct_metered else '*'}"
        lines.append(
            f"{row.bitwidth:>4} {row.strategy:<14} {f'{params.p}^{params.r}':>10} "
            f"{row.total_mults:>7} {row.report.depth:>5} {shares['aggregation']:>6.1%} "
            f"{shares['reduction'] + shares['digit-compare']:>9.1%} {direct:>8}"
        )
    if any(not row.direct_metered for row in rows):
        lines.append(f"* plan bound; baselines above {DIRECT_METER_LIMIT} are not metered")
    return "\n".join(lines)
