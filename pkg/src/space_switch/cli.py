"""
Command-line interface for space-switch.

Usage:
    space-switch params [--bitwidth B | --p P --r R]
    space-switch compare <a> <b> [--op lt]
    space-switch extract (<x> | --exhaustive) [--strategy space-switch]
    space-switch ingest <file.csv> [--out DIR]
    space-switch query (--csv FILE | --columns DIR | --q6 ROWS) [--where col:op:value ...] [--sum a*b]
    space-switch verify {polys,digits,compare,roundtrip}
    space-switch bench [--bitwidths 8,12] [--strategies all]
    space-switch dump-poly --kind {G,F,EQ,LT} --p P --e E

Exit codes: 0 success, 2 verification failure, 3 infeasible parameters,
4 I/O error.
"""

import json
import logging
import sys
from collections.abc import Iterator
from contextlib import contextmanager
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import click

from .bgv import BGVCiphertext, BGVEvaluator, RelinKey, SecretKey
from .codec import CiphertextCodec
from .compare import CompareOp, predicate
from .errors import InfeasibleParametersError, IngestError, SpaceSwitchError
from .evaluator import CipherHandle, Evaluator, create_evaluator
from .params import (
    INSECURE_BANNER,
    Backend,
    ParamSet,
    predict_pipeline_cost,
    select_params,
    strategy_levels,
)
from .polynomials import (
    DensePoly,
    build_F_EQ,
    build_F_LT,
    build_F_lift,
    build_G,
    poly_from_json,
    poly_to_json,
)
from .query import (
    REPORT_SCHEMA,
    EncryptedTable,
    PlainTable,
    QueryPlan,
    ReferenceEngine,
    TableSpec,
    encrypt_table,
    generate_q6_table,
    load_table,
    q6_plan,
    query_extra_depth,
    required_bitwidth,
    run_query,
)
from .reports import (
    VerifyMode,
    bench,
    bench_to_csv,
    bench_to_json,
    render_bench_text,
    verify,
    write_bench_csv,
)
from .space_switch import (
    ExtractionStrategy,
    depth_breakdown,
    extraction_eval_counts,
    reduce_to_digits,
)

logger = logging.getLogger(__name__)

EXIT_VERIFY_FAILED = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4

MANIFEST = "manifest.json"
KEYS_FILE = "keys.bin"

# Levels reserved by `ingest` when no query plan is given: AND of up to
# four predicates, a two-column product and the mask multiply.
DEFAULT_QUERY_EXTRA_DEPTH = 4

STRATEGY_CHOICE = click.Choice([str(s) for s in ExtractionStrategy])


@dataclass(frozen=True)
class Settings:
    """Global options shared by every subcommand."""

    p: int | None
    r: int | None
    bitwidth: int
    backend: Backend
    seed: int
    output_json: bool

    def params(
        self,
        *,
        bitwidth: int | None = None,
        extra_depth: int = 0,
        strategy: ExtractionStrategy = ExtractionStrategy.SPACE_SWITCH,
    ) -> ParamSet:
        """Explicit --p/--r, or the cheapest set for the bit width."""
        if self.p is not None and self.r is not None:
            levels = strategy_levels(self.p, self.r, strategy, extra_depth)
            return ParamSet.create(self.p, self.r, levels, backend=self.backend, seed=self.seed)
        if self.p is not None or self.r is not None:
            raise click.UsageError("--p and --r must be given together")
        return select_params(
            bitwidth or self.bitwidth,
            backend=self.backend,
            extra_depth=extra_depth,
            seed=self.seed,
            strategy=strategy,
        )


def _emit(settings: Settings, data: dict[str, Any], text: str) -> None:
    click.echo(json.dumps(data, indent=2) if settings.output_json else text)


@contextmanager
def _exit_on_error() -> Iterator[None]:
    """Map library errors to exit codes."""
    try:
        yield
    except InfeasibleParametersError as e:
        click.echo(f"Infeasible parameters: {e}", err=True)
        sys.exit(EXIT_INFEASIBLE)
    except (OSError, IngestError) as e:
        click.echo(f"I/O error: {e}", err=True)
        sys.exit(EXIT_IO)
    except SpaceSwitchError as e:
        click.echo(f"Error: {e}", err=True)
        sys.exit(1)


def _banner(params: ParamSet) -> None:
    if params.backend is Backend.BGV:
        click.echo(INSECURE_BANNER, err=True)


@click.group()
@click.version_option(package_name="space-switch-he")
@click.option("--p", "p", type=int, help="Plaintext prime (with --r)")
@click.option("--r", "r", type=int, help="Exponent (with --p)")
@click.option("--bitwidth", "-b", type=int, default=8, show_default=True, help="Value bit width for parameter selection")
@click.option(
    "--backend",
    type=click.Choice([str(b) for b in Backend]),
    default=str(Backend.CLEAR),
    show_default=True,
    help="Evaluation backend",
)
@click.option("--seed", type=int, default=0, show_default=True, help="Seed for every random draw")
@click.option("--json", "output_json", is_flag=True, help="Output as JSON")
@click.option("--verbose", "-v", count=True, help="-v for info, -vv for debug logging")
@click.pass_context
def main(
    ctx: click.Context,
    p: int | None,
    r: int | None,
    bitwidth: int,
    backend: str,
    seed: int,
    output_json: bool,
    verbose: int,
):
    """
    Encrypted comparison by switching between Z_{p^r} and Z_p.

    Runs digit reduction, digit-wise comparison and modulus raising over a
    metered cleartext backend or toy BGV parameters. The BGV parameters are
    for experimentation only and carry no security claim.
    """
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = Settings(p, r, bitwidth, Backend(backend), seed, output_json)


@main.command()
@click.pass_obj
def params(settings: Settings):
    """
    Show the parameter set and its predicted comparison cost.

    Examples:
        space-switch params --bitwidth 12
        space-switch --p 7 --r 3 params
    """
    with _exit_on_error():
        chosen = settings.params()
    cost = predict_pipeline_cost(chosen.p, chosen.r)
    depth = depth_breakdown(chosen.p, chosen.r)
    data = {
        "schema": REPORT_SCHEMA,
        "params": chosen.to_dict(),
        "predicted": cost.to_dict(),
        "depth_breakdown": {
            "reduction": depth.reduction,
            "digit-compare": depth.compare,
            "aggregation": depth.aggregation,
            "raise": depth.raise_,
            "slack": depth.slack,
            "total": depth.total,
        },
    }
    lines = [
        f"p={chosen.p} r={chosen.r} p^r={chosen.modulus}",
        f"Ring degree: {chosen.n}",
        f"Chain: {chosen.levels + 1} primes, log2 Q = {chosen.to_dict()['log2_q']}",
        f"Backend: {chosen.backend}",
        f"Predicted LT + raise: {cost.total} non-scalar mults "
        f"(reduction {cost.reduction}, digit-compare {cost.compare}, "
        f"aggregation {cost.aggregation}, raise {cost.raise_})",
        f"Estimated depth: {depth.total}",
    ]
    if chosen.backend is Backend.BGV:
        lines.append(INSECURE_BANNER)
    _emit(settings, data, "\n".join(lines))


def _parse_values(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter(f"{text!r} is not a comma-separated list of integers") from None


def _encrypt_values(ev: Evaluator, values: list[int]) -> list[CipherHandle]:
    if ev.packs_slots:
        return [ev.encrypt(values)]
    return [ev.encrypt(v) for v in values]


@main.command()
@click.argument("a")
@click.argument("b")
@click.option("--op", type=click.Choice([str(o) for o in CompareOp]), default="lt", show_default=True)
@click.option("--strategy", type=STRATEGY_CHOICE, default=str(ExtractionStrategy.SPACE_SWITCH))
@click.option("--raise/--no-raise", "raise_result", default=False, help="Lift the result back to p^r")
@click.pass_obj
def compare(settings: Settings, a: str, b: str, op: str, strategy: str, raise_result: bool):
    """
    Compare two encrypted values (comma-separated lists compare slotwise).

    Example:
        space-switch compare 3,17,200 5,17,100 --op le
    """
    left, right = _parse_values(a), _parse_values(b)
    if len(left) != len(right):
        raise click.BadParameter(f"{len(left)} left values but {len(right)} right values")
    with _exit_on_error():
        params = settings.params(strategy=ExtractionStrategy(strategy))
        _banner(params)
        ev = create_evaluator(params)
        results: list[int] = []
        for x, y in zip(_encrypt_values(ev, left), _encrypt_values(ev, right), strict=True):
            res = predicate(op, x, y, strategy=ExtractionStrategy(strategy), raise_result=raise_result)
            results += res.decode()
    data = {
        "schema": REPORT_SCHEMA,
        "op": op,
        "p": params.p,
        "r": params.r,
        "results": results,
        "ledger": ev.ledger.to_dict(),
    }
    stages = ev.ledger.stages
    lines = [f"{x} {CompareOp(op).sql} {y}: {v}" for x, y, v in zip(left, right, results, strict=True)]
    lines.append(f"{ev.ledger.nonscalar_mults} non-scalar mults at p={params.p} r={params.r}")
    lines += [f"  {name}: {cost.nonscalar_mults}" for name, cost in stages.items()]
    _emit(settings, data, "\n".join(lines))


@main.command()
@click.argument("x", required=False)
@click.option("--exhaustive", is_flag=True, help="Every residue of Z_{p^r} instead of X")
@click.option("--strategy", type=STRATEGY_CHOICE, default=str(ExtractionStrategy.SPACE_SWITCH))
@click.pass_obj
def extract(settings: Settings, x: str | None, exhaustive: bool, strategy: str):
    """
    Split encrypted values into balanced base-p digits.

    Examples:
        space-switch --p 5 --r 3 extract 117,33 --strategy chen-han
        space-switch --p 3 --r 4 extract --exhaustive
    """
    if (x is None) == (not exhaustive):
        raise click.UsageError("Give either values or --exhaustive")
    chosen = ExtractionStrategy(strategy)
    with _exit_on_error():
        params = settings.params(strategy=chosen)
        _banner(params)
        ev = create_evaluator(params)
        values = list(range(params.modulus)) if exhaustive else _parse_values(x or "")
        digits: list[tuple[int, ...]] = []
        depth = 0
        step = params.max_slots if ev.packs_slots else 1
        for start in range(0, len(values), step):
            for h in _encrypt_values(ev, values[start : start + step]):
                bundle = reduce_to_digits(h, chosen)
                digits += bundle.decode()
                depth = max(depth, *(d.depth for d in bundle.digits))
    counts = extraction_eval_counts(params.p, params.r, chosen)
    data = {
        "schema": REPORT_SCHEMA,
        "p": params.p,
        "r": params.r,
        "strategy": strategy,
        "digits": [list(d) for d in digits],
        "evaluations": counts,
        "depth": depth,
        "ledger": ev.ledger.to_dict(),
    }
    lines = [f"{v}: {list(d)}" for v, d in zip(values, digits, strict=True)]
    lines.append(f"Evaluations: {', '.join(f'{k} x{v}' for k, v in counts.items()) or 'none'}")
    lines.append(f"{ev.ledger.nonscalar_mults} non-scalar mults, depth {depth}")
    _emit(settings, data, "\n".join(lines))


def _plan_from_options(where: tuple[str, ...], sum_expr: str | None, plan_file: str | None) -> QueryPlan | None:
    try:
        if plan_file:
            return QueryPlan.from_json(Path(plan_file).read_text(encoding="utf-8"))
        if sum_expr:
            return QueryPlan.from_flags(where, sum_expr)
    except ValueError as e:
        raise click.BadParameter(str(e)) from None
    if where:
        raise click.BadParameter("--where needs --sum")
    return None


def _parse_widths(widths: tuple[str, ...]) -> dict[str, int]:
    parsed: dict[str, int] = {}
    for item in widths:
        name, sep, bits = item.partition("=")
        if not sep or not bits.isdigit():
            raise click.BadParameter(f"{item!r} is not of the form column=bits")
        parsed[name.strip()] = int(bits)
    return parsed


def _check_plan(plan: QueryPlan, spec: TableSpec) -> None:
    try:
        plan.validate(spec)
    except ValueError as e:
        raise click.BadParameter(str(e)) from None


def _table_params(settings: Settings, spec: TableSpec, plan: QueryPlan | None, strategy: ExtractionStrategy) -> ParamSet:
    if plan is None:
        bits = max(spec.bitwidths)
        return settings.params(bitwidth=bits, extra_depth=DEFAULT_QUERY_EXTRA_DEPTH, strategy=strategy)
    _check_plan(plan, spec)
    bits = required_bitwidth(spec, plan, settings.backend)
    return settings.params(bitwidth=bits, extra_depth=query_extra_depth(plan), strategy=strategy)


def _write_columns(out: Path, enc: EncryptedTable) -> list[str]:
    ev = enc.evaluator
    assert isinstance(ev, BGVEvaluator)
    codec = CiphertextCodec(ev.params)
    out.mkdir(parents=True, exist_ok=True)
    (out / KEYS_FILE).write_bytes(
        codec.encode_secret_key(ev.secret_key) + codec.encode_relin_key(ev.relin_key)
    )
    files: list[str] = []
    for name in enc.spec.columns:
        path = out / f"{name}.ct"
        path.write_bytes(b"".join(codec.encode_ciphertext(h.payload) for h in enc.handles(name)))
        files.append(path.name)
    manifest = {
        "schema": REPORT_SCHEMA,
        "params": ev.params.to_dict(),
        "table": enc.spec.to_dict(),
        "keys": KEYS_FILE,
        "columns": dict(zip(enc.spec.columns, files, strict=True)),
        "security": INSECURE_BANNER,
    }
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2), encoding="utf-8")
    return files


def _decode_file(codec: CiphertextCodec, path: Path) -> list[Any]:
    try:
        return list(codec.decode_all(path.read_bytes()))
    except ValueError as e:
        raise IngestError(f"{path.name}: {e}") from e


def _read_columns(directory: Path) -> EncryptedTable:
    """
    Rebuild an EncryptedTable written by `ingest --out`.

    Raises:
        OSError: If a file is missing
        IngestError: If the manifest or a record is malformed
    """
    try:
        manifest = json.loads((directory / MANIFEST).read_text(encoding="utf-8"))
        stored = manifest["params"]
        params = ParamSet(
            stored["p"],
            stored["r"],
            tuple(stored["chain"]),
            stored["n"],
            stored["seed"],
            Backend.BGV,
            stored["sigma"],
            stored["hamming_weight"],
            stored["max_slots"],
        )
        spec = TableSpec.from_dict(manifest["table"])
        keys_file = directory / manifest["keys"]
        files = {name: directory / manifest["columns"][name] for name in spec.columns}
    except (KeyError, TypeError, json.JSONDecodeError) as e:
        raise IngestError(f"{directory / MANIFEST}: malformed manifest ({e})") from e

    codec = CiphertextCodec(params)
    keys = _decode_file(codec, keys_file)
    if len(keys) != 2 or not isinstance(keys[0], SecretKey) or not isinstance(keys[1], RelinKey):
        raise IngestError(f"{keys_file.name}: expected a secret key and a relinearisation key")
    ev = BGVEvaluator(params, keys=(keys[0], keys[1]))
    columns: dict[str, list[CipherHandle]] = {}
    for name, path in files.items():
        records = _decode_file(codec, path)
        cts = [c for c in records if isinstance(c, BGVCiphertext)]
        if len(cts) != spec.rows or len(records) != spec.rows:
            raise IngestError(f"{path.name}: expected {spec.rows} ciphertexts, found {len(cts)}")
        columns[name] = [ev.adopt(c) for c in cts]
    return EncryptedTable(spec, ev, columns)


@main.command()
@click.argument("csv_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--width", "-w", "widths", multiple=True, help="Column bit width, e.g. price=8 (repeatable)")
@click.option("--where", multiple=True, help="Size parameters for this predicate, col:op:value")
@click.option("--sum", "sum_expr", help="Size parameters for this aggregate, e.g. price*discount")
@click.option("--plan", "plan_file", type=click.Path(exists=True, dir_okay=False), help="Query plan JSON")
@click.option("--strategy", type=STRATEGY_CHOICE, default=str(ExtractionStrategy.SPACE_SWITCH))
@click.option("--out", "-o", type=click.Path(file_okay=False), help="Write ciphertexts and keys here (bgv)")
@click.pass_obj
def ingest(
    settings: Settings,
    csv_file: str,
    widths: tuple[str, ...],
    where: tuple[str, ...],
    sum_expr: str | None,
    plan_file: str | None,
    strategy: str,
    out: str | None,
):
    """
    Validate, encrypt and optionally store a CSV table.

    Columns default to --bitwidth bits. Parameters are sized for the query
    plan when one is given.

    Example:
        space-switch --backend bgv ingest lineitem.csv -w price=8 --out enc/
    """
    plan = _plan_from_options(where, sum_expr, plan_file)
    if out and settings.backend is not Backend.BGV:
        raise click.UsageError("--out stores ciphertexts and needs --backend bgv")
    with _exit_on_error():
        table = load_table(csv_file, bitwidth=settings.bitwidth, bitwidths=_parse_widths(widths))
        params = _table_params(settings, table.spec, plan, ExtractionStrategy(strategy))
        _banner(params)
        enc = encrypt_table(table, create_evaluator(params))
        files = _write_columns(Path(out), enc) if out else []
    handles = {name: len(enc.handles(name)) for name in table.spec.columns}
    data = {
        "schema": REPORT_SCHEMA,
        "table": table.spec.to_dict(),
        "params": params.to_dict(),
        "handles": handles,
        "out": out,
        "files": files,
    }
    lines = [
        f"Ingested {table.spec.rows} rows x {len(table.spec.columns)} columns at p={params.p} r={params.r}",
        *(f"  {name}: {bits} bits, {handles[name]} handle(s)" for name, bits in zip(table.spec.columns, table.spec.bitwidths, strict=True)),
    ]
    if out:
        lines.append(f"Wrote {len(files)} column files, {KEYS_FILE} and {MANIFEST} to {out}")
    _emit(settings, data, "\n".join(lines))


@main.command()
@click.option("--csv", "csv_file", type=click.Path(exists=True, dir_okay=False), help="Plaintext CSV table")
@click.option("--columns", "columns_dir", type=click.Path(exists=True, file_okay=False), help="Directory written by ingest --out")
@click.option("--q6", "q6_rows", type=int, help="Synthetic lineitem table with this many rows")
@click.option("--width", "-w", "widths", multiple=True, help="Column bit width for --csv, e.g. price=8")
@click.option("--where", multiple=True, help="Predicate col:op:value (repeatable, ANDed)")
@click.option("--sum", "sum_expr", help="Aggregate, e.g. price*discount")
@click.option("--plan", "plan_file", type=click.Path(exists=True, dir_okay=False), help="Query plan JSON")
@click.option("--strategy", type=STRATEGY_CHOICE, default=str(ExtractionStrategy.SPACE_SWITCH))
@click.pass_obj
def query(
    settings: Settings,
    csv_file: str | None,
    columns_dir: str | None,
    q6_rows: int | None,
    widths: tuple[str, ...],
    where: tuple[str, ...],
    sum_expr: str | None,
    plan_file: str | None,
    strategy: str,
):
    """
    Run an encrypted filter + SUM query and check it against sqlite.

    Examples:
        space-switch query --q6 256
        space-switch query --csv t.csv --where qty:lt:24 --where price:ge:5 --sum price*disc
        space-switch query --columns enc/ --plan plan.json
    """
    sources = [s for s in (csv_file, columns_dir, q6_rows) if s is not None]
    if len(sources) != 1:
        raise click.UsageError("Give exactly one of --csv, --columns or --q6")
    plan = _plan_from_options(where, sum_expr, plan_file)
    if plan is None:
        if q6_rows is None:
            raise click.UsageError("A query needs --sum or --plan")
        plan = q6_plan()
    chosen = ExtractionStrategy(strategy)

    plain: PlainTable | None = None
    with _exit_on_error():
        if columns_dir is not None:
            enc = _read_columns(Path(columns_dir))
            _banner(enc.evaluator.params)
        else:
            if q6_rows is not None:
                plain = generate_q6_table(q6_rows, settings.seed)
            else:
                assert csv_file is not None
                plain = load_table(csv_file, bitwidth=settings.bitwidth, bitwidths=_parse_widths(widths))
            params = _table_params(settings, plain.spec, plan, chosen)
            _banner(params)
            enc = encrypt_table(plain, create_evaluator(params))
        _check_plan(plan, enc.spec)
        result = run_query(plan, enc, strategy=chosen)

    expected: int | None = None
    if plain is not None:
        with ReferenceEngine(plain) as ref:
            expected = ref.run(plan)
    data = result.report.to_dict()
    data["reference"] = expected
    data["match"] = None if expected is None else expected == result.value
    lines = [f"{plan.sql()} = {result.value}"]
    if expected is not None:
        lines.append(f"reference (sqlite): {expected} [{'match' if expected == result.value else 'MISMATCH'}]")
    lines.append(result.report.render_text())
    _emit(settings, data, "\n".join(lines))
    if expected is not None and expected != result.value:
        sys.exit(EXIT_VERIFY_FAILED)


@main.command("verify")
@click.argument("mode", type=click.Choice([str(m) for m in VerifyMode]))
@click.option("--strategy", type=STRATEGY_CHOICE, default=str(ExtractionStrategy.SPACE_SWITCH))
@click.option(
    "--samples",
    type=click.IntRange(min=1),
    help="Inputs or pairs per sampled check (default 8 on bgv, 4096 on clear)",
)
@click.option(
    "--seeds",
    type=click.IntRange(min=1),
    help="Garbage seeds for roundtrip (default 2 on bgv, 100 on clear)",
)
@click.pass_obj
def verify_cmd(settings: Settings, mode: str, strategy: str, samples: int | None, seeds: int | None):
    """
    Exhaustively check polynomials, digits, predicates or the round trip.

    Checks that cannot be exhaustive (every bgv check, and clear domains
    above 3125) are sampled; --samples and --seeds size longer runs.
    Exits with status 2 when a check fails.

    Example:
        space-switch --p 5 --r 3 verify polys
        space-switch --backend bgv --p 5 --r 2 verify compare --samples 1000
    """
    if settings.p is None or settings.r is None:
        raise click.UsageError("verify needs --p and --r")
    with _exit_on_error():
        report = verify(
            mode,
            settings.p,
            settings.r,
            backend=settings.backend,
            seed=settings.seed,
            strategy=ExtractionStrategy(strategy),
            samples=samples,
            seeds=seeds,
        )
    _emit(settings, report.to_dict(), report.render_text())
    if not report.passed:
        sys.exit(EXIT_VERIFY_FAILED)


def _parse_list(text: str) -> list[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


@main.command("bench")
@click.option("--bitwidths", default="8,12", show_default=True, help="Comma-separated bit widths")
@click.option("--strategies", default="space-switch", show_default=True, help="Comma-separated strategies, or 'all'")
@click.option("--out", "-o", type=click.Path(dir_okay=False), help="Write the table to a file")
@click.option(
    "--format",
    "-f",
    "output_format",
    type=click.Choice(["csv", "json"]),
    help="File format (default: from extension)",
)
@click.pass_obj
def bench_cmd(settings: Settings, bitwidths: str, strategies: str, out: str | None, output_format: str | None):
    """
    Meter LT + raise per bit width and strategy against the direct-prime baseline.

    Example:
        space-switch bench --bitwidths 8,12 --strategies all -o bench.csv
    """
    try:
        widths = [int(b) for b in _parse_list(bitwidths)]
        names = list(ExtractionStrategy) if strategies == "all" else [ExtractionStrategy(s) for s in _parse_list(strategies)]
    except ValueError as e:
        raise click.BadParameter(str(e)) from None
    with _exit_on_error():
        rows = bench(widths, names, backend=settings.backend, seed=settings.seed)
        if out:
            fmt = output_format or ("json" if Path(out).suffix.lower() == ".json" else "csv")
            if fmt == "json":
                Path(out).write_text(bench_to_json(rows), encoding="utf-8")
            else:
                write_bench_csv(rows, out)
    if settings.output_json:
        click.echo(bench_to_json(rows))
    elif output_format == "csv" and not out:
        click.echo(bench_to_csv(rows), nl=False)
    else:
        click.echo(render_bench_text(rows))
    if out:
        click.echo(f"Wrote {len(rows)} rows to {out}", err=True)


def _check_saved_poly(poly: DensePoly, path: Path) -> None:
    try:
        saved = poly_from_json(json.loads(path.read_text(encoding="utf-8")))
    except (KeyError, TypeError, ValueError) as err:
        raise click.BadParameter(f"{path.name}: not a saved polynomial ({err})") from None
    if saved.modulus != poly.modulus or saved.coeffs != poly.coeffs:
        click.echo(f"{path.name}: does not match {poly.name} mod {poly.modulus}", err=True)
        sys.exit(EXIT_VERIFY_FAILED)
    click.echo(f"{path.name}: matches {poly.name} mod {poly.modulus}, degree {poly.degree}")


@main.command("dump-poly")
@click.option("--kind", type=click.Choice(["G", "F", "EQ", "LT"]), required=True)
@click.option("--p", "p", type=int, help="Prime (default: global --p)")
@click.option("--e", "e", type=int, default=1, show_default=True, help="Exponent for G and F")
@click.option(
    "--check",
    "check_file",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Compare against a polynomial saved with --json",
)
@click.pass_obj
def dump_poly(settings: Settings, kind: str, p: int | None, e: int, check_file: Path | None):
    """
    Print the coefficients of an interpolation polynomial.

    With --check, the saved polynomial is reloaded and compared with a fresh
    construction; a mismatch exits with status 2.

    Example:
        space-switch --json dump-poly --kind G --p 5 --e 3 > g53.json
        space-switch dump-poly --kind G --p 5 --e 3 --check g53.json
    """
    prime = p if p is not None else settings.p
    if prime is None:
        raise click.UsageError("dump-poly needs --p")
    try:
        match kind:
            case "G":
                poly = build_G(prime, e)
            case "F":
                poly = build_F_lift(prime, e)
            case "EQ":
                poly = build_F_EQ(prime)
            case _:
                poly = build_F_LT(prime)
    except ValueError as err:
        raise click.BadParameter(str(err)) from None
    if check_file is not None:
        _check_saved_poly(poly, check_file)
        return
    data = poly_to_json(poly)
    if settings.output_json:
        click.echo(json.dumps(data, indent=2))
    else:
        click.echo(f"{poly.name} mod {poly.modulus}, degree {poly.degree}")
        click.echo(" ".join(str(c) for c in poly.balanced_coeffs()))


if __name__ == "__main__":
    main()
