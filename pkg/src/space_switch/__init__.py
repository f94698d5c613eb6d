"""
Space Switch

Exact encrypted comparison over Z_{p^r} by switching to the digit space Z_p.

A value tagged p^r is split into balanced base-p digits, each digit is
compared with small interpolation polynomials over Z_p, the per-digit
answers are folded lexicographically, and the 0/1 result is raised back to
p^r so it can be multiplied into further arithmetic. Everything runs over
a metered cleartext backend or a toy BGV scheme with no security claim.

Example:
    >>> from space_switch import ClearEvaluator, lt, select_params
    >>>
    >>> ev = ClearEvaluator(select_params(8))
    >>> a, b = ev.encode_vector([3, 200, 77]), ev.encode_vector([5, 100, 77])
    >>> lt(a, b).decode()
    [1, 0, 0]
    >>> ev.ledger.stages["digit-compare"].nonscalar_mults > 0
    True

CLI Example:
    $ space-switch params --bitwidth 12
    $ space-switch query --q6 256
    $ space-switch --p 5 --r 3 verify compare
"""

__version__ = "0.1.0"

from .bgv import BGVCiphertext, BGVEvaluator, RelinKey, SecretKey, keygen
from .codec import CiphertextCodec
from .compare import (
    CompareOp,
    PredicateResult,
    eq,
    ge,
    gt,
    le,
    lt,
    lt_direct_prime,
    neq,
    predicate,
)
from .errors import (
    BackendMismatchError,
    DecryptionError,
    InfeasibleParametersError,
    IngestError,
    LevelExhaustedError,
    ModulusMismatchError,
    SpaceSwitchError,
)
from .evaluator import (
    CipherHandle,
    ClearEvaluator,
    Evaluator,
    create_evaluator,
    plan_ps,
    ps_eval,
    ps_eval_many,
)
from .ledger import CostLedger, StageCost
from .params import Backend, ParamSet, rank_params, select_params
from .polynomials import (
    DensePoly,
    build_F_EQ,
    build_F_lift,
    build_F_LT,
    build_G,
    build_interp,
)
from .query import (
    CostReport,
    EncryptedTable,
    PlainTable,
    Predicate,
    QueryPlan,
    ReferenceEngine,
    TableSpec,
    encrypt_table,
    generate_q6_table,
    ingest_csv,
    load_table,
    q6_plan,
    run_query,
)
from .reports import BenchRow, VerifyMode, VerifyReport, bench, verify
from .ring import Residue, RingElem, balanced_rep, base_p_digits
from .space_switch import (
    DigitBundle,
    ExtractionStrategy,
    change_mod_to_p,
    divide_by_p,
    estimate_depth,
    extraction_eval_counts,
    raise_mod,
    reduce_to_digits,
)

__all__ = [
    # Params
    "Backend",
    "BackendMismatchError",
    "BenchRow",
    "BGVCiphertext",
    # Backends
    "BGVEvaluator",
    "CiphertextCodec",
    "CipherHandle",
    "ClearEvaluator",
    # Compare
    "CompareOp",
    "CostLedger",
    # Query
    "CostReport",
    "DecryptionError",
    # Polynomials
    "DensePoly",
    "DigitBundle",
    "EncryptedTable",
    "Evaluator",
    "ExtractionStrategy",
    "InfeasibleParametersError",
    "IngestError",
    "LevelExhaustedError",
    "ModulusMismatchError",
    "ParamSet",
    "PlainTable",
    "Predicate",
    "PredicateResult",
    "QueryPlan",
    "ReferenceEngine",
    "RelinKey",
    # Ring
    "Residue",
    "RingElem",
    "SecretKey",
    # Errors
    "SpaceSwitchError",
    "StageCost",
    "TableSpec",
    "VerifyMode",
    "VerifyReport",
    # Version
    "__version__",
    "balanced_rep",
    "base_p_digits",
    "bench",
    "build_F_EQ",
    "build_F_LT",
    "build_F_lift",
    "build_G",
    "build_interp",
    # Space switching
    "change_mod_to_p",
    "create_evaluator",
    "divide_by_p",
    "encrypt_table",
    "eq",
    "estimate_depth",
    "extraction_eval_counts",
    "ge",
    "generate_q6_table",
    "gt",
    "ingest_csv",
    "keygen",
    "le",
    "load_table",
    "lt",
    "lt_direct_prime",
    "neq",
    "plan_ps",
    "predicate",
    "ps_eval",
    "ps_eval_many",
    "q6_plan",
    "raise_mod",
    "rank_params",
    "reduce_to_digits",
    "run_query",
    "select_params",
    "verify",
]
