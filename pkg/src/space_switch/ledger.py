"""
Cost metering for homomorphic programs.

A CostLedger counts non-scalar (ciphertext x ciphertext) multiplications,
scalar multiplications, additions, polynomial evaluations and the deepest
multiplication chain observed. Every count lands in the currently active
stage, so stage sums always equal the totals.

Example:
    >>> ledger = CostLedger()
    >>> with ledger.stage("reduction"):
    ...     ledger.record_mul(depth=1)
    >>> ledger.nonscalar_mults, ledger.stages["reduction"].nonscalar_mults
    (1, 1)
"""

import json
import threading
from collections import Counter
from collections.abc import Iterator
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Any

DEFAULT_STAGE = "main"

# Stage names used by the comparison and query pipelines.
PIPELINE_STAGES = ("reduction", "digit-compare", "aggregation", "raise", "arithmetic")


@dataclass
class StageCost:
    """
    Counters for one stage (or for a whole ledger).

    Attributes:
        nonscalar_mults: Ciphertext-ciphertext multiplications
        scalar_mults: Multiplications by a plaintext constant
        additions: Additions and subtractions of any kind
        max_depth: Deepest multiplication chain of any value produced
        evaluations: Polynomial evaluations keyed by polynomial name
        shared_savings: Multiplications avoided by sharing power ladders
    """

    nonscalar_mults: int = 0
    scalar_mults: int = 0
    additions: int = 0
    max_depth: int = 0
    evaluations: Counter[str] = field(default_factory=Counter[str])
    shared_savings: int = 0

    def copy(self) -> "StageCost":
        return StageCost(
            self.nonscalar_mults,
            self.scalar_mults,
            self.additions,
            self.max_depth,
            Counter(self.evaluations),
            self.shared_savings,
        )

    def merge(self, other: "StageCost") -> None:
        self.nonscalar_mults += other.nonscalar_mults
        self.scalar_mults += other.scalar_mults
        self.additions += other.additions
        self.max_depth = max(self.max_depth, other.max_depth)
        self.evaluations.update(other.evaluations)
        self.shared_savings += other.shared_savings

    def __sub__(self, other: "StageCost") -> "StageCost":
        """Counter differences; max_depth keeps the later value."""
        evaluations = Counter(self.evaluations)
        evaluations.subtract(other.evaluations)
        return StageCost(
            self.nonscalar_mults - other.nonscalar_mults,
            self.scalar_mults - other.scalar_mults,
            self.additions - other.additions,
            self.max_depth,
            +evaluations,
            self.shared_savings - other.shared_savings,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "nonscalar": self.nonscalar_mults,
            "scalar": self.scalar_mults,
            "additions": self.additions,
            "depth": self.max_depth,
            "evaluations": dict(sorted(self.evaluations.items())),
            "shared_savings": self.shared_savings,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "StageCost":
        return cls(
            int(data.get("nonscalar", 0)),
            int(data.get("scalar", 0)),
            int(data.get("additions", 0)),
            int(data.get("depth", 0)),
            Counter({str(k): int(v) for k, v in data.get("evaluations", {}).items()}),
            int(data.get("shared_savings", 0)),
        )


class CostLedger:
    """
    Thread-safe, monotone cost counters split by stage.

    Stages nest: entering a stage while another is active charges the inner
    one until it exits. Counts recorded outside any stage go to "main".
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._stages: dict[str, StageCost] = {}
        self._local = threading.local()

    def _stack(self) -> list[str]:
        stack: list[str] | None = getattr(self._local, "stack", None)
        if stack is None:
            stack = []
            self._local.stack = stack
        return stack

    @property
    def current_stage(self) -> str:
        stack = self._stack()
        return stack[-1] if stack else DEFAULT_STAGE

    @contextmanager
    def stage(self, name: str) -> Iterator["CostLedger"]:
        """Charge everything recorded inside the block to stage `name`."""
        stack = self._stack()
        stack.append(name)
        with self._lock:
            self._stages.setdefault(name, StageCost())
        try:
            yield self
        finally:
            stack.pop()

    def _bucket(self) -> StageCost:
        return self._stages.setdefault(self.current_stage, StageCost())

    def record_mul(self, depth: int) -> None:
        """One non-scalar multiplication producing a value of the given depth."""
        with self._lock:
            bucket = self._bucket()
            bucket.nonscalar_mults += 1
            bucket.max_depth = max(bucket.max_depth, depth)

    def record_scalar(self) -> None:
        with self._lock:
            self._bucket().scalar_mults += 1

    def record_add(self) -> None:
        with self._lock:
            self._bucket().additions += 1

    def record_evaluation(self, name: str) -> None:
        with self._lock:
            self._bucket().evaluations[name] += 1

    def record_savings(self, mults: int) -> None:
        if mults <= 0:
            return
        with self._lock:
            self._bucket().shared_savings += mults

    @property
    def stages(self) -> dict[str, StageCost]:
        """Copies of the per-stage counters."""
        with self._lock:
            return {name: cost.copy() for name, cost in self._stages.items()}

    def snapshot(self) -> StageCost:
        """Totals across every stage."""
        total = StageCost()
        for cost in self.stages.values():
            total.merge(cost)
        return total

    @property
    def nonscalar_mults(self) -> int:
        return self.snapshot().nonscalar_mults

    @property
    def scalar_mults(self) -> int:
        return self.snapshot().scalar_mults

    @property
    def additions(self) -> int:
        return self.snapshot().additions

    @property
    def max_depth_consumed(self) -> int:
        return self.snapshot().max_depth

    @property
    def evaluations(self) -> Counter[str]:
        return self.snapshot().evaluations

    def reset(self) -> None:
        with self._lock:
            self._stages.clear()

    def to_dict(self) -> dict[str, Any]:
        data = self.snapshot().to_dict()
        data["stages"] = {name: cost.to_dict() for name, cost in self.stages.items()}
        return data

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)
