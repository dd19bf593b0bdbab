"""Machine-readable run reports."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, is_dataclass
from fractions import Fraction
from typing import Any, Optional


def _plain(x: Any) -> Any:
    """Convert results into JSON-safe values (sets sorted, fractions as floats)."""
    if is_dataclass(x) and not isinstance(x, type):
        if hasattr(x, "to_dict"):
            return _plain(x.to_dict())
        return _plain(asdict(x))
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, (set, frozenset)):
        return sorted(_plain(v) for v in x)
    if isinstance(x, Fraction):
        return int(x) if x.denominator == 1 else float(x)
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if hasattr(x, "item") and callable(x.item):
        return x.item()
    return x


@dataclass
class RunReport:
    algorithm: str
    input: dict
    config: dict
    result: Any
    oracle: Optional[Any] = None
    metrics: Optional[dict] = None
    diagnostics: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    success: bool = True

    def to_dict(self) -> dict:
        return _plain(dict(algorithm=self.algorithm, input=self.input, config=self.config,
                           result=self.result, oracle=self.oracle, metrics=self.metrics,
                           diagnostics=self.diagnostics, warnings=self.warnings,
                           success=self.success))

    def to_json(self, indent: Optional[int] = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=False)

    @classmethod
    def from_dict(cls, d: dict) -> "RunReport":
        return cls(**d)

    def summary(self) -> str:
        head = f"{self.algorithm}: result={_short(self.result)}"
        if self.oracle is not None:
            head += f" oracle={_short(self.oracle)}"
        if self.metrics:
            head += (f" rounds={self.metrics.get('rounds')}"
                     f" total_words={self.metrics.get('total_words')}"
                     f" peak_machine={self.metrics.get('peak_machine_words')}")
        head += " ok" if self.success else " FAILED"
        lines = [head] + [f"  warning: {w}" for w in self.warnings]
        return "\n".join(lines)


def _short(x: Any) -> str:
    if isinstance(x, float):
        return f"{x:.6g}"
    if isinstance(x, dict):
        return json.dumps(_plain(x), sort_keys=True)[:200]
    return str(x)
