"""Deterministic three-field state-tracking rule.

The update is evaluated in decimal arithmetic on the shortest repr of each
float, so results are bit-stable and the "decimal portion" tests see the
number a person would read off the state (``68.5`` rather than
``68.49999999999999``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Context, Decimal, localcontext

PARITIES = ("A", "B")
LEVEL_MIN = 1
LEVEL_MAX = 9

_HALF = Decimal("0.5")
_CENT = Decimal("0.01")
# wide enough that sums of any two finite doubles are exact
_EXACT = Context(prec=1200, Emin=-2000, Emax=2000)


@dataclass(frozen=True)
class TaskState:
    value: float
    parity: str
    level: int

    def __post_init__(self):
        if self.parity not in PARITIES:
            raise ValueError(f"parity must be 'A' or 'B', got {self.parity!r}")
        if isinstance(self.level, bool) or int(self.level) != self.level:
            raise ValueError(f"level must be an integer, got {self.level!r}")
        if not LEVEL_MIN <= self.level <= LEVEL_MAX:
            raise ValueError(f"level must lie in [1, 9], got {self.level}")
        if not math.isfinite(self.value):
            raise ValueError(f"value must be finite, got {self.value}")
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "level", int(self.level))

    def to_dict(self) -> dict:
        return {"Value": self.value, "Parity": self.parity, "Level": self.level}

    @classmethod
    def from_dict(cls, d: dict) -> "TaskState":
        return cls(value=float(d["Value"]), parity=str(d["Parity"]), level=int(d["Level"]))

    def with_value(self, value: float) -> "TaskState":
        return TaskState(value, self.parity, self.level)


DEFAULT_INITIAL = TaskState(50.0, "A", 3)


def _dec(x: float) -> Decimal:
    return Decimal(repr(float(x)))


def round2(x: Decimal) -> Decimal:
    """Round to two decimals, halves away from zero."""
    return x.quantize(_CENT, rounding=ROUND_HALF_UP)


def raw_value(value: float, parity: str, level: int) -> Decimal:
    """Rule 1: the unrounded ``V_raw``."""
    v = _dec(value)
    if parity == "A":
        return v * Decimal("1.25") + level * 2
    return v * Decimal("0.75") - level * 2


def fractional_part(x: Decimal) -> Decimal:
    # magnitude of x - trunc(x); keeps the three Rule 2 branches exhaustive for negatives
    return abs(x - x.to_integral_value(rounding="ROUND_DOWN"))


def new_value(v_raw: Decimal) -> Decimal:
    """Rule 2, value part."""
    frac = fractional_part(v_raw)
    if frac >= _HALF:
        return round2(v_raw + Decimal("1.5"))
    if frac > 0:
        return round2(v_raw - _HALF)
    return round2(v_raw * Decimal("1.1"))


def new_parity(v_new: float) -> str:
    """Rule 2, parity part."""
    return "A" if v_new < 70 else "B"


def new_level(level: int, v_new: float, p_new: str) -> int:
    """Rule 3."""
    if p_new == "B" and 60 <= v_new <= 90:
        return max(LEVEL_MIN, level - 1)
    if v_new < 60:
        if level >= 4:
            return max(LEVEL_MIN, level - 1)
        return max(LEVEL_MIN, level - 2)
    return min(LEVEL_MAX, level + 2)


def tau(s: TaskState) -> TaskState:
    """Apply Rules 1-3 in order and return the next state."""
    with localcontext(_EXACT):
        v_new = float(new_value(raw_value(s.value, s.parity, s.level)))
    p_new = new_parity(v_new)
    return TaskState(v_new, p_new, new_level(s.level, v_new, p_new))


def trajectory(s0: TaskState, steps: int) -> list[TaskState]:
    """Return ``[s0, tau(s0), ..., tau^steps(s0)]``."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    out = [s0]
    for _ in range(steps):
        out.append(tau(out[-1]))
    return out
