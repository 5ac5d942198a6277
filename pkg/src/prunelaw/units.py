"""Unit conventions bridging raw curve counts and law inputs.

Laws are fitted and evaluated with n0 and d rescaled to billions by
default: raw counts near 1e9 raised to fitted exponents overflow or
underflow long before the optimizer converges.  The convention in force is
recorded in every FitResult so parameter values stay interpretable.
"""

from __future__ import annotations

from .errors import ValidationError

UNIT_SCALES = {"billions": 1e9, "raw": 1.0}
DEFAULT_UNITS = "billions"


def resolve_unit_scale(units: str | float) -> float:
    """Map a units name (or explicit positive divisor) to a scale factor."""
    if isinstance(units, str):
        try:
            return UNIT_SCALES[units]
        except KeyError:
            raise ValidationError(
                f"unknown units {units!r}; expected one of "
                f"{sorted(UNIT_SCALES)} or a positive number") from None
    scale = float(units)
    if not scale > 0:
        raise ValidationError("unit scale must be > 0")
    return scale
