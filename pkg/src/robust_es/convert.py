"""Conversions between d, f^2, R^2 and S, effect-size classes and bias ratios.

All conversions assume homoskedasticity. They route through ``S^2``:

==========  ==============================  ==============================
kind        to S^2                          from S^2
==========  ==============================  ==============================
``d``       d^2 / (1/pi1 + 1/pi0)           S * sqrt(1/pi1 + 1/pi0)
``f2``      f2                              S^2
``r2``      R2_b / (1 - R2)                 S^2 / (1 + S^2)
``s``       S^2                             S
==========  ==============================  ==============================

``R2`` without subscript is the whole-model value. When it is not supplied
the model is taken to have a single target variable, so ``R2 = R2_b``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InfiniteEffectError

__all__ = [
    "KINDS",
    "ConversionContext",
    "convert",
    "classify_effect",
    "cohens_d_bias_ratio",
    "r2_bias_ratio",
    "cohens_d_bias_grid",
    "r2_bias_grid",
]

KINDS = ("d", "f2", "r2", "s")

# (upper bound inclusive, label)
EFFECT_CLASSES = (
    (0.1, "none-small"),
    (0.25, "small-medium"),
    (0.4, "medium-large"),
    (math.inf, "large"),
)


@dataclass(frozen=True)
class ConversionContext:
    pi1: float = 0.5
    r2_full: float | None = None

    def __post_init__(self):
        if not 0.0 < self.pi1 < 1.0:
            raise DomainError(f"pi1 must lie in (0, 1), got {self.pi1!r}")
        if self.r2_full is not None and not 0.0 <= self.r2_full < 1.0:
            if self.r2_full == 1.0:
                raise InfiniteEffectError("whole-model R^2 of 1 implies an infinite effect")
            raise DomainError(f"whole-model R^2 must lie in [0, 1), got {self.r2_full!r}")

    @property
    def pi0(self) -> float:
        return 1.0 - self.pi1

    @property
    def design_factor(self) -> float:
        """``1/pi1 + 1/pi0``."""
        return 1.0 / self.pi1 + 1.0 / self.pi0


def _to_s_sq(value, kind, ctx):
    if kind == "d":
        return value * value / ctx.design_factor
    if kind == "f2":
        if value < 0:
            raise DomainError(f"f^2 must be non-negative, got {value!r}")
        return value
    if kind == "r2":
        if value == 1.0:
            raise InfiniteEffectError("R^2 of 1 implies an infinite effect")
        if not 0.0 <= value < 1.0:
            raise DomainError(f"R^2 must lie in [0, 1), got {value!r}")
        if ctx.r2_full is None:
            return value / (1.0 - value)
        if value > ctx.r2_full:
            raise DomainError("partial R^2 cannot exceed the whole-model R^2")
        return value / (1.0 - ctx.r2_full)
    if kind == "s":
        if value < 0:
            raise DomainError(f"S must be non-negative, got {value!r}")
        return value * value
    raise DomainError(f"unknown effect-size kind {kind!r}; expected one of {KINDS}")


def _from_s_sq(s_sq, kind, ctx):
    if kind == "d":
        return math.sqrt(s_sq * ctx.design_factor)
    if kind == "f2":
        return s_sq
    if kind == "r2":
        if ctx.r2_full is None:
            return s_sq / (1.0 + s_sq)
        return s_sq * (1.0 - ctx.r2_full)
    if kind == "s":
        return math.sqrt(s_sq)
    raise DomainError(f"unknown effect-size kind {kind!r}; expected one of {KINDS}")


def convert(value: float, from_kind: str, to_kind: str, ctx: ConversionContext | None = None) -> float:
    """Convert an effect size between ``d``, ``f2``, ``r2`` and ``s``.

    The sign of ``d`` is dropped. Converting a kind to itself returns the
    input unchanged (``|d|`` for ``d``).

    >>> convert(0.8, "d", "s")
    0.4
    """
    value = float(value)
    if not math.isfinite(value):
        raise DomainError(f"value must be finite, got {value!r}")
    for k in (from_kind, to_kind):
        if k not in KINDS:
            raise DomainError(f"unknown effect-size kind {k!r}; expected one of {KINDS}")
    ctx = ctx or ConversionContext()
    if from_kind == to_kind:
        _to_s_sq(value, from_kind, ctx)
        return abs(value) if from_kind == "d" else value
    # single-step cells that avoid a square/sqrt round trip
    if from_kind == "d" and to_kind == "s":
        return abs(value) / math.sqrt(ctx.design_factor)
    if from_kind == "s" and to_kind == "d":
        _to_s_sq(value, "s", ctx)
        return math.sqrt(ctx.design_factor) * value
    return _from_s_sq(_to_s_sq(value, from_kind, ctx), to_kind, ctx)


def classify_effect(s: float) -> str:
    """Map S onto Cohen's qualitative bands (upper bounds inclusive)."""
    if not s >= 0:
        raise DomainError(f"S must be non-negative, got {s!r}")
    for upper, label in EFFECT_CLASSES:
        if s <= upper:
            return label
    return EFFECT_CLASSES[-1][1]


def cohens_d_bias_ratio(var1: float, var0: float, pi1: float) -> float:
    """Limit of pooled-variance Cohen's d divided by the robust d.

    Equals one whenever ``pi1 == 1/2`` or ``var1 == var0``.
    """
    if not (var1 > 0 and var0 > 0):
        raise DomainError("variances must be positive")
    if not 0.0 < pi1 < 1.0:
        raise DomainError(f"pi1 must lie in (0, 1), got {pi1!r}")
    pi0 = 1.0 - pi1
    scale = (1.0 / pi1 + 1.0 / pi0) ** -0.5
    return float(scale) * math.sqrt((var1 / pi1 + var0 / pi0) / (pi1 * var1 + pi0 * var0))


def r2_bias_ratio(beta: float, sigma_x_sq: float, sigma_y_sq: float, sigma_xy_sq: float) -> float:
    """Limit of classical R^2 divided by the robust R^2 for simple regression."""
    if not (sigma_x_sq > 0 and sigma_y_sq > 0 and sigma_xy_sq > 0):
        raise DomainError("variance inputs must be positive")
    b2 = sigma_x_sq**2 * beta**2
    return float((b2 + sigma_x_sq * sigma_y_sq) / (b2 + sigma_xy_sq))


def cohens_d_bias_grid(log2_ratios, pi1_values):
    """Rows ``(log2_var_ratio, pi1, ratio)`` over a grid; var0 is fixed at 1."""
    rows = []
    for v in log2_ratios:
        for p in pi1_values:
            rows.append((float(v), float(p), cohens_d_bias_ratio(2.0**v, 1.0, p)))
    return rows


def r2_bias_grid(log2_ratios, betas, sigma_x_sq=1.0, sigma_y_sq=1.0):
    """Rows ``(log2_ratio, beta, ratio)`` with ``sigma_xy_sq = 2**v * sigma_x_sq * sigma_y_sq``."""
    rows = []
    for v in np.asarray(log2_ratios, dtype=float):
        for b in np.asarray(betas, dtype=float):
            sxy = 2.0**v * sigma_x_sq * sigma_y_sq
            rows.append((float(v), float(b), r2_bias_ratio(b, sigma_x_sq, sigma_y_sq, sxy)))
    return rows
