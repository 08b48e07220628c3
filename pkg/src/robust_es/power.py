"""Power and sample size for Wald tests expressed through the robust index.

power = 1 - Phi_df(Phi_df^{-1}(1 - alpha; 0); n * S^2)

The relation holds for any estimating-equation model, so none of these
functions take a model argument.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .distributions import (
    ChiSqParams,
    noncentral_chisq_quantile,
    noncentral_chisq_sf,
    solve_noncentrality,
)
from .errors import DomainError, InfeasibleError

__all__ = [
    "PowerSpec",
    "power_from",
    "solve_sample_size",
    "solve_effect_size",
    "solve_alpha",
    "solve",
    "power_curve",
    "CURVE_HEADER",
]

CURVE_HEADER = ("n", "s", "df", "alpha", "power")


def _check_alpha(alpha):
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")
    return alpha


def _check_df(df):
    if int(df) != df or df < 1:
        raise DomainError(f"df must be a positive integer, got {df!r}")
    return int(df)


def critical_value(df: int, alpha: float) -> float:
    return noncentral_chisq_quantile(1.0 - _check_alpha(alpha), ChiSqParams(_check_df(df), 0.0))


def power_from(n: float, s: float, df: int, alpha: float) -> float:
    """Power of the level-``alpha`` test with ``df`` degrees of freedom."""
    if not (math.isfinite(n) and n >= 1):
        raise DomainError(f"n must be >= 1, got {n!r}")
    if not (math.isfinite(s) and s >= 0):
        raise DomainError(f"S must be non-negative, got {s!r}")
    df = _check_df(df)
    crit = critical_value(df, alpha)
    return noncentral_chisq_sf(crit, ChiSqParams(df, n * s * s))


def solve_sample_size(power: float, s: float, df: int, alpha: float) -> int:
    """Smallest integer n whose power reaches ``power``."""
    if not s > 0:
        raise InfeasibleError("S must be positive to reach power above alpha")
    lam = solve_noncentrality(power, _check_df(df), _check_alpha(alpha))
    n = max(1, math.ceil(lam / (s * s)))
    while power_from(n, s, df, alpha) < power:
        n += 1
    while n > 1 and power_from(n - 1, s, df, alpha) >= power:
        n -= 1
    return n


def solve_effect_size(power: float, n: float, df: int, alpha: float) -> float:
    """Smallest S at which ``n`` observations reach ``power``."""
    if not (math.isfinite(n) and n >= 1):
        raise DomainError(f"n must be >= 1, got {n!r}")
    lam = solve_noncentrality(power, _check_df(df), _check_alpha(alpha))
    return math.sqrt(lam / n)


def solve_alpha(power: float, n: float, s: float, df: int, tol: float = 1e-12) -> float:
    """Type-I error rate at which the test reaches ``power``.

    Power increases strictly with alpha, from 0 at alpha -> 0 to 1 at
    alpha -> 1, so the root is found by bisection on (0, 1).
    """
    power = float(power)
    if not 0.0 < power < 1.0:
        raise DomainError(f"power must lie in (0, 1), got {power!r}")
    if s == 0:
        return power
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        pw = power_from(n, s, df, mid)
        if abs(pw - power) <= tol:
            return mid
        if pw < power:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class PowerSpec:
    """Inputs of a power calculation; exactly one field is ``None``."""

    n: float | None = None
    s: float | None = None
    df: int = 1
    alpha: float | None = 0.05
    power: float | None = None

    def unknown(self) -> str:
        missing = [k for k in ("n", "s", "alpha", "power") if getattr(self, k) is None]
        if len(missing) != 1:
            raise DomainError(
                f"exactly one of n, s, alpha, power must be unknown, got {missing or 'none'}"
            )
        return missing[0]


def solve(spec: PowerSpec) -> PowerSpec:
    """Fill in the single unknown of ``spec``."""
    which = spec.unknown()
    if which == "power":
        val = power_from(spec.n, spec.s, spec.df, spec.alpha)
    elif which == "n":
        val = solve_sample_size(spec.power, spec.s, spec.df, spec.alpha)
    elif which == "s":
        val = solve_effect_size(spec.power, spec.n, spec.df, spec.alpha)
    else:
        val = solve_alpha(spec.power, spec.n, spec.s, spec.df)
    fields = {k: getattr(spec, k) for k in ("n", "s", "df", "alpha", "power")}
    fields[which] = val
    return PowerSpec(**fields)


def power_curve(s_values, df_values, alpha: float, n_range) -> list[tuple]:
    """Rows ``(n, s, df, alpha, power)`` over the cartesian grid."""
    alpha = _check_alpha(alpha)
    rows = []
    for df in df_values:
        df = _check_df(df)
        crit = critical_value(df, alpha)
        for s in s_values:
            s = float(s)
            for n in n_range:
                pw = noncentral_chisq_sf(crit, ChiSqParams(df, n * s * s))
                rows.append((int(n), s, df, alpha, pw))
    return rows
