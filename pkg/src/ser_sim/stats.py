import math
from typing import Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy import integrate, special, stats

# the alternating closed form loses all precision beyond this alphabet size
_ALTERNATING_SUM_MAX_M = 16
WILSON_Z = float(stats.norm.ppf(0.975))


def wilson_interval(errors: int, total: int, z: float = WILSON_Z) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion (95% by default)."""
    if total <= 0:
        raise ValueError(f"total must be positive, got {total}")
    if not 0 <= errors <= total:
        raise ValueError(f"errors must lie in [0, {total}], got {errors}")
    p = errors / total
    z2 = z * z
    centre = (p + z2 / (2 * total)) / (1 + z2 / total)
    half = z * math.sqrt(p * (1 - p) / total + z2 / (4 * total**2)) / (1 + z2 / total)
    # at p = 0 or 1 the bound equals p analytically; rounding must not cross it
    lo = 0.0 if errors == 0 else min(max(centre - half, 0.0), p)
    hi = 1.0 if errors == total else max(min(centre + half, 1.0), p)
    return lo, hi


class SerPoint(BaseModel):
    """Symbol error count of one grid cell with its 95% Wilson interval."""

    errors: int = Field(ge=0)
    total: int = Field(gt=0)
    ser: float = Field(ge=0, le=1)
    ci_lo: float
    ci_hi: float
    wall_time_s: float = 0.0

    @model_validator(mode="after")
    def _consistent(self):
        if not math.isclose(self.ser, self.errors / self.total, rel_tol=1e-12, abs_tol=0):
            raise ValueError(f"ser {self.ser} != {self.errors}/{self.total}")
        if not self.ci_lo <= self.ser <= self.ci_hi:
            raise ValueError("interval does not bracket ser")
        return self

    @classmethod
    def from_counts(cls, errors: int, total: int, wall_time_s: float = 0.0) -> "SerPoint":
        ci_lo, ci_hi = wilson_interval(errors, total)
        return cls(
            errors=errors,
            total=total,
            ser=errors / total,
            ci_lo=ci_lo,
            ci_hi=ci_hi,
            wall_time_s=wall_time_s,
        )


def binomial_band(p: float, total: int, n_sigma: float = 3.0) -> Tuple[float, float]:
    """Error-count band of `n_sigma` binomial standard deviations around p."""
    mean = p * total
    sigma = math.sqrt(total * p * (1 - p))
    return mean - n_sigma * sigma, mean + n_sigma * sigma


def _alternating_sum(m: int, esn0: float) -> float:
    terms = [
        (-1) ** (k + 1) * math.comb(m - 1, k) / (k + 1) * math.exp(-k / (k + 1) * esn0)
        for k in range(1, m)
    ]
    return max(math.fsum(terms), 0.0)


def _rician_integral(m: int, esn0: float) -> float:
    # unit-variance noise per dimension, so the signal envelope is Rice(a, 1)
    a = math.sqrt(2 * esn0)

    def integrand(x):
        rice_pdf = x * math.exp(-0.5 * (x - a) ** 2) * special.i0e(a * x)
        all_below = (m - 1) * math.log1p(-math.exp(-0.5 * x * x)) if x > 0 else -math.inf
        return rice_pdf * -math.expm1(all_below)

    value, _ = integrate.quad(
        integrand,
        0.0,
        a + 40.0,
        points=[a] if a > 0 else None,
        limit=400,
        epsabs=1e-16,
        epsrel=1e-10,
    )
    return min(max(value, 0.0), 1.0)


def awgn_ser_oracle(m: int, esn0_linear: float) -> float:
    """
    Symbol error probability of noncoherent M-ary orthogonal detection in
    AWGN, which FFT demodulation of LoRa chirps realizes.

    Small alphabets use the alternating closed form with exact binomials;
    larger ones integrate the equivalent Rician expression, which stays
    accurate where the alternating sum cancels catastrophically.
    """
    if m < 2:
        raise ValueError(f"alphabet size must be at least 2, got {m}")
    if esn0_linear < 0:
        raise ValueError(f"Es/N0 must be non-negative, got {esn0_linear}")
    if math.isinf(esn0_linear):
        return 0.0
    if m <= _ALTERNATING_SUM_MAX_M:
        return _alternating_sum(m, esn0_linear)
    return _rician_integral(m, esn0_linear)


def db_to_linear(value_db):
    return np.power(10.0, np.asarray(value_db) / 10)
