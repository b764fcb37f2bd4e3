import logging
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, TypeAdapter
from scipy.integrate import cumulative_trapezoid

from leo_orbit.geometry import (
    EARTH_RADIUS_M,
    SPEED_OF_LIGHT_MS,
    OrbitGeometry,
    OutOfVisibilityError,
    visibility_half_window,
)

logger = logging.getLogger(__name__)

_FROZEN = ConfigDict(frozen=True, extra="forbid")


class ZeroProfile(BaseModel):
    model_config = _FROZEN
    kind: Literal["zero"] = "zero"

    def shift(self, t: np.ndarray) -> np.ndarray:
        return np.zeros_like(t, dtype=float)

    def rate(self, t: np.ndarray) -> np.ndarray:
        return np.zeros_like(t, dtype=float)

    def closed_form_phase(self, t_start: float, tau: np.ndarray) -> np.ndarray:
        return np.zeros_like(tau)


class StaticProfile(BaseModel):
    model_config = _FROZEN
    kind: Literal["static"] = "static"
    f0_hz: float = Field(description="Constant frequency offset")

    def shift(self, t: np.ndarray) -> np.ndarray:
        return np.full_like(t, self.f0_hz, dtype=float)

    def rate(self, t: np.ndarray) -> np.ndarray:
        return np.zeros_like(t, dtype=float)

    def closed_form_phase(self, t_start: float, tau: np.ndarray) -> np.ndarray:
        return 2 * np.pi * self.f0_hz * tau


class LinearRampProfile(BaseModel):
    model_config = _FROZEN
    kind: Literal["linear_ramp"] = "linear_ramp"
    f0_hz: float = Field(description="Offset at the reference time")
    slope_hz_per_s: float = Field(description="Constant Doppler rate")
    t_ref_s: float = Field(default=0.0, description="Time at which the offset is f0")

    def shift(self, t: np.ndarray) -> np.ndarray:
        return self.f0_hz + self.slope_hz_per_s * (np.asarray(t, dtype=float) - self.t_ref_s)

    def rate(self, t: np.ndarray) -> np.ndarray:
        return np.full_like(t, self.slope_hz_per_s, dtype=float)

    def closed_form_phase(self, t_start: float, tau: np.ndarray) -> np.ndarray:
        f_start = self.f0_hz + self.slope_hz_per_s * (t_start - self.t_ref_s)
        return 2 * np.pi * (f_start * tau + 0.5 * self.slope_hz_per_s * tau**2)


class LeoPassProfile(BaseModel):
    """
    Doppler seen by a ground device under an overhead LEO pass.

    The satellite clock has t=0 at zenith; an approaching satellite (t<0)
    gives a positive shift.
    """

    model_config = _FROZEN
    kind: Literal["leo_pass"] = "leo_pass"
    geometry: OrbitGeometry = Field(default_factory=OrbitGeometry)

    def _check_visible(self, t: np.ndarray) -> None:
        half = visibility_half_window(self.geometry)
        worst = float(np.max(np.abs(t))) if np.size(t) else 0.0
        if worst > half * (1 + 1e-9):
            raise OutOfVisibilityError(
                f"t={worst:.3f} s is outside the visibility window of "
                f"+/-{half:.3f} s for h={self.geometry.altitude_m / 1e3:.1f} km"
            )

    def _range_terms(self, t: np.ndarray):
        geom = self.geometry
        t = np.asarray(t, dtype=float)
        self._check_visible(t)
        r = geom.orbital_radius_m
        w = geom.angular_rate_rad_s
        theta = w * t
        d = np.sqrt(
            EARTH_RADIUS_M**2 + r**2 - 2 * EARTH_RADIUS_M * r * np.cos(theta)
        )
        d_dot = EARTH_RADIUS_M * r * w * np.sin(theta) / d
        return theta, d, d_dot

    def shift(self, t: np.ndarray) -> np.ndarray:
        _, _, d_dot = self._range_terms(t)
        return -d_dot / SPEED_OF_LIGHT_MS * self.geometry.carrier_hz

    def rate(self, t: np.ndarray) -> np.ndarray:
        theta, d, d_dot = self._range_terms(t)
        geom = self.geometry
        w = geom.angular_rate_rad_s
        d_ddot = (
            EARTH_RADIUS_M * geom.orbital_radius_m * w**2 * np.cos(theta) - d_dot**2
        ) / d
        return -d_ddot / SPEED_OF_LIGHT_MS * geom.carrier_hz

    def closed_form_phase(self, t_start: float, tau: np.ndarray):
        return None


DopplerProfile = Annotated[
    Union[ZeroProfile, StaticProfile, LinearRampProfile, LeoPassProfile],
    Field(discriminator="kind"),
]
_PROFILE_ADAPTER = TypeAdapter(DopplerProfile)


def parse_profile(data) -> DopplerProfile:
    """Build a profile from a mapping such as {"kind": "static", "f0_hz": 1e3}."""
    return _PROFILE_ADAPTER.validate_python(data)


def _evaluate(fn, t):
    values = fn(np.asarray(t, dtype=float))
    if np.ndim(t) == 0:
        return float(values)
    return values


def doppler_shift(profile: DopplerProfile, t):
    """Frequency offset in Hz at time(s) t on the satellite-pass clock."""
    return _evaluate(profile.shift, t)


def doppler_rate(profile: DopplerProfile, t):
    """Analytic time derivative of `doppler_shift` in Hz/s."""
    return _evaluate(profile.rate, t)


def phase_from_profile(
    profile: DopplerProfile,
    t_start: float,
    n_samples: int,
    f_s: float,
    numeric: bool = False,
) -> np.ndarray:
    """
    Cumulative Doppler phase 2*pi*integral(F_D) from t_start, one value per
    sample, with phase[0] = 0.

    Zero, static and ramp profiles use their closed form unless `numeric` is
    set; the LEO pass is always integrated with the trapezoidal rule.
    """
    if n_samples < 0:
        raise ValueError(f"n_samples must be non-negative, got {n_samples}")
    if f_s <= 0:
        raise ValueError(f"f_s must be positive, got {f_s}")
    tau = np.arange(n_samples) / f_s
    if not numeric:
        closed = profile.closed_form_phase(t_start, tau)
        if closed is not None:
            return closed
    if n_samples == 0:
        return tau
    freqs = profile.shift(t_start + tau)
    return 2 * np.pi * cumulative_trapezoid(freqs, dx=1 / f_s, initial=0.0)


def frame_doppler_drift(profile: DopplerProfile, t_start: float, duration_s: float) -> float:
    """Change of the Doppler shift across a frame that starts at t_start."""
    return doppler_shift(profile, t_start + duration_s) - doppler_shift(profile, t_start)
