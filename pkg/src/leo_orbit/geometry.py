import math

from pydantic import BaseModel, ConfigDict, Field

EARTH_RADIUS_M = 6_371_000.0
MU_M3S2 = 3.986004418e14
SPEED_OF_LIGHT_MS = 299_792_458.0

# satellite-pass clock instants used by the position sweeps, zenith at t=0
SATELLITE_POSITIONS_S = (-366.0, -274.5, -183.0, -91.5, 0.0)
CASE_1_T_START_S = -366.0
CASE_2_T_START_S = 0.0


class OutOfVisibilityError(ValueError):
    """Raised when a pass is evaluated below the ground device's horizon."""


class OrbitGeometry(BaseModel):
    """
    Circular orbit passing directly over a static ground device on a
    non-rotating Earth.

    Only the altitude and carrier are configurable. Earth radius, the
    gravitational parameter and the speed of light are fixed module constants.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    altitude_m: float = Field(
        default=550e3, gt=0, description="Orbital height above the surface"
    )
    carrier_hz: float = Field(
        default=868e6, gt=0, description="Transmitted carrier frequency F_C"
    )

    @property
    def earth_radius_m(self) -> float:
        return EARTH_RADIUS_M

    @property
    def mu_m3s2(self) -> float:
        return MU_M3S2

    @property
    def speed_of_light_ms(self) -> float:
        return SPEED_OF_LIGHT_MS

    @property
    def orbital_radius_m(self) -> float:
        return EARTH_RADIUS_M + self.altitude_m

    @property
    def orbital_speed_ms(self) -> float:
        return math.sqrt(MU_M3S2 / self.orbital_radius_m)

    @property
    def angular_rate_rad_s(self) -> float:
        return self.orbital_speed_ms / self.orbital_radius_m

    @property
    def central_angle_rad(self) -> float:
        """Earth-centred angle between zenith and 0 degree elevation."""
        return math.acos(EARTH_RADIUS_M / self.orbital_radius_m)

    @property
    def zenith_doppler_rate_hz_per_s(self) -> float:
        # radial acceleration at closest approach is R_E * r * w^2 / h
        accel = (
            EARTH_RADIUS_M
            * self.orbital_radius_m
            * self.angular_rate_rad_s**2
            / self.altitude_m
        )
        return -accel / SPEED_OF_LIGHT_MS * self.carrier_hz

    @property
    def straight_line_zenith_rate_hz_per_s(self) -> float:
        """Zenith rate of a flat ground track, v^2/h, ignoring Earth's curvature."""
        accel = self.orbital_speed_ms**2 / self.altitude_m
        return -accel / SPEED_OF_LIGHT_MS * self.carrier_hz


def visibility_half_window(geom: OrbitGeometry) -> float:
    """Seconds from zenith to 0 degree elevation."""
    return geom.central_angle_rad / geom.angular_rate_rad_s
