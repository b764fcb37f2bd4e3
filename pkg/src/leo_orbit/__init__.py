from leo_orbit.doppler import (
    DopplerProfile,
    LeoPassProfile,
    LinearRampProfile,
    StaticProfile,
    ZeroProfile,
    doppler_rate,
    doppler_shift,
    frame_doppler_drift,
    parse_profile,
    phase_from_profile,
)
from leo_orbit.geometry import (
    CASE_1_T_START_S,
    CASE_2_T_START_S,
    SATELLITE_POSITIONS_S,
    OrbitGeometry,
    OutOfVisibilityError,
    visibility_half_window,
)
