import hashlib
import json
import logging
from typing import Dict, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from leo_orbit.doppler import DopplerProfile, LeoPassProfile, doppler_rate
from lora_phy.channel import esn0_from_snr, snr_from_esn0
from lora_phy.estimators import EstimatorKind, recommended_midamble_interval
from lora_phy.modem import payload_symbol_count
from lora_phy.models import FrameLayout, ModemConfig

logger = logging.getLogger(__name__)

# typical uplink payloads of satellite IoT applications, in bytes
APPLICATION_PAYLOAD_BYTES: Dict[str, int] = {
    "ads-b": 32,
    "ais": 21,
    "vehicle": 8,
    "wildlife": 10,
    "wind-turbine": 10,
    "smart-meter": 12,
    "agriculture": 10,
}

# midamble-point spacing per spreading factor at 125 kHz
MIDAMBLE_POINT_N_INT: Dict[int, int] = {7: 12, 8: 12, 9: 8, 10: 4, 11: 2, 12: 1}
MIDAMBLE_LINEAR_N_INT = 6


class ScenarioConfig(BaseModel):
    """One Monte Carlo cell: modem, frame, Doppler, estimator and noise."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    modem: ModemConfig = Field(default_factory=ModemConfig)
    estimator: EstimatorKind = Field(default=EstimatorKind.POINT)
    n_up: int = Field(default=8, ge=0, description="Preamble upchirps")
    n_dw: Optional[int] = Field(
        default=None,
        ge=1,
        description="Preamble downchirps; 6 for slope estimators, otherwise 2",
    )
    n_int: Optional[int] = Field(
        default=None,
        ge=1,
        description="Midamble spacing for midamble estimators; per-SF default",
    )
    auto_midamble_k: Optional[float] = Field(
        default=None,
        gt=0,
        le=0.5,
        description="Derive n_int from the Doppler rate at frame start",
    )
    payload_bits: int = Field(default=120, gt=0, description="Payload size L in bits")
    cr: int = Field(default=1, ge=1, le=4, description="Parity bits per 4 data bits")
    profile: DopplerProfile = Field(default_factory=LeoPassProfile)
    t_start_s: float = Field(
        default=0.0, description="Satellite-pass time at the first frame sample"
    )
    esn0_db: Optional[float] = Field(default=None, description="Chirp Es/N0")
    snr_db: Optional[float] = Field(default=None, description="In-band SNR")
    noiseless: bool = Field(default=False, description="Disable AWGN entirely")
    trials: int = Field(default=100, ge=1, description="Frames per cell")
    master_seed: int = Field(default=0, ge=0, description="Root of all trial seeds")

    @model_validator(mode="before")
    @classmethod
    def _application_payload(cls, data):
        if isinstance(data, dict) and data.get("application") is not None:
            data = dict(data)
            name = data.pop("application")
            if name not in APPLICATION_PAYLOAD_BYTES:
                raise ValueError(
                    f"unknown application {name!r}, choose from "
                    f"{sorted(APPLICATION_PAYLOAD_BYTES)}"
                )
            if data.get("payload_bits") is not None:
                raise ValueError("give either application or payload_bits, not both")
            data["payload_bits"] = 8 * APPLICATION_PAYLOAD_BYTES[name]
        return data

    @model_validator(mode="after")
    def _noise_spec(self):
        given = [v is not None for v in (self.esn0_db, self.snr_db)]
        if self.noiseless and any(given):
            raise ValueError("noiseless scenarios take neither esn0_db nor snr_db")
        if not self.noiseless and sum(given) != 1:
            raise ValueError("exactly one of esn0_db or snr_db is required")
        return self

    @property
    def resolved_n_dw(self) -> int:
        if self.n_dw is not None:
            return self.n_dw
        return 6 if self.estimator.uses_slope else 2

    @property
    def n_data(self) -> int:
        return payload_symbol_count(self.modem, self.payload_bits, self.cr)

    @property
    def resolved_n_int(self) -> int:
        if not self.estimator.uses_midambles:
            return 0
        if self.n_int is not None:
            return self.n_int
        if self.auto_midamble_k is not None:
            xi = doppler_rate(self.profile, self.t_start_s)
            advice = recommended_midamble_interval(
                self.modem, self.auto_midamble_k, xi, self.n_data
            )
            # a zero rate still needs one segment, i.e. no midamble
            return advice.n_int if advice.needed else self.n_data
        if self.estimator is EstimatorKind.MIDAMBLE_LINEAR:
            return MIDAMBLE_LINEAR_N_INT
        return MIDAMBLE_POINT_N_INT[self.modem.sf]

    def layout(self) -> FrameLayout:
        return FrameLayout(
            n_up=self.n_up,
            n_dw=self.resolved_n_dw,
            n_data=self.n_data,
            n_int=self.resolved_n_int,
        )

    @property
    def channel_snr_db(self) -> Optional[float]:
        if self.noiseless:
            return None
        if self.snr_db is not None:
            return self.snr_db
        return snr_from_esn0(self.modem, self.esn0_db)

    @property
    def channel_esn0_db(self) -> Optional[float]:
        if self.noiseless:
            return None
        if self.esn0_db is not None:
            return self.esn0_db
        return esn0_from_snr(self.modem, self.snr_db)

    def cell_key(self) -> str:
        """Digest of everything except trial count and seed."""
        payload = self.model_dump(mode="json", exclude={"trials", "master_seed"})
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def cell_id(self) -> int:
        return int(self.cell_key()[:16], 16)
