import math
from enum import Enum
from typing import List

import numpy as np
from pydantic import (
    BaseModel,
    ConfigDict,
    Field,
    computed_field,
    field_validator,
)

SF_MIN = 7
SF_MAX = 12


class ChirpKind(str, Enum):
    """Sweep direction of a received chirp."""

    UP = "up"
    DOWN = "down"


class ModemConfig(BaseModel):
    """LoRa modem parameters and the constants derived from them."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    sf: int = Field(default=10, ge=SF_MIN, le=SF_MAX, description="Spreading factor")
    bandwidth_hz: float = Field(default=125e3, gt=0, description="Chirp bandwidth B")
    ldro: bool = Field(
        default=False, description="Low data rate optimization (2 fewer bits/symbol)"
    )
    oversampling: int = Field(
        default=1, ge=1, le=16, description="Samples per chip (OSF)"
    )

    @property
    def chips(self) -> int:
        """Chips per chirp, 2^sf, regardless of LDRO."""
        return 1 << self.sf

    @property
    def slot_spacing(self) -> int:
        """FFT bins between adjacent symbols."""
        return 4 if self.ldro else 1

    @property
    def alphabet_size(self) -> int:
        return self.chips // self.slot_spacing

    @property
    def bits_per_symbol(self) -> int:
        return self.sf - 2 if self.ldro else self.sf

    @property
    def chirp_samples(self) -> int:
        return self.oversampling * self.chips

    @property
    def sample_rate_hz(self) -> float:
        return self.oversampling * self.bandwidth_hz

    @property
    def chirp_duration_s(self) -> float:
        return self.chips / self.bandwidth_hz

    @property
    def symbol_rate_hz(self) -> float:
        return self.bandwidth_hz / self.chips

    @property
    def fft_resolution_hz(self) -> float:
        """Frequency spacing of the receiver's FFT bins."""
        return self.bandwidth_hz / self.chips

    @property
    def bin_width_hz(self) -> float:
        return self.bandwidth_hz / self.alphabet_size

    @property
    def tolerance_hz(self) -> float:
        """Largest residual offset that still leaves the decision unchanged."""
        return 0.5 * self.bin_width_hz


class FrameLayout(BaseModel):
    """
    Chirp counts of one frame.

    Midambles (pure upchirps) separate groups of `n_int` data chirps, so the
    first payload chirp is always data and no midamble trails the last group.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    n_up: int = Field(default=8, ge=0, description="Preamble upchirps")
    n_dw: int = Field(default=2, ge=0, description="Preamble downchirps")
    n_data: int = Field(default=0, ge=0, description="Payload data chirps")
    n_int: int = Field(
        default=0, ge=0, description="Data chirps between midambles (0 = none)"
    )

    @computed_field
    @property
    def n_midambles(self) -> int:
        if self.n_int == 0 or self.n_data == 0:
            return 0
        return math.ceil(self.n_data / self.n_int) - 1

    @computed_field
    @property
    def n_sym(self) -> int:
        return self.n_data + self.n_midambles

    @computed_field
    @property
    def midamble_positions(self) -> List[int]:
        return [k * (self.n_int + 1) - 1 for k in range(1, self.n_midambles + 1)]

    @property
    def data_positions(self) -> List[int]:
        midambles = set(self.midamble_positions)
        return [i for i in range(self.n_sym) if i not in midambles]

    @property
    def total_chirps(self) -> int:
        return self.n_up + self.n_dw + self.n_sym

    @property
    def payload_offset(self) -> int:
        """Index of the first payload chirp within the frame."""
        return self.n_up + self.n_dw


class BasebandSignal(BaseModel):
    """Uniformly sampled complex envelope on the satellite-pass clock."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    samples: np.ndarray
    sample_rate_hz: float = Field(gt=0)
    t0_s: float = Field(default=0.0, description="Absolute time of the first sample")

    @field_validator("samples", mode="before")
    @classmethod
    def _as_complex_vector(cls, value):
        array = np.asarray(value, dtype=np.complex128)
        if array.ndim != 1:
            raise ValueError(f"samples must be one-dimensional, got shape {array.shape}")
        return array

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz

    def with_samples(self, samples: np.ndarray) -> "BasebandSignal":
        return BasebandSignal(
            samples=samples, sample_rate_hz=self.sample_rate_hz, t0_s=self.t0_s
        )

    def chirps(self, chirp_samples: int) -> np.ndarray:
        """View of the samples as one row per chirp."""
        if self.samples.size % chirp_samples:
            raise ValueError(
                f"{self.samples.size} samples do not split into chirps of "
                f"{chirp_samples}"
            )
        return self.samples.reshape(-1, chirp_samples)


def time_on_air(cfg: ModemConfig, layout: FrameLayout) -> float:
    return layout.total_chirps * cfg.chirp_duration_s


# MHDR, FHDR and MIC bytes framing every LoRaWAN application payload
LORAWAN_MAC_OVERHEAD_BYTES = 13


def lorawan_time_on_air(
    cfg: ModemConfig,
    payload_bytes: int,
    cr: int = 1,
    n_preamble: int = 8,
    explicit_header: bool = True,
    crc: bool = True,
    mac_overhead_bytes: int = LORAWAN_MAC_OVERHEAD_BYTES,
) -> float:
    """
    Air time of a complete LoRaWAN uplink in seconds.

    Counts the 4.25-chirp sync word and SFD after the preamble, the PHY header,
    CRC and MAC framing, none of which the simulated FrameLayout carries.
    LDRO shrinks the bits per payload chirp by two.
    """
    if payload_bytes < 0:
        raise ValueError(f"payload_bytes must be non-negative, got {payload_bytes}")
    if cr not in (1, 2, 3, 4):
        raise ValueError(f"cr must be in 1..4, got {cr}")
    phy_bytes = payload_bytes + mac_overhead_bytes
    numerator = (
        8 * phy_bytes - 4 * cfg.sf + 28 + 16 * int(crc) - 20 * int(not explicit_header)
    )
    blocks = max(math.ceil(numerator / (4 * cfg.bits_per_symbol)), 0)
    n_payload = 8 + blocks * (cr + 4)
    return (n_preamble + 4.25 + n_payload) * cfg.chirp_duration_s
