import logging
import math
from functools import lru_cache
from typing import Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import signal as sps

from leo_orbit.doppler import DopplerProfile, LeoPassProfile, phase_from_profile
from lora_phy.models import BasebandSignal, ModemConfig

logger = logging.getLogger(__name__)


class ChannelConfig(BaseModel):
    """Doppler profile and noise level seen by one frame."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    profile: DopplerProfile = Field(default_factory=LeoPassProfile)
    snr_db: Optional[float] = Field(
        default=None, description="In-band SNR P/P_n; None disables noise"
    )
    seed: int = Field(default=0, ge=0, lt=2**64, description="Noise stream seed")
    t_start_s: float = Field(
        default=0.0, description="Satellite-pass time at the first frame sample"
    )

    @property
    def noise_variance(self) -> float:
        return noise_variance(self.snr_db)


def noise_variance(snr_db: Optional[float]) -> float:
    """Complex noise variance per sample for a unit-power signal."""
    if snr_db is None or math.isinf(snr_db):
        return 0.0
    return 10 ** (-snr_db / 10)


@lru_cache(maxsize=16)
def _rotation(profile, t_start: float, n_samples: int, f_s: float) -> np.ndarray:
    rotation = np.exp(1j * phase_from_profile(profile, t_start, n_samples, f_s))
    rotation.setflags(write=False)
    return rotation


def apply_doppler(
    signal: BasebandSignal, profile: DopplerProfile, t_start: float
) -> BasebandSignal:
    """Rotate the signal by the Doppler phase accumulated from t_start."""
    rotation = _rotation(profile, float(t_start), len(signal), signal.sample_rate_hz)
    return signal.with_samples(signal.samples * rotation)


def add_awgn(
    signal: BasebandSignal,
    snr_db: Optional[float],
    rng: np.random.Generator,
    oversampling: int = 1,
) -> BasebandSignal:
    """
    Add circularly-symmetric complex Gaussian noise at `snr_db`.

    `None` (or an infinite SNR) leaves the signal untouched and draws nothing
    from `rng`. With oversampling the noise is drawn at the chip rate and
    interpolated, keeping it inside the signal bandwidth at the same
    per-sample variance.
    """
    variance = noise_variance(snr_db)
    if variance == 0.0:
        return signal
    n = len(signal)
    n_chips = -(-n // oversampling)
    noise = rng.standard_normal((2, n_chips))
    noise = math.sqrt(variance / 2) * (noise[0] + 1j * noise[1])
    if oversampling > 1:
        noise = sps.resample(noise, n_chips * oversampling)[:n]
    return signal.with_samples(signal.samples + noise)


def snr_from_esn0(cfg: ModemConfig, esn0_db: float) -> float:
    """In-band SNR for a chirp energy to noise density ratio."""
    return esn0_db - 10 * math.log10(cfg.chips)


def esn0_from_snr(cfg: ModemConfig, snr_db: float) -> float:
    return snr_db + 10 * math.log10(cfg.chips)


def channel_rng(seed: int) -> np.random.Generator:
    """Counter-based generator, so every seed owns an independent stream."""
    return np.random.Generator(np.random.Philox(seed))


def propagate(
    signal: BasebandSignal,
    channel: ChannelConfig,
    oversampling: int = 1,
    rng: Optional[np.random.Generator] = None,
) -> BasebandSignal:
    """Doppler rotation followed by AWGN, as configured by `channel`."""
    received = apply_doppler(signal, channel.profile, channel.t_start_s)
    if rng is None:
        rng = channel_rng(channel.seed)
    return add_awgn(received, channel.snr_db, rng, oversampling=oversampling)
