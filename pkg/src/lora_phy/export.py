import json
import logging
import os

import numpy as np

from lora_phy.models import BasebandSignal

logger = logging.getLogger(__name__)


def _sidecar_path(filepath):
    return f"{os.path.splitext(filepath)[0]}.json"


def write_iq(signal: BasebandSignal, filepath="frame.iq"):
    """
    Dump a waveform as interleaved little-endian float64 I/Q, with the
    sample rate and start time in a JSON file next to it.
    """
    interleaved = np.empty(2 * len(signal), dtype="<f8")
    interleaved[0::2] = signal.samples.real
    interleaved[1::2] = signal.samples.imag
    interleaved.tofile(filepath)
    metadata = {
        "sample_rate_hz": signal.sample_rate_hz,
        "t0_s": signal.t0_s,
        "n_samples": len(signal),
        "dtype": "float64-le interleaved I/Q",
    }
    with open(_sidecar_path(filepath), "w", encoding="utf-8") as f:
        json.dump(metadata, f, indent=2)
    logger.info(f"Written {len(signal)} samples to {filepath}")


def read_iq(filepath) -> BasebandSignal:
    with open(_sidecar_path(filepath), "r", encoding="utf-8") as f:
        metadata = json.load(f)
    interleaved = np.fromfile(filepath, dtype="<f8")
    return BasebandSignal(
        samples=interleaved[0::2] + 1j * interleaved[1::2],
        sample_rate_hz=metadata["sample_rate_hz"],
        t0_s=metadata["t0_s"],
    )
