import logging
from functools import lru_cache
from typing import NamedTuple, Sequence, Union

import numpy as np
from scipy import fft

from lora_phy.models import BasebandSignal, ChirpKind, FrameLayout, ModemConfig

logger = logging.getLogger(__name__)

ChirpInput = Union[BasebandSignal, np.ndarray]


class DemodResult(NamedTuple):
    bin: int
    signed_freq_hz: float
    magnitude: float


def _chirp_phase(cfg: ModemConfig, slots: np.ndarray) -> np.ndarray:
    """
    Quadratic chirp phase for every slot, one row per slot.

    Frequency starts at -B/2 + slot*B/2^sf, rises at B/T_c and drops by B at
    the wrap instant, where the phase stays continuous.
    """
    chips = cfg.chips
    x = np.arange(cfg.chirp_samples) / cfg.oversampling  # elapsed time in chips
    slots = np.asarray(slots, dtype=float)[..., np.newaxis]
    phase = 2 * np.pi * ((slots / chips - 0.5) * x + x**2 / (2 * chips))
    wrap_at = chips - slots
    phase -= 2 * np.pi * np.where(x >= wrap_at, x - wrap_at, 0.0)
    return phase


@lru_cache(maxsize=64)
def _reference(cfg: ModemConfig, kind: ChirpKind) -> np.ndarray:
    upchirp = np.exp(1j * _chirp_phase(cfg, 0))
    chirp = upchirp if kind is ChirpKind.UP else np.conj(upchirp)
    chirp.setflags(write=False)
    return chirp


def _check_symbols(cfg: ModemConfig, symbols) -> np.ndarray:
    symbols = np.asarray(symbols)
    if symbols.size and not np.issubdtype(symbols.dtype, np.integer):
        raise ValueError(f"symbols must be integers, got dtype {symbols.dtype}")
    symbols = symbols.astype(np.int64)
    bad = (symbols < 0) | (symbols >= cfg.alphabet_size)
    if np.any(bad):
        raise ValueError(
            f"symbol {int(symbols[bad][0])} outside [0, {cfg.alphabet_size}) "
            f"for sf={cfg.sf}, ldro={cfg.ldro}"
        )
    return symbols


def symbol_envelope(cfg: ModemConfig, s: int) -> BasebandSignal:
    """Unit-amplitude chirp carrying symbol `s`."""
    (symbol,) = _check_symbols(cfg, [s])
    samples = np.exp(1j * _chirp_phase(cfg, symbol * cfg.slot_spacing))
    return BasebandSignal(samples=samples, sample_rate_hz=cfg.sample_rate_hz)


def downchirp_envelope(cfg: ModemConfig) -> BasebandSignal:
    return BasebandSignal(
        samples=_reference(cfg, ChirpKind.DOWN), sample_rate_hz=cfg.sample_rate_hz
    )


def chirp_matrix(cfg: ModemConfig, symbols: Sequence[int]) -> np.ndarray:
    """Chirps for a run of symbols, one row each."""
    symbols = _check_symbols(cfg, symbols)
    return np.exp(1j * _chirp_phase(cfg, symbols * cfg.slot_spacing))


def build_frame(
    cfg: ModemConfig,
    layout: FrameLayout,
    payload: Sequence[int],
    t0_s: float = 0.0,
) -> BasebandSignal:
    """Preamble upchirps, preamble downchirps, then payload with midambles."""
    payload = _check_symbols(cfg, payload)
    if payload.size != layout.n_data:
        raise ValueError(
            f"payload has {payload.size} symbols but the layout expects "
            f"{layout.n_data} data chirps"
        )
    expanded = np.zeros(layout.n_sym, dtype=np.int64)
    expanded[layout.data_positions] = payload

    up = _reference(cfg, ChirpKind.UP)
    down = _reference(cfg, ChirpKind.DOWN)
    parts = [np.tile(up, layout.n_up), np.tile(down, layout.n_dw)]
    if layout.n_sym:
        parts.append(chirp_matrix(cfg, expanded).ravel())
    return BasebandSignal(
        samples=np.concatenate(parts), sample_rate_hz=cfg.sample_rate_hz, t0_s=t0_s
    )


def payload_symbol_count(cfg: ModemConfig, payload_bits: int, cr: int) -> int:
    """Data chirps needed for `payload_bits` at code rate 4/(4+cr)."""
    if payload_bits <= 0:
        raise ValueError(f"payload_bits must be positive, got {payload_bits}")
    if cr not in (1, 2, 3, 4):
        raise ValueError(f"cr must be in 1..4, got {cr}")
    coded_bits = payload_bits * (4 + cr)
    return -(-coded_bits // (4 * cfg.bits_per_symbol))


def _as_segments(cfg: ModemConfig, rx: ChirpInput) -> np.ndarray:
    samples = rx.samples if isinstance(rx, BasebandSignal) else np.asarray(rx)
    if samples.shape[-1] != cfg.chirp_samples:
        raise ValueError(
            f"chirp segment must have {cfg.chirp_samples} samples, "
            f"got {samples.shape[-1]}"
        )
    return samples


def dechirp_spectrum(
    cfg: ModemConfig, rx: ChirpInput, kind: ChirpKind = ChirpKind.UP
) -> np.ndarray:
    """
    FFT of received chirp(s) multiplied by the conjugate `kind` reference.

    Oversampled chirps are decimated to the chip rate after dechirping, so the
    spectrum always has 2^sf bins of width B/2^sf.
    """
    segments = _as_segments(cfg, rx)
    product = segments * np.conj(_reference(cfg, kind))
    if cfg.oversampling > 1:
        product = product[..., :: cfg.oversampling]
    return fft.fft(product, axis=-1)


def signed_bin(cfg: ModemConfig, peak):
    """Map FFT bins in the upper half of the spectrum to negative offsets."""
    peak = np.asarray(peak)
    signed = np.where(peak >= cfg.chips // 2, peak - cfg.chips, peak)
    return int(signed) if signed.ndim == 0 else signed


def decide_symbols(cfg: ModemConfig, peak):
    """Round FFT peak bins to the nearest symbol slot, modulo M."""
    spacing = cfg.slot_spacing
    peak = np.asarray(peak)
    decision = ((peak + spacing // 2) // spacing) % cfg.alphabet_size
    return int(decision) if decision.ndim == 0 else decision


def demod_chirp(
    cfg: ModemConfig, rx: ChirpInput, kind: ChirpKind = ChirpKind.UP
) -> DemodResult:
    """Peak bin, its signed frequency and magnitude for one received chirp."""
    segment = _as_segments(cfg, rx)
    if segment.ndim != 1:
        raise ValueError(f"expected a single chirp, got shape {segment.shape}")
    magnitude = np.abs(dechirp_spectrum(cfg, segment, kind))
    peak = int(np.argmax(magnitude))  # first maximum, so ties go to the lowest bin
    return DemodResult(
        bin=peak,
        signed_freq_hz=signed_bin(cfg, peak) * cfg.fft_resolution_hz,
        magnitude=float(magnitude[peak]),
    )


def demod_symbols(cfg: ModemConfig, rx: ChirpInput) -> np.ndarray:
    """Symbol decisions for a stack of upchirp-modulated data chirps."""
    peaks = np.argmax(np.abs(dechirp_spectrum(cfg, rx, ChirpKind.UP)), axis=-1)
    return decide_symbols(cfg, peaks)
