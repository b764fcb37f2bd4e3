import logging
import math
from enum import Enum
from typing import List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from leo_orbit.doppler import DopplerProfile
from lora_phy.modem import dechirp_spectrum, signed_bin
from lora_phy.models import BasebandSignal, ChirpKind, FrameLayout, ModemConfig

logger = logging.getLogger(__name__)

ChirpRows = Union[BasebandSignal, np.ndarray]


class EstimatorKind(str, Enum):
    NONE = "none"
    GENIE = "genie"
    POINT = "point"
    LINEAR = "linear"
    MIDAMBLE_POINT = "midamble-point"
    MIDAMBLE_LINEAR = "midamble-linear"

    @property
    def uses_slope(self) -> bool:
        return self in (EstimatorKind.LINEAR, EstimatorKind.MIDAMBLE_LINEAR)

    @property
    def uses_midambles(self) -> bool:
        return self in (EstimatorKind.MIDAMBLE_POINT, EstimatorKind.MIDAMBLE_LINEAR)

    @property
    def min_downchirps(self) -> int:
        if self.uses_slope:
            return 2
        if self in (EstimatorKind.POINT, EstimatorKind.MIDAMBLE_POINT):
            return 1
        return 0


class PlanSegment(BaseModel):
    """Correction phase phase0 + 2*pi*(f0*tau + slope*tau^2/2) over samples [start, end)."""

    model_config = ConfigDict(frozen=True)

    start_sample: int = Field(ge=0)
    end_sample: int = Field(ge=0)
    f0_hz: float
    slope_hz_per_s: float = 0.0
    phase0_rad: float = 0.0

    def phase(self, samples: np.ndarray, f_s: float) -> np.ndarray:
        tau = (samples - self.start_sample) / f_s
        return self.phase0_rad + 2 * np.pi * (
            self.f0_hz * tau + 0.5 * self.slope_hz_per_s * tau**2
        )

    def end_phase(self, f_s: float) -> float:
        return float(self.phase(np.asarray(self.end_sample), f_s))


class Anchor(BaseModel):
    """One bin-quantized FFT measurement used by an estimator."""

    time_s: float = Field(description="Chirp mid-time on the payload clock")
    bin: int = Field(description="Signed peak bin")
    freq_hz: float = Field(description="Measured frequency, bin * FFT resolution")
    absolute_hz: float = Field(description="Offset estimate the measurement implies")
    source: Literal["downchirp", "midamble"]


class EstimateReport(BaseModel):
    estimator: EstimatorKind
    anchors: List[Anchor] = Field(default_factory=list)
    slopes_hz_per_s: List[float] = Field(default_factory=list)
    segment_freqs_hz: List[float] = Field(default_factory=list)


class CompensationPlan(BaseModel):
    """Piecewise correction over the payload, sample 0 being the payload start."""

    model_config = ConfigDict(frozen=True)

    segments: Tuple[PlanSegment, ...]
    report: Optional[EstimateReport] = None

    @model_validator(mode="after")
    def _contiguous(self):
        position = 0
        for segment in self.segments:
            if segment.start_sample != position or segment.end_sample < position:
                raise ValueError(
                    f"plan segments must tile the payload contiguously; segment "
                    f"[{segment.start_sample}, {segment.end_sample}) follows "
                    f"sample {position}"
                )
            position = segment.end_sample
        return self

    @property
    def n_samples(self) -> int:
        return self.segments[-1].end_sample if self.segments else 0

    def phase(self, f_s: float) -> np.ndarray:
        theta = np.empty(self.n_samples)
        for segment in self.segments:
            idx = np.arange(segment.start_sample, segment.end_sample)
            theta[segment.start_sample : segment.end_sample] = segment.phase(idx, f_s)
        return theta


class MidambleAdvice(BaseModel):
    interval_s: float = Field(description="Time span tolerated by one estimate")
    n_star: int = Field(description="Estimates needed over the payload, preamble included")
    n_int: int = Field(description="Data chirps between midambles")
    needed: bool = Field(description="False when the Doppler rate is zero")


def _segment(start, end, f0, slope, previous: Optional[PlanSegment], f_s) -> PlanSegment:
    phase0 = previous.end_phase(f_s) if previous is not None else 0.0
    return PlanSegment(
        start_sample=start,
        end_sample=end,
        f0_hz=float(f0),
        slope_hz_per_s=float(slope),
        phase0_rad=phase0,
    )


def _payload_rows(cfg: ModemConfig, layout: FrameLayout, payload: ChirpRows) -> np.ndarray:
    samples = payload.samples if isinstance(payload, BasebandSignal) else np.asarray(payload)
    expected = layout.n_sym * cfg.chirp_samples
    if samples.size != expected:
        raise ValueError(
            f"payload has {samples.size} samples, layout expects {expected}"
        )
    return samples.reshape(layout.n_sym, cfg.chirp_samples)


def _downchirp_rows(cfg: ModemConfig, layout: FrameLayout, preamble_rx: ChirpRows) -> np.ndarray:
    samples = (
        preamble_rx.samples
        if isinstance(preamble_rx, BasebandSignal)
        else np.asarray(preamble_rx)
    )
    if samples.size != layout.n_dw * cfg.chirp_samples:
        raise ValueError(
            f"expected {layout.n_dw} received downchirps of {cfg.chirp_samples} "
            f"samples, got {samples.size} samples"
        )
    return samples.reshape(layout.n_dw, cfg.chirp_samples)


def _measure(cfg: ModemConfig, chirp: np.ndarray, kind: ChirpKind) -> Tuple[int, float]:
    magnitude = np.abs(dechirp_spectrum(cfg, chirp, kind))
    peak = signed_bin(cfg, int(np.argmax(magnitude)))
    return peak, peak * cfg.fft_resolution_hz


def estimate_offset_bin(
    cfg: ModemConfig, rx_chirp: ChirpRows, kind: ChirpKind = ChirpKind.DOWN
) -> float:
    """
    Signed frequency of the FFT peak of one received pure chirp.

    `kind` is the sweep of the received chirp: downchirps are dechirped with
    the pure upchirp, upchirps and midambles with the pure downchirp.
    """
    chirp = rx_chirp.samples if isinstance(rx_chirp, BasebandSignal) else rx_chirp
    return _measure(cfg, np.asarray(chirp), kind)[1]


def _downchirp_anchor(cfg, layout, rows, index) -> Anchor:
    """Measure preamble downchirp `index` (0-based) as an anchor."""
    peak, freq = _measure(cfg, rows[index], ChirpKind.DOWN)
    return Anchor(
        time_s=-(layout.n_dw - index - 0.5) * cfg.chirp_duration_s,
        bin=peak,
        freq_hz=freq,
        absolute_hz=freq,
        source="downchirp",
    )


def _check_layout(kind: EstimatorKind, layout: FrameLayout) -> None:
    if layout.n_dw < kind.min_downchirps:
        raise ValueError(
            f"{kind.value} estimation needs at least {kind.min_downchirps} "
            f"preamble downchirps, layout has {layout.n_dw}"
        )
    if kind.uses_midambles and layout.n_int < 1:
        raise ValueError(f"{kind.value} estimation needs n_int >= 1")


def identity_plan(cfg: ModemConfig, layout: FrameLayout) -> CompensationPlan:
    n = layout.n_sym * cfg.chirp_samples
    segments = (PlanSegment(start_sample=0, end_sample=n, f0_hz=0.0),) if n else ()
    return CompensationPlan(
        segments=segments, report=EstimateReport(estimator=EstimatorKind.NONE)
    )


def point_plan(cfg: ModemConfig, layout: FrameLayout, preamble_rx: ChirpRows) -> CompensationPlan:
    """Constant correction read from the last preamble downchirp."""
    _check_layout(EstimatorKind.POINT, layout)
    rows = _downchirp_rows(cfg, layout, preamble_rx)
    anchor = _downchirp_anchor(cfg, layout, rows, layout.n_dw - 1)
    n = layout.n_sym * cfg.chirp_samples
    segments = (
        (PlanSegment(start_sample=0, end_sample=n, f0_hz=anchor.freq_hz),) if n else ()
    )
    report = EstimateReport(
        estimator=EstimatorKind.POINT,
        anchors=[anchor],
        segment_freqs_hz=[anchor.freq_hz],
    )
    return CompensationPlan(segments=segments, report=report)


def _preamble_line(cfg, layout, rows) -> Tuple[Anchor, Anchor, float]:
    first = _downchirp_anchor(cfg, layout, rows, 0)
    last = _downchirp_anchor(cfg, layout, rows, layout.n_dw - 1)
    slope = (last.freq_hz - first.freq_hz) / (cfg.chirp_duration_s * (layout.n_dw - 1))
    return first, last, slope


def linear_plan(cfg: ModemConfig, layout: FrameLayout, preamble_rx: ChirpRows) -> CompensationPlan:
    """
    Affine correction through the first and last preamble downchirps,
    extrapolated over the whole payload.
    """
    _check_layout(EstimatorKind.LINEAR, layout)
    rows = _downchirp_rows(cfg, layout, preamble_rx)
    first, last, alpha = _preamble_line(cfg, layout, rows)
    # frequency law anchored at the first downchirp, evaluated at payload start
    f_payload_start = first.freq_hz - alpha * first.time_s
    n = layout.n_sym * cfg.chirp_samples
    segments = (
        (
            PlanSegment(
                start_sample=0,
                end_sample=n,
                f0_hz=f_payload_start,
                slope_hz_per_s=alpha,
            ),
        )
        if n
        else ()
    )
    report = EstimateReport(
        estimator=EstimatorKind.LINEAR,
        anchors=[first, last],
        slopes_hz_per_s=[alpha],
        segment_freqs_hz=[f_payload_start],
    )
    return CompensationPlan(segments=segments, report=report)


def _midamble_residual(cfg, rows, position, segment: PlanSegment) -> Tuple[int, float]:
    n = cfg.chirp_samples
    idx = np.arange(position * n, (position + 1) * n)
    compensated = rows[position] * np.exp(-1j * segment.phase(idx, cfg.sample_rate_hz))
    return _measure(cfg, compensated, ChirpKind.UP)


def midamble_point_plan(
    cfg: ModemConfig,
    layout: FrameLayout,
    preamble_rx: ChirpRows,
    payload_rx: ChirpRows,
) -> CompensationPlan:
    """
    Piecewise-constant correction. Each midamble, already corrected by the
    running estimate, yields a residual that is added for the next segment.
    """
    _check_layout(EstimatorKind.MIDAMBLE_POINT, layout)
    rows = _downchirp_rows(cfg, layout, preamble_rx)
    payload = _payload_rows(cfg, layout, payload_rx)
    n = cfg.chirp_samples
    f_s = cfg.sample_rate_hz

    first = _downchirp_anchor(cfg, layout, rows, layout.n_dw - 1)
    report = EstimateReport(estimator=EstimatorKind.MIDAMBLE_POINT, anchors=[first])
    frequency = first.freq_hz
    segments: List[PlanSegment] = []
    start = 0
    for position in layout.midamble_positions:
        previous = segments[-1] if segments else None
        segment = _segment(start, (position + 1) * n, frequency, 0.0, previous, f_s)
        segments.append(segment)
        report.segment_freqs_hz.append(frequency)

        peak, residual = _midamble_residual(cfg, payload, position, segment)
        frequency += residual
        report.anchors.append(
            Anchor(
                time_s=(position + 0.5) * cfg.chirp_duration_s,
                bin=peak,
                freq_hz=residual,
                absolute_hz=frequency,
                source="midamble",
            )
        )
        start = segment.end_sample
    if layout.n_sym and start < layout.n_sym * n:
        previous = segments[-1] if segments else None
        segments.append(_segment(start, layout.n_sym * n, frequency, 0.0, previous, f_s))
        report.segment_freqs_hz.append(frequency)
    return CompensationPlan(segments=tuple(segments), report=report)


def midamble_linear_plan(
    cfg: ModemConfig,
    layout: FrameLayout,
    preamble_rx: ChirpRows,
    payload_rx: ChirpRows,
) -> CompensationPlan:
    """
    Piecewise-linear correction. Each midamble gives a new absolute anchor;
    the slope between the two latest anchors predicts the next segment.
    """
    _check_layout(EstimatorKind.MIDAMBLE_LINEAR, layout)
    rows = _downchirp_rows(cfg, layout, preamble_rx)
    payload = _payload_rows(cfg, layout, payload_rx)
    n = cfg.chirp_samples
    f_s = cfg.sample_rate_hz

    first, last, alpha = _preamble_line(cfg, layout, rows)
    report = EstimateReport(
        estimator=EstimatorKind.MIDAMBLE_LINEAR,
        anchors=[first, last],
        slopes_hz_per_s=[alpha],
    )
    anchor_t, anchor_f = first.time_s, first.freq_hz

    def law_at(t):
        return anchor_f + alpha * (t - anchor_t)

    segments: List[PlanSegment] = []
    start = 0
    for position in layout.midamble_positions:
        previous = segments[-1] if segments else None
        f0 = law_at(start / f_s)
        segment = _segment(start, (position + 1) * n, f0, alpha, previous, f_s)
        segments.append(segment)
        report.segment_freqs_hz.append(f0)

        peak, residual = _midamble_residual(cfg, payload, position, segment)
        t_mid = (position + 0.5) * cfg.chirp_duration_s
        absolute = law_at(t_mid) + residual
        alpha = (absolute - anchor_f) / (t_mid - anchor_t)
        anchor_t, anchor_f = t_mid, absolute
        report.anchors.append(
            Anchor(
                time_s=t_mid,
                bin=peak,
                freq_hz=residual,
                absolute_hz=absolute,
                source="midamble",
            )
        )
        report.slopes_hz_per_s.append(alpha)
        start = segment.end_sample
    if layout.n_sym and start < layout.n_sym * n:
        previous = segments[-1] if segments else None
        f0 = law_at(start / f_s)
        segments.append(_segment(start, layout.n_sym * n, f0, alpha, previous, f_s))
        report.segment_freqs_hz.append(f0)
    return CompensationPlan(segments=tuple(segments), report=report)


def genie_plan(
    cfg: ModemConfig,
    layout: FrameLayout,
    profile: DopplerProfile,
    t_start: float,
) -> CompensationPlan:
    """Per-chirp affine correction sampled from the true Doppler profile."""
    n = cfg.chirp_samples
    f_s = cfg.sample_rate_hz
    payload_start = t_start + layout.payload_offset * cfg.chirp_duration_s
    chirp_starts = payload_start + np.arange(layout.n_sym) * cfg.chirp_duration_s
    shifts = np.atleast_1d(profile.shift(chirp_starts))
    rates = np.atleast_1d(profile.rate(chirp_starts))
    segments: List[PlanSegment] = []
    for k in range(layout.n_sym):
        previous = segments[-1] if segments else None
        segments.append(
            _segment(k * n, (k + 1) * n, shifts[k], rates[k], previous, f_s)
        )
    report = EstimateReport(
        estimator=EstimatorKind.GENIE,
        slopes_hz_per_s=[float(r) for r in rates],
        segment_freqs_hz=[float(f) for f in shifts],
    )
    return CompensationPlan(segments=tuple(segments), report=report)


def apply_plan(payload: BasebandSignal, plan: CompensationPlan) -> BasebandSignal:
    """Multiply the payload by exp(-j*theta) of the plan."""
    if plan.n_samples != len(payload):
        raise ValueError(
            f"plan covers {plan.n_samples} samples but the payload has {len(payload)}"
        )
    theta = plan.phase(payload.sample_rate_hz)
    return payload.with_samples(payload.samples * np.exp(-1j * theta))


def recommended_midamble_interval(
    cfg: ModemConfig, k: float, xi: float, n_sym: int
) -> MidambleAdvice:
    """
    Midamble spacing that keeps the drift between two estimates within a
    fraction `k` of the symbol rate.
    """
    if not 0 < k <= 0.5:
        raise ValueError(f"k must lie in (0, 0.5], got {k}")
    if n_sym < 1:
        raise ValueError(f"n_sym must be positive, got {n_sym}")
    if xi == 0:
        logger.info("Zero Doppler rate, no midambles needed")
        return MidambleAdvice(interval_s=math.inf, n_star=0, n_int=0, needed=False)
    interval = k * cfg.symbol_rate_hz / abs(xi)
    # tolerate rounding noise when the ratio is an exact integer
    n_star = max(math.ceil(cfg.chirp_duration_s * n_sym / interval - 1e-9), 1)
    n_int = math.ceil(n_sym / n_star)
    return MidambleAdvice(interval_s=interval, n_star=n_star, n_int=n_int, needed=True)


def build_plan(
    kind: EstimatorKind,
    cfg: ModemConfig,
    layout: FrameLayout,
    preamble_rx: ChirpRows,
    payload_rx: ChirpRows,
    profile: Optional[DopplerProfile] = None,
    t_start: float = 0.0,
) -> CompensationPlan:
    """Run the estimator `kind` on one received frame."""
    kind = EstimatorKind(kind)
    if kind is EstimatorKind.NONE:
        return identity_plan(cfg, layout)
    if kind is EstimatorKind.GENIE:
        if profile is None:
            raise ValueError("genie compensation needs the true Doppler profile")
        return genie_plan(cfg, layout, profile, t_start)
    if kind is EstimatorKind.POINT:
        return point_plan(cfg, layout, preamble_rx)
    if kind is EstimatorKind.LINEAR:
        return linear_plan(cfg, layout, preamble_rx)
    if kind is EstimatorKind.MIDAMBLE_POINT:
        return midamble_point_plan(cfg, layout, preamble_rx, payload_rx)
    return midamble_linear_plan(cfg, layout, preamble_rx, payload_rx)
