"""Doppler estimators, compensation plans and the midamble advisor."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from pydantic import ValidationError

from leo_orbit import LeoPassProfile, LinearRampProfile, StaticProfile, ZeroProfile
from lora_phy.channel import apply_doppler
from lora_phy.estimators import (
    CompensationPlan,
    EstimatorKind,
    PlanSegment,
    apply_plan,
    build_plan,
    estimate_offset_bin,
    genie_plan,
    identity_plan,
    linear_plan,
    midamble_linear_plan,
    midamble_point_plan,
    point_plan,
    recommended_midamble_interval,
)
from lora_phy.models import BasebandSignal, ChirpKind, FrameLayout, ModemConfig
from lora_phy.modem import build_frame, demod_symbols, downchirp_envelope


def _receive(cfg, layout, profile, t_start=0.0, seed=0):
    """Noiseless frame through `profile`; returns data, downchirps and payload."""
    rng = np.random.default_rng(seed)
    data = rng.integers(0, cfg.alphabet_size, size=layout.n_data)
    frame = build_frame(cfg, layout, data, t0_s=t_start)
    rx = apply_doppler(frame, profile, t_start)
    chirps = rx.chirps(cfg.chirp_samples)
    payload = BasebandSignal(
        samples=chirps[layout.payload_offset :].ravel(), sample_rate_hz=cfg.sample_rate_hz
    )
    return data, chirps[layout.n_up : layout.payload_offset], payload


def _symbol_errors(cfg, layout, data, payload, plan):
    chirps = apply_plan(payload, plan).chirps(cfg.chirp_samples)
    return int(np.count_nonzero(demod_symbols(cfg, chirps[layout.data_positions]) != data))


def _on_bin_ramp(cfg, layout, t_start, f0_bins=7, bins_per_chirp=1):
    """Ramp whose frequency sits on an FFT bin at every downchirp mid-time."""
    t_first_mid = t_start + (layout.n_up + 0.5) * cfg.chirp_duration_s
    return LinearRampProfile(
        f0_hz=f0_bins * cfg.fft_resolution_hz,
        slope_hz_per_s=bins_per_chirp * cfg.fft_resolution_hz / cfg.chirp_duration_s,
        t_ref_s=t_first_mid,
    )


class TestEstimateOffsetBin:
    def test_no_doppler_reads_zero(self):
        cfg = ModemConfig(sf=8)
        assert estimate_offset_bin(cfg, downchirp_envelope(cfg)) == 0.0

    def test_static_offset_is_exact_on_bin(self):
        cfg = ModemConfig(sf=7)
        f_d = 5 * cfg.symbol_rate_hz
        rx = apply_doppler(downchirp_envelope(cfg), StaticProfile(f0_hz=f_d), 0.0)
        assert estimate_offset_bin(cfg, rx) == pytest.approx(f_d)

    def test_off_bin_offset_is_quantized(self):
        cfg = ModemConfig(sf=7)
        rx = apply_doppler(downchirp_envelope(cfg), StaticProfile(f0_hz=-20e3), 0.0)
        estimate = estimate_offset_bin(cfg, rx)
        assert estimate == pytest.approx(-20e3, abs=cfg.fft_resolution_hz / 2)
        assert estimate / cfg.fft_resolution_hz == pytest.approx(round(estimate / cfg.fft_resolution_hz))

    def test_upchirp_measured_against_downchirp_reference(self):
        cfg = ModemConfig(sf=7)
        upchirp = np.conj(downchirp_envelope(cfg).samples)
        rx = upchirp * np.exp(2j * np.pi * -4 * np.arange(cfg.chips) / cfg.chips)
        assert estimate_offset_bin(cfg, rx, ChirpKind.UP) == pytest.approx(-4 * cfg.fft_resolution_hz)


class TestPointPlan:
    @pytest.mark.parametrize("sf", [7, 9, 12])
    def test_static_on_bin_offset_fully_compensated(self, sf):
        cfg = ModemConfig(sf=sf)
        layout = FrameLayout(n_up=8, n_dw=2, n_data=12)
        f0 = -11 * cfg.fft_resolution_hz
        data, downchirps, payload = _receive(cfg, layout, StaticProfile(f0_hz=f0))
        plan = point_plan(cfg, layout, downchirps)
        assert plan.segments[0].f0_hz == pytest.approx(f0)
        assert _symbol_errors(cfg, layout, data, payload, plan) == 0

    def test_zero_doppler_gives_zero_correction(self):
        cfg = ModemConfig(sf=7)
        layout = FrameLayout(n_data=5)
        data, downchirps, payload = _receive(cfg, layout, ZeroProfile())
        plan = point_plan(cfg, layout, downchirps)
        assert plan.report.segment_freqs_hz == [0.0]
        assert_allclose(apply_plan(payload, plan).samples, payload.samples)

    def test_needs_a_downchirp(self):
        cfg = ModemConfig(sf=7)
        with pytest.raises(ValueError):
            point_plan(cfg, FrameLayout(n_dw=0, n_data=1), np.zeros(0))


class TestLinearPlan:
    def test_slope_between_first_and_last_downchirp(self):
        cfg = ModemConfig(sf=7)
        layout = FrameLayout(n_up=8, n_dw=6, n_data=4)
        ramp = _on_bin_ramp(cfg, layout, 0.0, f0_bins=0, bins_per_chirp=1)
        _, downchirps, _ = _receive(cfg, layout, ramp)
        plan = linear_plan(cfg, layout, downchirps)
        first, last = plan.report.anchors
        assert first.freq_hz == pytest.approx(0.0, abs=1e-9)
        assert last.freq_hz == pytest.approx(5 * cfg.fft_resolution_hz)
        assert plan.report.slopes_hz_per_s[0] == pytest.approx(
            5 * cfg.fft_resolution_hz / (5 * cfg.chirp_duration_s)
        )

    def test_on_bin_ramp_recovered_exactly(self):
        cfg = ModemConfig(sf=12)
        layout = FrameLayout(n_up=8, n_dw=6, n_data=15)
        t_start = -10.0
        ramp = _on_bin_ramp(cfg, layout, t_start)
        data, downchirps, payload = _receive(cfg, layout, ramp, t_start)
        plan = linear_plan(cfg, layout, downchirps)
        (segment,) = plan.segments
        payload_start = t_start + layout.payload_offset * cfg.chirp_duration_s
        assert segment.slope_hz_per_s == pytest.approx(ramp.slope_hz_per_s, rel=1e-12)
        assert segment.f0_hz == pytest.approx(ramp.shift(payload_start), rel=1e-9)
        assert _symbol_errors(cfg, layout, data, payload, plan) == 0

    def test_needs_two_downchirps(self):
        cfg = ModemConfig(sf=7)
        layout = FrameLayout(n_dw=1, n_data=1)
        with pytest.raises(ValueError):
            linear_plan(cfg, layout, downchirp_envelope(cfg).samples)


class TestMidamblePointPlan:
    def test_static_offset_matches_point_plan(self):
        cfg = ModemConfig(sf=8)
        layout = FrameLayout(n_up=8, n_dw=2, n_data=12, n_int=4)
        f0 = 9 * cfg.fft_resolution_hz
        data, downchirps, payload = _receive(cfg, layout, StaticProfile(f0_hz=f0))
        plan = midamble_point_plan(cfg, layout, downchirps, payload)
        assert len(plan.segments) == layout.n_midambles + 1
        assert_allclose(plan.report.segment_freqs_hz, f0)
        residuals = [a.freq_hz for a in plan.report.anchors if a.source == "midamble"]
        assert residuals == [0.0] * layout.n_midambles
        reference = point_plan(cfg, layout, downchirps)
        assert_allclose(
            plan.phase(cfg.sample_rate_hz), reference.phase(cfg.sample_rate_hz), atol=1e-6
        )
        assert _symbol_errors(cfg, layout, data, payload, plan) == 0

    def test_tracks_a_ramp_segment_by_segment(self):
        cfg = ModemConfig(sf=7)
        layout = FrameLayout(n_up=8, n_dw=2, n_data=12, n_int=2)
        # two bins per midamble period, read on bin at every midamble
        ramp = LinearRampProfile(
            f0_hz=0.0,
            slope_hz_per_s=2 * cfg.fft_resolution_hz / (3 * cfg.chirp_duration_s),
            t_ref_s=(layout.n_up + layout.n_dw - 0.5) * cfg.chirp_duration_s,
        )
        _, downchirps, payload = _receive(cfg, layout, ramp)
        plan = midamble_point_plan(cfg, layout, downchirps, payload)
        steps = np.diff(plan.report.segment_freqs_hz) / cfg.fft_resolution_hz
        assert_allclose(steps, 2.0)

    def test_phase_is_continuous_across_segments(self):
        cfg = ModemConfig(sf=7)
        layout = FrameLayout(n_data=10, n_int=3)
        _, downchirps, payload = _receive(cfg, layout, LeoPassProfile(), 0.0)
        plan = midamble_point_plan(cfg, layout, downchirps, payload)
        for before, after in zip(plan.segments, plan.segments[1:]):
            assert after.phase0_rad == pytest.approx(before.end_phase(cfg.sample_rate_hz))

    def test_needs_midambles(self):
        cfg = ModemConfig(sf=7)
        layout = FrameLayout(n_data=4, n_int=0)
        with pytest.raises(ValueError):
            midamble_point_plan(cfg, layout, np.zeros(2 * cfg.chips), np.zeros(4 * cfg.chips))


class TestMidambleLinearPlan:
    def test_on_bin_ramp_keeps_the_true_slope(self):
        cfg = ModemConfig(sf=10)
        layout = FrameLayout(n_up=8, n_dw=6, n_data=15, n_int=6)
        ramp = _on_bin_ramp(cfg, layout, 0.0)
        data, downchirps, payload = _receive(cfg, layout, ramp)
        plan = midamble_linear_plan(cfg, layout, downchirps, payload)
        assert len(plan.report.slopes_hz_per_s) == layout.n_midambles + 1
        assert_allclose(plan.report.slopes_hz_per_s, ramp.slope_hz_per_s, rtol=1e-9)
        assert _symbol_errors(cfg, layout, data, payload, plan) == 0

    def test_static_profile_gives_zero_slopes(self):
        cfg = ModemConfig(sf=7)
        layout = FrameLayout(n_up=8, n_dw=6, n_data=12, n_int=6)
        f0 = -3 * cfg.fft_resolution_hz
        data, downchirps, payload = _receive(cfg, layout, StaticProfile(f0_hz=f0))
        plan = midamble_linear_plan(cfg, layout, downchirps, payload)
        assert_allclose(plan.report.slopes_hz_per_s, 0.0, atol=1e-9)
        assert_allclose(plan.report.segment_freqs_hz, f0)
        assert _symbol_errors(cfg, layout, data, payload, plan) == 0


class TestGeniePlan:
    @pytest.mark.parametrize("t_start", [-366.0, -91.5, 0.0])
    def test_leo_pass_noiseless_is_error_free(self, t_start):
        cfg = ModemConfig(sf=12)
        layout = FrameLayout(n_up=8, n_dw=2, n_data=13)
        profile = LeoPassProfile()
        data, _, payload = _receive(cfg, layout, profile, t_start)
        plan = genie_plan(cfg, layout, profile, t_start)
        assert len(plan.segments) == layout.n_sym
        assert _symbol_errors(cfg, layout, data, payload, plan) == 0

    def test_zero_profile_is_identity(self):
        cfg = ModemConfig(sf=7)
        layout = FrameLayout(n_data=3)
        plan = genie_plan(cfg, layout, ZeroProfile(), 0.0)
        assert_allclose(plan.phase(cfg.sample_rate_hz), 0.0)

    def test_build_plan_requires_the_profile(self):
        cfg = ModemConfig(sf=7)
        layout = FrameLayout(n_data=1)
        with pytest.raises(ValueError):
            build_plan(EstimatorKind.GENIE, cfg, layout, np.zeros(2 * cfg.chips), np.zeros(cfg.chips))


class TestApplyPlan:
    def test_identity_plan_leaves_payload_unchanged(self):
        cfg = ModemConfig(sf=7)
        layout = FrameLayout(n_data=3)
        payload = BasebandSignal(samples=np.ones(3 * cfg.chips), sample_rate_hz=cfg.sample_rate_hz)
        assert_array_equal(apply_plan(payload, identity_plan(cfg, layout)).samples, payload.samples)

    def test_inverts_a_static_channel(self):
        cfg = ModemConfig(sf=7)
        f0 = 1234.5
        tx = BasebandSignal(
            samples=np.exp(1j * np.linspace(0, 3, 2 * cfg.chips)), sample_rate_hz=cfg.sample_rate_hz
        )
        rx = apply_doppler(tx, StaticProfile(f0_hz=f0), 0.0)
        plan = CompensationPlan(
            segments=(PlanSegment(start_sample=0, end_sample=len(tx), f0_hz=f0),)
        )
        assert_allclose(apply_plan(rx, plan).samples, tx.samples, rtol=1e-12, atol=1e-12)

    def test_opposite_plans_cancel(self):
        n = 256
        signal = BasebandSignal(samples=np.exp(1j * np.arange(n)), sample_rate_hz=1e3)
        up = CompensationPlan(segments=(PlanSegment(start_sample=0, end_sample=n, f0_hz=7.0),))
        down = CompensationPlan(segments=(PlanSegment(start_sample=0, end_sample=n, f0_hz=-7.0),))
        assert_allclose(apply_plan(apply_plan(signal, up), down).samples, signal.samples, atol=1e-12)

    def test_length_mismatch(self):
        plan = CompensationPlan(segments=(PlanSegment(start_sample=0, end_sample=10, f0_hz=0.0),))
        with pytest.raises(ValueError):
            apply_plan(BasebandSignal(samples=np.ones(12), sample_rate_hz=1.0), plan)

    def test_segments_must_be_contiguous(self):
        with pytest.raises(ValidationError):
            CompensationPlan(
                segments=(
                    PlanSegment(start_sample=0, end_sample=10, f0_hz=0.0),
                    PlanSegment(start_sample=12, end_sample=20, f0_hz=0.0),
                )
            )


class TestMidambleAdvisor:
    def test_worked_example(self):
        advice = recommended_midamble_interval(ModemConfig(sf=10), 0.1, -304.71, 15)
        assert advice.needed
        assert advice.interval_s == pytest.approx(0.0401, abs=2e-4)
        assert (advice.n_star, advice.n_int) == (4, 4)

    def test_half_symbol_rate_needs_a_single_estimate(self):
        advice = recommended_midamble_interval(ModemConfig(sf=10), 0.5, -304.71, 15)
        assert advice.interval_s == pytest.approx(5 * 0.04006, rel=1e-3)
        assert advice.n_star == 1
        assert advice.n_int == 15

    def test_zero_rate_needs_no_midambles(self):
        advice = recommended_midamble_interval(ModemConfig(sf=10), 0.1, 0.0, 15)
        assert not advice.needed
        assert math.isinf(advice.interval_s)

    @pytest.mark.parametrize("k", [0.0, 0.6, -0.1])
    def test_k_out_of_range(self, k):
        with pytest.raises(ValueError):
            recommended_midamble_interval(ModemConfig(sf=10), k, -300.0, 15)
