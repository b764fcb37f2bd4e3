import logging
import time
from typing import List, NamedTuple, Optional, Tuple

import numpy as np

from lora_phy.channel import ChannelConfig, propagate
from lora_phy.estimators import EstimateReport, apply_plan, build_plan
from lora_phy.modem import build_frame, demod_symbols
from lora_phy.models import BasebandSignal
from ser_sim.scenario import ScenarioConfig
from ser_sim.stats import SerPoint

logger = logging.getLogger(__name__)


class TrialResult(NamedTuple):
    errors: int
    total: int
    report: Optional[EstimateReport] = None


def trial_rng(sc: ScenarioConfig, trial_index: int) -> np.random.Generator:
    """
    Generator owned by one trial, keyed on the master seed, the cell
    coordinates and the trial index only.
    """
    seed = np.random.SeedSequence(
        entropy=sc.master_seed, spawn_key=(sc.cell_id(), trial_index)
    )
    return np.random.Generator(np.random.Philox(seed))


def received_frame(
    sc: ScenarioConfig, trial_index: int
) -> Tuple[np.ndarray, BasebandSignal]:
    """Data symbols of one trial and the frame that reaches the receiver."""
    cfg = sc.modem
    layout = sc.layout()
    rng = trial_rng(sc, trial_index)

    data = rng.integers(0, cfg.alphabet_size, size=layout.n_data)
    frame = build_frame(cfg, layout, data, t0_s=sc.t_start_s)
    channel = ChannelConfig(
        profile=sc.profile, snr_db=sc.channel_snr_db, t_start_s=sc.t_start_s
    )
    return data, propagate(frame, channel, oversampling=cfg.oversampling, rng=rng)


def run_trial(sc: ScenarioConfig, trial_index: int) -> TrialResult:
    """Transmit one random frame and count data-symbol errors after compensation."""
    cfg = sc.modem
    layout = sc.layout()
    data, rx = received_frame(sc, trial_index)

    chirps = rx.chirps(cfg.chirp_samples)
    downchirps = chirps[layout.n_up : layout.payload_offset]
    payload = BasebandSignal(
        samples=chirps[layout.payload_offset :].ravel(),
        sample_rate_hz=rx.sample_rate_hz,
        t0_s=sc.t_start_s + layout.payload_offset * cfg.chirp_duration_s,
    )
    plan = build_plan(
        sc.estimator,
        cfg,
        layout,
        downchirps,
        payload,
        profile=sc.profile,
        t_start=sc.t_start_s,
    )
    compensated = apply_plan(payload, plan).chirps(cfg.chirp_samples)
    decisions = demod_symbols(cfg, compensated[layout.data_positions])
    errors = int(np.count_nonzero(decisions != data))
    return TrialResult(errors=errors, total=layout.n_data, report=plan.report)


def run_cell(
    sc: ScenarioConfig, keep_reports: int = 0
) -> Tuple[SerPoint, List[EstimateReport]]:
    """All trials of one scenario, plus the estimate reports of the first few."""
    started = time.perf_counter()
    errors = 0
    total = 0
    reports: List[EstimateReport] = []
    for trial_index in range(sc.trials):
        result = run_trial(sc, trial_index)
        errors += result.errors
        total += result.total
        if trial_index < keep_reports and result.report is not None:
            reports.append(result.report)
    point = SerPoint.from_counts(errors, total, time.perf_counter() - started)
    return point, reports
