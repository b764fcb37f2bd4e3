"""
Monte Carlo acceptance runs: AWGN oracle agreement and the qualitative
ordering of the compensation strategies over an overhead pass.

Each cell gathers at least 2*10^4 data symbols, so these take minutes.
"""

import math

import numpy as np
import pytest

from leo_orbit import CASE_1_T_START_S, CASE_2_T_START_S
from lora_phy.channel import add_awgn, channel_rng, snr_from_esn0
from lora_phy.models import BasebandSignal, ModemConfig
from lora_phy.modem import chirp_matrix, demod_symbols, payload_symbol_count
from ser_sim.runner import run_cell
from ser_sim.scenario import ScenarioConfig
from ser_sim.stats import awgn_ser_oracle, binomial_band, db_to_linear

pytestmark = pytest.mark.slow

MIN_SYMBOLS = 20_000
ESN0_DB = 14.0
SEED = 2025
ESTIMATORS = ("point", "linear", "midamble-point", "midamble-linear")


def _cell(sf, t_start, estimator, ldro=False, payload_bits=120, esn0_db=ESN0_DB, **extra):
    cfg = ModemConfig(sf=sf, ldro=ldro)
    n_data = payload_symbol_count(cfg, payload_bits, 1)
    sc = ScenarioConfig(
        modem=cfg,
        estimator=estimator,
        t_start_s=t_start,
        payload_bits=payload_bits,
        esn0_db=esn0_db,
        trials=math.ceil(MIN_SYMBOLS / n_data),
        master_seed=SEED,
        **extra,
    )
    point, _ = run_cell(sc)
    return point


@pytest.fixture(scope="module")
def ordering_cells():
    cells = {}
    for sf in (7, 10, 12):
        for estimator in ESTIMATORS:
            cells[("case1", sf, estimator)] = _cell(sf, CASE_1_T_START_S, estimator)
    for estimator in ESTIMATORS:
        cells[("case2", 12, estimator)] = _cell(12, CASE_2_T_START_S, estimator)
    return cells


def _not_worse(a, b):
    """a is not significantly worse than b."""
    return a.ci_lo <= b.ci_hi


class TestAwgnOracleAgreement:
    @pytest.mark.parametrize("sf", [7, 10])
    @pytest.mark.parametrize("esn0_db", [8.0, 11.0, 14.0])
    def test_doppler_free_ser_matches_oracle(self, sf, esn0_db):
        cfg = ModemConfig(sf=sf)
        rng = channel_rng(SEED + sf)
        n_symbols, batch = 100_000, 5_000
        errors = 0
        for _ in range(n_symbols // batch):
            symbols = rng.integers(0, cfg.alphabet_size, size=batch)
            tx = BasebandSignal(
                samples=chirp_matrix(cfg, symbols).ravel(), sample_rate_hz=cfg.sample_rate_hz
            )
            rx = add_awgn(tx, snr_from_esn0(cfg, esn0_db), rng)
            decisions = demod_symbols(cfg, rx.chirps(cfg.chirp_samples))
            errors += int(np.count_nonzero(decisions != symbols))
        p = awgn_ser_oracle(cfg.alphabet_size, float(db_to_linear(esn0_db)))
        lo, hi = binomial_band(p, n_symbols)
        assert lo <= errors <= hi


class TestGenieBound:
    @pytest.mark.parametrize("esn0_db", [8.0, 11.0])
    def test_genie_matches_doppler_free_channel(self, esn0_db):
        point = _cell(7, CASE_2_T_START_S, "genie", esn0_db=esn0_db)
        p = awgn_ser_oracle(128, float(db_to_linear(esn0_db)))
        lo, hi = binomial_band(p, point.total)
        assert lo <= point.errors <= hi


class TestStrategyOrdering:
    @pytest.mark.parametrize("sf", [7, 10, 12])
    def test_case_1_point_estimates_beat_linear(self, ordering_cells, sf):
        linear = ordering_cells[("case1", sf, "linear")]
        assert _not_worse(ordering_cells[("case1", sf, "point")], linear)
        assert _not_worse(ordering_cells[("case1", sf, "midamble-point")], linear)

    def test_case_2_linear_beats_point_at_sf12(self, ordering_cells):
        point = ordering_cells[("case2", 12, "point")]
        linear = ordering_cells[("case2", 12, "linear")]
        assert linear.ser < point.ser

    @pytest.mark.parametrize("case, sf", [("case1", 7), ("case1", 10), ("case1", 12), ("case2", 12)])
    def test_midamble_point_stays_near_the_best(self, ordering_cells, case, sf):
        best_hi = min(ordering_cells[(case, sf, e)].ci_hi for e in ESTIMATORS)
        assert ordering_cells[(case, sf, "midamble-point")].ci_lo <= 2 * best_hi


class TestLdro:
    @pytest.mark.parametrize("estimator", ESTIMATORS)
    def test_ldro_not_worse_under_peak_doppler_rate(self, estimator):
        off = _cell(12, CASE_2_T_START_S, estimator)
        on = _cell(12, CASE_2_T_START_S, estimator, ldro=True)
        assert _not_worse(on, off)


class TestPayloadLength:
    def test_point_degrades_and_midamble_point_holds(self):
        small, large = 8 * 8, 51 * 8
        point_small = _cell(12, CASE_2_T_START_S, "point", payload_bits=small)
        point_large = _cell(12, CASE_2_T_START_S, "point", payload_bits=large)
        assert point_large.ci_lo > point_small.ci_hi

        midamble = [
            _cell(12, CASE_2_T_START_S, "midamble-point", payload_bits=bits)
            for bits in (small, 24 * 8, large)
        ]
        assert max(p.ci_lo for p in midamble) <= 2 * min(p.ci_hi for p in midamble)
