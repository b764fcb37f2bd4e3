import itertools
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Dict, List, Optional, Tuple

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator

from lora_phy.estimators import EstimateReport
from ser_sim.export import result_row, results_frame
from ser_sim.runner import run_cell
from ser_sim.scenario import ScenarioConfig

logger = logging.getLogger(__name__)

MODEM_AXES = ("sf", "bandwidth_hz", "ldro", "oversampling")
SCENARIO_AXES = (
    "estimator",
    "esn0_db",
    "snr_db",
    "t_start_s",
    "payload_bits",
    "application",
    "cr",
    "n_up",
    "n_dw",
    "n_int",
    "auto_midamble_k",
)
SWEEP_AXES = MODEM_AXES + SCENARIO_AXES


class SweepSpec(BaseModel):
    """Cartesian grid of scenarios around a base scenario."""

    model_config = ConfigDict(extra="forbid")

    base: ScenarioConfig = Field(description="Values of every axis not swept")
    axes: Dict[str, List[Any]] = Field(
        default_factory=dict, description="Axis name to the values it takes"
    )
    workers: int = Field(default=1, ge=1, le=64, description="Concurrent grid cells")
    keep_reports: int = Field(
        default=0, ge=0, description="Estimate reports kept per cell, first trials"
    )

    @field_validator("axes")
    @classmethod
    def _known_axes(cls, axes):
        for name, values in axes.items():
            if name not in SWEEP_AXES:
                raise ValueError(
                    f"unknown sweep axis {name!r}, choose from {list(SWEEP_AXES)}"
                )
            if not values:
                raise ValueError(f"sweep axis {name!r} has no values")
        if "esn0_db" in axes and "snr_db" in axes:
            raise ValueError("sweep either esn0_db or snr_db, not both")
        return axes


class SweepResult(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    table: pd.DataFrame
    reports: Dict[int, List[EstimateReport]] = Field(default_factory=dict)
    wall_time_s: float = 0.0


def scenario_at(base: ScenarioConfig, coords: Dict[str, Any]) -> ScenarioConfig:
    """Base scenario with the grid coordinates substituted."""
    data = base.model_dump()
    for name, value in coords.items():
        if name in MODEM_AXES:
            data["modem"][name] = value
        else:
            data[name] = value
    if "esn0_db" in coords:
        data.update(snr_db=None, noiseless=False)
    if "snr_db" in coords:
        data.update(esn0_db=None, noiseless=False)
    if "application" in coords:
        data["payload_bits"] = None
    return ScenarioConfig.model_validate(data)


def grid_cells(spec: SweepSpec) -> List[Dict[str, Any]]:
    names = list(spec.axes)
    return [
        dict(zip(names, values))
        for values in itertools.product(*(spec.axes[n] for n in names))
    ]


def _evaluate(index: int, total: int, coords, spec: SweepSpec):
    scenario = None
    try:
        scenario = scenario_at(spec.base, coords)
        point, reports = run_cell(scenario, keep_reports=spec.keep_reports)
    except Exception as e:
        logger.warning(f"Cell {index + 1}/{total} {coords} failed: {e}")
        return result_row(scenario, coords, None, error=str(e)), []
    logger.info(
        f"Cell {index + 1}/{total} {coords}: SER={point.ser:.3e} "
        f"({point.errors}/{point.total}) in {point.wall_time_s:.1f} s"
    )
    return result_row(scenario, coords, point), reports


def run_sweep(spec: SweepSpec) -> SweepResult:
    """
    Evaluate every grid cell. Cells are independent, so they run concurrently
    and the table is assembled in grid order afterwards.
    """
    cells = grid_cells(spec)
    logger.info(f"Running sweep over {len(cells)} cells with {spec.workers} workers")
    started = time.perf_counter()
    outcomes: List[Optional[Tuple[dict, list]]] = [None] * len(cells)
    with ThreadPoolExecutor(max_workers=spec.workers) as executor:
        futures = {
            executor.submit(_evaluate, i, len(cells), coords, spec): i
            for i, coords in enumerate(cells)
        }
        for future, index in futures.items():
            outcomes[index] = future.result()

    rows = [row for row, _ in outcomes]
    reports = {i: reps for i, (_, reps) in enumerate(outcomes) if reps}
    table = results_frame(rows)
    wall_time = time.perf_counter() - started
    failed = int(table["error"].notna().sum())
    if failed:
        logger.warning(f"{failed} of {len(cells)} cells failed")
    logger.info(f"Sweep finished in {wall_time:.1f} s")
    return SweepResult(table=table, reports=reports, wall_time_s=wall_time)
