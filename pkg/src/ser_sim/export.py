import json
import logging
from enum import Enum
from typing import Any, Dict, List, Optional

import pandas as pd

from lora_phy.estimators import EstimateReport
from ser_sim.scenario import ScenarioConfig
from ser_sim.stats import SerPoint

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

# CSV schema, in column order
RESULT_COLUMNS = [
    "sf",
    "bandwidth_hz",
    "ldro",
    "oversampling",
    "estimator",
    "profile",
    "t_start_s",
    "esn0_db",
    "snr_db",
    "payload_bits",
    "cr",
    "n_up",
    "n_dw",
    "n_int",
    "n_data",
    "n_sym",
    "trials",
    "errors",
    "total",
    "ser",
    "ci_lo",
    "ci_hi",
    "seed",
    "cell_key",
    "error",
]
# wall time differs between runs, so it only goes to JSON
TABLE_COLUMNS = RESULT_COLUMNS + ["wall_time_s"]

_INT_COLUMNS = [
    "sf",
    "oversampling",
    "payload_bits",
    "cr",
    "n_up",
    "n_dw",
    "n_int",
    "n_data",
    "n_sym",
    "trials",
    "errors",
    "total",
    "seed",
]
_FLOAT_COLUMNS = [
    "bandwidth_hz",
    "t_start_s",
    "esn0_db",
    "snr_db",
    "ser",
    "ci_lo",
    "ci_hi",
    "wall_time_s",
]
_STRING_COLUMNS = ["estimator", "profile", "cell_key", "error"]


def result_row(
    scenario: Optional[ScenarioConfig],
    coords: Dict[str, Any],
    point: Optional[SerPoint],
    error: Optional[str] = None,
) -> Dict[str, Any]:
    """Flatten one grid cell into a table row."""
    row: Dict[str, Any] = {column: None for column in TABLE_COLUMNS}
    row.update({k: v for k, v in coords.items() if k in row})
    if scenario is not None:
        layout = scenario.layout()
        modem = scenario.modem
        row.update(
            sf=modem.sf,
            bandwidth_hz=modem.bandwidth_hz,
            ldro=modem.ldro,
            oversampling=modem.oversampling,
            estimator=scenario.estimator.value,
            profile=scenario.profile.kind,
            t_start_s=scenario.t_start_s,
            esn0_db=scenario.channel_esn0_db,
            snr_db=scenario.channel_snr_db,
            payload_bits=scenario.payload_bits,
            cr=scenario.cr,
            n_up=layout.n_up,
            n_dw=layout.n_dw,
            n_int=layout.n_int,
            n_data=layout.n_data,
            n_sym=layout.n_sym,
            trials=scenario.trials,
            seed=scenario.master_seed,
            cell_key=scenario.cell_key()[:16],
        )
    if point is not None:
        row.update(
            errors=point.errors,
            total=point.total,
            ser=point.ser,
            ci_lo=point.ci_lo,
            ci_hi=point.ci_hi,
            wall_time_s=point.wall_time_s,
        )
    row["error"] = error
    if isinstance(row["estimator"], Enum):
        row["estimator"] = row["estimator"].value
    return row


def results_frame(rows: List[Dict[str, Any]]) -> pd.DataFrame:
    """Rows as a DataFrame with the schema's column order and dtypes."""
    table = pd.DataFrame(rows, columns=TABLE_COLUMNS)
    return _apply_dtypes(table)


def _apply_dtypes(table: pd.DataFrame) -> pd.DataFrame:
    table = table.copy()
    for column in _INT_COLUMNS:
        if column in table:
            table[column] = pd.to_numeric(table[column]).astype("Int64")
    for column in _FLOAT_COLUMNS:
        if column in table:
            table[column] = pd.to_numeric(table[column]).astype("float64")
    for column in _STRING_COLUMNS:
        if column in table:
            table[column] = table[column].astype("string")
    if "ldro" in table:
        table["ldro"] = table["ldro"].astype("boolean")
    return table


def write_results_csv(table: pd.DataFrame, filepath="results.csv"):
    """Header row, comma separated, '.' decimal, UTF-8, LF line endings."""
    table[RESULT_COLUMNS].to_csv(
        filepath, index=False, encoding="utf-8", lineterminator="\n"
    )
    logger.info(f"Written {len(table)} result rows to {filepath}")


def read_results_csv(filepath) -> pd.DataFrame:
    # hex keys such as "1e05..." must not be parsed as numbers
    table = pd.read_csv(
        filepath, encoding="utf-8", dtype={c: str for c in _STRING_COLUMNS}
    )
    if list(table.columns) != RESULT_COLUMNS:
        raise ValueError(
            f"{filepath} does not follow the result schema, columns are "
            f"{list(table.columns)}"
        )
    return _apply_dtypes(table)


def write_results_json(table: pd.DataFrame, filepath="results.json", metadata=None):
    records = json.loads(table[TABLE_COLUMNS].to_json(orient="records"))
    document = {
        "schema_version": SCHEMA_VERSION,
        "columns": TABLE_COLUMNS,
        "metadata": metadata or {},
        "rows": records,
    }
    with open(filepath, "w", encoding="utf-8") as f:
        json.dump(document, f, indent=2)
    logger.info(f"Written {len(records)} result rows to {filepath}")


def write_estimates_jsonl(
    reports: Dict[int, List[EstimateReport]], filepath="estimates.jsonl"
):
    """One line per kept trial: grid row index, trial index and its report."""
    n_written = 0
    with open(filepath, "w", encoding="utf-8", newline="\n") as f:
        for row_index in sorted(reports):
            for trial_index, report in enumerate(reports[row_index]):
                record = {
                    "row": row_index,
                    "trial": trial_index,
                    "report": report.model_dump(mode="json"),
                }
                f.write(json.dumps(record) + "\n")
                n_written += 1
    logger.info(f"Written {n_written} estimate reports to {filepath}")
