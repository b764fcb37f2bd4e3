import logging
import os
import tomllib
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from ser_sim.sweep import MODEM_AXES, SWEEP_AXES

logger = logging.getLogger(__name__)

PRESET_DIR = Path(__file__).resolve().parents[2] / "config" / "scenarios"
OUT_DIR_ENV = "LORA_DTS_OUT_DIR"
DEFAULT_OUT_DIR = "results"

Emit = Literal["csv", "json", "svg"]


class ConfigError(Exception):
    """Invalid or unreadable run configuration."""


class OutputSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    out_dir: Optional[str] = Field(
        default=None, description=f"Result directory; defaults to ${OUT_DIR_ENV}"
    )
    emit: List[Emit] = Field(default=["csv"], description="Files to write")
    dump_estimates: bool = Field(
        default=False, description="Write estimator reports as JSON lines"
    )
    dump_trials: int = Field(
        default=10, ge=1, description="Trials per cell whose reports are dumped"
    )


class RunManifest(BaseModel):
    """
    Parsed run configuration.

    `scenario` holds flat scenario keys (modem keys included) and is validated
    into a ScenarioConfig later, `sweep` maps axis names to value lists.
    """

    model_config = ConfigDict(extra="forbid")

    name: Optional[str] = Field(default=None, description="Label used in file names")
    workers: int = Field(default=1, ge=1, le=64, description="Concurrent grid cells")
    scenario: Dict[str, Any] = Field(default_factory=dict)
    sweep: Dict[str, List[Any]] = Field(default_factory=dict)
    output: OutputSection = Field(default_factory=OutputSection)

    @field_validator("sweep")
    @classmethod
    def _known_axes(cls, sweep):
        unknown = [name for name in sweep if name not in SWEEP_AXES]
        if unknown:
            raise ValueError(f"unknown sweep axes {unknown}, choose from {list(SWEEP_AXES)}")
        return sweep

    def scenario_data(self) -> Dict[str, Any]:
        """Scenario keys regrouped into the nested ScenarioConfig shape."""
        data = {k: v for k, v in self.scenario.items() if k not in MODEM_AXES}
        modem = {k: v for k, v in self.scenario.items() if k in MODEM_AXES}
        if modem:
            data["modem"] = modem
        return data

    def resolved_out_dir(self) -> str:
        out_dir = self.output.out_dir or os.getenv(OUT_DIR_ENV, DEFAULT_OUT_DIR)
        return os.path.expanduser(out_dir)


def bundled_presets() -> List[str]:
    return sorted(p.stem for p in PRESET_DIR.glob("*.toml"))


def resolve_config_path(name_or_path: str) -> Path:
    """A file path, or the stem of a bundled preset."""
    path = Path(name_or_path).expanduser()
    if path.is_file():
        return path
    preset = PRESET_DIR / f"{Path(name_or_path).stem}.toml"
    if preset.is_file():
        logger.info(f"Using bundled preset {preset}")
        return preset
    raise ConfigError(
        f"Could not locate config {name_or_path}; bundled presets are "
        f"{', '.join(bundled_presets())}"
    )


def format_validation_error(error: ValidationError, source: str) -> str:
    lines = [f"{source}: {error.error_count()} configuration error(s)"]
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"  {location}: {item['msg']}")
    return "\n".join(lines)


def load_manifest(name_or_path: str) -> RunManifest:
    path = resolve_config_path(name_or_path)
    try:
        with open(path, "rb") as f:
            raw = tomllib.load(f)
    except tomllib.TOMLDecodeError as e:
        # the decode message carries line and column
        raise ConfigError(f"{path}: {e}") from e
    try:
        manifest = RunManifest.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(format_validation_error(e, str(path))) from e
    if manifest.name is None:
        manifest = manifest.model_copy(update={"name": path.stem})
    return manifest
