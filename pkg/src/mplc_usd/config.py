"""Run configuration: one JSON file, sections mirroring the module options."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .experiment import Geometry
from .mplc import WFMOptions


class ConfigError(ValueError):
    """Configuration failed validation; the message names the offending field."""


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class RunSection(_Section):
    dimensions: list[int] = [3]
    fidelities: list[float] = [0.5]
    branch: Literal["+", "-"] = "+"

    @field_validator("dimensions")
    @classmethod
    def _dims(cls, v):
        if not v:
            raise ValueError("at least one dimension is required")
        for d in v:
            if not 2 <= d <= 8:
                raise ValueError(f"dimension must lie in [2, 8], got {d}")
        return v

    @field_validator("fidelities")
    @classmethod
    def _fids(cls, v):
        if not v:
            raise ValueError("at least one fidelity is required")
        for f in v:
            if not 0.0 <= f < 1.0:
                raise ValueError(f"fidelity must lie in [0, 1), got {f}")
        return v


class GeometrySection(_Section):
    nx: int = Field(256, ge=2)
    ny: int = Field(256, ge=2)
    pitch: float = Field(8e-6, gt=0)
    wavelength: float = Field(633e-9, gt=0)
    n_planes: int = Field(4, ge=1)
    plane_spacing: float = Field(17e-3, gt=0)
    lead_in: float = Field(17e-3, gt=0)
    lead_out: float = Field(17e-3, gt=0)
    hg_waist: float = Field(Geometry.hg_waist, gt=0)
    spot_waist: float = Field(Geometry.spot_waist, gt=0)
    spot_radius: float | None = Field(None, gt=0)
    detector_factor: float = Field(1.5, gt=0)
    guard: int = Field(1, ge=1)

    @field_validator("nx", "ny")
    @classmethod
    def _even(cls, v):
        if v % 2:
            raise ValueError("pixel counts must be even")
        return v

    @model_validator(mode="after")
    def _fits(self):
        half = min(self.nx, self.ny) * self.pitch / 2
        if self.spot_radius is not None and self.spot_radius + self.spot_waist >= half:
            raise ValueError("spot circle does not fit inside the grid")
        return self

    def build(self) -> Geometry:
        return Geometry(**self.model_dump())


class WFMSection(_Section):
    max_sweeps: int = Field(300, ge=1)
    tolerance: float = Field(1e-5, gt=0)
    init: Literal["flat", "random"] = "flat"
    seed: int = 0
    rule: Literal["A", "B"] = "A"
    step: float = Field(0.2, gt=0)

    def build(self) -> WFMOptions:
        return WFMOptions(**self.model_dump())


class ImageSection(_Section):
    pixels_are: Literal["amplitude", "intensity"] = "amplitude"
    scale: int = Field(1, ge=1)
    fidelity_tolerance: float = Field(0.05, gt=0)


class RunConfig(_Section):
    run: RunSection = RunSection()
    geometry: GeometrySection = GeometrySection()
    wfm: WFMSection = WFMSection()
    images: ImageSection = ImageSection()
    out: str = "mplc_run"
    strict: bool = False
    jobs: int = Field(1, ge=1)


def _format(err: ValidationError) -> str:
    lines = []
    for e in err.errors():
        path = ".".join(str(p) for p in e["loc"]) or "<root>"
        msg = e["msg"].removeprefix("Value error, ")
        lines.append(f"{path}: {msg}")
    return "; ".join(lines)


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Read a JSON config (optional) and apply dotted-path ``overrides``
    such as ``{"run.dimensions": [3], "wfm.seed": 1}``."""
    data: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except OSError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        node = data
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = val
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format(exc)) from exc
