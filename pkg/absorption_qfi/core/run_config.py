"""
Run configuration for absorption-qfi.
This module provides the pydantic model of a run (model, access, estimand, grid, dispersion, phases,
loss, quadrature and QFI settings), YAML loading with `section.key=value` overrides and the
configuration hash written into every CSV header.
"""

import copy
import hashlib
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Union

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from absorption_qfi.core.configurations import DEFAULT_LENGTH_NM, MIN_QUADRATURE_POINTS
from absorption_qfi.core.numerics import DEFAULT_ABS_STEP, DEFAULT_REL_STEP
from absorption_qfi.core.qfi import Access, Estimand
from absorption_qfi.core.scenarios import Model, QfiMethod, Quantity, Scenario
from absorption_qfi.core.spectral import DispersionProfile
from absorption_qfi.error_handling.exceptions import ConfigurationError

logger = logging.getLogger(__name__)

ETA_MAX = 0.99
ETA_MIN = 0.001
HASHED_SECTIONS = ("run", "grid", "spectral", "phases", "loss", "dl", "qfi")

ACCESS_NAMES = {"all": Access.ALL_MODES, "ic_two_mode": Access.IC_TWO_MODE, "single_mode": Access.SINGLE_MODE}
ESTIMAND_NAMES = {"kappa": Estimand.KAPPA_I, "eta": Estimand.ETA_I}


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class RunSection(_Section):
    model: Literal["su11", "ic", "dl"] = "su11"
    access: Literal["all", "ic_two_mode", "single_mode"] = "all"
    estimand: Literal["kappa", "eta"] = "kappa"
    quantity: Literal["qfi", "inverse_error", "inverse_ratio"] = "qfi"
    seed: int = 20250101


class GridSection(_Section):
    length_nm: float = Field(DEFAULT_LENGTH_NM, gt=0)
    gains: List[float] = Field(default_factory=lambda: [0.1, 1.0, 10.0])
    kappa_min: Optional[float] = Field(None, gt=0)
    kappa_max: Optional[float] = Field(None, gt=0)
    count: int = Field(200, ge=2)

    @field_validator("gains")
    @classmethod
    def check_gains(cls, v: List[float]) -> List[float]:
        if not v:
            raise ValueError("at least one gain is required")
        if any(g < 0 for g in v):
            raise ValueError("gains must be non-negative")
        return v

    @model_validator(mode="after")
    def fill_kappa_range(self) -> "GridSection":
        if self.kappa_min is None:
            self.kappa_min = -math.log(ETA_MAX) / self.length_nm
        if self.kappa_max is None:
            self.kappa_max = -math.log(ETA_MIN) / self.length_nm
        if not self.kappa_min < self.kappa_max:
            raise ValueError(f"kappa_min ({self.kappa_min}) must be below kappa_max ({self.kappa_max})")
        return self

    def kappa_values(self) -> np.ndarray:
        """Log-spaced decay rates (nm^-1)."""
        return np.geomspace(self.kappa_min, self.kappa_max, self.count)


class SpectralSection(_Section):
    taylor_s: List[float] = Field(default_factory=list)
    taylor_i: List[float] = Field(default_factory=list)
    sigma_offset: float = 0.0
    omega: Union[float, Literal["phase_matched"]] = 0.0

    @field_validator("taylor_s", "taylor_i")
    @classmethod
    def check_constant_term(cls, v: List[float]) -> List[float]:
        if v and v[0] != 0.0:
            raise ValueError("the constant Taylor coefficient must be zero")
        return v

    def profile(self) -> DispersionProfile:
        return DispersionProfile(tuple(self.taylor_s), tuple(self.taylor_i), self.sigma_offset)


class PhasesSection(_Section):
    phi_s: float = 0.0
    phi_i: float = 0.0
    phi_p2: Union[float, Literal["auto"]] = "auto"


class LossSection(_Section):
    eta_s: float = Field(1.0, ge=0.0, le=1.0)


class DLSection(_Section):
    kappa_s: float = Field(0.0, ge=0.0)
    quadrature_points: int = Field(MIN_QUADRATURE_POINTS, ge=MIN_QUADRATURE_POINTS)


class QfiSection(_Section):
    method: Literal["auto", "analytic", "numeric"] = "auto"
    fd_rel_step: float = Field(DEFAULT_REL_STEP, gt=0)
    fd_abs_step: float = Field(DEFAULT_ABS_STEP, gt=0)


class SweepSection(_Section):
    workers: int = Field(1, ge=0, description="0 uses every available core")
    plot: bool = True


class CacheSection(_Section):
    enabled: bool = True
    max_size: int = Field(64, ge=1)


class LoggingSection(BaseModel):
    model_config = ConfigDict(extra="allow")

    level: str = "INFO"
    format: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    handlers: List[Dict[str, Any]] = Field(default_factory=list)


class RunConfig(_Section):
    """Validated configuration of one run."""

    run: RunSection = Field(default_factory=RunSection)
    grid: GridSection = Field(default_factory=GridSection)
    spectral: SpectralSection = Field(default_factory=SpectralSection)
    phases: PhasesSection = Field(default_factory=PhasesSection)
    loss: LossSection = Field(default_factory=LossSection)
    dl: DLSection = Field(default_factory=DLSection)
    qfi: QfiSection = Field(default_factory=QfiSection)
    sweep: SweepSection = Field(default_factory=SweepSection)
    cache: CacheSection = Field(default_factory=CacheSection)
    logging: LoggingSection = Field(default_factory=LoggingSection)

    @model_validator(mode="after")
    def check_combination(self) -> "RunConfig":
        if self.run.access == "ic_two_mode" and self.run.model != "ic":
            raise ValueError("access 'ic_two_mode' requires model 'ic'")
        if self.run.quantity == "inverse_error" and self.run.model == "ic":
            raise ValueError("quantity 'inverse_error' is defined for models 'su11' and 'dl' only")
        if self.run.quantity == "inverse_ratio" and self.run.access != "all":
            raise ValueError("quantity 'inverse_ratio' requires access 'all'")
        return self

    @property
    def access(self) -> Access:
        return ACCESS_NAMES[self.run.access]

    @property
    def estimand(self) -> Estimand:
        return ESTIMAND_NAMES[self.run.estimand]

    def config_hash(self) -> str:
        """First 16 hex digits of the SHA-256 of the canonical JSON of the result-bearing sections."""
        content = self.model_dump(mode="json", include=set(HASHED_SECTIONS))
        payload = json.dumps(content, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def to_scenario(self) -> Scenario:
        spectral = self.spectral
        return Scenario(
            model=Model(self.run.model),
            access=self.access,
            estimand=self.estimand,
            quantity=Quantity(self.run.quantity),
            length=self.grid.length_nm,
            profile=spectral.profile(),
            omega=None if spectral.omega == "phase_matched" else float(spectral.omega),
            eta_s=self.loss.eta_s,
            phi_s=self.phases.phi_s,
            phi_i=self.phases.phi_i,
            phi_p2=None if self.phases.phi_p2 == "auto" else float(self.phases.phi_p2),
            kappa_s=self.dl.kappa_s,
            quadrature_points=self.dl.quadrature_points,
            method=QfiMethod(self.qfi.method),
            fd_rel_step=self.qfi.fd_rel_step,
            fd_abs_step=self.qfi.fd_abs_step,
        )

    def derive(self, updates: Dict[str, Any]) -> "RunConfig":
        """A copy with dotted `section.key` updates applied and revalidated."""
        raw = self.model_dump(mode="json")
        for dotted, value in updates.items():
            _assign(raw, dotted, value)
        return validate_config(raw)


def _assign(raw: Dict[str, Any], dotted: str, value: Any) -> None:
    parts = dotted.split(".")
    if len(parts) != 2 or not all(parts):
        raise ConfigurationError(f"Override key must look like section.key, got '{dotted}'")
    section, key = parts
    target = raw.setdefault(section, {})
    if not isinstance(target, dict):
        raise ConfigurationError(f"Section '{section}' is not a mapping")
    target[key] = value


def parse_override(text: str) -> Dict[str, Any]:
    """Parse `section.key=value`; the value is typed with YAML rules."""
    if "=" not in text:
        raise ConfigurationError(f"Override must look like section.key=value, got '{text}'")
    key, _, value = text.partition("=")
    try:
        typed = yaml.safe_load(value) if value.strip() else None
    except yaml.YAMLError as e:
        raise ConfigurationError(f"Cannot parse value of override '{text}': {e}", original_exception=e)
    return {key.strip(): typed}


def validate_config(raw: Dict[str, Any]) -> RunConfig:
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        problems = []
        for error in e.errors():
            location = ".".join(str(part) for part in error["loc"]) or "<root>"
            problems.append(f"{location}: {error['msg']}")
        raise ConfigurationError("Invalid configuration: " + "; ".join(problems), original_exception=e)


def load_raw_config(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"Configuration file not found: {path}")
    try:
        with open(path, "r") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark is not None else ""
        raise ConfigurationError(f"Invalid YAML in {path}{where}: {e}", original_exception=e)
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"Configuration root in {path} must be a mapping")
    return data


def load_config(path: Optional[Union[str, Path]] = None, overrides: Sequence[str] = ()) -> RunConfig:
    """
    Load, override and validate a run configuration.

    Args:
        path: YAML file; None starts from the defaults
        overrides: `section.key=value` strings applied before validation

    Returns:
        RunConfig: The validated configuration

    Raises:
        ConfigurationError: On unreadable files, YAML errors or invalid fields
    """
    raw = copy.deepcopy(load_raw_config(path)) if path is not None else {}
    for text in overrides:
        for dotted, value in parse_override(text).items():
            _assign(raw, dotted, value)
    config = validate_config(raw)
    logger.debug(f"Loaded configuration {config.config_hash()} from {path or '<defaults>'}")
    return config
