# src/data/loader.py

import hashlib
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Sequence, Union

import toml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..types.errors import ConfigError

logger = logging.getLogger(__name__)

Expr = Union[float, str]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DomainConfig(_Section):
    x_lo: float = 0.0
    x_hi: float = 1.0
    n_x: int = 64


class TimeConfig(_Section):
    period: float = 1.0
    n_t: int = 200


class DiffusionConfig(_Section):
    kappa: List[float]
    a: Optional[List[Expr]] = None

    @field_validator("kappa")
    @classmethod
    def _positive(cls, value):
        if not value:
            raise ValueError("at least one diffusion rate is required")
        if any(k <= 0 for k in value):
            raise ValueError("non-positive diffusion")
        return value


class BoundaryConfig(_Section):
    kind: Literal["dirichlet", "neumann", "robin"] = "neumann"
    b: Optional[List[Expr]] = None

    @model_validator(mode="after")
    def _robin_needs_b(self):
        if self.kind == "robin" and not self.b:
            raise ValueError("robin boundary needs b")
        return self


class ReactionConfig(_Section):
    form: Literal["combined", "split"] = "combined"
    entries: Optional[List[List[Expr]]] = None
    V: Optional[List[List[Expr]]] = None
    F: Optional[List[List[Expr]]] = None

    @model_validator(mode="after")
    def _form_matches(self):
        if self.form == "combined" and self.entries is None:
            raise ValueError("combined form needs entries")
        if self.form == "split" and (self.V is None or self.F is None):
            raise ValueError("split form needs V and F")
        return self


class NonlinearConfig(_Section):
    G: List[str]
    v_lower: List[Expr]
    v_upper: List[float]
    h: Optional[float] = None


class ZikaConfig(_Section):
    H_u: Expr = 1.0
    beta: Expr
    gamma: Expr
    mu1: Expr
    mu2: Expr
    sigma1: Expr
    sigma2: Expr
    delta1: Expr = 1.0
    delta2: Expr = 1.0
    kappa1: float = 1.0
    kappa2: float = 1.0

    @field_validator("kappa1", "kappa2")
    @classmethod
    def _positive(cls, value):
        if value <= 0:
            raise ValueError("non-positive diffusion")
        return value


class ModelConfig(_Section):
    domain: DomainConfig = Field(default_factory=DomainConfig)
    time: TimeConfig = Field(default_factory=TimeConfig)
    diffusion: Optional[DiffusionConfig] = None
    boundary: BoundaryConfig = Field(default_factory=BoundaryConfig)
    reaction: Optional[ReactionConfig] = None
    nonlinear: Optional[NonlinearConfig] = None
    zika: Optional[ZikaConfig] = None
    label: str = ""


def _parse_value(text: str) -> Any:
    try:
        return toml.loads(f"v = {text}")["v"]
    except toml.TomlDecodeError:
        return text


def apply_overrides(raw: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """Apply ``key=value`` overrides with dotted keys; values are read as TOML."""
    raw = json.loads(json.dumps(raw))
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override '{item}' is not of the form key=value")
        key, value = item.split("=", 1)
        parts = key.strip().split(".")
        node = raw
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError("cannot override inside a non-table value", key=key)
        node[parts[-1]] = _parse_value(value.strip())
        logger.debug("override %s = %r", key, node[parts[-1]])
    return raw


def load_raw(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        return toml.load(path)
    except toml.TomlDecodeError as e:
        raise ConfigError(f"cannot parse {path}: {e}") from e


def parse_config(raw: Dict[str, Any]) -> ModelConfig:
    try:
        return ModelConfig.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        key = ".".join(str(p) for p in first["loc"])
        message = first["msg"].removeprefix("Value error, ")
        raise ConfigError(message, key=key) from e


def compute_config_hash(raw: Dict[str, Any]) -> str:
    canonical = json.dumps(raw, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def load_config(path: Union[str, Path], overrides: Sequence[str] = ()) -> tuple:
    """Read, override and validate a config file; returns (ModelConfig, config hash)."""
    raw = apply_overrides(load_raw(path), overrides)
    config = parse_config(raw)
    logger.info("loaded config %s", path)
    return config, compute_config_hash(raw)
