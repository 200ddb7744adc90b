"""
Experiment configuration.

All models reject unknown keys. ``load_config`` layers defaults, an optional
file (TOML, JSON or YAML) and dotted command-line overrides, in that order.
"""

import json
import math
import sys
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from cocarry.constants import BLOCK_SIZE, PAYLOADS_KG, REPETITIONS
from cocarry.container import canonical_json, sha256_hex
from cocarry.exceptions import ConfigError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

Range = Tuple[float, float]
RESOLVED_CONFIG_NAME = "config.resolved.json"


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


def _ordered(value: Range) -> Range:
    low, high = value
    if not low <= high:
        raise ValueError(f"range must be well ordered, got [{low}, {high}]")
    return value


class DyadConfig(_Strict):
    payloads: List[float] = Field(default_factory=lambda: list(PAYLOADS_KG))
    repetitions: int = Field(REPETITIONS, ge=1)
    stiffness: float = Field(500.0, gt=0, description="handle stiffness K, N/m")
    damping: float = Field(50.0, ge=0, description="handle damping D, N*s/m")
    rot_stiffness: float = Field(50.0, gt=0, description="N*m/rad")
    rot_damping: float = Field(5.0, ge=0, description="N*m*s/rad")
    admittance: float = Field(0.02, gt=0, description="follower gain A, (m/s)/N")
    rot_admittance: float = Field(0.2, gt=0, description="(rad/s)/(N*m)")
    object_length: float = Field(1.0, gt=0, description="handle-to-handle distance, m")
    wrench_rate: float = Field(1000.0, gt=0)
    frame_rate: float = Field(30.0, gt=0)
    translation_amplitude: float = Field(0.5, gt=0, description="m")
    translation_duration: float = Field(3.0, gt=0, description="s")
    rotation_amplitude: float = Field(math.pi / 4, gt=0, description="rad")
    rotation_duration: float = Field(4.0, gt=0, description="s")
    rest_before: float = Field(0.5, ge=0, description="s")
    rest_after: float = Field(1.0, ge=0, description="s")
    variability: float = Field(0.1, ge=0, lt=1, description="relative amplitude/duration jitter per trial")
    noise_force: float = Field(0.1, ge=0, description="sensor sigma, N")
    noise_torque: float = Field(0.01, ge=0, description="sensor sigma, N*m")
    instability_bound: float = Field(100.0, gt=0, description="abort when any pose coordinate exceeds this")

    @property
    def block_ticks(self) -> int:
        return int(round(self.wrench_rate / self.frame_rate))

    @field_validator("payloads")
    @classmethod
    def _payloads_non_negative(cls, value: List[float]) -> List[float]:
        if not value or any(p < 0 for p in value):
            raise ValueError("payloads must be a non-empty list of non-negative masses")
        return value


class IntentConfig(_Strict):
    diffusion_steps: int = Field(100, ge=2)
    levels: int = Field(4, ge=1, le=6)
    width: int = Field(128, ge=2)
    blocks: int = Field(4, ge=1)
    sample_steps: int = Field(20, ge=1)
    lr: float = Field(1e-3, gt=0)
    batch_size: int = Field(32, ge=1)
    epochs: int = Field(30, ge=1)
    kl_weight: float = Field(0.01, ge=0)
    wavelet: str = "haar"
    cross_block_attention: bool = False
    share_level_projections: bool = True
    ff_multiplier: int = Field(2, ge=1)
    window_stride: int = Field(4, ge=1, description="frames between consecutive training windows")
    holdout_fraction: float = Field(0.2, ge=0, lt=1)

    @field_validator("width")
    @classmethod
    def _even_width(cls, value: int) -> int:
        if value % 2:
            raise ValueError("width must be even for the sinusoidal embedding")
        return value

    @model_validator(mode="after")
    def _sampling_fits(self) -> "IntentConfig":
        if self.sample_steps > self.diffusion_steps:
            raise ValueError("sample_steps cannot exceed diffusion_steps")
        return self


class PPOConfig(_Strict):
    clip: float = Field(0.2, gt=0, lt=1)
    gamma: float = Field(0.998, gt=0, le=1)
    lam: float = Field(0.95, ge=0, le=1)
    value_coef: float = Field(1.0, ge=0)
    entropy_coef: float = Field(0.0, ge=0)
    lr: float = Field(1e-3, gt=0)
    max_grad_norm: float = Field(1.0, gt=0)
    kl_target: float = Field(0.01, gt=0)
    value_clip: bool = True
    normalize_advantages: bool = True
    num_envs: int = Field(64, ge=1)
    rollout_length: int = Field(256, ge=1)
    epochs: int = Field(5, ge=1)
    minibatches: int = Field(4, ge=1)
    updates: int = Field(150, ge=1)
    hidden: int = Field(64, ge=1)
    hidden_layers: int = Field(3, ge=1)
    init_log_std: float = -0.5
    episode_length_s: float = Field(20.0, gt=0)
    reward_sigma: float = Field(0.25, gt=0)
    eval_episodes: int = Field(100, ge=1)
    eval_payload: float = 12.0


class RandomizationConfig(_Strict):
    friction_range: Range = (0.1, 1.25)
    added_mass_range: Range = (-1.0, 3.0)
    payload_force_range: Range = (-3.0, 15.0)
    push_interval_s: float = Field(5.0, gt=0)
    max_push_velocity: float = Field(1.5, ge=0)
    command_lin_range: float = Field(0.8, ge=0)
    command_yaw_range: float = Field(0.5, ge=0)
    randomize_payload: bool = True

    @field_validator("friction_range", "added_mass_range", "payload_force_range")
    @classmethod
    def _well_ordered(cls, value: Range) -> Range:
        return _ordered(value)


class MetricsConfig(_Strict):
    start_fraction: float = Field(0.05, gt=0, lt=1)
    end_fraction: float = Field(0.95, gt=0, lt=1)
    dwell_s: float = Field(0.5, ge=0)
    strict_end: bool = True


class ExperimentConfig(_Strict):
    seed: int = 0
    output_dir: str = "runs"
    dyad: DyadConfig = Field(default_factory=DyadConfig)
    intent: IntentConfig = Field(default_factory=IntentConfig)
    ppo: PPOConfig = Field(default_factory=PPOConfig)
    randomization: RandomizationConfig = Field(default_factory=RandomizationConfig)
    metrics: MetricsConfig = Field(default_factory=MetricsConfig)

    @model_validator(mode="after")
    def _frame_block_matches_window(self) -> "ExperimentConfig":
        if self.dyad.block_ticks != BLOCK_SIZE:
            raise ValueError(
                f"wrench_rate / frame_rate rounds to {self.dyad.block_ticks}, expected {BLOCK_SIZE}"
            )
        return self


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"Cannot read config file: {exc.strerror}", context={"path": str(path)}) from None
    suffix = path.suffix.lower()
    try:
        if suffix == ".toml":
            data = tomllib.loads(text)
        elif suffix == ".json":
            data = json.loads(text) if text.strip() else {}
        elif suffix in (".yaml", ".yml"):
            data = yaml.safe_load(text)
        else:
            raise ConfigError(
                f"Unsupported config format '{suffix}'",
                context={"path": str(path)},
                suggestions=["Use a .toml, .json, .yaml or .yml file"],
            )
    except (tomllib.TOMLDecodeError, json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"Malformed config file: {exc}", context={"path": str(path)}) from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError("Config file must hold a key tree at top level", context={"path": str(path)})
    return data


def parse_overrides(args: Sequence[str]) -> List[Tuple[str, Any]]:
    """Accept ``key=value``, ``--key=value`` and ``--key value`` forms."""
    pairs: List[Tuple[str, Any]] = []
    items = list(args)
    i = 0
    while i < len(items):
        item = items[i]
        token = item[2:] if item.startswith("--") else item
        if "=" in token:
            key, raw = token.split("=", 1)
        elif item.startswith("--") and i + 1 < len(items):
            key, raw = token, items[i + 1]
            i += 1
        else:
            raise ConfigError(
                f"Override '{item}' has no value",
                key=token,
                suggestions=["Write overrides as key=value or --key value"],
            )
        if not key:
            raise ConfigError(f"Override '{item}' has an empty key")
        pairs.append((key, _parse_value(raw)))
        i += 1
    return pairs


def _parse_value(raw: str) -> Any:
    try:
        return yaml.safe_load(raw)
    except yaml.YAMLError:
        return raw


def _set_dotted(tree: Dict[str, Any], key: str, value: Any) -> None:
    node = tree
    parts = key.split(".")
    for part in parts[:-1]:
        child = node.setdefault(part, {})
        if not isinstance(child, dict):
            raise ConfigError(f"Cannot set '{key}': '{part}' is not a section", key=key)
        node = child
    node[parts[-1]] = value


def _error_key(error: Dict[str, Any]) -> str:
    return ".".join(str(p) for p in error.get("loc", ()))


def validate_config(data: Dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        key = _error_key(first)
        if first.get("type") == "extra_forbidden":
            raise ConfigError(
                f"Unknown configuration key '{key}'",
                key=key,
                suggestions=["Compare with config.resolved.json written next to any run"],
            ) from None
        raise ConfigError(
            f"Invalid value for '{key}': {first.get('msg')}",
            key=key or None,
            context={"errors": len(exc.errors())},
        ) from None


def load_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Iterable[str] = (),
    **fields: Any,
) -> ExperimentConfig:
    """Resolve defaults <- file <- overrides; ``fields`` (e.g. seed) apply last."""
    data: Dict[str, Any] = read_config_file(path) if path else {}
    for key, value in parse_overrides(list(overrides)):
        _set_dotted(data, key, value)
    for key, value in fields.items():
        if value is not None:
            _set_dotted(data, key, value)
    return validate_config(data)


def config_dict(config: ExperimentConfig) -> Dict[str, Any]:
    return config.model_dump(mode="json")


def config_hash(config: ExperimentConfig) -> str:
    """SHA-256 of the canonical resolved config; ``output_dir`` is left out."""
    settings = config_dict(config)
    settings.pop("output_dir", None)
    return sha256_hex(canonical_json(settings).encode("utf-8"))


def save_resolved_config(config: ExperimentConfig, out_dir: Union[str, Path]) -> Path:
    path = Path(out_dir) / RESOLVED_CONFIG_NAME
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(config_dict(config), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
