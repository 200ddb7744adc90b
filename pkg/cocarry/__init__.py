"""cocarry - haptic intent inference and payload-adaptive locomotion for co-carrying.

A desk-scale human-humanoid co-manipulation stack: a synthetic leader-follower
carrying simulator, a wavelet-conditioned diffusion model that reads the
leader's intent from interaction wrenches, a PPO locomotion policy trained
under payload randomization, and the dyadic metrics used to compare followers.
Every learned component runs on the package's own reverse-mode autodiff.
"""

from cocarry.__version__ import __version__
from cocarry.async_support import asimulate_batch, asimulate_trial, asimulate_trials, simulate_batch
from cocarry.config import (
    DyadConfig,
    ExperimentConfig,
    IntentConfig,
    MetricsConfig,
    PPOConfig,
    RandomizationConfig,
    config_hash,
    load_config,
)
from cocarry.context import ArtifactDirectory, DyadLogReader, DyadLogWriter
from cocarry.exceptions import (
    BoundDetectionError,
    CocarryError,
    ConfigError,
    ContainerError,
    DivergenceError,
    GradientError,
    MetricsError,
    ScheduleError,
    ShapeError,
    SimulationError,
    TruncationError,
    VersionMismatchError,
    WaveletError,
)
from cocarry.format import create_table, format_metric, render_table
from cocarry.seeding import substream

__all__ = [
    "__version__",
    "ArtifactDirectory",
    "BoundDetectionError",
    "CocarryError",
    "ConfigError",
    "ContainerError",
    "DivergenceError",
    "DyadConfig",
    "DyadLogReader",
    "DyadLogWriter",
    "ExperimentConfig",
    "GradientError",
    "IntentConfig",
    "MetricsConfig",
    "MetricsError",
    "PPOConfig",
    "RandomizationConfig",
    "ScheduleError",
    "ShapeError",
    "SimulationError",
    "TruncationError",
    "VersionMismatchError",
    "WaveletError",
    "asimulate_batch",
    "asimulate_trial",
    "asimulate_trials",
    "config_hash",
    "create_table",
    "format_metric",
    "load_config",
    "render_table",
    "simulate_batch",
    "substream",
]
