"""The trial grid: every primitive at every payload, repeated."""

from typing import List, NamedTuple, Optional

from cocarry.config import DyadConfig
from cocarry.constants import PRIMITIVE_KINDS
from cocarry.dyad.logio import DyadLog
from cocarry.dyad.physics import Follower, make_follower, simulate_dyad
from cocarry.dyad.primitives import MotionPrimitive
from cocarry.seeding import substream


class TrialSpec(NamedTuple):
    index: int
    kind: str
    payload: float
    repetition: int


def trial_grid(config: DyadConfig) -> List[TrialSpec]:
    """Primitives x payloads x repetitions, in a fixed order (96 trials at defaults)."""
    specs = []
    for kind in PRIMITIVE_KINDS:
        for payload in config.payloads:
            for repetition in range(config.repetitions):
                specs.append(TrialSpec(len(specs), kind, float(payload), repetition))
    return specs


def trial_primitive(spec: TrialSpec, config: DyadConfig, seed: int) -> MotionPrimitive:
    """Nominal primitive with seeded per-trial jitter on amplitude and duration."""
    rng = substream(seed, "dyad", "trial", spec.index, "jitter")
    scale_amp, scale_dur = 1.0 + config.variability * rng.uniform(-1.0, 1.0, size=2)
    if spec.kind in PRIMITIVE_KINDS[:4]:
        amplitude, duration = config.translation_amplitude, config.translation_duration
    else:
        amplitude, duration = config.rotation_amplitude, config.rotation_duration
    return MotionPrimitive(spec.kind, amplitude * scale_amp, duration * scale_dur)


def run_trial(
    spec: TrialSpec,
    config: DyadConfig,
    seed: int,
    follower: Optional[Follower] = None,
    noise: bool = True,
) -> DyadLog:
    dt = 1.0 / config.wrench_rate
    follower = follower or make_follower("admittance", config, dt)
    primitive = trial_primitive(spec, config, seed)
    meta = {"trial": spec.index, "repetition": spec.repetition}
    trial_seed = int(substream(seed, "dyad", "trial", spec.index).integers(0, 2**31 - 1))
    return simulate_dyad(primitive, follower, config, spec.payload, trial_seed, noise=noise, meta=meta)
