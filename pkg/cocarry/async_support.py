"""
Async fan-out of independent dyad simulations.

Each trial is fully determined by its spec and the root seed, so trials can
run concurrently in the event loop's executor while results come back in
trial order and outputs stay byte-identical to a sequential run.
"""

import asyncio
from typing import Callable, List, Optional, Sequence

from cocarry.config import DyadConfig
from cocarry.dyad.logio import DyadLog
from cocarry.dyad.physics import Follower, make_follower
from cocarry.dyad.trials import TrialSpec, run_trial

FollowerFactory = Callable[[], Follower]


def _factory(config: DyadConfig, follower: str, follower_factory: Optional[FollowerFactory]) -> FollowerFactory:
    if follower_factory is not None:
        return follower_factory
    dt = 1.0 / config.wrench_rate
    return lambda: make_follower(follower, config, dt)


async def asimulate_trial(
    spec: TrialSpec,
    config: DyadConfig,
    seed: int,
    follower: str = "admittance",
    follower_factory: Optional[FollowerFactory] = None,
    noise: bool = True,
) -> DyadLog:
    """
    Async version of run_trial().

    Runs in the default executor so the event loop stays responsive.
    """
    loop = asyncio.get_event_loop()
    make = _factory(config, follower, follower_factory)
    return await loop.run_in_executor(None, lambda: run_trial(spec, config, seed, make(), noise))


async def asimulate_trials(
    trials: Sequence[TrialSpec],
    config: DyadConfig,
    seed: int,
    max_workers: int = 4,
    follower: str = "admittance",
    follower_factory: Optional[FollowerFactory] = None,
    noise: bool = True,
) -> List[DyadLog]:
    """
    Simulate many trials concurrently.

    Args:
        trials: Trial specs, typically ``trial_grid(config)``
        config: Dyad simulator configuration
        seed: Root seed; each trial derives its own substreams from it
        max_workers: Maximum trials in flight at once
        follower: Built-in follower kind, used when no factory is given
        follower_factory: Builds a fresh follower per trial (followers hold state)

    Returns:
        One log per trial, in the order of ``trials``
    """
    if not trials:
        return []

    loop = asyncio.get_event_loop()
    semaphore = asyncio.Semaphore(max(1, max_workers))
    make = _factory(config, follower, follower_factory)

    async def simulate_one(spec: TrialSpec) -> DyadLog:
        async with semaphore:
            return await loop.run_in_executor(None, lambda: run_trial(spec, config, seed, make(), noise))

    return list(await asyncio.gather(*[simulate_one(spec) for spec in trials]))


def simulate_batch(
    trials: Sequence[TrialSpec],
    config: DyadConfig,
    seed: int,
    max_workers: int = 4,
    follower: str = "admittance",
    follower_factory: Optional[FollowerFactory] = None,
    noise: bool = True,
) -> List[DyadLog]:
    """Blocking wrapper around ``asimulate_trials`` for synchronous callers."""
    return asyncio.run(asimulate_trials(trials, config, seed, max_workers, follower, follower_factory, noise))


asimulate_batch = asimulate_trials


__all__ = ["asimulate_batch", "asimulate_trial", "asimulate_trials", "simulate_batch"]
