"""Tests for the async trial fan-out."""

import pytest

from cocarry.async_support import asimulate_batch, asimulate_trial, asimulate_trials, simulate_batch
from cocarry.dyad.trials import run_trial, trial_grid


@pytest.fixture
def specs(short_dyad_config):
    return trial_grid(short_dyad_config)[:4]


class TestAsyncSimulation:
    @pytest.mark.asyncio
    async def test_single_trial_matches_sync(self, specs, short_dyad_config):
        log = await asimulate_trial(specs[0], short_dyad_config, seed=5)
        assert log.equals(run_trial(specs[0], short_dyad_config, 5))

    @pytest.mark.asyncio
    async def test_batch_keeps_trial_order(self, specs, short_dyad_config):
        logs = await asimulate_trials(specs, short_dyad_config, seed=5, max_workers=3)
        assert [log.meta["trial"] for log in logs] == [spec.index for spec in specs]
        for spec, log in zip(specs, logs):
            assert log.equals(run_trial(spec, short_dyad_config, 5))

    @pytest.mark.asyncio
    async def test_empty_batch(self, short_dyad_config):
        assert await asimulate_trials([], short_dyad_config, seed=0) == []

    @pytest.mark.asyncio
    async def test_alias(self, specs, short_dyad_config):
        logs = await asimulate_batch(specs[:1], short_dyad_config, seed=1, max_workers=1)
        assert len(logs) == 1

    @pytest.mark.asyncio
    async def test_builtin_follower_kind(self, specs, short_dyad_config):
        log = await asimulate_trial(specs[0], short_dyad_config, seed=2, follower="frozen", noise=False)
        assert log.follower[0].tolist() == log.follower[-1].tolist()

    def test_blocking_wrapper(self, specs, short_dyad_config):
        logs = simulate_batch(specs, short_dyad_config, seed=5, max_workers=2)
        assert all(a.equals(run_trial(s, short_dyad_config, 5)) for s, a in zip(specs, logs))
