"""Tests for the noise schedule, the eps-network and deterministic sampling."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from cocarry.autodiff.gradcheck import grad_check
from cocarry.config import DyadConfig, IntentConfig
from cocarry.diffusion.network import (
    EpsNetConfig,
    encode_condition,
    entropy_weights,
    init_eps_params,
    kl_divergence,
    level_attention,
    loss_graph,
    mixed_attention,
    multiscale_attention,
    predict_noise,
    time_embedding,
    total_loss,
)
from cocarry.diffusion.sampler import ddim_sample, ddim_trajectory, infer_command, infer_velocities
from cocarry.diffusion.schedule import cosine_schedule, ddim_timesteps, forward_diffuse, sample_steps
from cocarry.diffusion.training import (
    IntentBatch,
    diffusion_loss,
    evaluate_intent,
    fixed_loss,
    load_intent_checkpoint,
    prepare_batch,
    save_intent_checkpoint,
    train_intent,
)
from cocarry.dyad.dataset import TrainingSet, build_dataset, split_dataset
from cocarry.dyad.trials import run_trial, trial_grid
from cocarry.exceptions import ScheduleError, ShapeError
from cocarry.seeding import substream
from cocarry.wavelet.blocks import encode_window


def _stacks(cfg, seed=0, batch=None):
    rng = substream(seed, "stacks")
    shape = (cfg.horizon * cfg.block_size, cfg.channels)
    if batch is not None:
        shape = (batch,) + shape
    return encode_window(rng.normal(size=shape), rng.normal(size=shape), cfg.levels, cfg.horizon, cfg.block_size)


class TestSchedule:
    def test_alpha_bar_starts_at_one(self):
        assert cosine_schedule(100).alpha_bars[0] == 1.0

    @pytest.mark.parametrize("steps", [2, 10, 100, 1000])
    def test_invariants(self, steps):
        schedule = cosine_schedule(steps)
        assert schedule.betas.shape == (steps,)
        assert schedule.alpha_bars.shape == (steps + 1,)
        assert np.all(schedule.betas > 0)
        assert np.all(schedule.betas <= 0.999)
        assert np.all(np.diff(schedule.alpha_bars) < 0)
        recomputed = np.concatenate([[1.0], np.cumprod(1.0 - schedule.betas)])
        assert_allclose(schedule.alpha_bars, recomputed, rtol=0, atol=1e-12)

    def test_last_beta_clipped(self):
        assert cosine_schedule(100).betas[-1] == pytest.approx(0.999)

    @pytest.mark.parametrize("steps", [1, 0, -3])
    def test_too_few_steps(self, steps):
        with pytest.raises(ScheduleError):
            cosine_schedule(steps)

    def test_sample_steps_range(self):
        schedule = cosine_schedule(100)
        t = sample_steps(substream(0, "t"), schedule, 5000)
        assert t.min() >= 1 and t.max() <= 100

    def test_ddim_timesteps_stride(self):
        steps = ddim_timesteps(100, 20)
        assert len(steps) == 20
        assert steps[0] == 100 and steps[-1] == 5
        assert np.all(np.diff(steps) == -5)

    def test_ddim_too_many_steps(self):
        with pytest.raises(ScheduleError):
            ddim_timesteps(10, 20)


class TestForwardDiffuse:
    def test_no_noise_at_step_zero(self):
        y = substream(1, "y").normal(size=(6, 3))
        eps = substream(2, "eps").normal(size=(6, 3))
        assert_array_equal(forward_diffuse(y, 0, eps, cosine_schedule(100)), y)

    def test_zero_signal_half_alpha(self):
        schedule = cosine_schedule(100)
        t = int(np.argmin(np.abs(schedule.alpha_bars - 0.5)))
        eps = substream(3, "eps").normal(size=(6, 3))
        expected = np.sqrt(schedule.alpha_bars[t]) * 0.0 + np.sqrt(1 - schedule.alpha_bars[t]) * eps
        assert_allclose(forward_diffuse(np.zeros((6, 3)), t, eps, schedule), expected)

    def test_last_step_is_nearly_noise(self):
        schedule = cosine_schedule(100)
        y = np.ones((6, 3))
        eps = substream(4, "eps").normal(size=(6, 3))
        assert_allclose(forward_diffuse(y, 100, eps, schedule), eps, atol=1e-2)

    def test_per_row_steps(self):
        schedule = cosine_schedule(100)
        rng = substream(5, "rows")
        y, eps = rng.normal(size=(2, 4, 6, 3))
        t = np.array([1, 20, 50, 100])
        batch = forward_diffuse(y, t, eps, schedule)
        for i in range(4):
            assert_allclose(batch[i], forward_diffuse(y[i], t[i], eps[i], schedule))

    def test_variance(self):
        schedule = cosine_schedule(100)
        rng = substream(6, "variance")
        for t in (10, 50, 90):
            y = rng.standard_normal(10_000)
            eps = rng.standard_normal(10_000)
            abar = schedule.alpha_bars[t]
            expected = abar * y.var() + (1 - abar)
            assert forward_diffuse(y, t, eps, schedule).var() == pytest.approx(expected, rel=0.05)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            forward_diffuse(np.zeros((6, 3)), 1, np.zeros((6, 2)), cosine_schedule(10))

    def test_step_out_of_range(self):
        with pytest.raises(ScheduleError):
            forward_diffuse(np.zeros((6, 3)), 11, np.zeros((6, 3)), cosine_schedule(10))


class TestAttentionRule:
    def test_identical_rows_split_evenly(self):
        rows = np.array([[0.2, 0.3, 0.5], [0.2, 0.3, 0.5]])
        assert_allclose(entropy_weights(rows), [0.5, 0.5])

    def test_one_hot_against_uniform(self):
        rows = np.zeros((2, 33))
        rows[0, 0] = 1.0
        rows[1] = 1.0 / 33
        assert_allclose(entropy_weights(rows), [0.9706, 0.0294], atol=1e-4)

    def test_single_level(self):
        assert_allclose(entropy_weights(np.array([[0.1, 0.9]])), [1.0])

    def test_negative_entries_rejected(self):
        with pytest.raises(ShapeError):
            entropy_weights(np.array([[1.5, -0.5]]))

    def test_lower_entropy_never_weighs_less(self):
        rng = substream(0, "ordering")
        for _ in range(100):
            logits = rng.normal(size=(4, 8)) * rng.uniform(0.1, 5.0, size=(4, 1))
            rows = np.exp(logits) / np.exp(logits).sum(axis=-1, keepdims=True)
            entropy = -np.sum(rows * np.log(rows), axis=-1)
            weights = entropy_weights(rows)
            order = np.argsort(entropy)
            assert np.all(np.diff(weights[order]) <= 1e-12)

    def test_hand_softmax_context(self):
        d = 4
        queries = np.zeros((1, d))
        queries[0, 0] = 1.0
        keys = np.zeros((1, 2, d))
        keys[0, 1, 0] = np.log(2.0) * np.sqrt(d)
        values = np.array([[[1.0, 0.0, 2.0, 0.0], [4.0, 3.0, -1.0, 1.0]]])
        assert_allclose(level_attention(queries, keys)[0, 0], [1 / 3, 2 / 3])
        context = multiscale_attention(queries, keys, values)
        assert_allclose(context[0], (values[0, 0] + 2 * values[0, 1]) / 3)

    def test_equal_keys_average_values(self):
        rng = substream(1, "equal")
        queries = rng.normal(size=(3, 8))
        keys = np.broadcast_to(rng.normal(size=(1, 1, 8)), (1, 5, 8))
        values = rng.normal(size=(1, 5, 8))
        assert_allclose(multiscale_attention(queries, keys, values), np.broadcast_to(values[0].mean(axis=0), (3, 8)))

    def test_single_level_is_scaled_dot_product(self):
        rng = substream(2, "sdp")
        queries, keys, values = rng.normal(size=(3, 4, 8))
        logits = queries @ keys.T / np.sqrt(8)
        rows = np.exp(logits) / np.exp(logits).sum(axis=-1, keepdims=True)
        assert_allclose(multiscale_attention(queries, keys[None], values[None]), rows @ values)

    def test_mixed_rows_are_stochastic(self):
        rng = substream(3, "mixed")
        for _ in range(100):
            queries = rng.normal(size=(6, 16))
            keys = rng.normal(size=(4, 6, 33, 16)) * 3.0
            assert_allclose(mixed_attention(queries, keys).sum(axis=-1), 1.0, atol=1e-9)

    def test_width_mismatch(self):
        with pytest.raises(ShapeError):
            level_attention(np.zeros((2, 4)), np.zeros((1, 3, 5)))


class TestLosses:
    def test_kl_at_prior_is_zero(self):
        assert_array_equal(kl_divergence(np.zeros(5), np.zeros(5)), 0.0)

    def test_kl_unit_mean(self):
        assert kl_divergence(np.array(1.0), np.array(0.0)) == pytest.approx(0.5)

    def test_total_loss(self):
        assert total_loss(0.5, 2.0) == pytest.approx(0.52)
        assert total_loss(0.5, 0.0) == 0.5

    def test_empty_batch(self, tiny_eps_config):
        cfg = tiny_eps_config
        params = init_eps_params(cfg, 0)
        empty = IntentBatch(
            np.zeros((0, cfg.horizon, 3)),
            np.zeros((0, cfg.levels, cfg.horizon, cfg.block_size, cfg.channels)),
            np.zeros((0, cfg.levels, cfg.horizon, cfg.block_size, cfg.channels)),
        )
        with pytest.raises(ShapeError):
            diffusion_loss(empty, params, cosine_schedule(10), substream(0, "loss"))

    def test_loss_parts_combine(self, tiny_eps_config, tiny_training_set):
        params = init_eps_params(tiny_eps_config, 0)
        batch = prepare_batch(tiny_training_set, np.arange(4), params)
        l_diff, l_kl, l_total = diffusion_loss(batch, params, cosine_schedule(10), substream(0, "loss"))
        assert l_diff > 0 and l_kl >= 0
        assert l_total == pytest.approx(l_diff + 0.01 * l_kl)

    def test_end_to_end_gradient(self, tiny_eps_config):
        cfg = tiny_eps_config
        params = init_eps_params(cfg, 3)
        rng = substream(3, "gradcheck")
        stacks = _stacks(cfg, 3, batch=1)
        force, torque = np.moveaxis(stacks.force, 3, 1), np.moveaxis(stacks.torque, 3, 1)
        feeds = {
            **{k: v + rng.normal(scale=0.1, size=v.shape) for k, v in params.tensors.items()},
            "force": force,
            "torque": torque,
            "u": rng.standard_normal((1, cfg.levels, cfg.horizon, cfg.block_size, cfg.width)),
            "y_t": rng.standard_normal((1, cfg.horizon, 3)),
            "t_embed": time_embedding(7, 1, cfg.width),
            "eps": rng.standard_normal((1, cfg.horizon, 3)),
        }
        report = grad_check(loss_graph(cfg, 1, 0.01), feeds, tol=1e-4)
        assert report.passed, report.failures


class TestNetwork:
    def test_output_shape(self, tiny_eps_config):
        cfg = tiny_eps_config
        params = init_eps_params(cfg, 0)
        y_t = substream(0, "y").normal(size=(cfg.horizon, 3))
        assert predict_noise(y_t, 5, _stacks(cfg), params).shape == (cfg.horizon, 3)

    def test_default_shape_is_six_by_three(self):
        cfg = EpsNetConfig(width=8, levels=2, blocks=1)
        params = init_eps_params(cfg, 0)
        assert predict_noise(np.zeros((6, 3)), 50, _stacks(cfg), params).shape == (6, 3)

    def test_zero_network_predicts_zero(self, tiny_eps_config):
        cfg = tiny_eps_config
        params = init_eps_params(cfg, 0).zeros_like()
        y_t = substream(1, "y").normal(size=(cfg.horizon, 3))
        assert_array_equal(predict_noise(y_t, 5, _stacks(cfg), params), 0.0)

    def test_bit_identical_reruns(self, tiny_eps_config):
        cfg = tiny_eps_config
        y_t = substream(2, "y").normal(size=(cfg.horizon, 3))
        draw = substream(2, "u").standard_normal((cfg.levels, cfg.horizon, cfg.block_size, cfg.width))
        first = predict_noise(y_t, 3, _stacks(cfg), init_eps_params(cfg, 9), draw)
        second = predict_noise(y_t, 3, _stacks(cfg), init_eps_params(cfg, 9), draw)
        assert_array_equal(first, second)

    @pytest.mark.parametrize("cross_block, shared", [(True, True), (False, False), (True, False)])
    def test_variants_keep_shape(self, cross_block, shared):
        cfg = EpsNetConfig(width=8, levels=2, blocks=2, horizon=2, block_size=4, cross_block_attention=cross_block, share_level_projections=shared)
        eps = predict_noise(np.zeros((3, 2, 3)), 1, _stacks(cfg, batch=3), init_eps_params(cfg, 0))
        assert eps.shape == (3, 2, 3)
        assert np.all(np.isfinite(eps))

    def test_zero_draw_gives_mean_keys(self, tiny_eps_config):
        cfg = tiny_eps_config
        params = init_eps_params(cfg, 4)
        zero = np.zeros((1, cfg.levels, cfg.horizon, cfg.block_size, cfg.width))
        for sample in encode_condition(_stacks(cfg), params, zero):
            assert_array_equal(sample.keys, sample.mu)

    def test_keys_follow_reparameterization(self, tiny_eps_config):
        cfg = tiny_eps_config
        params = init_eps_params(cfg, 4)
        draw = substream(4, "u").standard_normal((1, cfg.levels, cfg.horizon, cfg.block_size, cfg.width))
        samples = encode_condition(_stacks(cfg), params, draw)
        assert len(samples) == cfg.levels
        for sample in samples:
            assert_allclose(sample.keys, sample.mu + np.exp(sample.logvar / 2) * sample.draw)

    def test_level_mismatch(self, tiny_eps_config):
        cfg = tiny_eps_config
        other = EpsNetConfig(width=8, levels=3, blocks=1, horizon=2, block_size=4)
        with pytest.raises(ShapeError):
            encode_condition(_stacks(other), init_eps_params(cfg, 0))


class TestSampling:
    def test_constant_noise_fixed_point(self):
        schedule = cosine_schedule(100)
        c = substream(0, "c").normal(size=(1, 6, 3))
        init = substream(0, "init").normal(size=(1, 6, 3))
        estimates = [y0 for _, y0 in ddim_trajectory(init, lambda y, t: c, schedule, 20)]
        assert len(estimates) == 20
        for estimate in estimates[1:]:
            assert_allclose(estimate, estimates[0], rtol=0, atol=1e-10)

    def test_zero_noise_rescales_draw(self):
        schedule = cosine_schedule(100)
        init = substream(1, "init").normal(size=(1, 6, 3))
        y0 = ddim_sample(None, None, schedule, 20, init, denoiser=lambda y, t: np.zeros_like(y))
        assert_allclose(y0, init / np.sqrt(schedule.alpha_bars[100]))

    def test_same_draw_same_output(self, tiny_eps_config):
        cfg = tiny_eps_config
        params = init_eps_params(cfg, 5)
        schedule = cosine_schedule(20)
        init = substream(5, "init").normal(size=(1, cfg.horizon, 3))
        first = ddim_sample(_stacks(cfg), params, schedule, 5, init)
        second = ddim_sample(_stacks(cfg), params, schedule, 5, init)
        assert_array_equal(first, second)

    def test_needs_denoiser_or_network(self):
        with pytest.raises(ShapeError):
            ddim_sample(None, None, cosine_schedule(10), 5, np.zeros((1, 6, 3)))

    def test_too_many_sampling_steps(self):
        with pytest.raises(ScheduleError):
            ddim_sample(None, None, cosine_schedule(10), 11, np.zeros((1, 6, 3)), denoiser=lambda y, t: y)


class TestInferCommand:
    def test_zero_network_returns_scaled_first_row(self, tiny_eps_config):
        cfg = tiny_eps_config
        params = init_eps_params(cfg, 0).zeros_like()
        schedule = cosine_schedule(100)
        rng = substream(6, "window")
        window = (cfg.horizon * cfg.block_size, cfg.channels)
        init = rng.normal(size=(cfg.horizon, 3))
        command = infer_command(rng.normal(size=window), rng.normal(size=window), params, schedule, 20, init=init)
        assert command.shape == (3,)
        assert_allclose(command, init[0] / np.sqrt(schedule.alpha_bars[100]), rtol=1e-9)

    def test_seeded_command_is_reproducible(self, tiny_eps_config):
        cfg = tiny_eps_config
        params = init_eps_params(cfg, 1)
        schedule = cosine_schedule(20)
        rng = substream(7, "window")
        window = (cfg.horizon * cfg.block_size, cfg.channels)
        force, torque = rng.normal(size=window), rng.normal(size=window)
        first = infer_command(force, torque, params, schedule, 5, seed=11)
        second = infer_command(force, torque, params, schedule, 5, seed=11)
        assert_array_equal(first, second)

    def test_short_window(self, tiny_eps_config):
        params = init_eps_params(tiny_eps_config, 0)
        with pytest.raises(ShapeError):
            infer_command(np.zeros((5, 6)), np.zeros((5, 6)), params, cosine_schedule(10), 5)

    def test_batch_rows_match_single_calls(self, tiny_eps_config):
        cfg = tiny_eps_config
        params = init_eps_params(cfg, 2)
        schedule = cosine_schedule(20)
        rng = substream(8, "window")
        force = rng.normal(size=(3, cfg.horizon * cfg.block_size, cfg.channels))
        torque = rng.normal(size=force.shape)
        init = rng.normal(size=(3, cfg.horizon, 3))
        batch = infer_velocities(force, torque, params, schedule, 5, init=init)
        for i in range(3):
            single = infer_command(force[i], torque[i], params, schedule, 5, init=init[i])
            assert_allclose(batch[i, 0], single, rtol=1e-9, atol=1e-9)


class TestTraining:
    def test_empty_dataset(self, tiny_intent_config):
        with pytest.raises(ShapeError):
            train_intent(TrainingSet.empty(), tiny_intent_config, seed=0)

    def test_curve_columns_and_file(self, tmp_path, tiny_eps_config, tiny_intent_config, tiny_training_set):
        params = init_eps_params(tiny_eps_config, 0)
        curve_path = tmp_path / "curve.csv"
        _, curve = train_intent(tiny_training_set, tiny_intent_config, 0, params=params, max_steps=3, curve_path=curve_path)
        assert list(curve.columns) == ["step", "epoch", "l_diff", "l_kl", "l_total"]
        assert len(curve) == 3
        assert curve_path.read_text().startswith("step,epoch,l_diff,l_kl,l_total")

    def test_training_is_deterministic(self, tiny_eps_config, tiny_intent_config, tiny_training_set):
        runs = [
            train_intent(tiny_training_set, tiny_intent_config, 4, params=init_eps_params(tiny_eps_config, 4), max_steps=4)
            for _ in range(2)
        ]
        for name, tensor in runs[0][0].tensors.items():
            assert_array_equal(tensor, runs[1][0].tensors[name])

    def test_checkpoint_round_trip(self, tmp_path, tiny_eps_config, tiny_training_set):
        params = init_eps_params(tiny_eps_config, 2)
        params.normalizer = params.normalizer.fit(tiny_training_set.force, tiny_training_set.torque, tiny_training_set.velocities)
        schedule = cosine_schedule(10)
        path = save_intent_checkpoint(tmp_path / "intent.ckpt", params, schedule, config_hash="abc")
        loaded, loaded_schedule, meta = load_intent_checkpoint(path)
        assert loaded.config == params.config
        assert meta["config_hash"] == "abc"
        assert loaded_schedule.steps == 10
        assert_array_equal(loaded_schedule.alpha_bars, schedule.alpha_bars)
        for name, tensor in params.tensors.items():
            assert_array_equal(loaded.tensors[name], tensor)
        assert_array_equal(loaded.normalizer.label_std, params.normalizer.label_std)

    @pytest.mark.slow
    def test_overfits_four_samples(self, tiny_training_set):
        config = IntentConfig(diffusion_steps=10, sample_steps=5, width=16, levels=2, blocks=1, batch_size=4, epochs=2000, lr=3e-3)
        params = init_eps_params(EpsNetConfig(width=16, levels=2, blocks=1, horizon=2, block_size=4), 0)
        params.normalizer = params.normalizer.fit(tiny_training_set.force, tiny_training_set.torque, tiny_training_set.velocities)
        initial, _, _ = fixed_loss(tiny_training_set, params, config, seed=0)
        trained, curve = train_intent(tiny_training_set, config, 0, params=params, fit_normalizer=False, max_steps=2000)
        final, _, _ = fixed_loss(tiny_training_set, trained, config, seed=0)
        assert final < 0.1 * initial
        smoothed = curve["l_total"].rolling(50).mean().dropna().to_numpy()
        assert smoothed[-1] < smoothed[0]

    @pytest.mark.slow
    @pytest.mark.integration
    def test_desk_scale_grid_beats_zero_baseline(self):
        dyad, intent = DyadConfig(), IntentConfig()
        specs = trial_grid(dyad)
        assert len(specs) == 96
        data = build_dataset([run_trial(spec, dyad, 0) for spec in specs], stride=intent.window_stride)
        train, held_out = split_dataset(data, intent.holdout_fraction, seed=0)
        assert len(held_out) > 0
        params, curve = train_intent(train, intent, seed=0)
        assert curve["epoch"].iloc[-1] == intent.epochs - 1
        scores = evaluate_intent(held_out, params, intent, seed=0)
        assert scores["mse"] <= 0.2 * scores["baseline_mse"]
        assert scores["moving_translation_samples"] > 0
        assert scores["sign_agreement"] >= 0.9
