"""Tests for the dyad simulator, velocity labels, windowing and log files."""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from cocarry.config import DyadConfig
from cocarry.constants import GRAVITY, PRIMITIVE_KINDS, TRANSLATION_KINDS, WINDOW_LENGTH
from cocarry.diffusion.training import dominant_axis_sign
from cocarry.dyad.dataset import (
    build_dataset,
    load_dataset,
    save_dataset,
    split_dataset,
    window_dataset,
)
from cocarry.dyad.kinematics import cross2, finite_diff_velocity, to_local, wrap_angle
from cocarry.dyad.logio import DyadLog, decode_log, encode_log, read_log, write_log
from cocarry.dyad.physics import (
    AdmittanceFollower,
    FrozenFollower,
    IntentFollower,
    SlavedFollower,
    coupling_wrench,
    handle_kinematics,
    make_follower,
    mechanical_energy,
    simulate_dyad,
    simulate_trajectory,
)
from cocarry.dyad.primitives import LeaderTrajectory, MotionPrimitive, minjerk_profile, primitive_trajectory
from cocarry.dyad.trials import TrialSpec, run_trial, trial_grid, trial_primitive
from cocarry.exceptions import ConfigError, SimulationError, TruncationError, VersionMismatchError


class TestMinJerk:
    def test_boundaries(self):
        assert minjerk_profile(0.7, 2.0, 0.0) == (0.0, 0.0)
        position, velocity = minjerk_profile(0.7, 2.0, 2.0)
        assert position == pytest.approx(0.7)
        assert velocity == pytest.approx(0.0, abs=1e-15)

    def test_midpoint_is_half(self):
        assert minjerk_profile(1.0, 2.0, 1.0)[0] == pytest.approx(0.5)

    def test_peak_velocity(self):
        t = np.linspace(0.0, 3.0, 30001)
        _, velocity = minjerk_profile(0.5, 3.0, t)
        assert velocity.max() == pytest.approx(1.875 * 0.5 / 3.0)
        assert t[np.argmax(velocity)] == pytest.approx(1.5)

    def test_zero_boundary_acceleration(self):
        dt = 1e-6
        _, v0 = minjerk_profile(1.0, 1.0, dt)
        _, v1 = minjerk_profile(1.0, 1.0, 1.0 - dt)
        assert v0 / dt == pytest.approx(0.0, abs=1e-4)
        assert v1 / dt == pytest.approx(0.0, abs=1e-4)

    @pytest.mark.parametrize("t", [-0.1, 2.5])
    def test_time_outside_range(self, t):
        with pytest.raises(SimulationError):
            minjerk_profile(1.0, 2.0, t)


class TestPrimitives:
    def test_catalog_has_eight_kinds(self):
        assert len(PRIMITIVE_KINDS) == 8

    @pytest.mark.parametrize(
        "kwargs, key",
        [
            ({"kind": "sideways", "amplitude": 1.0, "duration": 1.0}, "kind"),
            ({"kind": "forward", "amplitude": 0.0, "duration": 1.0}, "amplitude"),
            ({"kind": "forward", "amplitude": 1.0, "duration": 0.0}, "duration"),
        ],
    )
    def test_invalid_primitive(self, kwargs, key):
        with pytest.raises(ConfigError) as info:
            MotionPrimitive(**kwargs)
        assert info.value.context["key"] == key

    def test_forward_ends_one_metre_ahead(self):
        traj = primitive_trajectory(MotionPrimitive("forward", 1.0, 2.0))
        assert_allclose(traj.poses[-1] - traj.poses[0], [1.0, 0.0, 0.0], atol=1e-12)

    def test_backward_mirrors_forward(self):
        forward = primitive_trajectory(MotionPrimitive("forward", 0.5, 2.0))
        backward = primitive_trajectory(MotionPrimitive("backward", 0.5, 2.0))
        assert_allclose(backward.poses - backward.poses[0], -(forward.poses - forward.poses[0]), atol=1e-15)
        assert_allclose(backward.velocities, -forward.velocities, atol=1e-15)

    def test_left_moves_along_y(self):
        traj = primitive_trajectory(MotionPrimitive("left", 0.4, 1.0))
        assert_allclose(traj.poses[-1] - traj.poses[0], [0.0, 0.4, 0.0], atol=1e-12)

    def test_leader_rotation_sweeps_rear_handle_on_quarter_arc(self):
        length = 1.0
        traj = primitive_trajectory(MotionPrimitive("leader-rot-cw", math.pi / 2, 2.0), object_length=length)
        assert_allclose(traj.poses[:, :2], traj.poses[0, :2], atol=1e-15)
        rear = np.array([handle_kinematics(p, np.zeros(3), length)[0] for p in traj.poses])
        assert_allclose(np.linalg.norm(rear - traj.poses[:, :2], axis=1), length, atol=1e-12)
        assert_allclose(rear[0], [0.0, 0.0], atol=1e-12)
        assert_allclose(rear[-1], [1.0, 1.0], atol=1e-12)
        assert traj.poses[-1, 2] == pytest.approx(-math.pi / 2)

    def test_follower_rotation_keeps_rear_handle_fixed(self):
        traj = primitive_trajectory(MotionPrimitive("follower-rot-ccw", math.pi / 4, 2.0))
        rear = np.array([handle_kinematics(p, np.zeros(3), 1.0)[0] for p in traj.poses])
        assert_allclose(rear, 0.0, atol=1e-12)
        assert_allclose(np.linalg.norm(traj.poses[:, :2], axis=1), 1.0, atol=1e-12)

    def test_rests_pad_both_ends(self):
        traj = primitive_trajectory(MotionPrimitive("forward", 0.5, 1.0), rest_before=0.5, rest_after=0.25)
        assert len(traj) == 1751
        assert_array_equal(traj.velocities[traj.times < 0.5], 0.0)
        assert_array_equal(traj.velocities[traj.times > 1.5 + 1e-9], 0.0)


class TestCoupling:
    def _leader(self):
        return np.array([1.0, 0.0, 0.0]), np.zeros(3)

    def test_relaxed_coupling_is_silent(self):
        leader, vel = self._leader()
        w1, w2 = coupling_wrench(leader, vel, np.zeros(3), np.zeros(3), 0.0, DyadConfig())
        assert_array_equal(w1, 0.0)
        assert_array_equal(w2, 0.0)

    def test_pure_spring_offset(self):
        config = DyadConfig(damping=0.0)
        leader, vel = self._leader()
        w1, w2 = coupling_wrench(leader, vel, np.array([-0.01, 0.0, 0.0]), np.zeros(3), 0.0, config)
        assert_allclose(w2, [500.0 * 0.01, 0, 0, 0, 0, 0], atol=1e-12)
        assert_allclose(w1, [-500.0 * 0.01, 0, 0, 0, 0, 0], atol=1e-12)

    def test_payload_share(self):
        leader, vel = self._leader()
        w1, w2 = coupling_wrench(leader, vel, np.zeros(3), np.zeros(3), 4.0, DyadConfig())
        assert w1[2] == pytest.approx(19.62)
        assert w2[2] == pytest.approx(19.62)
        assert 4.0 * GRAVITY / 2 == pytest.approx(19.62)

    def test_action_reaction(self):
        config = DyadConfig()
        rng = np.random.default_rng(0)
        lever = np.array([-config.object_length, 0.0])
        for _ in range(200):
            leader = rng.normal(size=3)
            follower = leader + rng.normal(scale=0.05, size=3)
            w1, w2 = coupling_wrench(leader, rng.normal(size=3), follower, rng.normal(size=3), 3.0, config)
            assert_allclose(w1[:2], -w2[:2], atol=1e-9)
            assert abs(w1[5] + w2[5] + float(cross2(lever, w2[:2]))) < 1e-9
            assert_array_equal(w1[3:5], 0.0)
            assert_array_equal(w2[3:5], 0.0)


class TestSimulation:
    def test_slaved_follower_barely_stretches(self):
        config = DyadConfig()
        log = simulate_dyad(MotionPrimitive("forward", 0.5, 3.0), SlavedFollower(1e-3), config, 1.0, seed=0, noise=False)
        assert np.max(np.abs(log.wrench2[:, :2])) < 0.05
        assert_allclose(log.wrench2[:, 2], 1.0 * GRAVITY / 2)

    def test_slaved_follower_on_hold_is_exact(self):
        config = DyadConfig()
        traj = LeaderTrajectory.hold(np.array([1.0, 0.0, 0.0]), 0.5, 1e-3)
        log = simulate_trajectory(traj, SlavedFollower(1e-3), config, 0.0, seed=0, noise=False)
        assert np.max(np.abs(log.wrench2)) < 1e-9

    def test_frozen_follower_matches_spring_response(self):
        config = DyadConfig(damping=0.0, rot_damping=0.0)
        log = simulate_dyad(MotionPrimitive("forward", 0.5, 2.0), FrozenFollower(), config, 0.0, seed=0, noise=False)
        assert_array_equal(log.follower, log.follower[0])
        frame_ticks = np.searchsorted(log.wrench_t, log.frame_t)
        stretch = log.leader[:, 0] - config.object_length - log.follower[:, 0]
        assert_allclose(log.wrench2[frame_ticks, 0], config.stiffness * stretch, atol=1e-9)
        force = log.wrench2[:, 0]
        assert np.all(np.diff(force) >= -1e-9)
        assert force[-1] == pytest.approx(config.stiffness * 0.5)

    def test_seeded_runs_are_identical(self, short_dyad_config):
        spec = TrialSpec(3, "left", 1.0, 0)
        assert run_trial(spec, short_dyad_config, seed=5).equals(run_trial(spec, short_dyad_config, seed=5))

    def test_seed_changes_sensor_noise(self, short_dyad_config):
        spec = TrialSpec(0, "forward", 0.0, 0)
        first = run_trial(spec, short_dyad_config, seed=1)
        second = run_trial(spec, short_dyad_config, seed=2)
        assert not np.array_equal(first.wrench1, second.wrench1)

    def test_log_rates(self, short_dyad_config):
        log = run_trial(TrialSpec(0, "forward", 0.0, 0), short_dyad_config, seed=0)
        assert_allclose(np.diff(log.wrench_t), 1e-3)
        assert np.all(np.diff(log.frame_t) > 0)
        assert len(log.frame_t) == len(range(0, len(log.wrench_t), 33))
        assert log.meta["kind"] == "forward" and log.meta["follower"] == "admittance"

    def test_unstable_follower_aborts(self, short_dyad_config):
        runaway = IntentFollower(lambda force, torque, seed: np.array([1000.0, 0.0, 0.0]), 33, WINDOW_LENGTH)
        with pytest.raises(SimulationError) as info:
            run_trial(TrialSpec(0, "forward", 0.0, 0), short_dyad_config, seed=0, follower=runaway)
        assert info.value.time is not None

    def test_intent_follower_replans_on_frame_ticks(self, short_dyad_config):
        follower = IntentFollower(lambda force, torque, seed: np.zeros(3), 33, WINDOW_LENGTH)
        run_trial(TrialSpec(0, "forward", 0.0, 0), short_dyad_config, seed=0, follower=follower)
        ticks = sorted(follower.commands)
        assert ticks[0] >= WINDOW_LENGTH
        assert all(tick % 33 == 0 for tick in ticks)

    def test_energy_decays_with_frozen_leader(self):
        config = DyadConfig()
        leader = np.array([1.0, 0.0, 0.0])
        traj = LeaderTrajectory.hold(leader, 2.0, 1e-3)
        log = simulate_trajectory(
            traj, AdmittanceFollower(config), config, 0.0, seed=0, follower_start=np.array([-0.1, 0.05, 0.2]), noise=False
        )
        energy = np.array([mechanical_energy(lp, fp, config) for lp, fp in zip(log.leader, log.follower)])
        assert energy[0] > 0
        assert np.all(np.diff(energy) <= 1e-12)

    def test_unknown_builtin_follower(self):
        with pytest.raises(SimulationError):
            make_follower("telepathic", DyadConfig(), 1e-3)


class TestFiniteDifference:
    def test_constant_pose(self):
        assert_array_equal(finite_diff_velocity(np.tile([1.0, 2.0, 0.3], (5, 1)), dt=0.1), 0.0)

    def test_ramp(self):
        t = np.arange(10) * 0.1
        poses = np.stack([0.4 * t, -0.2 * t, 0.1 * t], axis=1)
        assert_allclose(finite_diff_velocity(poses, timestamps=t), np.tile([0.4, -0.2, 0.1], (10, 1)))

    def test_heading_takes_short_way(self):
        poses = np.array([[0.0, 0.0, 3.1], [0.0, 0.0, -3.1]])
        velocity = finite_diff_velocity(poses, dt=1.0)
        assert velocity[1, 2] == pytest.approx(2 * math.pi - 6.2)
        assert_array_equal(velocity[0], velocity[1])

    def test_irregular_timestamps(self):
        with pytest.raises(SimulationError):
            finite_diff_velocity(np.zeros((4, 3)), timestamps=np.array([0.0, 0.1, 0.2, 0.35]))

    def test_single_sample(self):
        with pytest.raises(SimulationError):
            finite_diff_velocity(np.zeros((1, 3)), dt=0.1)

    def test_wrap_range(self):
        wrapped = wrap_angle(np.linspace(-10, 10, 1001))
        assert np.all(wrapped > -math.pi) and np.all(wrapped <= math.pi)


def _counting_log(wrench_samples, frames, heading=0.0):
    wrench_t = np.arange(wrench_samples) * 1e-3
    frame_t = (wrench_samples - 1) * 1e-3 + np.arange(frames) / 30.0
    follower = np.zeros((frames, 3))
    follower[:, 0] = 0.3 * frame_t
    follower[:, 2] = heading
    return DyadLog(
        wrench_t=wrench_t,
        wrench1=np.ones((wrench_samples, 6)),
        wrench2=np.ones((wrench_samples, 6)),
        frame_t=frame_t,
        leader=follower.copy(),
        follower=follower,
        object=follower.copy(),
        meta={"kind": "forward", "payload": 1.0},
    )


class TestWindowing:
    def test_exact_minimum_gives_one_sample(self):
        data = window_dataset(_counting_log(198, 7))
        assert len(data) == 1
        assert data.force.shape == (1, 198, 6)
        assert data.velocities.shape == (1, 6, 3)
        assert_allclose(data.velocities[0], np.tile([0.3, 0.0, 0.0], (6, 1)), atol=1e-12)
        assert data.kind[0] == PRIMITIVE_KINDS.index("forward")
        assert data.payload[0] == 1.0

    def test_labels_rotate_into_follower_frame(self):
        data = window_dataset(_counting_log(198, 7, heading=math.pi / 2))
        assert_allclose(data.velocities[0], np.tile([0.0, -0.3, 0.0], (6, 1)), atol=1e-12)

    def test_short_log_gives_nothing(self):
        assert len(window_dataset(_counting_log(197, 7))) == 0
        assert len(window_dataset(_counting_log(198, 6))) == 0

    def test_labels_match_velocity_op(self, short_dyad_config):
        log = run_trial(TrialSpec(0, "right", 0.0, 0), short_dyad_config, seed=0)
        data = window_dataset(log)
        counts = np.searchsorted(log.wrench_t, log.frame_t, side="right")
        first = int(np.argmax(counts >= WINDOW_LENGTH))
        velocity = finite_diff_velocity(log.follower, timestamps=log.frame_t)
        assert_allclose(data.velocities[0], to_local(velocity[first + 1 : first + 7], log.follower[first, 2]))
        assert_array_equal(data.force[0], log.force[counts[first] - WINDOW_LENGTH : counts[first]])
        assert log.wrench_t[counts[first] - 1] <= log.frame_t[first] < log.frame_t[first + 1]

    def test_stride_thins_windows(self, short_dyad_config):
        log = run_trial(TrialSpec(0, "forward", 0.0, 0), short_dyad_config, seed=0)
        full = window_dataset(log)
        strided = window_dataset(log, stride=4)
        assert len(strided) == len(range(0, len(full), 4))
        assert_array_equal(strided.velocities, full.velocities[::4])

    def test_translation_labels_point_along_primitive(self):
        config = DyadConfig(payloads=[1.0], repetitions=1)
        expected = {"forward": 1, "backward": -1, "left": 2, "right": -2}
        for spec in trial_grid(config):
            if spec.kind not in TRANSLATION_KINDS:
                continue
            data = window_dataset(run_trial(spec, config, seed=0))
            mean = data.velocities.mean(axis=1)
            moving = np.linalg.norm(mean[:, :2], axis=1) > 0.05
            agreement = np.mean(dominant_axis_sign(mean[moving]) == expected[spec.kind])
            assert agreement >= 0.95, spec.kind


class TestTrials:
    def test_default_grid(self):
        specs = trial_grid(DyadConfig())
        assert len(specs) == 96
        assert specs[0] == TrialSpec(0, "forward", 0.0, 0)
        assert specs[-1] == TrialSpec(95, "follower-rot-ccw", 4.0, 2)

    def test_jitter_bounded_and_seeded(self):
        config = DyadConfig()
        spec = TrialSpec(4, "left", 0.0, 1)
        primitive = trial_primitive(spec, config, seed=3)
        assert primitive == trial_primitive(spec, config, seed=3)
        assert abs(primitive.amplitude / config.translation_amplitude - 1) <= config.variability
        assert abs(primitive.duration / config.translation_duration - 1) <= config.variability

    def test_no_jitter_without_variability(self, short_dyad_config):
        primitive = trial_primitive(TrialSpec(9, "leader-rot-cw", 0.0, 0), short_dyad_config, seed=0)
        assert primitive.amplitude == short_dyad_config.rotation_amplitude


class TestDatasetFiles:
    def test_split_keeps_trials_whole(self, short_dyad_config):
        logs = [run_trial(spec, short_dyad_config, seed=0) for spec in trial_grid(short_dyad_config)[:5]]
        data = build_dataset(logs, stride=8)
        train, held = split_dataset(data, 0.2, seed=0)
        assert len(train) + len(held) == len(data)
        assert len(held) > 0
        assert not set(train.trial) & set(held.trial)

    def test_single_trial_not_split(self, tiny_training_set):
        one = tiny_training_set.subset(np.array([0]))
        train, held = split_dataset(one, 0.5, seed=0)
        assert len(train) == 1 and len(held) == 0

    def test_dataset_file_round_trip(self, tmp_path, tiny_training_set):
        tiny_training_set.meta = {"seed": 3}
        loaded = load_dataset(save_dataset(tmp_path / "data.ccry", tiny_training_set))
        assert loaded.meta == {"seed": 3}
        for name in ("force", "torque", "velocities", "trial", "kind", "payload"):
            assert_array_equal(getattr(loaded, name), getattr(tiny_training_set, name))

    def test_same_seed_same_dataset(self, short_dyad_config):
        specs = trial_grid(short_dyad_config)[:2]
        first = build_dataset([run_trial(s, short_dyad_config, seed=4) for s in specs])
        second = build_dataset([run_trial(s, short_dyad_config, seed=4) for s in specs])
        assert_array_equal(first.force, second.force)
        assert_array_equal(first.velocities, second.velocities)


class TestLogFiles:
    def test_empty_log_round_trips(self):
        assert decode_log(encode_log(DyadLog())).equals(DyadLog())

    def test_seeded_log_round_trips(self, tmp_path):
        config = DyadConfig()
        log = simulate_dyad(MotionPrimitive("leader-rot-ccw", 0.8, 8.5), AdmittanceFollower(config), config, 3.0, seed=9)
        assert log.duration >= 10.0 - 1e-9
        assert read_log(write_log(tmp_path / "trial.jsonl", log)).equals(log)

    def test_corrupted_header(self):
        text = encode_log(_counting_log(10, 2))
        with pytest.raises(VersionMismatchError):
            decode_log("{not json" + text[text.index("\n") :])

    def test_wrong_version(self):
        text = encode_log(_counting_log(10, 2)).replace('"version": 1', '"version": 2', 1)
        with pytest.raises(VersionMismatchError) as info:
            decode_log(text)
        assert info.value.context["found"] == 2

    def test_truncated_tail(self):
        text = encode_log(_counting_log(10, 2))
        with pytest.raises(TruncationError):
            decode_log(text[:-20])

    def test_missing_records(self):
        lines = encode_log(_counting_log(10, 2)).splitlines(keepends=True)
        with pytest.raises(TruncationError) as info:
            decode_log("".join(lines[:-3]))
        assert info.value.context["declared"] > info.value.context["found"]
