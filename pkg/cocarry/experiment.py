"""
Pipelines behind the CLI commands.

Every function takes the resolved ``ExperimentConfig`` and an open
``ArtifactDirectory``; it registers what it writes there and returns a small
JSON-friendly summary for the console. Randomness comes only from
``config.seed`` through named substreams.
"""

import json
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from cocarry.async_support import simulate_batch
from cocarry.config import ExperimentConfig
from cocarry.constants import PRIMITIVE_KINDS
from cocarry.context import ArtifactDirectory, DyadLogReader, DyadLogWriter
from cocarry.diffusion.network import EpsNetParams
from cocarry.diffusion.sampler import infer_command
from cocarry.diffusion.schedule import NoiseSchedule, cosine_schedule
from cocarry.diffusion.training import evaluate_intent, load_intent_checkpoint, save_intent_checkpoint, train_intent
from cocarry.dyad.dataset import build_dataset, load_dataset, save_dataset, split_dataset
from cocarry.dyad.logio import DyadLog
from cocarry.dyad.physics import IntentFollower
from cocarry.dyad.trials import TrialSpec, run_trial, trial_grid
from cocarry.exceptions import BoundDetectionError, ConfigError, MetricsError, ShapeError, SimulationError
from cocarry.format import create_table, format_metric, render_table
from cocarry.log import get_logger
from cocarry.metrics.report import (
    TrialMetrics,
    build_report,
    evaluate_log,
    evaluate_trial,
    load_metrics_csv,
    render_report,
    write_report,
)
from cocarry.ppo.policy import GaussianPolicy, load_policy_checkpoint, save_policy_checkpoint
from cocarry.ppo.training import evaluate_tracking, train_ppo
from cocarry.seeding import derive_seed

logger = get_logger(__name__)

PathLike = Union[str, Path]

DATASET_FILE = "dataset.ccry"
INTENT_CHECKPOINT = "intent.ckpt"
INTENT_CURVE = "intent_loss.csv"
INTENT_EVAL = "intent_eval.json"
PPO_MODES = ("adaptive", "baseline")
LEARNED_COLUMN = "Learned follower"
ADMITTANCE_COLUMN = "Admittance follower"


def policy_checkpoint_name(mode: str) -> str:
    return f"policy_{mode}.ckpt"


def log_name(spec: TrialSpec, follower: str = "admittance") -> str:
    return f"logs/{follower}/trial_{spec.index:03d}_{spec.kind}_{spec.payload:g}kg.jsonl"


def _write_json(path: Path, data: Dict[str, Any]) -> Path:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _write_log(artifacts: ArtifactDirectory, name: str, log: DyadLog) -> Path:
    path = artifacts.path(name)
    with DyadLogWriter(path) as writer:
        writer.write(log)
    return path


def read_dyad_log(path: PathLike) -> DyadLog:
    with DyadLogReader(path) as reader:
        return reader.read()


# -- gen-data ---------------------------------------------------------------------


def simulate_grid(
    config: ExperimentConfig,
    specs: Sequence[TrialSpec],
    workers: int = 1,
    follower_factory: Any = None,
) -> List[DyadLog]:
    """Simulate ``specs`` in order; ``workers > 1`` fans out without changing the results."""
    if workers > 1:
        return simulate_batch(specs, config.dyad, config.seed, workers, follower_factory=follower_factory)
    return [
        run_trial(spec, config.dyad, config.seed, follower_factory() if follower_factory else None) for spec in specs
    ]


def generate_data(config: ExperimentConfig, artifacts: ArtifactDirectory, workers: int = 1) -> Dict[str, Any]:
    """Demonstration logs for the full trial grid plus the windowed dataset."""
    specs = trial_grid(config.dyad)
    logger.info("simulating %d trials (%d primitives x %d payloads x %d repetitions)", len(specs), len(PRIMITIVE_KINDS), len(config.dyad.payloads), config.dyad.repetitions)
    logs = simulate_grid(config, specs, workers)
    for spec, log in zip(specs, logs):
        _write_log(artifacts, log_name(spec), log)
    data = build_dataset(
        logs,
        stride=config.intent.window_stride,
        meta={"seed": config.seed, "trials": len(specs), "config_hash": artifacts.config_hash},
    )
    save_dataset(artifacts.path(DATASET_FILE), data)
    logger.info("dataset: %d windows from %d trials", len(data), len(specs))
    return {"trials": len(specs), "samples": len(data), "dataset": DATASET_FILE}


# -- intent model -----------------------------------------------------------------


def train_intent_run(
    config: ExperimentConfig,
    artifacts: ArtifactDirectory,
    dataset_path: Optional[PathLike] = None,
) -> Dict[str, Any]:
    """Train on the training split, save the checkpoint and curve, score the held-out split."""
    data = load_dataset(dataset_path or artifacts.root / DATASET_FILE)
    train, held_out = split_dataset(data, config.intent.holdout_fraction, config.seed)
    logger.info("training intent model on %d windows (%d held out)", len(train), len(held_out))
    params, curve = train_intent(train, config.intent, config.seed, curve_path=artifacts.path(INTENT_CURVE))
    save_intent_checkpoint(
        artifacts.path(INTENT_CHECKPOINT),
        params,
        cosine_schedule(config.intent.diffusion_steps),
        config_hash=artifacts.config_hash,
        extra={"seed": config.seed, "train_samples": len(train)},
    )
    summary: Dict[str, Any] = {
        "checkpoint": INTENT_CHECKPOINT,
        "steps": len(curve),
        "final_loss": float(curve["l_total"].iloc[-1]) if len(curve) else float("nan"),
    }
    if len(held_out):
        scores = evaluate_intent(held_out, params, config.intent, config.seed)
        _write_json(artifacts.path(INTENT_EVAL), dict(scores))
        summary.update(scores)
    return summary


def window_at_frame(log: DyadLog, frame: int, window: int) -> Tuple[np.ndarray, np.ndarray]:
    """The last ``window`` wrench samples at or before frame ``frame``."""
    if not -len(log.frame_t) <= frame < len(log.frame_t):
        raise ConfigError(
            f"Frame {frame} is outside the log ({len(log.frame_t)} frames)",
            key="frame",
        )
    end = int(np.searchsorted(log.wrench_t, log.frame_t[frame], side="right"))
    if end < window:
        raise ShapeError(
            "Not enough wrench history before this frame",
            node="wrench_window",
            expected=(window,),
            actual=(end,),
            suggestions=["Pick a later frame"],
        )
    return log.force[end - window : end], log.torque[end - window : end]


def infer_run(
    config: ExperimentConfig,
    artifacts: ArtifactDirectory,
    checkpoint: PathLike,
    log_path: PathLike,
    frame: int = -1,
) -> Dict[str, Any]:
    """Command triple ``(v_x, v_y, omega_z)`` for the window ending at one frame of a log."""
    params, schedule, _ = load_intent_checkpoint(checkpoint)
    log = read_dyad_log(log_path)
    cfg = params.config
    force, torque = window_at_frame(log, frame, cfg.horizon * cfg.block_size)
    seed = int(derive_seed(config.seed, "infer", frame) % 2**31)
    command = infer_command(force, torque, params, schedule, config.intent.sample_steps, seed, config.intent.wavelet)
    result = {"log": str(log_path), "frame": frame, "command": [float(v) for v in command]}
    _write_json(artifacts.path("infer.json"), result)
    return result


def intent_follower(params: EpsNetParams, schedule: NoiseSchedule, config: ExperimentConfig, seed: int) -> IntentFollower:
    def predict(force: np.ndarray, torque: np.ndarray, draw_seed: int) -> np.ndarray:
        return infer_command(force, torque, params, schedule, config.intent.sample_steps, draw_seed, config.intent.wavelet)

    cfg = params.config
    return IntentFollower(predict, config.dyad.block_ticks, cfg.horizon * cfg.block_size, seed)


def _follower_factory(
    kind: str,
    config: ExperimentConfig,
    checkpoint: Optional[PathLike],
) -> Any:
    if kind != "intent":
        return None
    if checkpoint is None:
        raise ConfigError("The intent follower needs --checkpoint", key="checkpoint")
    params, schedule, _ = load_intent_checkpoint(checkpoint)
    seed = int(derive_seed(config.seed, "rollout", "intent") % 2**31)
    return lambda: intent_follower(params, schedule, config, seed)


def rollout_run(
    config: ExperimentConfig,
    artifacts: ArtifactDirectory,
    primitive: str,
    payload: float,
    follower: str = "intent",
    checkpoint: Optional[PathLike] = None,
) -> Dict[str, Any]:
    """One closed-loop trial with the chosen follower, written as a dyad log."""
    if primitive not in PRIMITIVE_KINDS:
        raise ConfigError(f"Unknown primitive '{primitive}'", key="primitive", suggestions=[f"Choose one of: {', '.join(PRIMITIVE_KINDS)}"])
    factory = _follower_factory(follower, config, checkpoint)
    spec = TrialSpec(0, primitive, float(payload), 0)
    log = simulate_grid(config, [spec], 1, factory)[0]
    name = log_name(spec, follower).replace("logs/", "rollouts/", 1)
    _write_log(artifacts, name, log)
    return {"log": name, "primitive": primitive, "payload": float(payload), "follower": follower, "duration": log.duration}


# -- PPO ----------------------------------------------------------------------------


def train_ppo_run(config: ExperimentConfig, artifacts: ArtifactDirectory, modes: Sequence[str] = PPO_MODES) -> Dict[str, Any]:
    """Train the payload-randomized (adaptive) and/or the no-randomization (baseline) policy."""
    summary: Dict[str, Any] = {}
    for mode in modes:
        if mode not in PPO_MODES:
            raise ConfigError(f"Unknown PPO mode '{mode}'", key="mode", suggestions=["Use adaptive, baseline or both"])
        policy, curves = train_ppo(
            config.ppo,
            config.randomization,
            config.seed,
            baseline=mode == "baseline",
            curve_path=artifacts.path(f"ppo_curve_{mode}.csv"),
        )
        save_policy_checkpoint(
            artifacts.path(policy_checkpoint_name(mode)),
            policy,
            {"mode": mode, "seed": config.seed, "config_hash": artifacts.config_hash},
        )
        summary[mode] = {
            "checkpoint": policy_checkpoint_name(mode),
            "updates": len(curves),
            "final_tracking_error": float(curves["tracking_error"].iloc[-1]) if len(curves) else float("nan"),
        }
    return summary


def eval_seed(config: ExperimentConfig) -> int:
    """Seed of the shared evaluation environments, distinct from every training stream."""
    return int(derive_seed(config.seed, "ppo", "eval") % 2**63)


def eval_ppo_run(
    config: ExperimentConfig,
    artifacts: ArtifactDirectory,
    checkpoints: Optional[Dict[str, PathLike]] = None,
) -> Dict[str, Any]:
    """Paired tracking evaluation of each policy at the held-out payload."""
    if not checkpoints:
        checkpoints = {mode: artifacts.root / policy_checkpoint_name(mode) for mode in PPO_MODES}
    policies: Dict[str, GaussianPolicy] = {name: load_policy_checkpoint(path)[0] for name, path in checkpoints.items()}
    seed = eval_seed(config)
    results = {
        name: dict(
            evaluate_tracking(
                policy,
                config.randomization,
                config.ppo.eval_payload,
                config.ppo.eval_episodes,
                seed,
                episode_length_s=config.ppo.episode_length_s,
                sigma=config.ppo.reward_sigma,
            )
        )
        for name, policy in policies.items()
    }
    summary: Dict[str, Any] = {"payload_force": config.ppo.eval_payload, "episodes": config.ppo.eval_episodes, "policies": results}
    if "adaptive" in results and "baseline" in results:
        base = results["baseline"]["tracking_error"]
        summary["relative_reduction"] = (base - results["adaptive"]["tracking_error"]) / base if base else float("nan")

    table = render_table(create_table(tracking_rows(results), title=f"Velocity tracking at {config.ppo.eval_payload:g} N payload"))
    _write_json(artifacts.path("eval_ppo.json"), summary)
    artifacts.path("eval_ppo.txt").write_text(table, encoding="utf-8")
    summary["table"] = table
    return summary


def tracking_rows(results: Dict[str, Dict[str, float]]) -> List[Dict[str, str]]:
    return [
        {
            "Policy": name,
            "Tracking error (m/s)": format_metric(scores["tracking_error"], scores["tracking_error_std"], 4),
            "Mean reward": format_metric(scores["mean_reward"], digits=4),
        }
        for name, scores in results.items()
    ]


# -- metrics -----------------------------------------------------------------------


def evaluate_input(path: PathLike, config: ExperimentConfig) -> TrialMetrics:
    """Metrics for one input: a bare ``.csv`` or a dyad log."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        pair, wrenches, series = load_metrics_csv(path)
        return evaluate_trial(pair, wrenches, series, config.metrics, label=path.stem)
    return evaluate_log(read_dyad_log(path), config.metrics, label=path.stem)


def metrics_run(config: ExperimentConfig, artifacts: ArtifactDirectory, inputs: Sequence[PathLike]) -> Dict[str, Any]:
    if not inputs:
        raise ConfigError("metrics needs at least one --input", key="input")
    trials = [evaluate_input(path, config) for path in inputs]
    report = build_report(trials)
    artifacts.track_all(write_report(report, artifacts.root))
    return {"trials": len(trials), "report": report.to_dict(), "table": render_report(report)}


def _score_logs(logs: Sequence[DyadLog], config: ExperimentConfig, column: str) -> List[TrialMetrics]:
    scored = []
    for log in logs:
        try:
            scored.append(evaluate_log(log, config.metrics))
        except (BoundDetectionError, MetricsError) as exc:
            logger.warning("%s: skipping trial %s (%s)", column, log.meta.get("trial"), exc.message)
    return scored


# -- reproduce ------------------------------------------------------------------------


def reproduce(config: ExperimentConfig, artifacts: ArtifactDirectory, workers: int = 1) -> Dict[str, Any]:
    """The whole pipeline from one seed: data, intent model, closed-loop comparison, PPO."""
    summary: Dict[str, Any] = {"gen_data": generate_data(config, artifacts, workers)}
    summary["train_intent"] = train_intent_run(config, artifacts)

    specs = [spec for spec in trial_grid(config.dyad) if spec.repetition == 0]
    factory = _follower_factory("intent", config, artifacts.root / INTENT_CHECKPOINT)
    learned: List[DyadLog] = []
    for spec in specs:
        try:
            log = simulate_grid(config, [spec], 1, factory)[0]
        except SimulationError as exc:
            logger.warning("learned follower left the stability bound on trial %d: %s", spec.index, exc.message)
            continue
        _write_log(artifacts, log_name(spec, "intent"), log)
        learned.append(log)
    reference = [read_dyad_log(artifacts.root / log_name(spec)) for spec in specs]

    columns = {
        LEARNED_COLUMN: _score_logs(learned, config, LEARNED_COLUMN),
        ADMITTANCE_COLUMN: _score_logs(reference, config, ADMITTANCE_COLUMN),
    }
    for column in [name for name, trials in columns.items() if not trials]:
        logger.warning("%s: no trial could be scored; column left out of the report", column)
        del columns[column]
    report = build_report(columns)
    artifacts.track_all(write_report(report, artifacts.root))
    summary["metrics"] = report.to_dict()
    summary["table"] = render_report(report)

    summary["train_ppo"] = train_ppo_run(config, artifacts)
    ppo_eval = eval_ppo_run(config, artifacts)
    summary["eval_ppo"] = {k: v for k, v in ppo_eval.items() if k != "table"}
    summary["ppo_table"] = ppo_eval["table"]
    return summary
