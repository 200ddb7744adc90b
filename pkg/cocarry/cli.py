"""Command-line interface for cocarry."""

import json
import sys
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Sequence, Tuple

import click
from rich.console import Console
from rich.markup import escape

from cocarry.__version__ import __version__
from cocarry.config import ExperimentConfig, config_hash, load_config, save_resolved_config
from cocarry.constants import PRIMITIVE_KINDS
from cocarry.context import ArtifactDirectory
from cocarry.exceptions import CocarryError, ConfigError
from cocarry.experiment import (
    PPO_MODES,
    eval_ppo_run,
    generate_data,
    infer_run,
    metrics_run,
    reproduce,
    rollout_run,
    train_intent_run,
    train_ppo_run,
)
from cocarry.log import configure_logging, get_logger

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

# Unknown ``--section.key value`` flags and ``key=value`` words become config overrides.
OVERRIDES = {"ignore_unknown_options": True, "allow_extra_args": True}

error_console = Console(stderr=True)


def main(args: Optional[Sequence[str]] = None) -> None:
    """Main CLI entry point."""
    sys.exit(run(args))


def run(args: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and map failures to exit codes: 1 for usage and config, 2 at runtime."""
    try:
        result = cli.main(args=list(args) if args is not None else None, prog_name="cocarry", standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return EXIT_USAGE
    except click.Abort:
        error_console.print("[red]Error:[/] aborted")
        return EXIT_USAGE
    except ConfigError as e:
        report_error(e)
        return EXIT_USAGE
    except CocarryError as e:
        report_error(e)
        return EXIT_RUNTIME
    return result if isinstance(result, int) else EXIT_OK


def report_error(error: Exception) -> None:
    error_console.print(f"[red]Error:[/] {escape(str(error))}", highlight=False)


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), help="TOML, JSON or YAML config file")
@click.option("--seed", type=int, default=None, help="Root seed (overrides the config)")
@click.option("--out", "out_dir", type=click.Path(file_okay=False, path_type=Path), default=None, help="Artifact directory")
@click.option(
    "--log-level",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    default="INFO",
    show_default=True,
)
@click.version_option(version=__version__)
@click.pass_context
def cli(ctx: click.Context, config_path: Optional[Path], seed: Optional[int], out_dir: Optional[Path], log_level: str) -> None:
    """cocarry: haptic intent inference and payload-adaptive locomotion for co-carrying.

    Config overrides follow the command, as ``--ppo.clip 0.3`` or ``intent.epochs=5``.
    """
    configure_logging(log_level)
    ctx.obj = {"config_path": config_path, "seed": seed, "out_dir": out_dir}


def resolve(ctx: click.Context) -> ExperimentConfig:
    """Defaults <- config file <- trailing overrides <- --seed/--out."""
    opts = ctx.obj or {}
    out_dir = opts.get("out_dir")
    return load_config(
        opts.get("config_path"),
        ctx.args,
        seed=opts.get("seed"),
        output_dir=str(out_dir) if out_dir is not None else None,
    )


def execute(ctx: click.Context, command: str, task: Callable[[ExperimentConfig, ArtifactDirectory], Dict[str, Any]]) -> Dict[str, Any]:
    config = resolve(ctx)
    with ArtifactDirectory(config.output_dir, command, config.seed, config_hash(config)) as artifacts:
        artifacts.track(save_resolved_config(config, artifacts.root))
        result = task(config, artifacts)
    logger.info("%s finished; artifacts in %s", command, artifacts.root)
    return result


def emit(result: Dict[str, Any], tables: Tuple[str, ...] = ("table", "ppo_table")) -> None:
    """Tables go out as text, everything else as one JSON document."""
    for key in tables:
        if key in result:
            click.echo(result[key])
    click.echo(json.dumps({k: v for k, v in result.items() if k not in tables}, indent=2, sort_keys=True))


@cli.command("gen-data", context_settings=OVERRIDES)
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True, help="Trials simulated concurrently")
@click.pass_context
def gen_data_command(ctx: click.Context, workers: int) -> None:
    """Simulate the demonstration trial grid and build the training dataset."""
    emit(execute(ctx, "gen-data", lambda cfg, art: generate_data(cfg, art, workers)))


@cli.command("train-intent", context_settings=OVERRIDES)
@click.option("--input", "dataset", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None, help="Dataset file (default: <out>/dataset.ccry)")
@click.pass_context
def train_intent_command(ctx: click.Context, dataset: Optional[Path]) -> None:
    """Train the wavelet-conditioned diffusion intent model."""
    emit(execute(ctx, "train-intent", lambda cfg, art: train_intent_run(cfg, art, dataset)))


@cli.command("infer", context_settings=OVERRIDES)
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--log", "log_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.option("--frame", type=int, default=-1, show_default=True, help="Frame index whose preceding window is used")
@click.pass_context
def infer_command(ctx: click.Context, checkpoint: Path, log_path: Path, frame: int) -> None:
    """Infer the follower command (v_x, v_y, omega_z) for one log window."""
    emit(execute(ctx, "infer", lambda cfg, art: infer_run(cfg, art, checkpoint, log_path, frame)))


@cli.command("rollout", context_settings=OVERRIDES)
@click.option("--checkpoint", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None)
@click.option("--primitive", type=click.Choice(PRIMITIVE_KINDS), default="forward", show_default=True)
@click.option("--payload", type=click.FloatRange(min=0), default=0.0, show_default=True, help="kg")
@click.option(
    "--follower",
    type=click.Choice(["intent", "admittance", "frozen", "slaved"]),
    default="intent",
    show_default=True,
)
@click.pass_context
def rollout_command(ctx: click.Context, checkpoint: Optional[Path], primitive: str, payload: float, follower: str) -> None:
    """Run one closed-loop carrying trial and write its dyad log."""
    emit(execute(ctx, "rollout", lambda cfg, art: rollout_run(cfg, art, primitive, payload, follower, checkpoint)))


@cli.command("train-ppo", context_settings=OVERRIDES)
@click.option("--mode", type=click.Choice([*PPO_MODES, "both"]), default="both", show_default=True)
@click.pass_context
def train_ppo_command(ctx: click.Context, mode: str) -> None:
    """Train the payload-randomized policy, the baseline, or both."""
    modes = PPO_MODES if mode == "both" else (mode,)
    emit(execute(ctx, "train-ppo", lambda cfg, art: train_ppo_run(cfg, art, modes)))


def parse_checkpoints(values: Sequence[str]) -> Dict[str, Path]:
    """``NAME=PATH`` pairs; a bare path is named after its file stem."""
    checkpoints: Dict[str, Path] = {}
    for value in values:
        name, sep, path = value.partition("=")
        if not sep:
            name, path = Path(value).stem, value
        if not Path(path).is_file():
            raise click.BadParameter(f"checkpoint '{path}' does not exist", param_hint="--checkpoint")
        checkpoints[name] = Path(path)
    return checkpoints


@cli.command("eval-ppo", context_settings=OVERRIDES)
@click.option("--checkpoint", "checkpoints", multiple=True, help="NAME=PATH (repeatable; default: both trained policies in --out)")
@click.pass_context
def eval_ppo_command(ctx: click.Context, checkpoints: Tuple[str, ...]) -> None:
    """Compare velocity-tracking error under the held-out payload."""
    chosen = parse_checkpoints(checkpoints) or None
    emit(execute(ctx, "eval-ppo", lambda cfg, art: eval_ppo_run(cfg, art, chosen)))


@cli.command("metrics", context_settings=OVERRIDES)
@click.option("--input", "inputs", multiple=True, type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True, help="Dyad log or metrics CSV (repeatable)")
@click.pass_context
def metrics_command(ctx: click.Context, inputs: Tuple[Path, ...]) -> None:
    """Completion time, trajectory deviation, velocity difference and follower force."""
    result = execute(ctx, "metrics", lambda cfg, art: metrics_run(cfg, art, list(inputs)))
    emit({"table": result["table"], "trials": result["trials"], "columns": result["report"]["columns"]})


@cli.command("reproduce", context_settings=OVERRIDES)
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True)
@click.pass_context
def reproduce_command(ctx: click.Context, workers: int) -> None:
    """The full pipeline from one seed, ending in the comparison report."""
    result = execute(ctx, "reproduce", lambda cfg, art: reproduce(cfg, art, workers))
    emit({k: v for k, v in result.items() if k != "metrics"})


if __name__ == "__main__":
    main()
