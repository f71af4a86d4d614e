"""Shared CLI options, error mapping and run setup"""

import functools
import logging
import math
from pathlib import Path
from typing import Optional

import click
from pydantic import ValidationError

from vsc.config import resolve_run_config, settings, stage_seed
from vsc.errors import VscError
from vsc.models.schemas import GainSchedule, PidBaseline, RunConfig, SimScenario
from vsc.services.artifacts import ArtifactWriter
from vsc.services.plant import AugmentedPlantBuilder
from vsc.services.simulation import make_pid_baseline
from vsc.services.synthesis import load_schedule

logger = logging.getLogger(__name__)

GATE_FAILED = 2

config_option = click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Run configuration (.toml or .json); built-in defaults when omitted",
)
seed_option = click.option("--seed", type=click.IntRange(min=0), default=None, help="Override the top-level seed")
out_option = click.option(
    "--out",
    "out_dir",
    type=click.Path(file_okay=False, path_type=Path),
    default=None,
    help="Output directory (default: VSC_OUT_DIR or runs/latest)",
)


def schedule_option(required: bool = True):
    return click.option(
        "--schedule",
        "schedule_path",
        type=click.Path(dir_okay=False, path_type=Path),
        required=required,
        default=None,
        help="Gain schedule written by 'vsc synth'",
    )


def handle_errors(fn):
    """Map toolkit and validation errors to a logged ClickException (exit code 1)"""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (click.ClickException, click.exceptions.Exit):
            raise
        except ValidationError as e:
            logger.error(f"Invalid input: {e}")
            raise click.ClickException(f"invalid input: {e.error_count()} validation errors\n{e}") from e
        except (VscError, ValueError) as e:
            logger.error(f"{type(e).__name__}: {e}", exc_info=True)
            raise click.ClickException(str(e)) from e

    return wrapper


def gate_failed(message: str) -> None:
    """Exit with the gate-failure code once the artifacts are on disk"""
    logger.warning(message)
    click.echo(message, err=True)
    click.get_current_context().exit(GATE_FAILED)


# =============================================================================
# RUN SETUP
# =============================================================================

def prepare_run(config_path: Optional[Path], seed: Optional[int], out_dir: Optional[Path]) -> tuple[RunConfig, ArtifactWriter]:
    config = resolve_run_config(config_path, seed)
    writer = ArtifactWriter(out_dir or settings.out_dir)
    logger.info(f"Writing artifacts to {writer.out_dir}")
    return config, writer


def plant_builder(config: RunConfig) -> AugmentedPlantBuilder:
    return AugmentedPlantBuilder(config.plant, config.weight, config.constraints.omega_e)


def schedule_plant_builder(schedule: GainSchedule) -> AugmentedPlantBuilder:
    """Plant, weight and bounds stored with the schedule"""
    return AugmentedPlantBuilder(schedule.plant, schedule.weight, schedule.constraints.omega_e)


def design_points(config: RunConfig) -> list[float]:
    k_s = config.plant.k_s
    return [fraction * k_s for fraction in config.synthesis.design_fractions]


def read_schedule(path: Path) -> GainSchedule:
    schedule = load_schedule(path)
    logger.info(f"Loaded schedule {path}: order {schedule.order}, Zd in [{schedule.zd_min:.4g}, {schedule.zd_max:.4g}]")
    return schedule


def build_scenario(config: RunConfig, k_s: Optional[float] = None) -> SimScenario:
    """Stepped-stiffness scenario from the config, seeded from the run seed"""
    scenario = config.scenario
    return SimScenario.stepped(
        k_s if k_s is not None else config.plant.k_s,
        duration=scenario.duration,
        fractions=tuple(scenario.stiffness_fractions),
        dt=scenario.dt,
        sample_dt=scenario.sample_dt,
        motion=scenario.motion,
        disturbance=scenario.disturbance,
        noise=scenario.noise,
        u_max=None if scenario.saturation else math.inf,
        seed=stage_seed(config.seed, "scenario"),
    )


def tune_pid(config: RunConfig, schedule: Optional[GainSchedule] = None) -> PidBaseline:
    """PID baseline at the configured reference stiffness, on the schedule's plant when given"""
    plant = schedule.plant if schedule is not None else config.plant
    spec = schedule.constraints if schedule is not None else config.constraints
    weight = schedule.weight if schedule is not None else config.weight
    zd_max = schedule.zd_max if schedule is not None else config.synthesis.zd_max_fraction * plant.k_s
    return make_pid_baseline(
        plant,
        spec,
        config.pid.zd_ref_fraction * plant.k_s,
        stage_seed(config.seed, "pid"),
        settings=config.pid,
        weight=weight,
        zd_max=zd_max,
    )
