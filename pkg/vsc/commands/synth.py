"""Gain-schedule synthesis command"""

import logging
from pathlib import Path
from typing import Optional

import click

from vsc.commands.common import (
    config_option,
    design_points,
    gate_failed,
    handle_errors,
    out_option,
    plant_builder,
    prepare_run,
    seed_option,
)
from vsc.config import settings
from vsc.errors import InfeasibleDesignError
from vsc.services.synthesis import synthesize_schedule

logger = logging.getLogger(__name__)


@click.command("synth")
@config_option
@seed_option
@out_option
@click.option("--workers", type=click.IntRange(min=1), default=None, help="Processes for cold-started design points")
@handle_errors
def synth(config_path: Optional[Path], seed: Optional[int], out_dir: Optional[Path], workers: Optional[int]):
    """
    Tune every design point and fit the polynomial gain schedule.

    Writes schedule.json, design_points.json, gains_vs_stiffness.csv and
    manifest.json. Exits with code 2 when a design point is infeasible.
    """
    config, writer = prepare_run(config_path, seed, out_dir)
    points = design_points(config)
    zd_max = config.synthesis.zd_max_fraction * config.plant.k_s

    logger.info(f"Synthesizing schedule over {len(points)} design points...")
    try:
        with writer.stage("synthesis"):
            schedule, results = synthesize_schedule(
                plant_builder(config),
                config.constraints,
                config.template,
                points,
                config.synthesis.order,
                config.seed,
                settings=config.synthesis,
                zd_max=zd_max,
                workers=workers or settings.workers,
            )
    except InfeasibleDesignError as e:
        writer.write_design_points(e.results)
        writer.write_manifest("synth", config, exit_code=2)
        gate_failed(f"Synthesis failed: {e}")
        return

    writer.write_schedule(schedule)
    writer.write_design_points(results)
    writer.write_gain_curves(schedule)
    writer.write_manifest("synth", config)
    click.echo(f"Schedule with {len(results)} feasible design points written to {writer.out_dir}")
