"""Frequency-response sweep command"""

import logging
from pathlib import Path
from typing import Optional

import click

from vsc.commands.common import (
    config_option,
    handle_errors,
    out_option,
    prepare_run,
    read_schedule,
    schedule_option,
    schedule_plant_builder,
    seed_option,
)
from vsc.models.schemas import SCHEMA_VERSION
from vsc.services.constraints import constraint_sweep, evaluate_all
from vsc.services.synthesis import StructuredController, clamp_stiffness, close_loop, eval_schedule

logger = logging.getLogger(__name__)


@click.command("sweep-freq")
@schedule_option()
@config_option
@seed_option
@out_option
@click.option("--zd", "zds", type=float, multiple=True, required=True, help="Stiffness to sweep; repeatable")
@click.option("--points-per-decade", type=click.IntRange(min=5), default=50, show_default=True)
@handle_errors
def sweep_freq(
    schedule_path: Path,
    config_path: Optional[Path],
    seed: Optional[int],
    out_dir: Optional[Path],
    zds: tuple[float, ...],
    points_per_decade: int,
):
    """
    Write the constrained closed-loop magnitudes and the passivity index of
    the scheduled controller at each --zd.

    One freq_<constraint>_Zd<value>.csv per constraint and stiffness with
    columns omega, magnitude, bound, in_band; sweep_summary.json lists the
    constraint reports.
    """
    config, writer = prepare_run(config_path, seed, out_dir)
    schedule = read_schedule(schedule_path)
    builder = schedule_plant_builder(schedule)
    spec = schedule.constraints

    reports = []
    with writer.stage("sweep"):
        for zd in zds:
            gains = eval_schedule(schedule, zd)
            controller = StructuredController.from_gains(schedule.template, gains.values)
            value, _ = clamp_stiffness(schedule, zd)
            closed = close_loop(builder(value), controller)
            for curve in constraint_sweep(closed, spec, points_per_decade):
                writer.write_sweep(curve, f"freq_{curve.name}_Zd{zd:g}.csv")
            report = evaluate_all(closed, spec)
            reports.append({"zd": zd, "report": report.model_dump(mode="json")})
            logger.info(f"Swept Zd={zd:g}: overall={report.overall:.4f}")

    writer.write_json("sweep_summary.json", {"schema_version": SCHEMA_VERSION, "sweeps": reports})
    writer.write_manifest("sweep-freq", config)
    click.echo(f"Frequency sweeps for {len(zds)} stiffnesses written to {writer.out_dir}")
