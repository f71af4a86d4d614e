"""Schedule verification command"""

import logging
from pathlib import Path
from typing import Optional

import click

from vsc.commands.common import (
    config_option,
    gate_failed,
    handle_errors,
    out_option,
    prepare_run,
    read_schedule,
    schedule_option,
    schedule_plant_builder,
    seed_option,
)
from vsc.models.schemas import SCHEMA_VERSION, VerificationSummary
from vsc.services.synthesis import off_design_sweep, verify_schedule

logger = logging.getLogger(__name__)


def _summary_document(summary: VerificationSummary) -> dict:
    return {
        "count": summary.count,
        "violations": summary.violations,
        "unstable": summary.unstable,
        "violating_zd": [c.zd for c in summary.checks if not c.report.all_passed],
    }


@click.command("verify")
@schedule_option()
@config_option
@seed_option
@out_option
@click.option("--points", type=click.IntRange(min=0), default=None, help="Off-design stiffnesses (default from config)")
@click.option("--zd", "extra_zd", type=float, multiple=True, help="Additional stiffness to check; repeatable")
@click.option("--max-violations", type=click.IntRange(min=0), default=None, help="Allowed off-design violations")
@handle_errors
def verify(
    schedule_path: Path,
    config_path: Optional[Path],
    seed: Optional[int],
    out_dir: Optional[Path],
    points: Optional[int],
    extra_zd: tuple[float, ...],
    max_violations: Optional[int],
):
    """
    Evaluate all constraints with scheduled gains at the design points and
    over an off-design sweep.

    Writes verify_design.csv, verify_sweep.csv, verify_summary.json and
    manifest.json. Exits with code 2 when a design point violates a bound, a
    sweep point is unstable, or the sweep violations exceed the allowance.
    """
    config, writer = prepare_run(config_path, seed, out_dir)
    schedule = read_schedule(schedule_path)
    builder = schedule_plant_builder(schedule)
    spec = schedule.constraints
    count = points if points is not None else config.verify.off_design_points
    allowed = max_violations if max_violations is not None else config.verify.max_violations

    with writer.stage("verify"):
        design = verify_schedule(schedule, builder, spec, [dp.zd for dp in schedule.design_points])
        sweep = verify_schedule(schedule, builder, spec, off_design_sweep(schedule, count) + list(extra_zd))

    passed = design.violations == 0 and sweep.unstable == 0 and sweep.violations <= allowed
    writer.write_verification(design, "verify_design.csv")
    writer.write_verification(sweep, "verify_sweep.csv")
    writer.write_json(
        "verify_summary.json",
        {
            "schema_version": SCHEMA_VERSION,
            "design": _summary_document(design),
            "off_design": _summary_document(sweep),
            "max_violations": allowed,
            "passed": passed,
        },
    )
    writer.write_manifest("verify", config, exit_code=0 if passed else 2)

    click.echo(
        f"Design points: {design.violations}/{design.count} with violations; "
        f"sweep: {sweep.violations}/{sweep.count} with violations, {sweep.unstable} unstable"
    )
    if not passed:
        gate_failed("Verification gate failed")
