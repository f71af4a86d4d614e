"""Scheduled controller versus PID baseline comparison command"""

import logging
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

import click

from vsc.commands.common import (
    build_scenario,
    config_option,
    gate_failed,
    handle_errors,
    out_option,
    prepare_run,
    read_schedule,
    schedule_option,
    seed_option,
    tune_pid,
)
from vsc.config import settings
from vsc.models.schemas import SCHEMA_VERSION
from vsc.services.metrics import compare_metrics, comparison_orderings, compute_metrics
from vsc.services.simulation import comparison_laws, passivity_energy_check, simulate_closed_loop

logger = logging.getLogger(__name__)


def _simulate_job(args):
    params, law, scenario = args
    return simulate_closed_loop(params, law, scenario)


@click.command("compare")
@schedule_option()
@config_option
@seed_option
@out_option
@click.option("--workers", type=click.IntRange(min=1), default=None, help="Processes for the two simulations")
@handle_errors
def compare(
    schedule_path: Path,
    config_path: Optional[Path],
    seed: Optional[int],
    out_dir: Optional[Path],
    workers: Optional[int],
):
    """
    Simulate the stepped-stiffness scenario with the scheduled controller and
    a gain-fixed PID tuned at the reference stiffness.

    Writes trace_scheduled.csv, trace_pid.csv, metrics.csv, pid_baseline.json,
    comparison.json and manifest.json. Exits with code 2 when the scheduled
    run fails the energy check or loses one of the orderings against the PID
    (lower SSE and MCO, MCO below u_max, higher SNR).
    """
    config, writer = prepare_run(config_path, seed, out_dir)
    schedule = read_schedule(schedule_path)
    scenario = build_scenario(config, schedule.plant.k_s)

    logger.info("Tuning PID baseline...")
    with writer.stage("pid"):
        baseline = tune_pid(config, schedule)
    writer.write_json("pid_baseline.json", baseline)

    laws = comparison_laws(schedule, baseline.gains)
    jobs = [(schedule.plant, law, scenario) for law in laws]
    workers = workers or settings.workers
    logger.info(f"Simulating {len(jobs)} controllers for {scenario.duration:g}s (workers={workers})...")
    with writer.stage("simulate"):
        if workers > 1:
            with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
                traces = list(pool.map(_simulate_job, jobs))
        else:
            traces = [_simulate_job(job) for job in jobs]

    metrics = {}
    energy = {}
    for trace in traces:
        writer.write_trace(trace, f"trace_{trace.method}.csv")
        metrics[trace.method] = compute_metrics(trace)
        _, energy[trace.method] = passivity_energy_check(trace)
    writer.write_metrics(metrics)

    scheduled, pid = metrics["scheduled"], metrics["pid"]
    winners = compare_metrics(scheduled, pid, ("scheduled", "pid"))
    passive = energy["scheduled"].passive
    orderings = comparison_orderings(scheduled, pid, schedule.plant.u_max)
    failed = [name for name, held in orderings.items() if not held]
    passed = passive and not failed
    writer.write_json(
        "comparison.json",
        {
            "schema_version": SCHEMA_VERSION,
            "metrics": {name: m.model_dump(mode="json") for name, m in metrics.items()},
            "winners": winners,
            "energy": {name: check.model_dump(mode="json") for name, check in energy.items()},
            "pid_feasible": baseline.feasible,
            "orderings": orderings,
            "failed_orderings": failed,
            "passed": passed,
        },
    )
    writer.write_manifest("compare", config, exit_code=0 if passed else 2)

    for name, m in metrics.items():
        click.echo(f"{name}: ME={m.me:.4g} SSE={m.sse:.4g} MCO={m.mco:.4g} SNR={m.snr:.4g}")
    click.echo(f"Winners: {winners}")
    if not passive:
        gate_failed("Energy check failed for the scheduled controller")
    if failed:
        gate_failed(f"Scheduled controller fails the orderings against the PID: {failed}")
