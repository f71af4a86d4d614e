"""Single-method time-domain simulation command"""

import logging
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
from vsc.models.schemas import SCHEMA_VERSION
from vsc.services.metrics import compute_metrics
from vsc.services.simulation import (
    FixedGainLaw,
    ScheduledLaw,
    fixed_law_at,
    passivity_energy_check,
    pid_controller,
    simulate_closed_loop,
)

logger = logging.getLogger(__name__)

METHODS = ("scheduled", "fixed", "pid")


@click.command("simulate")
@schedule_option(required=False)
@config_option
@seed_option
@out_option
@click.option("--method", type=click.Choice(METHODS), default="scheduled", show_default=True)
@click.option("--zd", type=float, default=None, help="Stiffness at which the 'fixed' method freezes the schedule")
@handle_errors
def simulate(
    schedule_path: Optional[Path],
    config_path: Optional[Path],
    seed: Optional[int],
    out_dir: Optional[Path],
    method: str,
    zd: Optional[float],
):
    """
    Simulate the configured scenario under one controller.

    'scheduled' and 'fixed' need --schedule; 'fixed' also needs --zd; 'pid'
    tunes the baseline from the config. Writes trace_<method>.csv,
    energy_<method>.csv, metrics.csv, simulate.json and manifest.json. Exits
    with code 2 when the energy check fails.
    """
    config, writer = prepare_run(config_path, seed, out_dir)
    if method in ("scheduled", "fixed") and schedule_path is None:
        raise click.UsageError(f"--schedule is required for method '{method}'")
    if method == "fixed" and zd is None:
        raise click.UsageError("--zd is required for method 'fixed'")
    schedule = read_schedule(schedule_path) if schedule_path is not None else None

    document = {"schema_version": SCHEMA_VERSION, "method": method}
    if method == "scheduled":
        law = ScheduledLaw(schedule)
    elif method == "fixed":
        law = fixed_law_at(schedule, zd)
    else:
        with writer.stage("pid"):
            baseline = tune_pid(config, schedule)
        law = FixedGainLaw(pid_controller(baseline.gains), name="pid")
        document["pid"] = baseline.model_dump(mode="json")

    plant = schedule.plant if schedule is not None else config.plant
    scenario = build_scenario(config, plant.k_s)
    logger.info(f"Simulating '{law.name}' for {scenario.duration}s at dt={scenario.dt}...")
    with writer.stage("simulate"):
        trace = simulate_closed_loop(plant, law, scenario)
    metrics = compute_metrics(trace)
    energy, check = passivity_energy_check(trace)

    writer.write_trace(trace, f"trace_{method}.csv")
    writer.write_energy(trace, energy, f"energy_{method}.csv")
    writer.write_metrics({method: metrics})
    document.update(metrics=metrics.model_dump(mode="json"), energy=check.model_dump(mode="json"))
    writer.write_json("simulate.json", document)
    writer.write_manifest("simulate", config, exit_code=0 if check.passive else 2)

    click.echo(f"{method}: ME={metrics.me:.4g} SSE={metrics.sse:.4g} MCO={metrics.mco:.4g} SNR={metrics.snr:.4g}")
    if not check.passive:
        gate_failed(f"Energy check failed: min W={check.min_energy:.4g} below -{check.tolerance:.4g}")
