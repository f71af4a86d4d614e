"""
One-off coarse grid search for static feasibility witnesses.

Scans u = k1 * tau_h_meas + k2 * e over a logarithmic grid at each
requested stiffness and prints every static pair whose closed loop meets
all bounds. Used to seed the design-point tests with a known-feasible
controller.

Usage:
    python scripts/find_feasibility_witness.py --zd 0.1 --zd 1.0
"""

import logging
import sys
from pathlib import Path

import click
import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from vsc.config import resolve_run_config  # noqa: E402
from vsc.services.constraints import ConstraintObjective, evaluate_all  # noqa: E402
from vsc.services.lti import RationalTF  # noqa: E402
from vsc.services.plant import AugmentedPlantBuilder  # noqa: E402
from vsc.services.synthesis import StructuredController, close_loop  # noqa: E402

logger = logging.getLogger(__name__)

K2_GRID = np.geomspace(1.0, 1e4, 41)
K1_GRID = np.concatenate([-np.geomspace(1.0, 1e3, 13)[::-1], [0.0], np.geomspace(1.0, 1e3, 13)])


@click.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--zd", "zds", type=float, multiple=True, required=True)
@click.option("--top", type=int, default=10, show_default=True, help="Witnesses printed per stiffness")
def main(config_path, zds, top):
    """Search static (k1, k2) pairs and print the best by worst normalized constraint value"""
    config = resolve_run_config(config_path)
    builder = AugmentedPlantBuilder(config.plant, config.weight, config.constraints.omega_e)
    spec = config.constraints

    for zd in zds:
        plant = builder(zd)
        objective = ConstraintObjective(plant.sys, spec)
        found = []
        for k1 in K1_GRID:
            for k2 in K2_GRID:
                controller = StructuredController([RationalTF.static(k1), RationalTF.static(k2)])
                value = objective(controller)
                if value <= 1.0:
                    found.append((value, float(k1), float(k2)))

        click.echo("=" * 60)
        click.echo(f"Zd = {zd:g}: {len(found)} static pairs below the bounds")
        click.echo(f"{'k1':>12} {'k2':>12} {'worst':>10} {'report':>10}")
        click.echo("-" * 60)
        for value, k1, k2 in sorted(found)[:top]:
            controller = StructuredController([RationalTF.static(k1), RationalTF.static(k2)])
            report = evaluate_all(close_loop(plant, controller), spec)
            click.echo(f"{k1:12.4g} {k2:12.4g} {value:10.4f} {report.overall:10.4f}")


if __name__ == "__main__":
    main()
