"""Command-line entry point"""

import logging

import click

from vsc import __version__
from vsc.commands.compare import compare
from vsc.commands.simulate import simulate
from vsc.commands.sweep import sweep_freq
from vsc.commands.synth import synth
from vsc.commands.verify import verify
from vsc.config import settings

logger = logging.getLogger(__name__)


@click.group()
@click.version_option(__version__, prog_name="vsc")
@click.option("--log-level", type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False), default=None)
def cli(log_level: str | None):
    """Gain-scheduled impedance control synthesis for series elastic actuators."""
    level = (log_level or settings.log_level).upper()
    logging.getLogger().setLevel(getattr(logging, level, logging.INFO))


cli.add_command(synth)
cli.add_command(verify)
cli.add_command(simulate)
cli.add_command(compare)
cli.add_command(sweep_freq)


def main():
    cli()


if __name__ == "__main__":
    main()
