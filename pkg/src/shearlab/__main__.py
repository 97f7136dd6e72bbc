"""Allow running as python -m shearlab."""

from shearlab.cli import cli

cli()
