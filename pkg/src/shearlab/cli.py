"""Click CLI entry point for ShearLab."""

from __future__ import annotations

import functools
import logging
from pathlib import Path
from typing import List, Optional

import click
import numpy as np

from shearlab import __version__
from shearlab.console import (
    console,
    print_assumption,
    print_audit,
    print_error,
    print_info,
    print_mapping,
    print_rows,
    print_run_summary,
    print_spectra,
    print_success,
    print_sweep,
    print_welcome,
    progress_bar,
)
from shearlab.core.config import ConfigManager, Settings, load_run_file
from shearlab.core.errors import ShearLabError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INVARIANT = 2
EXIT_BLOWUP = 3


def _boot(ctx: click.Context, run_file: Optional[str] = None):
    cm = ConfigManager(ctx.obj.get("config_path"))
    cm.load_config()
    if cm.status.value == "error":
        logger.warning(f"Config {cm.config_path}: {cm.error_message}; using bundled defaults")
        settings = Settings.from_dict(cm.get_default_config())
    else:
        settings = cm.settings()
    if run_file:
        settings = load_run_file(Path(run_file), settings.to_dict())
    return cm, settings


def _setup_logging(verbose: int) -> None:
    from rich.logging import RichHandler

    level = {0: logging.WARNING, 1: logging.INFO}.get(verbose, logging.DEBUG)
    logging.basicConfig(
        level=level, format="%(message)s", datefmt="[%X]", handlers=[RichHandler(console=console)], force=True
    )


def _float_list(value: Optional[str]) -> Optional[List[float]]:
    if value is None:
        return None
    try:
        return [float(x) for x in value.split(",") if x.strip()]
    except ValueError as e:
        raise click.BadParameter(f"expected comma-separated numbers: {e}")


def _int_list(value: Optional[str]) -> Optional[List[int]]:
    floats = _float_list(value)
    return None if floats is None else [int(x) for x in floats]


def handle_errors(func):
    """Map library errors to exit code 1 with a message instead of a traceback."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except ShearLabError as e:
            print_error(f"{type(e).__name__}: {e}")
            raise SystemExit(EXIT_INPUT)

    return wrapper


def _profile(settings: Settings, spec: Optional[str], nu: Optional[float] = None):
    from shearlab.core.profile import load_profile

    return load_profile(spec or settings.profile.spec, settings.grid.build(), settings.simulation.nu if nu is None else nu)


@click.group(invoke_without_command=True)
@click.version_option(__version__, prog_name="shearlab")
@click.option("-v", "--verbose", count=True, help="-v for INFO, -vv for DEBUG logging")
@click.option("--config", "config_path", type=click.Path(dir_okay=False, path_type=Path), help="Alternative config file")
@click.pass_context
def cli(ctx, verbose, config_path):
    """ShearLab - pseudo-spectral lab for monotone shear flow stability."""
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path
    _setup_logging(verbose)
    if ctx.invoked_subcommand is None:
        cm, settings = _boot(ctx)
        print_welcome(__version__, cm.get_status_info(), settings)
        console.print("Run [bold]shearlab --help[/bold] for the list of commands.")


@cli.command("check-profile")
@click.option("--profile", "profile_spec", help="couette, tanh-bump:a,w, gevrey-bump:a,r or a CSV path")
@click.option("--k-max", type=int, help="Require a continuous Rayleigh spectrum for k = 1..K (config profile.k_max; 0 skips)")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), help="CSV report")
@click.pass_context
@handle_errors
def check_profile(ctx, profile_spec, k_max, out):
    """Check monotonicity, b'' support and Gevrey decay of a profile."""
    from shearlab.core.io import write_table
    from shearlab.core.profile import check_assumption

    _, settings = _boot(ctx)
    profile = _profile(settings, profile_spec)
    report = check_assumption(
        profile,
        settings.profile.k_max if k_max is None else k_max,
        settings.profile.spectrum_tolerance,
        settings.profile.assumption_tolerance,
    )
    print_assumption(report)
    if out:
        write_table(out, ["check", "value"], list(report.to_dict().items()))
        print_info(f"Report written to {out}")
    raise SystemExit(EXIT_OK if report.passed else EXIT_INVARIANT)


@cli.command()
@click.option("--profile", "profile_spec", help="Profile spec")
@click.option("--k", "k_values", default="1,2,3,4", show_default=True, help="Comma-separated wavenumbers")
@click.option("--tolerance", type=float, help="Im(lambda) tolerance")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), help="CSV of eigenvalues (k, re, im)")
@click.pass_context
@handle_errors
def spectrum(ctx, profile_spec, k_values, tolerance, out):
    """Rayleigh spectrum of the linearized Euler operator per k."""
    from shearlab.core.io import write_csv
    from shearlab.core.rayleigh import SpectralVerdict, stability_verdict, worst_verdict

    _, settings = _boot(ctx)
    profile = _profile(settings, profile_spec)
    reports = stability_verdict(profile, _int_list(k_values), tolerance or settings.profile.spectrum_tolerance)
    print_spectra(reports)
    if out:
        write_csv(out, ["k", "re", "im"], [row for r in reports for row in r.rows()])
        print_info(f"Eigenvalues written to {out}")
    raise SystemExit(EXIT_OK if worst_verdict(reports) is SpectralVerdict.CONTINUOUS else EXIT_INVARIANT)


@cli.command("multiplier-audit")
@click.option("--nu", type=float, help="Viscosity")
@click.option("--K", "K", type=float, help="Ghost constant")
@click.option("--points", type=int, help="Sample points")
@click.option("--seed", type=int, help="Sampling seed")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), help="CSV report")
@click.pass_context
@handle_errors
def multiplier_audit(ctx, nu, K, points, seed, out):
    """Audit the ghost-multiplier inequalities on random (t, k, eta) points."""
    from shearlab.core.io import write_table
    from shearlab.core.multipliers import AuditResult
    from shearlab.core.multipliers import multiplier_audit as audit

    _, settings = _boot(ctx)
    m = settings.multiplier
    if K is not None:
        m.K = K
    spec = m.build(nu if nu is not None else settings.simulation.nu)
    results = audit(spec, points or m.audit_points, m.seed if seed is None else seed)
    print_audit(results)
    if out:
        write_table(out, AuditResult.HEADER, [r.to_row() for r in results])
        print_info(f"Audit written to {out}")
    raise SystemExit(EXIT_OK if all(r.passed for r in results) else EXIT_INVARIANT)


@cli.command()
@click.option("--profile", "profile_spec", help="Profile spec")
@click.option("--k", type=int, default=1, show_default=True, help="Wavenumber")
@click.option("--t-end", type=float, default=2.0, show_default=True, help="Final time")
@click.option("--dt", type=float, help="Time step")
@click.option("--scheme", type=click.Choice(["ifab2", "cnab2"]), default="ifab2", show_default=True)
@click.option("--crosscheck", is_flag=True, help="Compare against the representation formula")
@click.option("--tolerance", type=float, default=1e-3, show_default=True, help="Crosscheck tolerance")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), help="CSV of (t, ||F_k||)")
@click.pass_context
@handle_errors
def linear(ctx, profile_spec, k, t_end, dt, scheme, crosscheck, tolerance, out):
    """Evolve the linear profile F_k driven by a pulse Omega*."""
    from shearlab.core.io import write_csv
    from shearlab.core.linear import LinearProfileSolver, pulse_forcing, representation_crosscheck

    _, settings = _boot(ctx)
    profile = _profile(settings, profile_spec)
    forcing = pulse_forcing(profile.grid, duration=min(1.0, t_end))
    step = dt or settings.simulation.dt
    result = LinearProfileSolver(profile, k, step, scheme=scheme, omega_star=forcing).run(t_end, 50)
    norms = np.sqrt(profile.grid.h * np.sum(np.abs(result.values) ** 2, axis=1))
    rows = np.column_stack([result.times, norms])
    print_rows(f"Linear profile k={k}", ["t", "||F_k||"], rows[:: max(1, len(rows) // 10)])
    if out:
        write_csv(out, ["t", "F_norm"], rows)
        print_info(f"History written to {out}")
    code = EXIT_OK
    if crosscheck:
        report = representation_crosscheck(profile, k, forcing, t_end)
        print_mapping("Representation cross-check", {
            "discrepancy": report.discrepancy, "mu": report.mu,
            "min Re spec": report.min_real_eigenvalue, "contour ok": report.contour_ok,
        })
        if report.discrepancy > tolerance:
            code = EXIT_INVARIANT
    raise SystemExit(code)


@cli.command()
@click.argument("run_file", required=False, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), default="shearlab-run", show_default=True)
@click.option("--split", is_flag=True, help="Carry Omega = F + Omega*")
@click.option("--linear", "linear_only", is_flag=True, help="Drop the nonlinear terms")
@click.option("--epsilon", type=float, help="Amplitude in units of nu^(1/3)")
@click.option("--t-end", type=float, help="Final time")
@click.option("--resume", type=click.Path(exists=True, file_okay=False), help="Checkpoint directory to resume from")
@click.option("--checkpoint", is_flag=True, help="Write a checkpoint of the final state")
@click.option("--strict", is_flag=True, help="Exit 3 on a blow-up verdict")
@click.pass_context
@handle_errors
def simulate(ctx, run_file, out, split, linear_only, epsilon, t_end, resume, checkpoint, strict):
    """Run the nonlinear moving-frame simulator and write diagnostics.csv."""
    from shearlab.core.simulator import Verdict, read_checkpoint, run, write_checkpoint

    _, settings = _boot(ctx, run_file)
    overrides = {}
    if split:
        overrides["split_mode"] = "split"
    if linear_only:
        overrides["nonlinear"] = False
    if epsilon is not None:
        overrides["epsilon_amp"] = epsilon
    if t_end is not None:
        overrides["t_end"] = t_end
    config = settings.simulation_config(**overrides)
    state = None
    if resume:
        state, _ = read_checkpoint(resume, config.grid.dealias_fraction)
        if (state.F is not None) != config.split:
            raise click.UsageError("checkpoint split mode does not match the run configuration")

    with progress_bar() as prog:
        task = prog.add_task("Simulating", total=config.t_end, completed=state.t if state else 0.0)
        result = run(config, progress=lambda t: prog.update(task, completed=t), resume=state)

    print_run_summary(result)
    path = result.write_diagnostics(out / "diagnostics.csv")
    if config.keep_snapshots:
        result.write_snapshots(out / "snapshots")
    if checkpoint:
        write_checkpoint(result.final_state, config.grid, out / "checkpoint")
    print_success(f"Diagnostics written to {path}")
    if strict and result.verdict is Verdict.BLOWUP:
        raise SystemExit(EXIT_BLOWUP)
    raise SystemExit(EXIT_OK)


@cli.command()
@click.argument("plan_file", required=False, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), help="Phase table CSV")
@click.option("--workers", type=int, help="Worker processes")
@click.pass_context
@handle_errors
def sweep(ctx, plan_file, out, workers):
    """Bisect the stability threshold in amplitude for every (profile, nu, seed)."""
    from shearlab.services.sweep import SweepPlan, sweep_threshold

    _, settings = _boot(ctx, plan_file)
    plan = SweepPlan.from_settings(settings)
    if workers is not None:
        plan.workers = workers
    report = sweep_threshold(plan)
    print_sweep(report)
    path = report.write(out or plan.output_dir / "phase_table.csv")
    print_success(f"Phase table written to {path}")
    raise SystemExit(EXIT_OK if report.monotone_fraction >= 0.95 else EXIT_INVARIANT)


@cli.command()
@click.option("--nu-list", default="1e-3,3.1622776601683794e-4,1e-4", show_default=True)
@click.option("--k-list", default="1", show_default=True)
@click.option("--source", type=click.Choice(["oracle", "simulation"]), default="oracle", show_default=True)
@click.option("--profile", "profile_spec", help="Profile spec for the simulation source")
@click.option("--tolerance", type=float, help="Allowed |slope - 1/3| (0.03 oracle, 0.08 simulation)")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), help="CSV of fitted rates")
@click.pass_context
@handle_errors
def dissipation(ctx, nu_list, k_list, source, profile_spec, tolerance, out):
    """Fit the enhanced-dissipation rate lambda(nu) and its nu^(1/3) scaling."""
    from shearlab.services.experiments import DISSIPATION_HEADER, measure_enhanced_dissipation

    _, settings = _boot(ctx)
    report = measure_enhanced_dissipation(
        _float_list(nu_list), settings.grid.build(), _int_list(k_list), source, settings, profile_spec
    )
    print_rows("Enhanced dissipation", DISSIPATION_HEADER, [r.to_row() for r in report.rows])
    console.print(f"slope d log(lambda) / d log(nu) = [bold]{report.slope:.4f}[/bold] (target 1/3)")
    if len(report.k_ratios) > 1:
        print_mapping("lambda(k) / lambda(k0) vs k^(2/3)", {
            f"k={k}": f"{ratio:.4f} (k^(2/3) = {k ** (2.0 / 3.0):.4f})" for k, ratio in report.k_ratios.items()
        })
    if out:
        report.write(out)
        print_info(f"Rates written to {out}")
    allowed = tolerance if tolerance is not None else (0.03 if source == "oracle" else 0.08)
    raise SystemExit(EXIT_OK if abs(report.slope - 1.0 / 3.0) <= allowed else EXIT_INVARIANT)


@cli.command()
@click.option("--nu-list", default="1e-4,1e-5,1e-6", show_default=True)
@click.option("--max-spread", type=float, default=0.1, show_default=True, help="Allowed relative spread of the integrals")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), help="CSV of damping functionals")
@click.pass_context
@handle_errors
def damping(ctx, nu_list, max_spread, out):
    """Time-integrated H^-1 decay of the Couette passive scalar across viscosities."""
    from shearlab.services.experiments import DAMPING_HEADER, measure_inviscid_damping

    _boot(ctx)
    summary = measure_inviscid_damping(_float_list(nu_list))
    print_rows("Inviscid damping", DAMPING_HEADER, [r.to_row() for r in summary.rows])
    console.print(f"relative spread of the integrals: [bold]{summary.spread:.3%}[/bold]")
    if out:
        summary.write(out)
        print_info(f"Functionals written to {out}")
    ok = summary.within_bound and summary.spread <= max_spread
    raise SystemExit(EXIT_OK if ok else EXIT_INVARIANT)


@cli.group()
def config():
    """View and manage configuration."""
    pass


@config.command()
@click.pass_context
def show(ctx):
    """Display current configuration."""
    cm = ConfigManager(ctx.obj.get("config_path"))
    cm.load_config()
    for name, section in cm.settings().to_dict().items():
        print_mapping(name, section)


@config.command()
@click.pass_context
def reset(ctx):
    """Reset configuration to defaults."""
    cm = ConfigManager(ctx.obj.get("config_path"))
    cm.load_config()
    if click.confirm("Reset to default configuration?"):
        cm.reset_to_defaults()
        print_success("Configuration reset to defaults.")


@config.command()
@click.pass_context
def edit(ctx):
    """Open configuration in $EDITOR."""
    import os
    import subprocess
    cm = ConfigManager(ctx.obj.get("config_path"))
    cm.load_config()
    editor = os.environ.get("EDITOR", "nano")
    subprocess.run([editor, str(cm.config_path)])


@config.command("path")
@click.pass_context
def config_path(ctx):
    """Print configuration file path."""
    cm = ConfigManager(ctx.obj.get("config_path"))
    click.echo(cm.config_path)
