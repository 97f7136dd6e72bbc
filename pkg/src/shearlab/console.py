"""Rich console output helpers for ShearLab."""

from __future__ import annotations

import math
from contextlib import contextmanager
from typing import Any, Dict, Iterable, List

from rich.console import Console
from rich.panel import Panel
from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn, TimeRemainingColumn
from rich.table import Table

console = Console()


def print_welcome(version: str, config_status: Dict[str, Any], settings) -> None:
    grid = Table.grid(padding=(0, 2))
    grid.add_column()
    grid.add_column()
    grid.add_row("Config", f"v{config_status['version']}  ({config_status['status']})")
    if config_status.get("error_message"):
        grid.add_row("Error", f"[red]{config_status['error_message']}[/red]")
    g = settings.grid
    grid.add_row("Grid", f"{g.n_z} x {g.n_v}, L_v = {g.L_v:g}")
    grid.add_row("Profile", settings.profile.spec)
    sim = settings.simulation
    grid.add_row("Run", f"nu = {sim.nu:g}, dt = {sim.dt:g}, t_end = {sim.t_end:g}, {sim.scheme}")
    console.print(Panel(grid, title=f"[bold]ShearLab[/bold] {version}", border_style="blue"))


def _fmt(x: Any) -> str:
    if isinstance(x, bool):
        return "[green]yes[/green]" if x else "[red]no[/red]"
    if isinstance(x, float):
        if math.isnan(x) or math.isinf(x):
            return str(x)
        return f"{x:.4g}"
    return str(x)


def print_mapping(title: str, data: Dict[str, Any]) -> None:
    table = Table(title=title, show_header=False)
    table.add_column("Key", style="cyan")
    table.add_column("Value")
    for key, value in data.items():
        table.add_row(key, _fmt(value))
    console.print(table)


def print_assumption(report) -> None:
    table = Table(title=f"Profile {report.name}")
    table.add_column("Check", style="cyan")
    table.add_column("Value", justify="right")
    table.add_column("Limit", justify="right", style="dim")
    table.add_column("OK")
    table.add_row("b' range", f"[{report.bprime_min:.4g}, {report.bprime_max:.4g}]", f"sigma0 = {report.sigma0:.4g}", _fmt(report.monotone_ok))
    table.add_row("b'' support", _fmt(report.support_radius), _fmt(report.support_limit), _fmt(report.support_ok))
    table.add_row("Gevrey rate", _fmt(report.gevrey_theta), "", _fmt(report.gevrey_ok))
    if report.spectral_ok is not None:
        table.add_row("Spectrum", report.spectral_verdict, "", _fmt(report.spectral_ok))
    console.print(table)


def print_spectra(reports: Iterable) -> None:
    table = Table(title="Rayleigh spectrum")
    table.add_column("k", justify="right", style="cyan")
    table.add_column("max Im", justify="right")
    table.add_column("refined", justify="right", style="dim")
    table.add_column("n_v", justify="right", style="dim")
    table.add_column("Verdict")
    colors = {"continuous": "green", "inconclusive": "yellow", "unstable": "red"}
    for r in reports:
        v = r.verdict.value
        refined = "" if r.refined_max_imag is None else f"{r.refined_max_imag:.3e}"
        table.add_row(str(r.k), f"{r.max_imag:.3e}", refined, str(r.resolution), f"[{colors[v]}]{v}[/{colors[v]}]")
    console.print(table)


def print_audit(results: List) -> None:
    table = Table(title="Multiplier audit")
    table.add_column("Inequality", style="cyan")
    table.add_column("Points", justify="right")
    table.add_column("Violations", justify="right")
    table.add_column("Worst margin", justify="right")
    for r in results:
        style = "green" if r.passed else "red"
        table.add_row(r.name, str(r.n_points), f"[{style}]{r.violations}[/{style}]", f"{r.worst_margin:.3e}")
    console.print(table)


def print_run_summary(result) -> None:
    last = result.records[-1]
    table = Table(title="Simulation", show_header=False)
    table.add_column("Key", style="cyan")
    table.add_column("Value", justify="right")
    table.add_row("t reached", f"{result.final_state.t:.4g}")
    table.add_row("records", str(len(result.records)))
    table.add_row("||Omega||_Hs", f"{last.hs_norm:.4e}")
    table.add_row("||A Omega*||^2", f"{last.A_omega_star_sq:.4e}")
    table.add_row("zero-mode defect", f"{last.consistency_defect:.3e}")
    for key, value in result.details.items():
        table.add_row(key, f"{value:.4g}")
    colors = {"stable": "green", "threshold-exceeded": "yellow", "blow-up": "red"}
    v = result.verdict.value
    table.add_section()
    table.add_row("[bold]verdict[/bold]", f"[bold {colors[v]}]{v}[/bold {colors[v]}]")
    console.print(table)


def print_sweep(report) -> None:
    table = Table(title="Threshold sweep")
    table.add_column("Profile", style="cyan")
    table.add_column("nu", justify="right")
    table.add_column("seed", justify="right", style="dim")
    table.add_column("Status")
    table.add_column("eps*", justify="right")
    table.add_column("A*", justify="right")
    table.add_column("Monotone")
    for r in report.rows:
        table.add_row(r.profile, f"{r.nu:.3g}", str(r.seed), r.status, _fmt(r.eps_star), _fmt(r.A_star), _fmt(r.monotone))
    console.print(table)
    if report.fit is not None:
        console.print(f"beta = [bold]{report.fit.slope:.3f}[/bold] +/- {report.fit.halfwidth:.3f} ({report.fit.n} points)")
    elif report.no_threshold:
        console.print("[green]no threshold[/green]: every chain stayed stable")


def print_rows(title: str, header: List[str], rows: Iterable[Iterable[Any]]) -> None:
    table = Table(title=title)
    for i, name in enumerate(header):
        table.add_column(name, justify="right", style="cyan" if i == 0 else None)
    for row in rows:
        table.add_row(*(_fmt(x) for x in row))
    console.print(table)


@contextmanager
def progress_bar():
    with Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TextColumn("{task.completed:.3g}/{task.total:.3g}"),
        TimeRemainingColumn(),
        console=console,
    ) as progress:
        yield progress


def print_success(msg: str) -> None:
    console.print(f"[green]{msg}[/green]")


def print_error(msg: str) -> None:
    console.print(f"[red]{msg}[/red]")


def print_info(msg: str) -> None:
    console.print(f"[blue]{msg}[/blue]")
