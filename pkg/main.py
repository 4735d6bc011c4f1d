#!/usr/bin/env python3

import functools
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import click
import numpy as np
from dotenv import load_dotenv
from rich.console import Console
from rich.logging import RichHandler
from rich.progress import BarColumn, Progress, TextColumn

from src.analysis import claim_check, partner_isospectrality, potential_profile
from src.dynamics import (SERIES_COLUMNS, continuity_defect, crank_nicolson_propagate,
                          gaussian_packet, pt_symmetric_packet)
from src.eigensolve import (extrapolated_shooting, richardson_eigenvalues, scan_rectangle,
                            solve_spectrum)
from src.errors import ConfigError, ConstructionError, ConvergenceError, PTSpecError
from src.potentials import partner_superpotential, susy_partner_pair
from src.report_writer import ReportWriter
from src.run_config import CLI_FAMILIES, RunConfig, load_config_file

# Load environment variables
load_dotenv()

console = Console(stderr=True)
logger = logging.getLogger("ptspec")

SPECTRUM_COLUMNS = ("k", "re_E", "im_E", "class", "partner", "boundary_mass",
                    "box_stability", "bound", "refined", "engine_gap")


def potential_options(f: Callable) -> Callable:
    """Family, parameter, grid and solver flags shared by every subcommand"""
    options = [
        click.option("--family", type=click.Choice(CLI_FAMILIES), help="Potential family"),
        click.option("--mu", type=float, help="Scale mu (sech families, harmonic term of the cubic)"),
        click.option("--lambda", "lam", type=float, help="Coupling lambda"),
        click.option("--lambdatilde", type=float, help="Pöschl-Teller strength lambda-tilde (> 1/2)"),
        click.option("--g", type=float, help="Cubic coupling g"),
        click.option("--a", type=float, help="Quartic coefficient a"),
        click.option("--beta", type=float, help="Quartic coefficient beta"),
        click.option("--c", type=float, help="Quartic coefficient c"),
        click.option("--delta", type=float, help="Quartic coefficient delta"),
        click.option("--variant", type=click.Choice(["derived", "printed"]),
                     help="Sign of the 1/x^3 term of inverse-power-2"),
        click.option("--L", "half_width", type=float, help="Box half-width, or x_max on the half-line"),
        click.option("--n", type=int, help="Number of grid nodes"),
        click.option("--eps", type=float, help="Half-line cutoff (inverse-power families)"),
        click.option("--stencil", type=click.Choice(["3pt", "5pt"]), help="Finite-difference stencil"),
        click.option("--method", type=click.Choice(["dense", "shooting", "richardson"]),
                     help="Eigenvalue engine for the retained levels"),
        click.option("--levels", type=int, help="Number of retained levels judged and refined"),
        click.option("--dense-cap", type=int, help="Largest matrix order for the dense solver"),
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                     help="YAML config file (flags override it)"),
        click.option("--output", "-o", type=click.Path(dir_okay=False), help="Output file (default: stdout)"),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def build_config(command: str, kwargs: Dict[str, Any], **sections: Dict[str, Any]) -> RunConfig:
    """Merge defaults, the optional YAML file and the CLI flags, flags last"""
    params = {"mu": kwargs["mu"], "lambda": kwargs["lam"], "lambdatilde": kwargs["lambdatilde"],
              "g": kwargs["g"], "a": kwargs["a"], "beta": kwargs["beta"], "c": kwargs["c"],
              "delta": kwargs["delta"]}
    overrides = {
        "potential": {"family": kwargs["family"], "variant": kwargs["variant"],
                      "params": {k: v for k, v in params.items() if v is not None}},
        "grid": {"L": kwargs["half_width"], "n": kwargs["n"], "eps": kwargs["eps"],
                 "stencil": kwargs["stencil"]},
        "solver": {"method": kwargs["method"], "levels": kwargs["levels"],
                   "dense_cap": kwargs["dense_cap"]},
    }
    for name, values in sections.items():
        overrides[name] = {**overrides.get(name, {}), **values}
    file_data = load_config_file(kwargs["config_path"]) if kwargs["config_path"] else None
    return RunConfig.from_sources(command, file_data, overrides).resolved()


def run_command(f: Callable) -> Callable:
    """Map failures to exit codes: usage problems 2, domain and solver errors 1"""
    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except ConfigError as e:
            raise click.UsageError(str(e))
        except (PTSpecError, ValueError) as e:
            console.print(f"[red]Error: {e}[/red]")
            sys.exit(1)
    return wrapper


def writer_for(config: RunConfig, kwargs: Dict[str, Any]) -> ReportWriter:
    output = kwargs["output"]
    return ReportWriter(config, Path(output) if output else None)


def spectrum_rows(report) -> List[Tuple]:
    return [
        (k, e.E.real, e.E.imag, e.cls, e.partner, e.boundary_mass, e.box_stability,
         e.bound, e.refined, e.engine_gap)
        for k, e in enumerate(report.entries)
    ]


@click.group()
@click.option("--verbose", "-v", is_flag=True, help="Debug logging on stderr")
def cli(verbose: bool):
    """
    PT-symmetric Schrödinger spectra - eigenvalues, shooting refinement,
    continuity checks and SUSY partner comparisons for complex potentials.
    """
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(message)s",
        handlers=[RichHandler(console=console, show_path=False)],
        force=True,
    )


@cli.command()
@potential_options
@run_command
def spectrum(**kwargs):
    """Full classified matrix spectrum as CSV"""
    config = build_config("spectrum", kwargs)
    spec, grid = config.build_potential(), config.build_grid()
    report = solve_spectrum(spec, grid, config.solver_options())
    writer_for(config, kwargs).write_csv(SPECTRUM_COLUMNS, spectrum_rows(report),
                                         extra_header=[f"continuum_threshold: {report.threshold!r}",
                                                       f"conjugation_gap: {report.conjugation_gap!r}"])
    levels = report.retained_levels(config.solver.levels)
    lowest = f"{levels[0].E.real:.10g}{levels[0].E.imag:+.3g}i" if levels else "none"
    console.print(f"[green]{spec.name}[/green]: {len(report.retained)} retained levels, lowest E = {lowest}")


@cli.command()
@potential_options
@click.option("--scan", nargs=4, type=float, default=None,
              metavar="RE_MIN RE_MAX IM_MIN IM_MAX", help="Tabulate |residual| on a rectangle instead")
@click.option("--n-re", type=int, default=41, show_default=True)
@click.option("--n-im", type=int, default=21, show_default=True)
@run_command
def shoot(scan: Optional[Tuple[float, float, float, float]], n_re: int, n_im: int, **kwargs):
    """Refine the retained matrix levels with the shooting engine"""
    config = build_config("shoot", kwargs)
    spec, grid = config.build_potential(), config.build_grid()
    writer = writer_for(config, kwargs)

    if scan:
        energies, magnitudes = scan_rectangle(spec, grid, scan[:2], scan[2:], n_re, n_im)
        rows = [(E.real, E.imag, m) for E, m in zip(energies.ravel(), magnitudes.ravel())]
        writer.write_csv(("re_E", "im_E", "abs_residual"), rows)
        console.print(f"[green]{spec.name}[/green]: scanned {len(rows)} energies")
        return

    options = replace(config.solver_options(), method="dense")
    levels = solve_spectrum(spec, grid, options).retained_levels(options.levels)
    # both engines extrapolated over h, h/2, h/4 before they are compared
    references = richardson_eigenvalues(spec, grid, options,
                                        seeds=np.array([e.E for e in levels], dtype=complex), depth=2)
    rows = []
    failed = 0
    for k, (entry, reference) in enumerate(zip(levels, references)):
        try:
            E = extrapolated_shooting(spec, grid, entry.E, options)
        except ConvergenceError as e:
            logger.warning(f"level {k}: {e}")
            rows.append((k, entry.E.real, entry.E.imag, reference.real, reference.imag,
                         None, None, None, "failed"))
            failed += 1
            continue
        rows.append((k, entry.E.real, entry.E.imag, reference.real, reference.imag,
                     E.real, E.imag, abs(E - reference), "converged"))
    writer.write_csv(("k", "re_E_matrix", "im_E_matrix", "re_E_reference", "im_E_reference",
                      "re_E_shoot", "im_E_shoot", "engine_gap", "status"), rows)
    console.print(f"[green]{spec.name}[/green]: refined {len(rows) - failed} of {len(rows)} levels")


@cli.command()
@potential_options
@click.option("--dt", type=float, help="Time step")
@click.option("--steps", type=int, help="Number of steps")
@click.option("--packet", type=click.Choice(["gaussian", "pt-symmetric"]), help="Initial packet")
@click.option("--center", type=float, help="Packet centre")
@click.option("--width", type=float, help="Packet width")
@click.option("--momentum", type=float, help="Packet momentum")
@run_command
def propagate(dt, steps, packet, center, width, momentum, **kwargs):
    """Crank-Nicolson run with continuity diagnostics as CSV"""
    config = build_config("propagate", kwargs, dynamics={
        "dt": dt, "steps": steps, "packet": packet, "center": center,
        "width": width, "momentum": momentum,
    })
    spec, grid = config.build_potential(), config.build_grid()
    d = config.dynamics
    make_packet = pt_symmetric_packet if d.packet == "pt-symmetric" else gaussian_packet
    psi0 = make_packet(grid, d.center, d.width, d.momentum)
    series = crank_nicolson_propagate(spec, grid, psi0, d.dt, d.steps)
    writer_for(config, kwargs).write_csv(SERIES_COLUMNS, series.rows())
    defect = continuity_defect(series) if len(series) >= 3 else float("nan")
    console.print(f"[green]{spec.name}[/green]: N {series.N[0]:.10g} -> {series.N[-1]:.10g}, "
                  f"continuity defect {defect:.3e}")


@cli.command()
@potential_options
@click.option("--stability/--no-stability", default=None,
              help="Also recheck the verdict on refined and enlarged grids")
@run_command
def check(stability: Optional[bool], **kwargs):
    """Claim report (JSON): is every retained level real, and how much does Im V shift them?"""
    config = build_config("check", kwargs, solver={"stability": stability})
    spec, grid = config.build_potential(), config.build_grid()
    report = claim_check(spec, grid, config.solver_options(),
                         check_stability=config.solver.stability)
    writer_for(config, kwargs).write_json(report)
    colour = "green" if report.reality_verdict else "yellow"
    console.print(f"[{colour}]{spec.name}[/{colour}]: reality verdict {report.reality_verdict} "
                  f"({report.retained_count} retained levels)")


@cli.command()
@potential_options
@run_command
def susy(**kwargs):
    """Compare the family with its SUSY partner (JSON)"""
    config = build_config("susy", kwargs)
    spec, grid = config.build_potential(), config.build_grid()
    found = partner_superpotential(spec)
    if found is None:
        raise ConstructionError(f"{spec.name} has no known superpotential")
    w, branch = found
    v_minus, v_plus = susy_partner_pair(w)
    report = partner_isospectrality(v_minus, v_plus, grid, config.solver_options())
    writer_for(config, kwargs).write_json({
        "superpotential": w.label,
        "family_branch": branch,
        "isospectrality": report,
    })
    console.print(f"[green]{w.label}[/green]: {len(report.pairs)} matched, "
                  f"{report.unpaired_count} unpaired, max mismatch {report.max_mismatch:.3e}")


def sweep_threads(threads: Optional[int]) -> int:
    """
    Worker count for sweeps.

    Args:
        threads: --threads value; None falls back to $PTSPEC_THREADS, then 1

    Returns:
        A positive thread count

    Raises:
        ConfigError: non-integer environment value or a count below 1
    """
    if threads is None:
        raw = os.getenv("PTSPEC_THREADS", "1")
        try:
            threads = int(raw)
        except ValueError:
            raise ConfigError(f"PTSPEC_THREADS must be an integer, got {raw!r}")
    if threads < 1:
        raise ConfigError(f"thread count must be >= 1, got {threads}")
    return threads


@cli.command()
@potential_options
@click.option("--param", "parameter", type=str, help="Parameter to vary")
@click.option("--start", type=float, help="First value")
@click.option("--stop", type=float, help="Last value")
@click.option("--count", type=int, help="Number of values")
@click.option("--threads", type=int, default=None, help="Worker threads (default: $PTSPEC_THREADS or 1)")
@run_command
def sweep(parameter, start, stop, count, threads, **kwargs):
    """Spectrum block per parameter value, varied linearly"""
    config = build_config("sweep", kwargs, sweep={
        "parameter": parameter, "start": start, "stop": stop, "count": count,
    })
    grid, options = config.build_grid(), config.solver_options()
    s = config.sweep
    values = np.linspace(s.start, s.stop, s.count)

    def point(value: float) -> List[Tuple]:
        spec = config.build_potential(**{s.parameter: float(value)})
        report = solve_spectrum(spec, grid, options)
        return [(value, k, e.E.real, e.E.imag, e.cls)
                for k, e in enumerate(report.retained_levels(options.levels))]

    rows: List[Tuple] = []
    with ThreadPoolExecutor(max_workers=sweep_threads(threads)) as pool, Progress(
        TextColumn("[progress.description]{task.description}"), BarColumn(),
        TextColumn("{task.completed}/{task.total}"), console=console, transient=True,
    ) as progress:
        task = progress.add_task(f"Sweeping {s.parameter}", total=len(values))
        # map keeps parameter order regardless of completion order
        for block in pool.map(point, values):
            rows.extend(block)
            progress.advance(task)

    writer_for(config, kwargs).write_csv((s.parameter, "k", "re_E", "im_E", "class"), rows)
    console.print(f"[green]{config.potential.family}[/green]: {len(values)} values of {s.parameter}")


@cli.command()
@potential_options
@run_command
def plotdata(**kwargs):
    """Re V and Im V on the grid, plus the SUSY partner when there is one (CSV)"""
    config = build_config("plotdata", kwargs)
    spec, grid = config.build_potential(), config.build_grid()
    columns, table = potential_profile(spec, grid)
    writer_for(config, kwargs).write_csv(columns, zip(*table))
    console.print(f"[green]{spec.name}[/green]: {grid.n} points")


if __name__ == "__main__":
    cli()
