#!/usr/bin/env python3
"""
Spectra of the inverse-power families as the cutoff eps shrinks
"""

import os
import sys
from pathlib import Path

# Add parent directory to path to import project modules
sys.path.insert(0, str(Path(__file__).parent.parent))

from dotenv import load_dotenv
from rich.console import Console
from rich.table import Table

from src.analysis import CUTOFF_SCAN, cutoff_scan
from src.errors import PTSpecError
from src.run_config import RunConfig

# Load environment variables
load_dotenv()

console = Console()


def study(family: str, lam: float, cutoffs):
    config = RunConfig.from_sources("check", overrides={
        "potential": {"family": family, "params": {"lambda": lam}},
    }).resolved()
    return cutoff_scan(config.build_potential(), config.build_grid(),
                       config.solver_options(), cutoffs)


def main():
    lam = float(os.getenv("PTSPEC_LAMBDA", "1.0"))
    extra = os.getenv("PTSPEC_CUTOFFS")
    cutoffs = tuple(float(v) for v in extra.split(",")) if extra else CUTOFF_SCAN

    for family in ("inverse-power-1", "inverse-power-2"):
        console.print(f"\n[bold blue]{family}[/bold blue] (lambda = {lam})")
        try:
            entries = study(family, lam, cutoffs)
        except PTSpecError as e:
            console.print(f"[red]❌ {e}[/red]")
            return 1

        table = Table()
        table.add_column("eps", justify="right", style="cyan")
        table.add_column("retained", justify="right")
        table.add_column("verdict", style="green")
        table.add_column("h/eps", justify="right")
        table.add_column("lowest levels")
        for entry in entries:
            lowest = ", ".join(f"{E.real:.6g}{E.imag:+.2g}i" for E in entry.levels[:3])
            ratio = f"{entry.h_over_eps:.3g}" if entry.resolved else f"[yellow]{entry.h_over_eps:.3g}[/yellow]"
            table.add_row(f"{entry.eps:g}", str(entry.retained_count),
                          str(entry.reality_verdict), ratio, lowest or "-")
        console.print(table)

    return 0


if __name__ == "__main__":
    sys.exit(main())
