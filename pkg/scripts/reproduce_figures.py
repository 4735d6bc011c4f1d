#!/usr/bin/env python3
"""
Write the potential profiles behind every figure as CSV, with unit couplings
"""

import os
import sys
from pathlib import Path

# Add parent directory to path to import project modules
sys.path.insert(0, str(Path(__file__).parent.parent))

from dotenv import load_dotenv
from rich.console import Console
from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn
from rich.table import Table

from src.analysis import potential_profile
from src.errors import PTSpecError
from src.report_writer import ReportWriter
from src.run_config import RunConfig

# Load environment variables
load_dotenv()

console = Console()

# figure -> (family, parameters, grid overrides)
FIGURES = [
    ("fig1_inverse_power_1", "inverse-power-1", {"lambda": 1.0}, {"eps": 0.01, "L": 10.0, "n": 1000}),
    ("fig1_inverse_power_2", "inverse-power-2", {"lambda": 1.0}, {"eps": 0.01, "L": 10.0, "n": 1000}),
    ("fig2_shifted_quartic_1", "shifted-quartic-1", {}, {"L": 3.0, "n": 601}),
    ("fig3_shifted_quartic_2", "shifted-quartic-2", {}, {"L": 3.0, "n": 601}),
    ("fig4_poeschl_teller_1", "poeschl-teller-1", {"mu": 1.0, "lambda": 1.0}, {"L": 6.0, "n": 1201}),
    ("fig5_cubic", "cubic", {"mu": 1.0, "g": 1.0}, {"L": 3.0, "n": 601}),
    ("fig6_quartic", "quartic", {"a": 1.0, "beta": 1.0, "c": 1.0, "delta": 1.0}, {"L": 3.0, "n": 601}),
]


def write_profile(name: str, family: str, params: dict, grid: dict, out_dir: Path) -> int:
    """Write x, Re V, Im V (and the SUSY partner when known) for one figure"""
    config = RunConfig.from_sources("plotdata", overrides={
        "potential": {"family": family, "params": params},
        "grid": grid,
    }).resolved()
    columns, table = potential_profile(config.build_potential(), config.build_grid())
    writer = ReportWriter(config, out_dir / f"{name}.csv")
    return writer.write_csv(columns, zip(*table))


def main():
    out_dir = Path(os.getenv("PTSPEC_FIGURES_DIR", "figures"))

    console.print("[bold blue]Figure data[/bold blue]")
    console.print(f"Output: {out_dir}\n")

    results = []
    with Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        TextColumn("({task.completed}/{task.total})"),
        console=console,
    ) as progress:
        task = progress.add_task("[cyan]Writing profiles", total=len(FIGURES))
        for name, family, params, grid in FIGURES:
            try:
                rows = write_profile(name, family, params, grid, out_dir)
                results.append((name, family, str(rows), ""))
            except PTSpecError as e:
                results.append((name, family, "-", str(e)))
            progress.advance(task)

    table = Table(title="Figure profiles")
    table.add_column("File", style="cyan")
    table.add_column("Family", style="green")
    table.add_column("Rows", justify="right")
    table.add_column("Error", style="red")
    for row in results:
        table.add_row(*row)
    console.print(table)

    return 1 if any(error for *_, error in results) else 0


if __name__ == "__main__":
    sys.exit(main())
