"""Table output formatting using Rich."""

from __future__ import annotations

from typing import TYPE_CHECKING, Any

import numpy as np
from rich.console import Console
from rich.panel import Panel
from rich.table import Table

from opsystk.systems.opsys import Answer, ConeVerdict, OperatorSystem

if TYPE_CHECKING:
    from opsystk.atlas.suites import SuiteReport
    from opsystk.systems.matricial import BoundaryPoint

_ANSWER_STYLE = {
    Answer.MEMBER: "green",
    Answer.NOT_MEMBER: "red",
    Answer.UNDECIDED: "yellow",
}
_STATUS_STYLE = {"pass": "green", "fail": "red", "undecided": "yellow"}


def _format_scalar(value: Any) -> str | None:
    """Short text for scalars; None for arrays and nested data."""
    if isinstance(value, (bool, str)):
        return str(value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.6g}"
    return None


def _certificate_lines(cert: dict[str, Any], indent: str = "") -> list[str]:
    lines = []
    for key, value in cert.items():
        if key.startswith("_"):
            continue
        if isinstance(value, ConeVerdict):
            lines.append(f"{indent}[bold]{key}:[/bold] {value.answer.value}")
            lines.extend(_certificate_lines(value.certificate, indent + "  "))
            continue
        text = _format_scalar(value)
        if text is not None:
            lines.append(f"{indent}[bold]{key}:[/bold] {text}")
        elif isinstance(value, np.ndarray):
            lines.append(f"{indent}[bold]{key}:[/bold] [dim]array {value.shape}[/dim]")
    return lines


def format_verdict(verdict: ConeVerdict, subject: str) -> None:
    """Print a verdict with a summary of its certificate."""
    console = Console()
    style = _ANSWER_STYLE[verdict.answer]
    lines = [f"[bold]Answer:[/bold] [{style}]{verdict.answer.value}[/{style}]"]
    lines.append(f"[bold]Tolerance:[/bold] {verdict.tol:g}")
    lines.append("")
    lines.extend(_certificate_lines(verdict.certificate))
    console.print(Panel("\n".join(lines), title=subject, border_style=style))


def format_system_detail(system: OperatorSystem) -> None:
    """Print the summary of an operator system."""
    console = Console()
    lines = []
    for key, value in system.summary().items():
        if isinstance(value, (list, tuple)):
            value = ", ".join(str(v) for v in value)
        lines.append(f"[bold]{key}:[/bold] {value}")
    console.print(Panel("\n".join(lines), title=system.name, border_style="blue"))


def format_mapping(data: dict[str, Any], title: str) -> None:
    """Print flat key/value results such as norm bounds."""
    console = Console()
    table = Table(show_header=False, title=title, title_style="bold")
    table.add_column("Key", style="bold")
    table.add_column("Value", justify="right")
    for key, value in data.items():
        text = _format_scalar(value)
        table.add_row(str(key), text if text is not None else str(value))
    console.print(table)


def format_suite_table(report: SuiteReport, show_all: bool = False) -> None:
    """Print a suite report; passing checks are folded unless show_all is set."""
    console = Console()

    table = Table(show_header=True, header_style="bold")
    table.add_column("Check", style="dim", no_wrap=True)
    table.add_column("Status")
    table.add_column("Verdicts", max_width=50)
    table.add_column("Detail", max_width=40)
    table.add_column("ms", justify="right")

    for record in report.checks:
        if record.status.value == "pass" and not show_all:
            continue
        style = _STATUS_STYLE[record.status.value]
        verdicts = ", ".join(f"{k}={v}" for k, v in record.verdicts.items())
        table.add_row(
            record.check_id,
            f"[{style}]{record.status.value}[/{style}]",
            verdicts,
            record.detail,
            f"{record.elapsed * 1000:.0f}",
        )

    if table.row_count:
        console.print(table)

    counts = report.counts
    style = _STATUS_STYLE[report.status.value]
    console.print(
        f"\n[bold]{report.suite}[/bold] [{style}]{report.status.value}[/{style}]"
        f"  pass {counts['pass']}  fail {counts['fail']}  undecided {counts['undecided']}"
        f"  [dim](seed {report.seed}, {report.elapsed:.2f}s)[/dim]"
    )


def format_boundary_table(points: list[BoundaryPoint]) -> None:
    """Print sampled support values of a numerical range."""
    console = Console()

    table = Table(show_header=True, header_style="bold")
    table.add_column("Angle", justify="right")
    table.add_column("Support", justify="right")
    table.add_column("Re", justify="right")
    table.add_column("Im", justify="right")

    for p in points:
        table.add_row(f"{p.angle:.4f}", f"{p.support:.6g}", f"{p.point.real:.6g}", f"{p.point.imag:.6g}")

    console.print(table)
