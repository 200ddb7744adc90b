"""
Table and number formatting for reports.

Tables are built as rich tables for the console and exported as plain text
for files and tests.
"""

import math
from typing import Any, Dict, List, Optional, Sequence

from rich.console import Console
from rich.table import Table


def format_metric(mean: float, std: Optional[float] = None, digits: int = 4) -> str:
    """
    Format a metric as ``"mean"`` or ``"mean ± std"``.

    Args:
        mean: Metric mean
        std: Standard deviation across trials, or None to omit it
        digits: Decimal places

    Example:
        >>> format_metric(0.1109, 0.002, 3)
        '0.111 ± 0.002'
    """
    if mean is None or (isinstance(mean, float) and math.isnan(mean)):
        return "n/a"
    text = f"{mean:.{digits}f}"
    if std is not None and not math.isnan(std):
        text += f" ± {std:.{digits}f}"
    return text


def create_table(
    data: List[Dict[str, Any]],
    title: Optional[str] = None,
    columns: Optional[Sequence[str]] = None,
) -> Optional[Table]:
    """
    Create a rich Table from rows of dictionaries.

    Column order follows ``columns`` or else the keys of the first row.
    Returns None for an empty row list.
    """
    if len(data) == 0:
        return None

    table = Table(title=title)
    keys = list(columns) if columns is not None else list(data[0].keys())
    for key in keys:
        table.add_column(key)
    for row in data:
        table.add_row(*[str(row.get(key, "")) for key in keys])
    return table


def render_table(table: Optional[Table], width: int = 120) -> str:
    """Plain-text rendering (no colour codes) of a rich table."""
    if table is None:
        return ""
    console = Console(width=width, record=True, color_system=None, force_terminal=False)
    with console.capture() as capture:
        console.print(table)
    return capture.get()


__all__ = [
    "create_table",
    "format_metric",
    "render_table",
]
