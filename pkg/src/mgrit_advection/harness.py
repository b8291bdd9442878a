"""Reference iteration counts and the tolerance policy used to judge replications.

The solver and CLI only measure; verdicts against published counts live here.
``None`` in a reference table means the published run did not converge within
50 iterations.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

from mgrit_advection.experiments import TABLE_COLUMNS, column_label

# rows keyed by grid exponent, columns in TABLE_COLUMNS order
REFERENCE_COUNTS: dict[int, dict[int, list[int | None]]] = {
    1: {6: [11, 9, 13, 11], 8: [11, 9, 15, 11], 10: [11, 9, 15, 11], 12: [11, 9, 15, 11]},
    2: {
        6: [20, 5, 16, 4, 14, 5, 9, 5],
        8: [31, 5, None, 6, 24, 5, 32, 5],
        10: [35, 5, None, 6, 31, 5, None, 5],
        12: [36, 5, None, 6, 32, 5, None, 5],
    },
}

# iteration slack per coarse mode; seed and counting conventions shift counts by 1-2
TOLERANCE = {1: {"lls": 2, "nls": 2}, 2: {"redisc": 3, "nls": 1}}


@dataclass(frozen=True)
class CellVerdict:
    table: int
    exponent: int
    column: str
    reference: int | None
    measured: int | None
    tolerance: int
    ok: bool

    def line(self) -> str:
        ref = "DNC" if self.reference is None else str(self.reference)
        got = "DNC" if self.measured is None else str(self.measured)
        status = "ok" if self.ok else "MISS"
        return (f"table {self.table} 2^{self.exponent} {self.column}: "
                f"measured {got}, reference {ref} +/-{self.tolerance} [{status}]")


def judge(reference: int | None, measured: int | None, tolerance: int) -> bool:
    """DNC must match DNC; otherwise the counts must agree within ``tolerance``."""
    if reference is None or measured is None:
        return reference is None and measured is None
    return abs(measured - reference) <= tolerance


def judge_cell(table: int, exponent: int, col_index: int, measured: int | None) -> CellVerdict:
    col = TABLE_COLUMNS[table][col_index]
    tol = TOLERANCE[table][col[-1]]
    ref = REFERENCE_COUNTS[table][exponent][col_index]
    return CellVerdict(table, exponent, column_label(col), ref, measured, tol,
                       judge(ref, measured, tol))


def judge_table_csv(table: int, text: str) -> list[CellVerdict]:
    """Verdicts for every cell of a ``replicate-table`` CSV."""
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    header, *rows = list(csv.reader(io.StringIO("\n".join(lines))))
    verdicts = []
    for row in rows:
        exponent = int(row[0].split("x")[0].removeprefix("2^"))
        for i, cell in enumerate(row[1:]):
            measured = None if cell == "DNC" else int(cell)
            verdicts.append(judge_cell(table, exponent, i, measured))
    return verdicts
