"""Shared helpers for the line-oriented instance and corpus files."""
from __future__ import annotations

from typing import Iterator

from .problem import ParseError


def iter_records(text: str) -> Iterator[tuple[int, list[tuple[int, str]], int | None]]:
    """Split a corpus into blank-line separated records.

    Yields ``(first_line_number, [(line_number, line), ...], seed)``; a leading
    ``#seed <int>`` line is consumed and reported as ``seed``.
    """
    block: list[tuple[int, str]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.rstrip()
        if line.strip():
            block.append((lineno, line))
        elif block:
            yield _record(block)
            block = []
    if block:
        yield _record(block)


def _record(block: list[tuple[int, str]]) -> tuple[int, list[tuple[int, str]], int | None]:
    seed = None
    start = block[0][0]
    if block[0][1].startswith("#seed"):
        parts = block[0][1].split()
        if len(parts) != 2:
            raise ParseError("expected '#seed <int>'", start)
        try:
            seed = int(parts[1])
        except ValueError:
            raise ParseError(f"bad seed {parts[1]!r}", start) from None
        block = block[1:]
    block = [(n, l) for n, l in block if not l.startswith("#")]
    return start, block, seed


def parse_ints(line: str, lineno: int, count: int | None = None) -> list[int]:
    out = []
    for tok in line.split():
        if tok == ".":
            out.append(0)
            continue
        try:
            out.append(int(tok))
        except ValueError:
            raise ParseError(f"not an integer: {tok!r}", lineno) from None
    if count is not None and len(out) != count:
        raise ParseError(f"expected {count} fields, got {len(out)}", lineno)
    return out


def format_grid(grid, n: int, empty: str = ".") -> list[str]:
    width = len(str(max(int(v) for v in grid))) if len(grid) else 1
    width = max(width, len(empty))
    rows = []
    for r in range(n):
        cells = []
        for c in range(n):
            v = int(grid[r * n + c])
            cells.append((empty if v == 0 else str(v)).rjust(width))
        rows.append(" ".join(cells))
    return rows
