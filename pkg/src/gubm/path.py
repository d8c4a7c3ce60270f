"""Linearization of grid cells and image paths between adjacent interaction signals."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache

from .grid import GridLayout, GridPosition


class Direction(enum.Enum):
    LTOR = "ltor"
    RTOL = "rtol"
    ZSHAPE = "zshape"


@dataclass(frozen=True)
class DirectionPolicy:
    """Assigns a horizontal scan direction to every row.

    For Z-shape, ``first_row_ltr`` fixes the orientation of row 0 and the
    remaining rows alternate.
    """

    variant: Direction = Direction.ZSHAPE
    first_row_ltr: bool = True

    @classmethod
    def parse(cls, value) -> DirectionPolicy:
        if isinstance(value, DirectionPolicy):
            return value
        if isinstance(value, Direction):
            return cls(value)
        try:
            return cls(Direction(str(value).lower().replace("-", "").replace("_", "")))
        except ValueError:
            raise ValueError(f"unknown direction policy {value!r}; expected ltor, rtol or zshape") from None

    @property
    def name(self) -> str:
        return self.variant.value

    def left_to_right(self, row: int) -> bool:
        if self.variant is Direction.LTOR:
            return True
        if self.variant is Direction.RTOL:
            return False
        return (row % 2 == 0) == self.first_row_ltr


LTOR = DirectionPolicy(Direction.LTOR)
RTOL = DirectionPolicy(Direction.RTOL)
ZSHAPE = DirectionPolicy(Direction.ZSHAPE)


@lru_cache(maxsize=4096)
def _tables(row_counts: tuple[int, ...], policy: DirectionPolicy):
    # index[row][col] -> linear index, cells[k] -> position
    index = []
    base = 0
    for r, n in enumerate(row_counts):
        ltr = policy.left_to_right(r)
        row = [base + (c if ltr else n - c - 1) for c in range(n)]
        index.append(tuple(row))
        base += n
    cells = [None] * base
    for r, row in enumerate(index):
        for c, k in enumerate(row):
            cells[k] = GridPosition(r, c)
    return tuple(index), tuple(cells)


def linear_index_table(layout: GridLayout, policy: DirectionPolicy):
    """Per-row tuples of linear indices for every cell."""
    return _tables(layout.row_counts, policy)[0]


def linearize(layout: GridLayout, p: GridPosition, policy: DirectionPolicy = ZSHAPE) -> int:
    layout.check_position(p)
    return _tables(layout.row_counts, policy)[0][p[0]][p[1]]


def delinearize(layout: GridLayout, k: int, policy: DirectionPolicy = ZSHAPE) -> GridPosition:
    if not 0 <= k < layout.total:
        raise ValueError(f"linear index {k} outside [0, {layout.total})")
    return _tables(layout.row_counts, policy)[1][k]


@dataclass(frozen=True)
class ImagePath:
    """Cells from one interaction signal to the next, in scan order.

    A path leaving the virtual session start begins at linear index -1 and a
    path reaching the virtual session end stops at ``total``; those endpoints
    are not grid cells and appear as ``None`` in ``positions``.
    """

    start_lin: int
    end_lin: int
    positions: tuple[GridPosition | None, ...]
    virtual_start: bool = False
    virtual_end: bool = False

    @property
    def downward(self) -> bool:
        return self.start_lin <= self.end_lin

    @property
    def indices(self) -> range:
        step = 1 if self.downward else -1
        return range(self.start_lin, self.end_lin + step, step)

    def __len__(self):
        return len(self.positions)


def build_path(layout: GridLayout, a: GridPosition, b: GridPosition, policy: DirectionPolicy = ZSHAPE) -> ImagePath:
    index, cells = _tables(layout.row_counts, policy)
    layout.check_position(a)
    layout.check_position(b)
    m = index[a[0]][a[1]]
    n = index[b[0]][b[1]]
    step = 1 if m <= n else -1
    return ImagePath(m, n, tuple(cells[k] for k in range(m, n + step, step)))


def session_paths(layout: GridLayout, signals, policy: DirectionPolicy = ZSHAPE) -> list[ImagePath]:
    """Paths between adjacent entries of a signal sequence with virtual endpoints.

    ``signals`` is the output of :func:`gubm.grid.build_sequence`; its first and
    last entries are the virtual start and end.
    """
    index, cells = _tables(layout.row_counts, policy)
    total = layout.total
    lin = [-1] + [index[r][c] for r, c in signals[1:-1]] + [total]
    last = len(lin) - 2
    paths = []
    for t in range(len(lin) - 1):
        m, n = lin[t], lin[t + 1]
        step = 1 if m <= n else -1
        pos = tuple(cells[k] if 0 <= k < total else None for k in range(m, n + step, step))
        paths.append(ImagePath(m, n, pos, t == 0, t == last))
    return paths
