"""Bit-exact 10x10 binary grids and the seven grid transformations.

A grid is stored as a single 100-bit integer. Cell (r, c) with row 0 at the
top and column 0 at the left occupies bit ``99 - (10*r + c)``, so the
canonical key (the row-major '0'/'1' string) is just the binary rendering of
that integer. All operators below work on whole grids; the ``*_bits``
variants operate on raw integers and are the hot path for enumerative search.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

DSL_VERSION = "pb-dsl-1"

GRID_SIDE = 10
GRID_CELLS = GRID_SIDE * GRID_SIDE
FULL_MASK = (1 << GRID_CELLS) - 1
_ROW_MASK = (1 << GRID_SIDE) - 1


class DslError(Exception):
    """Base class for grid DSL errors."""


class UnknownPrimitive(DslError):
    pass


class UnknownOperator(DslError):
    pass


class ArityMismatch(DslError):
    pass


def _rows_to_bits(rows: Sequence[Sequence[int]]) -> int:
    if len(rows) != GRID_SIDE or any(len(r) != GRID_SIDE for r in rows):
        raise ValueError("grid must be 10x10")
    bits = 0
    for row in rows:
        for cell in row:
            if cell not in (0, 1):
                raise ValueError(f"cell value must be 0 or 1, got {cell!r}")
            bits = (bits << 1) | cell
    return bits


@dataclass(frozen=True)
class Grid:
    """Immutable 10x10 binary pattern."""

    bits: int

    def __post_init__(self) -> None:
        if not 0 <= self.bits <= FULL_MASK:
            raise ValueError("grid bits out of range")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]]) -> "Grid":
        return cls(_rows_to_bits(rows))

    @classmethod
    def from_key(cls, key: str) -> "Grid":
        if len(key) != GRID_CELLS or set(key) - {"0", "1"}:
            raise ValueError("key must be a 100-character '0'/'1' string")
        return cls(int(key, 2))

    @property
    def key(self) -> str:
        return format(self.bits, "0100b")

    def rows(self) -> list[list[int]]:
        key = self.key
        return [
            [int(key[r * GRID_SIDE + c]) for c in range(GRID_SIDE)]
            for r in range(GRID_SIDE)
        ]

    def cell(self, r: int, c: int) -> int:
        return (self.bits >> (GRID_CELLS - 1 - (GRID_SIDE * r + c))) & 1

    def count(self) -> int:
        return bin(self.bits).count("1")

    def render(self) -> str:
        """ASCII art, '#' for filled cells. Debugging aid only."""
        return "\n".join(
            "".join("#" if v else "." for v in row) for row in self.rows()
        )

    def __repr__(self) -> str:  # keep failure output short
        return f"Grid({self.key})"


BLANK = Grid(0)

# Reflection tables. Row r occupies chunk q = 9 - r (bits [10q, 10q+10)),
# column c sits at in-chunk offset 9 - c.
_REV10 = tuple(int(format(v, "010b")[::-1], 2) for v in range(1 << GRID_SIDE))
_TRANSPOSE_CHUNK = tuple(
    tuple(
        sum(1 << (GRID_SIDE * s + q) for s in range(GRID_SIDE) if chunk >> s & 1)
        for chunk in range(1 << GRID_SIDE)
    )
    for q in range(GRID_SIDE)
)


def invert_bits(bits: int) -> int:
    return bits ^ FULL_MASK

def reflect_horizontal_bits(bits: int) -> int:
    """Reverse row order (top-bottom flip)."""
    out = 0
    for q in range(GRID_SIDE):
        out |= ((bits >> (GRID_SIDE * q)) & _ROW_MASK) << (GRID_SIDE * (9 - q))
    return out

def reflect_vertical_bits(bits: int) -> int:
    """Reverse column order (left-right flip)."""
    out = 0
    for q in range(GRID_SIDE):
        out |= _REV10[(bits >> (GRID_SIDE * q)) & _ROW_MASK] << (GRID_SIDE * q)
    return out

def reflect_diag_bits(bits: int) -> int:
    """Transpose across the main diagonal."""
    out = 0
    for q in range(GRID_SIDE):
        out |= _TRANSPOSE_CHUNK[q][(bits >> (GRID_SIDE * q)) & _ROW_MASK]
    return out

def reflect_anti_diag_bits(bits: int) -> int:
    """Reflection across the anti-diagonal: transpose of the 180-degree turn."""
    return reflect_diag_bits(
        reflect_vertical_bits(reflect_horizontal_bits(bits))
    )


BINARY_OPS = ("add", "subtract", "intersect")
UNARY_OPS = ("invert", "reflect_horizontal", "reflect_vertical", "reflect_diag")
ALL_OPS = BINARY_OPS + UNARY_OPS

_ALIASES = {"overlap": "intersect"}

UNARY_BITS_FNS = {
    "invert": invert_bits,
    "reflect_horizontal": reflect_horizontal_bits,
    "reflect_vertical": reflect_vertical_bits,
    "reflect_diag": reflect_diag_bits,
}


def normalize_op(name: str) -> str:
    """Resolve operator aliases ('overlap' -> 'intersect'); reject unknowns."""
    name = _ALIASES.get(name, name)
    if name not in ALL_OPS:
        raise UnknownOperator(f"unknown operator {name!r}")
    return name


def is_binary(op: str) -> bool:
    return normalize_op(op) in BINARY_OPS


def apply_binary(op: str, a: Grid, b: Grid) -> Grid:
    op = normalize_op(op)
    if op == "add":
        return Grid(a.bits | b.bits)
    if op == "subtract":
        return Grid(a.bits & invert_bits(b.bits))
    if op == "intersect":
        return Grid(a.bits & b.bits)
    raise ArityMismatch(f"{op} is unary, got two operands")


def apply_unary(op: str, a: Grid) -> Grid:
    op = normalize_op(op)
    fn = UNARY_BITS_FNS.get(op)
    if fn is None:
        raise ArityMismatch(f"{op} is binary, got one operand")
    return Grid(fn(a.bits))


# The six geometric primitives, printed cell for cell in the task prompt.
_PRIMITIVE_ROWS = {
    "blank": [[0] * 10 for _ in range(10)],
    "line_horizontal": [
        [1] * 10 if r == 5 else [0] * 10 for r in range(10)
    ],
    "line_vertical": [
        [1 if c == 5 else 0 for c in range(10)] for _ in range(10)
    ],
    "diagonal": [[1 if c == r else 0 for c in range(10)] for r in range(10)],
    "square": [
        [1 if r in (0, 9) or c in (0, 9) else 0 for c in range(10)]
        for r in range(10)
    ],
    "triangle": [[1 if c <= r else 0 for c in range(10)] for r in range(10)],
}

PRIMITIVE_NAMES = (
    "blank",
    "line_horizontal",
    "line_vertical",
    "diagonal",
    "square",
    "triangle",
)

PRIMITIVES = {name: Grid.from_rows(_PRIMITIVE_ROWS[name]) for name in PRIMITIVE_NAMES}


def primitive(name: str) -> Grid:
    try:
        return PRIMITIVES[name]
    except KeyError:
        raise UnknownPrimitive(f"unknown primitive {name!r}") from None


SYMMETRY_AXES = ("horizontal", "vertical", "main_diagonal", "anti_diagonal")

_AXIS_FNS = {
    "horizontal": reflect_horizontal_bits,
    "vertical": reflect_vertical_bits,
    "main_diagonal": reflect_diag_bits,
    "anti_diagonal": reflect_anti_diag_bits,
}


def symmetry_axes(
    g: Grid, axes: Iterable[str] = SYMMETRY_AXES
) -> frozenset[str]:
    """Axes whose reflection leaves ``g`` unchanged."""
    found = []
    for axis in axes:
        try:
            fn = _AXIS_FNS[axis]
        except KeyError:
            raise ValueError(f"unknown symmetry axis {axis!r}") from None
        if fn(g.bits) == g.bits:
            found.append(axis)
    return frozenset(found)


def is_symmetric_bits(bits: int, axes: Sequence[str] = SYMMETRY_AXES) -> bool:
    """True when the raw grid is invariant under at least one listed axis."""
    for axis in axes:
        if _AXIS_FNS[axis](bits) == bits:
            return True
    return False


def grid_to_json(g: Grid) -> list[list[int]]:
    return g.rows()


def grid_from_json(data: Sequence[Sequence[int]]) -> Grid:
    return Grid.from_rows(data)
