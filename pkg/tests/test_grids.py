import random

import pytest
from hypothesis import given, strategies as st

from patternbuilder.grids import (
    ArityMismatch,
    Grid,
    PRIMITIVE_NAMES,
    UnknownOperator,
    UnknownPrimitive,
    apply_binary,
    apply_unary,
    normalize_op,
    primitive,
    symmetry_axes,
)

# Primitive patterns as printed in the task prompt, copied cell for cell.
LINE_HORIZONTAL = [
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [1, 1, 1, 1, 1, 1, 1, 1, 1, 1],
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
]

LINE_VERTICAL = [
    [0, 0, 0, 0, 0, 1, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 1, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 1, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 1, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 1, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 1, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 1, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 1, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 1, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 1, 0, 0, 0, 0],
]

DIAGONAL = [
    [1, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 1, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 1, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 1, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 1, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 1, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 1, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 0, 1, 0, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, 1, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 1],
]

SQUARE = [
    [1, 1, 1, 1, 1, 1, 1, 1, 1, 1],
    [1, 0, 0, 0, 0, 0, 0, 0, 0, 1],
    [1, 0, 0, 0, 0, 0, 0, 0, 0, 1],
    [1, 0, 0, 0, 0, 0, 0, 0, 0, 1],
    [1, 0, 0, 0, 0, 0, 0, 0, 0, 1],
    [1, 0, 0, 0, 0, 0, 0, 0, 0, 1],
    [1, 0, 0, 0, 0, 0, 0, 0, 0, 1],
    [1, 0, 0, 0, 0, 0, 0, 0, 0, 1],
    [1, 0, 0, 0, 0, 0, 0, 0, 0, 1],
    [1, 1, 1, 1, 1, 1, 1, 1, 1, 1],
]

TRIANGLE = [
    [1, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [1, 1, 0, 0, 0, 0, 0, 0, 0, 0],
    [1, 1, 1, 0, 0, 0, 0, 0, 0, 0],
    [1, 1, 1, 1, 0, 0, 0, 0, 0, 0],
    [1, 1, 1, 1, 1, 0, 0, 0, 0, 0],
    [1, 1, 1, 1, 1, 1, 0, 0, 0, 0],
    [1, 1, 1, 1, 1, 1, 1, 0, 0, 0],
    [1, 1, 1, 1, 1, 1, 1, 1, 0, 0],
    [1, 1, 1, 1, 1, 1, 1, 1, 1, 0],
    [1, 1, 1, 1, 1, 1, 1, 1, 1, 1],
]

PLUS = [
    [0, 0, 0, 0, 0, 1, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 1, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 1, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 1, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 1, 0, 0, 0, 0],
    [1, 1, 1, 1, 1, 1, 1, 1, 1, 1],
    [0, 0, 0, 0, 0, 1, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 1, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 1, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 1, 0, 0, 0, 0],
]

PRINTED = {
    "blank": [[0] * 10 for _ in range(10)],
    "line_horizontal": LINE_HORIZONTAL,
    "line_vertical": LINE_VERTICAL,
    "diagonal": DIAGONAL,
    "square": SQUARE,
    "triangle": TRIANGLE,
}


grids = st.builds(Grid, st.integers(min_value=0, max_value=(1 << 100) - 1))


def test_primitives_match_printed_arrays():
    assert set(PRIMITIVE_NAMES) == set(PRINTED)
    for name, rows in PRINTED.items():
        assert primitive(name).rows() == rows, name


def test_unknown_primitive():
    with pytest.raises(UnknownPrimitive):
        primitive("circle")


def test_key_roundtrip():
    rng = random.Random(7)
    for _ in range(50):
        g = Grid(rng.getrandbits(100))
        assert Grid.from_key(g.key) == g
        assert len(g.key) == 100
        assert Grid.from_rows(g.rows()) == g


def test_cell_orientation():
    g = Grid.from_rows(LINE_HORIZONTAL)
    assert g.cell(5, 0) == 1 and g.cell(5, 9) == 1
    assert g.cell(0, 0) == 0
    # row 0 of the key comes first
    assert primitive("triangle").key[:10] == "1000000000"


def test_add_example_plus_grid():
    got = apply_binary("add", primitive("line_horizontal"), primitive("line_vertical"))
    assert got.rows() == PLUS


def test_subtract_self_is_blank():
    for name in PRIMITIVE_NAMES:
        g = primitive(name)
        assert apply_binary("subtract", g, g) == Grid(0)


def test_intersect_square_diagonal_corners():
    got = apply_binary("intersect", primitive("square"), primitive("diagonal"))
    cells = {(r, c) for r in range(10) for c in range(10) if got.cell(r, c)}
    assert cells == {(0, 0), (9, 9)}


def test_overlap_alias():
    a, b = primitive("square"), primitive("triangle")
    assert apply_binary("overlap", a, b) == apply_binary("intersect", a, b)
    assert normalize_op("overlap") == "intersect"


def test_unknown_operator():
    with pytest.raises(UnknownOperator):
        normalize_op("rotate")


def test_arity_mismatch():
    a, b = primitive("square"), primitive("blank")
    with pytest.raises(ArityMismatch):
        apply_binary("invert", a, b)
    with pytest.raises(ArityMismatch):
        apply_unary("add", a)


def test_invert_blank_all_ones():
    assert apply_unary("invert", Grid(0)).rows() == [[1] * 10 for _ in range(10)]


def test_reflect_diag_swaps_lines():
    lh, lv = primitive("line_horizontal"), primitive("line_vertical")
    assert apply_unary("reflect_diag", lh) == lv
    assert apply_unary("reflect_diag", lv) == lh


def test_reflect_horizontal_moves_row_5_to_4():
    got = apply_unary("reflect_horizontal", primitive("line_horizontal"))
    assert got.rows()[4] == [1] * 10
    assert sum(map(sum, got.rows())) == 10


def test_symmetry_examples():
    assert symmetry_axes(Grid(0)) == frozenset(
        {"horizontal", "vertical", "main_diagonal", "anti_diagonal"}
    )
    assert symmetry_axes(primitive("diagonal")) == frozenset(
        {"main_diagonal", "anti_diagonal"}
    )
    assert symmetry_axes(primitive("line_horizontal")) == frozenset({"vertical"})
    assert symmetry_axes(primitive("triangle")) == frozenset({"anti_diagonal"})


def test_symmetry_axis_subset_config():
    assert symmetry_axes(primitive("triangle"), axes=("horizontal", "vertical")) == frozenset()


@given(grids, grids)
def test_add_intersect_commute(a, b):
    assert apply_binary("add", a, b) == apply_binary("add", b, a)
    assert apply_binary("intersect", a, b) == apply_binary("intersect", b, a)


@given(grids, grids)
def test_subtract_not_commutative_unless_equal(a, b):
    same = apply_binary("subtract", a, b) == apply_binary("subtract", b, a)
    assert same == (a == b)


@given(grids)
def test_unary_involutions(a):
    for op in ("invert", "reflect_horizontal", "reflect_vertical", "reflect_diag"):
        assert apply_unary(op, apply_unary(op, a)) == a


@given(grids, grids)
def test_subtract_intersect_invert_identity(a, b):
    assert apply_binary("subtract", a, b) == apply_binary(
        "intersect", a, apply_unary("invert", b)
    )


@given(grids, grids)
def test_de_morgan(a, b):
    lhs = apply_unary("invert", apply_binary("add", a, b))
    rhs = apply_binary(
        "intersect", apply_unary("invert", a), apply_unary("invert", b)
    )
    assert lhs == rhs


@given(grids)
def test_symmetry_matches_bruteforce_reflection(g):
    def reflect(grid, axis):
        rows = grid.rows()
        if axis == "horizontal":
            out = rows[::-1]
        elif axis == "vertical":
            out = [row[::-1] for row in rows]
        elif axis == "main_diagonal":
            out = [[rows[c][r] for c in range(10)] for r in range(10)]
        else:  # anti_diagonal
            out = [[rows[9 - c][9 - r] for c in range(10)] for r in range(10)]
        return Grid.from_rows(out)

    expected = frozenset(
        axis
        for axis in ("horizontal", "vertical", "main_diagonal", "anti_diagonal")
        if reflect(g, axis) == g
    )
    assert symmetry_axes(g) == expected
