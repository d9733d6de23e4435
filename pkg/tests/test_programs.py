import random

import pytest

from patternbuilder.grids import ArityMismatch, Grid, PRIMITIVE_NAMES, primitive
from patternbuilder.programs import (
    BinaryNode,
    CyclicLibrary,
    HelperLeaf,
    Library,
    PrimitiveLeaf,
    UnaryNode,
    UnknownHelper,
    add,
    canonical_key,
    evaluate,
    expand,
    invert,
    library_from_json,
    library_to_json,
    prim,
    program_from_json,
    program_to_json,
    reflect_horizontal,
    reflect_vertical,
    size,
    subprogram_occurrences,
    subtrees,
)

LH = prim("line_horizontal")
LV = prim("line_vertical")

FAT_CROSS = add(add(LH, reflect_horizontal(LH)), add(LV, reflect_vertical(LV)))


def random_program(rng, depth, helper_ids=()):
    """Uniform-ish random program for property checks."""
    if depth <= 0 or rng.random() < 0.3:
        if helper_ids and rng.random() < 0.3:
            return HelperLeaf(rng.choice(helper_ids))
        return PrimitiveLeaf(rng.choice(PRIMITIVE_NAMES))
    if rng.random() < 0.4:
        op = rng.choice(("invert", "reflect_horizontal", "reflect_vertical", "reflect_diag"))
        return UnaryNode(op, random_program(rng, depth - 1, helper_ids))
    op = rng.choice(("add", "subtract", "intersect"))
    return BinaryNode(
        op,
        random_program(rng, depth - 1, helper_ids),
        random_program(rng, depth - 1, helper_ids),
    )


def random_library(rng, n_helpers=3):
    lib = Library()
    for _ in range(n_helpers):
        ids = tuple(e.helper_id for e in lib)
        lib.add(random_program(rng, 2, ids))
    return lib


def test_evaluate_primitive_leaf():
    assert evaluate(prim("square")) == primitive("square")


def test_evaluate_plus_example():
    plus = evaluate(add(LH, LV))
    assert plus == evaluate(add(LV, LH))
    assert plus.cell(5, 0) == 1 and plus.cell(0, 5) == 1 and plus.cell(0, 0) == 0


def test_helper_indirection():
    lib = Library()
    hid = lib.add(prim("square"))
    assert evaluate(HelperLeaf(hid), lib) == primitive("square")


def test_unknown_helper():
    with pytest.raises(UnknownHelper):
        evaluate(HelperLeaf("nope"), Library())


def test_arity_checked_on_construction():
    with pytest.raises(ArityMismatch):
        UnaryNode("add", LH)
    with pytest.raises(ArityMismatch):
        BinaryNode("invert", LH, LV)


def test_overlap_normalized_in_nodes():
    node = BinaryNode("overlap", LH, LV)
    assert node.op == "intersect"


def test_expand_no_helpers_is_identity():
    assert expand(FAT_CROSS) == FAT_CROSS


def test_expand_single_helper():
    lib = Library()
    hid = lib.add(add(LH, LV))
    assert expand(HelperLeaf(hid), lib) == add(LH, LV)


def test_expand_nested_helpers_sizes_add_up():
    lib = Library()
    h1 = lib.add(add(LH, LV))
    h2 = lib.add(invert(HelperLeaf(h1)))
    p = add(HelperLeaf(h2), prim("square"))
    expanded = expand(p, lib)
    assert expanded == add(invert(add(LH, LV)), prim("square"))
    assert size(p, lib) == size(expanded)
    assert size(p, lib).node_count == 6


def test_cycle_detected():
    lib = Library()
    hid = lib.add(prim("blank"))
    # sabotage the entry to create a cycle
    lib.get(hid).program = HelperLeaf(hid)
    with pytest.raises(CyclicLibrary):
        expand(HelperLeaf(hid), lib)


def test_size_examples():
    assert size(prim("blank")).node_count == 1
    assert size(prim("blank")).op_count == 0
    r = size(add(LH, LV))
    assert (r.node_count, r.op_count) == (3, 1)
    r = size(FAT_CROSS)
    assert (r.node_count, r.op_count) == (9, 5)
    assert r.leaf_count == 4


def test_evaluate_expand_agree_on_random_programs():
    rng = random.Random(11)
    for _ in range(1000):
        lib = random_library(rng)
        p = random_program(rng, 4, tuple(e.helper_id for e in lib))
        assert evaluate(expand(p, lib)) == evaluate(p, lib)
        assert size(expand(p, lib)) == size(p, lib)


def test_subprogram_occurrences_examples():
    assert subprogram_occurrences(add(LH, LV), add(LH, LV)) == [()]
    assert subprogram_occurrences(LV, add(LH, LV)) == [(1,)]
    assert subprogram_occurrences(add(LH, LV), LV) == []


def test_subprogram_occurrences_through_helpers():
    lib = Library()
    hid = lib.add(add(LH, LV))
    p = invert(HelperLeaf(hid))
    assert subprogram_occurrences(add(LH, LV), p, lib) == [(0,)]
    # authored-tree matching does not see through the helper leaf
    assert subprogram_occurrences(add(LH, LV), p, lib, expanded=False) == []
    assert subprogram_occurrences(HelperLeaf(hid), p, lib, expanded=False) == [(0,)]


def naive_occurrences(h, p):
    """Independent oracle: enumerate every subtree and compare."""
    hits = []

    def walk(node, path):
        if node == h:
            hits.append(path)
        if isinstance(node, UnaryNode):
            walk(node.child, path + (0,))
        elif isinstance(node, BinaryNode):
            walk(node.left, path + (0,))
            walk(node.right, path + (1,))

    walk(p, ())
    return sorted(hits, key=lambda x: (len(x), x))


def test_occurrences_match_naive_oracle():
    rng = random.Random(23)
    for _ in range(300):
        p = random_program(rng, 4)
        h = rng.choice(subtrees(p)) if rng.random() < 0.7 else random_program(rng, 2)
        assert subprogram_occurrences(h, p) == naive_occurrences(h, p)


def test_canonical_key_identifies_outputs():
    a = add(LH, LV)
    b = add(LV, LH)
    assert a != b
    assert canonical_key(a) == canonical_key(b)
    assert canonical_key(invert(prim("blank"))) == Grid((1 << 100) - 1).key


def test_subtrees_postorder_dedup():
    t = add(LH, LV)
    assert subtrees(t) == [LH, LV, t]
    t2 = add(LH, LH)
    assert subtrees(t2) == [LH, t2]
    assert subtrees(t2)[-1] == t2


def test_library_dedup_by_output():
    lib = Library()
    h1 = lib.add(add(LH, LV))
    h2 = lib.add(add(LV, LH))  # same output, different syntax
    assert h1 == h2
    assert len(lib) == 1


def test_library_entry_order_and_lookup():
    lib = Library()
    a = lib.add(prim("square"), created_at_trial=1)
    b = lib.add(prim("triangle"), created_at_trial=2)
    assert [e.helper_id for e in lib] == [a, b]
    assert lib.get(a).created_at_trial == 1
    assert lib.find_by_key(primitive("triangle").key).helper_id == b


def test_program_json_roundtrip():
    rng = random.Random(5)
    for _ in range(200):
        lib = random_library(rng)
        p = random_program(rng, 4, tuple(e.helper_id for e in lib))
        assert program_from_json(program_to_json(p)) == p


def test_program_json_arity_checked():
    with pytest.raises(ValueError):
        program_from_json({"op": "add", "args": [{"prim": "blank"}]})
    with pytest.raises(ValueError):
        program_from_json({"op": "invert", "args": [{"prim": "blank"}, {"prim": "square"}]})
    with pytest.raises(ValueError):
        program_from_json({"bogus": 1})


def test_library_json_roundtrip():
    rng = random.Random(9)
    lib = random_library(rng, 4)
    data = library_to_json(lib)
    back = library_from_json(data)
    assert [e.helper_id for e in back] == [e.helper_id for e in lib]
    assert [e.output for e in back] == [e.output for e in lib]


def test_library_json_detects_corruption():
    lib = Library()
    lib.add(prim("square"))
    data = library_to_json(lib)
    data["entries"][0]["output_key"] = "0" * 100
    with pytest.raises(ValueError):
        library_from_json(data)
