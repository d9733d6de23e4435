"""Program trees over the grid DSL, helper libraries, and tree measures.

Programs are immutable nested dataclasses. A library is an ordered,
output-deduplicated list of named helper programs; helper leaves evaluate to
the helper's cached grid. ``expand`` inlines helper references, and all size
and matching measures are defined over the fully expanded tree.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Optional, Union

from .grids import (
    ArityMismatch,
    BINARY_OPS,
    DslError,
    Grid,
    UNARY_OPS,
    UnknownPrimitive,
    apply_binary,
    apply_unary,
    normalize_op,
    primitive,
    PRIMITIVE_NAMES,
)


class UnknownHelper(DslError):
    pass


class CyclicLibrary(DslError):
    pass


@dataclass(frozen=True)
class PrimitiveLeaf:
    name: str

    def __post_init__(self) -> None:
        if self.name not in PRIMITIVE_NAMES:
            raise UnknownPrimitive(f"unknown primitive {self.name!r}")


@dataclass(frozen=True)
class HelperLeaf:
    helper_id: str


@dataclass(frozen=True)
class UnaryNode:
    op: str
    child: "Program"

    def __post_init__(self) -> None:
        op = normalize_op(self.op)
        if op not in UNARY_OPS:
            raise ArityMismatch(f"{op} is not a unary operator")
        object.__setattr__(self, "op", op)


@dataclass(frozen=True)
class BinaryNode:
    op: str
    left: "Program"
    right: "Program"

    def __post_init__(self) -> None:
        op = normalize_op(self.op)
        if op not in BINARY_OPS:
            raise ArityMismatch(f"{op} is not a binary operator")
        object.__setattr__(self, "op", op)


Program = Union[PrimitiveLeaf, HelperLeaf, UnaryNode, BinaryNode]


def prim(name: str) -> PrimitiveLeaf:
    return PrimitiveLeaf(name)


def help_ref(helper_id: str) -> HelperLeaf:
    return HelperLeaf(helper_id)


def add(left: Program, right: Program) -> BinaryNode:
    return BinaryNode("add", left, right)


def subtract(left: Program, right: Program) -> BinaryNode:
    return BinaryNode("subtract", left, right)


def intersect(left: Program, right: Program) -> BinaryNode:
    return BinaryNode("intersect", left, right)


def invert(child: Program) -> UnaryNode:
    return UnaryNode("invert", child)


def reflect_horizontal(child: Program) -> UnaryNode:
    return UnaryNode("reflect_horizontal", child)


def reflect_vertical(child: Program) -> UnaryNode:
    return UnaryNode("reflect_vertical", child)


def reflect_diag(child: Program) -> UnaryNode:
    return UnaryNode("reflect_diag", child)


@dataclass(frozen=True)
class SizeReport:
    """Node and operator counts of the fully expanded tree."""

    node_count: int
    op_count: int

    @property
    def leaf_count(self) -> int:
        return self.node_count - self.op_count


@dataclass
class LibraryEntry:
    helper_id: str
    program: Program
    output: Grid
    created_at_trial: Optional[int] = None


class Library:
    """Ordered helper store, deduplicated by output grid.

    Entries may reference earlier entries only, so expansion always
    terminates. Single writer, many readers: mutate only via ``add``.
    """

    def __init__(self) -> None:
        self._entries: list[LibraryEntry] = []
        self._by_id: dict[str, LibraryEntry] = {}
        self._by_key: dict[str, LibraryEntry] = {}

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[LibraryEntry]:
        return iter(self._entries)

    @property
    def entries(self) -> tuple[LibraryEntry, ...]:
        return tuple(self._entries)

    def get(self, helper_id: str) -> LibraryEntry:
        try:
            return self._by_id[helper_id]
        except KeyError:
            raise UnknownHelper(f"unresolved helper id {helper_id!r}") from None

    def __contains__(self, helper_id: str) -> bool:
        return helper_id in self._by_id

    def find_by_key(self, key: str) -> Optional[LibraryEntry]:
        return self._by_key.get(key)

    def output_keys(self) -> frozenset[str]:
        return frozenset(self._by_key)

    def add(
        self,
        program: Program,
        created_at_trial: Optional[int] = None,
        helper_id: Optional[str] = None,
    ) -> str:
        """Insert a helper; inserting a duplicate output is a no-op that
        returns the existing id."""
        output = evaluate(program, self)  # also validates references
        existing = self._by_key.get(output.key)
        if existing is not None:
            return existing.helper_id
        if helper_id is None:
            helper_id = f"h{len(self._entries) + 1}"
            while helper_id in self._by_id:
                helper_id += "x"
        elif helper_id in self._by_id:
            raise ValueError(f"helper id {helper_id!r} already present")
        entry = LibraryEntry(helper_id, program, output, created_at_trial)
        self._entries.append(entry)
        self._by_id[helper_id] = entry
        self._by_key[output.key] = entry
        return helper_id

    def copy(self) -> "Library":
        out = Library()
        out._entries = list(self._entries)
        out._by_id = dict(self._by_id)
        out._by_key = dict(self._by_key)
        return out


_EMPTY = None


def _empty_library() -> Library:
    global _EMPTY
    if _EMPTY is None:
        _EMPTY = Library()
    return _EMPTY


def evaluate(p: Program, lib: Optional[Library] = None) -> Grid:
    """Denotational semantics; helper leaves use the cached helper output."""
    lib = lib or _empty_library()
    if isinstance(p, PrimitiveLeaf):
        return primitive(p.name)
    if isinstance(p, HelperLeaf):
        return lib.get(p.helper_id).output
    if isinstance(p, UnaryNode):
        return apply_unary(p.op, evaluate(p.child, lib))
    if isinstance(p, BinaryNode):
        return apply_binary(p.op, evaluate(p.left, lib), evaluate(p.right, lib))
    raise TypeError(f"not a program node: {p!r}")


def expand(p: Program, lib: Optional[Library] = None) -> Program:
    """Equivalent tree with every helper reference inlined."""
    lib = lib or _empty_library()
    memo: dict[str, Program] = {}

    def go(node: Program, visiting: frozenset[str]) -> Program:
        if isinstance(node, PrimitiveLeaf):
            return node
        if isinstance(node, HelperLeaf):
            hid = node.helper_id
            if hid in memo:
                return memo[hid]
            if hid in visiting:
                raise CyclicLibrary(f"helper cycle through {hid!r}")
            result = go(lib.get(hid).program, visiting | {hid})
            memo[hid] = result
            return result
        if isinstance(node, UnaryNode):
            return UnaryNode(node.op, go(node.child, visiting))
        return BinaryNode(node.op, go(node.left, visiting), go(node.right, visiting))

    return go(p, frozenset())


def size(p: Program, lib: Optional[Library] = None) -> SizeReport:
    """Counts over the expanded tree, computed without materializing it."""
    lib = lib or _empty_library()
    memo: dict[str, tuple[int, int]] = {}

    def go(node: Program, visiting: frozenset[str]) -> tuple[int, int]:
        if isinstance(node, PrimitiveLeaf):
            return 1, 0
        if isinstance(node, HelperLeaf):
            hid = node.helper_id
            if hid in memo:
                return memo[hid]
            if hid in visiting:
                raise CyclicLibrary(f"helper cycle through {hid!r}")
            result = go(lib.get(hid).program, visiting | {hid})
            memo[hid] = result
            return result
        if isinstance(node, UnaryNode):
            n, o = go(node.child, visiting)
            return n + 1, o + 1
        ln, lo = go(node.left, visiting)
        rn, ro = go(node.right, visiting)
        return ln + rn + 1, lo + ro + 1

    n, o = go(p, frozenset())
    return SizeReport(node_count=n, op_count=o)


def structure_key(p: Program) -> tuple:
    """Total syntactic order used for deterministic tie-breaking."""
    if isinstance(p, PrimitiveLeaf):
        return ("p", p.name)
    if isinstance(p, HelperLeaf):
        return ("h", p.helper_id)
    if isinstance(p, UnaryNode):
        return ("u", p.op, structure_key(p.child))
    return ("b", p.op, structure_key(p.left), structure_key(p.right))


def children(p: Program) -> tuple[Program, ...]:
    if isinstance(p, UnaryNode):
        return (p.child,)
    if isinstance(p, BinaryNode):
        return (p.left, p.right)
    return ()


def subtrees(p: Program) -> list[Program]:
    """Distinct subtrees in deduplicated post-order; the root comes last."""
    out: dict[Program, None] = {}

    def go(node: Program) -> None:
        for ch in children(node):
            go(ch)
        out.setdefault(node)

    go(p)
    return list(out)


def subprogram_occurrences(
    h: Program,
    p: Program,
    lib: Optional[Library] = None,
    expanded: bool = True,
) -> list[tuple[int, ...]]:
    """Root paths in ``p`` where the subtree structurally equals ``h``.

    By default both trees are matched fully expanded; pass ``expanded=False``
    to match the authored trees with helper leaves intact.
    """
    if expanded:
        h = expand(h, lib)
        p = expand(p, lib)
    target_size = size(h, lib).node_count if not isinstance(h, HelperLeaf) else None
    found: list[tuple[int, ...]] = []

    def go(node: Program, path: tuple[int, ...]) -> int:
        total = 1
        for i, ch in enumerate(children(node)):
            total += go(ch, path + (i,))
        # cheap size gate before structural comparison
        if (target_size is None or total == target_size) and node == h:
            found.append(path)
        return total

    go(p, ())
    found.sort(key=lambda path: (len(path), path))
    return found


def canonical_key(p: Program, lib: Optional[Library] = None) -> str:
    """Output grid key; equal keys mean observationally equivalent programs."""
    return evaluate(p, lib).key


# JSON interchange: {"prim": name} | {"helper": id} | {"op": name, "args": [..]}

def program_to_json(p: Program) -> dict:
    if isinstance(p, PrimitiveLeaf):
        return {"prim": p.name}
    if isinstance(p, HelperLeaf):
        return {"helper": p.helper_id}
    if isinstance(p, UnaryNode):
        return {"op": p.op, "args": [program_to_json(p.child)]}
    return {"op": p.op, "args": [program_to_json(p.left), program_to_json(p.right)]}


def program_from_json(data: dict) -> Program:
    if not isinstance(data, dict):
        raise ValueError(f"program node must be an object, got {type(data).__name__}")
    if "prim" in data:
        return PrimitiveLeaf(data["prim"])
    if "helper" in data:
        return HelperLeaf(data["helper"])
    if "op" in data:
        op = normalize_op(data["op"])
        args = data.get("args", [])
        want = 2 if op in BINARY_OPS else 1
        if len(args) != want:
            raise ValueError(f"operator {op!r} takes {want} argument(s), got {len(args)}")
        if want == 1:
            return UnaryNode(op, program_from_json(args[0]))
        return BinaryNode(op, program_from_json(args[0]), program_from_json(args[1]))
    raise ValueError(f"unrecognized program node: {data!r}")


def library_to_json(lib: Library) -> dict:
    return {
        "entries": [
            {
                "id": e.helper_id,
                "program": program_to_json(e.program),
                "output_key": e.output.key,
                "created_at_trial": e.created_at_trial,
            }
            for e in lib
        ]
    }


def library_from_json(data: dict) -> Library:
    lib = Library()
    for raw in data.get("entries", []):
        program = program_from_json(raw["program"])
        hid = lib.add(
            program,
            created_at_trial=raw.get("created_at_trial"),
            helper_id=raw["id"],
        )
        if hid != raw["id"]:
            raise ValueError(f"duplicate helper output for id {raw['id']!r}")
        entry = lib.get(hid)
        if "output_key" in raw and entry.output.key != raw["output_key"]:
            raise ValueError(f"stored output key mismatch for helper {hid!r}")
    return lib
