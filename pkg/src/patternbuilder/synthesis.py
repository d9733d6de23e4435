"""Budgeted bottom-up enumerative synthesis with output-equivalence pruning.

Search proceeds over size layers. By default the layer index is the node
count in the library-extended DSL, where a helper leaf costs 1: that is what
makes a learned library shrink the search. ``layering="expanded"`` instead
indexes layers by fully expanded node count (helper leaves enter at their
true size), which is the measure used by minimality checks and the
curriculum parsimony validator.

One shortest representative is retained per output grid. Candidate order is
fixed: primitives in printed order, then helpers in creation order;
operators in the order add, subtract, intersect, invert, reflect_horizontal,
reflect_vertical, reflect_diag; for binary operators the left operand size
ascends and the left operand iterates before the right. Results are fully
deterministic.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional

from .grids import (
    FULL_MASK,
    Grid,
    PRIMITIVE_NAMES,
    primitive,
    reflect_diag_bits,
    reflect_horizontal_bits,
    reflect_vertical_bits,
)
from .programs import (
    BinaryNode,
    HelperLeaf,
    Library,
    PrimitiveLeaf,
    Program,
    UnaryNode,
    size as program_size,
    subtrees,
)

DEFAULT_MAX_CANDIDATES = 2_000_000

# opcodes for the rep arrays
_OP_PRIM = -1
_OP_HELPER = -2
_BINARY = ("add", "subtract", "intersect")
_UNARY = ("invert", "reflect_horizontal", "reflect_vertical", "reflect_diag")


class NoSolution(Exception):
    pass


@dataclass(frozen=True)
class SynthesisBudget:
    """Candidate-count budget; ``max_size`` caps expanded node count."""

    max_candidates: int = DEFAULT_MAX_CANDIDATES
    max_size: Optional[int] = None

    def __post_init__(self) -> None:
        if self.max_candidates <= 0:
            raise ValueError("max_candidates must be positive")


@dataclass
class _SearchState:
    grids: list[int]
    negs: list[int]
    ops: list[int]
    lefts: list[int]
    rights: list[int]
    exps: list[int]
    helper_ids: list[str]
    explored: int
    solution: Optional[int]
    complete_layers: int


@dataclass
class SynthesisResult:
    solved: bool
    program: Optional[Program]
    candidates_explored: int
    classes_retained: int
    target_key: str
    wall_time_ms: float = 0.0
    _state: Optional[_SearchState] = field(default=None, repr=False)

    @property
    def failed(self) -> bool:
        return not self.solved


def _rebuild(state: _SearchState, idx: int) -> Program:
    op = state.ops[idx]
    if op == _OP_PRIM:
        return PrimitiveLeaf(PRIMITIVE_NAMES[state.lefts[idx]])
    if op == _OP_HELPER:
        return HelperLeaf(state.helper_ids[state.lefts[idx]])
    name = (_BINARY + _UNARY)[op]
    if op < 3:
        return BinaryNode(name, _rebuild(state, state.lefts[idx]), _rebuild(state, state.rights[idx]))
    return UnaryNode(name, _rebuild(state, state.lefts[idx]))


def _enumerate(
    lib: Optional[Library],
    budget: SynthesisBudget,
    layering: str,
    prune: bool,
    max_layer: Optional[int],
    targets: Optional[dict[int, str]],
    stop_on_first: bool,
    collect_hits: Optional[dict[str, tuple[int, int]]] = None,
) -> _SearchState:
    """Core layer-by-layer enumeration.

    ``targets`` maps grid bits to labels. With ``stop_on_first`` the search
    stops at the first target hit (its rep index goes to ``state.solution``);
    otherwise every first hit is recorded in ``collect_hits`` as
    label -> (expanded size, rep index). ``state.complete_layers`` is the
    number of layers fully enumerated before stopping.
    """
    if layering not in ("library", "expanded"):
        raise ValueError(f"bad layering mode {layering!r}")
    max_c = budget.max_candidates
    size_cap = budget.max_size

    grids: list[int] = []
    negs: list[int] = []
    ops: list[int] = []
    lefts: list[int] = []
    rights: list[int] = []
    exps: list[int] = []
    helper_ids: list[str] = []

    seen: dict[int, int] = {}
    by_size: dict[int, list[int]] = {}
    state = _SearchState(grids, negs, ops, lefts, rights, exps, helper_ids, 0, None, 0)

    # leaves, keyed by the layer they enter under the chosen layering
    leaves: list[tuple[int, int, int, int]] = []  # (layer, opcode, payload, exp_size)
    for i, name in enumerate(PRIMITIVE_NAMES):
        leaves.append((1, _OP_PRIM, i, 1))
    if lib is not None:
        for j, entry in enumerate(lib):
            helper_ids.append(entry.helper_id)
            exp = program_size(entry.program, lib).node_count
            layer = 1 if layering == "library" else exp
            leaves.append((layer, _OP_HELPER, j, exp))

    explored = 0

    def admit(g: int, opcode: int, left: int, right: int, exp: int, layer: int) -> Optional[int]:
        nonlocal explored
        idx = len(grids)
        if prune:
            if g in seen:
                return None
            seen[g] = idx
        grids.append(g)
        negs.append(FULL_MASK ^ g)
        ops.append(opcode)
        lefts.append(left)
        rights.append(right)
        exps.append(exp)
        by_size.setdefault(layer, []).append(idx)
        return idx

    def check_target(idx: int, g: int, exp: int) -> bool:
        """Returns True when enumeration should stop."""
        if targets is None or g not in targets:
            return False
        if stop_on_first:
            state.solution = idx
            return True
        label = targets[g]
        if collect_hits is not None and label not in collect_hits:
            collect_hits[label] = (exp, idx)
            if len(collect_hits) == len(set(targets.values())):
                return True
        return False

    max_leaf_layer = max(layer for layer, *_ in leaves)
    k = 0
    while True:
        k += 1
        if max_layer is not None and k > max_layer:
            state.complete_layers = k - 1
            state.explored = explored
            return state
        # space closed: no candidate can ever satisfy the size cap, or no
        # later layer can combine the retained representatives (expanded
        # size never undercuts the layer index in either layering mode)
        if size_cap is not None and k > size_cap:
            state.complete_layers = k - 1
            state.explored = explored
            return state
        if by_size and k > 2 * max(by_size) + 1 and k > max_leaf_layer:
            state.complete_layers = k - 1
            state.explored = explored
            return state

        # leaves entering this layer
        for layer, opcode, payload, exp in leaves:
            if layer != k:
                continue
            if size_cap is not None and exp > size_cap:
                continue
            explored += 1
            idx = admit(
                primitive(PRIMITIVE_NAMES[payload]).bits
                if opcode == _OP_PRIM
                else lib.entries[payload].output.bits,  # type: ignore[union-attr]
                opcode,
                payload,
                -1,
                exp,
                k,
            )
            if idx is not None and check_target(idx, grids[idx], exp):
                state.explored = explored
                state.complete_layers = k - 1
                return state
            if explored >= max_c:
                state.explored = explored
                state.complete_layers = k - 1
                return state

        # binary: left size + right size = k - 1
        for opn in range(3):
            for lsize in range(1, k - 1):
                rsize = k - 1 - lsize
                left_list = by_size.get(lsize)
                right_list = by_size.get(rsize)
                if not left_list or not right_list:
                    continue
                for li in left_list:
                    lg = grids[li]
                    lexp = exps[li]
                    for ri in right_list:
                        exp = lexp + exps[ri] + 1
                        if size_cap is not None and exp > size_cap:
                            continue
                        explored += 1
                        if opn == 0:
                            g = lg | grids[ri]
                        elif opn == 1:
                            g = lg & negs[ri]
                        else:
                            g = lg & grids[ri]
                        if not prune or g not in seen:
                            idx = admit(g, opn, li, ri, exp, k)
                            if idx is not None and check_target(idx, g, exp):
                                state.explored = explored
                                state.complete_layers = k - 1
                                return state
                        if explored >= max_c:
                            state.explored = explored
                            state.complete_layers = k - 1
                            return state

        # unary: child size = k - 1
        child_list = by_size.get(k - 1, [])
        for opn, fn in (
            (3, None),
            (4, reflect_horizontal_bits),
            (5, reflect_vertical_bits),
            (6, reflect_diag_bits),
        ):
            for ci in child_list:
                exp = exps[ci] + 1
                if size_cap is not None and exp > size_cap:
                    continue
                explored += 1
                g = (FULL_MASK ^ grids[ci]) if fn is None else fn(grids[ci])
                if not prune or g not in seen:
                    idx = admit(g, opn, ci, -1, exp, k)
                    if idx is not None and check_target(idx, g, exp):
                        state.explored = explored
                        state.complete_layers = k - 1
                        return state
                if explored >= max_c:
                    state.explored = explored
                    state.complete_layers = k - 1
                    return state

        state.complete_layers = k


def solve(
    target: Grid,
    lib: Optional[Library] = None,
    budget: Optional[SynthesisBudget] = None,
    layering: str = "library",
) -> SynthesisResult:
    """Find the first program whose output matches ``target``.

    Budget exhaustion is a value, not an exception: the result carries the
    exploration statistics either way.
    """
    budget = budget or SynthesisBudget()
    t0 = time.perf_counter()
    state = _enumerate(
        lib,
        budget,
        layering=layering,
        prune=True,
        max_layer=None,
        targets={target.bits: "target"},
        stop_on_first=True,
    )
    wall = (time.perf_counter() - t0) * 1000.0
    solved = state.solution is not None
    return SynthesisResult(
        solved=solved,
        program=_rebuild(state, state.solution) if solved else None,
        candidates_explored=state.explored,
        classes_retained=len(state.grids),
        target_key=target.key,
        wall_time_ms=wall,
        _state=state,
    )


def trace_of(result: SynthesisResult, mode: str = "solution_subtrees") -> list[Program]:
    """Derivation trace of a solved search.

    ``solution_subtrees``: distinct subtrees of the solution, deduplicated
    post-order, solution last. ``all_retained``: every retained
    representative up to and including the solution, in discovery order.
    """
    if not result.solved or result._state is None or result._state.solution is None:
        raise NoSolution("synthesis did not produce a solution")
    if mode == "solution_subtrees":
        assert result.program is not None
        return subtrees(result.program)
    if mode == "all_retained":
        state = result._state
        return [_rebuild(state, i) for i in range(state.solution + 1)]
    raise ValueError(f"unknown trace mode {mode!r}")


def reachable_keys(
    lib: Optional[Library],
    max_layer: int,
    prune: bool = True,
    layering: str = "expanded",
    budget: Optional[SynthesisBudget] = None,
) -> tuple[set[str], int, int]:
    """All output keys reachable within ``max_layer``; used by the pruning
    soundness check. Returns (keys, candidates_explored, reps_retained)."""
    budget = budget or SynthesisBudget(max_candidates=50_000_000)
    state = _enumerate(
        lib,
        budget,
        layering=layering,
        prune=prune,
        max_layer=max_layer,
        targets=None,
        stop_on_first=False,
    )
    if state.complete_layers < max_layer:
        raise RuntimeError("budget exhausted before covering the requested layers")
    keys = {Grid(g).key for g in state.grids}
    return keys, state.explored, len(state.grids)


def first_hit_sizes(
    targets: dict[str, Grid],
    lib: Optional[Library],
    max_exp_size: int,
    budget: Optional[SynthesisBudget] = None,
) -> tuple[dict[str, tuple[int, Program]], bool]:
    """Smallest expanded-size derivation found for each target grid.

    Enumerates by expanded size through ``max_exp_size`` full layers.
    Returns (hits: label -> (expanded size, witness program), complete);
    ``complete`` is False when the budget ran out first.
    """
    budget = budget or SynthesisBudget()
    bits_to_label = {g.bits: label for label, g in targets.items()}
    hits: dict[str, tuple[int, int]] = {}
    state = _enumerate(
        lib,
        budget,
        layering="expanded",
        prune=True,
        max_layer=max_exp_size,
        targets=bits_to_label,
        stop_on_first=False,
        collect_hits=hits,
    )
    complete = state.complete_layers >= max_exp_size or len(hits) == len(targets)
    out = {
        label: (exp, _rebuild(state, idx)) for label, (exp, idx) in hits.items()
    }
    return out, complete


def enumerate_counts(depth: int) -> int:
    """Lower bound on distinct programs at tree depth ``depth``: full binary
    trees over the 6 primitives and 3 binary operators."""
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    leaves = 2 ** depth
    return 6 ** leaves * 3 ** (leaves - 1)
