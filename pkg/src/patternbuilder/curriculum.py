"""Curricula: ordered target sequences with latent meta-structure.

Each trial stores its target grid, a closed ground-truth solution, and an
annotation describing how the trial was generated: ``root`` (free choice),
``sequential``/``long_range`` (a transformation of an earlier solution,
distance 1 vs. further back), ``helper`` (built from a named latent program
rather than a prior solution), or ``group`` (one slot of a four-operator
group over a shared latent helper and a primitive). Annotations carry a
recipe tree that may reference earlier solutions (``ref`` leaves) and named
latent programs (``latent`` leaves); validation re-executes recipes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from typing import Optional, Sequence, Union

from .grids import DSL_VERSION, Grid, grid_from_json, grid_to_json, primitive
from .programs import (
    BinaryNode,
    Library,
    PrimitiveLeaf,
    Program,
    UnaryNode,
    add,
    evaluate,
    intersect,
    invert,
    prim,
    program_from_json,
    program_to_json,
    reflect_horizontal,
    reflect_vertical,
    size,
    subtract,
)
from .synthesis import SynthesisBudget, first_hit_sizes


@dataclass(frozen=True)
class RefLeaf:
    """The solution of an earlier trial (1-based index)."""

    trial: int


@dataclass(frozen=True)
class LatentLeaf:
    """A named latent program shared across trials."""

    name: str


Recipe = Union[RefLeaf, LatentLeaf, PrimitiveLeaf, UnaryNode, BinaryNode]


def recipe_refs(r: Recipe) -> set[int]:
    if isinstance(r, RefLeaf):
        return {r.trial}
    if isinstance(r, UnaryNode):
        return recipe_refs(r.child)
    if isinstance(r, BinaryNode):
        return recipe_refs(r.left) | recipe_refs(r.right)
    return set()


def recipe_latents(r: Recipe) -> set[str]:
    if isinstance(r, LatentLeaf):
        return {r.name}
    if isinstance(r, UnaryNode):
        return recipe_latents(r.child)
    if isinstance(r, BinaryNode):
        return recipe_latents(r.left) | recipe_latents(r.right)
    return set()


def resolve_recipe(
    r: Recipe, solutions: Sequence[Program], latents: dict[str, Program]
) -> Program:
    """Closed program with refs replaced by earlier solutions and latents by
    their programs. ``solutions`` holds trials 1..t-1 in order."""
    if isinstance(r, RefLeaf):
        if not 1 <= r.trial <= len(solutions):
            raise ValueError(f"recipe references trial {r.trial} out of range")
        return solutions[r.trial - 1]
    if isinstance(r, LatentLeaf):
        try:
            return latents[r.name]
        except KeyError:
            raise ValueError(f"unknown latent program {r.name!r}") from None
    if isinstance(r, PrimitiveLeaf):
        return r
    if isinstance(r, UnaryNode):
        return UnaryNode(r.op, resolve_recipe(r.child, solutions, latents))
    return BinaryNode(
        r.op,
        resolve_recipe(r.left, solutions, latents),
        resolve_recipe(r.right, solutions, latents),
    )


def recipe_to_json(r: Recipe) -> dict:
    if isinstance(r, RefLeaf):
        return {"ref": r.trial}
    if isinstance(r, LatentLeaf):
        return {"latent": r.name}
    if isinstance(r, PrimitiveLeaf):
        return {"prim": r.name}
    if isinstance(r, UnaryNode):
        return {"op": r.op, "args": [recipe_to_json(r.child)]}
    return {"op": r.op, "args": [recipe_to_json(r.left), recipe_to_json(r.right)]}


def recipe_from_json(data: dict) -> Recipe:
    if "ref" in data:
        return RefLeaf(data["ref"])
    if "latent" in data:
        return LatentLeaf(data["latent"])
    if "prim" in data:
        return PrimitiveLeaf(data["prim"])
    if "op" in data:
        args = [recipe_from_json(a) for a in data["args"]]
        if len(args) == 1:
            return UnaryNode(data["op"], args[0])
        if len(args) == 2:
            return BinaryNode(data["op"], args[0], args[1])
    raise ValueError(f"unrecognized recipe node: {data!r}")


META_KINDS = ("root", "sequential", "long_range", "helper", "group")


@dataclass(frozen=True)
class TrialMeta:
    kind: str
    recipe: Optional[Recipe] = None
    n: Optional[int] = None  # dependency distance for sequential/long_range
    group_id: Optional[str] = None
    slot: Optional[int] = None  # 1..4 within an operator group
    h_id: Optional[str] = None  # latent helper name (helper/group kinds)
    x: Optional[str] = None  # group primitive

    def __post_init__(self) -> None:
        if self.kind not in META_KINDS:
            raise ValueError(f"unknown meta kind {self.kind!r}")


@dataclass(frozen=True)
class Trial:
    index: int  # 1-based
    target: Grid
    solution: Program
    meta: TrialMeta


@dataclass
class Curriculum:
    name: str
    trials: list[Trial]
    latents: dict[str, Program] = field(default_factory=dict)
    dsl_version: str = DSL_VERSION

    def solutions(self) -> list[Program]:
        return [t.solution for t in self.trials]

    def targets(self) -> list[Grid]:
        return [t.target for t in self.trials]

    def __len__(self) -> int:
        return len(self.trials)


def curriculum_to_json(c: Curriculum) -> dict:
    trials = []
    for t in c.trials:
        meta: dict = {"kind": t.meta.kind}
        if t.meta.recipe is not None:
            meta["recipe"] = recipe_to_json(t.meta.recipe)
        for key in ("n", "group_id", "slot", "h_id", "x"):
            value = getattr(t.meta, key)
            if value is not None:
                meta[key] = value
        trials.append(
            {
                "index": t.index,
                "target": grid_to_json(t.target),
                "solution": program_to_json(t.solution),
                "meta": meta,
            }
        )
    return {
        "name": c.name,
        "dsl_version": c.dsl_version,
        "latents": {k: program_to_json(v) for k, v in c.latents.items()},
        "trials": trials,
    }


def curriculum_from_json(data: dict) -> Curriculum:
    latents = {
        k: program_from_json(v) for k, v in data.get("latents", {}).items()
    }
    trials = []
    for raw in data["trials"]:
        m = raw["meta"]
        meta = TrialMeta(
            kind=m["kind"],
            recipe=recipe_from_json(m["recipe"]) if "recipe" in m else None,
            n=m.get("n"),
            group_id=m.get("group_id"),
            slot=m.get("slot"),
            h_id=m.get("h_id"),
            x=m.get("x"),
        )
        trials.append(
            Trial(
                index=raw["index"],
                target=grid_from_json(raw["target"]),
                solution=program_from_json(raw["solution"]),
                meta=meta,
            )
        )
    return Curriculum(
        name=data["name"],
        trials=trials,
        latents=latents,
        dsl_version=data.get("dsl_version", DSL_VERSION),
    )


def load_curriculum(path: str) -> Curriculum:
    with open(path, "r", encoding="utf-8") as fh:
        return curriculum_from_json(json.load(fh))


def save_curriculum(c: Curriculum, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(curriculum_to_json(c), fh, indent=1)
        fh.write("\n")


# -- the 14-trial sequential/long-range curriculum ----------------------

LH = prim("line_horizontal")
LV = prim("line_vertical")
SQ = prim("square")
DIAG = prim("diagonal")

FAT_CROSS = add(add(LH, reflect_horizontal(LH)), add(LV, reflect_vertical(LV)))
DIAGONAL_CROSS = add(DIAG, reflect_vertical(DIAG))


def build_e1() -> Curriculum:
    """The 14-trial sequential curriculum. Trials 2,3,6,9,10,12 extend the
    immediately preceding solution; 7,8,11,13,14 reach further back; 4 and 5
    are built from the shared diagonal-cross latent."""
    fc = LatentLeaf("fat_cross")
    dc = LatentLeaf("diagonal_cross")
    rows: list[tuple[str, Optional[int], Recipe]] = [
        ("root", None, fc),
        ("sequential", 1, BinaryNode("add", RefLeaf(1), SQ)),
        ("sequential", 1, UnaryNode("invert", RefLeaf(2))),
        ("helper", None, BinaryNode("subtract", SQ, dc)),
        ("helper", None, BinaryNode("add", SQ, dc)),
        ("sequential", 1, UnaryNode("invert", RefLeaf(5))),
        ("long_range", 6, BinaryNode("add", dc, RefLeaf(1))),
        ("long_range", 7, BinaryNode("intersect", dc, RefLeaf(1))),
        ("sequential", 1, BinaryNode("add", RefLeaf(8), SQ)),
        ("sequential", 1, UnaryNode("invert", RefLeaf(9))),
        ("long_range", 3, BinaryNode("add", RefLeaf(8), UnaryNode("invert", RefLeaf(1)))),
        ("sequential", 1, BinaryNode("add", UnaryNode("invert", RefLeaf(11)), SQ)),
        ("long_range", 5, BinaryNode("subtract", dc, RefLeaf(8))),
        ("long_range", 7, BinaryNode("subtract", RefLeaf(7), RefLeaf(8))),
    ]
    latents = {"fat_cross": FAT_CROSS, "diagonal_cross": DIAGONAL_CROSS}
    trials: list[Trial] = []
    solutions: list[Program] = []
    for i, (kind, n, recipe) in enumerate(rows, start=1):
        solution = resolve_recipe(recipe, solutions, latents)
        meta = TrialMeta(
            kind=kind,
            recipe=recipe,
            n=n,
            h_id="diagonal_cross" if kind == "helper" else None,
        )
        trials.append(Trial(i, evaluate(solution), solution, meta))
        solutions.append(solution)
    return Curriculum(name="e1", trials=trials, latents=latents)


# -- four-operator groups ------------------------------------------------

GROUP_SLOT_NAMES = ("add", "subtract", "overlap", "add_invert")


@dataclass(frozen=True)
class OperatorGroup:
    """Four targets from one shared helper and one primitive, in slot order
    add / subtract / overlap / add-of-inverse."""

    helper: Program
    x: str
    prescribed: tuple[Program, Program, Program, Program]
    targets: tuple[Grid, Grid, Grid, Grid]


def generate_group(h: Program, x: str) -> OperatorGroup:
    """Build the four slot programs and their grids. No parsimony check
    happens here; run ``validate_group`` on the result."""
    px = prim(x)
    prescribed = (
        add(h, px),
        subtract(h, px),
        intersect(h, px),
        add(invert(h), px),
    )
    targets = tuple(evaluate(p) for p in prescribed)
    return OperatorGroup(helper=h, x=x, prescribed=prescribed, targets=targets)  # type: ignore[arg-type]


@dataclass(frozen=True)
class PairCheck:
    a: int  # injected slot (1-based)
    b: int  # checked slot
    status: str  # PASS | FAIL | INCONCLUSIVE
    prescribed_size: int
    found_size: Optional[int] = None
    witness: Optional[Program] = None


@dataclass
class GroupValidationReport:
    passed: bool
    issues: list[str]
    pairs: list[PairCheck]

    def failures(self) -> list[PairCheck]:
        return [p for p in self.pairs if p.status == "FAIL"]

    def inconclusive(self) -> list[PairCheck]:
        return [p for p in self.pairs if p.status == "INCONCLUSIVE"]


def validate_group(
    group: OperatorGroup, budget: Optional[SynthesisBudget] = None
) -> GroupValidationReport:
    """Parsimony check over all 12 ordered slot pairs.

    For pair (a, b), bounded synthesis runs for target b with target a
    injected as a helper; the injected helper costs its full expanded size.
    The pair fails when a derivation strictly smaller than the prescribed
    slot program exists. Degenerate groups (duplicate or blank targets, or
    prescribed programs that do not reproduce their targets) fail outright.
    """
    budget = budget or SynthesisBudget()
    issues: list[str] = []
    keys = [t.key for t in group.targets]
    blank_key = Grid(0).key
    for i, key in enumerate(keys, start=1):
        if key == blank_key:
            issues.append(f"slot {i} target is blank")
    for i in range(4):
        for j in range(i + 1, 4):
            if keys[i] == keys[j]:
                issues.append(f"slots {i + 1} and {j + 1} share a target")
    for i, (p, t) in enumerate(zip(group.prescribed, group.targets), start=1):
        if evaluate(p) != t:
            issues.append(f"slot {i} prescribed program does not produce its target")
    if issues:
        return GroupValidationReport(passed=False, issues=issues, pairs=[])

    sizes = [size(p).node_count for p in group.prescribed]
    pairs: list[PairCheck] = []
    for a in range(1, 5):
        lib = Library()
        lib.add(group.prescribed[a - 1])
        others = {str(b): group.targets[b - 1] for b in range(1, 5) if b != a}
        limit = max(sizes[b - 1] for b in range(1, 5) if b != a) - 1
        hits, complete = first_hit_sizes(others, lib, limit, budget)
        for b in range(1, 5):
            if b == a:
                continue
            prescribed_size = sizes[b - 1]
            hit = hits.get(str(b))
            if hit is not None and hit[0] < prescribed_size:
                pairs.append(
                    PairCheck(a, b, "FAIL", prescribed_size, hit[0], hit[1])
                )
            elif not complete:
                pairs.append(PairCheck(a, b, "INCONCLUSIVE", prescribed_size))
            else:
                found = hit[0] if hit else None
                pairs.append(PairCheck(a, b, "PASS", prescribed_size, found))
    passed = all(p.status == "PASS" for p in pairs)
    return GroupValidationReport(passed=passed, issues=issues, pairs=pairs)


def group_curriculum(
    name: str, specs: Sequence[tuple[str, Program, str]]
) -> Curriculum:
    """Concatenate operator groups into a curriculum. ``specs`` holds
    (group id, shared helper program, primitive name) triples."""
    latents: dict[str, Program] = {}
    trials: list[Trial] = []
    index = 1
    for gid, h, x in specs:
        latents[gid] = h
        group = generate_group(h, x)
        for slot in range(1, 5):
            meta = TrialMeta(
                kind="group", group_id=gid, slot=slot, h_id=gid, x=x,
                recipe=None,
            )
            trials.append(
                Trial(index, group.targets[slot - 1], group.prescribed[slot - 1], meta)
            )
            index += 1
    return Curriculum(name=name, trials=trials, latents=latents)


@dataclass(frozen=True)
class TrialCheck:
    index: int
    kind: str
    status: str  # PASS | FAIL
    detail: str = ""


def validate_sequential(c: Curriculum) -> list[TrialCheck]:
    """Re-execute every trial annotation.

    Recipe-bearing trials must reproduce their target from earlier
    solutions and latents, with the declared dependency distance matching
    the kind (sequential means distance 1). Group trials must match their
    slot formula applied to the named latent helper and primitive.
    """
    checks: list[TrialCheck] = []
    solutions: list[Program] = []
    for t in c.trials:
        kind = t.meta.kind
        status, detail = "PASS", ""
        try:
            if kind == "group":
                h = c.latents[t.meta.h_id]
                group = generate_group(h, t.meta.x)
                expected = group.targets[t.meta.slot - 1]
                if expected != t.target:
                    status = "FAIL"
                    detail = f"slot formula gives {expected.key}, stored {t.target.key}"
            else:
                if t.meta.recipe is None:
                    raise ValueError("missing recipe")
                resolved = resolve_recipe(t.meta.recipe, solutions, c.latents)
                got = evaluate(resolved)
                if got != t.target:
                    status = "FAIL"
                    detail = f"recipe gives {got.key}, stored {t.target.key}"
                refs = recipe_refs(t.meta.recipe)
                if kind in ("sequential", "long_range"):
                    n = t.meta.n
                    if n is None or (t.index - n) not in refs or n < 1:
                        status = "FAIL"
                        detail = detail or f"declared distance {n} not among refs {sorted(refs)}"
                    elif kind == "sequential" and n != 1:
                        status = "FAIL"
                        detail = detail or "sequential trials must have distance 1"
                    elif kind == "long_range" and n <= 1:
                        status = "FAIL"
                        detail = detail or "long-range trials must have distance > 1"
                elif kind == "helper":
                    if refs:
                        status = "FAIL"
                        detail = detail or "helper trials must not reference prior solutions"
                    if not recipe_latents(t.meta.recipe):
                        status = "FAIL"
                        detail = detail or "helper trials must use a latent program"
            if evaluate(t.solution) != t.target:
                status = "FAIL"
                detail = detail or "stored solution does not produce the target"
        except Exception as exc:  # report, never raise: the log is the product
            status, detail = "FAIL", f"{type(exc).__name__}: {exc}"
        checks.append(TrialCheck(t.index, kind, status, detail))
        solutions.append(t.solution)
    return checks


def load_e2() -> Curriculum:
    """The shipped 16-trial four-operator-group curriculum."""
    data = resources.files("patternbuilder").joinpath("data/e2.json")
    return curriculum_from_json(json.loads(data.read_text(encoding="utf-8")))
