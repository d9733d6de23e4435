"""Symmetry-biased random walk over the program space.

The walk keeps a bounded pool of programs seeded with the six primitives.
Each step samples a pool program and an operator (binary operators also
sample a second operand from the pool plus the primitives); the candidate is
accepted only when its output grid is new and symmetric across at least one
configured axis. When an accepted program overflows the pool, the entry with
the largest expanded node count is evicted, so the pool stays biased toward
short programs. Reported discovery counts are therefore lower bounds on the
reachable space.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from typing import IO, Optional

from .grids import (
    FULL_MASK,
    Grid,
    PRIMITIVE_NAMES,
    SYMMETRY_AXES,
    UNARY_BITS_FNS,
    is_symmetric_bits,
    primitive,
)
from .programs import (
    BinaryNode,
    PrimitiveLeaf,
    Program,
    UnaryNode,
    structure_key,
)

_OPS = ("add", "subtract", "intersect", "invert", "reflect_horizontal", "reflect_vertical", "reflect_diag")


@dataclass(frozen=True)
class WalkConfig:
    steps: int
    pool_size: int = 256
    seed: int = 0
    axes: tuple[str, ...] = SYMMETRY_AXES

    def __post_init__(self) -> None:
        if self.steps <= 0:
            raise ValueError("steps must be positive")
        if self.pool_size < len(PRIMITIVE_NAMES):
            raise ValueError("pool must hold at least the primitives")


@dataclass(frozen=True)
class Discovery:
    step: int
    key: str
    node_count: int


@dataclass
class WalkResult:
    config: WalkConfig
    discoveries: list[Discovery]
    pool_final_size: int

    @property
    def total_discovered(self) -> int:
        return len(self.discoveries)

    def node_count_histogram(self) -> dict[int, int]:
        hist: dict[int, int] = {}
        for d in self.discoveries:
            hist[d.node_count] = hist.get(d.node_count, 0) + 1
        return dict(sorted(hist.items()))

    def summary(self) -> dict:
        return {
            "config": {
                "steps": self.config.steps,
                "pool_size": self.config.pool_size,
                "seed": self.config.seed,
                "axes": list(self.config.axes),
            },
            "total_discovered": self.total_discovered,
            "node_count_histogram": {
                str(k): v for k, v in self.node_count_histogram().items()
            },
        }


@dataclass
class _Entry:
    program: Program
    bits: int
    nodes: int


def random_walk(cfg: WalkConfig, log_sink: Optional[IO[str]] = None) -> WalkResult:
    """Run the walk; optionally stream each discovery as one JSON line."""
    rng = random.Random(cfg.seed)
    primitives = [
        _Entry(PrimitiveLeaf(name), primitive(name).bits, 1)
        for name in PRIMITIVE_NAMES
    ]
    pool: list[_Entry] = list(primitives)
    seen: set[int] = set()
    discoveries: list[Discovery] = []

    def record(step: int, entry: _Entry) -> None:
        discovery = Discovery(step, Grid(entry.bits).key, entry.nodes)
        discoveries.append(discovery)
        if log_sink is not None:
            log_sink.write(
                json.dumps(
                    {"step": discovery.step, "key": discovery.key, "node_count": discovery.node_count}
                )
                + "\n"
            )

    # the symmetric primitives are discoveries of step 0
    for entry in primitives:
        if entry.bits not in seen and is_symmetric_bits(entry.bits, cfg.axes):
            seen.add(entry.bits)
            record(0, entry)

    for step in range(1, cfg.steps + 1):
        base = rng.choice(pool)
        op = rng.choice(_OPS)
        if op in UNARY_BITS_FNS:
            bits = (FULL_MASK ^ base.bits) if op == "invert" else UNARY_BITS_FNS[op](base.bits)
            candidate = _Entry(UnaryNode(op, base.program), bits, base.nodes + 1)
        else:
            other = rng.choice(pool + primitives)
            if op == "add":
                bits = base.bits | other.bits
            elif op == "subtract":
                bits = base.bits & (FULL_MASK ^ other.bits)
            else:
                bits = base.bits & other.bits
            candidate = _Entry(
                BinaryNode(op, base.program, other.program),
                bits,
                base.nodes + other.nodes + 1,
            )
        if bits in seen or not is_symmetric_bits(bits, cfg.axes):
            continue
        seen.add(bits)
        record(step, candidate)
        pool.append(candidate)
        if len(pool) > cfg.pool_size:
            victim = max(
                range(len(pool)),
                key=lambda i: (pool[i].nodes, structure_key(pool[i].program)),
            )
            pool.pop(victim)
    return WalkResult(config=cfg, discoveries=discoveries, pool_final_size=len(pool))


def write_summary(result: WalkResult, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(result.summary(), fh, indent=1)
        fh.write("\n")
