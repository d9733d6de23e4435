"""Flat-tuple helper selection and its biclique reduction.

In the flat setting every program is an n-tuple of symbols and a helper is a
set of positions S that must match a fixed reference tuple. occ(S) counts
matching programs and the utility is |S| * occ(S). Finding the best single
helper is NP-complete; the reduction from maximum edge biclique below, and
the exhaustive solvers for both problems, serve as executable checkers.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence


class InstanceTooLarge(Exception):
    pass


@dataclass(frozen=True)
class FlatCorpus:
    """Fixed-arity tuple programs plus the reference tuple; positions are
    1-based to match the usual presentation."""

    arity: int
    alphabet: tuple[str, ...]
    programs: tuple[tuple[str, ...], ...]
    reference: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.reference) != self.arity:
            raise ValueError("reference arity mismatch")
        for p in self.programs:
            if len(p) != self.arity:
                raise ValueError("program arity mismatch")

    def to_json(self) -> dict:
        return {
            "arity": self.arity,
            "alphabet": list(self.alphabet),
            "reference": list(self.reference),
            "tuples": [list(p) for p in self.programs],
        }

    @classmethod
    def from_json(cls, data: dict) -> "FlatCorpus":
        return cls(
            arity=data["arity"],
            alphabet=tuple(data["alphabet"]),
            programs=tuple(tuple(p) for p in data["tuples"]),
            reference=tuple(data["reference"]),
        )


def occ(fc: FlatCorpus, positions: Sequence[int]) -> int:
    """Programs matching the reference on every listed (1-based) position."""
    pos = list(positions)
    return sum(
        1
        for p in fc.programs
        if all(p[i - 1] == fc.reference[i - 1] for i in pos)
    )


def utility(fc: FlatCorpus, positions: Sequence[int]) -> int:
    return len(set(positions)) * occ(fc, positions)


def best_single_helper_bruteforce(
    fc: FlatCorpus,
) -> tuple[tuple[int, ...], int]:
    """Exact maximizer of the utility over all position subsets.

    Ties resolve toward smaller sets, then lexicographically smallest
    positions. Enumeration is 2^arity, guarded at arity 24.
    """
    n = fc.arity
    if n > 24:
        raise InstanceTooLarge(f"arity {n} exceeds the 2^24 enumeration guard")
    # agreement mask per program: bit i-1 set when position i matches
    agree = []
    for p in fc.programs:
        m = 0
        for i in range(n):
            if p[i] == fc.reference[i]:
                m |= 1 << i
        agree.append(m)
    best_set: tuple[int, ...] = ()
    best_u = 0
    for size in range(n + 1):
        for combo in combinations(range(1, n + 1), size):
            s_mask = 0
            for i in combo:
                s_mask |= 1 << (i - 1)
            matches = sum(1 for m in agree if m & s_mask == s_mask)
            u = size * matches
            if u > best_u:
                best_u, best_set = u, combo
    return best_set, best_u


@dataclass(frozen=True)
class BipartiteGraph:
    """Bipartite graph with 0-based vertex indices on each side."""

    left_size: int
    right_size: int
    edges: frozenset[tuple[int, int]]

    def __post_init__(self) -> None:
        for u, v in self.edges:
            if not (0 <= u < self.left_size and 0 <= v < self.right_size):
                raise ValueError(f"edge ({u},{v}) out of range")

    def to_json(self) -> dict:
        adjacency = [[] for _ in range(self.left_size)]
        for u, v in sorted(self.edges):
            adjacency[u].append(v)
        return {
            "left": self.left_size,
            "right": self.right_size,
            "adjacency": adjacency,
        }

    @classmethod
    def from_json(cls, data: dict) -> "BipartiteGraph":
        edges = frozenset(
            (u, v)
            for u, nbrs in enumerate(data["adjacency"])
            for v in nbrs
        )
        return cls(data["left"], data["right"], edges)


def biclique_reduction(
    g: BipartiteGraph, k: int
) -> tuple[FlatCorpus, int]:
    """Best-single-helper instance whose decision at the returned threshold
    answers whether ``g`` has an edge biclique of size at least ``k``.

    Each right vertex v_j contributes M = n + 1 copies; a copy's position i
    holds the reference symbol a_i when (u_i, v_j) is an edge and otherwise a
    blocker symbol fresh to that (i, j, copy) triple.
    """
    n, m = g.left_size, g.right_size
    big_m = n + 1
    reference = tuple(f"a{i + 1}" for i in range(n))
    programs: list[tuple[str, ...]] = []
    blockers: list[str] = []
    for j in range(m):
        for copy in range(1, big_m + 1):
            row = []
            for i in range(n):
                if (i, j) in g.edges:
                    row.append(reference[i])
                else:
                    sym = f"b_{i + 1}_{j + 1}_{copy}"
                    blockers.append(sym)
                    row.append(sym)
            programs.append(tuple(row))
    corpus = FlatCorpus(
        arity=n,
        alphabet=tuple(reference) + tuple(blockers),
        programs=tuple(programs),
        reference=reference,
    )
    return corpus, big_m * k


def max_edge_biclique_bruteforce(g: BipartiteGraph) -> int:
    """Largest |S|*|T| over complete bipartite subgraphs, by enumerating
    left-side subsets."""
    best = 0
    adj = [
        {v for u2, v in g.edges if u2 == u} for u in range(g.left_size)
    ]
    for size in range(1, g.left_size + 1):
        for combo in combinations(range(g.left_size), size):
            common = set(range(g.right_size))
            for u in combo:
                common &= adj[u]
                if not common:
                    break
            best = max(best, size * len(common))
    return best


def decide_best_single_helper(fc: FlatCorpus, omega: int) -> bool:
    _, u = best_single_helper_bruteforce(fc)
    return u >= omega


def worked_example() -> FlatCorpus:
    """Worked arity-3 demo instance: three programs over {A,B,X,Y} with
    reference (A, A, X)."""
    return FlatCorpus(
        arity=3,
        alphabet=("A", "B", "X", "Y"),
        programs=(("A", "A", "X"), ("A", "A", "Y"), ("A", "B", "X")),
        reference=("A", "A", "X"),
    )


def demo_reduction_graph() -> tuple[BipartiteGraph, int]:
    """The worked 2x2 reduction input: edges (u1,v1), (u2,v1), (u1,v2); the
    missing edge is (u2,v2). Returns the graph and the printed M."""
    g = BipartiteGraph(2, 2, frozenset({(0, 0), (1, 0), (0, 1)}))
    return g, g.left_size + 1


def random_bipartite(
    left: int, right: int, edge_prob: float, seed: int
) -> BipartiteGraph:
    import random as _random

    rng = _random.Random(seed)
    edges = frozenset(
        (u, v)
        for u in range(left)
        for v in range(right)
        if rng.random() < edge_prob
    )
    return BipartiteGraph(left, right, edges)
