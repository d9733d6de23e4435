"""Helper scoring and selection: compression utility and the online
abstraction operators (greedy retrospective, last-solution, stochastic, and
the clairvoyant prospective oracle).

Compression utility of a helper set H over a corpus counts, per helper, the
number of corpus programs in which the helper occurs as a sub-program without
that occurrence lying strictly inside an occurrence already credited to
another helper in H. Helpers claim coverage in descending size order, so a
nested helper saves nothing inside its host. Utility is size times count,
summed over H; sizes and matches are taken over fully expanded trees.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional, Sequence

from .programs import (
    Library,
    Program,
    canonical_key,
    children,
    expand,
    size,
    structure_key,
    subtrees,
)


class EmptyTrace(Exception):
    pass


@dataclass(frozen=True)
class AbstractionConfig:
    """Which helpers to promote after each solved task.

    strategy: 'rc' greedy top-k by utility over tasks seen so far,
    'gl' the final solution only, 'pl' Bernoulli(q) per trace element,
    'oracle' greedy top-k by utility over the full (future-inclusive) corpus.
    """

    strategy: str
    k: int = 1
    q: float = 0.3
    seed: int = 0

    def __post_init__(self) -> None:
        if self.strategy not in ("rc", "gl", "pl", "oracle", "none"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.strategy in ("rc", "oracle") and self.k < 1:
            raise ValueError("k must be >= 1")
        if self.strategy == "pl" and not 0.0 < self.q < 1.0:
            raise ValueError("q must lie strictly between 0 and 1")


def _paths_of(h: Program, p: Program, h_size: int) -> list[tuple[int, ...]]:
    hits: list[tuple[int, ...]] = []

    def go(node: Program, path: tuple[int, ...]) -> int:
        total = 1
        for i, ch in enumerate(children(node)):
            total += go(ch, path + (i,))
        if total == h_size and node == h:
            hits.append(path)
        return total

    go(p, ())
    return hits


def _strictly_inside(path: tuple[int, ...], claimed: list[tuple[int, ...]]) -> bool:
    return any(len(path) > len(c) and path[: len(c)] == c for c in claimed)


def compression_utility(
    helpers: Sequence[Program],
    corpus: Sequence[Program],
    lib: Optional[Library] = None,
) -> int:
    expanded_h: dict[Program, int] = {}
    for h in helpers:
        eh = expand(h, lib)
        if eh not in expanded_h:
            expanded_h[eh] = size(eh).node_count
    ordered = sorted(
        expanded_h.items(), key=lambda item: (-item[1], structure_key(item[0]))
    )
    counts = {eh: 0 for eh in expanded_h}
    for prog in corpus:
        p = expand(prog, lib)
        claimed: list[tuple[int, ...]] = []
        for eh, h_size in ordered:
            valid = [
                path
                for path in _paths_of(eh, p, h_size)
                if not _strictly_inside(path, claimed)
            ]
            if valid:
                counts[eh] += 1
                claimed.extend(valid)
    return sum(h_size * counts[eh] for eh, h_size in ordered)


def greedy_select(
    pool: Sequence[Program],
    corpus: Sequence[Program],
    k: int,
    lib: Optional[Library] = None,
    seed: int = 0,
    skip_keys: frozenset[str] = frozenset(),
) -> list[Program]:
    """Greedy top-k by marginal compression utility, recomputed after each
    pick. Stops early on non-positive marginal gain; ties are broken by a
    seeded random draw over canonically sorted candidates."""
    rng = random.Random(seed)
    candidates = [
        c for c in dict.fromkeys(pool) if canonical_key(c, lib) not in skip_keys
    ]
    picked: list[Program] = []
    base = 0
    for _ in range(max(k, 0)):
        best_gain = 0
        best: list[Program] = []
        for cand in candidates:
            if cand in picked:
                continue
            gain = compression_utility(picked + [cand], corpus, lib) - base
            if gain > best_gain:
                best_gain, best = gain, [cand]
            elif gain == best_gain and gain > 0:
                best.append(cand)
        if not best:
            break
        choice = rng.choice(sorted(best, key=structure_key))
        picked.append(choice)
        base += best_gain
    return picked


def abstract_rc(
    trace: Sequence[Program],
    corpus: Sequence[Program],
    k: int,
    lib: Optional[Library] = None,
    seed: int = 0,
) -> list[Program]:
    """Greedy top-k trace candidates by utility against the corpus so far.
    Candidates whose output already sits in the library are skipped."""
    if not trace:
        return []
    skip = lib.output_keys() if lib is not None else frozenset()
    return greedy_select(trace, corpus, k, lib, seed, skip_keys=skip)


def abstract_gl(trace: Sequence[Program]) -> list[Program]:
    """Promote only the final trace element (the completed solution)."""
    if not trace:
        raise EmptyTrace("cannot abstract from an empty trace")
    return [trace[-1]]


def abstract_pl(trace: Sequence[Program], q: float, seed: int) -> list[Program]:
    """Include each trace element independently with probability q."""
    if not 0.0 < q < 1.0:
        raise ValueError("q must lie strictly between 0 and 1")
    rng = random.Random(seed)
    return [p for p in trace if rng.random() < q]


def abstract_oracle_prospective(
    trace: Sequence[Program],
    full_corpus: Sequence[Program],
    k: int,
    lib: Optional[Library] = None,
    seed: int = 0,
) -> list[Program]:
    """Clairvoyant prospective selection: greedy top-k trace candidates by
    utility against the entire (future-inclusive) solution corpus."""
    if not trace:
        return []
    skip = lib.output_keys() if lib is not None else frozenset()
    return greedy_select(trace, full_corpus, k, lib, seed, skip_keys=skip)


def oracle_helpers(
    full_corpus: Sequence[Program],
    upto_trial: int,
    k: int,
    lib: Optional[Library] = None,
    seed: int = 0,
) -> list[Program]:
    """Hindsight helpers: all sub-trees of the ground-truth solutions for
    trials 1..upto_trial, ranked greedily by utility over the full corpus."""
    if not 1 <= upto_trial <= len(full_corpus):
        raise ValueError("upto_trial out of range")
    if k <= 0:
        return []
    pool: dict[Program, None] = {}
    for sol in full_corpus[:upto_trial]:
        for sub in subtrees(expand(sol, lib)):
            pool.setdefault(sub)
    return greedy_select(list(pool), full_corpus, k, lib, seed)


def apply_abstraction(
    config: AbstractionConfig,
    trace: Sequence[Program],
    corpus_so_far: Sequence[Program],
    full_corpus: Optional[Sequence[Program]],
    lib: Library,
    trial_index: int,
) -> list[Program]:
    """Dispatch an abstraction strategy; returns the programs to promote."""
    if config.strategy == "none" or not trace:
        return []
    if config.strategy == "rc":
        return abstract_rc(trace, corpus_so_far, config.k, lib, config.seed)
    if config.strategy == "gl":
        return abstract_gl(trace)
    if config.strategy == "pl":
        return abstract_pl(trace, config.q, config.seed * 1_000_003 + trial_index)
    if config.strategy == "oracle":
        if full_corpus is None:
            raise ValueError("oracle strategy needs the full ground-truth corpus")
        return abstract_oracle_prospective(trace, full_corpus, config.k, lib, config.seed)
    raise AssertionError(config.strategy)
