"""Curriculum runs for the model suite.

A run walks the curriculum in order, synthesizes each target under the
current library, applies the configured abstraction operator to the solved
trial's derivation trace, and promotes the selected helpers. Failures are
recorded and the run continues. LLM-backed models live in ``llm``; this
module covers the search-based models (no-library baseline, greedy and
stochastic trace promotion, retrospective and clairvoyant selection).
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from typing import Optional

from .curriculum import Curriculum
from .learning import AbstractionConfig, apply_abstraction
from .programs import (
    Library,
    Program,
    expand,
    library_to_json,
    program_to_json,
    size,
)
from .synthesis import SynthesisBudget, solve, trace_of

SEARCH_MODELS = ("nolib", "rc", "gl", "pl", "oracle")


@dataclass(frozen=True)
class RunSpec:
    model: str
    budget: SynthesisBudget = field(default_factory=SynthesisBudget)
    k: int = 1
    q: float = 0.3
    seed: int = 0
    trace_mode: str = "solution_subtrees"

    def abstraction(self) -> AbstractionConfig:
        if self.model == "nolib":
            return AbstractionConfig("none")
        strategy = {"rc": "rc", "gl": "gl", "pl": "pl", "oracle": "oracle"}[self.model]
        return AbstractionConfig(strategy, k=self.k, q=self.q, seed=self.seed)

    def __post_init__(self) -> None:
        if self.model not in SEARCH_MODELS:
            raise ValueError(f"unknown search model {self.model!r}")


@dataclass
class TrialRecord:
    trial: int
    solved: bool
    candidates_explored: int
    classes_retained: int
    wall_time_ms: float
    program: Optional[Program] = None
    solution_op_count: Optional[int] = None  # helpers count as leaves
    expanded_node_count: Optional[int] = None
    trace: Optional[list[Program]] = None
    promoted: list[str] = field(default_factory=list)
    library_size: int = 0

    @property
    def trace_length(self) -> Optional[int]:
        return len(self.trace) if self.trace is not None else None


@dataclass
class RunRecord:
    model: str
    curriculum: str
    spec: RunSpec
    trials: list[TrialRecord]
    library: Library

    @property
    def solved_count(self) -> int:
        return sum(1 for t in self.trials if t.solved)

    def solved_trials(self) -> list[int]:
        return [t.trial for t in self.trials if t.solved]


def _authored_op_count(p: Program) -> int:
    """Operator nodes of the tree as written, helper leaves opaque."""
    from .programs import BinaryNode, UnaryNode

    if isinstance(p, UnaryNode):
        return 1 + _authored_op_count(p.child)
    if isinstance(p, BinaryNode):
        return 1 + _authored_op_count(p.left) + _authored_op_count(p.right)
    return 0


def run_curriculum(curriculum: Curriculum, spec: RunSpec) -> RunRecord:
    lib = Library()
    config = spec.abstraction()
    full_corpus = (
        [expand(s) for s in curriculum.solutions()]
        if spec.model == "oracle"
        else None
    )
    corpus: list[Program] = []  # this run's solved solutions, expanded
    records: list[TrialRecord] = []
    for trial in curriculum.trials:
        t0 = time.perf_counter()
        result = solve(trial.target, lib, spec.budget)
        wall = (time.perf_counter() - t0) * 1000.0
        rec = TrialRecord(
            trial=trial.index,
            solved=result.solved,
            candidates_explored=result.candidates_explored,
            classes_retained=result.classes_retained,
            wall_time_ms=wall,
        )
        if result.solved:
            program = result.program
            assert program is not None
            rec.program = program
            rec.solution_op_count = _authored_op_count(program)
            rec.expanded_node_count = size(program, lib).node_count
            corpus.append(expand(program, lib))
            trace = trace_of(result, spec.trace_mode)
            rec.trace = trace
            selected = apply_abstraction(
                config, trace, corpus, full_corpus, lib, trial.index
            )
            for choice in selected:
                before = len(lib)
                hid = lib.add(choice, created_at_trial=trial.index)
                if len(lib) > before:
                    rec.promoted.append(hid)
        rec.library_size = len(lib)
        records.append(rec)
    return RunRecord(
        model=spec.model,
        curriculum=curriculum.name,
        spec=spec,
        trials=records,
        library=lib,
    )


def run_record_to_json(record: RunRecord) -> dict:
    return {
        "model": record.model,
        "curriculum": record.curriculum,
        "config": {
            "budget": {
                "max_candidates": record.spec.budget.max_candidates,
                "max_size": record.spec.budget.max_size,
            },
            "k": record.spec.k,
            "q": record.spec.q,
            "seed": record.spec.seed,
            "trace_mode": record.spec.trace_mode,
        },
        "trials": [
            {
                "trial": t.trial,
                "solved": t.solved,
                "program": program_to_json(t.program) if t.program else None,
                "solution_op_count": t.solution_op_count,
                "expanded_node_count": t.expanded_node_count,
                # full traces are kept for the default compact mode; the
                # all_retained ablation only records the length
                "trace": [program_to_json(p) for p in t.trace]
                if t.trace is not None and record.spec.trace_mode == "solution_subtrees"
                else None,
                "trace_length": t.trace_length,
                "candidates_explored": t.candidates_explored,
                "classes_retained": t.classes_retained,
                "wall_time_ms": round(t.wall_time_ms, 3),
                "promoted": t.promoted,
                "library_size": t.library_size,
            }
            for t in record.trials
        ],
        "library": library_to_json(record.library),
    }


def save_run_record(record: RunRecord, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(run_record_to_json(record), fh, indent=1)
        fh.write("\n")
