"""Metrics over model runs and session logs.

Session logs are the replayable event streams of one builder session
(human or scripted). ``replay`` re-executes every committed step through the
grid operators and checks the recorded result keys, reference validity, the
exact-match scoring rule, and step counts. The metric functions mirror the
run analytics: per-trial accuracy and step counts, top-k most frequent
helpers across participants, and compression utility of helper sets against
a curriculum's ground-truth corpus.
"""

from __future__ import annotations

import csv
import json
import random
from dataclasses import dataclass
from importlib import resources
from typing import Optional, Sequence

import jsonschema

from .curriculum import Curriculum
from .grids import (
    DSL_VERSION,
    Grid,
    PRIMITIVE_NAMES,
    apply_binary,
    apply_unary,
    is_binary,
    normalize_op,
    primitive,
)
from .learning import compression_utility, greedy_select, oracle_helpers
from .programs import (
    BinaryNode,
    Program,
    UnaryNode,
    expand,
    prim,
    size,
    structure_key,
    subtrees,
)
from .synthesis import SynthesisBudget, solve


class RejectLog(Exception):
    pass


@dataclass(frozen=True)
class StepRef:
    kind: str  # "prim" | "helper" | "step"
    value: object

    def to_json(self) -> dict:
        return {self.kind: self.value}


@dataclass
class Event:
    t_ms: int
    kind: str  # preview | commit | cancel | save_helper | delete_helper | submit
    op: Optional[str] = None
    args: tuple[StepRef, ...] = ()
    result_key: Optional[str] = None
    helper_id: Optional[str] = None
    step_index: Optional[int] = None
    submitted_key: Optional[str] = None


@dataclass
class TrialLog:
    trial_index: int
    target_key: str
    events: list[Event]
    submitted_key: str
    correct: bool
    steps_committed: int


@dataclass
class SessionLog:
    experiment_id: str
    participant_id: str
    trials: list[TrialLog]
    dsl_version: str = DSL_VERSION


def _schema() -> dict:
    text = resources.files("patternbuilder").joinpath(
        "schemas/session_log.schema.json"
    ).read_text(encoding="utf-8")
    return json.loads(text)


def session_log_to_json(log: SessionLog) -> dict:
    trials = []
    for t in log.trials:
        events = []
        for e in t.events:
            obj: dict = {"t_ms": e.t_ms, "kind": e.kind}
            if e.op is not None:
                obj["step"] = {"op": e.op, "args": [r.to_json() for r in e.args]}
            if e.result_key is not None:
                obj["result_key"] = e.result_key
            if e.helper_id is not None:
                obj["helper_id"] = e.helper_id
            if e.step_index is not None:
                obj["step_index"] = e.step_index
            if e.submitted_key is not None:
                obj["submitted_key"] = e.submitted_key
            events.append(obj)
        trials.append(
            {
                "trial_index": t.trial_index,
                "target_key": t.target_key,
                "events": events,
                "submitted_key": t.submitted_key,
                "correct": t.correct,
                "steps_committed": t.steps_committed,
            }
        )
    return {
        "schema_version": 1,
        "experiment_id": log.experiment_id,
        "participant_id": log.participant_id,
        "dsl_version": log.dsl_version,
        "trials": trials,
    }


def session_log_from_json(data: dict) -> SessionLog:
    try:
        jsonschema.validate(data, _schema())
    except jsonschema.ValidationError as exc:
        raise RejectLog(f"schema violation: {exc.message}") from None
    trials = []
    for t in data["trials"]:
        events = []
        for e in t["events"]:
            step = e.get("step")
            args: tuple[StepRef, ...] = ()
            op = None
            if step is not None:
                op = step["op"]
                refs = []
                for raw in step["args"]:
                    (kind, value), = raw.items()
                    refs.append(StepRef(kind, value))
                args = tuple(refs)
            events.append(
                Event(
                    t_ms=e["t_ms"],
                    kind=e["kind"],
                    op=op,
                    args=args,
                    result_key=e.get("result_key"),
                    helper_id=e.get("helper_id"),
                    step_index=e.get("step_index"),
                    submitted_key=e.get("submitted_key"),
                )
            )
        trials.append(
            TrialLog(
                trial_index=t["trial_index"],
                target_key=t["target_key"],
                events=events,
                submitted_key=t["submitted_key"],
                correct=t["correct"],
                steps_committed=t["steps_committed"],
            )
        )
    return SessionLog(
        experiment_id=data["experiment_id"],
        participant_id=data["participant_id"],
        trials=trials,
        dsl_version=data["dsl_version"],
    )


def load_session_log(path: str) -> SessionLog:
    with open(path, "r", encoding="utf-8") as fh:
        return session_log_from_json(json.load(fh))


def save_session_log(log: SessionLog, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(session_log_to_json(log), fh, indent=1)
        fh.write("\n")


@dataclass
class ReplayIssue:
    trial_index: int
    event_position: Optional[int]
    message: str


@dataclass
class ReplayReport:
    passed: bool
    issues: list[ReplayIssue]


def replay(log: SessionLog) -> ReplayReport:
    """Re-execute the whole session and verify every recorded result.

    Helpers persist across trials; committed steps are per trial. The
    submitted grid must be the last committed result (blank when nothing was
    committed) and the correct flag must equal exact target match.
    """
    issues: list[ReplayIssue] = []
    helpers: dict[str, Grid] = {}
    for trial in log.trials:
        steps: list[Grid] = []
        pending: Optional[Grid] = None
        committed = 0
        submitted: Optional[str] = None

        def resolve(ref: StepRef) -> Optional[Grid]:
            if ref.kind == "prim":
                try:
                    return _PRIM_GRIDS[ref.value]
                except KeyError:
                    return None
            if ref.kind == "helper":
                return helpers.get(ref.value)
            if ref.kind == "step":
                if isinstance(ref.value, int) and 0 <= ref.value < len(steps):
                    return steps[ref.value]
                return None
            return None

        for pos, event in enumerate(trial.events):
            if event.kind in ("preview", "commit"):
                if event.op is None or event.result_key is None:
                    issues.append(ReplayIssue(trial.trial_index, pos, "step event without op or result"))
                    continue
                operands = [resolve(r) for r in event.args]
                if any(g is None for g in operands):
                    issues.append(
                        ReplayIssue(trial.trial_index, pos, f"unresolvable operand in {event.kind}")
                    )
                    continue
                try:
                    op = normalize_op(event.op)
                    want = 2 if is_binary(op) else 1
                    if len(operands) != want:
                        issues.append(ReplayIssue(trial.trial_index, pos, f"{op} arity mismatch"))
                        continue
                    if want == 2:
                        result = apply_binary(op, operands[0], operands[1])
                    else:
                        result = apply_unary(op, operands[0])
                except Exception as exc:
                    issues.append(ReplayIssue(trial.trial_index, pos, str(exc)))
                    continue
                if result.key != event.result_key:
                    issues.append(
                        ReplayIssue(trial.trial_index, pos, "recorded result key does not match recomputation")
                    )
                    continue
                if event.kind == "commit":
                    steps.append(result)
                    committed += 1
                    pending = None
                else:
                    pending = result
            elif event.kind == "cancel":
                pending = None
            elif event.kind == "save_helper":
                if event.helper_id is None or event.step_index is None:
                    issues.append(ReplayIssue(trial.trial_index, pos, "save_helper missing fields"))
                    continue
                if not 0 <= event.step_index < len(steps):
                    issues.append(ReplayIssue(trial.trial_index, pos, "save_helper references missing step"))
                    continue
                grid = steps[event.step_index]
                if any(g.key == grid.key for g in helpers.values()):
                    # duplicate output: the UI must not create a second entry
                    issues.append(ReplayIssue(trial.trial_index, pos, "duplicate helper output saved"))
                    continue
                helpers[event.helper_id] = grid
            elif event.kind == "delete_helper":
                if event.helper_id not in helpers:
                    issues.append(ReplayIssue(trial.trial_index, pos, "delete of unknown helper"))
                    continue
                del helpers[event.helper_id]
            elif event.kind == "submit":
                submitted = event.submitted_key or (steps[-1].key if steps else Grid(0).key)
            else:
                issues.append(ReplayIssue(trial.trial_index, pos, f"unknown event kind {event.kind}"))

        final_key = steps[-1].key if steps else Grid(0).key
        if submitted is None:
            issues.append(ReplayIssue(trial.trial_index, None, "trial has no submit event"))
        elif submitted != final_key:
            issues.append(ReplayIssue(trial.trial_index, None, "submitted grid is not the final canvas"))
        if trial.submitted_key != final_key:
            issues.append(ReplayIssue(trial.trial_index, None, "stored submitted key mismatch"))
        if trial.correct != (trial.submitted_key == trial.target_key):
            issues.append(ReplayIssue(trial.trial_index, None, "correct flag violates exact-match scoring"))
        if trial.steps_committed != committed:
            issues.append(ReplayIssue(trial.trial_index, None, "steps_committed does not count commit events"))
    return ReplayReport(passed=not issues, issues=issues)


_PRIM_GRIDS = {name: primitive(name) for name in PRIMITIVE_NAMES}


# -- helper frequency and compression metrics ----------------------------

def helpers_created(log: SessionLog, upto_trial: Optional[int] = None) -> list[str]:
    """Distinct helper output keys saved at or before ``upto_trial``.

    Later deletions do not remove a key: creation events count.
    """
    helper_keys: dict[str, str] = {}
    step_results: dict[tuple[int, int], str] = {}
    for trial in log.trials:
        if upto_trial is not None and trial.trial_index > upto_trial:
            break
        count = 0
        for event in trial.events:
            if event.kind == "commit":
                step_results[(trial.trial_index, count)] = event.result_key or ""
                count += 1
            elif event.kind == "save_helper" and event.step_index is not None:
                key = step_results.get((trial.trial_index, event.step_index))
                if key and event.helper_id is not None:
                    helper_keys.setdefault(event.helper_id, key)
    return list(dict.fromkeys(helper_keys.values()))


def live_library_size(log: SessionLog, upto_trial: int) -> int:
    """Helpers saved minus helpers deleted, at the end of ``upto_trial``."""
    helpers: dict[str, str] = {}
    step_results: dict[tuple[int, int], str] = {}
    seen_keys: set[str] = set()
    for trial in log.trials:
        if trial.trial_index > upto_trial:
            break
        count = 0
        for event in trial.events:
            if event.kind == "commit":
                step_results[(trial.trial_index, count)] = event.result_key or ""
                count += 1
            elif event.kind == "save_helper" and event.step_index is not None:
                key = step_results.get((trial.trial_index, event.step_index))
                if key and key not in seen_keys and event.helper_id is not None:
                    helpers[event.helper_id] = key
                    seen_keys.add(key)
            elif event.kind == "delete_helper" and event.helper_id in helpers:
                seen_keys.discard(helpers[event.helper_id])
                del helpers[event.helper_id]
    return len(helpers)


def topk_helpers(
    logs: Sequence[SessionLog],
    trial: int,
    k: int | str,
    seed: int = 0,
) -> list[str]:
    """The k most frequently created helper grids at or before ``trial``.

    Frequencies count participants (helpers deduplicated by output within a
    participant). Ties break by a seeded shuffle. ``k="auto"`` uses the mean
    live library size at the trial, rounded half up.
    """
    counts: dict[str, int] = {}
    for log in logs:
        for key in helpers_created(log, trial):
            counts[key] = counts.get(key, 0) + 1
    if k == "auto":
        if not logs:
            return []
        mean = sum(live_library_size(log, trial) for log in logs) / len(logs)
        k = int(mean + 0.5)
    if k <= 0 or not counts:
        return []
    rng = random.Random(seed)
    keys = sorted(counts)
    rng.shuffle(keys)
    keys.sort(key=lambda key: -counts[key])
    return keys[: int(k)]


@dataclass
class CorpusCompression:
    cu: int
    unresolved: tuple[str, ...] = ()

    def __int__(self) -> int:
        return self.cu


def resolve_helper_program(
    key: str,
    curriculum: Curriculum,
    constructions: Optional[dict[str, Program]] = None,
) -> Optional[Program]:
    """Map a helper grid key to a program: prefer a ground-truth solution
    subtree with that output, fall back to a logged construction."""
    candidates = []
    for sol in curriculum.solutions():
        for sub in subtrees(expand(sol)):
            from .programs import canonical_key

            if canonical_key(sub) == key:
                candidates.append(sub)
    if candidates:
        return sorted(candidates, key=lambda p: (size(p).node_count, structure_key(p)))[0]
    if constructions and key in constructions:
        return constructions[key]
    return None


def corpus_compression(
    helper_keys: Sequence[str],
    curriculum: Curriculum,
    constructions: Optional[dict[str, Program]] = None,
) -> CorpusCompression:
    """Compression utility of the helpers against all ground-truth
    solutions; unresolvable keys are excluded and reported."""
    programs: list[Program] = []
    unresolved: list[str] = []
    for key in helper_keys:
        program = resolve_helper_program(key, curriculum, constructions)
        if program is None:
            unresolved.append(key)
        else:
            programs.append(program)
    corpus = [expand(s) for s in curriculum.solutions()]
    return CorpusCompression(
        cu=compression_utility(programs, corpus),
        unresolved=tuple(unresolved),
    )


def logged_constructions(logs: Sequence[SessionLog]) -> dict[str, Program]:
    """Programs for helper grids rebuilt from the participants' own commit
    streams, keyed by output grid."""
    out: dict[str, Program] = {}
    for log in logs:
        helper_programs: dict[str, Program] = {}
        for trial in log.trials:
            step_programs: list[Program] = []
            for event in trial.events:
                if event.kind == "commit" and event.op is not None:
                    parts: list[Program] = []
                    ok = True
                    for ref in event.args:
                        if ref.kind == "prim":
                            parts.append(prim(str(ref.value)))
                        elif ref.kind == "step" and isinstance(ref.value, int) and ref.value < len(step_programs):
                            parts.append(step_programs[ref.value])
                        elif ref.kind == "helper" and ref.value in helper_programs:
                            parts.append(helper_programs[str(ref.value)])
                        else:
                            ok = False
                    if not ok:
                        step_programs.append(prim("blank"))
                        continue
                    op = normalize_op(event.op)
                    node: Program
                    if is_binary(op):
                        node = BinaryNode(op, parts[0], parts[1])
                    else:
                        node = UnaryNode(op, parts[0])
                    step_programs.append(node)
                    if event.result_key:
                        out.setdefault(event.result_key, node)
                elif event.kind == "save_helper" and event.step_index is not None:
                    if 0 <= event.step_index < len(step_programs) and event.helper_id:
                        helper_programs[str(event.helper_id)] = step_programs[event.step_index]
    return out


# -- steps vs raw program length ------------------------------------------

@dataclass
class RawLength:
    trial_index: int
    op_count: int
    source: str  # "search" | "ground_truth"


def raw_program_lengths(
    curriculum: Curriculum, budget: Optional[SynthesisBudget] = None
) -> list[RawLength]:
    """Operator count of the shortest known raw-primitive program per trial:
    searched with an empty library where feasible, the expanded ground truth
    otherwise."""
    budget = budget or SynthesisBudget()
    out = []
    for trial in curriculum.trials:
        result = solve(trial.target, None, budget)
        if result.solved:
            assert result.program is not None
            out.append(RawLength(trial.index, size(result.program).op_count, "search"))
        else:
            out.append(
                RawLength(trial.index, size(trial.solution).op_count, "ground_truth")
            )
    return out


@dataclass
class StepsVsRaw:
    trial_index: int
    mean_steps: Optional[float]  # None when no participant built it correctly
    raw_op_count: int
    raw_source: str


def steps_vs_raw(
    logs: Sequence[SessionLog],
    curriculum: Curriculum,
    raw: Optional[Sequence[RawLength]] = None,
) -> list[StepsVsRaw]:
    """Mean committed steps over correct trials only, against the raw
    program length. Incorrect-only trials are flagged with a None mean."""
    raw = raw or raw_program_lengths(curriculum)
    raw_by_index = {r.trial_index: r for r in raw}
    out = []
    for trial in curriculum.trials:
        counts = [
            t.steps_committed
            for log in logs
            for t in log.trials
            if t.trial_index == trial.index and t.correct
        ]
        mean = sum(counts) / len(counts) if counts else None
        r = raw_by_index[trial.index]
        out.append(StepsVsRaw(trial.index, mean, r.op_count, r.source))
    return out


# -- the combined metrics table -------------------------------------------

@dataclass
class MetricsRow:
    trial_index: int
    accuracy: Optional[float]
    mean_steps: Optional[float]
    mean_library_size: Optional[float]
    topk_helpers: list[str]
    cu_human_topk: Optional[int]
    cu_rc_topk: Optional[int]
    cu_oracle_topk: Optional[int]
    cu_llm_topk: Optional[int]
    raw_program_length: int


def metrics_table(
    curriculum: Curriculum,
    logs: Sequence[SessionLog] = (),
    llm_helper_keys_by_trial: Optional[dict[int, list[str]]] = None,
    k: int | str = 1,
    seed: int = 0,
    budget: Optional[SynthesisBudget] = None,
) -> list[MetricsRow]:
    """Per-trial metric rows for the report CSV.

    The RC column selects top-k helpers greedily by utility over trials seen
    so far, the oracle column by utility over the full corpus; both draw
    candidates from ground-truth solution subtrees, so the oracle column
    upper-bounds the rest.
    """
    raw = raw_program_lengths(curriculum, budget)
    raw_by_index = {r.trial_index: r.op_count for r in raw}
    corpus = [expand(s) for s in curriculum.solutions()]
    constructions = logged_constructions(logs) if logs else {}
    model_k = 1 if k == "auto" else int(k)
    rows = []
    for trial in curriculum.trials:
        t = trial.index
        trial_logs = [
            tl for log in logs for tl in log.trials if tl.trial_index == t
        ]
        accuracy = (
            sum(1 for tl in trial_logs if tl.correct) / len(trial_logs)
            if trial_logs
            else None
        )
        correct_steps = [tl.steps_committed for tl in trial_logs if tl.correct]
        mean_steps = sum(correct_steps) / len(correct_steps) if correct_steps else None
        mean_lib = (
            sum(live_library_size(log, t) for log in logs) / len(logs)
            if logs
            else None
        )
        human_topk = topk_helpers(logs, t, k, seed) if logs else []
        cu_human = (
            corpus_compression(human_topk, curriculum, constructions).cu
            if human_topk
            else (0 if logs else None)
        )
        pool = [
            sub
            for sol in curriculum.solutions()[:t]
            for sub in subtrees(expand(sol))
        ]
        rc_pick = greedy_select(pool, corpus[:t], k=model_k, seed=seed)
        oracle_pick = oracle_helpers(corpus, t, k=model_k, seed=seed)
        cu_rc = compression_utility(rc_pick, corpus)
        cu_oracle = compression_utility(oracle_pick, corpus)
        cu_llm = None
        if llm_helper_keys_by_trial is not None:
            llm_keys = llm_helper_keys_by_trial.get(t, [])
            cu_llm = corpus_compression(llm_keys, curriculum, constructions).cu
        rows.append(
            MetricsRow(
                trial_index=t,
                accuracy=accuracy,
                mean_steps=mean_steps,
                mean_library_size=mean_lib,
                topk_helpers=human_topk,
                cu_human_topk=cu_human,
                cu_rc_topk=cu_rc,
                cu_oracle_topk=cu_oracle,
                cu_llm_topk=cu_llm,
                raw_program_length=raw_by_index[t],
            )
        )
    return rows


CSV_COLUMNS = [
    "trial_index",
    "accuracy",
    "mean_steps",
    "mean_library_size",
    "topk_helpers",
    "cu_human_topk",
    "cu_rc_topk",
    "cu_oracle_topk",
    "cu_llm_topk",
    "raw_program_length",
]


def write_metrics_csv(rows: Sequence[MetricsRow], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(
                [
                    row.trial_index,
                    "" if row.accuracy is None else f"{row.accuracy:.4f}",
                    "" if row.mean_steps is None else f"{row.mean_steps:.4f}",
                    "" if row.mean_library_size is None else f"{row.mean_library_size:.4f}",
                    ";".join(row.topk_helpers),
                    "" if row.cu_human_topk is None else row.cu_human_topk,
                    "" if row.cu_rc_topk is None else row.cu_rc_topk,
                    "" if row.cu_oracle_topk is None else row.cu_oracle_topk,
                    "" if row.cu_llm_topk is None else row.cu_llm_topk,
                    row.raw_program_length,
                ]
            )


# -- synthetic session logs -----------------------------------------------

def scripted_session(
    curriculum: Curriculum,
    participant_id: str,
    seed: int = 0,
    experiment_id: Optional[str] = None,
    mistake_rate: float = 0.0,
    save_rate: float = 0.6,
) -> SessionLog:
    """Replayable synthetic session that follows the ground-truth solutions.

    Each solution tree is committed bottom-up, one operator per commit, with
    sub-results referenced by step index. Saved helpers are reused across
    trials when a needed subtree is already in the library. With
    ``mistake_rate`` some trials submit early and score 0.
    """
    rng = random.Random(seed)
    helpers: dict[str, str] = {}  # output key -> helper id
    deleted: set[str] = set()
    trials: list[TrialLog] = []
    clock = 0

    def tick() -> int:
        nonlocal clock
        clock += rng.randint(200, 1500)
        return clock

    for trial in curriculum.trials:
        events: list[Event] = []
        steps: list[Grid] = []
        program = expand(trial.solution)

        def build(node: Program) -> tuple[StepRef, Grid]:
            from .programs import PrimitiveLeaf as PL, evaluate as ev

            if isinstance(node, PL):
                return StepRef("prim", node.name), ev(node)
            grid = ev(node)
            if grid.key in helpers and grid.key not in deleted:
                return StepRef("helper", helpers[grid.key]), grid
            if isinstance(node, UnaryNode):
                child_ref, _ = build(node.child)
                op = node.op
                args = (child_ref,)
            else:
                assert isinstance(node, BinaryNode)
                left_ref, _ = build(node.left)
                right_ref, _ = build(node.right)
                op = node.op
                args = (left_ref, right_ref)
            if rng.random() < 0.2:
                events.append(
                    Event(t_ms=tick(), kind="preview", op=op, args=args, result_key=grid.key)
                )
                if rng.random() < 0.3:
                    events.append(Event(t_ms=tick(), kind="cancel"))
            events.append(
                Event(t_ms=tick(), kind="commit", op=op, args=args, result_key=grid.key)
            )
            steps.append(grid)
            ref = StepRef("step", len(steps) - 1)
            if grid.key not in helpers and rng.random() < save_rate:
                helper_id = f"u{len(helpers) + 1}"
                helpers[grid.key] = helper_id
                events.append(
                    Event(
                        t_ms=tick(),
                        kind="save_helper",
                        helper_id=helper_id,
                        step_index=len(steps) - 1,
                    )
                )
                if rng.random() < 0.05:
                    deleted.add(grid.key)
                    events.append(
                        Event(t_ms=tick(), kind="delete_helper", helper_id=helper_id)
                    )
            return ref, grid

        give_up = rng.random() < mistake_rate
        partial = (
            next((s for s in subtrees(program) if isinstance(s, (UnaryNode, BinaryNode))), None)
            if give_up
            else None
        )
        if partial is not None and partial != program:
            # commit one plausible first step, then submit early
            build(partial)
        else:
            ref, grid = build(program)
            if ref.kind != "step":
                # the whole target was already a helper or primitive: land it
                # on the canvas through a self-union commit
                events.append(
                    Event(t_ms=tick(), kind="commit", op="add", args=(ref, ref), result_key=grid.key)
                )
                steps.append(grid)
        submitted = steps[-1] if steps else Grid(0)
        events.append(Event(t_ms=tick(), kind="submit", submitted_key=submitted.key))
        trials.append(
            TrialLog(
                trial_index=trial.index,
                target_key=trial.target.key,
                events=events,
                submitted_key=submitted.key,
                correct=submitted.key == trial.target.key,
                steps_committed=sum(1 for e in events if e.kind == "commit"),
            )
        )
    return SessionLog(
        experiment_id=experiment_id or curriculum.name,
        participant_id=participant_id,
        trials=trials,
    )


def generate_synthetic_logs(
    curriculum: Curriculum, n_participants: int, seed: int = 0, mistake_rate: float = 0.1
) -> list[SessionLog]:
    return [
        scripted_session(
            curriculum,
            participant_id=f"p{i + 1:02d}",
            seed=seed * 1000 + i,
            mistake_rate=mistake_rate,
        )
        for i in range(n_participants)
    ]
