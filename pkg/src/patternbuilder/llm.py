"""LLM synthesis harness: prompt assembly, constrained parsing of model
output, lowering to DSL programs, and the bounded refinement loop.

Model-emitted code is never executed by a host interpreter. Sources are
parsed (``ast.parse`` only), checked against the task's closed grammar
(zero-argument function definitions whose bodies are name bindings and call
expressions over the fixed primitives, transformations, carried helpers,
and earlier definitions), then evaluated by this module's own total
evaluator over grids.
"""

from __future__ import annotations

import ast
import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .grids import (
    BINARY_OPS,
    Grid,
    PRIMITIVE_NAMES,
    UNARY_OPS,
    apply_binary,
    apply_unary,
    primitive,
)
from .programs import (
    BinaryNode,
    PrimitiveLeaf,
    Program,
    UnaryNode,
    program_to_json,
)

MAX_ATTEMPTS = 5

TRANSFORM_ARITY = {op: 2 for op in BINARY_OPS} | {op: 1 for op in UNARY_OPS}
TRANSFORM_ARITY["overlap"] = 2


@dataclass(frozen=True)
class Diagnostic:
    rule: str  # ForbiddenConstruct | UnknownName | WrongArity | MissingReconstructed | SyntaxError | Redefinition
    message: str
    line: Optional[int] = None

    def render(self) -> str:
        where = f" (line {self.line})" if self.line else ""
        return f"{self.rule}{where}: {self.message}"


@dataclass
class ParsedFunction:
    name: str
    bindings: list[tuple[str, ast.expr]]
    returns: ast.expr
    source: str


@dataclass
class ConstrainedSource:
    raw: str
    functions: list[ParsedFunction]

    def function(self, name: str) -> ParsedFunction:
        for fn in self.functions:
            if fn.name == name:
                return fn
        raise KeyError(name)


@dataclass
class ParseResult:
    source: Optional[ConstrainedSource]
    diagnostics: list[Diagnostic]

    @property
    def ok(self) -> bool:
        return self.source is not None and not self.diagnostics


_FORBIDDEN_NODES = {
    ast.For: "loop",
    ast.While: "loop",
    ast.AsyncFor: "loop",
    ast.ListComp: "comprehension",
    ast.SetComp: "comprehension",
    ast.DictComp: "comprehension",
    ast.GeneratorExp: "comprehension",
    ast.Import: "import",
    ast.ImportFrom: "import",
    ast.Constant: "literal",
    ast.Subscript: "index",
    ast.Attribute: "attribute",
}


def strip_fences(text: str) -> str:
    """Drop a markdown code fence if the backend wrapped its code in one."""
    text = text.strip()
    if text.startswith("```"):
        lines = text.splitlines()
        lines = lines[1:]
        if lines and lines[-1].strip().startswith("```"):
            lines = lines[:-1]
        return "\n".join(lines)
    return text


def parse_constrained(
    source: str, carried_names: Sequence[str] = ()
) -> ParseResult:
    """Validate a model response against the closed grammar.

    Either returns a fully validated parse or a list of diagnostics naming
    the violated rule and position, suitable for the refinement prompt.
    """
    diags: list[Diagnostic] = []
    try:
        tree = ast.parse(source)
    except SyntaxError as exc:
        return ParseResult(None, [Diagnostic("SyntaxError", exc.msg or "invalid syntax", exc.lineno)])

    functions: list[ParsedFunction] = []
    known_functions: list[str] = list(carried_names)
    reserved = set(PRIMITIVE_NAMES) | set(TRANSFORM_ARITY)

    def check_expr(node: ast.expr, locals_seen: set[str], fn_name: str) -> None:
        for kind, label in _FORBIDDEN_NODES.items():
            if isinstance(node, kind):
                diags.append(
                    Diagnostic("ForbiddenConstruct", f"{label} is not allowed", node.lineno)
                )
                return
        if isinstance(node, ast.Name):
            name = node.id
            if name in PRIMITIVE_NAMES or name in locals_seen:
                return
            if name in TRANSFORM_ARITY or name in known_functions:
                diags.append(
                    Diagnostic("WrongArity", f"{name} must be called, not referenced", node.lineno)
                )
                return
            diags.append(Diagnostic("UnknownName", f"{name} is not defined", node.lineno))
            return
        if isinstance(node, ast.Call):
            if node.keywords or any(isinstance(a, ast.Starred) for a in node.args):
                diags.append(
                    Diagnostic("ForbiddenConstruct", "keyword or starred arguments", node.lineno)
                )
                return
            if not isinstance(node.func, ast.Name):
                diags.append(
                    Diagnostic("ForbiddenConstruct", "only plain function calls are allowed", node.lineno)
                )
                return
            callee = node.func.id
            if callee in TRANSFORM_ARITY:
                want = TRANSFORM_ARITY[callee]
                if len(node.args) != want:
                    diags.append(
                        Diagnostic(
                            "WrongArity",
                            f"{callee} takes {want} argument(s), got {len(node.args)}",
                            node.lineno,
                        )
                    )
                for arg in node.args:
                    check_expr(arg, locals_seen, fn_name)
                return
            if callee in known_functions:
                if callee == fn_name:
                    diags.append(Diagnostic("UnknownName", f"{callee} cannot call itself", node.lineno))
                if len(node.args) != 0:
                    diags.append(
                        Diagnostic("WrongArity", f"{callee} takes no arguments", node.lineno)
                    )
                for arg in node.args:
                    check_expr(arg, locals_seen, fn_name)
                return
            if callee in PRIMITIVE_NAMES:
                diags.append(
                    Diagnostic("WrongArity", f"{callee} is a pattern, not a function", node.lineno)
                )
                return
            if callee in locals_seen:
                diags.append(
                    Diagnostic("WrongArity", f"{callee} is a local value, not a function", node.lineno)
                )
                return
            diags.append(Diagnostic("UnknownName", f"{callee} is not defined", node.lineno))
            return
        diags.append(
            Diagnostic("ForbiddenConstruct", f"{type(node).__name__} is not allowed", getattr(node, "lineno", None))
        )

    for stmt in tree.body:
        if isinstance(stmt, (ast.Import, ast.ImportFrom)):
            diags.append(Diagnostic("ForbiddenConstruct", "import is not allowed", stmt.lineno))
            continue
        if not isinstance(stmt, ast.FunctionDef):
            label = _FORBIDDEN_NODES.get(type(stmt))
            if isinstance(stmt, (ast.For, ast.While)):
                label = "loop"
            diags.append(
                Diagnostic(
                    "ForbiddenConstruct",
                    f"{label or type(stmt).__name__} at top level is not allowed",
                    stmt.lineno,
                )
            )
            continue
        if stmt.decorator_list:
            diags.append(Diagnostic("ForbiddenConstruct", "decorators are not allowed", stmt.lineno))
        args = stmt.args
        if (
            args.args or args.posonlyargs or args.kwonlyargs
            or args.vararg or args.kwarg or args.defaults
        ):
            diags.append(
                Diagnostic("WrongArity", f"{stmt.name} must take no parameters", stmt.lineno)
            )
        if stmt.name in reserved or stmt.name in known_functions:
            diags.append(
                Diagnostic("Redefinition", f"{stmt.name} is already defined", stmt.lineno)
            )
        bindings: list[tuple[str, ast.expr]] = []
        returns: Optional[ast.expr] = None
        locals_seen: set[str] = set()
        for i, inner in enumerate(stmt.body):
            if isinstance(inner, ast.Assign):
                if returns is not None:
                    diags.append(
                        Diagnostic("ForbiddenConstruct", "code after return", inner.lineno)
                    )
                if len(inner.targets) != 1 or not isinstance(inner.targets[0], ast.Name):
                    diags.append(
                        Diagnostic("ForbiddenConstruct", "only simple name bindings are allowed", inner.lineno)
                    )
                    continue
                target = inner.targets[0].id
                if target in reserved or target in known_functions:
                    diags.append(
                        Diagnostic("Redefinition", f"{target} is already defined", inner.lineno)
                    )
                check_expr(inner.value, locals_seen, stmt.name)
                locals_seen.add(target)
                bindings.append((target, inner.value))
            elif isinstance(inner, ast.Return):
                if inner.value is None:
                    diags.append(Diagnostic("ForbiddenConstruct", "bare return", inner.lineno))
                else:
                    check_expr(inner.value, locals_seen, stmt.name)
                    returns = inner.value
                if i != len(stmt.body) - 1:
                    diags.append(
                        Diagnostic("ForbiddenConstruct", "code after return", inner.lineno)
                    )
            elif isinstance(inner, ast.Expr) and isinstance(inner.value, ast.Constant):
                # docstrings count as literals under the task rules
                diags.append(Diagnostic("ForbiddenConstruct", "literal is not allowed", inner.lineno))
            else:
                label = "loop" if isinstance(inner, (ast.For, ast.While)) else None
                for kind, lab in _FORBIDDEN_NODES.items():
                    if isinstance(inner, kind):
                        label = lab
                diags.append(
                    Diagnostic(
                        "ForbiddenConstruct",
                        f"{label or type(inner).__name__} is not allowed",
                        inner.lineno,
                    )
                )
        if returns is None:
            diags.append(
                Diagnostic("ForbiddenConstruct", f"{stmt.name} must end in a return", stmt.lineno)
            )
            continue
        src = ast.get_source_segment(source, stmt) or ""
        functions.append(ParsedFunction(stmt.name, bindings, returns, src))
        known_functions.append(stmt.name)

    if "reconstructed" not in [f.name for f in functions]:
        diags.append(Diagnostic("MissingReconstructed", "no reconstructed() definition"))
    if diags:
        return ParseResult(None, diags)
    return ParseResult(ConstrainedSource(source, functions), [])


@dataclass(frozen=True)
class CarriedHelper:
    name: str
    source: str
    program: Program  # closed over primitives
    output: Grid


def lower_and_run(
    cs: ConstrainedSource, carried: Sequence[CarriedHelper] = ()
) -> tuple[Grid, Program, list[CarriedHelper]]:
    """Evaluate the validated source and lower it to a closed DSL program.

    Returns the reconstructed grid, the fully inlined program behind it,
    and one candidate helper per non-reconstructed function.
    """
    env: dict[str, tuple[Grid, Program]] = {}
    for helper in carried:
        env[helper.name] = (helper.output, helper.program)

    def eval_expr(node: ast.expr, local_env: dict[str, tuple[Grid, Program]]) -> tuple[Grid, Program]:
        if isinstance(node, ast.Name):
            if node.id in local_env:
                return local_env[node.id]
            leaf = PrimitiveLeaf(node.id)
            return primitive(node.id), leaf
        assert isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
        callee = node.func.id
        if callee in TRANSFORM_ARITY:
            op = callee
            args = [eval_expr(a, local_env) for a in node.args]
            if len(args) == 2:
                grid = apply_binary(op, args[0][0], args[1][0])
                return grid, BinaryNode(op, args[0][1], args[1][1])
            grid = apply_unary(op, args[0][0])
            return grid, UnaryNode(op, args[0][1])
        return env[callee]

    new_helpers: list[CarriedHelper] = []
    result: Optional[tuple[Grid, Program]] = None
    for fn in cs.functions:
        local_env = dict[str, tuple[Grid, Program]]()
        for name, expr in fn.bindings:
            local_env[name] = eval_expr(expr, local_env)
        value = eval_expr(fn.returns, local_env)
        env[fn.name] = value
        if fn.name == "reconstructed":
            result = value
        else:
            new_helpers.append(
                CarriedHelper(fn.name, fn.source, value[1], value[0])
            )
    assert result is not None  # parser guarantees reconstructed()
    return result[0], result[1], new_helpers


# -- prompt assembly -----------------------------------------------------

def _grid_block(g: Grid) -> str:
    rows = g.rows()
    lines = ",\n".join("[" + ", ".join(str(v) for v in row) + "]" for row in rows)
    return "[\n" + lines + "\n]"


def _primitive_block() -> str:
    parts = []
    for name in PRIMITIVE_NAMES:
        parts.append(f"{name} = {_grid_block(primitive(name))}")
    return "\n\n".join(parts)


_TRANSFORMS_TEXT = """\
TRANSFORMATION FUNCTIONS:

def add(a, b):
    return np.logical_or(a, b).astype(int)

def subtract(a, b):
    return np.logical_and(a, np.logical_not(b)).astype(int)

def intersect(a, b):
    return np.logical_and(a, b).astype(int)

def invert(a):
    return np.logical_not(a).astype(int)

def reflect_horizontal(a):
    return np.flipud(a)

def reflect_vertical(a):
    return np.fliplr(a)

def reflect_diag(a):
    return a.T
"""

_RULES_TEXT = """\
CRITICAL RULES:
1. You must NOT create new primitives, hardcode any array elements in the
   output, redefine any provided variables or functions --- always call
   PRIMITIVES and TRANSFORMATION FUNCTIONS directly.
2. You may NOT use loops, list comprehensions, or import anything.
3. All reconstructions MUST be done using the provided PRIMITIVES,
   TRANSFORMATIONS, and helpers only.
4. Helpers must derive entirely from the provided PRIMITIVES,
   TRANSFORMATIONS and prior helpers.
5. Write Python code only. Do not include any comments or explanations.
"""


def _example_block() -> str:
    plus = apply_binary("add", primitive("line_horizontal"), primitive("line_vertical"))
    return (
        "EXAMPLE:\n\n"
        "Using add(a, b) transformation\n\n"
        f"Target:\n{_grid_block(plus)}\n\n"
        "Solution:\n"
        "def reconstructed():\n"
        "    return add(line_horizontal, line_vertical)\n"
    )


@dataclass
class PromptContext:
    mode: str  # "memoryless" | "with_history"
    target: Grid
    trial_index: int
    total_trials: int
    carried: list[CarriedHelper] = field(default_factory=list)
    history: list[tuple[Grid, bool]] = field(default_factory=list)
    attempt_index: int = 1
    last_failure: Optional[dict] = None  # {"source", "produced": Grid|None, "diagnostics": [...]}

    def __post_init__(self) -> None:
        if self.mode not in ("memoryless", "with_history"):
            raise ValueError(f"unknown prompt mode {self.mode!r}")
        if not 1 <= self.attempt_index <= MAX_ATTEMPTS:
            raise ValueError(f"attempt_index must be in 1..{MAX_ATTEMPTS}")


def build_prompt(ctx: PromptContext) -> str:
    parts: list[str] = []
    if ctx.mode == "with_history":
        parts.append(
            "You will be given a sequence of tasks where you will write functions to\n"
            "produce 10x10 binary arrays.\n\n"
            "The tasks will be given one trial at a time, along with the history of\n"
            "tasks you completed in previous trials.\n\n"
            "On each trial, you will be given:\n"
            "(1) a target 10x10 binary array,\n"
            "(2) a set of geometric PRIMITIVES as 10x10 binary arrays, and\n"
            "    TRANSFORMATION operations as Python functions, and\n"
            "(3) any helper functions you wrote to complete the tasks on previous\n"
            "    trials.\n\n"
            "The PRIMITIVES and TRANSFORMATIONS are stable and shared across trials.\n"
            "Helper functions carry forward to all subsequent trials and may be reused.\n\n"
            "On each trial, you will be given Python starter code with gaps to fill in."
        )
    else:
        parts.append(
            "You will be given a task where you must write functions to produce a\n"
            "10x10 binary array.\n\n"
            "You will be given:\n"
            "(1) a target 10x10 binary array,\n"
            "(2) a set of geometric PRIMITIVES as 10x10 binary arrays, and\n"
            "    TRANSFORMATION operations as Python functions, and\n"
            "(3) any helper functions available to you.\n\n"
            "You will be given Python starter code with gaps to fill in."
        )
    parts.append(_RULES_TEXT)
    parts.append("PRIMITIVES:\n\n" + _primitive_block())
    parts.append(_TRANSFORMS_TEXT)
    parts.append(_example_block())

    if ctx.mode == "with_history":
        parts.append(
            f"This is trial {ctx.trial_index} of {ctx.total_trials}.\n\n"
            f"Target:\n{_grid_block(ctx.target)}"
        )
    else:
        parts.append(f"Target:\n{_grid_block(ctx.target)}")

    starter = [
        "Do not include any comments or imports in your response.",
        "Respond by completing the following code:",
        "",
        "--- Start ---",
        "",
    ]
    if ctx.carried:
        starter.append("# You previously found these helpers useful (remove comment)")
        starter.append("")
        for helper in ctx.carried:
            starter.append(helper.source)
            starter.append("")
    starter.append("# Define any new helpers here (remove comment)")
    starter.append("")
    starter.append("def reconstructed():")
    starter.append("    # Your code here (remove comment)")
    starter.append("")
    starter.append("--- End ---")
    parts.append("\n".join(starter))

    if ctx.mode == "with_history" and ctx.history:
        hist = ["Below is the history of figures you've built on previous trials."]
        for i, (target, correct) in enumerate(ctx.history, start=1):
            hist.append(f"\nTarget {i}:\n\n{_grid_block(target)}\n")
            hist.append("Built Correctly." if correct else "Built Incorrectly.")
        parts.append("\n".join(hist))

    if ctx.last_failure is not None:
        produced = ctx.last_failure.get("produced")
        if produced is not None:
            produced_text = _grid_block(produced)
        else:
            diags = ctx.last_failure.get("diagnostics", [])
            produced_text = "Nothing: your code was rejected.\n" + "\n".join(
                d.render() for d in diags
            )
        parts.append(
            "Note: Your previous response was incorrect. \n"
            f"This was attempt {ctx.attempt_index - 1} of {MAX_ATTEMPTS}. "
            f"You have {MAX_ATTEMPTS - ctx.attempt_index + 1} attempt(s) remaining.\n\n"
            "Your code:\n"
            f"{ctx.last_failure['source']}\n\n"
            "This is what your code produced:\n"
            f"{produced_text}\n\n"
            "This is the target you need to produce:\n"
            f"{_grid_block(ctx.target)}\n\n"
            "Please try again."
        )
    return "\n\n".join(parts)


# -- backends and the refinement loop ------------------------------------

class MockBackend:
    """Scripted completions for tests; returns responses in order."""

    def __init__(self, responses: Sequence[str]):
        self._responses = list(responses)
        self.prompts: list[str] = []

    def complete(self, prompt: str) -> str:
        self.prompts.append(prompt)
        if not self._responses:
            raise RuntimeError("mock backend exhausted")
        return self._responses.pop(0)


class HttpBackend:
    """Minimal chat-completions client. Configuration comes from the
    environment: PB_LLM_ENDPOINT, PB_LLM_MODEL, and the name of the
    credential variable in PB_LLM_API_KEY_VAR."""

    def __init__(
        self,
        endpoint: Optional[str] = None,
        model: Optional[str] = None,
        api_key_var: Optional[str] = None,
        timeout: float = 120.0,
    ):
        self.endpoint = endpoint or os.environ.get("PB_LLM_ENDPOINT", "")
        self.model = model or os.environ.get("PB_LLM_MODEL", "")
        key_var = api_key_var or os.environ.get("PB_LLM_API_KEY_VAR", "PB_LLM_API_KEY")
        self.api_key = os.environ.get(key_var, "")
        self.timeout = timeout
        if not self.endpoint:
            raise ValueError("no endpoint configured (set PB_LLM_ENDPOINT)")

    def complete(self, prompt: str) -> str:
        import requests

        response = requests.post(
            self.endpoint,
            headers={"Authorization": f"Bearer {self.api_key}"},
            json={
                "model": self.model,
                "messages": [{"role": "user", "content": prompt}],
            },
            timeout=self.timeout,
        )
        response.raise_for_status()
        return response.json()["choices"][0]["message"]["content"]


@dataclass
class Attempt:
    attempt_index: int
    prompt_hash: str
    source: str
    diagnostics: list[Diagnostic]
    produced_key: Optional[str]
    correct: bool


@dataclass
class TrialTranscript:
    mode: str
    trial_index: int
    target_key: str
    attempts: list[Attempt]
    solved: bool
    lowered: Optional[Program] = None
    new_helpers: list[CarriedHelper] = field(default_factory=list)


def run_trial(backend, ctx: PromptContext) -> TrialTranscript:
    """Up to five prompt/parse/evaluate rounds against one target.

    Diagnostics and wrong grids feed the next prompt. Helpers are only
    harvested from the final, correct attempt.
    """
    if ctx.attempt_index != 1:
        raise ValueError("run_trial starts at attempt 1")
    attempts: list[Attempt] = []
    transcript = TrialTranscript(
        mode=ctx.mode,
        trial_index=ctx.trial_index,
        target_key=ctx.target.key,
        attempts=attempts,
        solved=False,
    )
    carried_names = [h.name for h in ctx.carried]
    for attempt_index in range(1, MAX_ATTEMPTS + 1):
        ctx.attempt_index = attempt_index
        prompt = build_prompt(ctx)
        text = backend.complete(prompt)
        source = strip_fences(text)
        parsed = parse_constrained(source, carried_names)
        prompt_hash = hashlib.sha256(prompt.encode()).hexdigest()[:16]
        if not parsed.ok:
            attempts.append(
                Attempt(attempt_index, prompt_hash, source, parsed.diagnostics, None, False)
            )
            ctx.last_failure = {
                "source": source,
                "produced": None,
                "diagnostics": parsed.diagnostics,
            }
            continue
        grid, lowered, new_helpers = lower_and_run(parsed.source, ctx.carried)
        correct = grid == ctx.target
        attempts.append(
            Attempt(attempt_index, prompt_hash, source, [], grid.key, correct)
        )
        if correct:
            transcript.solved = True
            transcript.lowered = lowered
            transcript.new_helpers = new_helpers
            return transcript
        ctx.last_failure = {"source": source, "produced": grid, "diagnostics": []}
    return transcript


@dataclass
class LlmRunRecord:
    mode: str
    transcripts: list[TrialTranscript]
    carried: list[CarriedHelper]

    @property
    def solved_count(self) -> int:
        return sum(1 for t in self.transcripts if t.solved)


def run_llm_curriculum(curriculum, backend, mode: str) -> LlmRunRecord:
    """Sequential trials with helper carry-forward and optional history."""
    carried: list[CarriedHelper] = []
    carried_keys: set[str] = set()
    history: list[tuple[Grid, bool]] = []
    transcripts: list[TrialTranscript] = []
    total = len(curriculum.trials)
    for trial in curriculum.trials:
        ctx = PromptContext(
            mode=mode,
            target=trial.target,
            trial_index=trial.index,
            total_trials=total,
            carried=list(carried),
            history=list(history) if mode == "with_history" else [],
        )
        transcript = run_trial(backend, ctx)
        transcripts.append(transcript)
        if transcript.solved:
            for helper in transcript.new_helpers:
                if helper.output.key not in carried_keys:
                    carried.append(helper)
                    carried_keys.add(helper.output.key)
        history.append((trial.target, transcript.solved))
    return LlmRunRecord(mode=mode, transcripts=transcripts, carried=carried)


def transcript_to_json(t: TrialTranscript) -> dict:
    return {
        "mode": t.mode,
        "trial": t.trial_index,
        "target_key": t.target_key,
        "solved": t.solved,
        "lowered": program_to_json(t.lowered) if t.lowered else None,
        "attempts": [
            {
                "attempt": a.attempt_index,
                "prompt_hash": a.prompt_hash,
                "source": a.source,
                "diagnostics": [d.render() for d in a.diagnostics],
                "produced_grid": a.produced_key,
                "correct": a.correct,
            }
            for a in t.attempts
        ],
        "new_helpers": [h.name for h in t.new_helpers],
    }


def save_llm_record(record: LlmRunRecord, path: str) -> None:
    data = {
        "mode": record.mode,
        "trials": [transcript_to_json(t) for t in record.transcripts],
        "carried_helpers": [
            {"name": h.name, "source": h.source, "program": program_to_json(h.program), "output_key": h.output.key}
            for h in record.carried
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(data, fh, indent=1)
        fh.write("\n")
