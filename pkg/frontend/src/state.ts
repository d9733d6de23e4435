/**
 * The session state machine behind the construction task.
 *
 * Invariants enforced here, independent of the UI layer:
 * committed steps are append-only and scoped to their trial; the helper
 * panel is ordered, deduplicated by output, and persists across trials;
 * every interaction writes exactly one event into the trial's log; the
 * submitted grid is whatever the canvas holds (blank when nothing was
 * committed) and the score is exact match.
 */

import {
  BLANK,
  Grid,
  Op,
  PRIMITIVES,
  applyBinary,
  applyUnary,
  gridKey,
  gridsEqual,
  isBinary,
  normalizeOp,
} from "./dsl.js";

export type OperandRef =
  | { prim: string }
  | { helper: string }
  | { step: number };

export interface StepRecord {
  op: Op;
  args: OperandRef[];
  grid: Grid;
}

export interface HelperEntry {
  id: string;
  grid: Grid;
  key: string;
}

export interface LogEvent {
  t_ms: number;
  kind: "preview" | "commit" | "cancel" | "save_helper" | "delete_helper" | "submit";
  step?: { op: string; args: OperandRef[] };
  result_key?: string;
  helper_id?: string;
  step_index?: number;
  submitted_key?: string;
}

export interface TrialRecord {
  trial_index: number;
  target_key: string;
  events: LogEvent[];
  submitted_key: string;
  correct: boolean;
  steps_committed: number;
}

export interface TrialSpec {
  index: number;
  targetKey: string;
}

export type Clock = () => number;

export class SessionState {
  readonly experimentId: string;
  readonly participantId: string;
  private readonly trials: TrialSpec[];
  private readonly clock: Clock;
  private readonly start: number;

  private trialPos = 0;
  private steps: StepRecord[] = [];
  private pending: StepRecord | null = null;
  private helpers: HelperEntry[] = [];
  private helperSeq = 0;
  private events: LogEvent[] = [];
  private finished: TrialRecord[] = [];
  score = 0;

  constructor(
    experimentId: string,
    participantId: string,
    trials: TrialSpec[],
    clock: Clock = () => Date.now(),
  ) {
    if (trials.length === 0) throw new Error("session needs at least one trial");
    this.experimentId = experimentId;
    this.participantId = participantId;
    this.trials = trials;
    this.clock = clock;
    this.start = clock();
  }

  private now(): number {
    return Math.max(0, Math.round(this.clock() - this.start));
  }

  get trialIndex(): number {
    return this.trials[this.trialPos].index;
  }

  get targetKey(): string {
    return this.trials[this.trialPos].targetKey;
  }

  get done(): boolean {
    return this.trialPos >= this.trials.length;
  }

  get committedSteps(): readonly StepRecord[] {
    return this.steps;
  }

  get helperPanel(): readonly HelperEntry[] {
    return this.helpers;
  }

  get pendingPreview(): StepRecord | null {
    return this.pending;
  }

  get canvas(): Grid {
    return this.steps.length ? this.steps[this.steps.length - 1].grid : BLANK;
  }

  get completedTrials(): readonly TrialRecord[] {
    return this.finished;
  }

  resolve(ref: OperandRef): Grid {
    if ("prim" in ref) {
      const grid = PRIMITIVES[ref.prim];
      if (!grid) throw new Error(`unknown primitive: ${ref.prim}`);
      return grid;
    }
    if ("helper" in ref) {
      const entry = this.helpers.find((h) => h.id === ref.helper);
      if (!entry) throw new Error(`helper was deleted or never existed: ${ref.helper}`);
      return entry.grid;
    }
    if (ref.step < 0 || ref.step >= this.steps.length) {
      throw new Error(`step ${ref.step} is not committed`);
    }
    return this.steps[ref.step].grid;
  }

  private compute(opName: string, args: OperandRef[]): StepRecord {
    const op = normalizeOp(opName);
    const want = isBinary(op) ? 2 : 1;
    if (args.length !== want) {
      throw new Error(`${op} takes ${want} operand(s), got ${args.length}`);
    }
    const grids = args.map((ref) => this.resolve(ref));
    const grid = isBinary(op)
      ? applyBinary(op, grids[0], grids[1])
      : applyUnary(op, grids[0]);
    return { op, args, grid };
  }

  /** Render a step without committing it; replaces any pending preview. */
  previewStep(opName: string, args: OperandRef[]): StepRecord {
    const step = this.compute(opName, args);
    this.pending = step;
    this.events.push({
      t_ms: this.now(),
      kind: "preview",
      step: { op: step.op, args: step.args },
      result_key: gridKey(step.grid),
    });
    return step;
  }

  cancelPreview(): void {
    this.pending = null;
    this.events.push({ t_ms: this.now(), kind: "cancel" });
  }

  /** Append a step. Committed steps cannot be removed. */
  commitStep(opName: string, args: OperandRef[]): StepRecord {
    const step = this.compute(opName, args);
    this.steps.push(step);
    this.pending = null;
    this.events.push({
      t_ms: this.now(),
      kind: "commit",
      step: { op: step.op, args: step.args },
      result_key: gridKey(step.grid),
    });
    return step;
  }

  /** Save a committed step's output as a helper; identical patterns are
   * stored only once and the existing entry is returned. */
  saveHelper(stepIndex: number): HelperEntry {
    if (stepIndex < 0 || stepIndex >= this.steps.length) {
      throw new Error(`step ${stepIndex} is not committed`);
    }
    const grid = this.steps[stepIndex].grid;
    const key = gridKey(grid);
    const existing = this.helpers.find((h) => h.key === key);
    if (existing) return existing;
    this.helperSeq += 1;
    const entry: HelperEntry = { id: `u${this.helperSeq}`, grid, key };
    this.helpers.push(entry);
    this.events.push({
      t_ms: this.now(),
      kind: "save_helper",
      helper_id: entry.id,
      step_index: stepIndex,
    });
    return entry;
  }

  deleteHelper(helperId: string): void {
    const at = this.helpers.findIndex((h) => h.id === helperId);
    if (at < 0) throw new Error(`no such helper: ${helperId}`);
    this.helpers.splice(at, 1);
    this.events.push({
      t_ms: this.now(),
      kind: "delete_helper",
      helper_id: helperId,
    });
  }

  /** End the trial: score exact match, freeze its record, advance with a
   * fresh canvas and the persistent helper panel. */
  submit(): TrialRecord {
    const submittedKey = gridKey(this.canvas);
    this.events.push({
      t_ms: this.now(),
      kind: "submit",
      submitted_key: submittedKey,
    });
    const correct = submittedKey === this.targetKey;
    if (correct) this.score += 1;
    const record: TrialRecord = {
      trial_index: this.trialIndex,
      target_key: this.targetKey,
      events: this.events,
      submitted_key: submittedKey,
      correct,
      steps_committed: this.events.filter((e) => e.kind === "commit").length,
    };
    this.finished.push(record);
    this.trialPos += 1;
    this.steps = [];
    this.pending = null;
    this.events = [];
    return record;
  }
}

export function helperMatchesCanvas(state: SessionState, entry: HelperEntry): boolean {
  return gridsEqual(entry.grid, state.canvas);
}
