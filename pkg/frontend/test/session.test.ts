import { mkdirSync, writeFileSync } from "node:fs";
import { fileURLToPath } from "node:url";
import { dirname, join } from "node:path";
import { describe, expect, it } from "vitest";

import { PRIMITIVES, applyBinary, applyUnary, gridKey } from "../src/dsl.js";
import { exportLog, exportLogText } from "../src/log.js";
import { SessionState, TrialSpec } from "../src/state.js";

const here = dirname(fileURLToPath(import.meta.url));

function fakeClock(): () => number {
  let t = 1_000;
  return () => (t += 137);
}

const plus = applyBinary("add", PRIMITIVES.line_horizontal, PRIMITIVES.line_vertical);
const plusOnSquare = applyBinary("add", plus, PRIMITIVES.square);
const TRIALS: TrialSpec[] = [
  { index: 1, targetKey: gridKey(plus) },
  { index: 2, targetKey: gridKey(plusOnSquare) },
];


function scriptedSession(): SessionState {
  const state = new SessionState("ui-test", "p-ui", TRIALS, fakeClock());
  // trial 1: preview, cancel, rebuild, save as helper, submit
  state.previewStep("add", [{ prim: "line_horizontal" }, { prim: "line_vertical" }]);
  state.cancelPreview();
  state.commitStep("add", [{ prim: "line_horizontal" }, { prim: "line_vertical" }]);
  state.saveHelper(0);
  state.submit();
  // trial 2 reuses the saved helper
  state.commitStep("add", [{ helper: "u1" }, { prim: "square" }]);
  state.submit();
  return state;
}

describe("session state machine", () => {
  it("runs the scripted session and scores both trials", () => {
    const state = scriptedSession();
    expect(state.done).toBe(true);
    expect(state.score).toBe(2);
    const [t1, t2] = state.completedTrials;
    expect(t1.correct).toBe(true);
    expect(t2.correct).toBe(true);
    expect(t1.steps_committed).toBe(1);
    expect(t2.steps_committed).toBe(1);
    const kinds = t1.events.map((e) => e.kind);
    expect(kinds).toEqual(["preview", "cancel", "commit", "save_helper", "submit"]);
  });

  it("exports a schema-shaped log and writes it for the replay check", () => {
    const state = scriptedSession();
    const log = exportLog(state);
    expect(log.schema_version).toBe(1);
    expect(log.dsl_version).toBe("pb-dsl-1");
    expect(log.trials.length).toBe(2);
    mkdirSync(join(here, "..", "out"), { recursive: true });
    writeFileSync(join(here, "..", "out", "session_log.json"), exportLogText(state));
  });

  it("keeps helpers across trials and deduplicates by output", () => {
    const state = new SessionState("x", "p", TRIALS, fakeClock());
    state.commitStep("add", [{ prim: "line_horizontal" }, { prim: "line_vertical" }]);
    const first = state.saveHelper(0);
    const again = state.saveHelper(0);
    expect(again.id).toBe(first.id);
    expect(state.helperPanel.length).toBe(1);
    state.submit();
    expect(state.helperPanel.length).toBe(1); // persists into trial 2
  });

  it("blocks references to deleted helpers", () => {
    const state = new SessionState("x", "p", TRIALS, fakeClock());
    state.commitStep("add", [{ prim: "line_horizontal" }, { prim: "line_vertical" }]);
    const helper = state.saveHelper(0);
    state.deleteHelper(helper.id);
    expect(() => state.previewStep("invert", [{ helper: helper.id }])).toThrow(/deleted/);
  });

  it("rejects arity mismatches with a message", () => {
    const state = new SessionState("x", "p", TRIALS, fakeClock());
    expect(() => state.previewStep("invert", [{ prim: "blank" }, { prim: "square" }])).toThrow(
      /takes 1 operand/,
    );
    expect(() => state.previewStep("add", [{ prim: "blank" }])).toThrow(/takes 2/);
  });

  it("preview does not mutate state and cancel clears it", () => {
    const state = new SessionState("x", "p", TRIALS, fakeClock());
    state.previewStep("invert", [{ prim: "blank" }]);
    expect(state.committedSteps.length).toBe(0);
    expect(state.pendingPreview).not.toBeNull();
    state.cancelPreview();
    expect(state.pendingPreview).toBeNull();
  });

  it("committed steps are append-only across the api surface", () => {
    const state = new SessionState("x", "p", TRIALS, fakeClock());
    state.commitStep("invert", [{ prim: "blank" }]);
    state.commitStep("intersect", [{ step: 0 }, { prim: "square" }]);
    expect(state.committedSteps.length).toBe(2);
    // no removal api exists; the readonly view cannot shrink the record
    expect(state.committedSteps[0].op).toBe("invert");
  });

  it("submit with an empty canvas scores zero on a nonblank target", () => {
    const state = new SessionState("x", "p", TRIALS, fakeClock());
    const record = state.submit();
    expect(record.correct).toBe(false);
    expect(record.submitted_key).toBe("0".repeat(100));
  });

  it("overlap spelling works end to end", () => {
    const state = new SessionState("x", "p", TRIALS, fakeClock());
    const step = state.commitStep("overlap", [{ prim: "square" }, { prim: "triangle" }]);
    expect(step.op).toBe("intersect");
    const expected = applyBinary("intersect", PRIMITIVES.square, PRIMITIVES.triangle);
    expect(gridKey(step.grid)).toBe(gridKey(expected));
  });

  it("unary ops apply to helpers and steps alike", () => {
    const state = new SessionState("x", "p", TRIALS, fakeClock());
    state.commitStep("add", [{ prim: "line_horizontal" }, { prim: "line_vertical" }]);
    const helper = state.saveHelper(0);
    const viaHelper = state.commitStep("reflect_diag", [{ helper: helper.id }]);
    const viaStep = state.commitStep("reflect_diag", [{ step: 0 }]);
    expect(gridKey(viaHelper.grid)).toBe(gridKey(viaStep.grid));
    expect(gridKey(viaStep.grid)).toBe(gridKey(applyUnary("reflect_diag", plus)));
  });
});
