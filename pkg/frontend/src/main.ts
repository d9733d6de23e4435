/** DOM layer: wires the session state machine to a minimal interface.
 * Loads ./curriculum.json (produced by the workbench CLI's export-ui
 * command) and offers the exported session log as a download. */

import { Grid, PRIMITIVE_NAMES, SIDE, gridFromKey, gridFromRows, isBinary, normalizeOp } from "./dsl.js";
import { exportLogText } from "./log.js";
import { OperandRef, SessionState } from "./state.js";

interface CurriculumFile {
  name: string;
  trials: { index: number; target: number[][] }[];
}

let state: SessionState;
let selectedOp: string | null = null;
let operands: OperandRef[] = [];

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function renderGrid(target: HTMLElement, grid: Grid, cellPx = 14): void {
  target.innerHTML = "";
  target.style.display = "grid";
  target.style.gridTemplateColumns = `repeat(${SIDE}, ${cellPx}px)`;
  for (const v of grid) {
    const cell = document.createElement("div");
    cell.className = v ? "cell on" : "cell";
    cell.style.width = `${cellPx}px`;
    cell.style.height = `${cellPx}px`;
    target.appendChild(cell);
  }
}

function describeRef(ref: OperandRef): string {
  if ("prim" in ref) return ref.prim;
  if ("helper" in ref) return ref.helper;
  return `step ${ref.step + 1}`;
}

function setStatus(text: string): void {
  el("status").textContent = text;
}

function refresh(): void {
  if (state.done) {
    setStatus(`session complete — score ${state.score}/${state.completedTrials.length}`);
    el("download").removeAttribute("disabled");
    return;
  }
  el("trial-label").textContent =
    `Trial ${state.trialIndex} — score ${state.score}`;
  renderGrid(el("target"), gridFromKey(state.targetKey));
  renderGrid(el("canvas"), state.pendingPreview?.grid ?? state.canvas);

  const stepsList = el("steps");
  stepsList.innerHTML = "";
  state.committedSteps.forEach((step, i) => {
    const item = document.createElement("li");
    const thumb = document.createElement("span");
    renderGrid(thumb, step.grid, 4);
    const label = document.createElement("button");
    label.textContent = `${i + 1}: ${step.op}(${step.args.map(describeRef).join(", ")})`;
    label.onclick = () => pickOperand({ step: i });
    const save = document.createElement("button");
    save.textContent = "save helper";
    save.onclick = () => {
      state.saveHelper(i);
      refresh();
    };
    item.append(thumb, label, save);
    stepsList.appendChild(item);
  });

  const panel = el("helpers");
  panel.innerHTML = "";
  for (const helper of state.helperPanel) {
    const item = document.createElement("span");
    item.className = "helper";
    const thumb = document.createElement("span");
    renderGrid(thumb, helper.grid, 4);
    const use = document.createElement("button");
    use.textContent = "use";
    use.onclick = () => pickOperand({ helper: helper.id });
    const del = document.createElement("button");
    del.textContent = "x";
    del.onclick = () => {
      state.deleteHelper(helper.id);
      refresh();
    };
    item.append(thumb, use, del);
    panel.appendChild(item);
  }

  const pendingControls = el("pending-controls");
  pendingControls.style.display = state.pendingPreview ? "block" : "none";
}

function pickOperand(ref: OperandRef): void {
  if (!selectedOp) {
    setStatus("pick an operation first");
    return;
  }
  operands.push(ref);
  const want = isBinary(normalizeOp(selectedOp)) ? 2 : 1;
  setStatus(`${selectedOp}(${operands.map(describeRef).join(", ")}${operands.length < want ? ", …" : ")"}`);
  if (operands.length === want) {
    try {
      state.previewStep(selectedOp, operands);
    } catch (err) {
      setStatus(String(err));
    }
    operands = [];
    refresh();
  }
}

function wireControls(): void {
  const ops = el("ops");
  for (const op of ["add", "subtract", "overlap", "invert", "reflect_horizontal", "reflect_vertical", "reflect_diag"]) {
    const button = document.createElement("button");
    button.textContent = op;
    button.onclick = () => {
      selectedOp = op;
      operands = [];
      setStatus(`${op}: pick operand(s)`);
    };
    ops.appendChild(button);
  }
  const prims = el("primitives");
  for (const name of PRIMITIVE_NAMES) {
    const button = document.createElement("button");
    button.textContent = name;
    button.onclick = () => pickOperand({ prim: name });
    prims.appendChild(button);
  }
  el("commit").onclick = () => {
    const pending = state.pendingPreview;
    if (!pending) return;
    state.commitStep(pending.op, pending.args);
    refresh();
  };
  el("cancel").onclick = () => {
    state.cancelPreview();
    refresh();
  };
  el("submit").onclick = () => {
    state.submit();
    selectedOp = null;
    operands = [];
    refresh();
  };
  el("download").onclick = () => {
    const blob = new Blob([exportLogText(state)], { type: "application/json" });
    const url = URL.createObjectURL(blob);
    const anchor = document.createElement("a");
    anchor.href = url;
    anchor.download = `session_${state.participantId}.json`;
    anchor.click();
    URL.revokeObjectURL(url);
  };
}

async function boot(): Promise<void> {
  const response = await fetch("./curriculum.json");
  const curriculum = (await response.json()) as CurriculumFile;
  const trials = curriculum.trials.map((t) => ({
    index: t.index,
    targetKey: gridFromRows(t.target).join(""),
  }));
  const participant = `p${Math.random().toString(36).slice(2, 8)}`;
  state = new SessionState(curriculum.name, participant, trials);
  wireControls();
  refresh();
}

boot().catch((err) => setStatus(`failed to start: ${err}`));
