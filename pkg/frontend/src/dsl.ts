/**
 * The grid DSL evaluated in the browser: 10x10 binary grids, six geometric
 * primitives, three binary and four unary transformations. Must agree
 * cell-for-cell with the reference engine; the golden-case test crosses it
 * against generated fixtures.
 */

export const SIDE = 10;
export const CELLS = SIDE * SIDE;

/** Row-major cells, row 0 at the top. */
export type Grid = readonly number[];

export const BINARY_OPS = ["add", "subtract", "intersect"] as const;
export const UNARY_OPS = [
  "invert",
  "reflect_horizontal",
  "reflect_vertical",
  "reflect_diag",
] as const;

export type BinaryOp = (typeof BINARY_OPS)[number];
export type UnaryOp = (typeof UNARY_OPS)[number];
export type Op = BinaryOp | UnaryOp;

export function normalizeOp(name: string): Op {
  const resolved = name === "overlap" ? "intersect" : name;
  if (
    (BINARY_OPS as readonly string[]).includes(resolved) ||
    (UNARY_OPS as readonly string[]).includes(resolved)
  ) {
    return resolved as Op;
  }
  throw new Error(`unknown operator: ${name}`);
}

export function isBinary(op: Op): op is BinaryOp {
  return (BINARY_OPS as readonly string[]).includes(op);
}

function grid(fill: (r: number, c: number) => number): Grid {
  const cells = new Array<number>(CELLS);
  for (let r = 0; r < SIDE; r++) {
    for (let c = 0; c < SIDE; c++) {
      cells[r * SIDE + c] = fill(r, c) ? 1 : 0;
    }
  }
  return cells;
}

export const PRIMITIVES: Record<string, Grid> = {
  blank: grid(() => 0),
  line_horizontal: grid((r) => (r === 5 ? 1 : 0)),
  line_vertical: grid((_r, c) => (c === 5 ? 1 : 0)),
  diagonal: grid((r, c) => (r === c ? 1 : 0)),
  square: grid((r, c) => (r === 0 || r === 9 || c === 0 || c === 9 ? 1 : 0)),
  triangle: grid((r, c) => (c <= r ? 1 : 0)),
};

export const PRIMITIVE_NAMES = [
  "blank",
  "line_horizontal",
  "line_vertical",
  "diagonal",
  "square",
  "triangle",
] as const;

export function applyBinary(op: BinaryOp, a: Grid, b: Grid): Grid {
  switch (op) {
    case "add":
      return a.map((v, i) => (v || b[i] ? 1 : 0));
    case "subtract":
      return a.map((v, i) => (v && !b[i] ? 1 : 0));
    case "intersect":
      return a.map((v, i) => (v && b[i] ? 1 : 0));
  }
}

export function applyUnary(op: UnaryOp, a: Grid): Grid {
  switch (op) {
    case "invert":
      return a.map((v) => (v ? 0 : 1));
    case "reflect_horizontal":
      return grid((r, c) => a[(9 - r) * SIDE + c]);
    case "reflect_vertical":
      return grid((r, c) => a[r * SIDE + (9 - c)]);
    case "reflect_diag":
      return grid((r, c) => a[c * SIDE + r]);
  }
}

export function gridKey(g: Grid): string {
  return g.join("");
}

export function gridFromKey(key: string): Grid {
  if (!/^[01]{100}$/.test(key)) {
    throw new Error("grid key must be 100 characters of 0/1");
  }
  return Array.from(key, (ch) => (ch === "1" ? 1 : 0));
}

export function gridFromRows(rows: number[][]): Grid {
  if (rows.length !== SIDE || rows.some((row) => row.length !== SIDE)) {
    throw new Error("grid must be 10x10");
  }
  return rows.flat().map((v) => (v ? 1 : 0));
}

export function gridsEqual(a: Grid, b: Grid): boolean {
  return a.every((v, i) => v === b[i]);
}

export const BLANK: Grid = PRIMITIVES.blank;
