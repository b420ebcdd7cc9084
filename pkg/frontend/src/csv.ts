/** Parsing for coldsim trace CSVs and summary CSVs.
 *
 * Traces have `#`-prefixed `key=value` metadata lines, a fixed header row,
 * and empty cells wherever an algorithm does not produce a column. Empty
 * cells become nulls and are skipped downstream, never interpolated.
 */

import * as fs from "fs";

export const TRACE_COLUMNS = [
  "iter",
  "consensus_error",
  "optimality_gap",
  "max_node_error",
  "lyapunov",
  "innovation_max",
  "scale_s",
  "bits_cumulative",
  "seed",
] as const;

export type TraceColumn = (typeof TRACE_COLUMNS)[number];

export interface Trace {
  path: string;
  meta: Record<string, string>;
  rows: Record<string, number | null>[];
}

export class SchemaError extends Error {}

export function parseTrace(path: string, text: string): Trace {
  const meta: Record<string, string> = {};
  const rows: Record<string, number | null>[] = [];
  let header: string[] | null = null;
  for (const rawLine of text.split("\n")) {
    const line = rawLine.trimEnd();
    if (line === "") continue;
    if (line.startsWith("#")) {
      const body = line.slice(1).trim();
      const eq = body.indexOf("=");
      if (eq > 0) meta[body.slice(0, eq)] = body.slice(eq + 1);
      continue;
    }
    if (header === null) {
      header = line.split(",");
      if (header.join(",") !== TRACE_COLUMNS.join(",")) {
        throw new SchemaError(`${path}: unexpected trace header [${line}]`);
      }
      continue;
    }
    const cells = line.split(",");
    const row: Record<string, number | null> = {};
    header.forEach((name, i) => {
      const cell = cells[i] ?? "";
      if (cell === "") {
        row[name] = null;
      } else {
        const value = Number(cell);
        if (Number.isNaN(value)) {
          throw new SchemaError(`${path}: non-numeric cell '${cell}' in column ${name}`);
        }
        row[name] = value;
      }
    });
    rows.push(row);
  }
  if (header === null) throw new SchemaError(`${path}: no header row found`);
  return { path, meta, rows };
}

export function readTrace(path: string): Trace {
  return parseTrace(path, fs.readFileSync(path, "utf-8"));
}

export function column(trace: Trace, name: string): (number | null)[] {
  if (!(TRACE_COLUMNS as readonly string[]).includes(name)) {
    throw new SchemaError(`${trace.path}: unknown column '${name}'`);
  }
  return trace.rows.map((r) => r[name]);
}

/** Requires the column to carry at least one value in every input trace. */
export function requireColumn(traces: Trace[], name: string): void {
  for (const t of traces) {
    const values = column(t, name);
    if (!values.some((v) => v !== null)) {
      throw new SchemaError(`${t.path}: column '${name}' is empty`);
    }
  }
}

export interface Summary {
  meta: Record<string, string>;
  header: string[];
  rows: number[][];
}

export function readSummary(path: string): Summary {
  const meta: Record<string, string> = {};
  const rows: number[][] = [];
  let header: string[] | null = null;
  for (const rawLine of fs.readFileSync(path, "utf-8").split("\n")) {
    const line = rawLine.trimEnd();
    if (line === "") continue;
    if (line.startsWith("#")) {
      const body = line.slice(1).trim();
      const eq = body.indexOf("=");
      if (eq > 0) meta[body.slice(0, eq)] = body.slice(eq + 1);
      continue;
    }
    if (header === null) {
      header = line.split(",");
      continue;
    }
    rows.push(line.split(",").map((c) => (c === "" ? NaN : Number(c))));
  }
  if (header === null) throw new SchemaError(`${path}: empty summary`);
  return { meta, header, rows };
}
