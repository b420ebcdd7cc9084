/** Seed aggregation: one series per label, averaging the y column across
 * the traces that share it, with a min/max band.
 *
 * Points are kept only where every trace in the group carries a value;
 * missing cells are skipped, never interpolated.  The mean reproduces the
 * harness summary (same truncation to the shortest trace, same per-
 * iteration average).
 */

import { column, Trace } from "./csv";

export interface SeriesPoint {
  x: number;
  mean: number;
  min: number;
  max: number;
}

export interface Series {
  label: string;
  points: SeriesPoint[];
}

export function aggregate(traces: Trace[], label: string, xAxis: "iter" | "bits", yColumn: string): Series {
  const length = Math.min(...traces.map((t) => t.rows.length));
  const ys = traces.map((t) => column(t, yColumn));
  const xsSource =
    xAxis === "iter" ? traces.map((t) => column(t, "iter")) : traces.map((t) => column(t, "bits_cumulative"));
  const points: SeriesPoint[] = [];
  for (let k = 0; k < length; k++) {
    const yVals = ys.map((col) => col[k]);
    const xVals = xsSource.map((col) => col[k]);
    if (yVals.some((v) => v === null) || xVals.some((v) => v === null)) continue;
    const yNums = yVals as number[];
    const xNums = xVals as number[];
    points.push({
      x: xNums.reduce((a, b) => a + b, 0) / xNums.length,
      mean: yNums.reduce((a, b) => a + b, 0) / yNums.length,
      min: Math.min(...yNums),
      max: Math.max(...yNums),
    });
  }
  return { label, points };
}

/** Per-iteration seed means of a column, mirroring the summary file. */
export function seedMeans(traces: Trace[], yColumn: string): number[] {
  const length = Math.min(...traces.map((t) => t.rows.length));
  const cols = traces.map((t) => column(t, yColumn));
  const means: number[] = [];
  for (let k = 0; k < length; k++) {
    const vals = cols.map((c) => c[k]);
    if (vals.some((v) => v === null)) {
      means.push(NaN);
    } else {
      means.push((vals as number[]).reduce((a, b) => a + b, 0) / vals.length);
    }
  }
  return means;
}
