#!/usr/bin/env node
/** coldplot <figure-spec-file> [--out PATH]
 *
 * Reads trace CSVs produced by the experiment runner and writes one SVG
 * figure per spec file.  Inputs are never modified.
 */

import * as fs from "fs";

import { aggregate, Series } from "./aggregate";
import { readTrace, requireColumn, SchemaError } from "./csv";
import { FigureSpecError, parseFigureSpec } from "./figspec";
import { expandGlob } from "./glob";
import { renderSvg } from "./svg";

export function buildFigure(specText: string): { svg: string; out: string } {
  const spec = parseFigureSpec(specText);
  const seriesList: Series[] = [];
  spec.inputs.forEach((pattern, i) => {
    const paths = expandGlob(pattern);
    if (paths.length === 0) {
      throw new Error(`input pattern '${pattern}' matched no files`);
    }
    const traces = paths.map(readTrace);
    requireColumn(traces, spec.y);
    if (spec.x === "bits") requireColumn(traces, "bits_cumulative");
    seriesList.push(aggregate(traces, spec.labels[i], spec.x, spec.y));
  });
  const svg = renderSvg(seriesList, {
    logy: spec.logy,
    xLabel: spec.x === "iter" ? "iterations" : "transmitted bits per node",
    yLabel: spec.y.replace(/_/g, " "),
    title: spec.title,
  });
  return { svg, out: spec.out };
}

export function main(argv: string[]): number {
  const args = argv.filter((a) => a !== "");
  let outOverride: string | null = null;
  const positional: string[] = [];
  for (let i = 0; i < args.length; i++) {
    if (args[i] === "--out") {
      outOverride = args[++i];
    } else {
      positional.push(args[i]);
    }
  }
  if (positional.length !== 1) {
    process.stderr.write("usage: coldplot <figure-spec-file> [--out PATH]\n");
    return 2;
  }
  try {
    const specText = fs.readFileSync(positional[0], "utf-8");
    const { svg, out } = buildFigure(specText);
    const target = outOverride ?? out;
    fs.writeFileSync(target, svg, "utf-8");
    process.stdout.write(`${target}\n`);
    return 0;
  } catch (err) {
    const kind =
      err instanceof SchemaError ? "schema error" : err instanceof FigureSpecError ? "spec error" : "error";
    process.stderr.write(`${kind}: ${(err as Error).message}\n`);
    return 1;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
