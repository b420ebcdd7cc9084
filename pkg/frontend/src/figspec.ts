/** Figure specs use the same line-oriented key=value format as the
 * experiment configs: `#` comments, UTF-8, one key per line.
 *
 *   input=runs/a/trace_*.csv;runs/b/trace_*.csv
 *   labels=method A;method B
 *   x=iter            (or bits)
 *   y=optimality_gap
 *   out=figure.svg
 *   logy=true         (default: log scale for error columns)
 */

export interface FigureSpec {
  inputs: string[];
  labels: string[];
  x: "iter" | "bits";
  y: string;
  out: string;
  logy: boolean;
  title: string;
}

export class FigureSpecError extends Error {}

const KEYS = new Set(["input", "labels", "x", "y", "out", "logy", "title"]);

export function parseFigureSpec(text: string): FigureSpec {
  const kv: Record<string, string> = {};
  const problems: string[] = [];
  text.split("\n").forEach((rawLine, idx) => {
    const line = rawLine.split("#", 1)[0].trim();
    if (line === "") return;
    const eq = line.indexOf("=");
    if (eq <= 0) {
      problems.push(`line ${idx + 1}: expected key=value`);
      return;
    }
    const key = line.slice(0, eq).trim();
    if (!KEYS.has(key)) {
      problems.push(`line ${idx + 1}: unknown key '${key}'`);
      return;
    }
    kv[key] = line.slice(eq + 1).trim();
  });
  if (!kv.input) problems.push("missing required key 'input'");
  if (!kv.y) problems.push("missing required key 'y'");
  if (!kv.out) problems.push("missing required key 'out'");
  const x = kv.x ?? "iter";
  if (x !== "iter" && x !== "bits") problems.push(`x must be 'iter' or 'bits', got '${x}'`);
  if (problems.length > 0) throw new FigureSpecError(problems.join("; "));

  const inputs = kv.input.split(";").map((s) => s.trim()).filter((s) => s !== "");
  const labels = (kv.labels ?? "").split(";").map((s) => s.trim()).filter((s) => s !== "");
  while (labels.length < inputs.length) labels.push(inputs[labels.length]);
  return {
    inputs,
    labels,
    x: x as "iter" | "bits",
    y: kv.y,
    out: kv.out,
    logy: kv.logy === undefined ? true : kv.logy === "true" || kv.logy === "1",
    title: kv.title ?? "",
  };
}
