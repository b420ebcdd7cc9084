/** Hand-rolled SVG line charts: good enough for convergence curves and
 * free of any DOM or rendering dependency.  Log-scale y reads linear
 * convergence as a straight line.
 */

import { Series } from "./aggregate";

const WIDTH = 720;
const HEIGHT = 480;
const MARGIN = { left: 84, right: 24, top: 40, bottom: 56 };

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"];

export interface RenderOptions {
  logy: boolean;
  xLabel: string;
  yLabel: string;
  title: string;
}

function niceLinearTicks(lo: number, hi: number, count = 6): number[] {
  if (!(hi > lo)) return [lo];
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / count)));
  const err = span / (count * step);
  const mult = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
  const s = step * mult;
  const ticks: number[] = [];
  for (let v = Math.ceil(lo / s) * s; v <= hi + 1e-12 * span; v += s) ticks.push(v);
  return ticks;
}

function fmt(v: number): string {
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(0).replace("+", "");
  return Number(v.toPrecision(4)).toString();
}

export function renderSvg(seriesList: Series[], opts: RenderOptions): string {
  const usable = seriesList.map((s) => ({
    label: s.label,
    points: s.points.filter((p) => Number.isFinite(p.x) && Number.isFinite(p.mean) &&
      (!opts.logy || (p.mean > 0 && p.min > 0))),
  }));
  const all = usable.flatMap((s) => s.points);
  if (all.length === 0) throw new Error("nothing to plot: no finite points after filtering");

  const xLo = Math.min(...all.map((p) => p.x));
  const xHi = Math.max(...all.map((p) => p.x));
  let yLo = Math.min(...all.map((p) => p.min));
  let yHi = Math.max(...all.map((p) => p.max));
  if (opts.logy) {
    yLo = Math.log10(yLo);
    yHi = Math.log10(yHi);
  }
  if (yHi === yLo) yHi = yLo + 1;

  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
  const sx = (x: number) => MARGIN.left + ((x - xLo) / (xHi - xLo || 1)) * plotW;
  const sy = (y: number) => {
    const v = opts.logy ? Math.log10(y) : y;
    return MARGIN.top + (1 - (v - yLo) / (yHi - yLo)) * plotH;
  };

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" ` +
      `viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="Helvetica, Arial, sans-serif" font-size="12">`,
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  if (opts.title) {
    parts.push(
      `<text x="${WIDTH / 2}" y="${MARGIN.top - 16}" text-anchor="middle" font-size="15">${opts.title}</text>`,
    );
  }

  // gridlines and ticks
  const yTicks = opts.logy
    ? Array.from({ length: Math.floor(yHi) - Math.ceil(yLo) + 1 }, (_, i) => Math.ceil(yLo) + i)
    : niceLinearTicks(yLo, yHi);
  for (const t of yTicks) {
    const y = MARGIN.top + (1 - (t - yLo) / (yHi - yLo)) * plotH;
    parts.push(`<line x1="${MARGIN.left}" x2="${WIDTH - MARGIN.right}" y1="${y}" y2="${y}" stroke="#ddd"/>`);
    const labelVal = opts.logy ? `1e${t}` : fmt(t);
    parts.push(`<text x="${MARGIN.left - 8}" y="${y + 4}" text-anchor="end">${labelVal}</text>`);
  }
  for (const t of niceLinearTicks(xLo, xHi)) {
    const x = sx(t);
    parts.push(
      `<line x1="${x}" x2="${x}" y1="${MARGIN.top}" y2="${HEIGHT - MARGIN.bottom}" stroke="#eee"/>`,
    );
    parts.push(`<text x="${x}" y="${HEIGHT - MARGIN.bottom + 18}" text-anchor="middle">${fmt(t)}</text>`);
  }
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${plotW}" height="${plotH}" fill="none" stroke="#333"/>`,
  );
  parts.push(
    `<text x="${MARGIN.left + plotW / 2}" y="${HEIGHT - 14}" text-anchor="middle">${opts.xLabel}</text>`,
  );
  parts.push(
    `<text x="20" y="${MARGIN.top + plotH / 2}" text-anchor="middle" ` +
      `transform="rotate(-90 20 ${MARGIN.top + plotH / 2})">${opts.yLabel}</text>`,
  );

  usable.forEach((s, i) => {
    const color = COLORS[i % COLORS.length];
    if (s.points.length === 0) return;
    const hasBand = s.points.some((p) => p.max > p.min);
    if (hasBand) {
      const upper = s.points.map((p) => `${sx(p.x).toFixed(2)},${sy(p.max).toFixed(2)}`);
      const lower = [...s.points].reverse().map((p) => `${sx(p.x).toFixed(2)},${sy(p.min).toFixed(2)}`);
      parts.push(
        `<polygon points="${upper.concat(lower).join(" ")}" fill="${color}" fill-opacity="0.15" stroke="none"/>`,
      );
    }
    const line = s.points.map((p) => `${sx(p.x).toFixed(2)},${sy(p.mean).toFixed(2)}`).join(" ");
    parts.push(`<polyline points="${line}" fill="none" stroke="${color}" stroke-width="1.8"/>`);
    const lx = WIDTH - MARGIN.right - 160;
    const ly = MARGIN.top + 14 + 18 * i;
    parts.push(`<line x1="${lx}" x2="${lx + 26}" y1="${ly - 4}" y2="${ly - 4}" stroke="${color}" stroke-width="2"/>`);
    parts.push(`<text x="${lx + 32}" y="${ly}">${s.label}</text>`);
  });

  parts.push("</svg>");
  return parts.join("\n");
}
