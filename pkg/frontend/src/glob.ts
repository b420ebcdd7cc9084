/** Minimal glob: `*` matches within one path segment.  Enough for the
 * trace layouts the harness writes (`runs/sweep/compressor_C1/trace_*.csv`).
 */

import * as fs from "fs";
import * as path from "path";

function segmentToRegExp(segment: string): RegExp {
  const escaped = segment.replace(/[.+^${}()|[\]\\]/g, "\\$&").replace(/\*/g, "[^/]*");
  return new RegExp(`^${escaped}$`);
}

export function expandGlob(pattern: string): string[] {
  const segments = pattern.split(path.sep === "\\" ? /[\\/]/ : "/");
  let bases: string[] = [pattern.startsWith("/") ? "/" : "."];
  for (const segment of segments) {
    if (segment === "" || segment === ".") continue;
    const next: string[] = [];
    if (!segment.includes("*")) {
      for (const base of bases) {
        const candidate = path.join(base, segment);
        if (fs.existsSync(candidate)) next.push(candidate);
      }
    } else {
      const re = segmentToRegExp(segment);
      for (const base of bases) {
        if (!fs.existsSync(base) || !fs.statSync(base).isDirectory()) continue;
        for (const entry of fs.readdirSync(base).sort()) {
          if (re.test(entry)) next.push(path.join(base, entry));
        }
      }
    }
    bases = next;
  }
  return bases.sort();
}
