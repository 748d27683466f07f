/** Samples and training points in the first two basis coordinates.
 *
 * Memorized samples (nearest-neighbor ratio below threshold) sit on top of
 * training points; the scatter makes collapse onto the training set visible
 * at a glance.
 */

import { asRows, readMatrix } from "../mpst.js";
import { FigureInputError, loadCsv, requireFile, resolveSourceRun } from "../rundir.js";
import * as svg from "../svg.js";

export function render(runDir: string): string {
  const samples = asRows(readMatrix(requireFile(runDir, "samples.mpst")));
  if (samples[0]!.length < 2) {
    throw new FigureInputError("samples have fewer than 2 coordinates; nothing to scatter");
  }
  const ratios = loadCsv(requireFile(runDir, "ratios.csv"));
  const src = resolveSourceRun(runDir);
  const training = asRows(readMatrix(requireFile(src, "training.mpst")));

  const xs = [...samples.map((s) => s[0]!), ...training.map((t) => t[0]!)];
  const ys = [...samples.map((s) => s[1]!), ...training.map((t) => t[1]!)];
  const pad = 0.5;
  const xLo = Math.min(...xs) - pad;
  const xHi = Math.max(...xs) + pad;
  const yLo = Math.min(...ys) - pad;
  const yHi = Math.max(...ys) + pad;

  const p: svg.Panel = { x: 60, y: 34, w: 400, h: 400 };
  const sx = svg.linScale(xLo, xHi, p.x, p.x + p.w);
  const sy = svg.linScale(yLo, yHi, p.y + p.h, p.y);

  const parts: string[] = [];
  for (const t of training) {
    const cx = sx(t[0]!);
    const cy = sy(t[1]!);
    parts.push(svg.tag("path", {
      d: `M ${svg.num(cx - 4)} ${svg.num(cy - 4)} L ${svg.num(cx + 4)} ${svg.num(cy + 4)} ` +
        `M ${svg.num(cx - 4)} ${svg.num(cy + 4)} L ${svg.num(cx + 4)} ${svg.num(cy - 4)}`,
      stroke: "#222", "stroke-width": 1.4, fill: "none",
    }));
  }
  let memorized = 0;
  for (let i = 0; i < samples.length; i++) {
    const isMem = (ratios[i]?.["memorized"] ?? 0) > 0;
    memorized += isMem ? 1 : 0;
    parts.push(svg.tag("circle", {
      cx: sx(samples[i]![0]!), cy: sy(samples[i]![1]!), r: 3.2,
      fill: isMem ? "#2171b5" : "#e6550d", "fill-opacity": 0.7, stroke: "none",
    }));
  }
  parts.push(svg.frame(
    p,
    { at: svg.ticks(xLo, xHi), pos: sx },
    { at: svg.ticks(yLo, yHi), pos: sy },
    { title: "samples vs training set, coordinates 1 and 2", x: "coordinate 1", y: "coordinate 2" },
  ));
  const legendY = p.y + p.h + 44;
  parts.push(svg.tag("circle", { cx: p.x + 6, cy: legendY - 4, r: 3.2, fill: "#2171b5" }));
  parts.push(svg.text(p.x + 14, legendY, `memorized (${memorized})`, { "font-size": 10 }));
  parts.push(svg.tag("circle", { cx: p.x + 126, cy: legendY - 4, r: 3.2, fill: "#e6550d" }));
  parts.push(svg.text(p.x + 134, legendY, `not memorized (${samples.length - memorized})`, { "font-size": 10 }));
  parts.push(svg.text(p.x + 276, legendY, `x training (${training.length})`, { "font-size": 10 }));
  return svg.document(500, 500, parts.join("\n"));
}
