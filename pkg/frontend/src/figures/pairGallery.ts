/** Sampled fields next to their nearest training fields.
 *
 * Coefficient vectors are synthesized through the stored basis
 * (field = s0 + sum_i sqrt(lambda_i) xi_i phi_i), so the comparison is in
 * the physical domain where duplication is easiest to see.
 */

import { join } from "node:path";
import { asRows, readMatrix } from "../mpst.js";
import { FigureInputError, loadCsv, loadJson, requireFile, resolveSourceRun } from "../rundir.js";
import * as svg from "../svg.js";

interface Basis {
  nz: number;
  nx: number;
  s0: number;
  scaled: Float64Array[]; // sqrt(lambda_i) * phi_i, one row per term
}

function loadBasis(srcDir: string): Basis {
  const meta = loadJson<{ nx: number; nz: number; s0: number; n_terms: number }>(
    requireFile(srcDir, "kl_meta.json"),
  );
  const lam = readMatrix(requireFile(srcDir, "kl_eigenvalues.mpst")).data;
  const modes = asRows(readMatrix(requireFile(srcDir, "kl_modes.mpst")));
  const scaled = modes.map((row, i) => {
    const out = new Float64Array(row.length);
    const s = Math.sqrt(lam[i]!);
    for (let g = 0; g < row.length; g++) out[g] = s * row[g]!;
    return out;
  });
  return { nz: meta.nz, nx: meta.nx, s0: meta.s0, scaled };
}

function synthesize(basis: Basis, xi: ArrayLike<number>): Float64Array[] {
  const nGrid = basis.nz * basis.nx;
  const flat = new Float64Array(nGrid).fill(basis.s0);
  for (let i = 0; i < basis.scaled.length; i++) {
    const c = xi[i]!;
    const mode = basis.scaled[i]!;
    for (let g = 0; g < nGrid; g++) flat[g] = flat[g]! + c * mode[g]!;
  }
  const rows: Float64Array[] = [];
  for (let r = 0; r < basis.nz; r++) {
    rows.push(flat.subarray(r * basis.nx, (r + 1) * basis.nx));
  }
  return rows;
}

export function render(runDir: string): string {
  const samples = asRows(readMatrix(requireFile(runDir, "samples.mpst")));
  const ratios = loadCsv(requireFile(runDir, "ratios.csv"));
  const src = resolveSourceRun(runDir);
  const training = asRows(readMatrix(requireFile(src, "training.mpst")));
  const basis = loadBasis(src);
  if (basis.scaled.length !== samples[0]!.length) {
    throw new FigureInputError(
      `basis has ${basis.scaled.length} terms but samples have ${samples[0]!.length} coordinates`,
    );
  }

  const nPairs = Math.min(4, samples.length);
  const size = 150;
  const rowGap = 26;
  const top = 40;
  const parts: string[] = [];
  for (let k = 0; k < nPairs; k++) {
    const rec = ratios[k];
    const nearest = Math.round(rec?.["nearest_idx"] ?? 0);
    const ratio = rec?.["ratio"];
    const sampleField = synthesize(basis, samples[k]!);
    const trainField = synthesize(basis, training[nearest]!);
    const flat = [...sampleField, ...trainField].flatMap((r) => [...r]);
    const range: [number, number] = [Math.min(...flat), Math.max(...flat)];

    const y = top + k * (size + rowGap);
    const left: svg.Panel = { x: 70, y, w: size, h: size };
    const right: svg.Panel = { x: 70 + size + 24, y, w: size, h: size };
    parts.push(svg.heatmap(left, sampleField, range).markup);
    parts.push(svg.heatmap(right, trainField, range).markup);
    for (const p of [left, right]) {
      parts.push(svg.tag("rect", {
        x: p.x, y: p.y, width: p.w, height: p.h,
        fill: "none", stroke: "#555", "stroke-width": 0.8,
      }));
    }
    parts.push(svg.colorbar(right, range[0], range[1]));
    const label = ratio === undefined
      ? `sample ${k}`
      : `sample ${k} (ratio ${Number(ratio).toFixed(3)})`;
    parts.push(svg.text(left.x - 8, y + size / 2, label, {
      "text-anchor": "end", "font-size": 10,
    }));
    parts.push(svg.text(right.x + size / 2, y + size + 14, `training ${nearest}`, {
      "text-anchor": "middle", "font-size": 10,
    }));
  }
  parts.push(svg.text(70, 22, "drawn samples (left) vs nearest training fields (right)", {
    "font-size": 12,
  }));
  const height = top + nPairs * (size + rowGap) + 10;
  return svg.document(70 + 2 * size + 24 + 90, height, parts.join("\n"));
}
