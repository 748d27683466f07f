/** Reader for the binary matrix files the pipeline writes.
 *
 * Layout: 4-byte magic "MPST", then three little-endian uint32 fields
 * (version, dtype code, ndim), ndim little-endian uint64 dimensions, and
 * a C-order payload. Code 1 is float64, code 2 is complex128 stored as
 * interleaved (re, im) float64 pairs.
 */

import { readFileSync } from "node:fs";

export interface Matrix {
  shape: number[];
  /** Real part (or the full payload for real files), C order. */
  data: Float64Array;
  /** Imaginary part, present only for complex files. */
  imag?: Float64Array;
}

const MAGIC = "MPST";
const VERSION = 1;

export function readMatrix(path: string): Matrix {
  const buf = readFileSync(path);
  const view = new DataView(buf.buffer, buf.byteOffset, buf.byteLength);
  if (buf.length < 16 || buf.toString("latin1", 0, 4) !== MAGIC) {
    throw new Error(`${path}: not a matrix file (bad magic)`);
  }
  const version = view.getUint32(4, true);
  const code = view.getUint32(8, true);
  const ndim = view.getUint32(12, true);
  if (version !== VERSION) {
    throw new Error(`${path}: unsupported version ${version}`);
  }
  if (code !== 1 && code !== 2) {
    throw new Error(`${path}: unknown dtype code ${code}`);
  }
  let offset = 16;
  const shape: number[] = [];
  for (let i = 0; i < ndim; i++) {
    shape.push(Number(view.getBigUint64(offset, true)));
    offset += 8;
  }
  const count = shape.reduce((a, b) => a * b, 1);
  const scalars = code === 2 ? 2 * count : count;
  if (buf.length < offset + 8 * scalars) {
    throw new Error(`${path}: truncated payload`);
  }
  const raw = new Float64Array(scalars);
  for (let i = 0; i < scalars; i++) {
    raw[i] = view.getFloat64(offset + 8 * i, true);
  }
  if (code === 1) {
    return { shape, data: raw };
  }
  const re = new Float64Array(count);
  const im = new Float64Array(count);
  for (let i = 0; i < count; i++) {
    re[i] = raw[2 * i]!;
    im[i] = raw[2 * i + 1]!;
  }
  return { shape, data: re, imag: im };
}

/** Row-major (nz, nx) matrix as an array of row views. */
export function asRows(m: Matrix): Float64Array[] {
  if (m.shape.length !== 2) {
    throw new Error(`expected a 2-d matrix, got shape [${m.shape.join(", ")}]`);
  }
  const [nrows, ncols] = m.shape as [number, number];
  const rows: Float64Array[] = [];
  for (let r = 0; r < nrows; r++) {
    rows.push(m.data.subarray(r * ncols, (r + 1) * ncols));
  }
  return rows;
}
