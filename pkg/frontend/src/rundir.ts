/** Run-directory access: artifact lookup, JSON/CSV loading, source resolution. */

import { existsSync, readFileSync } from "node:fs";
import { basename, dirname, join } from "node:path";
import Papa from "papaparse";

/** Raised when a run directory lacks the artifacts a figure needs. */
export class FigureInputError extends Error {}

export function requireFile(runDir: string, name: string): string {
  const path = join(runDir, name);
  if (!existsSync(path)) {
    throw new FigureInputError(`${runDir} has no ${name}; not a completed run directory`);
  }
  return path;
}

export function loadJson<T>(path: string): T {
  return JSON.parse(readFileSync(path, "utf-8")) as T;
}

export function loadSetup(runDir: string): Record<string, unknown> {
  return loadJson(requireFile(runDir, "setup.json"));
}

/** Parse a headered CSV into one record per row, numeric fields as numbers. */
export function loadCsv(path: string): Record<string, number>[] {
  const parsed = Papa.parse<Record<string, number>>(readFileSync(path, "utf-8").trim(), {
    header: true,
    dynamicTyping: true,
    skipEmptyLines: true,
  });
  if (parsed.errors.length > 0) {
    const first = parsed.errors[0]!;
    throw new FigureInputError(`${path}: ${first.message} (row ${first.row})`);
  }
  return parsed.data;
}

/** Locate the generating run a sampling run refers to.
 *
 * The recorded path is preferred; if the tree was relocated (checked-in
 * fixtures, copied runs), fall back to a sibling directory with the same
 * basename.
 */
export function resolveSourceRun(runDir: string): string {
  const setup = loadSetup(runDir);
  const recorded = setup["source_run"];
  if (typeof recorded !== "string") {
    throw new FigureInputError(`${runDir}/setup.json has no source_run entry`);
  }
  if (existsSync(recorded)) {
    return recorded;
  }
  const sibling = join(dirname(runDir), basename(recorded));
  if (existsSync(sibling)) {
    return sibling;
  }
  throw new FigureInputError(
    `source run ${recorded} not found (also tried ${sibling})`,
  );
}
