/** Minimal CSV reader for the pipeline artifacts (plain numeric tables). */

import { readFileSync } from "node:fs";

export interface Table {
  header: string[];
  rows: string[][];
}

export class SchemaError extends Error {}

export function parseCsv(text: string): Table {
  const lines = text
    .split(/\r?\n/)
    .map((l) => l.trim())
    .filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new SchemaError("empty CSV");
  }
  const header = lines[0].split(",").map((h) => h.trim());
  const rows = lines.slice(1).map((l) => l.split(",").map((c) => c.trim()));
  for (const row of rows) {
    if (row.length !== header.length) {
      throw new SchemaError(
        `row has ${row.length} fields, header has ${header.length}`,
      );
    }
  }
  if (rows.length === 0) {
    throw new SchemaError("CSV has a header but no data rows");
  }
  return { header, rows };
}

export function readCsv(path: string): Table {
  return parseCsv(readFileSync(path, "utf8"));
}

/** Extract named numeric columns; throws SchemaError naming the column. */
export function numericColumns(
  table: Table,
  names: string[],
): Map<string, number[]> {
  const out = new Map<string, number[]>();
  for (const name of names) {
    const idx = table.header.indexOf(name);
    if (idx < 0) {
      throw new SchemaError(`missing column: ${name}`);
    }
    const col = table.rows.map((r) => {
      const v = Number(r[idx]);
      if (!Number.isFinite(v)) {
        throw new SchemaError(`non-numeric value in column ${name}: ${r[idx]}`);
      }
      return v;
    });
    out.set(name, col);
  }
  return out;
}
