/**
 * Minimal CSV reader for the harness outputs: header row, comma-separated,
 * no quoting (the producer never emits commas inside cells).
 */

import { readFileSync } from "fs";

export interface Table {
  columns: string[];
  rows: Record<string, string>[];
}

export function parseCsv(text: string): Table {
  const lines = text.split(/\r?\n/).filter((l) => l.length > 0);
  if (lines.length === 0) {
    throw new Error("empty CSV");
  }
  const columns = lines[0].split(",");
  const rows = lines.slice(1).map((line) => {
    const cells = line.split(",");
    const row: Record<string, string> = {};
    columns.forEach((c, i) => {
      row[c] = cells[i] ?? "";
    });
    return row;
  });
  return { columns, rows };
}

export function readCsv(path: string): Table {
  return parseCsv(readFileSync(path, "utf-8"));
}

/** Numeric view of one column; empty cells become NaN. */
export function numericColumn(table: Table, name: string): number[] {
  return table.rows.map((r) => (r[name] === "" ? NaN : Number(r[name])));
}
