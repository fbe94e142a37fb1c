/** CSV helpers for the pipeline's report files (no quoting: the writers
 * guarantee delimiter-free fields). */

export type Table = { header: string[]; rows: string[][] };

export function parseCsv(text: string): Table {
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0);
  if (lines.length === 0) {
    throw new Error("empty CSV");
  }
  const header = lines[0].split(",");
  const rows = lines.slice(1).map((line) => line.split(","));
  for (const row of rows) {
    if (row.length !== header.length) {
      throw new Error(
        `CSV row has ${row.length} fields, header has ${header.length}`);
    }
  }
  return { header, rows };
}

export function requireColumns(table: Table, names: string[]): Map<string, number> {
  const index = new Map<string, number>();
  for (const name of names) {
    const at = table.header.indexOf(name);
    if (at < 0) {
      throw new Error(`CSV is missing required column "${name}"`);
    }
    index.set(name, at);
  }
  return index;
}
