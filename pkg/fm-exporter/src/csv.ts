import * as fs from 'fs';

export interface NumericTable {
  columns: string[];
  rows: number[][];
}

export function readCsv(path: string): NumericTable {
  const text = fs.readFileSync(path, 'utf-8');
  const lines = text.split(/\r?\n/);
  if (lines[lines.length - 1] === '') lines.pop();
  if (lines.length < 2) throw new Error(`${path}: need a header line and at least one data row`);
  const columns = lines[0].split(',').map(s => s.trim());
  const rows = lines.slice(1).map((line, i) => {
    const cells = line.split(',');
    if (cells.length !== columns.length) {
      throw new Error(`${path} row ${i + 1}: expected ${columns.length} cells, got ${cells.length}`);
    }
    return cells.map((cell, j) => {
      const value = Number(cell.trim());
      if (cell.trim() === '' || !Number.isFinite(value)) {
        throw new Error(`${path} row ${i + 1}: non-numeric value "${cell.trim()}" in column ${columns[j]}`);
      }
      return value;
    });
  });
  return { columns, rows };
}

export function splitTarget(table: NumericTable, target: string): { features: number[][]; response: number[] } {
  const t = table.columns.indexOf(target);
  if (t < 0) throw new Error(`target column "${target}" not in header [${table.columns.join(', ')}]`);
  return {
    features: table.rows.map(row => row.filter((_, j) => j !== t)),
    response: table.rows.map(row => row[t]),
  };
}
