import { readFileSync } from 'fs';
import { CSV_COLUMNS, SchemaMismatch, SweepRow } from './types.js';

/** Parse a sweep CSV, validating the header against the harness schema. */
export function parseSweepCsv(path: string): SweepRow[] {
  const text = readFileSync(path, 'utf-8');
  const lines = text.split('\n').filter((line) => line.trim().length > 0);
  if (lines.length === 0) {
    throw new SchemaMismatch(`${path}: empty file`);
  }
  const header = lines[0].split(',').map((h) => h.trim());
  for (const col of CSV_COLUMNS) {
    if (!header.includes(col)) {
      throw new SchemaMismatch(`${path}: missing column '${col}'`);
    }
  }
  for (const col of header) {
    if (!(CSV_COLUMNS as readonly string[]).includes(col)) {
      throw new SchemaMismatch(`${path}: unknown column '${col}'`);
    }
  }
  const idx = new Map(header.map((h, i) => [h, i]));
  const rows: SweepRow[] = [];
  for (let i = 1; i < lines.length; i++) {
    const parts = lines[i].split(',');
    if (parts.length !== header.length) {
      throw new SchemaMismatch(
        `${path}:${i + 1}: expected ${header.length} fields, got ${parts.length}`,
      );
    }
    const field = (name: string) => parts[idx.get(name)!].trim();
    const num = (name: string) => Number(field(name));
    rows.push({
      scheme: field('scheme'),
      sweep_param: field('sweep_param'),
      sweep_value: num('sweep_value'),
      trial: num('trial'),
      seed: num('seed'),
      user: num('user'),
      ee_bits_hz_j: num('ee_bits_hz_j'),
      min_ee: num('min_ee'),
      move_dist_norm: num('move_dist_norm'),
      avg_move_dist_norm: num('avg_move_dist_norm'),
      iterations: num('iterations'),
      feasible: field('feasible') === '1' || field('feasible') === 'true',
      wall_ms: num('wall_ms'),
    });
  }
  return rows;
}
