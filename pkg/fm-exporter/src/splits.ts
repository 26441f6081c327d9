import * as fs from 'fs';
import * as path from 'path';

export interface SplitIndex {
  dataset: string;
  nTrain: number;
  rep: number;
  masterSeed: number;
  train: number[];
  test: number[];
}

function intField(obj: Record<string, unknown>, key: string, file: string): number {
  const v = obj[key];
  if (typeof v !== 'number' || !Number.isInteger(v)) throw new Error(`${file}: "${key}" must be an integer`);
  return v;
}

function indexArray(obj: Record<string, unknown>, key: string, file: string): number[] {
  const v = obj[key];
  if (!Array.isArray(v) || v.length === 0) throw new Error(`${file}: "${key}" must be a non-empty array`);
  for (const item of v) {
    if (typeof item !== 'number' || !Number.isInteger(item) || item < 0) {
      throw new Error(`${file}: "${key}" holds a non-index entry ${JSON.stringify(item)}`);
    }
  }
  return v as number[];
}

export function readSplitFile(file: string): SplitIndex {
  const obj = JSON.parse(fs.readFileSync(file, 'utf-8'));
  if (typeof obj !== 'object' || obj === null || Array.isArray(obj)) {
    throw new Error(`${file}: split file must hold a JSON object`);
  }
  const rec = obj as Record<string, unknown>;
  if (typeof rec.dataset !== 'string' || rec.dataset === '') throw new Error(`${file}: "dataset" must be a string`);
  const split: SplitIndex = {
    dataset: rec.dataset,
    nTrain: intField(rec, 'n_train', file),
    rep: intField(rec, 'rep', file),
    masterSeed: intField(rec, 'master_seed', file),
    train: indexArray(rec, 'train', file),
    test: indexArray(rec, 'test', file),
  };
  if (split.train.length !== split.nTrain) {
    throw new Error(`${file}: n_train=${split.nTrain} but ${split.train.length} train indices`);
  }
  return split;
}

// A splits directory usually holds one file per (n, rep); callers narrow with
// n/rep when it holds more than one.
export function resolveSplitFile(splits: string, n?: number, rep?: number): string {
  if (fs.statSync(splits).isFile()) return splits;
  let names = fs.readdirSync(splits).filter(f => /^splits_\d+_\d+\.json$/.test(f)).sort();
  if (n !== undefined) names = names.filter(f => f.startsWith(`splits_${n}_`));
  if (rep !== undefined) names = names.filter(f => f.endsWith(`_${rep}.json`));
  if (names.length === 0) throw new Error(`no matching split files in ${splits}`);
  if (names.length > 1) throw new Error(`${names.length} split files match in ${splits}; narrow with --n/--rep`);
  return path.join(splits, names[0]);
}
