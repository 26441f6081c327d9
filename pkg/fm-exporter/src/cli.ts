#!/usr/bin/env node
import { ExportError, ExportJob, runExport } from './exporter';
import { ModelTag } from './models';
import { resolveSplitFile } from './splits';

const USAGE =
  'usage: fm-export --model <tag> --dataset <csv> --target <col> --splits <dir-or-file> --out <jsonl> [--n <int>] [--rep <int>]';

interface CliOptions {
  model: string;
  dataset: string;
  target: string;
  splits: string;
  out: string;
  n?: number;
  rep?: number;
}

function parseArgs(argv: string[]): CliOptions {
  const opts: Partial<CliOptions> = {};
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i];
    const value = argv[i + 1];
    if (value === undefined) throw new Error(`missing value for ${flag}`);
    switch (flag) {
      case '--model': opts.model = value; break;
      case '--dataset': opts.dataset = value; break;
      case '--target': opts.target = value; break;
      case '--splits': opts.splits = value; break;
      case '--out': opts.out = value; break;
      case '--n':
      case '--rep': {
        const parsed = Number(value);
        if (!Number.isInteger(parsed) || parsed < 0) throw new Error(`${flag} expects a non-negative integer`);
        if (flag === '--n') opts.n = parsed;
        else opts.rep = parsed;
        break;
      }
      default: throw new Error(`unknown flag ${flag}`);
    }
  }
  for (const key of ['model', 'dataset', 'target', 'splits', 'out'] as const) {
    if (opts[key] === undefined) throw new Error(`--${key} is required`);
  }
  return opts as CliOptions;
}

export function main(argv: string[]): number {
  let opts: CliOptions;
  try {
    opts = parseArgs(argv);
  } catch (err) {
    console.error(err instanceof Error ? err.message : String(err));
    console.error(USAGE);
    return 2;
  }
  try {
    const job: ExportJob = {
      datasetPath: opts.dataset,
      target: opts.target,
      splitFile: resolveSplitFile(opts.splits, opts.n, opts.rep),
      model: opts.model as ModelTag,
      outPath: opts.out,
    };
    const { records } = runExport(job);
    console.log(`wrote ${records} records to ${opts.out}`);
    return 0;
  } catch (err) {
    const reason = err instanceof ExportError ? err.reason : 'export-failed';
    const detail = err instanceof Error ? err.message : String(err);
    console.error(JSON.stringify({ error: reason, detail }));
    return 1;
  }
}

if (require.main === module) {
  process.exit(main(process.argv.slice(2)));
}
