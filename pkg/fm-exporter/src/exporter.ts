import * as fs from 'fs';
import * as path from 'path';
import { readCsv, splitTarget } from './csv';
import { readSplitFile } from './splits';
import {
  CONTEXT_LIMIT,
  MODEL_TAGS,
  ModelTag,
  fitLinearGaussian,
  realtabpfnBars,
  tabiclQuantiles,
  tabpfnBars,
} from './models';

export const MODEL_NAMES: Record<ModelTag, string> = {
  tabpfn: 'TabPFN',
  realtabpfn: 'RealTabPFN',
  tabicl: 'TabICL',
};

export class ExportError extends Error {
  constructor(readonly reason: string, message: string) {
    super(message);
  }
}

export interface ExportJob {
  datasetPath: string;
  target: string;
  splitFile: string;
  model: ModelTag;
  outPath: string;
}

let lockCache: Record<string, { package: string; version: string }> | undefined;

export function modelVersion(tag: ModelTag): string {
  if (!lockCache) {
    const lockPath = path.join(__dirname, '..', 'models.lock.json');
    lockCache = JSON.parse(fs.readFileSync(lockPath, 'utf-8'));
  }
  const entry = lockCache![tag];
  if (!entry) throw new ExportError('unknown-model', `model tag "${tag}" missing from models.lock.json`);
  return `${entry.package}==${entry.version}`;
}

export function runExport(job: ExportJob): { records: number } {
  if (!(MODEL_TAGS as readonly string[]).includes(job.model)) {
    throw new ExportError('unknown-model', `unknown model tag "${job.model}"; expected one of ${MODEL_TAGS.join(', ')}`);
  }
  const version = modelVersion(job.model);
  const split = readSplitFile(job.splitFile);
  const table = readCsv(job.datasetPath);
  const { features, response } = splitTarget(table, job.target);
  for (const idx of [...split.train, ...split.test]) {
    if (idx >= features.length) {
      throw new ExportError('index-out-of-bounds', `split index ${idx} outside dataset of ${features.length} rows`);
    }
  }
  if (split.train.length > CONTEXT_LIMIT) {
    throw new ExportError('context-limit', `${split.train.length} training rows exceed the ${CONTEXT_LIMIT}-row context window`);
  }

  const fitStart = process.hrtime.bigint();
  const fit = fitLinearGaussian(
    split.train.map(i => features[i]),
    split.train.map(i => response[i]),
  );
  const fitEnd = process.hrtime.bigint();

  // One record per test row, in split-file order; shapes pass through verbatim.
  const records: object[] = split.test.map((idx, row) => {
    if (job.model === 'tabicl') {
      const q = tabiclQuantiles(fit, features[idx], row);
      return { type: 'quantiles', levels: q.levels, values: q.values };
    }
    const b = job.model === 'tabpfn' ? tabpfnBars(fit, features[idx]) : realtabpfnBars(fit, features[idx]);
    return { type: 'bar', edges: b.edges, masses: b.masses };
  });
  const predictEnd = process.hrtime.bigint();

  const header = {
    method: MODEL_NAMES[job.model],
    dataset: split.dataset,
    rep: split.rep,
    n_train: split.nTrain,
    fit_time_s: Number(fitEnd - fitStart) / 1e9,
    predict_time_s: Number(predictEnd - fitEnd) / 1e9,
    versions: { [job.model]: version },
  };
  const lines = [header, ...records].map(obj => JSON.stringify(obj));
  fs.writeFileSync(job.outPath, lines.join('\n') + '\n');
  return { records: records.length };
}
