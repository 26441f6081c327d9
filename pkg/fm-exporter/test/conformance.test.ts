import { execFileSync } from 'child_process';
import * as fs from 'fs';
import * as os from 'os';
import * as path from 'path';
import { afterAll, describe, expect, it } from 'vitest';

// The committed fixtures have to satisfy the benchmark's own reader and
// scorer, not just this package's expectations.

const FIXTURES = path.resolve(__dirname, '..', 'fixtures');
const EXPORTS = ['tabpfn_rep0.jsonl', 'realtabpfn_rep0.jsonl', 'tabicl_rep0.jsonl'];

const tmp = fs.mkdtempSync(path.join(os.tmpdir(), 'fmx-conform-'));
afterAll(() => fs.rmSync(tmp, { recursive: true, force: true }));

const VALIDATE = `
import sys
from cdebench.interchange import read_predictions
header, records = read_predictions(sys.argv[1])
print(header.method, len(records), sorted({r.kind for r in records}))
`;

function truthCsv(): string {
  const split = JSON.parse(fs.readFileSync(path.join(FIXTURES, 'splits', 'splits_24_0.json'), 'utf-8'));
  const lines = fs.readFileSync(path.join(FIXTURES, 'example.csv'), 'utf-8').split('\n');
  const out = [lines[0], ...split.test.map((i: number) => lines[1 + i])];
  const p = path.join(tmp, 'truth_rep0.csv');
  fs.writeFileSync(p, out.join('\n') + '\n');
  return p;
}

describe('fixture exports against the benchmark package', () => {
  it.each(EXPORTS)('%s passes the interchange reader', file => {
    const stdout = execFileSync('python3', ['-c', VALIDATE, path.join(FIXTURES, 'exports', file)], {
      encoding: 'utf-8',
    });
    const [method, count, kinds] = stdout.trim().split(' ');
    expect(['TabPFN', 'RealTabPFN', 'TabICL']).toContain(method);
    expect(Number(count)).toBe(8);
    expect(kinds).toBe(file.startsWith('tabicl') ? "['quantiles']" : "['bar']");
  });

  it.each(EXPORTS)('%s scores end to end', file => {
    const stdout = execFileSync('cdebench', [
      'score',
      '--pred', path.join(FIXTURES, 'exports', file),
      '--truth', truthCsv(),
      '--target', 'y',
    ], { encoding: 'utf-8' });
    const metrics = new Map(stdout.trim().split('\n').map(line => {
      const [name, value] = line.split(': ');
      return [name, Number(value)] as const;
    }));
    for (const name of ['cde_loss', 'log_lik', 'crps', 'pit_ks', 'coverage90', 'total_time_s']) {
      expect(metrics.has(name), `missing ${name}`).toBe(true);
      expect(Number.isFinite(metrics.get(name)), `${name} not finite`).toBe(true);
    }
    expect(metrics.get('coverage90')).toBeGreaterThanOrEqual(0);
    expect(metrics.get('coverage90')).toBeLessThanOrEqual(1);
  });
});
