import { normalCdf, normalPpf } from './gaussian';

export const MODEL_TAGS = ['tabpfn', 'realtabpfn', 'tabicl'] as const;
export type ModelTag = (typeof MODEL_TAGS)[number];

// Rows a pretrained model accepts as in-context examples in one forward pass.
export const CONTEXT_LIMIT = 50000;

export const QUANTILE_LEVELS: readonly number[] = Array.from({ length: 199 }, (_, k) => (k + 1) * 0.005);

export interface BarOutput {
  edges: number[];
  masses: number[];
}

export interface QuantileOutput {
  levels: number[];
  values: number[];
}

export interface LinearGaussianFit {
  weights: number[];
  residSd: number;
}

function solve(a: number[][], b: number[]): number[] {
  const n = b.length;
  for (let col = 0; col < n; col++) {
    let pivot = col;
    for (let r = col + 1; r < n; r++) {
      if (Math.abs(a[r][col]) > Math.abs(a[pivot][col])) pivot = r;
    }
    if (Math.abs(a[pivot][col]) < 1e-12) throw new Error('design matrix is singular');
    [a[col], a[pivot]] = [a[pivot], a[col]];
    [b[col], b[pivot]] = [b[pivot], b[col]];
    for (let r = 0; r < n; r++) {
      if (r === col) continue;
      const f = a[r][col] / a[col][col];
      for (let c = col; c < n; c++) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  return b.map((v, i) => v / a[i][i]);
}

export function fitLinearGaussian(features: number[][], response: number[]): LinearGaussianFit {
  const n = features.length;
  const d = features[0].length + 1;
  const xtx: number[][] = Array.from({ length: d }, () => new Array(d).fill(0));
  const xty = new Array(d).fill(0);
  for (let i = 0; i < n; i++) {
    const row = [1, ...features[i]];
    for (let a = 0; a < d; a++) {
      xty[a] += row[a] * response[i];
      for (let b = 0; b < d; b++) xtx[a][b] += row[a] * row[b];
    }
  }
  const weights = solve(xtx, xty);
  let ssr = 0;
  for (let i = 0; i < n; i++) {
    const row = [1, ...features[i]];
    const resid = response[i] - row.reduce((acc, v, j) => acc + v * weights[j], 0);
    ssr += resid * resid;
  }
  const residSd = Math.max(Math.sqrt(ssr / Math.max(1, n - d)), 1e-9);
  return { weights, residSd };
}

export function predictMean(fit: LinearGaussianFit, x: number[]): number {
  return x.reduce((acc, v, j) => acc + v * fit.weights[j + 1], fit.weights[0]);
}

function gaussianBars(fit: LinearGaussianFit, x: number[], bins: number, halfWidthSds: number): BarOutput {
  const m = predictMean(fit, x);
  const s = fit.residSd;
  const lo = m - halfWidthSds * s;
  const step = (2 * halfWidthSds * s) / bins;
  const edges = Array.from({ length: bins + 1 }, (_, i) => lo + step * i);
  const cdf = edges.map(e => normalCdf(e, m, s));
  let masses = cdf.slice(1).map((v, i) => Math.max(v - cdf[i], 0));
  const total = masses.reduce((acc, v) => acc + v, 0);
  masses = masses.map(v => v / total);
  return { edges, masses };
}

// The stand-ins mimic each model's native output shape on a linear-Gaussian fit.
export function tabpfnBars(fit: LinearGaussianFit, x: number[]): BarOutput {
  return gaussianBars(fit, x, 50, 4);
}

export function realtabpfnBars(fit: LinearGaussianFit, x: number[]): BarOutput {
  return gaussianBars(fit, x, 32, 3.5);
}

export function tabiclQuantiles(fit: LinearGaussianFit, x: number[], row: number): QuantileOutput {
  const m = predictMean(fit, x);
  const s = fit.residSd;
  const values = QUANTILE_LEVELS.map(level => m + s * normalPpf(level));
  // Ensembled quantile heads cross now and then; reproduce that with sparse
  // deterministic neighbor swaps and leave the sorting to the reader.
  for (let k = 0; k + 1 < values.length; k++) {
    if ((row * 199 + k) % 37 === 0) {
      const tmp = values[k];
      values[k] = values[k + 1];
      values[k + 1] = tmp;
    }
  }
  return { levels: [...QUANTILE_LEVELS], values };
}
