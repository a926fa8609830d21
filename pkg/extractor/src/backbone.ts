/**
 * Built-in image feature backbone.
 *
 * `patch-stats-v1` pools the image into a fixed grid of patches and emits
 * per-patch color means and luminance spread, then compresses to the target
 * dimension with a fixed seeded random projection (the 1x1 compression
 * stage). Everything is deterministic: the same image bytes and seed always
 * produce the same feature vector, so repeat runs are byte-identical.
 */

import { PNG } from 'pngjs';

export const GRID = 6;
export const RAW_DIM = GRID * GRID * 4; // mean R, G, B and luminance std per cell

export interface Backbone {
  name: string;
  rawDim: number;
  rawFeatures(image: PNG): Float64Array;
}

const patchStats: Backbone = {
  name: 'patch-stats-v1',
  rawDim: RAW_DIM,
  rawFeatures(image: PNG): Float64Array {
    const out = new Float64Array(RAW_DIM);
    const { width, height, data } = image;
    for (let gy = 0; gy < GRID; gy++) {
      for (let gx = 0; gx < GRID; gx++) {
        const x0 = Math.floor((gx * width) / GRID);
        const x1 = Math.max(x0 + 1, Math.floor(((gx + 1) * width) / GRID));
        const y0 = Math.floor((gy * height) / GRID);
        const y1 = Math.max(y0 + 1, Math.floor(((gy + 1) * height) / GRID));
        let r = 0;
        let g = 0;
        let b = 0;
        let lum = 0;
        let lum2 = 0;
        let n = 0;
        for (let y = y0; y < y1; y++) {
          for (let x = x0; x < x1; x++) {
            const p = 4 * (y * width + x);
            const pr = data[p] / 255;
            const pg = data[p + 1] / 255;
            const pb = data[p + 2] / 255;
            const pl = 0.299 * pr + 0.587 * pg + 0.114 * pb;
            r += pr;
            g += pg;
            b += pb;
            lum += pl;
            lum2 += pl * pl;
            n += 1;
          }
        }
        const cell = 4 * (gy * GRID + gx);
        out[cell] = r / n;
        out[cell + 1] = g / n;
        out[cell + 2] = b / n;
        const variance = Math.max(0, lum2 / n - (lum / n) ** 2);
        out[cell + 3] = Math.sqrt(variance);
      }
    }
    return out;
  },
};

const BACKBONES: Record<string, Backbone> = {
  [patchStats.name]: patchStats,
};

export function getBackbone(name: string): Backbone {
  const backbone = BACKBONES[name];
  if (!backbone) {
    throw new Error(
      `unknown backbone ${JSON.stringify(name)}; ` +
        `available: ${Object.keys(BACKBONES).join(', ')}`,
    );
  }
  return backbone;
}

/** Deterministic 32-bit PRNG (mulberry32) for the projection matrix. */
function mulberry32(seed: number): () => number {
  let state = seed >>> 0;
  return () => {
    state = (state + 0x6d2b79f5) >>> 0;
    let t = state;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

export class Compressor {
  readonly inDim: number;
  readonly outDim: number;
  private readonly matrix: Float64Array;

  constructor(inDim: number, outDim: number, seed: number) {
    this.inDim = inDim;
    this.outDim = outDim;
    const rand = mulberry32(seed);
    const scale = 1 / Math.sqrt(inDim);
    this.matrix = new Float64Array(inDim * outDim);
    for (let i = 0; i < this.matrix.length; i++) {
      this.matrix[i] = (2 * rand() - 1) * scale;
    }
  }

  apply(raw: Float64Array): Float32Array {
    if (raw.length !== this.inDim) {
      throw new Error(`raw length ${raw.length} != ${this.inDim}`);
    }
    const out = new Float32Array(this.outDim);
    for (let o = 0; o < this.outDim; o++) {
      let acc = 0;
      const row = o * this.inDim;
      for (let i = 0; i < this.inDim; i++) {
        acc += this.matrix[row + i] * raw[i];
      }
      out[o] = acc;
    }
    return out;
  }
}
