/** Synthetic CORe50-style image trees for tests. */

import { mkdirSync, writeFileSync } from 'node:fs';
import { join } from 'node:path';
import { PNG } from 'pngjs';

export type ColorFn = (
  x: number,
  y: number,
  frame: number,
) => [number, number, number];

export function makePng(width: number, height: number, color: ColorFn, frame = 0): Buffer {
  const png = new PNG({ width, height });
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const [r, g, b] = color(x, y, frame);
      const p = 4 * (y * width + x);
      png.data[p] = r;
      png.data[p + 1] = g;
      png.data[p + 2] = b;
      png.data[p + 3] = 255;
    }
  }
  return PNG.sync.write(png);
}

/** Deterministic per-object coloring: category sets the hue, the object
 * sets the lightness, and the frame adds a drifting stripe so consecutive
 * frames are correlated but not identical. */
export function objectColor(objectId: number, objectsPerCategory = 5): ColorFn {
  const category = Math.ceil(objectId / objectsPerCategory);
  const base: [number, number, number] =
    category % 2 === 1 ? [200, 40, 30] : [30, 50, 210];
  const lightness = 20 * ((objectId - 1) % objectsPerCategory);
  return (x, y, frame) => {
    const stripe = (x + 2 * frame) % 8 < 4 ? 25 : 0;
    return [
      Math.min(255, base[0] + lightness + stripe),
      Math.min(255, base[1] + lightness),
      Math.min(255, base[2] + lightness + stripe),
    ];
  };
}

export interface TreeSpec {
  sessions: number[];
  objects: number[];
  framesPerSequence: number;
  width?: number;
  height?: number;
  objectsPerCategory?: number;
}

export function buildTree(root: string, spec: TreeSpec): void {
  const width = spec.width ?? 24;
  const height = spec.height ?? 24;
  for (const session of spec.sessions) {
    for (const object of spec.objects) {
      const dir = join(root, `s${session}`, `o${object}`);
      mkdirSync(dir, { recursive: true });
      const color = objectColor(object, spec.objectsPerCategory ?? 5);
      for (let frame = 0; frame < spec.framesPerSequence; frame++) {
        const name = `frame_${String(frame).padStart(3, '0')}.png`;
        // Sessions shift the phase so each sequence is distinct.
        writeFileSync(join(dir, name), makePng(width, height, color, frame + 3 * session));
      }
    }
  }
}
