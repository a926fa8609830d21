import { mkdirSync, mkdtempSync, readFileSync, writeFileSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { describe, expect, it } from 'vitest';

import { extract } from '../src/extract.js';
import { readGdmf } from '../src/gdmf.js';
import { categoryOfObject, makeManifest } from '../src/manifest.js';
import { buildTree, makePng, objectColor } from './helpers.js';

function tmp(): string {
  return mkdtempSync(join(tmpdir(), 'extract-'));
}

const quiet = () => {};

describe('labeling rule', () => {
  it('groups objects five per category', () => {
    expect(categoryOfObject(1, 5)).toBe(1);
    expect(categoryOfObject(5, 5)).toBe(1);
    expect(categoryOfObject(6, 5)).toBe(2);
    expect(categoryOfObject(50, 5)).toBe(10);
  });
});

describe('extract', () => {
  it('keeps every Nth frame: 10 images at factor 2 give 5 records', () => {
    const root = tmp();
    buildTree(root, { sessions: [1], objects: [1], framesPerSequence: 10 });
    const out = join(root, 'out.gdmf');
    const report = extract(makeManifest(root, { subsample: 2 }), out, quiet);
    expect(report.framesWritten).toBe(5);
    const { dim, records } = readGdmf(out);
    expect(dim).toBe(256);
    expect(records.map((r) => r.frame)).toEqual([0, 1, 2, 3, 4]);
  });

  it('derives labels from the directory convention', () => {
    const root = tmp();
    buildTree(root, {
      sessions: [1, 2],
      objects: [1, 6],
      framesPerSequence: 4,
    });
    const out = join(root, 'out.gdmf');
    extract(makeManifest(root, { subsample: 1 }), out, quiet);
    const { records } = readGdmf(out);
    expect(records).toHaveLength(2 * 2 * 4);
    for (const record of records) {
      expect(record.category).toBe(record.instance <= 5 ? 1 : 2);
    }
    // One sequence id per (session, object) pair, frames contiguous.
    const sequences = new Set(records.map((r) => r.sequence));
    expect(sequences.size).toBe(4);
  });

  it('skips unreadable images with a warning but keeps going', () => {
    const root = tmp();
    buildTree(root, { sessions: [1], objects: [1], framesPerSequence: 3 });
    writeFileSync(join(root, 's1', 'o1', 'frame_000.png'), 'not a png');
    const out = join(root, 'out.gdmf');
    const warnings: string[] = [];
    const report = extract(
      makeManifest(root, { subsample: 1 }),
      out,
      (m) => warnings.push(m),
    );
    expect(report.framesSkipped).toBe(1);
    expect(report.framesWritten).toBe(2);
    expect(warnings[0]).toMatch(/skipping unreadable image/);
    // Retained frames are reindexed contiguously from zero.
    const { records } = readGdmf(out);
    expect(records.map((r) => r.frame)).toEqual([0, 1]);
  });

  it('fails hard when nothing can be extracted', () => {
    const root = tmp();
    const dir = join(root, 's1', 'o1');
    mkdirSync(dir, { recursive: true });
    writeFileSync(join(dir, 'a.png'), 'junk');
    expect(() => extract(makeManifest(root), join(root, 'out.gdmf'), quiet))
      .toThrow(/no frames extracted/);
    expect(() => extract(makeManifest(tmp()), join(root, 'o2.gdmf'), quiet))
      .toThrow(/no s<session>/);
  });

  it('is deterministic: repeat runs produce identical bytes', () => {
    const root = tmp();
    buildTree(root, {
      sessions: [1, 2],
      objects: [1, 2],
      framesPerSequence: 6,
    });
    const a = join(root, 'a.gdmf');
    const b = join(root, 'b.gdmf');
    extract(makeManifest(root), a, quiet);
    extract(makeManifest(root), b, quiet);
    expect(readFileSync(a).equals(readFileSync(b))).toBe(true);
    // A different projection seed changes the features.
    const c = join(root, 'c.gdmf');
    extract(makeManifest(root, { seed: 1 }), c, quiet);
    expect(readFileSync(a).equals(readFileSync(c))).toBe(false);
  });

  it('rejects unknown backbones', () => {
    const root = tmp();
    buildTree(root, { sessions: [1], objects: [1], framesPerSequence: 2 });
    expect(() =>
      extract(makeManifest(root, { backbone: 'vgg-telepathy' }),
        join(root, 'out.gdmf'), quiet),
    ).toThrow(/unknown backbone/);
  });

  it('features react to image content', () => {
    const root = tmp();
    const d1 = join(root, 's1', 'o1');
    const d2 = join(root, 's1', 'o6');
    mkdirSync(d1, { recursive: true });
    mkdirSync(d2, { recursive: true });
    writeFileSync(join(d1, 'f.png'), makePng(24, 24, objectColor(1)));
    writeFileSync(join(d2, 'f.png'), makePng(24, 24, objectColor(6)));
    const out = join(root, 'out.gdmf');
    extract(makeManifest(root, { subsample: 1 }), out, quiet);
    const { records } = readGdmf(out);
    const [a, b] = records;
    let dist = 0;
    for (let i = 0; i < a.features.length; i++) {
      dist += (a.features[i] - b.features[i]) ** 2;
    }
    expect(dist).toBeGreaterThan(0.1);
  });
});
