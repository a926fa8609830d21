/**
 * Walk a CORe50-style directory tree, featurize the retained frames, and
 * write one GDMF file. Output order is deterministic: sessions, objects,
 * and frame files are each processed in ascending order.
 */

import { readdirSync, readFileSync } from 'node:fs';
import { join } from 'node:path';
import { PNG } from 'pngjs';

import { Compressor, getBackbone } from './backbone.js';
import { GdmfWriter } from './gdmf.js';
import { ExtractionManifest, categoryOfObject } from './manifest.js';

export interface ExtractionReport {
  framesWritten: number;
  framesSkipped: number;
  sequences: number;
  warnings: string[];
}

interface SequenceDir {
  session: number;
  object: number;
  dir: string;
}

function numberedSubdirs(root: string, prefix: string): Map<number, string> {
  const out = new Map<number, string>();
  for (const entry of readdirSync(root, { withFileTypes: true })) {
    if (!entry.isDirectory()) continue;
    const match = entry.name.match(new RegExp(`^${prefix}(\\d+)$`));
    if (match) out.set(Number(match[1]), join(root, entry.name));
  }
  return out;
}

function listSequences(imageRoot: string): SequenceDir[] {
  const sequences: SequenceDir[] = [];
  const sessions = numberedSubdirs(imageRoot, 's');
  for (const session of [...sessions.keys()].sort((a, b) => a - b)) {
    const objects = numberedSubdirs(sessions.get(session)!, 'o');
    for (const object of [...objects.keys()].sort((a, b) => a - b)) {
      sequences.push({ session, object, dir: objects.get(object)! });
    }
  }
  return sequences;
}

export function extract(
  manifest: ExtractionManifest,
  outPath: string,
  log: (message: string) => void = console.warn,
): ExtractionReport {
  const backbone = getBackbone(manifest.backbone);
  const compressor = new Compressor(
    backbone.rawDim,
    manifest.targetDim,
    manifest.seed,
  );
  const sequences = listSequences(manifest.imageRoot);
  if (sequences.length === 0) {
    throw new Error(
      `no s<session>/o<object> directories under ${manifest.imageRoot}`,
    );
  }
  const report: ExtractionReport = {
    framesWritten: 0,
    framesSkipped: 0,
    sequences: 0,
    warnings: [],
  };
  const writer = new GdmfWriter(outPath, manifest.targetDim);
  let sequenceId = 0;
  for (const seq of sequences) {
    const files = readdirSync(seq.dir)
      .filter((name) => name.toLowerCase().endsWith('.png'))
      .sort();
    const kept = files.filter((_, index) => index % manifest.subsample === 0);
    if (kept.length === 0) continue;
    sequenceId += 1;
    report.sequences += 1;
    let frame = 0;
    for (const name of kept) {
      const path = join(seq.dir, name);
      let features: Float32Array;
      try {
        const image = PNG.sync.read(readFileSync(path));
        features = compressor.apply(backbone.rawFeatures(image));
      } catch (err) {
        const warning = `skipping unreadable image ${path}: ${String(err)}`;
        report.warnings.push(warning);
        report.framesSkipped += 1;
        log(warning);
        continue;
      }
      writer.write({
        session: seq.session,
        sequence: sequenceId,
        frame,
        instance: seq.object,
        category: categoryOfObject(seq.object, manifest.objectsPerCategory),
        features,
      });
      frame += 1;
      report.framesWritten += 1;
    }
  }
  writer.close();
  if (report.framesWritten === 0) {
    throw new Error('no frames extracted: every candidate image failed');
  }
  return report;
}
