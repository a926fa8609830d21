#!/usr/bin/env node
/**
 * gdmf-extract: featurize a CORe50-style image directory into a GDMF file.
 *
 * Usage: gdmf-extract <image-root> --out features.gdmf [options]
 *
 * Exit codes: 0 success, 1 usage error, 2 data error.
 */

import { parseArgs } from 'node:util';
import { pathToFileURL } from 'node:url';

import { extract } from './extract.js';
import { DEFAULT_MANIFEST, makeManifest } from './manifest.js';

export function main(argv: string[]): number {
  let parsed;
  try {
    parsed = parseArgs({
      args: argv,
      allowPositionals: true,
      options: {
        out: { type: 'string' },
        dim: { type: 'string' },
        subsample: { type: 'string' },
        backbone: { type: 'string' },
        seed: { type: 'string' },
        'objects-per-category': { type: 'string' },
        help: { type: 'boolean' },
      },
    });
  } catch (err) {
    console.error(`usage error: ${String(err)}`);
    return 1;
  }
  if (parsed.values.help) {
    printUsage();
    return 0;
  }
  if (parsed.positionals.length !== 1 || !parsed.values.out) {
    console.error('usage error: expected <image-root> and --out <file>');
    printUsage();
    return 1;
  }
  let manifest;
  try {
    manifest = makeManifest(parsed.positionals[0], {
      targetDim: intFlag(parsed.values.dim, DEFAULT_MANIFEST.targetDim),
      subsample: intFlag(parsed.values.subsample, DEFAULT_MANIFEST.subsample),
      backbone: parsed.values.backbone ?? DEFAULT_MANIFEST.backbone,
      seed: intFlag(parsed.values.seed, DEFAULT_MANIFEST.seed),
      objectsPerCategory: intFlag(
        parsed.values['objects-per-category'],
        DEFAULT_MANIFEST.objectsPerCategory,
      ),
    });
  } catch (err) {
    console.error(`usage error: ${(err as Error).message}`);
    return 1;
  }
  try {
    const report = extract(manifest, parsed.values.out);
    console.log(
      `wrote ${report.framesWritten} frames ` +
        `(${report.sequences} sequences, dim=${manifest.targetDim}) ` +
        `to ${parsed.values.out}` +
        (report.framesSkipped ? `; skipped ${report.framesSkipped}` : ''),
    );
    return 0;
  } catch (err) {
    console.error(`data error: ${(err as Error).message}`);
    return 2;
  }
}

function intFlag(raw: string | undefined, fallback: number): number {
  if (raw === undefined) return fallback;
  const value = Number(raw);
  if (!Number.isInteger(value)) throw new Error(`not an integer: ${raw}`);
  return value;
}

function printUsage(): void {
  console.error(
    'usage: gdmf-extract <image-root> --out <file.gdmf>\n' +
      '  --dim N                   feature dimension (default 256)\n' +
      '  --subsample N             keep every Nth frame (default 4)\n' +
      '  --backbone NAME           feature backbone (default patch-stats-v1)\n' +
      '  --seed N                  compression projection seed (default 0)\n' +
      '  --objects-per-category N  labeling rule (default 5)',
  );
}

if (process.argv[1] && import.meta.url === pathToFileURL(process.argv[1]).href) {
  process.exit(main(process.argv.slice(2)));
}
