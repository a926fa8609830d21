import { execFileSync } from 'node:child_process';
import { mkdtempSync } from 'node:fs';
import { tmpdir } from 'node:os';
import { join } from 'node:path';
import { describe, expect, it } from 'vitest';

import { main } from '../src/cli.js';
import { buildTree } from './helpers.js';

// End-to-end check against the learning engine: a 2-category / 4-object
// subset in the benchmark directory layout must train to better than
// chance category accuracy. Requires the dualmem Python package.

function pythonEngineAvailable(): boolean {
  try {
    execFileSync('python3', ['-c', 'import dualmem'], { stdio: 'ignore' });
    return true;
  } catch {
    return false;
  }
}

describe.skipIf(!pythonEngineAvailable())('end-to-end through the engine', () => {
  it('trains a 2-category/4-object subset to above-chance accuracy', () => {
    const root = mkdtempSync(join(tmpdir(), 'e2e-'));
    buildTree(root, {
      sessions: [1, 2, 3, 4],
      objects: [1, 2, 6, 7],
      framesPerSequence: 12,
    });
    const features = join(root, 'features.gdmf');
    expect(main([root, '--out', features, '--subsample', '2'])).toBe(0);

    const runDir = join(root, 'run');
    const stdout = execFileSync('python3', [
      '-m', 'dualmem.cli', 'train',
      '--data', features,
      '--out', runDir,
      '--scenario', 'batch',
      '--epochs', '5',
      '--trials', '1',
      '--seeds', '0',
      '--test-sessions', '3',
    ]).toString();

    const match = stdout.match(/category_acc=([0-9.]+)/);
    expect(match).not.toBeNull();
    const categoryAcc = Number(match![1]);
    // Two categories: chance is 50 percent.
    expect(categoryAcc).toBeGreaterThan(50);
  }, 120_000);
});
