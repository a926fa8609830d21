/**
 * Extraction manifest: what to read, how to label it, and how to compress.
 *
 * The expected directory layout follows the CORe50 convention:
 * `root/s<session>/o<object>/<frames>.png`, frames ordered by file name.
 * Objects are grouped five per category, so object M belongs to category
 * ceil(M / 5).
 */

export interface ExtractionManifest {
  /** Directory holding `s<session>/o<object>` folders. */
  imageRoot: string;
  /** Feature dimension written to the GDMF header. */
  targetDim: number;
  /**
   * Keep every Nth frame of each sequence. The default 4 reduces a
   * 20 frames-per-second recording to 5 per second.
   */
  subsample: number;
  /** Identifier of the built-in feature backbone. */
  backbone: string;
  /** Seed of the fixed random compression projection. */
  seed: number;
  /** Objects per category in the labeling rule. */
  objectsPerCategory: number;
}

export const DEFAULT_MANIFEST: Omit<ExtractionManifest, 'imageRoot'> = {
  targetDim: 256,
  subsample: 4,
  backbone: 'patch-stats-v1',
  seed: 0,
  objectsPerCategory: 5,
};

export function makeManifest(
  imageRoot: string,
  overrides: Partial<ExtractionManifest> = {},
): ExtractionManifest {
  const manifest = { ...DEFAULT_MANIFEST, imageRoot, ...overrides };
  if (manifest.targetDim < 1) throw new Error('targetDim must be >= 1');
  if (manifest.subsample < 1) throw new Error('subsample must be >= 1');
  if (manifest.objectsPerCategory < 1) {
    throw new Error('objectsPerCategory must be >= 1');
  }
  return manifest;
}

/** Category of an object id under the grouped-objects labeling rule. */
export function categoryOfObject(
  objectId: number,
  objectsPerCategory: number,
): number {
  return Math.ceil(objectId / objectsPerCategory);
}
