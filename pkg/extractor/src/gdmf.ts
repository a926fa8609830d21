/**
 * GDMF binary container: little-endian header (magic "GDMF", u32 version,
 * u32 feature dimension, u64 record count) followed by fixed-width records
 * of five u32 ids (session, sequence, frame index, instance, category) and
 * the feature vector as float32. Header is 20 bytes, each record 20 + 4D.
 */

import { openSync, writeSync, closeSync, readFileSync } from 'node:fs';

export const GDMF_MAGIC = 'GDMF';
export const GDMF_VERSION = 1;
export const HEADER_SIZE = 20;

export interface FrameRecord {
  session: number;
  sequence: number;
  frame: number;
  instance: number;
  category: number;
  features: Float32Array;
}

export function recordSize(dim: number): number {
  return 20 + 4 * dim;
}

export class GdmfWriter {
  private readonly fd: number;
  private readonly dim: number;
  private count = 0;
  private closed = false;

  constructor(path: string, dim: number) {
    if (dim < 1) throw new Error(`invalid feature dimension ${dim}`);
    this.dim = dim;
    this.fd = openSync(path, 'w');
    // Placeholder count; finalized in close().
    writeSync(this.fd, header(dim, 0), 0, HEADER_SIZE, 0);
  }

  write(record: FrameRecord): void {
    if (this.closed) throw new Error('writer already closed');
    if (record.features.length !== this.dim) {
      throw new Error(
        `feature length ${record.features.length} != dimension ${this.dim}`,
      );
    }
    const buf = Buffer.alloc(recordSize(this.dim));
    buf.writeUInt32LE(record.session, 0);
    buf.writeUInt32LE(record.sequence, 4);
    buf.writeUInt32LE(record.frame, 8);
    buf.writeUInt32LE(record.instance, 12);
    buf.writeUInt32LE(record.category, 16);
    for (let i = 0; i < this.dim; i++) {
      buf.writeFloatLE(record.features[i], 20 + 4 * i);
    }
    writeSync(this.fd, buf, 0, buf.length, HEADER_SIZE + this.count * buf.length);
    this.count += 1;
  }

  close(): number {
    if (this.closed) return this.count;
    writeSync(this.fd, header(this.dim, this.count), 0, HEADER_SIZE, 0);
    closeSync(this.fd);
    this.closed = true;
    return this.count;
  }
}

function header(dim: number, count: number): Buffer {
  const buf = Buffer.alloc(HEADER_SIZE);
  buf.write(GDMF_MAGIC, 0, 'ascii');
  buf.writeUInt32LE(GDMF_VERSION, 4);
  buf.writeUInt32LE(dim, 8);
  buf.writeBigUInt64LE(BigInt(count), 12);
  return buf;
}

/** Read a GDMF file back; used by tests to verify round trips. */
export function readGdmf(path: string): { dim: number; records: FrameRecord[] } {
  const buf = readFileSync(path);
  if (buf.length < HEADER_SIZE) throw new Error('truncated header');
  if (buf.toString('ascii', 0, 4) !== GDMF_MAGIC) throw new Error('bad magic');
  const version = buf.readUInt32LE(4);
  if (version !== GDMF_VERSION) throw new Error(`unsupported version ${version}`);
  const dim = buf.readUInt32LE(8);
  const count = Number(buf.readBigUInt64LE(12));
  const size = recordSize(dim);
  if (buf.length !== HEADER_SIZE + count * size) {
    throw new Error(
      `size mismatch: ${buf.length} bytes for ${count} records of ${size}`,
    );
  }
  const records: FrameRecord[] = [];
  for (let i = 0; i < count; i++) {
    const base = HEADER_SIZE + i * size;
    const features = new Float32Array(dim);
    for (let j = 0; j < dim; j++) {
      features[j] = buf.readFloatLE(base + 20 + 4 * j);
    }
    records.push({
      session: buf.readUInt32LE(base),
      sequence: buf.readUInt32LE(base + 4),
      frame: buf.readUInt32LE(base + 8),
      instance: buf.readUInt32LE(base + 12),
      category: buf.readUInt32LE(base + 16),
      features,
    });
  }
  return { dim, records };
}
