import { randomBytes } from "node:crypto";
import { renameSync, writeFileSync, readFileSync } from "node:fs";
import { dirname, join } from "node:path";

export const EMB1_MAGIC = "EMB1";
export const EMB1_VERSION = 1;
export const EMB1_HEADER_BYTES = 20;
export const DTYPE_FLOAT32_LE = 0;

export class Emb1FormatError extends Error {
  readonly offset: number;

  constructor(message: string, offset: number) {
    super(`${message} (byte offset ${offset})`);
    this.name = "Emb1FormatError";
    this.offset = offset;
  }
}

export interface EmbeddingMatrix {
  n: number;
  d: number;
  /** Row-major float32 values, length n * d. */
  data: Float32Array;
}

export function matrixFromRows(rows: Float32Array[]): EmbeddingMatrix {
  if (rows.length === 0) {
    throw new Error("embedding matrix needs at least one row");
  }
  const d = rows[0]!.length;
  const data = new Float32Array(rows.length * d);
  rows.forEach((row, i) => {
    if (row.length !== d) {
      throw new Error(`row ${i} has dimension ${row.length}, expected ${d}`);
    }
    data.set(row, i * d);
  });
  return { n: rows.length, d, data };
}

export function encodeEmb1(matrix: EmbeddingMatrix): Buffer {
  const { n, d, data } = matrix;
  if (data.length !== n * d) {
    throw new Error(`payload has ${data.length} values, expected ${n * d}`);
  }
  for (let i = 0; i < data.length; i++) {
    if (!Number.isFinite(data[i]!)) {
      throw new Error(`non-finite value at flat index ${i}`);
    }
  }
  const buf = Buffer.alloc(EMB1_HEADER_BYTES + n * d * 4);
  buf.write(EMB1_MAGIC, 0, "ascii");
  buf.writeUInt32LE(EMB1_VERSION, 4);
  buf.writeUInt32LE(n, 8);
  buf.writeUInt32LE(d, 12);
  buf.writeUInt8(DTYPE_FLOAT32_LE, 16);
  // bytes 17..19 stay zero (padding)
  Buffer.from(data.buffer, data.byteOffset, data.byteLength).copy(
    buf,
    EMB1_HEADER_BYTES,
  );
  return buf;
}

export function decodeEmb1(buf: Buffer): EmbeddingMatrix {
  if (buf.length < EMB1_HEADER_BYTES) {
    throw new Emb1FormatError(
      `file is ${buf.length} bytes, shorter than the header`,
      buf.length,
    );
  }
  if (buf.toString("ascii", 0, 4) !== EMB1_MAGIC) {
    throw new Emb1FormatError("bad magic", 0);
  }
  const version = buf.readUInt32LE(4);
  if (version !== EMB1_VERSION) {
    throw new Emb1FormatError(`unsupported version ${version}`, 4);
  }
  const n = buf.readUInt32LE(8);
  const d = buf.readUInt32LE(12);
  const dtype = buf.readUInt8(16);
  if (dtype !== DTYPE_FLOAT32_LE) {
    throw new Emb1FormatError(`unsupported dtype ${dtype}`, 16);
  }
  const expected = EMB1_HEADER_BYTES + n * d * 4;
  if (buf.length !== expected) {
    throw new Emb1FormatError(
      `payload is ${buf.length - EMB1_HEADER_BYTES} bytes, expected ${n * d * 4}`,
      Math.min(buf.length, expected),
    );
  }
  const data = new Float32Array(n * d);
  for (let i = 0; i < data.length; i++) {
    data[i] = buf.readFloatLE(EMB1_HEADER_BYTES + i * 4);
  }
  return { n, d, data };
}

/** Write via a temp file in the same directory, then rename into place. */
export function atomicWrite(path: string, payload: Buffer | string): void {
  const tmp = join(
    dirname(path),
    `.${randomBytes(6).toString("hex")}.tmp`,
  );
  writeFileSync(tmp, payload);
  renameSync(tmp, path);
}

export function writeEmb1(path: string, matrix: EmbeddingMatrix): void {
  atomicWrite(path, encodeEmb1(matrix));
}

export function readEmb1(path: string): EmbeddingMatrix {
  return decodeEmb1(readFileSync(path));
}
