import { createHash } from "node:crypto";

/**
 * An encoder triple: image encoder, text encoder, and a separately trained
 * "no"-text encoder. All three must share one embedding dimension.
 */
export interface Encoder {
  readonly name: string;
  readonly dim: number;
  encodeImage(bytes: Buffer): Promise<Float32Array>;
  encodeText(text: string): Promise<Float32Array>;
  encodeNoText(text: string): Promise<Float32Array>;
}

export function l2Normalize(v: Float32Array): Float32Array {
  let sq = 0;
  for (let i = 0; i < v.length; i++) sq += v[i]! * v[i]!;
  const norm = Math.sqrt(sq);
  if (norm === 0) {
    throw new Error("cannot normalize a zero vector");
  }
  const out = new Float32Array(v.length);
  for (let i = 0; i < v.length; i++) out[i] = v[i]! / norm;
  return out;
}

/**
 * Deterministic stand-in encoder: maps input bytes through SHA-256 into a
 * seeded PRNG and emits a unit vector. No model weights required, identical
 * output on every run — inference with a real checkpoint plugs in behind the
 * same Encoder interface.
 */
export class DeterministicEncoder implements Encoder {
  readonly name = "deterministic";
  readonly dim: number;

  constructor(dim = 64) {
    if (!Number.isInteger(dim) || dim < 1) {
      throw new Error(`dim must be a positive integer, got ${dim}`);
    }
    this.dim = dim;
  }

  private unitVector(domain: string, payload: Buffer): Float32Array {
    const seed = createHash("sha256")
      .update(domain)
      .update(payload)
      .digest();
    // mulberry32 seeded from the first 4 hash bytes, reseeded per block so
    // arbitrary dims draw from the full digest
    const v = new Float32Array(this.dim);
    let state = seed.readUInt32LE(0);
    for (let i = 0; i < this.dim; i++) {
      if (i % 8 === 0 && i > 0) {
        state ^= seed.readUInt32LE((i / 2) % 28);
      }
      state = (state + 0x6d2b79f5) >>> 0;
      let t = state;
      t = Math.imul(t ^ (t >>> 15), t | 1);
      t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
      const u = ((t ^ (t >>> 14)) >>> 0) / 4294967296;
      // Box-Muller-free symmetric draw is enough for a direction
      v[i] = u * 2 - 1;
    }
    return l2Normalize(v);
  }

  async encodeImage(bytes: Buffer): Promise<Float32Array> {
    return this.unitVector("img:", bytes);
  }

  async encodeText(text: string): Promise<Float32Array> {
    return this.unitVector("text:", Buffer.from(text, "utf-8"));
  }

  async encodeNoText(text: string): Promise<Float32Array> {
    return this.unitVector("no-text:", Buffer.from(text, "utf-8"));
  }
}

const REGISTRY: Record<string, (dim: number) => Encoder> = {
  deterministic: (dim) => new DeterministicEncoder(dim),
};

export function makeEncoder(name: string, dim: number): Encoder {
  const factory = REGISTRY[name];
  if (!factory) {
    throw new Error(
      `unknown encoder "${name}" (available: ${Object.keys(REGISTRY).join(", ")})`,
    );
  }
  return factory(dim);
}
