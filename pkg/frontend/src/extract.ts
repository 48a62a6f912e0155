import { readFileSync, readdirSync, statSync, mkdirSync } from "node:fs";
import { basename, join } from "node:path";

import { Encoder } from "./encoder.js";
import { atomicWrite, matrixFromRows, writeEmb1 } from "./emb1.js";
import { buildPromptMatrix } from "./prompts.js";

export interface ExtractSpec {
  /** Directory with one subdirectory per class, each holding image files. */
  datasetDir: string;
  outDir: string;
  templates: string[];
  batchSize: number;
  encoder: Encoder;
}

export interface DatasetListing {
  dataset: string;
  classNames: string[];
  /** Per-sample class index, aligned with files. */
  labels: number[];
  files: string[];
}

/** Enumerate class subdirectories and their files in sorted, stable order. */
export function listDataset(datasetDir: string): DatasetListing {
  let entries: string[];
  try {
    entries = readdirSync(datasetDir);
  } catch (e) {
    throw new Error(`cannot read dataset directory ${datasetDir}: ${e}`);
  }
  const classNames = entries
    .filter((name) => statSync(join(datasetDir, name)).isDirectory())
    .sort();
  if (classNames.length === 0) {
    throw new Error(`dataset ${datasetDir} has no class subdirectories`);
  }
  const labels: number[] = [];
  const files: string[] = [];
  classNames.forEach((cls, idx) => {
    const members = readdirSync(join(datasetDir, cls))
      .filter((f) => statSync(join(datasetDir, cls, f)).isFile())
      .sort();
    if (members.length === 0) {
      throw new Error(`class "${cls}" has no files`);
    }
    for (const f of members) {
      labels.push(idx);
      files.push(join(datasetDir, cls, f));
    }
  });
  return { dataset: basename(datasetDir), classNames, labels, files };
}

async function encodeImages(
  encoder: Encoder,
  files: string[],
  batchSize: number,
): Promise<Float32Array[]> {
  const rows: Float32Array[] = [];
  for (let start = 0; start < files.length; start += batchSize) {
    const batch = files.slice(start, start + batchSize);
    const encoded = await Promise.all(
      batch.map((path) => encoder.encodeImage(readFileSync(path))),
    );
    rows.push(...encoded);
  }
  return rows;
}

export interface ExtractResult {
  imagesPath: string;
  manifestPath: string;
  promptsPath: string;
  metaPath: string;
  sampleCount: number;
  classCount: number;
}

/**
 * Write images.emb1, manifest.json, prompts.emb1 and extract.meta.json into
 * the output directory. One embedding row per image in listing order; the
 * prompt file holds K "yes" rows followed by K "no" rows.
 */
export async function extractDataset(spec: ExtractSpec): Promise<ExtractResult> {
  if (spec.templates.length === 0) {
    throw new Error("template list is empty");
  }
  if (!Number.isInteger(spec.batchSize) || spec.batchSize < 1) {
    throw new Error(`batch size must be a positive integer, got ${spec.batchSize}`);
  }
  const listing = listDataset(spec.datasetDir);
  mkdirSync(spec.outDir, { recursive: true });

  const imageRows = await encodeImages(spec.encoder, listing.files, spec.batchSize);
  const images = matrixFromRows(imageRows);
  const prompts = await buildPromptMatrix(
    spec.encoder,
    listing.classNames,
    spec.templates,
  );
  if (prompts.d !== images.d) {
    throw new Error(
      `text embedding dimension ${prompts.d} does not match image dimension ${images.d}`,
    );
  }

  const imagesPath = join(spec.outDir, "images.emb1");
  const manifestPath = join(spec.outDir, "manifest.json");
  const promptsPath = join(spec.outDir, "prompts.emb1");
  const metaPath = join(spec.outDir, "extract.meta.json");

  writeEmb1(imagesPath, images);
  writeEmb1(promptsPath, prompts);
  atomicWrite(
    manifestPath,
    JSON.stringify(
      {
        dataset: listing.dataset,
        class_names: listing.classNames,
        labels: listing.labels,
        id_class_indices: null,
      },
      null,
      2,
    ) + "\n",
  );
  atomicWrite(
    metaPath,
    JSON.stringify(
      {
        encoder: spec.encoder.name,
        dim: spec.encoder.dim,
        template_count: spec.templates.length,
        templates: spec.templates,
        batch_size: spec.batchSize,
      },
      null,
      2,
    ) + "\n",
  );
  return {
    imagesPath,
    manifestPath,
    promptsPath,
    metaPath,
    sampleCount: images.n,
    classCount: listing.classNames.length,
  };
}
