#!/usr/bin/env node
import { readFileSync } from "node:fs";

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { makeEncoder } from "./encoder.js";
import { extractDataset } from "./extract.js";

export function loadTemplates(path: string): string[] {
  const lines = readFileSync(path, "utf-8")
    .split("\n")
    .map((l) => l.trim())
    .filter((l) => l.length > 0 && !l.startsWith("#"));
  if (lines.length === 0) {
    throw new Error(`template file ${path} has no templates`);
  }
  return lines;
}

async function main(): Promise<void> {
  await yargs(hideBin(process.argv))
    .command(
      "extract",
      "Export image and prompt embeddings for a labeled image directory",
      (y) =>
        y
          .option("dataset", {
            type: "string",
            demandOption: true,
            describe: "directory with one subdirectory per class",
          })
          .option("out", {
            type: "string",
            demandOption: true,
            describe: "output directory",
          })
          .option("templates", {
            type: "string",
            demandOption: true,
            describe: "text file, one prompt template per line with a {} slot",
          })
          .option("batch", {
            type: "number",
            default: 32,
            describe: "images encoded per batch",
          })
          .option("encoder", {
            type: "string",
            default: "deterministic",
            describe: "encoder backend",
          })
          .option("dim", {
            type: "number",
            default: 64,
            describe: "embedding dimension",
          }),
      async (argv) => {
        const result = await extractDataset({
          datasetDir: argv.dataset,
          outDir: argv.out,
          templates: loadTemplates(argv.templates),
          batchSize: argv.batch,
          encoder: makeEncoder(argv.encoder, argv.dim),
        });
        console.log(
          `wrote ${result.sampleCount} embeddings for ${result.classCount} classes to ${argv.out}`,
        );
      },
    )
    .demandCommand(1)
    .strict()
    .fail((msg, err) => {
      console.error(err ? `error: ${err.message}` : `error: ${msg}`);
      process.exit(1);
    })
    .parseAsync();
}

main();
