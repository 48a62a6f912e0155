import { Encoder, l2Normalize } from "./encoder.js";
import { EmbeddingMatrix, matrixFromRows } from "./emb1.js";

const SLOT = "{}";

export function formatTemplate(template: string, className: string): string {
  if (!template.includes(SLOT)) {
    throw new Error(`template has no "${SLOT}" slot: ${JSON.stringify(template)}`);
  }
  return template.split(SLOT).join(className);
}

/** Normalize each template embedding, average, renormalize the mean. */
export function averageTemplates(rows: Float32Array[]): Float32Array {
  if (rows.length === 0) {
    throw new Error("template list is empty");
  }
  const d = rows[0]!.length;
  const mean = new Float32Array(d);
  for (const row of rows) {
    const unit = l2Normalize(row);
    for (let i = 0; i < d; i++) mean[i]! += unit[i]!;
  }
  for (let i = 0; i < d; i++) mean[i]! /= rows.length;
  return l2Normalize(mean);
}

/**
 * Per-class prompt embeddings: K "yes" rows (text encoder) followed by K
 * "no" rows (negation text encoder), each averaged over the templates.
 */
export async function buildPromptMatrix(
  encoder: Encoder,
  classNames: string[],
  templates: string[],
): Promise<EmbeddingMatrix> {
  if (classNames.length === 0) {
    throw new Error("class list is empty");
  }
  if (templates.length === 0) {
    throw new Error("template list is empty");
  }
  const yesRows: Float32Array[] = [];
  const noRows: Float32Array[] = [];
  for (const name of classNames) {
    const prompts = templates.map((t) => formatTemplate(t, name));
    yesRows.push(
      averageTemplates(await Promise.all(prompts.map((p) => encoder.encodeText(p)))),
    );
    noRows.push(
      averageTemplates(await Promise.all(prompts.map((p) => encoder.encodeNoText(p)))),
    );
  }
  return matrixFromRows([...yesRows, ...noRows]);
}
