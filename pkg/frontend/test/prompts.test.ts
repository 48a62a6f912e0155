import { describe, expect, it } from "vitest";

import { DeterministicEncoder, l2Normalize } from "../src/encoder.js";
import {
  averageTemplates,
  buildPromptMatrix,
  formatTemplate,
} from "../src/prompts.js";

const enc = new DeterministicEncoder(16);

function row(m: { d: number; data: Float32Array }, i: number): Float32Array {
  return m.data.slice(i * m.d, (i + 1) * m.d);
}

describe("template formatting", () => {
  it("substitutes the class name everywhere", () => {
    expect(formatTemplate("a photo of a {}", "cat")).toBe("a photo of a cat");
    expect(formatTemplate("{} or {}", "dog")).toBe("dog or dog");
  });

  it("names the offending template when the slot is missing", () => {
    expect(() => formatTemplate("a photo of a cat", "cat")).toThrow(
      /a photo of a cat/,
    );
  });
});

describe("template averaging", () => {
  it("normalizes, means, renormalizes", () => {
    const a = new Float32Array([2, 0, 0, 0]);
    const b = new Float32Array([0, 3, 0, 0]);
    const avg = averageTemplates([a, b]);
    const s = Math.SQRT1_2;
    expect(avg[0]).toBeCloseTo(s, 6);
    expect(avg[1]).toBeCloseTo(s, 6);
    expect(avg[2]).toBe(0);
  });

  it("is idempotent for duplicated templates", async () => {
    const one = await buildPromptMatrix(enc, ["cat"], ["a photo of a {}"]);
    const two = await buildPromptMatrix(enc, ["cat"], [
      "a photo of a {}",
      "a photo of a {}",
    ]);
    for (let i = 0; i < one.data.length; i++) {
      expect(two.data[i]).toBeCloseTo(one.data[i]!, 6);
    }
  });
});

describe("prompt matrix", () => {
  it("emits 2K rows: K yes then K no", async () => {
    const m = await buildPromptMatrix(enc, ["cat", "dog"], ["a {}"]);
    expect(m.n).toBe(4);
    expect(m.d).toBe(16);
    const yesCat = l2Normalize(await enc.encodeText("a cat"));
    const noDog = l2Normalize(await enc.encodeNoText("a dog"));
    expect(Array.from(row(m, 0))).toEqual(Array.from(yesCat));
    expect(Array.from(row(m, 3))).toEqual(Array.from(noDog));
  });

  it("yes and no rows differ for the same class", async () => {
    const m = await buildPromptMatrix(enc, ["cat"], ["a {}"]);
    expect(Array.from(row(m, 0))).not.toEqual(Array.from(row(m, 1)));
  });

  it("every row is unit length", async () => {
    const m = await buildPromptMatrix(enc, ["cat", "dog", "frog"], [
      "a {}",
      "one {} outdoors",
    ]);
    for (let i = 0; i < m.n; i++) {
      const r = row(m, i);
      let sq = 0;
      for (const x of r) sq += x * x;
      expect(Math.sqrt(sq)).toBeCloseTo(1, 5);
    }
  });

  it("rejects empty class or template lists", async () => {
    await expect(buildPromptMatrix(enc, [], ["a {}"])).rejects.toThrow(/class/);
    await expect(buildPromptMatrix(enc, ["cat"], [])).rejects.toThrow(
      /template/,
    );
  });
});
