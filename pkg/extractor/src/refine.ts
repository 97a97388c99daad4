/**
 * Box-prompt mask refinement.
 *
 * Given a grayscale image and a predicted box, re-segments the object at
 * full pixel resolution: threshold inside the (slightly expanded) box,
 * then keep the largest connected component. This plays the role a
 * promptable segmenter would fill when checkpoints are available; the
 * interface (boxes JSON in, one mask PNG per sample out) is identical.
 */

import { mkdirSync, readFileSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { decodeGrayPng, encodeGrayPng, GrayImage } from "./png.js";

export interface RefineOptions {
  threshold?: number;
  /** pixels of box expansion to recover object edges the box clipped */
  margin?: number;
}

export function refineBox(
  image: GrayImage,
  box: [number, number, number, number],
  opts: RefineOptions = {},
): Uint8Array {
  const threshold = opts.threshold ?? 117;
  const margin = opts.margin ?? 4;
  const { width, height, pixels } = image;
  let [x1, y1, x2, y2] = box;
  x1 = Math.max(0, x1 - margin);
  y1 = Math.max(0, y1 - margin);
  x2 = Math.min(width, x2 + margin);
  y2 = Math.min(height, y2 + margin);

  const candidate = new Uint8Array(width * height);
  for (let y = y1; y < y2; y++) {
    for (let x = x1; x < x2; x++) {
      if (pixels[y * width + x] > threshold) candidate[y * width + x] = 1;
    }
  }

  // largest 4-connected component of the candidate set
  const label = new Int32Array(width * height).fill(-1);
  let best: number[] = [];
  let next = 0;
  const stack: number[] = [];
  for (let start = 0; start < candidate.length; start++) {
    if (!candidate[start] || label[start] >= 0) continue;
    const pixelsInComp: number[] = [];
    stack.push(start);
    label[start] = next;
    while (stack.length) {
      const p = stack.pop()!;
      pixelsInComp.push(p);
      const y = Math.floor(p / width);
      const x = p % width;
      const neighbors = [
        y > 0 ? p - width : -1,
        y < height - 1 ? p + width : -1,
        x > 0 ? p - 1 : -1,
        x < width - 1 ? p + 1 : -1,
      ];
      for (const q of neighbors) {
        if (q >= 0 && candidate[q] && label[q] < 0) {
          label[q] = next;
          stack.push(q);
        }
      }
    }
    if (pixelsInComp.length > best.length) best = pixelsInComp;
    next++;
  }

  const mask = new Uint8Array(width * height);
  for (const p of best) mask[p] = 255;
  return mask;
}

export interface BoxPrompt {
  sample_id: string;
  image_size: [number, number];
  box: [number, number, number, number] | null;
}

/**
 * Batch entry point matching the evaluation harness contract: reads the
 * box-prompt JSON, refines each sample's image, writes `{sample_id}.png`
 * masks into outDir. `imageFor` maps a sample id to its image file.
 */
export function refineBatch(
  boxesJsonPath: string,
  imageFor: (sampleId: string) => string,
  outDir: string,
  opts: RefineOptions = {},
): string[] {
  const prompts: BoxPrompt[] = JSON.parse(readFileSync(boxesJsonPath, "utf-8"));
  if (!prompts.length) {
    console.warn("refine: empty box list, nothing to do");
    return [];
  }
  mkdirSync(outDir, { recursive: true });
  const written: string[] = [];
  for (const prompt of prompts) {
    const image = decodeGrayPng(readFileSync(imageFor(prompt.sample_id)));
    const [h, w] = prompt.image_size;
    if (h !== image.height || w !== image.width) {
      throw new Error(
        `${prompt.sample_id}: image is ${image.height}x${image.width}, prompt says ${h}x${w}`,
      );
    }
    let mask: Uint8Array;
    if (prompt.box === null) {
      mask = new Uint8Array(w * h);
    } else {
      mask = refineBox(image, prompt.box, opts);
    }
    const path = join(outDir, `${prompt.sample_id}.png`);
    writeFileSync(path, encodeGrayPng({ width: w, height: h, pixels: mask }));
    written.push(path);
  }
  return written;
}
