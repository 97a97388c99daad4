/**
 * Attention extraction backends.
 *
 * The interfaces are what a checkpoint-backed implementation (a VLM with
 * decoder attention hooks, a diffusion U-Net with self-attention hooks)
 * would plug into. The synthetic backends shipped here derive attention
 * directly from image intensity so the full extraction -> interchange ->
 * pipeline path can run deterministically on any machine.
 */

import { GrayImage } from "./png.js";
import { mulberry32 } from "./prng.js";

export interface CrossAttentionTrace {
  /** (steps, heads, tokens) row-major */
  weights: Float32Array;
  steps: number;
  heads: number;
  tokens: number;
  /** half-open token index span of the visual tokens */
  visualSpan: [number, number];
  /** (h_v, w_v) with h_v * w_v == span length */
  visualGrid: [number, number];
}

export interface SelfAttentionLayer {
  resolution: number;
  /** (r*r, r*r) row-major, row-stochastic */
  tensor: Float32Array;
}

export interface VlmBackend {
  readonly modelId: string;
  extractCrossAttention(image: GrayImage, expression: string): CrossAttentionTrace;
}

export interface DmBackend {
  readonly modelId: string;
  extractSelfAttention(image: GrayImage, resolutions: number[]): SelfAttentionLayer[];
}

/** mean intensity of the image cell that maps to grid position (gy, gx) */
function cellMean(image: GrayImage, grid: number, gy: number, gx: number): number {
  const { width, height, pixels } = image;
  const y0 = Math.floor((gy * height) / grid);
  const y1 = Math.floor(((gy + 1) * height) / grid);
  const x0 = Math.floor((gx * width) / grid);
  const x1 = Math.floor(((gx + 1) * width) / grid);
  let sum = 0;
  let count = 0;
  for (let y = y0; y < y1; y++) {
    for (let x = x0; x < x1; x++) {
      sum += pixels[y * width + x];
      count++;
    }
  }
  return count ? sum / count : 0;
}

const INTENSITY_THRESHOLD = 117; // midpoint of the probe fg/bg levels

function membership(image: GrayImage, grid: number): Uint8Array {
  const m = new Uint8Array(grid * grid);
  for (let gy = 0; gy < grid; gy++) {
    for (let gx = 0; gx < grid; gx++) {
      m[gy * grid + gx] = cellMean(image, grid, gy, gx) > INTENSITY_THRESHOLD ? 1 : 0;
    }
  }
  return m;
}

function boundary(m: Uint8Array, grid: number): Uint8Array {
  const b = new Uint8Array(grid * grid);
  for (let y = 0; y < grid; y++) {
    for (let x = 0; x < grid; x++) {
      if (!m[y * grid + x]) continue;
      const interior =
        y > 0 && y < grid - 1 && x > 0 && x < grid - 1 &&
        m[(y - 1) * grid + x] && m[(y + 1) * grid + x] &&
        m[y * grid + x - 1] && m[y * grid + x + 1];
      if (!interior) b[y * grid + x] = 1;
    }
  }
  return b;
}

export interface SyntheticVlmOptions {
  visualGrid?: number;
  steps?: number;
  heads?: number;
  textTokensBefore?: number;
  textTokensAfter?: number;
  noiseLevel?: number;
  seed?: number;
}

/**
 * Intensity-driven stand-in for a VLM attention hook: bright image regions
 * receive boundary-peaked attention, everything else low noise.
 */
export class SyntheticVlmBackend implements VlmBackend {
  readonly modelId = "synthetic-intensity-vlm/1";
  private readonly opts: Required<SyntheticVlmOptions>;

  constructor(opts: SyntheticVlmOptions = {}) {
    this.opts = {
      visualGrid: opts.visualGrid ?? 16,
      steps: opts.steps ?? 3,
      heads: opts.heads ?? 4,
      textTokensBefore: opts.textTokensBefore ?? 4,
      textTokensAfter: opts.textTokensAfter ?? 8,
      noiseLevel: opts.noiseLevel ?? 0.03,
      seed: opts.seed ?? 0,
    };
  }

  extractCrossAttention(image: GrayImage, expression: string): CrossAttentionTrace {
    const { visualGrid: g, steps, heads, textTokensBefore, textTokensAfter, noiseLevel } =
      this.opts;
    let exprHash = 0;
    for (const ch of expression) exprHash = (exprHash * 31 + ch.charCodeAt(0)) >>> 0;
    const rng = mulberry32((this.opts.seed ^ exprHash) >>> 0);
    const m = membership(image, g);
    const edge = boundary(m, g);
    const visual = g * g;
    const tokens = textTokensBefore + visual + textTokensAfter;
    const textTokens = textTokensBefore + textTokensAfter;
    const weights = new Float32Array(steps * heads * tokens);
    for (let t = 0; t < steps; t++) {
      for (let h = 0; h < heads; h++) {
        const row = new Float64Array(visual);
        let sum = 0;
        for (let v = 0; v < visual; v++) {
          let val = rng() * noiseLevel;
          if (edge[v]) val += 0.8 + 0.4 * rng();
          else if (m[v]) val += 0.15;
          row[v] = val;
          sum += val;
        }
        const visualMass = 0.85 * (0.8 + 0.2 * rng());
        const textShare = (1 - visualMass) / textTokens;
        const base = (t * heads + h) * tokens;
        for (let i = 0; i < textTokensBefore; i++) weights[base + i] = textShare;
        for (let v = 0; v < visual; v++) {
          weights[base + textTokensBefore + v] = (row[v] / sum) * visualMass;
        }
        for (let i = 0; i < textTokensAfter; i++) {
          weights[base + textTokensBefore + visual + i] = textShare;
        }
      }
    }
    return {
      weights,
      steps,
      heads,
      tokens,
      visualSpan: [textTokensBefore, textTokensBefore + visual],
      visualGrid: [g, g],
    };
  }
}

/**
 * Intensity-driven stand-in for a diffusion U-Net hook: pixels of the bright
 * region attend uniformly within it, background pixels within the background.
 */
export class SyntheticDmBackend implements DmBackend {
  readonly modelId = "synthetic-intensity-dm/1";

  extractSelfAttention(image: GrayImage, resolutions: number[]): SelfAttentionLayer[] {
    return resolutions.map((r) => {
      const m = membership(image, r);
      const n = r * r;
      const fg: number[] = [];
      const bg: number[] = [];
      for (let i = 0; i < n; i++) (m[i] ? fg : bg).push(i);
      const tensor = new Float32Array(n * n);
      for (const group of [fg, bg]) {
        if (!group.length) continue;
        const w = 1.0 / group.length;
        for (const i of group) for (const j of group) tensor[i * n + j] = w;
      }
      return { resolution: r, tensor };
    });
  }
}
