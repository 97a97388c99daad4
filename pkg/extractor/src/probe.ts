/**
 * Synthetic probe scenes: a single bright object on a dark noisy background,
 * with an analytically known ground-truth mask. Used to exercise the
 * extraction and refinement paths without any model checkpoints.
 */

import { GrayImage } from "./png.js";
import { mulberry32, Rng } from "./prng.js";

export interface ProbeSpec {
  size: number;
  shape: "ellipse" | "rect";
  /** center in [0,1] image coordinates, (cy, cx) */
  center: [number, number];
  /** half-extents in [0,1] units, (ry, rx) */
  radii: [number, number];
  seed: number;
}

export interface ProbeScene {
  image: GrayImage;
  /** exact object membership, one byte per pixel (0 / 255) */
  gtMask: Uint8Array;
  /** half-open pixel box [x1, y1, x2, y2] */
  gtBox: [number, number, number, number];
  spec: ProbeSpec;
}

const BACKGROUND = 30;
const FOREGROUND = 205;
const NOISE = 18;

function inside(spec: ProbeSpec, y: number, x: number): boolean {
  const n = spec.size;
  const py = (y + 0.5) / n - spec.center[0];
  const px = (x + 0.5) / n - spec.center[1];
  if (spec.shape === "rect") {
    return Math.abs(py) <= spec.radii[0] && Math.abs(px) <= spec.radii[1];
  }
  const dy = py / spec.radii[0];
  const dx = px / spec.radii[1];
  return dy * dy + dx * dx <= 1.0;
}

export function renderProbe(spec: ProbeSpec): ProbeScene {
  const n = spec.size;
  const rng = mulberry32(spec.seed * 2654435761 + 17);
  const pixels = new Uint8Array(n * n);
  const gtMask = new Uint8Array(n * n);
  let x1 = n, y1 = n, x2 = 0, y2 = 0;
  for (let y = 0; y < n; y++) {
    for (let x = 0; x < n; x++) {
      const fg = inside(spec, y, x);
      const base = fg ? FOREGROUND : BACKGROUND;
      const noise = Math.round((rng() * 2 - 1) * NOISE);
      pixels[y * n + x] = Math.min(255, Math.max(0, base + noise));
      if (fg) {
        gtMask[y * n + x] = 255;
        if (x < x1) x1 = x;
        if (y < y1) y1 = y;
        if (x + 1 > x2) x2 = x + 1;
        if (y + 1 > y2) y2 = y + 1;
      }
    }
  }
  if (x2 <= x1) throw new Error("probe object is empty; enlarge radii");
  return { image: { width: n, height: n, pixels }, gtMask, gtBox: [x1, y1, x2, y2], spec };
}

/** A deterministic family of probe scenes for smoke suites. */
export function probeSuite(count: number, size = 256, baseSeed = 0): ProbeSpec[] {
  const specs: ProbeSpec[] = [];
  for (let i = 0; i < count; i++) {
    const rng = mulberry32(baseSeed + 7919 * i + 1);
    specs.push({
      size,
      shape: rng() < 0.5 ? "ellipse" : "rect",
      center: [0.3 + 0.4 * rng(), 0.3 + 0.4 * rng()],
      radii: [0.08 + 0.12 * rng(), 0.08 + 0.12 * rng()],
      seed: baseSeed + 7919 * i + 2,
    });
  }
  return specs;
}
