/**
 * Sample emission: runs the backends on an image and writes a complete
 * interchange sample directory (NPY tensors + JSON manifest + optional
 * ground truth) that the core package loads unchanged.
 */

import { mkdirSync, writeFileSync } from "node:fs";
import { join } from "node:path";

import { DmBackend, VlmBackend } from "./backends.js";
import { encodeGrayPng, GrayImage } from "./png.js";
import { writeNpy } from "./npy.js";
import { ProbeScene } from "./probe.js";

export interface EmitOptions {
  sampleId: string;
  expression: string;
  outDir: string;
  resolutions: number[];
  vlm: VlmBackend;
  dm: DmBackend;
  gtMask?: Uint8Array;
  gtBox?: [number, number, number, number];
  /** also write the source image as probe.png for downstream refinement */
  writeImage?: boolean;
}

export function emitSample(image: GrayImage, opts: EmitOptions): string {
  const dir = opts.outDir;
  mkdirSync(dir, { recursive: true });

  const trace = opts.vlm.extractCrossAttention(image, opts.expression);
  writeNpy(join(dir, "cross_trace.npy"), {
    shape: [trace.steps, trace.heads, trace.tokens],
    data: trace.weights,
  });

  const layers = opts.dm.extractSelfAttention(image, opts.resolutions);
  const stackPaths: Record<string, string> = {};
  for (const layer of layers) {
    const name = `self_attn_${layer.resolution}.npy`;
    const n = layer.resolution * layer.resolution;
    writeNpy(join(dir, name), { shape: [n, n], data: layer.tensor });
    stackPaths[String(layer.resolution)] = name;
  }

  const manifest: Record<string, unknown> = {
    format_version: 1,
    sample_id: opts.sampleId,
    image_size: [image.height, image.width],
    expression: opts.expression,
    cross_trace_path: "cross_trace.npy",
    visual_span: trace.visualSpan,
    visual_grid: trace.visualGrid,
    self_stack_paths: stackPaths,
    provenance: {
      vlm_model: opts.vlm.modelId,
      dm_model: opts.dm.modelId,
      steps_captured: trace.steps,
      resolutions: opts.resolutions,
    },
  };
  if (opts.gtMask) {
    writeFileSync(
      join(dir, "gt_mask.png"),
      encodeGrayPng({ width: image.width, height: image.height, pixels: opts.gtMask }),
    );
    manifest.gt_mask_path = "gt_mask.png";
  }
  if (opts.gtBox) {
    writeFileSync(join(dir, "gt_box.json"), JSON.stringify(opts.gtBox));
    manifest.gt_box_path = "gt_box.json";
  }
  if (opts.writeImage) {
    writeFileSync(join(dir, "probe.png"), encodeGrayPng(image));
  }
  const manifestPath = join(dir, "manifest.json");
  writeFileSync(manifestPath, JSON.stringify(manifest, null, 2) + "\n");
  return manifestPath;
}

export function emitProbeScene(
  scene: ProbeScene,
  opts: Omit<EmitOptions, "gtMask" | "gtBox">,
): string {
  return emitSample(scene.image, {
    ...opts,
    gtMask: scene.gtMask,
    gtBox: scene.gtBox,
    writeImage: opts.writeImage ?? true,
  });
}
