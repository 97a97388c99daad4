#!/usr/bin/env node
/**
 * attn-extractor CLI.
 *
 *   attn-extractor emit-probes --out DIR [--count N] [--size PX]
 *                              [--resolutions 16,32] [--base-seed S]
 *       Render synthetic probe scenes and emit interchange sample dirs.
 *
 *   attn-extractor refine --boxes BOXES_JSON --dataset DIR --out DIR
 *       Refine predicted boxes into full-resolution masks; images are
 *       expected at DIR/<sample_id>/probe.png.
 */

import { join } from "node:path";

import { SyntheticDmBackend, SyntheticVlmBackend } from "./backends.js";
import { emitProbeScene } from "./extract.js";
import { probeSuite, renderProbe } from "./probe.js";
import { refineBatch } from "./refine.js";

function parseArgs(argv: string[]): Record<string, string> {
  const out: Record<string, string> = {};
  for (let i = 0; i < argv.length; i++) {
    if (argv[i].startsWith("--")) {
      out[argv[i].slice(2)] = argv[i + 1] ?? "";
      i++;
    }
  }
  return out;
}

function emitProbes(args: Record<string, string>): void {
  const outDir = args.out;
  if (!outDir) throw new Error("--out is required");
  const count = parseInt(args.count ?? "20", 10);
  const size = parseInt(args.size ?? "256", 10);
  const baseSeed = parseInt(args["base-seed"] ?? "0", 10);
  const resolutions = (args.resolutions ?? "16,32").split(",").map((s) => parseInt(s, 10));
  const dm = new SyntheticDmBackend();
  for (const [i, spec] of probeSuite(count, size, baseSeed).entries()) {
    const sampleId = `probe_${String(i).padStart(4, "0")}`;
    emitProbeScene(renderProbe(spec), {
      sampleId,
      expression: `the bright ${spec.shape}`,
      outDir: join(outDir, sampleId),
      resolutions,
      vlm: new SyntheticVlmBackend({ seed: spec.seed }),
      dm,
    });
  }
  console.log(`emitted ${count} probe samples under ${outDir}`);
}

function refine(args: Record<string, string>): void {
  for (const key of ["boxes", "dataset", "out"]) {
    if (!args[key]) throw new Error(`--${key} is required`);
  }
  const written = refineBatch(
    args.boxes,
    (sid) => join(args.dataset, sid, "probe.png"),
    args.out,
  );
  console.log(`refined ${written.length} masks into ${args.out}`);
}

const [command, ...rest] = process.argv.slice(2);
try {
  if (command === "emit-probes") emitProbes(parseArgs(rest));
  else if (command === "refine") refine(parseArgs(rest));
  else {
    console.error("usage: attn-extractor <emit-probes|refine> [options]");
    process.exit(1);
  }
} catch (err) {
  console.error(`error: ${err instanceof Error ? err.message : err}`);
  process.exit(1);
}
