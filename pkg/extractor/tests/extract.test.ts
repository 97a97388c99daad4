import { execFileSync } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, describe, expect, it } from "vitest";

import { SyntheticDmBackend, SyntheticVlmBackend } from "../src/backends";
import { emitProbeScene } from "../src/extract";
import { readNpy } from "../src/npy";
import { probeSuite, renderProbe } from "../src/probe";

const tmp = mkdtempSync(join(tmpdir(), "extract-test-"));
afterAll(() => rmSync(tmp, { recursive: true, force: true }));

const RESOLUTIONS = [16, 32];

function emitProbe(index: number, outRoot: string): string {
  const spec = probeSuite(3, 256, 500)[index];
  return emitProbeScene(renderProbe(spec), {
    sampleId: `probe_${index}`,
    expression: `the bright ${spec.shape}`,
    outDir: join(outRoot, `probe_${index}`),
    resolutions: RESOLUTIONS,
    vlm: new SyntheticVlmBackend({ seed: spec.seed }),
    dm: new SyntheticDmBackend(),
  });
}

describe("sample emission", () => {
  it("criterion 9: 3 probe images pass the core loader's validation", () => {
    const ok = [0, 1, 2].every((i) => {
      const manifest = emitProbe(i, join(tmp, "c9"));
      const out = execFileSync(
        "python3",
        [
          "-c",
          `import sys\nfrom attnground import attnio\n` +
            `trace, stack, gt = attnio.load_sample(sys.argv[1])\n` +
            `import numpy as np\n` +
            `sums_ok = all(abs(t.sum(axis=1) - 1.0).max() <= 1e-4 for _, t in stack.layers)\n` +
            `print(int(sums_ok), ",".join(str(r) for r in stack.resolutions), gt is not None)`,
          manifest,
        ],
        { encoding: "utf-8" },
      ).trim();
      return out === "1 16,32 True";
    });
    console.log(`criterion 9 (emitted samples pass interchange validation): ${ok ? "PASS" : "FAIL"}`);
    expect(ok).toBe(true);
  });

  it("self-attention rows sum to 1 within 1e-4 at every resolution", () => {
    const manifest = emitProbe(0, join(tmp, "rows"));
    for (const r of RESOLUTIONS) {
      const t = readNpy(join(manifest, "..", `self_attn_${r}.npy`));
      const n = r * r;
      expect(t.shape).toEqual([n, n]);
      for (let i = 0; i < n; i++) {
        let sum = 0;
        for (let j = 0; j < n; j++) sum += t.data[i * n + j];
        expect(Math.abs(sum - 1)).toBeLessThanOrEqual(1e-4);
      }
    }
  });

  it("cross trace rows have near-unit mass and the declared span", () => {
    const manifest = emitProbe(1, join(tmp, "trace"));
    const t = readNpy(join(manifest, "..", "cross_trace.npy"));
    const [steps, heads, tokens] = t.shape;
    expect(steps).toBe(3);
    expect(heads).toBe(4);
    expect(tokens).toBe(4 + 256 + 8);
    for (let row = 0; row < steps * heads; row++) {
      let sum = 0;
      for (let k = 0; k < tokens; k++) sum += t.data[row * tokens + k];
      expect(Math.abs(sum - 1)).toBeLessThanOrEqual(1e-4);
    }
  });

  it("emission is deterministic for a fixed spec", () => {
    const a = emitProbe(2, join(tmp, "det_a"));
    const b = emitProbe(2, join(tmp, "det_b"));
    const ta = readNpy(join(a, "..", "cross_trace.npy"));
    const tb = readNpy(join(b, "..", "cross_trace.npy"));
    expect(Buffer.from(ta.data.buffer)).toEqual(Buffer.from(tb.data.buffer));
  });
});
