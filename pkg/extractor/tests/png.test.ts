import { execFileSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, describe, expect, it } from "vitest";

import { decodeGrayPng, encodeGrayPng } from "../src/png";
import { mulberry32 } from "../src/prng";

const tmp = mkdtempSync(join(tmpdir(), "png-test-"));
afterAll(() => rmSync(tmp, { recursive: true, force: true }));

describe("grayscale PNG codec", () => {
  it("round-trips random images", () => {
    const rng = mulberry32(99);
    const pixels = new Uint8Array(37 * 23);
    for (let i = 0; i < pixels.length; i++) pixels[i] = Math.floor(rng() * 256);
    const img = { width: 37, height: 23, pixels };
    const back = decodeGrayPng(encodeGrayPng(img));
    expect(back.width).toBe(37);
    expect(back.height).toBe(23);
    expect(Buffer.from(back.pixels)).toEqual(Buffer.from(pixels));
  });

  it("rejects non-PNG bytes", () => {
    expect(() => decodeGrayPng(Buffer.from("nope"))).toThrow(/not a PNG/);
  });

  it("PIL reads TS-written masks with the same foreground", () => {
    const pixels = new Uint8Array(16 * 16);
    for (let i = 40; i < 90; i++) pixels[i] = 255;
    const path = join(tmp, "mask.png");
    writeFileSync(path, encodeGrayPng({ width: 16, height: 16, pixels }));
    const out = execFileSync(
      "python3",
      [
        "-c",
        `from PIL import Image\nimport numpy as np, sys\n` +
          `a = np.asarray(Image.open(sys.argv[1]).convert("L"))\n` +
          `print(a.shape, int((a >= 128).sum()))`,
        path,
      ],
      { encoding: "utf-8" },
    );
    expect(out.trim()).toBe("(16, 16) 50");
  });

  it("TS decodes PIL-written PNGs (any filter choice)", () => {
    const path = join(tmp, "pil.png");
    execFileSync("python3", [
      "-c",
      `from PIL import Image\nimport numpy as np, sys\n` +
        `rng = np.random.default_rng(3)\n` +
        `a = rng.integers(0, 256, size=(33, 47), dtype=np.uint8)\n` +
        `Image.fromarray(a, mode="L").save(sys.argv[1])\n` +
        `np.save(sys.argv[1] + ".npy", a.astype(np.float32))`,
      path,
    ]);
    const img = decodeGrayPng(readFileSync(path));
    expect(img.width).toBe(47);
    expect(img.height).toBe(33);
    const check = execFileSync(
      "python3",
      [
        "-c",
        `import numpy as np, sys, json\n` +
          `a = np.load(sys.argv[1] + ".npy")\n` +
          `b = np.frombuffer(bytes.fromhex(sys.argv[2]), dtype=np.uint8).reshape(a.shape)\n` +
          `print(int((a == b).all()))`,
        path,
        Buffer.from(img.pixels).toString("hex"),
      ],
      { encoding: "utf-8" },
    );
    expect(check.trim()).toBe("1");
  });
});
