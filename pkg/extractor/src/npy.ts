/**
 * Minimal NPY v1.0 writer/reader for little-endian float32, C-order tensors.
 *
 * This mirrors the interchange contract of the core package: magic
 * "\x93NUMPY", version 1.0, little-endian uint16 header length, a Python
 * dict literal header padded with spaces to a 64-byte boundary (newline
 * terminated), then raw '<f4' data.
 */

import { readFileSync, writeFileSync } from "node:fs";

const MAGIC = Buffer.from("\x93NUMPY", "latin1");

export interface Tensor {
  shape: number[];
  data: Float32Array;
}

export function npyBytes(t: Tensor): Buffer {
  const count = t.shape.reduce((a, b) => a * b, 1);
  if (count !== t.data.length) {
    throw new Error(`shape ${t.shape} does not match data length ${t.data.length}`);
  }
  const shapeRepr =
    t.shape.length === 1 ? `(${t.shape[0]},)` : `(${t.shape.join(", ")})`;
  let header = `{'descr': '<f4', 'fortran_order': False, 'shape': ${shapeRepr}, }`;
  // pad so that magic(6) + version(2) + hlen(2) + header is a multiple of 64
  const unpadded = 10 + header.length + 1;
  const pad = (64 - (unpadded % 64)) % 64;
  header = header + " ".repeat(pad) + "\n";

  const head = Buffer.alloc(10);
  MAGIC.copy(head, 0);
  head[6] = 1; // major
  head[7] = 0; // minor
  head.writeUInt16LE(header.length, 8);

  const body = Buffer.alloc(count * 4);
  for (let i = 0; i < count; i++) body.writeFloatLE(t.data[i], i * 4);
  return Buffer.concat([head, Buffer.from(header, "latin1"), body]);
}

export function writeNpy(path: string, t: Tensor): void {
  writeFileSync(path, npyBytes(t));
}

export function parseNpy(buf: Buffer): Tensor {
  if (buf.length < 10 || !buf.subarray(0, 6).equals(MAGIC)) {
    throw new Error("malformed NPY header: bad magic");
  }
  if (buf[6] !== 1 || buf[7] !== 0) {
    throw new Error(`unsupported NPY version ${buf[6]}.${buf[7]}`);
  }
  const hlen = buf.readUInt16LE(8);
  const header = buf.subarray(10, 10 + hlen).toString("latin1");
  const descr = /'descr':\s*'([^']+)'/.exec(header);
  const order = /'fortran_order':\s*(True|False)/.exec(header);
  const shapeM = /'shape':\s*\(([^)]*)\)/.exec(header);
  if (!descr || !order || !shapeM) throw new Error("malformed NPY header: missing fields");
  if (descr[1] !== "<f4") throw new Error(`unsupported dtype ${descr[1]}`);
  if (order[1] !== "False") throw new Error("fortran order not supported");
  const shape = shapeM[1]
    .split(",")
    .map((s) => s.trim())
    .filter((s) => s.length > 0)
    .map((s) => parseInt(s, 10));
  const count = shape.reduce((a, b) => a * b, 1);
  const start = 10 + hlen;
  if (buf.length < start + count * 4) throw new Error("truncated NPY file");
  const data = new Float32Array(count);
  for (let i = 0; i < count; i++) data[i] = buf.readFloatLE(start + i * 4);
  return { shape, data };
}

export function readNpy(path: string): Tensor {
  return parseNpy(readFileSync(path));
}
