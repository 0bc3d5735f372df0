/** Binary PGM I/O matching the pipeline exchange format: 16-bit big-endian
 * writes, 8- or 16-bit reads, samples scaled to [0, 1]. */
import { readFileSync, writeFileSync } from "node:fs";

import { Tensor } from "./tensor";

export function readPgm(path: string): Tensor {
  const buf = readFileSync(path);
  if (buf.length < 2 || buf[0] !== 0x50 || buf[1] !== 0x35) {
    throw new Error(`${path}: not a binary PGM`);
  }
  let pos = 2;
  const fields: number[] = [];
  while (fields.length < 3) {
    while (pos < buf.length && isSpace(buf[pos])) pos++;
    if (pos < buf.length && buf[pos] === 0x23) {
      while (pos < buf.length && buf[pos] !== 0x0a) pos++;
      continue;
    }
    const start = pos;
    while (pos < buf.length && !isSpace(buf[pos])) pos++;
    if (start === pos) throw new Error(`${path}: truncated header`);
    const v = Number(buf.subarray(start, pos).toString("ascii"));
    if (!Number.isInteger(v)) throw new Error(`${path}: bad header field`);
    fields.push(v);
  }
  pos += 1;
  const [width, height, maxval] = fields;
  if (width <= 0 || height <= 0 || maxval <= 0 || maxval > 65535) {
    throw new Error(`${path}: bad dimensions or maxval`);
  }
  const wide = maxval > 255;
  const need = width * height * (wide ? 2 : 1);
  if (buf.length - pos < need) throw new Error(`${path}: truncated raster`);
  const out = new Tensor(1, 1, height, width);
  for (let i = 0; i < width * height; i++) {
    const raw = wide ? buf.readUInt16BE(pos + 2 * i) : buf[pos + i];
    out.data[i] = raw / maxval;
  }
  return out;
}

export function writePgm16(path: string, image: Tensor): void {
  if (image.n !== 1 || image.c !== 1) throw new Error("writePgm16 expects a [1,1,h,w] tensor");
  const header = Buffer.from(`P5\n${image.w} ${image.h}\n65535\n`, "ascii");
  const raster = Buffer.alloc(image.h * image.w * 2);
  for (let i = 0; i < image.h * image.w; i++) {
    const v = Math.min(Math.max(image.data[i], 0), 1); // clamp to the sample range
    raster.writeUInt16BE(Math.floor(v * 65535 + 0.5), 2 * i);
  }
  writeFileSync(path, Buffer.concat([header, raster]));
}

function isSpace(byte: number): boolean {
  return byte === 0x20 || byte === 0x09 || byte === 0x0a || byte === 0x0d;
}
