/** Minimal binary PPM (P6) reader/writer so sample photos need no native deps. */

import { promises as fs } from "node:fs";

export interface Image {
  width: number;
  height: number;
  /** RGB interleaved, row-major, 8-bit. */
  data: Uint8Array;
}

export function createImage(width: number, height: number, fill: [number, number, number]): Image {
  const data = new Uint8Array(width * height * 3);
  for (let i = 0; i < width * height; i++) {
    data[i * 3] = fill[0];
    data[i * 3 + 1] = fill[1];
    data[i * 3 + 2] = fill[2];
  }
  return { width, height, data };
}

export function getPixel(img: Image, x: number, y: number): [number, number, number] {
  const o = (y * img.width + x) * 3;
  return [img.data[o], img.data[o + 1], img.data[o + 2]];
}

export function setPixel(img: Image, x: number, y: number, rgb: [number, number, number]): void {
  if (x < 0 || y < 0 || x >= img.width || y >= img.height) return;
  const o = (y * img.width + x) * 3;
  img.data[o] = rgb[0];
  img.data[o + 1] = rgb[1];
  img.data[o + 2] = rgb[2];
}

export function encodePpm(img: Image): Uint8Array {
  const header = Buffer.from(`P6\n${img.width} ${img.height}\n255\n`, "ascii");
  return Buffer.concat([header, Buffer.from(img.data)]);
}

export function decodePpm(buf: Uint8Array): Image {
  const b = Buffer.from(buf);
  if (b.length < 2 || b.toString("ascii", 0, 2) !== "P6") {
    throw new Error("not a binary PPM (P6) file");
  }
  // header = magic, width, height, maxval as whitespace-separated tokens,
  // with '#' comments allowed between them
  const tokens: string[] = [];
  let pos = 2;
  while (tokens.length < 3 && pos < b.length) {
    const ch = String.fromCharCode(b[pos]);
    if (ch === "#") {
      while (pos < b.length && b[pos] !== 0x0a) pos++;
      pos++;
    } else if (/\s/.test(ch)) {
      pos++;
    } else {
      let start = pos;
      while (pos < b.length && !/\s/.test(String.fromCharCode(b[pos]))) pos++;
      tokens.push(b.toString("ascii", start, pos));
    }
  }
  pos++; // single whitespace after maxval
  const [width, height, maxval] = tokens.map(Number);
  if (!width || !height || maxval !== 255) {
    throw new Error(`unsupported PPM header: ${tokens.join(" ")}`);
  }
  const need = width * height * 3;
  if (b.length - pos < need) throw new Error("truncated PPM pixel data");
  return { width, height, data: new Uint8Array(b.subarray(pos, pos + need)) };
}

export async function readImage(path: string): Promise<Image> {
  return decodePpm(await fs.readFile(path));
}

export async function writeImage(path: string, img: Image): Promise<void> {
  await fs.writeFile(path, encodePpm(img));
}
