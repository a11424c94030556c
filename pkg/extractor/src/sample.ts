/** Deterministic sample-photo synthesis: simple figures (skin-tone head,
 * colored torso and legs) on a plain background. Used for demos and tests. */

import { Image, createImage, setPixel } from "./ppm.js";

type Rgb = [number, number, number];

const SKIN: Rgb = [224, 172, 105];
const OUTFITS: Rgb[] = [
  [178, 34, 34],   // red shirt
  [30, 90, 180],   // blue shirt
  [34, 139, 34],   // green shirt
  [148, 0, 180],   // purple shirt
];
const TROUSERS: Rgb[] = [
  [40, 40, 60],
  [90, 70, 40],
  [50, 60, 50],
  [30, 30, 30],
];

function lcg(seed: number): () => number {
  let state = (seed >>> 0) || 1;
  return () => {
    state = (1103515245 * state + 12345) % 2147483648;
    return state / 2147483648;
  };
}

function fillRect(img: Image, x0: number, y0: number, w: number, h: number, rgb: Rgb): void {
  for (let y = y0; y < y0 + h; y++) {
    for (let x = x0; x < x0 + w; x++) setPixel(img, x, y, rgb);
  }
}

function fillEllipse(img: Image, cx: number, cy: number, rx: number, ry: number, rgb: Rgb): void {
  for (let y = Math.floor(cy - ry); y <= Math.ceil(cy + ry); y++) {
    for (let x = Math.floor(cx - rx); x <= Math.ceil(cx + rx); x++) {
      const dx = (x - cx) / rx;
      const dy = (y - cy) / ry;
      if (dx * dx + dy * dy <= 1) setPixel(img, x, y, rgb);
    }
  }
}

export interface SampleOptions {
  width?: number;
  height?: number;
  people?: number;
  seed?: number;
  /** Shift figures and tint outfits; simulates an imperfect reconstruction. */
  jitter?: boolean;
  /** Draw the head facing away (no visible skin): face specialists find nothing. */
  faceless?: number[];
}

export function samplePhoto(opts: SampleOptions = {}): Image {
  const width = opts.width ?? 320;
  const height = opts.height ?? 240;
  const people = opts.people ?? 2;
  const rand = lcg(opts.seed ?? 1);
  const img = createImage(width, height, [245, 245, 245]);
  const block = Math.floor(width / people);
  const faceless = new Set(opts.faceless ?? []);

  for (let i = 0; i < people; i++) {
    const jitterX = opts.jitter ? Math.floor(rand() * 10) - 5 : 0;
    const tint = opts.jitter ? Math.floor(rand() * 40) - 20 : 0;
    const cx = i * block + Math.floor(block / 2) + jitterX;
    const personH = Math.floor(height * 0.72) + (opts.jitter ? Math.floor(rand() * 8) - 4 : 0);
    const top = Math.floor(height * 0.12);
    const headR = Math.floor(personH * 0.11);
    const torsoW = Math.floor(block * 0.42);
    const torsoH = Math.floor(personH * 0.38);
    const legH = personH - headR * 2 - torsoH;

    const outfit = OUTFITS[i % OUTFITS.length].map(
      (v) => Math.max(0, Math.min(255, v + tint)),
    ) as Rgb;
    const trousers = TROUSERS[i % TROUSERS.length];
    const headColor = faceless.has(i + 1) ? ([60, 45, 30] as Rgb) : SKIN;

    fillEllipse(img, cx, top + headR, headR, headR, headColor);
    fillRect(img, cx - Math.floor(torsoW / 2), top + headR * 2, torsoW, torsoH, outfit);
    // arms
    fillRect(img, cx - Math.floor(torsoW / 2) - 4, top + headR * 2, 4, Math.floor(torsoH * 0.8), outfit);
    fillRect(img, cx + Math.ceil(torsoW / 2), top + headR * 2, 4, Math.floor(torsoH * 0.8), outfit);
    // legs
    const legW = Math.floor(torsoW * 0.32);
    fillRect(img, cx - legW - 2, top + headR * 2 + torsoH, legW, legH, trousers);
    fillRect(img, cx + 2, top + headR * 2 + torsoH, legW, legH, trousers);
  }
  return img;
}
