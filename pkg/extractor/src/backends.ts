/** Specialist backends. The adapter interface is model-agnostic: anything that
 * produces these payloads plugs in (ONNX face/pose models, VL embedders, ...).
 * The default `pixelstats` backend is deterministic pixel statistics, so the
 * pipeline runs without model weights and emits byte-stable features. */

import { Box, Mask, connectedComponents, maskArea, tightBox } from "./mask.js";
import { EmbeddingPayload, KeypointPayload } from "./schema.js";
import { Image, getPixel } from "./ppm.js";

export interface CropView {
  image: Image;
  mask: Mask;
  box: Box;
}

export interface PersonDetection {
  mask: Mask;
  box: Box;
  confidence: number;
}

export interface SpecialistBackend {
  readonly name: string;
  detectPersons(image: Image): PersonDetection[];
  faceIdentity(crop: CropView): EmbeddingPayload | null;
  appearance(crop: CropView): EmbeddingPayload;
  expression(crop: CropView): EmbeddingPayload;
  pose(crop: CropView): KeypointPayload | null;
}

export interface BackendConfig {
  backend?: string;
  device?: string;
  /** Components smaller than this fraction of the image are noise. */
  minAreaFrac?: number;
  /** Manhattan RGB distance from the background color to count as foreground. */
  bgTolerance?: number;
  /** Minimum skin-classified pixels for a face to count as detected. */
  skinMinPixels?: number;
}

const DEFAULTS: Required<BackendConfig> = {
  backend: "pixelstats",
  device: "cpu",
  minAreaFrac: 0.002,
  bgTolerance: 90,
  skinMinPixels: 25,
};

function isSkin(r: number, g: number, b: number): boolean {
  const max = Math.max(r, g, b);
  const min = Math.min(r, g, b);
  return r > 95 && g > 40 && b > 20 && max - min > 15 && Math.abs(r - g) > 15 && r > g && r > b;
}

function hueBin(r: number, g: number, b: number, bins: number): number {
  const max = Math.max(r, g, b);
  const min = Math.min(r, g, b);
  if (max === min) return 0;
  let h: number;
  if (max === r) h = ((g - b) / (max - min) + 6) % 6;
  else if (max === g) h = (b - r) / (max - min) + 2;
  else h = (r - g) / (max - min) + 4;
  return Math.min(bins - 1, Math.floor((h / 6) * bins));
}

function round6(v: number): number {
  return Math.round(v * 1e6) / 1e6;
}

interface RegionStats {
  count: number;
  mean: [number, number, number];
  std: [number, number, number];
  cx: number;
  cy: number;
  hueHist: number[];
}

function regionStats(crop: CropView, rows: [number, number], hueBins: number,
                     filter?: (r: number, g: number, b: number) => boolean): RegionStats {
  const { image, mask, box } = crop;
  const sum = [0, 0, 0];
  const sq = [0, 0, 0];
  const hist = new Array(hueBins).fill(0);
  let count = 0, sx = 0, sy = 0;
  const y1 = box.y1 + Math.floor((box.y2 - box.y1) * rows[0]);
  const y2 = box.y1 + Math.ceil((box.y2 - box.y1) * rows[1]);
  for (let y = y1; y < y2; y++) {
    for (let x = box.x1; x < box.x2; x++) {
      if (!mask.bits[y * mask.width + x]) continue;
      const [r, g, b] = getPixel(image, x, y);
      if (filter && !filter(r, g, b)) continue;
      count++;
      sx += x; sy += y;
      sum[0] += r; sum[1] += g; sum[2] += b;
      sq[0] += r * r; sq[1] += g * g; sq[2] += b * b;
      hist[hueBin(r, g, b, hueBins)]++;
    }
  }
  const mean: [number, number, number] = [0, 0, 0];
  const std: [number, number, number] = [0, 0, 0];
  for (let c = 0; c < 3; c++) {
    mean[c] = count ? sum[c] / count : 0;
    std[c] = count ? Math.sqrt(Math.max(0, sq[c] / count - mean[c] * mean[c])) : 0;
  }
  return {
    count,
    mean,
    std,
    cx: count ? sx / count : 0,
    cy: count ? sy / count : 0,
    hueHist: hist.map((h) => (count ? h / count : 0)),
  };
}

/** COCO 17-keypoint order with per-joint vertical anchors inside the box. */
const KEYPOINT_LAYOUT: { frac: number; side: number }[] = [
  { frac: 0.06, side: 0 },   // nose
  { frac: 0.05, side: -0.12 }, // left eye
  { frac: 0.05, side: 0.12 },  // right eye
  { frac: 0.07, side: -0.28 }, // left ear
  { frac: 0.07, side: 0.28 },  // right ear
  { frac: 0.22, side: -0.42 }, // left shoulder
  { frac: 0.22, side: 0.42 },  // right shoulder
  { frac: 0.38, side: -0.46 }, // left elbow
  { frac: 0.38, side: 0.46 },  // right elbow
  { frac: 0.52, side: -0.48 }, // left wrist
  { frac: 0.52, side: 0.48 },  // right wrist
  { frac: 0.58, side: -0.25 }, // left hip
  { frac: 0.58, side: 0.25 },  // right hip
  { frac: 0.76, side: -0.22 }, // left knee
  { frac: 0.76, side: 0.22 },  // right knee
  { frac: 0.94, side: -0.2 },  // left ankle
  { frac: 0.94, side: 0.2 },   // right ankle
];

export class PixelStatsBackend implements SpecialistBackend {
  readonly name = "pixelstats";
  private cfg: Required<BackendConfig>;

  constructor(cfg: BackendConfig = {}) {
    this.cfg = { ...DEFAULTS, ...cfg };
  }

  detectPersons(image: Image): PersonDetection[] {
    const [bgR, bgG, bgB] = getPixel(image, 0, 0);
    const tol = this.cfg.bgTolerance;
    const minArea = Math.max(8, Math.floor(image.width * image.height * this.cfg.minAreaFrac));
    const masks = connectedComponents(
      image.width,
      image.height,
      (x, y) => {
        const [r, g, b] = getPixel(image, x, y);
        return Math.abs(r - bgR) + Math.abs(g - bgG) + Math.abs(b - bgB) > tol;
      },
      minArea,
    );
    return masks.map((mask) => {
      const areaFrac = maskArea(mask) / (image.width * image.height);
      const confidence = Math.round(Math.min(0.99, 0.6 + 3 * areaFrac) * 1e4) / 1e4;
      return { mask, box: tightBox(mask), confidence };
    });
  }

  faceIdentity(crop: CropView): EmbeddingPayload | null {
    const head = regionStats(crop, [0, 0.45], 8, isSkin);
    if (head.count < this.cfg.skinMinPixels) return null;
    const { box } = crop;
    const w = box.x2 - box.x1;
    const h = box.y2 - box.y1;
    const headH = Math.max(1, Math.ceil(h * 0.45));
    // vertical skin-density profile over the head region, 8 slices
    const profile = new Array(8).fill(0);
    const slice = new Array(8).fill(0);
    for (let y = box.y1; y < box.y1 + headH; y++) {
      for (let x = box.x1; x < box.x2; x++) {
        if (!crop.mask.bits[y * crop.mask.width + x]) continue;
        const [r, g, b] = getPixel(crop.image, x, y);
        const s = Math.min(7, Math.floor(((y - box.y1) / headH) * 8));
        slice[s]++;
        if (isSkin(r, g, b)) profile[s]++;
      }
    }
    const quad = [0, 0, 0, 0];
    let quadTotal = 0;
    for (let y = box.y1; y < box.y1 + headH; y++) {
      for (let x = box.x1; x < box.x2; x++) {
        if (!crop.mask.bits[y * crop.mask.width + x]) continue;
        const [r, g, b] = getPixel(crop.image, x, y);
        if (!isSkin(r, g, b)) continue;
        const qx = x - box.x1 < w / 2 ? 0 : 1;
        const qy = y - box.y1 < headH / 2 ? 0 : 1;
        quad[qy * 2 + qx]++;
        quadTotal++;
      }
    }
    const values = [
      ...head.mean.map((v) => v / 255),
      ...head.std.map((v) => v / 128),
      (head.cx - box.x1) / Math.max(1, w),
      (head.cy - box.y1) / Math.max(1, headH),
      head.count / Math.max(1, w * headH),
      ...head.hueHist,
      ...profile.map((p, i) => (slice[i] ? p / slice[i] : 0)),
      ...quad.map((q) => (quadTotal ? q / quadTotal : 0)),
      Math.min(4, w / h) / 4,
      maskArea(crop.mask) / Math.max(1, w * h),
      1.0,
    ].map(round6);
    return { type: "embedding", values };
  }

  appearance(crop: CropView): EmbeddingPayload {
    const { box } = crop;
    const w = box.x2 - box.x1;
    const h = box.y2 - box.y1;
    // 4x4 spatial grid of mean RGB over mask pixels
    const grid = new Array(16 * 3).fill(0);
    const counts = new Array(16).fill(0);
    for (let y = box.y1; y < box.y2; y++) {
      for (let x = box.x1; x < box.x2; x++) {
        if (!crop.mask.bits[y * crop.mask.width + x]) continue;
        const gx = Math.min(3, Math.floor(((x - box.x1) / w) * 4));
        const gy = Math.min(3, Math.floor(((y - box.y1) / h) * 4));
        const cell = gy * 4 + gx;
        const [r, g, b] = getPixel(crop.image, x, y);
        grid[cell * 3] += r;
        grid[cell * 3 + 1] += g;
        grid[cell * 3 + 2] += b;
        counts[cell]++;
      }
    }
    const cells: number[] = [];
    for (let c = 0; c < 16; c++) {
      for (let ch = 0; ch < 3; ch++) {
        cells.push(counts[c] ? grid[c * 3 + ch] / counts[c] / 255 : 0);
      }
    }
    const body = regionStats(crop, [0, 1], 12);
    const values = [...cells, ...body.hueHist, ...body.mean.map((v) => v / 255), 1.0].map(round6);
    return { type: "embedding", values };
  }

  expression(crop: CropView): EmbeddingPayload {
    const head = regionStats(crop, [0, 0.35], 8);
    const { box } = crop;
    const headH = Math.max(1, Math.ceil((box.y2 - box.y1) * 0.35));
    const profile = new Array(8).fill(0);
    const slice = new Array(8).fill(0);
    for (let y = box.y1; y < box.y1 + headH; y++) {
      for (let x = box.x1; x < box.x2; x++) {
        if (!crop.mask.bits[y * crop.mask.width + x]) continue;
        const s = Math.min(7, Math.floor(((x - box.x1) / (box.x2 - box.x1)) * 8));
        slice[s]++;
        const [r, g, b] = getPixel(crop.image, x, y);
        if (isSkin(r, g, b)) profile[s]++;
      }
    }
    const values = [
      ...head.hueHist,
      ...head.mean.map((v) => v / 255),
      ...head.std.map((v) => v / 128),
      ...profile.map((p, i) => (slice[i] ? p / slice[i] : 0)),
      head.count ? 1 : 0,
      1.0,
    ].map(round6);
    return { type: "embedding", values };
  }

  pose(crop: CropView): KeypointPayload | null {
    const { box, mask } = crop;
    const w = box.x2 - box.x1;
    const h = box.y2 - box.y1;
    const points: [number, number, number, number][] = [];
    let visible = 0;
    for (const { frac, side } of KEYPOINT_LAYOUT) {
      const y = Math.min(box.y2 - 1, box.y1 + Math.round(frac * (h - 1)));
      let minX = -1, maxX = -1;
      for (let x = box.x1; x < box.x2; x++) {
        if (mask.bits[y * mask.width + x]) {
          if (minX < 0) minX = x;
          maxX = x;
        }
      }
      if (minX < 0) {
        points.push([0, 0, 0, 0]);
        continue;
      }
      const center = (minX + maxX) / 2;
      const span = maxX - minX;
      const x = center + side * span;
      points.push([round6(x - box.x1), round6(y - box.y1), 1, 0.9]);
      visible++;
    }
    if (!visible) return null;
    return { type: "keypoints", points, crop: { width: w, height: h } };
  }
}

const REGISTRY = new Map<string, (cfg: BackendConfig) => SpecialistBackend>([
  ["pixelstats", (cfg) => new PixelStatsBackend(cfg)],
]);

export function createBackend(cfg: BackendConfig = {}): SpecialistBackend {
  const name = cfg.backend ?? DEFAULTS.backend;
  const factory = REGISTRY.get(name);
  if (!factory) {
    throw new Error(`unknown backend ${name}; registered: ${[...REGISTRY.keys()].join(", ")}`);
  }
  return factory(cfg);
}

export function registerBackend(name: string, factory: (cfg: BackendConfig) => SpecialistBackend): void {
  REGISTRY.set(name, factory);
}
