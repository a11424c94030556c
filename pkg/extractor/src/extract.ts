/** Orchestration: run the specialists over GT slots or detections and emit
 * engine-format records. */

import { Box, Mask, centroid } from "./mask.js";
import { CropView, PersonDetection, SpecialistBackend } from "./backends.js";
import {
  DetectionNode,
  Dimension,
  DIMENSIONS,
  FeatureRecordNode,
  detectionNode,
} from "./schema.js";
import { Image } from "./ppm.js";

/** Decode COCO-style column-major RLE (list counts or compressed string). */
export function rleDecode(node: { size: [number, number]; counts: number[] | string }): Mask {
  const [h, w] = node.size;
  let counts: number[];
  if (typeof node.counts === "string") {
    counts = decodeCountsString(node.counts);
  } else {
    counts = node.counts;
  }
  const total = counts.reduce((a, b) => a + b, 0);
  if (total !== w * h) throw new Error(`RLE counts sum ${total}, expected ${w * h}`);
  const bits = new Uint8Array(w * h);
  let flat = 0;
  let value = 0;
  for (const run of counts) {
    if (value) {
      for (let k = 0; k < run; k++) {
        const idx = flat + k;
        const x = Math.floor(idx / h);
        const y = idx % h;
        bits[y * w + x] = 1;
      }
    }
    flat += run;
    value ^= 1;
  }
  return { width: w, height: h, bits };
}

function decodeCountsString(s: string): number[] {
  const counts: number[] = [];
  let pos = 0;
  while (pos < s.length) {
    let x = 0;
    let k = 0;
    let more = true;
    while (more) {
      const c = s.charCodeAt(pos) - 48;
      x |= (c & 0x1f) << (5 * k);
      more = (c & 0x20) !== 0;
      pos++;
      if (!more && c & 0x10) x |= -1 << (5 * (k + 1));
      k++;
    }
    if (counts.length > 2) x += counts[counts.length - 2];
    counts.push(x);
  }
  return counts;
}

export interface SubjectEntry {
  index: number; // slot_index (gt) or detection index (gen)
  mask: Mask;
  box: Box;
}

export function extractRecords(
  image: Image,
  entries: SubjectEntry[],
  backend: SpecialistBackend,
  dims: readonly Dimension[] = DIMENSIONS,
): FeatureRecordNode[] {
  const records: FeatureRecordNode[] = [];
  for (const entry of entries) {
    const crop: CropView = { image, mask: entry.mask, box: entry.box };
    for (const dim of dims) {
      let payload = null;
      switch (dim) {
        case "face_identity":
          payload = backend.faceIdentity(crop);
          break;
        case "appearance":
          payload = backend.appearance(crop);
          break;
        case "expression":
          payload = backend.expression(crop);
          break;
        case "pose":
          payload = backend.pose(crop);
          break;
      }
      const record: FeatureRecordNode = {
        index: entry.index,
        dimension: dim,
        valid: payload !== null,
      };
      if (payload !== null) record.payload = payload;
      records.push(record);
    }
  }
  return records;
}

export function detectionNodes(detections: PersonDetection[]): DetectionNode[] {
  return detections.map((det, index) => detectionNode(index, det.mask, det.box, det.confidence));
}

/** Left-to-right slot order: centroid x, ties by centroid y then box x1. */
export function slotOrder(detections: PersonDetection[]): PersonDetection[] {
  return [...detections].sort((a, b) => {
    const ca = centroid(a.mask);
    const cb = centroid(b.mask);
    return ca[0] - cb[0] || ca[1] - cb[1] || a.box.x1 - b.box.x1;
  });
}
