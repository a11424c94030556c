/** multibind/1 document shapes: the wire contract with the evaluation engine. */

import { Box, Mask, maskNode } from "./mask.js";

export const SCHEMA = "multibind/1";

export const DIMENSIONS = ["face_identity", "appearance", "pose", "expression"] as const;
export type Dimension = (typeof DIMENSIONS)[number];

export interface DetectionNode {
  index: number;
  confidence: number;
  mask: ReturnType<typeof maskNode>;
  box: Box;
}

export interface EmbeddingPayload {
  type: "embedding";
  values: number[];
}

export interface KeypointPayload {
  type: "keypoints";
  points: [number, number, number, number][];
  crop: { width: number; height: number };
}

export interface FeatureRecordNode {
  index: number;
  dimension: Dimension;
  valid: boolean;
  payload?: EmbeddingPayload | KeypointPayload;
}

export function detectionNode(index: number, mask: Mask, box: Box, confidence: number): DetectionNode {
  return { index, confidence, mask: maskNode(mask), box };
}

export function detectionsDoc(
  instanceId: string,
  modelId: string,
  width: number,
  height: number,
  detections: DetectionNode[],
) {
  return {
    schema: SCHEMA,
    kind: "detections",
    instance_id: instanceId,
    model_id: modelId,
    image_size: { width, height },
    detections,
  };
}

export function manifestDoc(
  instanceId: string,
  width: number,
  height: number,
  slots: { slot_index: number; mask: Mask; box: Box }[],
) {
  return {
    schema: SCHEMA,
    kind: "manifest",
    instance_id: instanceId,
    image_size: { width, height },
    gt_slots: slots.map((s) => ({
      slot_index: s.slot_index,
      mask: maskNode(s.mask),
      box: s.box,
    })),
    detections: [],
  };
}

export function featuresDoc(
  instanceId: string,
  side: "gt" | "gen",
  records: FeatureRecordNode[],
  modelId?: string,
) {
  const doc: Record<string, unknown> = {
    schema: SCHEMA,
    kind: "features",
    instance_id: instanceId,
    side,
    records,
  };
  if (modelId !== undefined) doc.model_id = modelId;
  return doc;
}

/** Structural self-check mirroring the engine's ingest rules; throws on violation. */
export function validateFeaturesDoc(doc: any): void {
  if (doc.schema !== SCHEMA) throw new Error(`bad schema ${doc.schema}`);
  if (doc.kind !== "features") throw new Error(`bad kind ${doc.kind}`);
  if (doc.side !== "gt" && doc.side !== "gen") throw new Error(`bad side ${doc.side}`);
  if (doc.side === "gen" && typeof doc.model_id !== "string") {
    throw new Error("gen-side features require model_id");
  }
  const seen = new Set<string>();
  const embedLengths = new Map<string, number>();
  for (const rec of doc.records) {
    if (!DIMENSIONS.includes(rec.dimension)) throw new Error(`bad dimension ${rec.dimension}`);
    if (!Number.isInteger(rec.index)) throw new Error("record index must be an integer");
    const key = `${rec.index}:${rec.dimension}`;
    if (seen.has(key)) throw new Error(`duplicate record ${key}`);
    seen.add(key);
    if (rec.valid && !rec.payload) throw new Error(`valid record ${key} lacks a payload`);
    if (!rec.payload) continue;
    if (rec.payload.type === "embedding") {
      const values: number[] = rec.payload.values;
      if (!values.length || values.some((v) => !Number.isFinite(v))) {
        throw new Error(`bad embedding in ${key}`);
      }
      const prev = embedLengths.get(rec.dimension);
      if (prev !== undefined && prev !== values.length) {
        throw new Error(`embedding length varies within ${rec.dimension}`);
      }
      embedLengths.set(rec.dimension, values.length);
    } else if (rec.payload.type === "keypoints") {
      const { points, crop } = rec.payload;
      if (!points.length) throw new Error(`empty keypoints in ${key}`);
      for (const p of points) {
        if (p.length !== 4 || p.some((v: number) => !Number.isFinite(v))) {
          throw new Error(`bad keypoint row in ${key}`);
        }
        if (p[3] < 0 || p[3] > 1) throw new Error(`keypoint confidence out of range in ${key}`);
      }
      if (!(crop.width > 0) || !(crop.height > 0)) throw new Error(`bad crop in ${key}`);
    } else {
      throw new Error(`unknown payload type in ${key}`);
    }
  }
}
