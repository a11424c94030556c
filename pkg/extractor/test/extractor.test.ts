import { describe, expect, it } from "vitest";

import { PixelStatsBackend, createBackend } from "../src/backends.js";
import { detectionNodes, extractRecords, rleDecode, slotOrder } from "../src/extract.js";
import { centroid, maskArea, maskNode, rleCounts } from "../src/mask.js";
import { createImage, decodePpm, encodePpm } from "../src/ppm.js";
import { samplePhoto } from "../src/sample.js";
import { DIMENSIONS, featuresDoc, validateFeaturesDoc } from "../src/schema.js";

const backend = new PixelStatsBackend();

function twoPersonPhoto(seed = 7) {
  return samplePhoto({ people: 2, seed });
}

describe("ppm", () => {
  it("round-trips images", () => {
    const img = samplePhoto({ people: 3, seed: 2 });
    const back = decodePpm(encodePpm(img));
    expect(back.width).toBe(img.width);
    expect(back.height).toBe(img.height);
    expect(Buffer.from(back.data).equals(Buffer.from(img.data))).toBe(true);
  });

  it("rejects non-ppm input", () => {
    expect(() => decodePpm(Buffer.from("PNG..."))).toThrow();
  });
});

describe("rle", () => {
  it("encodes column-major with a leading zero run", () => {
    // 2x2 mask with the left column set
    const mask = { width: 2, height: 2, bits: Uint8Array.from([1, 0, 1, 0]) };
    expect(rleCounts(mask)).toEqual([0, 2, 2]);
  });

  it("round-trips through decode", () => {
    const img = twoPersonPhoto();
    const [det] = backend.detectPersons(img);
    const node = maskNode(det.mask);
    const back = rleDecode(node);
    expect(Buffer.from(back.bits).equals(Buffer.from(det.mask.bits))).toBe(true);
  });

  it("decodes the compressed string form", () => {
    // engine encoding of a 2x2 left-column mask is "022" (counts 0,2,2)
    const mask = rleDecode({ size: [2, 2], counts: "022" });
    expect(Array.from(mask.bits)).toEqual([1, 0, 1, 0]);
  });
});

describe("detectPersons", () => {
  it("finds nothing on a blank image", () => {
    const blank = createImage(160, 120, [245, 245, 245]);
    expect(backend.detectPersons(blank)).toEqual([]);
  });

  it("finds at least two people on a two-person photo", () => {
    const dets = backend.detectPersons(twoPersonPhoto());
    expect(dets.length).toBeGreaterThanOrEqual(2);
    for (const det of dets) {
      expect(maskArea(det.mask)).toBeGreaterThan(0);
      expect(det.confidence).toBeGreaterThan(0);
      expect(det.confidence).toBeLessThanOrEqual(1);
    }
  });

  it("orders slots left to right", () => {
    const ordered = slotOrder(backend.detectPersons(twoPersonPhoto()));
    const xs = ordered.map((d) => centroid(d.mask)[0]);
    expect(xs).toEqual([...xs].sort((a, b) => a - b));
  });
});

describe("specialists", () => {
  function firstCrop(seed = 7, faceless: number[] = []) {
    const img = samplePhoto({ people: 2, seed, faceless });
    const [det] = slotOrder(backend.detectPersons(img));
    return { image: img, mask: det.mask, box: det.box };
  }

  it("detects a face on a frontal crop and embeds it", () => {
    const payload = backend.faceIdentity(firstCrop());
    expect(payload).not.toBeNull();
    expect(payload!.values.length).toBe(32);
    expect(payload!.values.every(Number.isFinite)).toBe(true);
  });

  it("reports no face for a back-of-head crop", () => {
    expect(backend.faceIdentity(firstCrop(7, [1]))).toBeNull();
  });

  it("is deterministic: same crop twice gives identical payload bits", () => {
    const crop = firstCrop();
    for (const dim of ["faceIdentity", "appearance", "expression", "pose"] as const) {
      const a = backend[dim](crop);
      const b = backend[dim](crop);
      expect(JSON.stringify(a)).toBe(JSON.stringify(b));
    }
  });

  it("emits 17 pose keypoints with at least one confident", () => {
    const payload = backend.pose(firstCrop());
    expect(payload).not.toBeNull();
    expect(payload!.points.length).toBe(17);
    expect(payload!.points.some(([, , v, c]) => v > 0 && c >= 0.3)).toBe(true);
    expect(payload!.crop.width).toBeGreaterThan(0);
  });

  it("distinguishes differently dressed people in appearance space", () => {
    const img = twoPersonPhoto();
    const [a, b] = slotOrder(backend.detectPersons(img));
    const ea = backend.appearance({ image: img, mask: a.mask, box: a.box });
    const eb = backend.appearance({ image: img, mask: b.mask, box: b.box });
    const dot = (u: number[], v: number[]) => u.reduce((s, x, i) => s + x * v[i], 0);
    const norm = (u: number[]) => Math.sqrt(dot(u, u));
    const cos = dot(ea.values, eb.values) / (norm(ea.values) * norm(eb.values));
    expect(cos).toBeLessThan(0.995);
  });
});

describe("feature records", () => {
  it("produce a schema-valid document with uniform embedding lengths", () => {
    const img = twoPersonPhoto();
    const ordered = slotOrder(backend.detectPersons(img));
    const entries = ordered.map((det, i) => ({ index: i + 1, mask: det.mask, box: det.box }));
    const records = extractRecords(img, entries, backend);
    const doc = featuresDoc("sample", "gt", records);
    validateFeaturesDoc(doc);
    expect(records.length).toBe(entries.length * DIMENSIONS.length);
    const faceLens = records
      .filter((r) => r.dimension === "face_identity" && r.payload?.type === "embedding")
      .map((r) => (r.payload as any).values.length);
    expect(new Set(faceLens).size).toBe(1);
  });

  it("marks undetected faces invalid without a payload", () => {
    const img = samplePhoto({ people: 2, seed: 7, faceless: [1, 2] });
    const ordered = slotOrder(backend.detectPersons(img));
    const entries = ordered.map((det, i) => ({ index: i + 1, mask: det.mask, box: det.box }));
    const records = extractRecords(img, entries, backend, ["face_identity"]);
    expect(records.every((r) => !r.valid && r.payload === undefined)).toBe(true);
    validateFeaturesDoc(featuresDoc("sample", "gt", records));
  });

  it("detection nodes carry unique indices", () => {
    const nodes = detectionNodes(backend.detectPersons(twoPersonPhoto()));
    const indices = nodes.map((n) => n.index);
    expect(new Set(indices).size).toBe(indices.length);
  });
});

describe("backend registry", () => {
  it("creates the default backend from config", () => {
    expect(createBackend({}).name).toBe("pixelstats");
  });

  it("rejects unknown backends", () => {
    expect(() => createBackend({ backend: "arcface-onnx" })).toThrow(/unknown backend/);
  });
});
