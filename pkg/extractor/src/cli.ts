#!/usr/bin/env node
/** CLI: sample photo synthesis, person detection, manifest authoring, and
 * specialist feature extraction into multibind/1 files. */

import { promises as fs } from "node:fs";
import path from "node:path";
import { parseArgs } from "node:util";

import { BackendConfig, createBackend } from "./backends.js";
import { detectionNodes, extractRecords, rleDecode, slotOrder, SubjectEntry } from "./extract.js";
import { readImage, writeImage } from "./ppm.js";
import { samplePhoto } from "./sample.js";
import {
  DIMENSIONS,
  Dimension,
  detectionsDoc,
  featuresDoc,
  manifestDoc,
  validateFeaturesDoc,
} from "./schema.js";

async function writeJson(file: string, doc: unknown): Promise<void> {
  await fs.mkdir(path.dirname(path.resolve(file)), { recursive: true });
  await fs.writeFile(file, JSON.stringify(doc, null, 1) + "\n");
}

async function loadConfig(file?: string): Promise<BackendConfig> {
  const candidate = file ?? "extractor.config.json";
  try {
    return JSON.parse(await fs.readFile(candidate, "utf8"));
  } catch (err: any) {
    if (file) throw new Error(`cannot read config ${file}: ${err?.message ?? err}`);
    return {};
  }
}

function parseDims(values: string[] | undefined): Dimension[] {
  if (!values || values.length === 0) return [...DIMENSIONS];
  for (const v of values) {
    if (!DIMENSIONS.includes(v as Dimension)) throw new Error(`unknown dimension ${v}`);
  }
  return values as Dimension[];
}

async function cmdSample(argv: string[]): Promise<void> {
  const { values } = parseArgs({
    args: argv,
    options: {
      out: { type: "string" },
      people: { type: "string", default: "2" },
      seed: { type: "string", default: "1" },
      width: { type: "string", default: "320" },
      height: { type: "string", default: "240" },
      jitter: { type: "boolean", default: false },
      faceless: { type: "string", multiple: true },
    },
  });
  if (!values.out) throw new Error("--out is required");
  const img = samplePhoto({
    people: Number(values.people),
    seed: Number(values.seed),
    width: Number(values.width),
    height: Number(values.height),
    jitter: values.jitter,
    faceless: (values.faceless ?? []).map(Number),
  });
  await writeImage(values.out, img);
  console.log(`wrote ${values.out} (${img.width}x${img.height})`);
}

async function cmdDetect(argv: string[]): Promise<void> {
  const { values } = parseArgs({
    args: argv,
    options: {
      image: { type: "string" },
      "instance-id": { type: "string" },
      "model-id": { type: "string" },
      out: { type: "string" },
      config: { type: "string" },
    },
  });
  if (!values.image || !values["instance-id"] || !values["model-id"] || !values.out) {
    throw new Error("--image, --instance-id, --model-id, --out are required");
  }
  const backend = createBackend(await loadConfig(values.config));
  const img = await readImage(values.image);
  const detections = backend.detectPersons(img);
  const doc = detectionsDoc(
    values["instance-id"], values["model-id"], img.width, img.height,
    detectionNodes(detections),
  );
  await writeJson(values.out, doc);
  console.log(`wrote ${values.out} (${detections.length} detections)`);
}

async function cmdMakeManifest(argv: string[]): Promise<void> {
  const { values } = parseArgs({
    args: argv,
    options: {
      image: { type: "string" },
      "instance-id": { type: "string" },
      out: { type: "string" },
      config: { type: "string" },
    },
  });
  if (!values.image || !values["instance-id"] || !values.out) {
    throw new Error("--image, --instance-id, --out are required");
  }
  const backend = createBackend(await loadConfig(values.config));
  const img = await readImage(values.image);
  const ordered = slotOrder(backend.detectPersons(img));
  if (ordered.length < 2 || ordered.length > 4) {
    throw new Error(`manifest needs 2..4 subjects, detected ${ordered.length}`);
  }
  const doc = manifestDoc(
    values["instance-id"], img.width, img.height,
    ordered.map((det, i) => ({ slot_index: i + 1, mask: det.mask, box: det.box })),
  );
  await writeJson(values.out, doc);
  console.log(`wrote ${values.out} (${ordered.length} slots)`);
}

async function cmdExtract(argv: string[]): Promise<void> {
  const { values } = parseArgs({
    args: argv,
    options: {
      image: { type: "string" },
      manifest: { type: "string" },
      detections: { type: "string" },
      side: { type: "string" },
      "model-id": { type: "string" },
      out: { type: "string" },
      dims: { type: "string", multiple: true },
      config: { type: "string" },
    },
  });
  if (!values.image || !values.out || !values.side) {
    throw new Error("--image, --side, --out are required");
  }
  const side = values.side;
  if (side !== "gt" && side !== "gen") throw new Error("--side must be gt or gen");
  const backend = createBackend(await loadConfig(values.config));
  const img = await readImage(values.image);
  const dims = parseDims(values.dims);

  let instanceId: string;
  const entries: SubjectEntry[] = [];
  if (side === "gt") {
    if (!values.manifest) throw new Error("gt side requires --manifest");
    const doc = JSON.parse(await fs.readFile(values.manifest, "utf8"));
    instanceId = doc.instance_id;
    for (const slot of doc.gt_slots) {
      const mask = rleDecode(slot.mask);
      entries.push({ index: slot.slot_index, mask, box: slot.box });
    }
  } else {
    if (!values.detections) throw new Error("gen side requires --detections");
    if (!values["model-id"]) throw new Error("gen side requires --model-id");
    const doc = JSON.parse(await fs.readFile(values.detections, "utf8"));
    instanceId = doc.instance_id;
    for (const det of doc.detections) {
      const mask = rleDecode(det.mask);
      entries.push({ index: det.index, mask, box: det.box });
    }
  }

  const records = extractRecords(img, entries, backend, dims);
  const doc = featuresDoc(instanceId, side, records, side === "gen" ? values["model-id"] : undefined);
  validateFeaturesDoc(doc);
  await writeJson(values.out, doc);
  const validCount = records.filter((r) => r.valid).length;
  console.log(`wrote ${values.out} (${records.length} records, ${validCount} valid)`);
}

const COMMANDS: Record<string, (argv: string[]) => Promise<void>> = {
  sample: cmdSample,
  detect: cmdDetect,
  "make-manifest": cmdMakeManifest,
  extract: cmdExtract,
};

export async function runCli(argv: string[]): Promise<number> {
  const [command, ...rest] = argv;
  const handler = command ? COMMANDS[command] : undefined;
  if (!handler) {
    console.error(`usage: multibind-extractor <${Object.keys(COMMANDS).join("|")}> [options]`);
    return 2;
  }
  try {
    await handler(rest);
    return 0;
  } catch (err: any) {
    console.error(`error: ${err?.message ?? err}`);
    return 1;
  }
}

const entry = process.argv[1] ?? "";
if (entry.endsWith("cli.js") || entry.endsWith("multibind-extractor")) {
  runCli(process.argv.slice(2)).then((code) => {
    process.exitCode = code;
  });
}
