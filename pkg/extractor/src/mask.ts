/** Binary masks, tight boxes, COCO-style column-major RLE, connected components. */

export interface Mask {
  width: number;
  height: number;
  /** Row-major 0/1 occupancy. */
  bits: Uint8Array;
}

export interface Box {
  x1: number;
  y1: number;
  x2: number;
  y2: number;
}

export function emptyMask(width: number, height: number): Mask {
  return { width, height, bits: new Uint8Array(width * height) };
}

export function maskArea(mask: Mask): number {
  let n = 0;
  for (const v of mask.bits) n += v;
  return n;
}

export function tightBox(mask: Mask): Box {
  let x1 = mask.width, y1 = mask.height, x2 = -1, y2 = -1;
  for (let y = 0; y < mask.height; y++) {
    for (let x = 0; x < mask.width; x++) {
      if (mask.bits[y * mask.width + x]) {
        if (x < x1) x1 = x;
        if (x > x2) x2 = x;
        if (y < y1) y1 = y;
        if (y > y2) y2 = y;
      }
    }
  }
  if (x2 < 0) throw new Error("tightBox of empty mask");
  return { x1, y1, x2: x2 + 1, y2: y2 + 1 };
}

export function centroid(mask: Mask): [number, number] {
  let n = 0, sx = 0, sy = 0;
  for (let y = 0; y < mask.height; y++) {
    for (let x = 0; x < mask.width; x++) {
      if (mask.bits[y * mask.width + x]) {
        n++;
        sx += x;
        sy += y;
      }
    }
  }
  if (!n) throw new Error("centroid of empty mask");
  return [sx / n, sy / n];
}

/** Column-major run lengths starting with a run of zeros (COCO convention). */
export function rleCounts(mask: Mask): number[] {
  const counts: number[] = [];
  let current = 0;
  let run = 0;
  for (let x = 0; x < mask.width; x++) {
    for (let y = 0; y < mask.height; y++) {
      const v = mask.bits[y * mask.width + x];
      if (v === current) {
        run++;
      } else {
        counts.push(run);
        current = v;
        run = 1;
      }
    }
  }
  counts.push(run);
  return counts;
}

export function maskNode(mask: Mask): { format: "rle"; size: [number, number]; counts: number[] } {
  return { format: "rle", size: [mask.height, mask.width], counts: rleCounts(mask) };
}

/** 4-connected components over a foreground predicate, largest first. */
export function connectedComponents(
  width: number,
  height: number,
  isForeground: (x: number, y: number) => boolean,
  minArea: number,
): Mask[] {
  const seen = new Uint8Array(width * height);
  const out: Mask[] = [];
  const stack = new Int32Array(width * height);
  for (let y = 0; y < height; y++) {
    for (let x = 0; x < width; x++) {
      const start = y * width + x;
      if (seen[start] || !isForeground(x, y)) continue;
      const mask = emptyMask(width, height);
      let top = 0;
      stack[top++] = start;
      seen[start] = 1;
      let area = 0;
      while (top > 0) {
        const idx = stack[--top];
        const cx = idx % width;
        const cy = (idx - cx) / width;
        mask.bits[idx] = 1;
        area++;
        const neighbors = [
          [cx - 1, cy], [cx + 1, cy], [cx, cy - 1], [cx, cy + 1],
        ] as const;
        for (const [nx, ny] of neighbors) {
          if (nx < 0 || ny < 0 || nx >= width || ny >= height) continue;
          const nidx = ny * width + nx;
          if (!seen[nidx] && isForeground(nx, ny)) {
            seen[nidx] = 1;
            stack[top++] = nidx;
          }
        }
      }
      if (area >= minArea) out.push(mask);
    }
  }
  out.sort((a, b) => maskArea(b) - maskArea(a));
  return out;
}
