/** Wire types mirroring the service's annotation JSON schema (version 1). */

export type ShapeKind = "annual" | "earlywood_latewood" | "defect" | "region_of_interest";
export type ShapeType = "polygon" | "linestrip";

export interface Shape {
  id: string;
  label: string;
  kind: ShapeKind;
  shapeType: ShapeType;
  points: [number, number][];
  yearLabel: number | null;
  nodeBudget: number;
  [extra: string]: unknown;
}

export interface AnnotationFile {
  version: number;
  imagePath: string;
  imageWidth: number;
  imageHeight: number;
  scale: { pixelsPerMm: number; source: string } | null;
  pith: { x: number; y: number; method: string } | null;
  harvestYear: number | null;
  provenance: Record<string, string>;
  shapes: Shape[];
  [extra: string]: unknown;
}

export interface MetricsRow {
  ringIndex: number;
  annulusArea: number;
  cumulativeArea: number;
  perimeter: number;
  equivalentRingWidth: number;
  similarityFactor: number;
  eccentricityModule: number;
  eccentricityPhase: number;
  ewArea: number | null;
  lwArea: number | null;
  cumulativeEwArea: number | null;
  excludedArea: number;
  yearLabel: number | null;
}

export interface RaySeriesWire {
  ray: { angleDeg: number; origin: [number, number] };
  hits: { ringIndex: number; distanceMm: number; point: [number, number] }[];
  widths: { ringIndex: number; widthMm: number }[];
  skipped: number[];
}

export interface Violation {
  code: string;
  shapeId: string | null;
  message: string;
}

export function cloneDoc(doc: AnnotationFile): AnnotationFile {
  return structuredClone(doc);
}

export function deepEqual(a: unknown, b: unknown): boolean {
  if (Object.is(a, b)) return true;
  if (typeof a !== typeof b || a === null || b === null) return false;
  if (Array.isArray(a) || Array.isArray(b)) {
    if (!Array.isArray(a) || !Array.isArray(b) || a.length !== b.length) return false;
    return a.every((v, i) => deepEqual(v, b[i]));
  }
  if (typeof a === "object") {
    const ka = Object.keys(a as object).sort();
    const kb = Object.keys(b as object).sort();
    if (!deepEqual(ka, kb)) return false;
    return ka.every((k) =>
      deepEqual((a as Record<string, unknown>)[k], (b as Record<string, unknown>)[k])
    );
  }
  return false;
}

/** Shoelace area of a point loop (treated as closed). */
export function shoelaceArea(points: [number, number][]): number {
  let s = 0;
  for (let i = 0; i < points.length; i++) {
    const [x0, y0] = points[i];
    const [x1, y1] = points[(i + 1) % points.length];
    s += x0 * y1 - x1 * y0;
  }
  return Math.abs(s / 2);
}

/**
 * Insertion index that keeps closed annual shapes ordered by enclosed
 * area (the document invariant the server validates).
 */
export function annualInsertIndex(shapes: Shape[], area: number): number {
  let lastAnnual = -1;
  for (let i = 0; i < shapes.length; i++) {
    const s = shapes[i];
    if (s.kind !== "annual" || s.shapeType !== "polygon") continue;
    if (shoelaceArea(s.points) > area) return i;
    lastAnnual = i;
  }
  return lastAnnual + 1;
}

export function distancePointToSegment(
  px: number,
  py: number,
  ax: number,
  ay: number,
  bx: number,
  by: number
): number {
  const dx = bx - ax;
  const dy = by - ay;
  const len2 = dx * dx + dy * dy;
  const t = len2 === 0 ? 0 : Math.max(0, Math.min(1, ((px - ax) * dx + (py - ay) * dy) / len2));
  return Math.hypot(px - (ax + t * dx), py - (ay + t * dy));
}

export interface EdgeHit {
  segment: number;
  distance: number;
}

/** Nearest edge of a shape to an image-space point. */
export function nearestEdge(shape: Shape, x: number, y: number): EdgeHit {
  const pts = shape.points;
  const closed = shape.shapeType === "polygon";
  const nSeg = closed ? pts.length : pts.length - 1;
  let best: EdgeHit = { segment: 0, distance: Infinity };
  for (let i = 0; i < nSeg; i++) {
    const [ax, ay] = pts[i];
    const [bx, by] = pts[(i + 1) % pts.length];
    const d = distancePointToSegment(x, y, ax, ay, bx, by);
    if (d < best.distance) best = { segment: i, distance: d };
  }
  return best;
}

export function nearestNode(shape: Shape, x: number, y: number): { index: number; distance: number } {
  let best = { index: 0, distance: Infinity };
  shape.points.forEach(([px, py], i) => {
    const d = Math.hypot(px - x, py - y);
    if (d < best.distance) best = { index: i, distance: d };
  });
  return best;
}
