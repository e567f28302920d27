/** Geometry for the radial topic chart and its evaluation banding. */
import type { ChartPayload, ChartRegion, ChartSubregion } from "./types.js";

export interface Wedge {
  topic: string;
  category: string | null; // null for whole-region wedges
  startAngle: number;
  endAngle: number;
  innerRadius: number;
  outerRadius: number;
  path: string;
}

/** One banded region of the evaluation view. */
export interface RegionBands {
  topic: string;
  count: number;
  bands: { category: string | null; count: number; fraction: number }[];
}

const EPS = 1e-9;

export function validateChart(payload: ChartPayload): void {
  const total = payload.regions.reduce((s, r) => s + r.angle, 0);
  if (Math.abs(total - 360) > 1e-6) {
    throw new Error(`region angles sum to ${total}, expected 360`);
  }
  let cursor = 0;
  for (const region of payload.regions) {
    if (Math.abs(region.start_angle - cursor) > 1e-6) {
      throw new Error(`region ${region.topic} does not tile the circle`);
    }
    cursor += region.angle;
  }
}

/** Whole-region wedges for the plain topic chart. */
export function topicWedges(payload: ChartPayload, radius = 100): Wedge[] {
  validateChart(payload);
  return payload.regions.map((r) => wedge(r.topic, null, r.start_angle, r.angle, 0, radius));
}

/** Per-category wedges: each region is split into its category bands. */
export function evaluationWedges(payload: ChartPayload, radius = 100): Wedge[] {
  validateChart(payload);
  const out: Wedge[] = [];
  for (const region of payload.regions) {
    for (const band of region.subregions) {
      out.push(
        wedge(
          region.topic,
          band.category,
          region.start_angle + band.start_angle,
          band.width,
          0,
          radius,
        ),
      );
    }
  }
  return out;
}

/** Category banding per region, in the server-declared category order. */
export function regionBands(payload: ChartPayload): RegionBands[] {
  return payload.regions.map((region) => ({
    topic: region.topic,
    count: region.count,
    bands: region.subregions.map((band: ChartSubregion) => ({
      category: band.category,
      count: band.count,
      fraction: region.count > 0 ? band.count / region.count : 0,
    })),
  }));
}

/** The region a document belongs to, for hover/selection. */
export function regionForDoc(payload: ChartPayload, docId: string): ChartRegion | null {
  return payload.regions.find((r) => r.doc_ids.includes(docId)) ?? null;
}

function wedge(
  topic: string,
  category: string | null,
  startAngle: number,
  angle: number,
  innerRadius: number,
  outerRadius: number,
): Wedge {
  return {
    topic,
    category,
    startAngle,
    endAngle: startAngle + angle,
    innerRadius,
    outerRadius,
    path: arcPath(startAngle, startAngle + angle, outerRadius),
  };
}

/** SVG path for a filled circular sector centred on the origin. */
export function arcPath(startAngle: number, endAngle: number, radius: number): string {
  const span = endAngle - startAngle;
  if (span >= 360 - EPS) {
    // a full circle cannot be a single arc; use two half circles
    return (
      `M ${radius} 0 A ${radius} ${radius} 0 1 1 ${-radius} 0 ` +
      `A ${radius} ${radius} 0 1 1 ${radius} 0 Z`
    );
  }
  const [x0, y0] = polar(startAngle, radius);
  const [x1, y1] = polar(endAngle, radius);
  const large = span > 180 ? 1 : 0;
  return `M 0 0 L ${x0} ${y0} A ${radius} ${radius} 0 ${large} 1 ${x1} ${y1} Z`;
}

function polar(angleDeg: number, radius: number): [number, number] {
  const rad = ((angleDeg - 90) * Math.PI) / 180; // 0 degrees points up
  return [radius * Math.cos(rad), radius * Math.sin(rad)];
}
