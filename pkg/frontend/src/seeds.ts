/**
 * Seed collection: placement, hit testing, tangent handles, and the seed
 * file format shared with the batch CLI (points with optional theta).
 */

import { CanvasSeed, SeedFile, normalizeAngle } from './types';
import { Point, ViewTransform } from './transform';

/** Screen length of the tangent arrow handle, matching the overlay renderer. */
export const ARROW_LEN = 12;
const SEED_HIT_RADIUS = 6;
const HANDLE_HIT_RADIUS = 7;

export type Hit =
  | { kind: 'seed'; index: number }
  | { kind: 'handle'; index: number }
  | { kind: 'none' };

export function makeSeed(x: number, y: number, theta: number | null = 0): CanvasSeed {
  return { x, y, theta: theta === null ? null : normalizeAngle(theta), selected: false };
}

/** Arrow tip position of a seed's tangent handle, in screen coordinates. */
export function handleTip(seed: CanvasSeed, view: ViewTransform): Point | null {
  if (seed.theta === null) return null;
  const base = view.toScreen(seed);
  return {
    x: base.x + ARROW_LEN * Math.cos(seed.theta),
    y: base.y + ARROW_LEN * Math.sin(seed.theta),
  };
}

/** Topmost hit among tangent handles, then seed dots. */
export function hitTest(seeds: CanvasSeed[], screen: Point, view: ViewTransform): Hit {
  for (let i = seeds.length - 1; i >= 0; i--) {
    const tip = handleTip(seeds[i], view);
    if (tip && Math.hypot(tip.x - screen.x, tip.y - screen.y) <= HANDLE_HIT_RADIUS) {
      return { kind: 'handle', index: i };
    }
  }
  for (let i = seeds.length - 1; i >= 0; i--) {
    const s = view.toScreen(seeds[i]);
    if (Math.hypot(s.x - screen.x, s.y - screen.y) <= SEED_HIT_RADIUS) {
      return { kind: 'seed', index: i };
    }
  }
  return { kind: 'none' };
}

/** Rotate a seed's tangent so the arrow points at the given screen point. */
export function rotateHandleTo(seed: CanvasSeed, screen: Point, view: ViewTransform): void {
  const base = view.toScreen(seed);
  seed.theta = normalizeAngle(Math.atan2(screen.y - base.y, screen.x - base.x));
}

export function exportSeeds(seeds: CanvasSeed[], params: Record<string, unknown> = {}): SeedFile {
  return {
    points: seeds.map((s) => ({ x: s.x, y: s.y, theta: s.theta })),
    params,
  };
}

export function exportSeedsJson(seeds: CanvasSeed[], params: Record<string, unknown> = {}): string {
  return JSON.stringify(exportSeeds(seeds, params), null, 2) + '\n';
}

export function importSeeds(doc: unknown): CanvasSeed[] {
  if (typeof doc === 'string') doc = JSON.parse(doc);
  const file = doc as SeedFile;
  if (!file || !Array.isArray(file.points)) {
    throw new Error('seed file needs a points list');
  }
  return file.points.map((p) => {
    if (typeof p.x !== 'number' || typeof p.y !== 'number') {
      throw new Error('each seed needs numeric x and y');
    }
    const theta = p.theta === null || p.theta === undefined ? null : p.theta;
    return makeSeed(p.x, p.y, theta);
  });
}
