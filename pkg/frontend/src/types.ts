/** Shared workbench types. */

/** Seed in image pixel coordinates with an optional tangent orientation. */
export interface CanvasSeed {
  x: number;
  y: number;
  /** Radians in [0, 2*pi); null means "let the backend pick" (tubular). */
  theta: number | null;
  selected: boolean;
}

export type RunMode = 'contour' | 'group' | 'tubular';

export interface SeedFilePoint {
  x: number;
  y: number;
  theta: number | null;
}

/** Seed file schema shared with the batch CLI. */
export interface SeedFile {
  points: SeedFilePoint[];
  params: Record<string, unknown>;
}

export interface SessionInfo {
  session_id: string;
  status: 'computing' | 'idle' | 'error';
  error: string | null;
  image_size: [number, number];
  n_seeds: number;
  jobs: Record<string, string>;
}

const TWO_PI = 2 * Math.PI;

export function normalizeAngle(theta: number): number {
  let t = theta % TWO_PI;
  if (t < 0) t += TWO_PI;
  return t === TWO_PI ? 0 : t;
}
