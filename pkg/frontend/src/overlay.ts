/** Canvas drawing: image, vector paths with per-segment colors, seed glyphs. */

import { CanvasSeed } from './types';
import { ViewTransform } from './transform';
import { ARROW_LEN, handleTip } from './seeds';

export const PATH_COLORS = [
  '#e63946', '#1d3557', '#2a9d8f', '#e9c46a', '#f4a261', '#264653',
  '#90be6d', '#f9844a',
];
const SEED_COLOR = '#4287f5';
const SELECTED_COLOR = '#ff8c00';

export interface SegmentDoc {
  points: number[][];
}

/** Vector paths from a result document, drawn crisply at any zoom. */
export function resultSegments(doc: any): number[][][] {
  const out: number[][][] = [];
  if (!doc || typeof doc !== 'object') return out;
  if (doc.mode === 'contour') {
    for (const seg of doc.segments ?? []) out.push(seg.points);
  } else if (doc.mode === 'group') {
    for (const g of doc.groups ?? []) for (const seg of g.segments ?? []) out.push(seg.points);
  } else if (doc.mode === 'tubular') {
    for (const line of doc.centerlines ?? []) if (line.path) out.push(line.path.points);
  }
  return out;
}

export function drawScene(
  ctx: CanvasRenderingContext2D,
  image: CanvasImageSource | null,
  imageSize: [number, number],
  segments: number[][][],
  seeds: CanvasSeed[],
  view: ViewTransform,
  arrivalLabels = true,
): void {
  const canvas = ctx.canvas;
  ctx.save();
  ctx.fillStyle = '#202020';
  ctx.fillRect(0, 0, canvas.width, canvas.height);
  ctx.setTransform(view.zoom, 0, 0, view.zoom, view.panX, view.panY);
  ctx.imageSmoothingEnabled = view.zoom < 4;
  if (image) {
    ctx.drawImage(image, 0, 0, imageSize[0], imageSize[1]);
  }
  ctx.restore();

  segments.forEach((pts, n) => {
    if (pts.length < 2) return;
    ctx.strokeStyle = PATH_COLORS[n % PATH_COLORS.length];
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    pts.forEach((p, i) => {
      const s = view.toScreen({ x: p[0], y: p[1] });
      if (i === 0) ctx.moveTo(s.x, s.y);
      else ctx.lineTo(s.x, s.y);
    });
    ctx.stroke();
    if (arrivalLabels) {
      const head = view.toScreen({ x: pts[0][0], y: pts[0][1] });
      ctx.fillStyle = PATH_COLORS[n % PATH_COLORS.length];
      ctx.font = '11px sans-serif';
      ctx.fillText(String(n + 1), head.x + 4, head.y - 4);
    }
  });

  for (const seed of seeds) {
    const s = view.toScreen(seed);
    ctx.fillStyle = seed.selected ? SELECTED_COLOR : SEED_COLOR;
    ctx.beginPath();
    ctx.arc(s.x, s.y, 3, 0, 2 * Math.PI);
    ctx.fill();
    const tip = handleTip(seed, view);
    if (tip) {
      ctx.strokeStyle = seed.selected ? SELECTED_COLOR : SEED_COLOR;
      ctx.lineWidth = 1.5;
      ctx.beginPath();
      ctx.moveTo(s.x, s.y);
      ctx.lineTo(tip.x, tip.y);
      ctx.stroke();
      const theta = Math.atan2(tip.y - s.y, tip.x - s.x);
      for (const side of [0.4, -0.4]) {
        ctx.beginPath();
        ctx.moveTo(tip.x, tip.y);
        ctx.lineTo(
          tip.x - 0.4 * ARROW_LEN * Math.cos(theta - side),
          tip.y - 0.4 * ARROW_LEN * Math.sin(theta - side),
        );
        ctx.stroke();
      }
      ctx.beginPath();
      ctx.arc(tip.x, tip.y, 2, 0, 2 * Math.PI);
      ctx.fill();
    }
  }
}
