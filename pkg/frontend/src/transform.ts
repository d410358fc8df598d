/**
 * Zoom/pan transform between image pixel coordinates and screen pixels.
 *
 * screen = image * zoom + pan; the transform stays invertible (zoom > 0)
 * and zooming is anchored at a screen point so the pixel under the cursor
 * does not move.
 */

export interface Point {
  x: number;
  y: number;
}

export class ViewTransform {
  zoom: number;
  panX: number;
  panY: number;

  constructor(zoom = 1, panX = 0, panY = 0) {
    if (!(zoom > 0)) throw new Error('zoom must be positive');
    this.zoom = zoom;
    this.panX = panX;
    this.panY = panY;
  }

  toScreen(p: Point): Point {
    return { x: p.x * this.zoom + this.panX, y: p.y * this.zoom + this.panY };
  }

  toImage(p: Point): Point {
    return { x: (p.x - this.panX) / this.zoom, y: (p.y - this.panY) / this.zoom };
  }

  /** Rescale around a fixed screen point (cursor-anchored zoom). */
  zoomAt(anchor: Point, factor: number): void {
    if (!(factor > 0)) throw new Error('zoom factor must be positive');
    const before = this.toImage(anchor);
    this.zoom *= factor;
    const after = this.toScreen(before);
    this.panX += anchor.x - after.x;
    this.panY += anchor.y - after.y;
  }

  panBy(dx: number, dy: number): void {
    this.panX += dx;
    this.panY += dy;
  }

  clone(): ViewTransform {
    return new ViewTransform(this.zoom, this.panX, this.panY);
  }
}
