/**
 * Workbench wiring: canvas interaction, session lifecycle, run control.
 *
 * Click places a seed; dragging a seed moves it; dragging its arrow tip
 * rotates the tangent (direction sign matters: the metric is asymmetric).
 * Wheel zooms around the cursor, middle-drag pans.  Runs call the session
 * service and draw the returned vector paths; a banner reports service
 * failures without touching local state.
 */

import { SessionApi, ServiceError } from './api';
import { drawScene, resultSegments } from './overlay';
import { exportSeedsJson, hitTest, importSeeds, makeSeed, rotateHandleTo } from './seeds';
import { WorkbenchState } from './state';
import { ViewTransform } from './transform';
import { RunMode } from './types';

const api = new SessionApi('');
const state = new WorkbenchState();
const view = new ViewTransform(4, 20, 20);

let imageBitmap: ImageBitmap | null = null;
let imageSize: [number, number] = [0, 0];
let segments: number[][][] = [];

const canvas = document.getElementById('canvas') as HTMLCanvasElement;
const ctx = canvas.getContext('2d')!;
const bannerEl = document.getElementById('banner') as HTMLDivElement;
const modeEl = document.getElementById('mode') as HTMLSelectElement;
const statusEl = document.getElementById('status') as HTMLSpanElement;

function redraw(): void {
  drawScene(ctx, imageBitmap, imageSize, segments, state.seeds, view);
  statusEl.textContent = state.runInFlight
    ? 'computing…'
    : state.sessionId
      ? `session ${state.sessionId}: ${state.seeds.length} seeds`
      : 'no session';
}

function banner(msg: string | null): void {
  state.banner = msg;
  bannerEl.textContent = msg ?? '';
  bannerEl.style.display = msg ? 'block' : 'none';
}

async function syncSeeds(): Promise<void> {
  if (!state.sessionId || !state.needsSync) return;
  await api.putSeeds(state.sessionId, state.seeds);
  state.markSynced();
}

// --- session lifecycle ------------------------------------------------------

(document.getElementById('file') as HTMLInputElement).addEventListener('change', async (ev) => {
  const input = ev.target as HTMLInputElement;
  const file = input.files?.[0];
  if (!file) return;
  try {
    banner(null);
    imageBitmap = await createImageBitmap(await file.arrayBuffer().then((b) => new Blob([b])));
    imageSize = [imageBitmap.width, imageBitmap.height];
    const params = {
      grid: { n_theta: 36 },
      metric: { kind: 'data_driven_finsler_elastica', lambda: 100.0, alpha: 50.0 },
      features: { kind: 'edge', sigma: 2.0, order: 5, eta: 10.0, p: 2.0 },
    };
    state.sessionId = await api.createSession(file, params);
    await api.waitIdle(state.sessionId);
    segments = [];
    redraw();
  } catch (err) {
    banner(`session creation failed: ${(err as Error).message}`);
  }
});

// --- canvas interaction -----------------------------------------------------

type Drag =
  | { kind: 'seed'; index: number }
  | { kind: 'handle'; index: number }
  | { kind: 'pan'; lastX: number; lastY: number }
  | null;
let drag: Drag = null;

function screenPoint(ev: MouseEvent) {
  const rect = canvas.getBoundingClientRect();
  return { x: ev.clientX - rect.left, y: ev.clientY - rect.top };
}

canvas.addEventListener('mousedown', (ev) => {
  const p = screenPoint(ev);
  if (ev.button === 1) {
    drag = { kind: 'pan', lastX: p.x, lastY: p.y };
    ev.preventDefault();
    return;
  }
  const hit = hitTest(state.seeds, p, view);
  if (hit.kind === 'none') {
    const img = view.toImage(p);
    state.edit((seeds) => {
      seeds.forEach((s) => (s.selected = false));
      const seed = makeSeed(img.x, img.y, 0);
      seed.selected = true;
      seeds.push(seed);
    });
    drag = { kind: 'seed', index: state.seeds.length - 1 };
  } else {
    state.edit((seeds) => {
      seeds.forEach((s, i) => (s.selected = i === hit.index));
    });
    drag = hit.kind === 'handle'
      ? { kind: 'handle', index: hit.index }
      : { kind: 'seed', index: hit.index };
  }
  redraw();
});

canvas.addEventListener('mousemove', (ev) => {
  if (!drag) return;
  const p = screenPoint(ev);
  if (drag.kind === 'pan') {
    view.panBy(p.x - drag.lastX, p.y - drag.lastY);
    drag.lastX = p.x;
    drag.lastY = p.y;
  } else if (drag.kind === 'seed') {
    const index = drag.index;
    const img = view.toImage(p);
    state.edit((seeds) => {
      if (seeds[index]) {
        seeds[index].x = img.x;
        seeds[index].y = img.y;
      }
    });
  } else {
    const index = drag.index;
    state.edit((seeds) => {
      if (seeds[index]) rotateHandleTo(seeds[index], p, view);
    });
  }
  redraw();
});

window.addEventListener('mouseup', () => (drag = null));

canvas.addEventListener('wheel', (ev) => {
  ev.preventDefault();
  view.zoomAt(screenPoint(ev as MouseEvent), ev.deltaY < 0 ? 1.2 : 1 / 1.2);
  redraw();
});

window.addEventListener('keydown', (ev) => {
  if (ev.key === 'Delete' || ev.key === 'Backspace') {
    state.edit((seeds) => {
      const keep = seeds.filter((s) => !s.selected);
      seeds.length = 0;
      seeds.push(...keep);
    });
    redraw();
  }
});

// --- runs --------------------------------------------------------------------

(document.getElementById('run') as HTMLButtonElement).addEventListener('click', async () => {
  if (!state.canRun() || !state.sessionId) {
    banner('need a session and at least 2 seeds');
    return;
  }
  const mode = modeEl.value as RunMode;
  try {
    banner(null);
    state.beginRun();
    redraw();
    await syncSeeds();
    const job = await api.run(state.sessionId, mode);
    state.displayedJob = job;
    const doc = await api.results(state.sessionId, job);
    segments = resultSegments(doc);
  } catch (err) {
    const msg = err instanceof ServiceError
      ? `service error ${err.status}: ${err.message}`
      : `service unreachable: ${(err as Error).message}`;
    banner(msg);
  } finally {
    state.endRun();
    void syncSeeds().catch(() => undefined);
    redraw();
  }
});

// --- seed import/export -----------------------------------------------------

(document.getElementById('export') as HTMLButtonElement).addEventListener('click', () => {
  const blob = new Blob([exportSeedsJson(state.seeds)], { type: 'application/json' });
  const a = document.createElement('a');
  a.href = URL.createObjectURL(blob);
  a.download = 'seeds.json';
  a.click();
  URL.revokeObjectURL(a.href);
});

(document.getElementById('import') as HTMLInputElement).addEventListener('change', async (ev) => {
  const file = (ev.target as HTMLInputElement).files?.[0];
  if (!file) return;
  try {
    const seeds = importSeeds(await file.text());
    state.edit((current) => {
      current.length = 0;
      current.push(...seeds);
    });
    redraw();
  } catch (err) {
    banner(`seed import failed: ${(err as Error).message}`);
  }
});

redraw();
