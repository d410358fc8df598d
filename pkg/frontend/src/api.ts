/** Thin client for the local session service. */

import { CanvasSeed, RunMode, SessionInfo } from './types';

export class ServiceError extends Error {
  status: number;
  constructor(status: number, message: string) {
    super(message);
    this.status = status;
  }
}

async function expectOk(res: Response): Promise<Response> {
  if (!res.ok) {
    let detail = res.statusText;
    try {
      const body = await res.json();
      detail = JSON.stringify(body.detail ?? body);
    } catch {
      /* keep statusText */
    }
    throw new ServiceError(res.status, detail);
  }
  return res;
}

export class SessionApi {
  constructor(private baseUrl: string = '') {}

  async createSession(image: Blob, params: Record<string, unknown>): Promise<string> {
    const form = new FormData();
    form.append('image', image, 'upload.png');
    form.append('params', JSON.stringify(params));
    const res = await expectOk(await fetch(`${this.baseUrl}/sessions`, {
      method: 'POST',
      body: form,
    }));
    return (await res.json()).session_id as string;
  }

  async status(sessionId: string): Promise<SessionInfo> {
    const res = await expectOk(await fetch(`${this.baseUrl}/sessions/${sessionId}`));
    return (await res.json()) as SessionInfo;
  }

  async waitIdle(sessionId: string, intervalMs = 250, timeoutMs = 120000): Promise<SessionInfo> {
    const t0 = Date.now();
    for (;;) {
      const info = await this.status(sessionId);
      if (info.status !== 'computing') return info;
      if (Date.now() - t0 > timeoutMs) throw new ServiceError(408, 'feature computation timed out');
      await new Promise((r) => setTimeout(r, intervalMs));
    }
  }

  async putSeeds(sessionId: string, seeds: CanvasSeed[]): Promise<void> {
    const body = { points: seeds.map((s) => ({ x: s.x, y: s.y, theta: s.theta })) };
    await expectOk(await fetch(`${this.baseUrl}/sessions/${sessionId}/seeds`, {
      method: 'PUT',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(body),
    }));
  }

  async run(sessionId: string, mode: RunMode, params: Record<string, unknown> = {}): Promise<string> {
    const res = await expectOk(await fetch(`${this.baseUrl}/sessions/${sessionId}/run`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ mode, params }),
    }));
    return (await res.json()).job_id as string;
  }

  /** Poll the job until its result document is ready. */
  async results(sessionId: string, jobId: string, intervalMs = 300,
                timeoutMs = 600000): Promise<unknown> {
    const t0 = Date.now();
    for (;;) {
      const res = await fetch(`${this.baseUrl}/sessions/${sessionId}/results/${jobId}`);
      if (res.status === 202) {
        if (Date.now() - t0 > timeoutMs) throw new ServiceError(408, 'run timed out');
        await new Promise((r) => setTimeout(r, intervalMs));
        continue;
      }
      await expectOk(res);
      return res.json();
    }
  }

  overlayUrl(sessionId: string, jobId: string): string {
    return `${this.baseUrl}/sessions/${sessionId}/overlay/${jobId}`;
  }
}
