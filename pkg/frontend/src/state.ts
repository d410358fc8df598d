/**
 * Workbench state: one session, one in-flight run, seed edits queued (not
 * lost) while a run is computing, and a pending-sync flag so the server's
 * seed list converges to the local one after every edit burst.
 */

import { CanvasSeed, RunMode } from './types';

export type SyncStatus = 'clean' | 'dirty';

export class WorkbenchState {
  seeds: CanvasSeed[] = [];
  sessionId: string | null = null;
  mode: RunMode = 'contour';
  runInFlight = false;
  displayedJob: string | null = null;
  banner: string | null = null;
  private sync: SyncStatus = 'clean';
  private editQueue: Array<(seeds: CanvasSeed[]) => void> = [];

  /** Apply a seed edit; while a run is computing the edit is queued. */
  edit(fn: (seeds: CanvasSeed[]) => void): void {
    if (this.runInFlight) {
      this.editQueue.push(fn);
      return;
    }
    fn(this.seeds);
    this.sync = 'dirty';
  }

  get pendingEdits(): number {
    return this.editQueue.length;
  }

  get needsSync(): boolean {
    return this.sync === 'dirty';
  }

  markSynced(): void {
    this.sync = 'clean';
  }

  canRun(): boolean {
    return this.sessionId !== null && !this.runInFlight && this.seeds.length >= 2;
  }

  beginRun(): void {
    if (this.runInFlight) throw new Error('a run is already in flight');
    this.runInFlight = true;
  }

  /** Finish the run and replay any edits queued while it computed. */
  endRun(): void {
    this.runInFlight = false;
    const queued = this.editQueue;
    this.editQueue = [];
    for (const fn of queued) {
      fn(this.seeds);
      this.sync = 'dirty';
    }
  }
}
