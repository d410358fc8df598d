import { describe, expect, it } from 'vitest';

import { makeSeed } from '../src/seeds';
import { WorkbenchState } from '../src/state';

describe('WorkbenchState', () => {
  it('applies edits immediately when idle', () => {
    const st = new WorkbenchState();
    st.edit((seeds) => seeds.push(makeSeed(1, 2, 0)));
    expect(st.seeds.length).toBe(1);
    expect(st.needsSync).toBe(true);
    st.markSynced();
    expect(st.needsSync).toBe(false);
  });

  it('queues edits during a run and replays them afterwards', () => {
    const st = new WorkbenchState();
    st.edit((seeds) => seeds.push(makeSeed(1, 1, 0)));
    st.edit((seeds) => seeds.push(makeSeed(2, 2, 0)));
    st.sessionId = 'abc';
    st.beginRun();
    st.edit((seeds) => seeds.push(makeSeed(3, 3, 0)));
    st.edit((seeds) => seeds[0].x = 9);
    expect(st.seeds.length).toBe(2);       // not applied yet
    expect(st.pendingEdits).toBe(2);
    st.endRun();
    expect(st.seeds.length).toBe(3);       // queued edits not lost
    expect(st.seeds[0].x).toBe(9);
    expect(st.needsSync).toBe(true);
  });

  it('allows only one run in flight', () => {
    const st = new WorkbenchState();
    st.sessionId = 's';
    st.edit((seeds) => {
      seeds.push(makeSeed(0, 0, 0));
      seeds.push(makeSeed(1, 1, 0));
    });
    expect(st.canRun()).toBe(true);
    st.beginRun();
    expect(st.canRun()).toBe(false);
    expect(() => st.beginRun()).toThrow();
    st.endRun();
    expect(st.canRun()).toBe(true);
  });

  it('requires a session and two seeds to run', () => {
    const st = new WorkbenchState();
    expect(st.canRun()).toBe(false);
    st.sessionId = 's';
    st.edit((seeds) => seeds.push(makeSeed(0, 0, 0)));
    expect(st.canRun()).toBe(false);
    st.edit((seeds) => seeds.push(makeSeed(1, 1, 0)));
    expect(st.canRun()).toBe(true);
  });
});
