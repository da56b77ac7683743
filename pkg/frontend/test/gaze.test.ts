import { describe, expect, it } from "vitest";
import { GazeLimiter } from "../src/gaze";

describe("gaze rate limit", () => {
  it("hovering for one second emits at most 10 gaze slots", () => {
    let clock = 0;
    const limiter = new GazeLimiter(100, () => clock);
    let sent = 0;
    // 60 Hz pointer events for 1 s
    for (let i = 0; i < 60; i++) {
      clock = (i * 1000) / 60;
      if (limiter.allow()) sent++;
    }
    expect(sent).toBeLessThanOrEqual(10);
    expect(sent).toBeGreaterThan(0);
  });

  it("spaced hovers all pass", () => {
    let clock = 0;
    const limiter = new GazeLimiter(100, () => clock);
    let sent = 0;
    for (let i = 0; i < 5; i++) {
      clock = i * 250;
      if (limiter.allow()) sent++;
    }
    expect(sent).toBe(5);
  });
});
