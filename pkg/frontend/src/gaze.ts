/** Rate limiter for hover-as-gaze: at most one message per 100 ms. */

export class GazeLimiter {
  private last = -Infinity;

  constructor(
    private minIntervalMs = 100,
    private now: () => number = () => performance.now(),
  ) {}

  /** True if a gaze message may be sent now; consumes the slot if so. */
  allow(): boolean {
    const t = this.now();
    if (t - this.last >= this.minIntervalMs) {
      this.last = t;
      return true;
    }
    return false;
  }
}
