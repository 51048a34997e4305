/**
 * Single-flight executor for stage requests. At most one request is in
 * flight per runner (one per session); edits arriving while busy coalesce
 * into a single trailing run that uses only the latest arguments, so a
 * burst of slider changes costs at most one extra request.
 */

export interface QueuedCall<A, R> {
  args: A;
  resolvers: { resolve: (value: R) => void; reject: (reason: unknown) => void }[];
}

export class StageRunner<A, R> {
  private busy = false;
  private pending: QueuedCall<A, R> | null = null;
  private started = 0;

  constructor(private readonly run: (args: A) => Promise<R>) {}

  /** Number of underlying runs actually started (for tests/diagnostics). */
  get startedCount(): number {
    return this.started;
  }

  get inFlight(): boolean {
    return this.busy;
  }

  request(args: A): Promise<R> {
    if (this.busy) {
      // Coalesce: replace any queued args, but keep every waiter.
      if (this.pending === null) {
        this.pending = { args, resolvers: [] };
      } else {
        this.pending.args = args;
      }
      const slot = this.pending;
      return new Promise<R>((resolve, reject) => {
        slot.resolvers.push({ resolve, reject });
      });
    }
    this.busy = true;
    this.started += 1;
    const done = this.run(args);
    void done.catch(() => undefined).then(() => this.finish());
    return done;
  }

  private finish(): void {
    this.busy = false;
    const next = this.pending;
    if (next === null) {
      return;
    }
    this.pending = null;
    this.busy = true;
    this.started += 1;
    this.run(next.args).then(
      (value) => {
        for (const r of next.resolvers) {
          r.resolve(value);
        }
        this.finish();
      },
      (reason) => {
        for (const r of next.resolvers) {
          r.reject(reason);
        }
        this.finish();
      },
    );
  }
}
