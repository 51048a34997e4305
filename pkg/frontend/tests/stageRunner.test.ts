import { describe, expect, it } from "vitest";

import { StageRunner } from "../src/stageRunner.js";

interface Pending {
  args: string;
  resolve: (value: string) => void;
  reject: (reason: unknown) => void;
}

function deferredRunner() {
  const pending: Pending[] = [];
  const runner = new StageRunner<string, string>(
    (args) =>
      new Promise<string>((resolve, reject) => {
        pending.push({ args, resolve, reject });
      }),
  );
  return { runner, pending };
}

const settle = () => new Promise<void>((resolve) => setTimeout(resolve, 0));

describe("single flight", () => {
  it("runs an idle request immediately", async () => {
    const { runner, pending } = deferredRunner();
    const p = runner.request("a");
    expect(runner.startedCount).toBe(1);
    expect(runner.inFlight).toBe(true);
    pending[0].resolve("ra");
    await expect(p).resolves.toBe("ra");
    await settle();
    expect(runner.inFlight).toBe(false);
  });

  it("coalesces a burst into one trailing run with the latest args", async () => {
    const { runner, pending } = deferredRunner();
    const p1 = runner.request("a");
    const p2 = runner.request("b");
    const p3 = runner.request("c");
    const p4 = runner.request("d");
    expect(runner.startedCount).toBe(1);
    expect(pending.map((p) => p.args)).toEqual(["a"]);

    pending[0].resolve("ra");
    await settle();
    expect(runner.startedCount).toBe(2);
    expect(pending.map((p) => p.args)).toEqual(["a", "d"]);

    pending[1].resolve("rd");
    await settle();
    expect(await p1).toBe("ra");
    expect(await Promise.all([p2, p3, p4])).toEqual(["rd", "rd", "rd"]);
  });

  it("rejects every queued waiter when the trailing run fails", async () => {
    const { runner, pending } = deferredRunner();
    const p1 = runner.request("a");
    const p2 = runner.request("b");
    const p3 = runner.request("c");

    pending[0].resolve("ra");
    await settle();
    pending[1].reject(new Error("boom"));
    await expect(p1).resolves.toBe("ra");
    await expect(p2).rejects.toThrow("boom");
    await expect(p3).rejects.toThrow("boom");
  });

  it("a failed run frees the runner for the next request", async () => {
    const { runner, pending } = deferredRunner();
    const p1 = runner.request("a");
    pending[0].reject(new Error("down"));
    await expect(p1).rejects.toThrow("down");
    await settle();

    const p2 = runner.request("b");
    expect(runner.startedCount).toBe(2);
    pending[1].resolve("rb");
    await expect(p2).resolves.toBe("rb");
  });

  it("sequential requests each run once", async () => {
    const { runner, pending } = deferredRunner();
    const p1 = runner.request("a");
    pending[0].resolve("ra");
    await p1;
    await settle();

    const p2 = runner.request("b");
    pending[1].resolve("rb");
    await p2;
    expect(runner.startedCount).toBe(2);
  });
});
