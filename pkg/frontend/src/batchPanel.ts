/**
 * Batch tab logic: start a job from the session's uploads, poll file-level
 * progress, and download the archive with an integrity hash so the saved
 * zip can be checked against the job's server-side artifact.
 */

import type { Client } from "./api.js";
import type { ConfigPatch, JobStatus } from "./types.js";

export interface BatchProgress {
  done: number;
  total: number;
  state: JobStatus["state"];
}

export interface BatchOutcome {
  status: JobStatus;
  bytes: Uint8Array | null;
  sha256: string | null;
}

export async function sha256Hex(bytes: Uint8Array): Promise<string> {
  const source = new Uint8Array(bytes);
  const digest = await crypto.subtle.digest("SHA-256", source.buffer as ArrayBuffer);
  return [...new Uint8Array(digest)]
    .map((b) => b.toString(16).padStart(2, "0"))
    .join("");
}

export class BatchPanel {
  constructor(
    private readonly client: Client,
    private readonly pollIntervalMs = 250,
  ) {}

  /**
   * Start a job and follow it to a terminal state. `onProgress` fires for
   * every poll; on success the archive is downloaded and hashed.
   */
  async run(
    sid: string,
    config: ConfigPatch | undefined,
    onProgress: (p: BatchProgress) => void,
  ): Promise<BatchOutcome> {
    const jobId = await this.client.startBatch(sid, config);
    const status = await this.poll(jobId, onProgress);
    if (status.state !== "done") {
      return { status, bytes: null, sha256: null };
    }
    const bytes = await this.client.downloadResults(jobId);
    return { status, bytes, sha256: await sha256Hex(bytes) };
  }

  async poll(
    jobId: string,
    onProgress: (p: BatchProgress) => void,
  ): Promise<JobStatus> {
    for (;;) {
      const status = await this.client.jobStatus(jobId);
      onProgress({ ...status.progress, state: status.state });
      if (status.state === "done" || status.state === "error") {
        return status;
      }
      await sleep(this.pollIntervalMs);
    }
  }
}

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
