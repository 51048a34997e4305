/**
 * Thin typed client for the session HTTP API. Every method maps to one
 * endpoint; non-2xx responses become ApiError carrying the server's
 * {code, message, detail} envelope.
 */

import type {
  ApiErrorBody,
  AssignResponse,
  CleanResponse,
  ConfigDoc,
  ConfigPatch,
  JobStatus,
  MeasuresResponse,
  StageName,
  StageResponse,
  TrialEntry,
  UploadResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly detail: unknown = null,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export interface NamedFile {
  name: string;
  data: Uint8Array | string;
}

export class Client {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    if (!response.ok) {
      let body: Partial<ApiErrorBody> = {};
      try {
        body = (await response.json()) as Partial<ApiErrorBody>;
      } catch {
        // non-JSON error body; fall through with the status alone
      }
      throw new ApiError(
        response.status,
        body.code ?? `http_${response.status}`,
        body.message ?? response.statusText,
        body.detail ?? null,
      );
    }
    return (await response.json()) as T;
  }

  private json(body: unknown): RequestInit {
    return {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    };
  }

  async createSession(): Promise<string> {
    const out = await this.request<{ session_id: string }>("/sessions", {
      method: "POST",
    });
    return out.session_id;
  }

  async uploadFiles(sid: string, files: NamedFile[]): Promise<UploadResponse> {
    const form = new FormData();
    for (const f of files) {
      const blob = typeof f.data === "string" ? new Blob([f.data]) : new Blob([f.data as BlobPart]);
      form.append("files", blob, f.name);
    }
    return this.request<UploadResponse>(`/sessions/${sid}/files`, {
      method: "POST",
      body: form,
    });
  }

  async listTrials(sid: string): Promise<TrialEntry[]> {
    const out = await this.request<{ trials: TrialEntry[] }>(
      `/sessions/${sid}/trials`,
    );
    return out.trials;
  }

  getConfig(sid: string): Promise<ConfigDoc> {
    return this.request<ConfigDoc>(`/sessions/${sid}/config`);
  }

  putConfig(sid: string, doc: ConfigDoc): Promise<ConfigDoc> {
    return this.request<ConfigDoc>(`/sessions/${sid}/config`, {
      ...this.json(doc),
      method: "PUT",
    });
  }

  runStage(
    sid: string,
    tid: string,
    stage: StageName,
    patch?: ConfigPatch,
  ): Promise<StageResponse> {
    const body = patch ? { config_patch: patch } : {};
    return this.request<StageResponse>(
      `/sessions/${sid}/trials/${encodeURIComponent(tid)}/${stage}`,
      this.json(body),
    );
  }

  runClean(sid: string, tid: string, patch?: ConfigPatch): Promise<CleanResponse> {
    return this.runStage(sid, tid, "clean", patch) as Promise<CleanResponse>;
  }

  runAssign(sid: string, tid: string, patch?: ConfigPatch): Promise<AssignResponse> {
    return this.runStage(sid, tid, "assign", patch) as Promise<AssignResponse>;
  }

  runMeasures(
    sid: string,
    tid: string,
    patch?: ConfigPatch,
  ): Promise<MeasuresResponse> {
    return this.runStage(sid, tid, "measures", patch) as Promise<MeasuresResponse>;
  }

  async startBatch(sid: string, config?: ConfigPatch): Promise<string> {
    const body = config ? { config } : {};
    const out = await this.request<{ job_id: string }>(
      `/sessions/${sid}/batch`,
      this.json(body),
    );
    return out.job_id;
  }

  jobStatus(jobId: string): Promise<JobStatus> {
    return this.request<JobStatus>(`/jobs/${jobId}`);
  }

  async downloadResults(jobId: string): Promise<Uint8Array> {
    const response = await this.fetchFn(`${this.baseUrl}/jobs/${jobId}/results.zip`);
    if (!response.ok) {
      let body: Partial<ApiErrorBody> = {};
      try {
        body = (await response.json()) as Partial<ApiErrorBody>;
      } catch {
        // ignore
      }
      throw new ApiError(
        response.status,
        body.code ?? `http_${response.status}`,
        body.message ?? response.statusText,
        body.detail ?? null,
      );
    }
    return new Uint8Array(await response.arrayBuffer());
  }
}
