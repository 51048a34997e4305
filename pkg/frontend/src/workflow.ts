/**
 * Single-file tab state: the selected trial's stage results, staleness
 * flags, and the cleaning-edit loop (validate form, send one coalesced
 * stage request with just the changed keys, refresh disposition counts).
 */

import type { ApiError, Client } from "./api.js";
import type { ConfigForm, FieldError } from "./configForm.js";
import { errorToField } from "./configForm.js";
import { StageRunner } from "./stageRunner.js";
import type {
  AssignResponse,
  CleanResponse,
  ConfigPatch,
  MeasuresResponse,
  StageName,
  StageResponse,
} from "./types.js";

export interface WorkflowState {
  tid: string | null;
  clean: CleanResponse | null;
  assign: AssignResponse | null;
  measures: MeasuresResponse | null;
  stale: Record<StageName, boolean>;
  fieldErrors: FieldError[];
  banner: string | null;
}

const STAGE_ORDER: StageName[] = ["clean", "assign", "measures"];

interface RunArgs {
  stage: StageName;
  patch?: ConfigPatch;
}

export class TrialWorkflow {
  readonly state: WorkflowState = {
    tid: null,
    clean: null,
    assign: null,
    measures: null,
    stale: { clean: true, assign: true, measures: true },
    fieldErrors: [],
    banner: null,
  };

  private readonly runner: StageRunner<RunArgs, StageResponse>;

  constructor(
    private readonly client: Client,
    private readonly sid: string,
  ) {
    this.runner = new StageRunner((args) => this.execute(args));
  }

  /** Requests actually sent; cleaning edits should add exactly one each. */
  get requestsStarted(): number {
    return this.runner.startedCount;
  }

  selectTrial(tid: string): void {
    // Config (and the form showing it) persists across trial switches;
    // results do not.
    this.state.tid = tid;
    this.state.clean = null;
    this.state.assign = null;
    this.state.measures = null;
    this.state.stale = { clean: true, assign: true, measures: true };
    this.state.banner = null;
  }

  dispositionCounts(): Record<string, number> {
    return this.state.clean?.report.counts ?? {};
  }

  /**
   * Apply pending form edits: client-side validation first (invalid input
   * never produces a request), then a single clean-stage call carrying
   * only the changed keys. Downstream stages are marked stale.
   */
  async applyCleaningEdit(form: ConfigForm): Promise<boolean> {
    this.state.fieldErrors = form.validate();
    if (this.state.fieldErrors.length > 0) {
      return false;
    }
    const patch = form.changedPatch();
    const args: RunArgs = Object.keys(patch).length ? { stage: "clean", patch } : { stage: "clean" };
    try {
      const response = await this.runner.request(args);
      this.state.clean = response as CleanResponse;
      this.state.stale.clean = false;
      this.state.stale.assign = true;
      this.state.stale.measures = true;
      form.markApplied(await this.client.getConfig(this.sid));
      return true;
    } catch (error) {
      this.absorb(error);
      return false;
    }
  }

  /** Run `stage`, first re-running any stale upstream stages in order. */
  async runStage(stage: StageName): Promise<boolean> {
    try {
      for (const s of STAGE_ORDER) {
        if (this.state.stale[s]) {
          const response = await this.runner.request({ stage: s });
          this.store(s, response);
        }
        if (s === stage) {
          break;
        }
      }
      return true;
    } catch (error) {
      this.absorb(error);
      return false;
    }
  }

  private store(stage: StageName, response: StageResponse): void {
    if (stage === "clean") {
      this.state.clean = response as CleanResponse;
    } else if (stage === "assign") {
      this.state.assign = response as AssignResponse;
    } else {
      this.state.measures = response as MeasuresResponse;
    }
    this.state.stale[stage] = false;
  }

  private execute(args: RunArgs): Promise<StageResponse> {
    if (this.state.tid === null) {
      return Promise.reject(new Error("no trial selected"));
    }
    return this.client.runStage(this.sid, this.state.tid, args.stage, args.patch);
  }

  private absorb(error: unknown): void {
    const apiError = error as Partial<ApiError>;
    if (apiError && apiError.code === "invalid_config") {
      const field = errorToField(apiError.detail);
      if (field) {
        this.state.fieldErrors = [field];
        return;
      }
    }
    this.state.banner = apiError?.message ?? String(error);
  }
}
