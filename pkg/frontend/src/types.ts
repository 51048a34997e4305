/**
 * JSON shapes exchanged with the gazepipeline service. These mirror the
 * server's serialization exactly; the UI never derives numbers itself.
 */

// --- scene documents ------------------------------------------------------

export interface CharPoint {
  char: string;
  x: number;
  y: number;
}

export interface Box {
  x_min: number;
  y_min: number;
  x_max: number;
  y_max: number;
}

export interface WordBox extends Box {
  word_idx: number;
  text: string;
  line_idx: number;
}

export interface StimulusLayers {
  characters: CharPoint[];
  char_boxes: Box[];
  word_boxes: WordBox[];
  line_centers_y: number[];
}

export interface FixationPoint {
  i: number;
  x: number;
  y: number;
  duration_ms: number;
  line_idx: number | null;
}

export interface FixationSeries {
  label: string;
  points: FixationPoint[];
}

export interface SaccadeSegment {
  x_start: number;
  y_start: number;
  x_end: number;
  y_end: number;
  y_start_snapped: number;
  y_end_snapped: number;
  from_line: number;
  to_line: number;
}

export interface DispositionMark {
  i: number;
  x: number;
  y: number;
  duration_ms: number;
  status: string;
  merged_into: number | null;
}

export interface WordLabel {
  word_idx: number;
  x: number;
  y: number;
  value: number | null;
}

export interface Scene {
  version: number;
  layers: StimulusLayers;
  fixations: FixationSeries[];
  saccades: SaccadeSegment[];
  dispositions: DispositionMark[];
  word_labels: WordLabel[];
}

// --- pipeline config (same schema as the CLI JSON file) --------------------

export interface ParseConfig {
  start_flags: string[];
  end_flags: string[];
  custom_start: string | null;
  custom_end: string | null;
  discard_fixation_at_start: boolean;
  include_spaces_in_words: boolean;
  exclude_practice_and_questions: boolean;
}

export interface CleaningConfig {
  discard_blink_adjacent: boolean;
  min_duration_ms: number;
  max_duration_ms: number;
  outside_x_threshold_charwidths: number;
  outside_y_threshold_lineheights: number;
  short_policy: string;
  merge_distance_charwidths: number;
}

export interface AssignmentConfig {
  methods: string[];
  chain_x_max: number;
  chain_y_max: number;
  compare_sweep_px: number;
  compare_n_nearest: number;
  merge_slope_max: number;
  regress_k_min: number;
  regress_k_max: number;
  regress_o_min: number;
  regress_o_max: number;
  regress_s_min: number;
  regress_s_max: number;
  slice_run_y_max: number | null;
  slice_x_back_max: number;
  stretch_offset_min: number;
  stretch_offset_max: number;
  stretch_scale_min: number;
  stretch_scale_max: number;
  woc_members: string[];
  fallback_to_attach: boolean;
}

export interface MeasuresConfig {
  analysis_method: string | null;
  deviation_y_frac: number;
  word_measures: string[] | null;
  fixation_measures: string[] | null;
  saccade_measures: string[] | null;
  sentence_measures: string[] | null;
}

export interface OutputConfig {
  separate_files_per_trial: boolean;
  emit_plot_data: boolean;
}

export interface ConfigDoc {
  parse: ParseConfig;
  cleaning: CleaningConfig;
  assignment: AssignmentConfig;
  measures: MeasuresConfig;
  output: OutputConfig;
  workers: number;
}

/** Partial, nested config fragment; what PUT/patch requests carry. */
export type ConfigPatch = { [key: string]: unknown };

// --- session endpoints ------------------------------------------------------

export interface TrialEntry {
  tid: string;
  file: string;
  trial_id: string;
  n_fixations: number;
  n_saccades: number;
  n_blinks: number;
  has_stimulus: boolean;
  is_practice: boolean;
  is_question: boolean;
  metadata: Record<string, unknown>;
}

export interface UploadResponse {
  files: string[];
  trials: TrialEntry[];
  warnings: string[];
}

export interface CleaningReport {
  counts: Record<string, number>;
  dispositions: { index: number; status: string; merged_into: number | null }[];
  merge_pairs: number[][];
}

export interface CleanResponse {
  stage: "clean";
  hash: string;
  n_before: number;
  n_after: number;
  report: CleaningReport;
  fixations: {
    i: number;
    x: number;
    y: number;
    start_ms: number;
    end_ms: number;
    duration_ms: number;
    blink_before: boolean;
    blink_after: boolean;
  }[];
  scene: Scene;
}

export interface AssignResponse {
  stage: "assign";
  hash: string;
  methods: string[];
  analysis_method: string;
  assignments: Record<string, { line_idx: number[]; corrected_y: number[] }>;
  y_corrections: Record<string, { values: number[]; mean: number; mean_abs: number }>;
  saccades: SaccadeSegment[];
  warnings: string[];
  scene: Scene;
}

export interface MeasuresResponse {
  stage: "measures";
  hash: string;
  tables: {
    words: Record<string, unknown>[];
    fixations: Record<string, unknown>[];
    saccades: Record<string, unknown>[];
    sentences: Record<string, unknown>[];
  };
  scene: Scene;
}

export type StageName = "clean" | "assign" | "measures";

export type StageResponse = CleanResponse | AssignResponse | MeasuresResponse;

export interface JobStatus {
  job_id: string;
  state: "queued" | "running" | "done" | "error";
  progress: { done: number; total: number };
  warnings?: string[];
  error?: string;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  detail: unknown;
}
