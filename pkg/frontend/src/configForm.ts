/**
 * Form state mirroring the pipeline config document. The form tracks a
 * baseline (last server-acknowledged doc) and a working copy; dirty paths
 * are whatever differs between the two, and apply requests carry only the
 * changed keys. Client-side checks catch obviously invalid values before
 * any request is made.
 */

import type { ConfigDoc, ConfigPatch } from "./types.js";

export interface FieldError {
  path: string;
  message: string;
}

const SHORT_POLICIES = ["Merge", "Discard", "MergeThenDiscard", "Keep"];

type Leaf = string | number | boolean | null | string[];

function clone(doc: ConfigDoc): ConfigDoc {
  return JSON.parse(JSON.stringify(doc)) as ConfigDoc;
}

function getPath(doc: ConfigDoc, path: string): Leaf {
  let node: unknown = doc;
  for (const part of path.split(".")) {
    node = (node as Record<string, unknown>)[part];
  }
  return node as Leaf;
}

function setPath(doc: ConfigDoc, path: string, value: Leaf): void {
  const parts = path.split(".");
  let node: Record<string, unknown> = doc as unknown as Record<string, unknown>;
  for (const part of parts.slice(0, -1)) {
    node = node[part] as Record<string, unknown>;
  }
  node[parts[parts.length - 1]] = value;
}

function leafEqual(a: Leaf, b: Leaf): boolean {
  return JSON.stringify(a) === JSON.stringify(b);
}

function leafPaths(doc: ConfigDoc): string[] {
  const out: string[] = [];
  const walk = (node: unknown, prefix: string): void => {
    if (node !== null && typeof node === "object" && !Array.isArray(node)) {
      for (const key of Object.keys(node)) {
        walk((node as Record<string, unknown>)[key], prefix ? `${prefix}.${key}` : key);
      }
    } else {
      out.push(prefix);
    }
  };
  walk(doc, "");
  return out;
}

export class ConfigForm {
  private baseline: ConfigDoc;
  private working: ConfigDoc;

  constructor(doc: ConfigDoc) {
    this.baseline = clone(doc);
    this.working = clone(doc);
  }

  get(path: string): Leaf {
    return getPath(this.working, path);
  }

  set(path: string, value: Leaf): void {
    setPath(this.working, path, value);
  }

  state(): ConfigDoc {
    return clone(this.working);
  }

  dirtyPaths(): string[] {
    return leafPaths(this.working).filter(
      (path) => !leafEqual(getPath(this.working, path), getPath(this.baseline, path)),
    );
  }

  isDirty(): boolean {
    return this.dirtyPaths().length > 0;
  }

  /** Nested object containing only the keys that changed since baseline. */
  changedPatch(): ConfigPatch {
    const patch: ConfigPatch = {};
    for (const path of this.dirtyPaths()) {
      const parts = path.split(".");
      let node = patch;
      for (const part of parts.slice(0, -1)) {
        node[part] = node[part] ?? {};
        node = node[part] as ConfigPatch;
      }
      node[parts[parts.length - 1]] = getPath(this.working, path);
    }
    return patch;
  }

  /** Server acknowledged `doc`; it becomes the new baseline. */
  markApplied(doc: ConfigDoc): void {
    this.baseline = clone(doc);
    this.working = clone(doc);
  }

  exportJson(): string {
    return JSON.stringify(sortKeys(this.working), null, 2) + "\n";
  }

  importJson(text: string): void {
    const doc = JSON.parse(text) as ConfigDoc;
    this.working = clone(doc);
  }

  /** Pre-flight checks; a non-empty result must block the apply request. */
  validate(): FieldError[] {
    const errors: FieldError[] = [];
    const c = this.working.cleaning;
    const bad = (path: string, message: string) => errors.push({ path, message });

    if (c.min_duration_ms < 0) {
      bad("cleaning.min_duration_ms", "must be non-negative");
    }
    if (c.max_duration_ms <= 0) {
      bad("cleaning.max_duration_ms", "must be positive");
    }
    if (c.min_duration_ms >= c.max_duration_ms) {
      bad("cleaning.min_duration_ms", "must be less than the maximum duration");
    }
    for (const key of [
      "outside_x_threshold_charwidths",
      "outside_y_threshold_lineheights",
      "merge_distance_charwidths",
    ] as const) {
      if (c[key] < 0) {
        bad(`cleaning.${key}`, "must be non-negative");
      }
    }
    if (!SHORT_POLICIES.includes(c.short_policy)) {
      bad("cleaning.short_policy", `must be one of ${SHORT_POLICIES.join(", ")}`);
    }
    if (!this.working.assignment.methods.length) {
      bad("assignment.methods", "select at least one method");
    }
    if (!Number.isInteger(this.working.workers) || this.working.workers < 1) {
      bad("workers", "must be an integer of at least 1");
    }
    return errors;
  }
}

/** Recursively order object keys so exports are byte-stable. */
function sortKeys(value: unknown): unknown {
  if (Array.isArray(value)) {
    return value.map(sortKeys);
  }
  if (value !== null && typeof value === "object") {
    const out: Record<string, unknown> = {};
    for (const key of Object.keys(value).sort()) {
      out[key] = sortKeys((value as Record<string, unknown>)[key]);
    }
    return out;
  }
  return value;
}

/** Place a server-side InvalidConfig at its form field, if it names one. */
export function errorToField(detail: unknown): FieldError | null {
  if (typeof detail === "object" && detail !== null && "key" in detail) {
    const d = detail as { key: unknown; reason: unknown };
    if (typeof d.key === "string") {
      return { path: d.key, message: String(d.reason ?? "invalid value") };
    }
  }
  return null;
}
