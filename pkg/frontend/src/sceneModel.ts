/**
 * View model over a scene document: a flat layer registry with visibility
 * flags. The underlying scene JSON is never mutated; toggling only flips
 * flags, so switching layers on and off is loss-free.
 */

import type { FixationPoint, Scene } from "./types.js";

export class SceneFormatError extends Error {
  constructor(message: string) {
    super(message);
    this.name = "SceneFormatError";
  }
}

export type LayerKind = "stimulus" | "fixations" | "overlay";

export interface LayerEntry {
  id: string;
  kind: LayerKind;
  label: string;
  visible: boolean;
}

export interface HoverHit {
  series: string;
  point: FixationPoint;
}

const SCENE_VERSION = 1;

// Stimulus sub-layers and overlays always present in the registry; fixation
// series are appended from the document.
const STIMULUS_LAYERS: [string, string][] = [
  ["char_boxes", "Character boxes"],
  ["word_boxes", "Word boxes"],
  ["characters", "Characters"],
];
const OVERLAY_LAYERS: [string, string][] = [
  ["saccades", "Saccades"],
  ["dispositions", "Cleaning dispositions"],
  ["word_labels", "Word measures"],
];

export function validateScene(doc: unknown): Scene {
  if (typeof doc !== "object" || doc === null) {
    throw new SceneFormatError("scene is not an object");
  }
  const scene = doc as Scene;
  if (scene.version !== SCENE_VERSION) {
    throw new SceneFormatError(`unsupported scene version ${scene.version}`);
  }
  if (typeof scene.layers !== "object" || scene.layers === null) {
    throw new SceneFormatError("scene has no stimulus layers");
  }
  for (const key of ["characters", "char_boxes", "word_boxes", "line_centers_y"] as const) {
    if (!Array.isArray(scene.layers[key])) {
      throw new SceneFormatError(`stimulus layer ${key} missing`);
    }
  }
  for (const key of ["fixations", "saccades", "dispositions", "word_labels"] as const) {
    if (!Array.isArray(scene[key])) {
      throw new SceneFormatError(`scene field ${key} missing`);
    }
  }
  const labels = new Set<string>();
  for (const series of scene.fixations) {
    if (typeof series.label !== "string" || !Array.isArray(series.points)) {
      throw new SceneFormatError("malformed fixation series");
    }
    if (labels.has(series.label)) {
      throw new SceneFormatError(`duplicate fixation series ${series.label}`);
    }
    labels.add(series.label);
  }
  return scene;
}

export class SceneModel {
  readonly scene: Scene;
  private readonly visibility = new Map<string, boolean>();

  constructor(doc: unknown) {
    this.scene = validateScene(doc);
    for (const [id] of [...STIMULUS_LAYERS, ...OVERLAY_LAYERS]) {
      this.visibility.set(id, true);
    }
    for (const series of this.scene.fixations) {
      this.visibility.set(seriesLayerId(series.label), true);
    }
  }

  /** All toggle entries in stable order: stimulus, fixation series, overlays. */
  layers(): LayerEntry[] {
    const out: LayerEntry[] = [];
    for (const [id, label] of STIMULUS_LAYERS) {
      out.push({ id, kind: "stimulus", label, visible: this.isVisible(id) });
    }
    for (const series of this.scene.fixations) {
      const id = seriesLayerId(series.label);
      out.push({ id, kind: "fixations", label: series.label, visible: this.isVisible(id) });
    }
    for (const [id, label] of OVERLAY_LAYERS) {
      out.push({ id, kind: "overlay", label, visible: this.isVisible(id) });
    }
    return out;
  }

  /** Fixation-series toggles only (uncorrected plus one per algorithm). */
  seriesLayers(): LayerEntry[] {
    return this.layers().filter((entry) => entry.kind === "fixations");
  }

  isVisible(id: string): boolean {
    return this.visibility.get(id) ?? false;
  }

  setVisible(id: string, visible: boolean): void {
    if (!this.visibility.has(id)) {
      throw new SceneFormatError(`unknown layer ${id}`);
    }
    this.visibility.set(id, visible);
  }

  toggle(id: string): boolean {
    this.setVisible(id, !this.isVisible(id));
    return this.isVisible(id);
  }

  visibleSeries() {
    return this.scene.fixations.filter((series) =>
      this.isVisible(seriesLayerId(series.label)),
    );
  }

  /**
   * Nearest visible fixation within `tolerance` px (world coordinates) for
   * hover lookups. Later-drawn series win ties so the hit matches what is
   * on top visually.
   */
  hitTest(x: number, y: number, tolerance = 8): HoverHit | null {
    let best: HoverHit | null = null;
    let bestDist = tolerance;
    for (const series of this.visibleSeries()) {
      for (const point of series.points) {
        const dist = Math.hypot(point.x - x, point.y - y);
        if (dist <= bestDist) {
          bestDist = dist;
          best = { series: series.label, point };
        }
      }
    }
    return best;
  }
}

export function seriesLayerId(label: string): string {
  return `series:${label}`;
}
