/**
 * Scene drawing against an abstract surface so tests can record draw calls
 * without a real canvas. Coordinates come straight from scene JSON in
 * screen pixels; the viewport applies pan/zoom on top, with y growing
 * downward as on the recording display.
 */

import type { SceneModel } from "./sceneModel.js";
import { seriesLayerId } from "./sceneModel.js";

export interface Style {
  color: string;
  lineWidth?: number;
  fill?: boolean;
  font?: string;
  dash?: number[];
}

export interface DrawSurface {
  readonly width: number;
  readonly height: number;
  clear(): void;
  line(x1: number, y1: number, x2: number, y2: number, style: Style): void;
  circle(x: number, y: number, r: number, style: Style): void;
  rect(x: number, y: number, w: number, h: number, style: Style): void;
  text(value: string, x: number, y: number, style: Style): void;
}

export interface Viewport {
  scale: number;
  offsetX: number;
  offsetY: number;
}

export const DEFAULT_VIEWPORT: Viewport = { scale: 1, offsetX: 0, offsetY: 0 };

const MIN_SCALE = 0.1;
const MAX_SCALE = 40;

export function worldToScreen(v: Viewport, x: number, y: number): [number, number] {
  return [x * v.scale + v.offsetX, y * v.scale + v.offsetY];
}

export function screenToWorld(v: Viewport, sx: number, sy: number): [number, number] {
  return [(sx - v.offsetX) / v.scale, (sy - v.offsetY) / v.scale];
}

export function pan(v: Viewport, dx: number, dy: number): Viewport {
  return { scale: v.scale, offsetX: v.offsetX + dx, offsetY: v.offsetY + dy };
}

/** Zoom by `factor` keeping the screen point (sx, sy) fixed. */
export function zoomAt(v: Viewport, sx: number, sy: number, factor: number): Viewport {
  const scale = Math.min(MAX_SCALE, Math.max(MIN_SCALE, v.scale * factor));
  const ratio = scale / v.scale;
  return {
    scale,
    offsetX: sx - (sx - v.offsetX) * ratio,
    offsetY: sy - (sy - v.offsetY) * ratio,
  };
}

/** Viewport that fits the stimulus with a margin. */
export function fitViewport(
  model: SceneModel,
  width: number,
  height: number,
  margin = 20,
): Viewport {
  const boxes = model.scene.layers.char_boxes;
  if (!boxes.length) {
    return { ...DEFAULT_VIEWPORT };
  }
  const xMin = Math.min(...boxes.map((b) => b.x_min));
  const xMax = Math.max(...boxes.map((b) => b.x_max));
  const yMin = Math.min(...boxes.map((b) => b.y_min));
  const yMax = Math.max(...boxes.map((b) => b.y_max));
  const scale = Math.min(
    (width - 2 * margin) / Math.max(1, xMax - xMin),
    (height - 2 * margin) / Math.max(1, yMax - yMin),
  );
  return {
    scale,
    offsetX: margin - xMin * scale,
    offsetY: margin - yMin * scale,
  };
}

const SERIES_PALETTE = [
  "#444444", "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
  "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f", "#aec7e8",
];

const DISPOSITION_COLORS: Record<string, string> = {
  Kept: "#2ca02c",
  MergedInto: "#1f77b4",
  DiscardedBlink: "#d62728",
  DiscardedLong: "#ff7f0e",
  DiscardedOutside: "#9467bd",
  DiscardedShort: "#8c564b",
};

export class SceneRenderer {
  constructor(private readonly surface: DrawSurface) {}

  render(model: SceneModel, viewport: Viewport): void {
    const v = viewport;
    const s = this.surface;
    s.clear();
    const scene = model.scene;

    if (model.isVisible("char_boxes")) {
      for (const b of scene.layers.char_boxes) {
        const [x, y] = worldToScreen(v, b.x_min, b.y_min);
        s.rect(x, y, (b.x_max - b.x_min) * v.scale, (b.y_max - b.y_min) * v.scale, {
          color: "#dddddd",
          lineWidth: 1,
        });
      }
    }
    if (model.isVisible("word_boxes")) {
      for (const b of scene.layers.word_boxes) {
        const [x, y] = worldToScreen(v, b.x_min, b.y_min);
        s.rect(x, y, (b.x_max - b.x_min) * v.scale, (b.y_max - b.y_min) * v.scale, {
          color: "#9aa7b1",
          lineWidth: 1,
        });
      }
    }
    if (model.isVisible("characters")) {
      for (const c of scene.layers.characters) {
        const [x, y] = worldToScreen(v, c.x, c.y);
        s.text(c.char, x, y, { color: "#333333", font: "stimulus" });
      }
    }

    if (model.isVisible("saccades")) {
      for (const seg of scene.saccades) {
        const [x1, y1] = worldToScreen(v, seg.x_start, seg.y_start);
        const [x2, y2] = worldToScreen(v, seg.x_end, seg.y_end);
        s.line(x1, y1, x2, y2, { color: "#c0c8d0", lineWidth: 1 });
        const [sx1, sy1] = worldToScreen(v, seg.x_start, seg.y_start_snapped);
        const [sx2, sy2] = worldToScreen(v, seg.x_end, seg.y_end_snapped);
        s.line(sx1, sy1, sx2, sy2, { color: "#6b7785", lineWidth: 1, dash: [4, 3] });
      }
    }

    scene.fixations.forEach((series, index) => {
      if (!model.isVisible(seriesLayerId(series.label))) {
        return;
      }
      const color = SERIES_PALETTE[index % SERIES_PALETTE.length];
      for (const point of series.points) {
        const [x, y] = worldToScreen(v, point.x, point.y);
        const r = markerRadius(point.duration_ms, v.scale);
        s.circle(x, y, r, { color, fill: true });
        s.text(String(point.i + 1), x + r + 2, y - r - 2, { color, font: "marker" });
      }
    });

    if (model.isVisible("dispositions")) {
      for (const mark of scene.dispositions) {
        if (mark.status === "Kept") {
          continue;
        }
        const [x, y] = worldToScreen(v, mark.x, mark.y);
        s.circle(x, y, markerRadius(mark.duration_ms, v.scale) + 3, {
          color: DISPOSITION_COLORS[mark.status] ?? "#d62728",
          lineWidth: 2,
        });
      }
    }

    if (model.isVisible("word_labels")) {
      for (const label of scene.word_labels) {
        if (label.value === null) {
          continue;
        }
        const [x, y] = worldToScreen(v, label.x, label.y);
        s.text(String(label.value), x, y - 2, { color: "#1a1a1a", font: "label" });
      }
    }
  }
}

function markerRadius(durationMs: number, scale: number): number {
  // Area tracks duration; clamp so zoom never makes markers unreadable.
  return Math.min(14, Math.max(2.5, Math.sqrt(durationMs) / 3)) * Math.min(scale, 2);
}
