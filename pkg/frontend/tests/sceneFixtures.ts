/** Hand-built scene documents for model and renderer tests. */

import type { FixationSeries, Scene } from "../src/types.js";

/**
 * A two-line stimulus with two words per line. Fixation series get points
 * at distinct spots so hit-testing and per-series draw counts are easy to
 * pin down: the uncorrected series sits slightly off the line centers and
 * every algorithm series snaps to them.
 */
export function makeScene(algorithms: string[] = ["attach", "warp"]): Scene {
  const lineYs = [100, 200];
  const uncorrected: FixationSeries = {
    label: "uncorrected",
    points: [
      { i: 0, x: 105, y: 96, duration_ms: 180, line_idx: null },
      { i: 1, x: 135, y: 104, duration_ms: 220, line_idx: null },
      { i: 2, x: 110, y: 206, duration_ms: 150, line_idx: null },
    ],
  };
  const fixations = [uncorrected];
  for (const label of algorithms) {
    fixations.push({
      label,
      points: uncorrected.points.map((p) => ({
        ...p,
        y: p.y < 150 ? lineYs[0] : lineYs[1],
        line_idx: p.y < 150 ? 0 : 1,
      })),
    });
  }
  return {
    version: 1,
    layers: {
      characters: [
        { char: "a", x: 105, y: 100 },
        { char: "b", x: 115, y: 100 },
        { char: "c", x: 135, y: 100 },
        { char: "d", x: 105, y: 200 },
        { char: "e", x: 115, y: 200 },
      ],
      char_boxes: [
        { x_min: 100, y_min: 80, x_max: 110, y_max: 120 },
        { x_min: 110, y_min: 80, x_max: 120, y_max: 120 },
        { x_min: 130, y_min: 80, x_max: 140, y_max: 120 },
        { x_min: 100, y_min: 180, x_max: 110, y_max: 220 },
        { x_min: 110, y_min: 180, x_max: 120, y_max: 220 },
      ],
      word_boxes: [
        { word_idx: 0, text: "ab", line_idx: 0, x_min: 100, y_min: 80, x_max: 120, y_max: 120 },
        { word_idx: 1, text: "c", line_idx: 0, x_min: 130, y_min: 80, x_max: 140, y_max: 120 },
        { word_idx: 2, text: "de", line_idx: 1, x_min: 100, y_min: 180, x_max: 120, y_max: 220 },
      ],
      line_centers_y: lineYs,
    },
    fixations,
    saccades: [
      {
        x_start: 105, y_start: 96, x_end: 135, y_end: 104,
        y_start_snapped: 100, y_end_snapped: 100, from_line: 0, to_line: 0,
      },
      {
        x_start: 135, y_start: 104, x_end: 110, y_end: 206,
        y_start_snapped: 100, y_end_snapped: 200, from_line: 0, to_line: 1,
      },
    ],
    dispositions: [
      { i: 0, x: 105, y: 96, duration_ms: 180, status: "Kept", merged_into: null },
      { i: 1, x: 135, y: 104, duration_ms: 220, status: "Kept", merged_into: null },
      { i: 2, x: 110, y: 206, duration_ms: 150, status: "Kept", merged_into: null },
      { i: 3, x: 500, y: 400, duration_ms: 40, status: "DiscardedOutside", merged_into: null },
      { i: 4, x: 112, y: 101, duration_ms: 60, status: "MergedInto", merged_into: 0 },
    ],
    word_labels: [
      { word_idx: 0, x: 110, y: 80, value: 400 },
      { word_idx: 1, x: 135, y: 80, value: null },
      { word_idx: 2, x: 110, y: 180, value: 150 },
    ],
  };
}
