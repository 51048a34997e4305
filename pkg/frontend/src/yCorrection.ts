/**
 * Per-algorithm y-correction comparison: one line series per method over
 * fixation index, plus a mean |correction| table. Hiding a series is a
 * visibility flag; its table row stays.
 */

import type { AssignResponse } from "./types.js";

export interface CorrectionSeries {
  label: string;
  values: number[];
  visible: boolean;
}

export interface CorrectionChart {
  series: CorrectionSeries[];
  meanTable: { label: string; mean: number; meanAbs: number }[];
}

export function buildCorrectionChart(response: AssignResponse): CorrectionChart {
  const series: CorrectionSeries[] = [];
  const meanTable: CorrectionChart["meanTable"] = [];
  for (const label of response.methods) {
    const entry = response.y_corrections[label];
    series.push({ label, values: [...entry.values], visible: true });
    meanTable.push({ label, mean: entry.mean, meanAbs: entry.mean_abs });
  }
  return { series, meanTable };
}

export function toggleCorrectionSeries(chart: CorrectionChart, label: string): void {
  for (const s of chart.series) {
    if (s.label === label) {
      s.visible = !s.visible;
    }
  }
}
