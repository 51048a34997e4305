/**
 * DOM shell: two tabs (single file, batch) over the library modules. All
 * numbers on screen come from service responses; this file only routes
 * events and paints.
 */

import { ApiError, Client } from "./api.js";
import { BatchPanel } from "./batchPanel.js";
import { ConfigForm } from "./configForm.js";
import type { DrawSurface, Style, Viewport } from "./renderer.js";
import { SceneRenderer, fitViewport, pan, zoomAt } from "./renderer.js";
import { SceneModel } from "./sceneModel.js";
import type { ConfigDoc, Scene, TrialEntry } from "./types.js";
import { unzip } from "./unzip.js";
import { TrialWorkflow } from "./workflow.js";
import { buildCorrectionChart } from "./yCorrection.js";

class Canvas2DSurface implements DrawSurface {
  private readonly ctx: CanvasRenderingContext2D;

  constructor(private readonly canvas: HTMLCanvasElement) {
    const ctx = canvas.getContext("2d");
    if (!ctx) {
      throw new Error("canvas 2d context unavailable");
    }
    this.ctx = ctx;
  }

  get width(): number {
    return this.canvas.width;
  }

  get height(): number {
    return this.canvas.height;
  }

  clear(): void {
    this.ctx.clearRect(0, 0, this.width, this.height);
  }

  private apply(style: Style): void {
    this.ctx.strokeStyle = style.color;
    this.ctx.fillStyle = style.color;
    this.ctx.lineWidth = style.lineWidth ?? 1;
    this.ctx.setLineDash(style.dash ?? []);
    this.ctx.font =
      style.font === "stimulus" ? "14px monospace" : "10px sans-serif";
  }

  line(x1: number, y1: number, x2: number, y2: number, style: Style): void {
    this.apply(style);
    this.ctx.beginPath();
    this.ctx.moveTo(x1, y1);
    this.ctx.lineTo(x2, y2);
    this.ctx.stroke();
  }

  circle(x: number, y: number, r: number, style: Style): void {
    this.apply(style);
    this.ctx.beginPath();
    this.ctx.arc(x, y, r, 0, Math.PI * 2);
    if (style.fill) {
      this.ctx.globalAlpha = 0.65;
      this.ctx.fill();
      this.ctx.globalAlpha = 1;
    } else {
      this.ctx.stroke();
    }
  }

  rect(x: number, y: number, w: number, h: number, style: Style): void {
    this.apply(style);
    if (style.fill) {
      this.ctx.fillRect(x, y, w, h);
    } else {
      this.ctx.strokeRect(x, y, w, h);
    }
  }

  text(value: string, x: number, y: number, style: Style): void {
    this.apply(style);
    this.ctx.fillText(value, x, y);
  }
}

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function td(text: string): HTMLTableCellElement {
  const cell = document.createElement("td");
  cell.textContent = text;
  return cell;
}

const CLEANING_FIELDS = [
  "cleaning.min_duration_ms",
  "cleaning.max_duration_ms",
  "cleaning.outside_x_threshold_charwidths",
  "cleaning.outside_y_threshold_lineheights",
  "cleaning.merge_distance_charwidths",
] as const;

export async function startApp(baseUrl: string): Promise<void> {
  const client = new Client(baseUrl);
  const sid = await client.createSession();
  const form = new ConfigForm(await client.getConfig(sid));
  const workflow = new TrialWorkflow(client, sid);
  const batch = new BatchPanel(client);

  const canvas = el<HTMLCanvasElement>("scene-canvas");
  const surface = new Canvas2DSurface(canvas);
  const renderer = new SceneRenderer(surface);
  const banner = el<HTMLDivElement>("error-banner");
  const hover = el<HTMLDivElement>("hover-info");

  let model: SceneModel | null = null;
  let viewport: Viewport = { scale: 1, offsetX: 0, offsetY: 0 };
  let trials: TrialEntry[] = [];

  const showBanner = (message: string | null): void => {
    banner.textContent = message ?? "";
    banner.style.display = message ? "block" : "none";
  };

  const paint = (): void => {
    if (model) {
      renderer.render(model, viewport);
    }
  };

  const showScene = (scene: Scene): void => {
    try {
      model = new SceneModel(scene);
    } catch (error) {
      showBanner(String(error));
      return;
    }
    viewport = fitViewport(model, canvas.width, canvas.height);
    const toggles = el<HTMLDivElement>("layer-toggles");
    toggles.textContent = "";
    for (const layer of model.layers()) {
      const label = document.createElement("label");
      const box = document.createElement("input");
      box.type = "checkbox";
      box.checked = layer.visible;
      box.addEventListener("change", () => {
        model?.setVisible(layer.id, box.checked);
        paint();
      });
      label.append(box, ` ${layer.label}`);
      toggles.append(label);
    }
    paint();
  };

  // --- canvas interaction -------------------------------------------------
  let dragging = false;
  let lastX = 0;
  let lastY = 0;
  canvas.addEventListener("mousedown", (e) => {
    dragging = true;
    lastX = e.offsetX;
    lastY = e.offsetY;
  });
  window.addEventListener("mouseup", () => {
    dragging = false;
  });
  canvas.addEventListener("mousemove", (e) => {
    if (dragging) {
      viewport = pan(viewport, e.offsetX - lastX, e.offsetY - lastY);
      lastX = e.offsetX;
      lastY = e.offsetY;
      paint();
      return;
    }
    if (model) {
      const [wx, wy] = [
        (e.offsetX - viewport.offsetX) / viewport.scale,
        (e.offsetY - viewport.offsetY) / viewport.scale,
      ];
      const hit = model.hitTest(wx, wy, 10 / viewport.scale);
      hover.textContent = hit
        ? `#${hit.point.i + 1} ${hit.series} ${hit.point.duration_ms} ms` +
          (hit.point.line_idx === null ? "" : ` line ${hit.point.line_idx}`)
        : "";
    }
  });
  canvas.addEventListener("wheel", (e) => {
    e.preventDefault();
    viewport = zoomAt(viewport, e.offsetX, e.offsetY, e.deltaY < 0 ? 1.15 : 1 / 1.15);
    paint();
  });

  // --- uploads and trial list ----------------------------------------------
  el<HTMLInputElement>("file-input").addEventListener("change", async (e) => {
    const input = e.target as HTMLInputElement;
    if (!input.files?.length) {
      return;
    }
    const files = await Promise.all(
      [...input.files].map(async (f) => ({
        name: f.name,
        data: new Uint8Array(await f.arrayBuffer()),
      })),
    );
    try {
      const response = await client.uploadFiles(sid, files);
      trials = response.trials;
      renderTrialTable();
      showBanner(response.warnings.length ? response.warnings.join("; ") : null);
    } catch (error) {
      showBanner(String(error));
    }
  });

  const renderTrialTable = (): void => {
    const body = el<HTMLTableSectionElement>("trial-rows");
    body.textContent = "";
    for (const trial of trials) {
      const row = document.createElement("tr");
      row.append(
        td(trial.file),
        td(trial.trial_id),
        td(String(trial.n_fixations)),
        td(String(trial.n_saccades)),
        td(trial.has_stimulus ? "yes" : "no"),
      );
      row.addEventListener("click", () => {
        void selectTrial(trial.tid);
      });
      body.append(row);
    }
  };

  const selectTrial = async (tid: string): Promise<void> => {
    workflow.selectTrial(tid);
    if (await workflow.runStage("clean")) {
      renderCleaning();
      if (workflow.state.clean) {
        showScene(workflow.state.clean.scene);
      }
    }
    showBanner(workflow.state.banner);
  };

  // --- cleaning form --------------------------------------------------------
  const renderCleaning = (): void => {
    const counts = workflow.dispositionCounts();
    el<HTMLDivElement>("disposition-counts").textContent = Object.entries(counts)
      .map(([status, n]) => `${status}: ${n}`)
      .join("  ");
    for (const path of CLEANING_FIELDS) {
      const input = document.querySelector<HTMLInputElement>(
        `input[data-path="${path}"]`,
      );
      if (input) {
        input.value = String(form.get(path));
      }
    }
    const errors = new Map(workflow.state.fieldErrors.map((f) => [f.path, f.message]));
    document.querySelectorAll<HTMLElement>("[data-error-for]").forEach((node) => {
      node.textContent = errors.get(node.dataset.errorFor ?? "") ?? "";
    });
  };

  document.querySelectorAll<HTMLInputElement>("input[data-path]").forEach((input) => {
    input.addEventListener("change", () => {
      const path = input.dataset.path ?? "";
      form.set(path, input.type === "checkbox" ? input.checked : Number(input.value));
      void workflow.applyCleaningEdit(form).then(() => {
        renderCleaning();
        if (workflow.state.clean) {
          showScene(workflow.state.clean.scene);
        }
        showBanner(workflow.state.banner);
      });
    });
  });

  el<HTMLButtonElement>("run-assign").addEventListener("click", async () => {
    if (await workflow.runStage("assign") && workflow.state.assign) {
      showScene(workflow.state.assign.scene);
      const chart = buildCorrectionChart(workflow.state.assign);
      const rows = el<HTMLTableSectionElement>("correction-rows");
      rows.textContent = "";
      for (const entry of chart.meanTable) {
        const row = document.createElement("tr");
        row.append(td(entry.label), td(entry.meanAbs.toFixed(2)));
        rows.append(row);
      }
    }
    showBanner(workflow.state.banner);
  });

  el<HTMLButtonElement>("run-measures").addEventListener("click", async () => {
    if (await workflow.runStage("measures") && workflow.state.measures) {
      showScene(workflow.state.measures.scene);
      const words = workflow.state.measures.tables.words;
      el<HTMLDivElement>("measure-summary").textContent =
        `${words.length} word rows`;
    }
    showBanner(workflow.state.banner);
  });

  // --- config import/export -------------------------------------------------
  el<HTMLButtonElement>("config-export").addEventListener("click", () => {
    const blob = new Blob([form.exportJson()], { type: "application/json" });
    const link = document.createElement("a");
    link.href = URL.createObjectURL(blob);
    link.download = "config.json";
    link.click();
    URL.revokeObjectURL(link.href);
  });
  el<HTMLInputElement>("config-import").addEventListener("change", async (e) => {
    const input = e.target as HTMLInputElement;
    const file = input.files?.[0];
    if (!file) {
      return;
    }
    try {
      form.importJson(await file.text());
      await client.putConfig(sid, form.state());
      form.markApplied(await client.getConfig(sid));
      renderCleaning();
    } catch (error) {
      showBanner(error instanceof ApiError ? error.message : String(error));
    }
  });

  // --- batch tab --------------------------------------------------------------
  el<HTMLButtonElement>("batch-start").addEventListener("click", async () => {
    const bar = el<HTMLProgressElement>("batch-progress");
    const status = el<HTMLDivElement>("batch-status");
    const outcome = await batch.run(sid, undefined, (p) => {
      bar.max = Math.max(1, p.total);
      bar.value = p.done;
      status.textContent = `${p.state}: ${p.done}/${p.total} files`;
    });
    if (outcome.status.state === "error") {
      showBanner(outcome.status.error ?? "batch failed");
      return;
    }
    status.textContent = `done — sha256 ${outcome.sha256?.slice(0, 16)}…`;
    if (outcome.bytes) {
      const blob = new Blob([outcome.bytes as BlobPart], { type: "application/zip" });
      const link = el<HTMLAnchorElement>("batch-download");
      link.href = URL.createObjectURL(blob);
      link.style.display = "inline";
      await renderPlotPicker(outcome.bytes);
    }
  });

  const renderPlotPicker = async (archive: Uint8Array): Promise<void> => {
    const entries = await unzip(archive);
    const picker = el<HTMLSelectElement>("batch-trial-picker");
    picker.textContent = "";
    const plots = [...entries.keys()].filter((name) => name.startsWith("plots/"));
    for (const name of plots) {
      const option = document.createElement("option");
      option.value = name;
      option.textContent = name.slice("plots/".length).replace(/\.json$/, "");
      picker.append(option);
    }
    picker.style.display = plots.length ? "inline" : "none";
    picker.onchange = () => {
      const data = entries.get(picker.value);
      if (data) {
        showScene(JSON.parse(new TextDecoder().decode(data)) as Scene);
      }
    };
  };

  // --- tabs ---------------------------------------------------------------------
  const tabs: [string, string][] = [
    ["tab-single", "panel-single"],
    ["tab-batch", "panel-batch"],
  ];
  for (const [tabId, panelId] of tabs) {
    el<HTMLButtonElement>(tabId).addEventListener("click", () => {
      for (const [t, p] of tabs) {
        el<HTMLElement>(p).style.display = p === panelId ? "block" : "none";
        el<HTMLButtonElement>(t).classList.toggle("active", t === tabId);
      }
    });
  }
}

declare global {
  interface Window {
    GAZE_API_BASE?: string;
  }
}

if (typeof document !== "undefined" && document.getElementById("scene-canvas")) {
  void startApp(window.GAZE_API_BASE ?? "http://127.0.0.1:8000");
}
