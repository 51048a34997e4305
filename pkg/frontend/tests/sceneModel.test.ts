import { describe, expect, it } from "vitest";

import {
  SceneFormatError,
  SceneModel,
  seriesLayerId,
  validateScene,
} from "../src/sceneModel.js";
import { makeScene } from "./sceneFixtures.js";

describe("layer registry", () => {
  it("exposes one toggle per algorithm plus the uncorrected series", () => {
    const model = new SceneModel(makeScene(["attach", "warp", "cluster"]));
    const series = model.seriesLayers();
    expect(series.map((s) => s.label)).toEqual([
      "uncorrected",
      "attach",
      "warp",
      "cluster",
    ]);
    expect(series).toHaveLength(4);
    expect(series.every((s) => s.visible)).toBe(true);
  });

  it("registers stimulus and overlay toggles around the series", () => {
    const model = new SceneModel(makeScene(["attach"]));
    const ids = model.layers().map((entry) => entry.id);
    expect(ids).toEqual([
      "char_boxes",
      "word_boxes",
      "characters",
      "series:uncorrected",
      "series:attach",
      "saccades",
      "dispositions",
      "word_labels",
    ]);
  });

  it("hides a single series without touching the scene document", () => {
    const scene = makeScene(["attach", "warp"]);
    const snapshot = structuredClone(scene);
    const model = new SceneModel(scene);

    model.setVisible(seriesLayerId("attach"), false);
    expect(model.visibleSeries().map((s) => s.label)).toEqual([
      "uncorrected",
      "warp",
    ]);
    expect(model.scene).toEqual(snapshot);

    model.setVisible(seriesLayerId("attach"), true);
    expect(model.visibleSeries().map((s) => s.label)).toEqual([
      "uncorrected",
      "attach",
      "warp",
    ]);
    expect(model.scene).toEqual(snapshot);
  });

  it("toggle flips and reports the new state", () => {
    const model = new SceneModel(makeScene(["attach"]));
    expect(model.toggle("saccades")).toBe(false);
    expect(model.isVisible("saccades")).toBe(false);
    expect(model.toggle("saccades")).toBe(true);
  });

  it("rejects unknown layer ids", () => {
    const model = new SceneModel(makeScene(["attach"]));
    expect(() => model.setVisible("series:nope", true)).toThrow(SceneFormatError);
  });
});

describe("validateScene", () => {
  it("accepts a well-formed document", () => {
    const scene = makeScene();
    expect(validateScene(scene)).toBe(scene);
  });

  it("rejects non-objects and wrong versions", () => {
    expect(() => validateScene(null)).toThrow(SceneFormatError);
    expect(() => validateScene("[]")).toThrow(SceneFormatError);
    const scene = makeScene() as unknown as { version: number };
    scene.version = 2;
    expect(() => validateScene(scene)).toThrow(/version 2/);
  });

  it("rejects documents with missing layers", () => {
    const scene = makeScene() as unknown as Record<string, unknown>;
    delete (scene.layers as Record<string, unknown>).char_boxes;
    expect(() => validateScene(scene)).toThrow(/char_boxes/);
  });

  it("rejects documents with missing overlay arrays", () => {
    const scene = makeScene() as unknown as Record<string, unknown>;
    delete scene.saccades;
    expect(() => validateScene(scene)).toThrow(/saccades/);
  });

  it("rejects duplicate series labels", () => {
    const scene = makeScene(["attach", "attach"]);
    expect(() => validateScene(scene)).toThrow(/duplicate/);
  });
});

describe("hitTest", () => {
  it("returns the nearest visible fixation within tolerance", () => {
    const model = new SceneModel(makeScene(["attach"]));
    // Uncorrected point 0 sits at (105, 96); attach snapped it to (105, 100).
    const hit = model.hitTest(105, 97, 8);
    expect(hit).not.toBeNull();
    expect(hit?.series).toBe("uncorrected");
    expect(hit?.point.i).toBe(0);
  });

  it("ignores hidden series", () => {
    const model = new SceneModel(makeScene(["attach"]));
    model.setVisible(seriesLayerId("uncorrected"), false);
    const hit = model.hitTest(105, 97, 8);
    expect(hit?.series).toBe("attach");
  });

  it("returns null when nothing is close enough", () => {
    const model = new SceneModel(makeScene(["attach"]));
    expect(model.hitTest(700, 700, 8)).toBeNull();
  });
});
