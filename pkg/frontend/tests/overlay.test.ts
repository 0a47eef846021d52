import { describe, expect, it } from "vitest";

import type { AnalyzeResponse } from "../src/api.js";
import { detectionRect, drawOverlay, strokeColor, STAGE_COLORS,
         type OverlayContext } from "../src/overlay.js";
import { fixtureJson } from "./fixtures.js";

const response = fixtureJson<AnalyzeResponse>("analyze_multiclass.json");

describe("detectionRect", () => {
  it("matches geometry x display scale within 1px on the fixture", () => {
    for (const [width, height] of [[640, 640], [317, 211], [1024, 768]]) {
      for (const det of response.detections) {
        const rect = detectionRect(det, width, height);
        // independent corner arithmetic
        const left = det.cx * width - (det.w * width) / 2;
        const top = det.cy * height - (det.h * height) / 2;
        expect(Math.abs(rect.left - left)).toBeLessThanOrEqual(1);
        expect(Math.abs(rect.top - top)).toBeLessThanOrEqual(1);
        expect(Math.abs(rect.width - det.w * width)).toBeLessThanOrEqual(1);
        expect(Math.abs(rect.height - det.h * height)).toBeLessThanOrEqual(1);
        // rects stay inside the displayed image
        expect(rect.left).toBeGreaterThanOrEqual(-1);
        expect(rect.top).toBeGreaterThanOrEqual(-1);
        expect(rect.left + rect.width).toBeLessThanOrEqual(width + 1);
        expect(rect.top + rect.height).toBeLessThanOrEqual(height + 1);
      }
    }
  });

  it("scales linearly with the display size", () => {
    const det = response.detections[0];
    const small = detectionRect(det, 100, 100);
    const large = detectionRect(det, 300, 300);
    expect(large.left).toBeCloseTo(small.left * 3, 9);
    expect(large.width).toBeCloseTo(small.width * 3, 9);
  });
});

class RecordingContext implements OverlayContext {
  strokeStyle: string = "";
  fillStyle: string = "";
  lineWidth = 0;
  font = "";
  cleared: number[][] = [];
  rects: { x: number; y: number; w: number; h: number; color: string }[] = [];
  texts: { text: string; x: number; y: number }[] = [];

  clearRect(x: number, y: number, w: number, h: number): void {
    this.cleared.push([x, y, w, h]);
  }
  strokeRect(x: number, y: number, w: number, h: number): void {
    this.rects.push({ x, y, w, h, color: String(this.strokeStyle) });
  }
  fillText(text: string, x: number, y: number): void {
    this.texts.push({ text, x, y });
  }
}

describe("drawOverlay", () => {
  it("strokes exactly one rect per detection at the scaled position", () => {
    const ctx = new RecordingContext();
    drawOverlay(ctx, response.detections, 480, 360);
    expect(ctx.cleared).toEqual([[0, 0, 480, 360]]);
    expect(ctx.rects).toHaveLength(response.detections.length);
    response.detections.forEach((det, i) => {
      const want = detectionRect(det, 480, 360);
      expect(ctx.rects[i].x).toBeCloseTo(want.left, 6);
      expect(ctx.rects[i].y).toBeCloseTo(want.top, 6);
      expect(ctx.rects[i].w).toBeCloseTo(want.width, 6);
      expect(ctx.rects[i].h).toBeCloseTo(want.height, 6);
      expect(ctx.rects[i].color).toBe(strokeColor(det.stage));
      expect(ctx.texts[i].text).toBe(det.stage);
    });
  });

  it("zero detections draws nothing but still clears", () => {
    const ctx = new RecordingContext();
    drawOverlay(ctx, [], 480, 360);
    expect(ctx.rects).toHaveLength(0);
    expect(ctx.cleared).toHaveLength(1);
  });
});

describe("stage colors", () => {
  it("covers every stage in the fixtures plus binary/mono labels", () => {
    for (const det of response.detections) {
      expect(STAGE_COLORS[det.stage]).toBeDefined();
    }
    for (const stage of ["unripe", "ripe", "fruit"]) {
      expect(STAGE_COLORS[stage]).toBeDefined();
    }
    expect(strokeColor("never-heard-of-it")).toMatch(/^#/);
  });
});
