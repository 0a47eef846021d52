// Detection overlay geometry and drawing. Boxes arrive normalized
// (center/size in 0..1) and are only scaled to the displayed image size;
// the server's geometry is never re-derived client-side.

import type { Detection } from "./api.js";

export interface PixelRect {
  left: number;
  top: number;
  width: number;
  height: number;
}

// Stage stroke colors echo the annotation convention:
// green -> yellow-green -> red -> purple -> brown, plus binary/mono labels.
export const STAGE_COLORS: Record<string, string> = {
  "green": "#2e8b57",
  "green-yellow": "#b8b83c",
  "cherry": "#c62828",
  "raisin": "#6a2a72",
  "dry": "#7a5230",
  "unripe": "#2e8b57",
  "ripe": "#c62828",
  "fruit": "#c62828",
};

export function strokeColor(stage: string): string {
  return STAGE_COLORS[stage] ?? "#555555";
}

/** Scale one normalized box to pixel coordinates on the displayed image. */
export function detectionRect(det: { cx: number; cy: number; w: number; h: number },
                              displayWidth: number,
                              displayHeight: number): PixelRect {
  return {
    left: (det.cx - det.w / 2) * displayWidth,
    top: (det.cy - det.h / 2) * displayHeight,
    width: det.w * displayWidth,
    height: det.h * displayHeight,
  };
}

// The slice of CanvasRenderingContext2D the overlay uses; tests substitute
// a recording object.
export interface OverlayContext {
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  font: string;
  clearRect(x: number, y: number, w: number, h: number): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
  fillText(text: string, x: number, y: number): void;
}

export function drawOverlay(ctx: OverlayContext, detections: Detection[],
                            displayWidth: number, displayHeight: number): void {
  ctx.clearRect(0, 0, displayWidth, displayHeight);
  ctx.lineWidth = 2;
  ctx.font = "12px sans-serif";
  for (const det of detections) {
    const rect = detectionRect(det, displayWidth, displayHeight);
    const color = strokeColor(det.stage);
    ctx.strokeStyle = color;
    ctx.fillStyle = color;
    ctx.strokeRect(rect.left, rect.top, rect.width, rect.height);
    ctx.fillText(det.stage, rect.left + 2, Math.max(rect.top - 4, 10));
  }
}
