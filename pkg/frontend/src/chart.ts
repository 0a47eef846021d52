// Timeline chart model: pure data in, drawable geometry out. The plotted
// values are the timeline rows' numbers verbatim; only their pixel
// placement is computed here. Rendered as SVG markup by svgMarkup().

import type { TimelineRow } from "./api.js";

export const QUALITY_BAR_PERCENT = 98;

export interface ChartPoint {
  x: number;
  y: number;
  value: number;          // the row's ripeness_percent, untouched
  capturedAt: string;
}

export interface StackedBand {
  stage: string;
  // one [yTop, yBottom] pair per sample, in sample order
  spans: { x: number; yTop: number; yBottom: number; count: number }[];
}

export interface ChartModel {
  width: number;
  height: number;
  padLeft: number;
  padBottom: number;
  padTop: number;
  points: ChartPoint[];          // binary-mode ripeness line
  bands: StackedBand[];          // multiclass stacked counts
  qualityBarY: number;
  crossesQualityBar: boolean;
  xLabels: { x: number; text: string }[];
}

function xPositions(rows: TimelineRow[], left: number, right: number): number[] {
  const times = rows.map((r) => Date.parse(r.captured_at));
  const usable = times.every((t) => Number.isFinite(t));
  const lo = usable ? Math.min(...times) : 0;
  const hi = usable ? Math.max(...times) : Math.max(rows.length - 1, 1);
  const span = hi - lo || 1;
  return rows.map((r, i) => {
    const t = usable ? Date.parse(r.captured_at) : i;
    return left + ((t - lo) / span) * (right - left);
  });
}

export function timelineChart(rows: TimelineRow[], width = 640,
                              height = 240): ChartModel {
  const padLeft = 44;
  const padBottom = 24;
  const padTop = 10;
  const innerBottom = height - padBottom;
  const yFor = (percent: number) =>
    innerBottom - (percent / 100) * (innerBottom - padTop);

  const xs = xPositions(rows, padLeft, width - 10);
  const points: ChartPoint[] = [];
  rows.forEach((row, i) => {
    if (row.ripeness_percent === null) return;   // empty sample: no point
    points.push({
      x: xs[i],
      y: yFor(row.ripeness_percent),
      value: row.ripeness_percent,
      capturedAt: row.captured_at,
    });
  });

  // multiclass: stack per-stage counts as fractions of the sample's height
  const stages: string[] = [];
  for (const row of rows) {
    for (const stage of Object.keys(row.counts)) {
      if (!stages.includes(stage)) stages.push(stage);
    }
  }
  const bands: StackedBand[] = stages.map((stage) => ({ stage, spans: [] }));
  rows.forEach((row, i) => {
    const total = Object.values(row.counts).reduce((a, b) => a + b, 0);
    if (total === 0) return;
    let acc = 0;
    for (const band of bands) {
      const count = row.counts[band.stage] ?? 0;
      const yBottom = yFor((acc / total) * 100);
      acc += count;
      const yTop = yFor((acc / total) * 100);
      band.spans.push({ x: xs[i], yTop, yBottom, count });
    }
  });

  const qualityBarY = yFor(QUALITY_BAR_PERCENT);
  return {
    width,
    height,
    padLeft,
    padBottom,
    padTop,
    points,
    bands,
    qualityBarY,
    crossesQualityBar: points.some((p) => p.value >= QUALITY_BAR_PERCENT),
    xLabels: rows.map((row, i) => ({ x: xs[i], text: row.captured_at.slice(0, 10) })),
  };
}

function esc(text: string): string {
  return text.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

export function svgMarkup(model: ChartModel, mode: "binary" | "multiclass"): string {
  const parts: string[] = [];
  parts.push(`<svg viewBox="0 0 ${model.width} ${model.height}" ` +
             `class="timeline-chart" role="img">`);
  const bottom = model.height - model.padBottom;
  parts.push(`<line x1="${model.padLeft}" y1="${model.padTop}" ` +
             `x2="${model.padLeft}" y2="${bottom}" class="axis"/>`);
  parts.push(`<line x1="${model.padLeft}" y1="${bottom}" ` +
             `x2="${model.width - 10}" y2="${bottom}" class="axis"/>`);

  const barClass = model.crossesQualityBar ? "quality-bar crossed" : "quality-bar";
  parts.push(`<line x1="${model.padLeft}" y1="${model.qualityBarY}" ` +
             `x2="${model.width - 10}" y2="${model.qualityBarY}" class="${barClass}"/>`);
  parts.push(`<text x="${model.width - 12}" y="${model.qualityBarY - 3}" ` +
             `text-anchor="end" class="quality-label">${QUALITY_BAR_PERCENT}%</text>`);

  if (mode === "binary") {
    if (model.points.length > 1) {
      const path = model.points.map((p) => `${p.x},${p.y}`).join(" ");
      parts.push(`<polyline points="${path}" class="ripeness-line"/>`);
    }
    for (const p of model.points) {
      parts.push(`<circle cx="${p.x}" cy="${p.y}" r="3" class="ripeness-dot">` +
                 `<title>${esc(p.capturedAt)}: ${String(p.value)}%</title></circle>`);
    }
  } else {
    for (const band of model.bands) {
      for (const span of band.spans) {
        parts.push(`<rect x="${span.x - 6}" y="${span.yTop}" width="12" ` +
                   `height="${Math.max(span.yBottom - span.yTop, 0)}" ` +
                   `data-stage="${esc(band.stage)}" data-count="${span.count}" ` +
                   `class="stage-band stage-${esc(band.stage)}"/>`);
      }
    }
  }
  parts.push("</svg>");
  return parts.join("");
}
