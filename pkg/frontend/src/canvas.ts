// Canvas rendering helpers. All drawing happens in image-cell coordinates
// scaled by a zoom factor; the windowing transform is display-only.

import { applyWindow } from "./state.js";
import type { JointProposalOut, SeedOut, SessionState } from "./types.js";

export interface DrawStyle {
  zoom: number;
  opacity: number;
  windowCenter: number;
  windowWidth: number;
}

export const CONTOUR_COLOR = "#27d7f2";
export const FOREGROUND_COLOR = "#2d6cf6";
export const BACKGROUND_COLOR = "#ef4444";

type Ctx = CanvasRenderingContext2D;

/** Grayscale pixels for the base image with window/level applied. */
export function renderImageData(
  intensities: Uint8ClampedArray | number[],
  width: number,
  height: number,
  style: Pick<DrawStyle, "windowCenter" | "windowWidth">,
): ImageData {
  const data = new Uint8ClampedArray(width * height * 4);
  for (let i = 0; i < width * height; i++) {
    const raw = typeof intensities[i] === "number" ? Number(intensities[i]) / 255 : 0;
    const shown = Math.round(applyWindow(raw, style.windowCenter, style.windowWidth) * 255);
    data[i * 4] = shown;
    data[i * 4 + 1] = shown;
    data[i * 4 + 2] = shown;
    data[i * 4 + 3] = 255;
  }
  return new ImageData(data, width, height);
}

export function drawContours(ctx: Ctx, contours: [number, number][][], style: DrawStyle): void {
  ctx.save();
  ctx.globalAlpha = style.opacity;
  ctx.strokeStyle = CONTOUR_COLOR;
  ctx.lineWidth = Math.max(1.5, style.zoom * 0.25);
  for (const chain of contours) {
    if (chain.length === 0) continue;
    ctx.beginPath();
    const [x0, y0] = chain[0];
    ctx.moveTo((x0 + 0.5) * style.zoom, (y0 + 0.5) * style.zoom);
    for (const [x, y] of chain.slice(1)) {
      ctx.lineTo((x + 0.5) * style.zoom, (y + 0.5) * style.zoom);
    }
    ctx.closePath();
    ctx.stroke();
  }
  ctx.restore();
}

export function drawSeeds(ctx: Ctx, seeds: SeedOut[], style: DrawStyle): void {
  ctx.save();
  ctx.globalAlpha = style.opacity;
  for (const seed of seeds) {
    ctx.fillStyle = seed.label === "foreground" ? FOREGROUND_COLOR : BACKGROUND_COLOR;
    ctx.fillRect(seed.x * style.zoom, seed.y * style.zoom, style.zoom, style.zoom);
  }
  ctx.restore();
}

export function drawProposals(ctx: Ctx, proposals: JointProposalOut[], style: DrawStyle): void {
  ctx.save();
  for (const proposal of proposals) {
    ctx.beginPath();
    ctx.arc(
      (proposal.x + 0.5) * style.zoom,
      (proposal.y + 0.5) * style.zoom,
      Math.max(4, style.zoom * 1.1),
      0,
      2 * Math.PI,
    );
    ctx.fillStyle = proposal.label === "foreground" ? FOREGROUND_COLOR : BACKGROUND_COLOR;
    ctx.globalAlpha = 0.75;
    ctx.fill();
    ctx.globalAlpha = 1.0;
    ctx.strokeStyle = "#ffffff";
    ctx.lineWidth = 1.5;
    ctx.stroke();
  }
  ctx.restore();
}

/** Cyan rectangle around the two guided points (the zoomed region of interest). */
export function guidedRoi(
  state: SessionState,
  padding = 4,
): { x: number; y: number; w: number; h: number } | null {
  if (!state.guided) return null;
  const [[x1, y1], [x2, y2]] = state.guided.points;
  const xLo = Math.max(0, Math.min(x1, x2) - padding);
  const yLo = Math.max(0, Math.min(y1, y2) - padding);
  const xHi = Math.min(state.width - 1, Math.max(x1, x2) + padding);
  const yHi = Math.min(state.height - 1, Math.max(y1, y2) + padding);
  return { x: xLo, y: yLo, w: xHi - xLo + 1, h: yHi - yLo + 1 };
}

export function drawRoi(ctx: Ctx, roi: { x: number; y: number; w: number; h: number }, zoom: number): void {
  ctx.save();
  ctx.strokeStyle = "#00e5ff";
  ctx.lineWidth = 2;
  ctx.strokeRect(roi.x * zoom, roi.y * zoom, roi.w * zoom, roi.h * zoom);
  ctx.restore();
}

/** Dotted highlight of cells that differ from the current mask (guided options). */
export function drawDiffCells(ctx: Ctx, cells: boolean[], width: number, style: DrawStyle): void {
  ctx.save();
  ctx.fillStyle = "#ffd166";
  ctx.globalAlpha = 0.85;
  const dot = Math.max(1, style.zoom * 0.3);
  for (let i = 0; i < cells.length; i++) {
    if (!cells[i]) continue;
    const x = i % width;
    const y = Math.floor(i / width);
    ctx.beginPath();
    ctx.arc((x + 0.5) * style.zoom, (y + 0.5) * style.zoom, dot, 0, 2 * Math.PI);
    ctx.fill();
  }
  ctx.restore();
}
