// Client-side view state: intensity windowing, overlay opacity, active tool.

import type { SeedLabel } from "./types.js";

/** The five fixed overlay opacity stops the toggle button cycles through. */
export const OPACITY_LEVELS = [1.0, 0.75, 0.5, 0.25, 0.0] as const;

export interface ViewState {
  windowCenter: number;
  windowWidth: number;
  opacityIndex: number;
  activeLabel: SeedLabel;
}

export function initialViewState(): ViewState {
  return { windowCenter: 0.5, windowWidth: 1.0, opacityIndex: 0, activeLabel: "foreground" };
}

export function cycleOpacity(state: ViewState): ViewState {
  return { ...state, opacityIndex: (state.opacityIndex + 1) % OPACITY_LEVELS.length };
}

export function currentOpacity(state: ViewState): number {
  return OPACITY_LEVELS[state.opacityIndex];
}

export function toggleLabel(state: ViewState): ViewState {
  return {
    ...state,
    activeLabel: state.activeLabel === "foreground" ? "background" : "foreground",
  };
}

export function setWindow(state: ViewState, center: number, width: number): ViewState {
  return {
    ...state,
    windowCenter: Math.min(Math.max(center, 0), 1),
    windowWidth: Math.min(Math.max(width, 0.01), 2),
  };
}

/**
 * Display-side window/level transform on a normalized intensity. Purely a
 * rendering aid; the server always segments the original intensities.
 */
export function applyWindow(value: number, center: number, width: number): number {
  const lo = center - width / 2;
  const mapped = (value - lo) / width;
  return Math.min(Math.max(mapped, 0), 1);
}
