/**
 * Stop-suggestion heuristic: the confidence signal has plateaued when it
 * moved by less than epsilon across each of the last few iterations.
 */

import type { MetricPoint } from "./types.js";

export const DEFAULT_EPSILON = 0.005;
export const DEFAULT_WINDOW = 3;

/**
 * True when every one of the last `window` iteration-to-iteration sigma
 * deltas is below `epsilon` in magnitude. Needs `window + 1` history
 * points; returns false on shorter histories.
 */
export function sigmaPlateaued(
  history: MetricPoint[],
  epsilon: number = DEFAULT_EPSILON,
  window: number = DEFAULT_WINDOW,
): boolean {
  if (window < 1 || history.length < window + 1) return false;
  const sigmas = history.slice(-(window + 1)).map((p) => p.sigma);
  for (let i = 1; i < sigmas.length; i++) {
    if (Math.abs(sigmas[i] - sigmas[i - 1]) >= epsilon) return false;
  }
  return true;
}
