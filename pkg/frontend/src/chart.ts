/**
 * Minimal SVG line-chart rendering for the metrics dashboard.
 *
 * Pure string output so the geometry is unit-testable without a DOM;
 * values are assumed to live in [0, 1] (sigma, coverage, F).
 */

export interface Series {
  name: string;
  color: string;
  values: number[];
}

export interface ChartOptions {
  width: number;
  height: number;
  padding: number;
}

export const DEFAULT_OPTIONS: ChartOptions = {
  width: 560,
  height: 220,
  padding: 28,
};

/**
 * Map a series to SVG polyline points, x spread over iterations and y
 * scaled so 0 sits at the bottom edge and 1 at the top.
 */
export function polylinePoints(
  values: number[],
  options: ChartOptions = DEFAULT_OPTIONS,
): string {
  const { width, height, padding } = options;
  const innerW = width - 2 * padding;
  const innerH = height - 2 * padding;
  const step = values.length > 1 ? innerW / (values.length - 1) : 0;
  return values
    .map((v, i) => {
      const x = padding + i * step;
      const y = padding + (1 - Math.min(Math.max(v, 0), 1)) * innerH;
      return `${x.toFixed(1)},${y.toFixed(1)}`;
    })
    .join(" ");
}

/** Render a complete standalone SVG element for the given series. */
export function renderChart(
  seriesList: Series[],
  options: ChartOptions = DEFAULT_OPTIONS,
): string {
  const { width, height, padding } = options;
  const lines = seriesList
    .filter((s) => s.values.length > 0)
    .map(
      (s) =>
        `<polyline fill="none" stroke="${s.color}" stroke-width="2" ` +
        `data-series="${s.name}" points="${polylinePoints(s.values, options)}"/>`,
    )
    .join("");
  const axis =
    `<line x1="${padding}" y1="${height - padding}" x2="${width - padding}" ` +
    `y2="${height - padding}" stroke="#999"/>` +
    `<line x1="${padding}" y1="${padding}" x2="${padding}" ` +
    `y2="${height - padding}" stroke="#999"/>`;
  return (
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" ` +
    `height="${height}" viewBox="0 0 ${width} ${height}">${axis}${lines}</svg>`
  );
}
