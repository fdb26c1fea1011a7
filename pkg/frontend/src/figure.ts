import { writeFileSync } from 'fs';
import { aggregate } from './aggregate.js';
import { parseSweepCsv } from './csv.js';
import { AggregatedSeries, FigureSpec, SidecarDump } from './types.js';

const WIDTH = 640;
const HEIGHT = 420;
const MARGIN = { left: 64, right: 16, top: 20, bottom: 48 };
const PALETTE = ['#1f77b4', '#d62728', '#2ca02c', '#9467bd', '#ff7f0e', '#8c564b'];

const Y_LABEL: Record<string, string> = {
  min_ee: 'worst-user energy efficiency (bits/Hz/J)',
  avg_move_dist_norm: 'average moving distance (wavelengths)',
  trace: 'worst-user energy efficiency (bits/Hz/J)',
};

function fmt(v: number): string {
  return Number.isInteger(v) ? String(v) : v.toPrecision(6).replace(/\.?0+$/, '');
}

function buildSvg(series: AggregatedSeries[], spec: FigureSpec): string {
  const xs = series.flatMap((s) => s.points.map((p) => p.x));
  const ys = series.flatMap((s) =>
    s.points.flatMap((p) => [p.y, p.lo ?? p.y, p.hi ?? p.y]),
  );
  let [xMin, xMax] = [Math.min(...xs), Math.max(...xs)];
  let [yMin, yMax] = [Math.min(...ys), Math.max(...ys)];
  if (xMin === xMax) {
    xMin -= 0.5;
    xMax += 0.5;
  }
  if (yMin === yMax) {
    yMin -= 0.5;
    yMax += 0.5;
  }
  const padY = 0.05 * (yMax - yMin);
  yMin -= padY;
  yMax += padY;
  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
  const sx = (x: number) => MARGIN.left + ((x - xMin) / (xMax - xMin)) * plotW;
  const sy = (y: number) => MARGIN.top + (1 - (y - yMin) / (yMax - yMin)) * plotH;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="sans-serif" font-size="12">`,
    `<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`,
  );

  // axes with five ticks per dimension
  for (let i = 0; i <= 4; i++) {
    const xv = xMin + ((xMax - xMin) * i) / 4;
    const yv = yMin + ((yMax - yMin) * i) / 4;
    const px = sx(xv);
    const py = sy(yv);
    parts.push(
      `<line x1="${px}" y1="${MARGIN.top}" x2="${px}" y2="${HEIGHT - MARGIN.bottom}" stroke="#eee"/>`,
      `<line x1="${MARGIN.left}" y1="${py}" x2="${WIDTH - MARGIN.right}" y2="${py}" stroke="#eee"/>`,
      `<text x="${px}" y="${HEIGHT - MARGIN.bottom + 16}" text-anchor="middle">${fmt(xv)}</text>`,
      `<text x="${MARGIN.left - 6}" y="${py + 4}" text-anchor="end">${fmt(yv)}</text>`,
    );
  }
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${plotW}" height="${plotH}" fill="none" stroke="#333"/>`,
    `<text x="${MARGIN.left + plotW / 2}" y="${HEIGHT - 10}" text-anchor="middle">${spec.xColumn}</text>`,
    `<text x="14" y="${MARGIN.top + plotH / 2}" text-anchor="middle" transform="rotate(-90 14 ${MARGIN.top + plotH / 2})">${Y_LABEL[spec.metric]}</text>`,
  );

  series.forEach((s, i) => {
    const color = PALETTE[i % PALETTE.length];
    if (spec.band && s.points.every((p) => p.lo !== undefined)) {
      const upper = s.points.map((p) => `${sx(p.x)},${sy(p.hi!)}`);
      const lower = [...s.points].reverse().map((p) => `${sx(p.x)},${sy(p.lo!)}`);
      parts.push(
        `<polygon points="${upper.concat(lower).join(' ')}" fill="${color}" opacity="0.15"/>`,
      );
    }
    const pts = s.points.map((p) => `${sx(p.x)},${sy(p.y)}`).join(' ');
    parts.push(`<polyline points="${pts}" fill="none" stroke="${color}" stroke-width="1.8"/>`);
    for (const p of s.points) {
      parts.push(`<circle cx="${sx(p.x)}" cy="${sy(p.y)}" r="2.6" fill="${color}"/>`);
    }
    const ly = MARGIN.top + 16 + i * 16;
    parts.push(
      `<line x1="${WIDTH - MARGIN.right - 120}" y1="${ly - 4}" x2="${WIDTH - MARGIN.right - 96}" y2="${ly - 4}" stroke="${color}" stroke-width="2"/>`,
      `<text x="${WIDTH - MARGIN.right - 90}" y="${ly}">${s.scheme}</text>`,
    );
  });
  parts.push('</svg>');
  return parts.join('\n');
}

/**
 * Render the figure and its sidecar dump; returns the aggregated series.
 * The sidecar (out path + ".json") holds exactly the numbers plotted.
 */
export function render(spec: FigureSpec): AggregatedSeries[] {
  const rows = parseSweepCsv(spec.csvPath);
  const series = aggregate(
    rows,
    spec.metric,
    spec.xColumn,
    spec.aggregation,
    spec.band,
    spec.schemes,
  );
  const svg = buildSvg(series, spec);
  writeFileSync(spec.outPath, svg, 'utf-8');
  const sidecar: SidecarDump = {
    metric: spec.metric,
    xColumn: spec.xColumn,
    aggregation: spec.aggregation,
    band: spec.band,
    series,
  };
  writeFileSync(`${spec.outPath}.json`, JSON.stringify(sidecar, null, 2), 'utf-8');
  return series;
}
