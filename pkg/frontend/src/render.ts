import type { PredictResponse } from './types.js';

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

function barWidthPercent(value: number, maxAbs: number): string {
  if (maxAbs <= 0) return '0';
  return ((Math.abs(value) / maxAbs) * 100).toFixed(2);
}

export function formatValue(value: number): string {
  return value.toFixed(2);
}

/**
 * Horizontal-bar list in response order (the API already sorts greatest to
 * least; the view never reorders). Bars grow rightward from a zero
 * baseline for positive values and leftward for negatives; each row shows
 * the numeric label, and a feature definition becomes hover text when one
 * is known.
 */
export function renderRankedFeatures(
  response: PredictResponse,
  definitions: Record<string, string> = {}
): string {
  if (response.features.length === 0) {
    return '<p class="placeholder">no features</p>';
  }
  const maxAbs = Math.max(...response.features.map((f) => Math.abs(f.value)));
  const rows = response.features.map((feature) => {
    const width = barWidthPercent(feature.value, maxAbs);
    const negative = feature.value < 0;
    const title = definitions[feature.name]
      ? ` title="${escapeHtml(definitions[feature.name])}"`
      : '';
    const negBar = negative
      ? `<div class="bar bar-negative" style="width: ${width}%"></div>`
      : '';
    const posBar = negative
      ? ''
      : `<div class="bar bar-positive" style="width: ${width}%"></div>`;
    return (
      `<div class="feature-row"${title}>` +
      `<span class="feature-name">${escapeHtml(feature.name)}</span>` +
      `<div class="bar-zone bar-zone-negative">${negBar}</div>` +
      `<div class="baseline"></div>` +
      `<div class="bar-zone bar-zone-positive">${posBar}</div>` +
      `<span class="feature-value">${formatValue(feature.value)}</span>` +
      `</div>`
    );
  });
  return `<div class="ranked-features">${rows.join('')}</div>`;
}

/**
 * Side-by-side comparison of two predictions from the same norm space.
 * Rows follow the first response's feature order; the larger value of
 * each pair is highlighted. Equal values get no highlight. With only one
 * response present, falls back to the single-column ranked view.
 */
export function renderComparison(
  left: PredictResponse | null,
  right: PredictResponse | null,
  definitions: Record<string, string> = {}
): string {
  if (left === null && right === null) {
    return '<p class="placeholder">no features</p>';
  }
  if (left === null || right === null) {
    return renderRankedFeatures((left ?? right)!, definitions);
  }
  if (left.norm_space !== right.norm_space) {
    throw new Error(
      `cannot compare across norm spaces: ${left.norm_space} vs ${right.norm_space}`
    );
  }
  const rightValues = new Map(right.features.map((f) => [f.name, f.value]));
  const rows = left.features.map((feature) => {
    const a = feature.value;
    const b = rightValues.get(feature.name);
    const title = definitions[feature.name]
      ? ` title="${escapeHtml(definitions[feature.name])}"`
      : '';
    const aClass = b !== undefined && a > b ? ' compare-winner' : '';
    const bClass = b !== undefined && b > a ? ' compare-winner' : '';
    const bCell =
      b === undefined
        ? '<td class="compare-value compare-missing">&mdash;</td>'
        : `<td class="compare-value${bClass}">${formatValue(b)}</td>`;
    return (
      `<tr${title}><td class="feature-name">${escapeHtml(feature.name)}</td>` +
      `<td class="compare-value${aClass}">${formatValue(a)}</td>` +
      bCell +
      `</tr>`
    );
  });
  return (
    '<table class="comparison"><thead><tr>' +
    '<th>feature</th><th>A</th><th>B</th>' +
    `</tr></thead><tbody>${rows.join('')}</tbody></table>`
  );
}

export function renderError(message: string): string {
  return `<p class="error" role="alert">${escapeHtml(message)}</p>`;
}
