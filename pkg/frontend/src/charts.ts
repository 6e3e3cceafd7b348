/**
 * SVG chart builders. Pure functions from service-reported numbers to markup
 * strings, so renders are deterministic and easy to compare in tests.
 *
 * Only pixel geometry happens here. Every number that ends up readable on
 * screen (bar labels, tooltips, the GMV annotation) is a formatted copy of a
 * value the service sent, never something derived client side.
 */

const WIDTH = 720;
const HEIGHT = 320;
const PAD = { top: 20, right: 16, bottom: 36, left: 16 };

export interface BarPair {
  label: string;
  prior: number;
  posterior: number;
}

export interface CurvePoint {
  volatility: number;
  targetReturn: number;
}

export function fmtReturn(x: number): string {
  return x.toFixed(4);
}

export function fmtWeight(x: number): string {
  return x.toFixed(3);
}

function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

function px(value: number): string {
  return value.toFixed(2);
}

function svg(parts: string[], label: string, height = HEIGHT): string {
  return (
    `<svg viewBox="0 0 ${WIDTH} ${height}" role="img" aria-label="${esc(label)}"` +
    ` preserveAspectRatio="xMidYMid meet">${parts.join("")}</svg>`
  );
}

function emptyChart(message: string): string {
  const text = `<text x="${px(WIDTH / 2)}" y="${px(HEIGHT / 2)}" text-anchor="middle" class="tick">${esc(message)}</text>`;
  return svg([text], message);
}

/** Grouped bars, one pair per asset: prior next to posterior expected return. */
export function priorPosteriorChart(pairs: BarPair[]): string {
  if (pairs.length === 0) return emptyChart("no assets");
  const values: number[] = [];
  for (const p of pairs) values.push(p.prior, p.posterior);
  const lo = Math.min(0, ...values);
  let hi = Math.max(0, ...values);
  if (hi === lo) hi = lo + 1;
  const plotW = WIDTH - PAD.left - PAD.right;
  const plotH = HEIGHT - PAD.top - PAD.bottom;
  const y = (v: number) => PAD.top + ((hi - v) / (hi - lo)) * plotH;
  const zero = y(0);
  const group = plotW / pairs.length;
  const barW = Math.min(22, group * 0.35);

  const parts: string[] = [];
  const bar = (left: number, value: number, cls: string, title: string) => {
    const top = Math.min(y(value), zero);
    const h = Math.max(Math.abs(y(value) - zero), 0.5);
    parts.push(
      `<rect x="${px(left)}" y="${px(top)}" width="${px(barW)}" height="${px(h)}" class="${cls}">` +
      `<title>${esc(title)}</title></rect>`,
    );
  };

  parts.push(`<line x1="${px(PAD.left)}" y1="${px(zero)}" x2="${px(WIDTH - PAD.right)}" y2="${px(zero)}" class="axis"/>`);
  pairs.forEach((p, i) => {
    const cx = PAD.left + group * (i + 0.5);
    bar(cx - barW - 1, p.prior, "bar-prior", `${p.label} prior ${fmtReturn(p.prior)}`);
    bar(cx + 1, p.posterior, "bar-posterior", `${p.label} posterior ${fmtReturn(p.posterior)}`);
    parts.push(
      `<text x="${px(cx)}" y="${px(HEIGHT - PAD.bottom + 16)}" text-anchor="middle" class="tick">${esc(p.label)}</text>`,
    );
  });
  parts.push(`<rect x="${px(WIDTH - 170)}" y="6" width="10" height="10" class="bar-prior"/>`);
  parts.push(`<text x="${px(WIDTH - 156)}" y="15" class="tick">prior</text>`);
  parts.push(`<rect x="${px(WIDTH - 110)}" y="6" width="10" height="10" class="bar-posterior"/>`);
  parts.push(`<text x="${px(WIDTH - 96)}" y="15" class="tick">posterior</text>`);
  return svg(parts, "prior vs posterior expected excess returns");
}

/** Horizontal bars, one per asset, annotated with the service's weight. */
export function allocationChart(labels: string[], weights: number[]): string {
  if (labels.length === 0) return emptyChart("no allocation");
  const rowH = Math.max(18, Math.min(26, 260 / labels.length));
  const height = PAD.top + PAD.bottom + rowH * labels.length;
  const labelW = 64;
  const valueW = 56;
  const plotW = WIDTH - PAD.left - PAD.right - labelW - valueW;
  const hi = Math.max(1, ...weights);

  const parts: string[] = [];
  labels.forEach((label, i) => {
    const w = weights[i] ?? 0;
    const top = PAD.top + rowH * i;
    const barLen = Math.max((Math.max(w, 0) / hi) * plotW, 0.5);
    parts.push(
      `<text x="${px(PAD.left + labelW - 8)}" y="${px(top + rowH * 0.72)}" text-anchor="end" class="tick">${esc(label)}</text>`,
    );
    parts.push(
      `<rect x="${px(PAD.left + labelW)}" y="${px(top + rowH * 0.15)}" width="${px(barLen)}" height="${px(rowH * 0.7)}" class="bar-alloc">` +
      `<title>${esc(`${label} weight ${fmtWeight(w)}`)}</title></rect>`,
    );
    parts.push(
      `<text x="${px(PAD.left + labelW + barLen + 6)}" y="${px(top + rowH * 0.72)}" class="value">${esc(fmtWeight(w))}</text>`,
    );
  });
  return svg(parts, "portfolio allocation", height);
}

/**
 * The efficient frontier: the constrained curve solid, the unconstrained one
 * dashed underneath it, and the global minimum-variance point marked.
 */
export function frontierChart(
  constrained: CurvePoint[],
  unconstrained: CurvePoint[] | null,
  gmv: CurvePoint,
): string {
  const all = [...constrained, ...(unconstrained ?? []), gmv];
  if (all.length === 0) return emptyChart("no frontier");
  let xLo = Math.min(...all.map((p) => p.volatility));
  let xHi = Math.max(...all.map((p) => p.volatility));
  let yLo = Math.min(...all.map((p) => p.targetReturn));
  let yHi = Math.max(...all.map((p) => p.targetReturn));
  const xPad = (xHi - xLo || 1e-9) * 0.06;
  const yPad = (yHi - yLo || 1e-9) * 0.08;
  xLo -= xPad;
  xHi += xPad;
  yLo -= yPad;
  yHi += yPad;
  const plotW = WIDTH - PAD.left - PAD.right;
  const plotH = HEIGHT - PAD.top - PAD.bottom;
  const sx = (v: number) => PAD.left + ((v - xLo) / (xHi - xLo)) * plotW;
  const sy = (v: number) => PAD.top + ((yHi - v) / (yHi - yLo)) * plotH;
  const path = (points: CurvePoint[]) =>
    points.map((p) => `${px(sx(p.volatility))},${px(sy(p.targetReturn))}`).join(" ");

  const parts: string[] = [];
  parts.push(
    `<line x1="${px(PAD.left)}" y1="${px(HEIGHT - PAD.bottom)}" x2="${px(WIDTH - PAD.right)}" y2="${px(HEIGHT - PAD.bottom)}" class="axis"/>`,
  );
  if (unconstrained && unconstrained.length > 0) {
    parts.push(`<polyline points="${path(unconstrained)}" class="frontier-unconstrained"/>`);
    parts.push(`<text x="${px(WIDTH - 170)}" y="15" class="tick frontier-unconstrained-label">unconstrained</text>`);
  }
  parts.push(`<polyline points="${path(constrained)}" class="frontier-constrained"/>`);
  parts.push(`<text x="${px(WIDTH - 280)}" y="15" class="tick frontier-constrained-label">constrained</text>`);
  const gx = sx(gmv.volatility);
  const gy = sy(gmv.targetReturn);
  parts.push(`<circle cx="${px(gx)}" cy="${px(gy)}" r="5" class="gmv-dot"/>`);
  parts.push(
    `<text x="${px(gx + 9)}" y="${px(gy + 4)}" class="value">` +
    `GMV vol ${esc(fmtReturn(gmv.volatility))} ret ${esc(fmtReturn(gmv.targetReturn))}</text>`,
  );
  parts.push(`<text x="${px(WIDTH / 2)}" y="${px(HEIGHT - 8)}" text-anchor="middle" class="tick">volatility</text>`);
  return svg(parts, "efficient frontier");
}
