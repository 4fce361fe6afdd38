/** DOM builders for the labeling view and the report view. */

import type { Candidate, TrainReport } from "./api.js";
import type { LabelDraft } from "./state.js";

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

/** Scatter dot fallback for candidates without an image crop: the shot's
 * 2-D projection inside the pool's bounding box. */
function renderPreview(doc: Document, candidate: Candidate,
                       bounds: [number, number, number, number] | null): HTMLElement {
  const box = el(doc, "div", "preview");
  if (!candidate.preview || !bounds) {
    box.appendChild(el(doc, "span", "preview-na", "no preview"));
    return box;
  }
  const [minX, maxX, minY, maxY] = bounds;
  const spanX = maxX - minX || 1;
  const spanY = maxY - minY || 1;
  const x = ((candidate.preview[0] - minX) / spanX) * 100;
  const y = 100 - ((candidate.preview[1] - minY) / spanY) * 100;
  const dot = el(doc, "div", "preview-dot");
  dot.style.left = `${x}%`;
  dot.style.top = `${y}%`;
  box.appendChild(dot);
  return box;
}

export function previewBounds(candidates: Candidate[]):
    [number, number, number, number] | null {
  const pts = candidates.map((c) => c.preview).filter(
    (p): p is [number, number] => p !== null && p !== undefined);
  if (pts.length === 0) return null;
  const xs = pts.map((p) => p[0]);
  const ys = pts.map((p) => p[1]);
  return [Math.min(...xs), Math.max(...xs), Math.min(...ys), Math.max(...ys)];
}

export interface CardHandlers {
  onLabel: (shotId: string, value: 0 | 1) => void;
  onFocus: (index: number) => void;
}

export function renderCard(
  doc: Document,
  candidate: Candidate,
  index: number,
  draft: LabelDraft,
  assetUrl: (ref: string) => string,
  bounds: [number, number, number, number] | null,
  handlers: CardHandlers,
): HTMLElement {
  const label = draft.get(candidate.shot_id);
  const focused = draft.cursor === index;
  const card = el(doc, "div",
    `card${focused ? " focused" : ""}` +
    (label === 1 ? " positive" : label === 0 ? " negative" : " unset"));
  card.dataset.shot = candidate.shot_id;
  card.dataset.label = label === null ? "unset" : label === 1 ? "positive" : "negative";
  card.tabIndex = -1;
  card.addEventListener("click", () => handlers.onFocus(index));

  if (candidate.image_ref) {
    const img = el(doc, "img", "crop");
    img.src = assetUrl(candidate.image_ref);
    img.alt = candidate.shot_id;
    card.appendChild(img);
  } else {
    card.appendChild(renderPreview(doc, candidate, bounds));
  }

  card.appendChild(el(doc, "div", "shot-id", candidate.shot_id));
  card.appendChild(el(doc, "div", "similarity",
    `similarity ${candidate.similarity.toFixed(3)}`));
  card.appendChild(el(doc, "div", "cluster", `cluster ${candidate.cluster_id}`));

  const buttons = el(doc, "div", "buttons");
  const yes = el(doc, "button", "btn-yes", "positive (y)");
  yes.addEventListener("click", (event) => {
    event.stopPropagation();
    handlers.onLabel(candidate.shot_id, 1);
  });
  const no = el(doc, "button", "btn-no", "negative (n)");
  no.addEventListener("click", (event) => {
    event.stopPropagation();
    handlers.onLabel(candidate.shot_id, 0);
  });
  buttons.appendChild(yes);
  buttons.appendChild(no);
  card.appendChild(buttons);
  return card;
}

export function renderPrCurve(doc: Document,
                              curve: Array<[number, number]>): SVGElement {
  const svgNs = "http://www.w3.org/2000/svg";
  const svg = doc.createElementNS(svgNs, "svg") as SVGElement;
  svg.setAttribute("viewBox", "0 0 110 110");
  svg.setAttribute("class", "pr-curve");
  const axes = doc.createElementNS(svgNs, "path");
  axes.setAttribute("d", "M 5 5 L 5 105 L 105 105");
  axes.setAttribute("class", "axes");
  axes.setAttribute("fill", "none");
  axes.setAttribute("stroke", "#888");
  svg.appendChild(axes);
  const points = curve
    .map(([recall, precision]) =>
      `${5 + recall * 100},${105 - precision * 100}`)
    .join(" ");
  const line = doc.createElementNS(svgNs, "polyline");
  line.setAttribute("points", points);
  line.setAttribute("fill", "none");
  line.setAttribute("stroke", "#c0392b");
  line.setAttribute("stroke-width", "1.5");
  svg.appendChild(line);
  return svg;
}

export function renderReport(doc: Document, report: TrainReport): HTMLElement {
  const panel = el(doc, "div", "report");
  panel.appendChild(el(doc, "h2", undefined, "Training report"));
  const table = el(doc, "div", "ap-table");

  const flame = el(doc, "div", "ap-row");
  flame.appendChild(el(doc, "span", "ap-name", "few-shot AP"));
  const flameValue = el(doc, "span", "ap-value",
    report.ap_flame === null ? "n/a" : String(report.ap_flame));
  flameValue.id = "ap-flame";
  flame.appendChild(flameValue);
  table.appendChild(flame);

  const base = el(doc, "div", "ap-row");
  base.appendChild(el(doc, "span", "ap-name", "zero-shot AP"));
  const baseValue = el(doc, "span", "ap-value",
    report.ap_baseline === null ? "n/a" : String(report.ap_baseline));
  baseValue.id = "ap-baseline";
  base.appendChild(baseValue);
  table.appendChild(base);

  if (report.ap_flame !== null && report.ap_baseline !== null
      && report.ap_baseline !== undefined) {
    const gain = el(doc, "div", "ap-row");
    gain.appendChild(el(doc, "span", "ap-name", "gain"));
    const gainValue = el(doc, "span", "ap-value",
      (report.ap_flame - report.ap_baseline!).toFixed(4));
    gainValue.id = "ap-gain";
    gain.appendChild(gainValue);
    table.appendChild(gain);
  }
  panel.appendChild(table);

  if (report.curve && report.curve.length > 0) {
    panel.appendChild(renderPrCurve(doc, report.curve));
  }
  return panel;
}
