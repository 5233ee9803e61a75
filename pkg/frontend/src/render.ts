// Pure HTML-string renderers. Every statistic shown carries the raw payload
// value in a data-value attribute: the UI is a pass-through for API numbers,
// and the tests assert exactly that.

import type {
  ClusterStats,
  GroupDetailPayload,
  GroupSummary,
  Prediction,
  WhatifPayload,
} from "./api.js";
import type { Exploration } from "./state.js";

export function esc(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

// display formatting is presentation only; the exact value rides data-value
export function fmt(v: number): string {
  if (!Number.isFinite(v)) return "-";
  if (v !== 0 && Math.abs(v) < 0.001) return v.toExponential(2);
  return String(Math.round(v * 1000) / 1000);
}

export function fmtPct(v: number): string {
  return `${Math.round(v * 10000) / 100}%`;
}

function statCell(label: string, name: string, value: number, pct = false): string {
  return (
    `<div class="stat"><span class="stat-label">${esc(label)}</span>` +
    `<span class="stat-value" data-stat="${esc(name)}" data-value="${String(value)}">` +
    `${pct ? fmtPct(value) : fmt(value)}</span></div>`
  );
}

export function renderStatsPanel(
  stats: Partial<ClusterStats>,
  title: string,
  idPrefix: string,
): string {
  const rows: string[] = [];
  if (stats.outlier_pct !== undefined) {
    rows.push(statCell("outlier %", `${idPrefix}.outlier_pct`, stats.outlier_pct, true));
  }
  if (stats.iqr_25_75 !== undefined) {
    rows.push(statCell("25-75th", `${idPrefix}.iqr_25_75`, stats.iqr_25_75));
  }
  if (stats.p95 !== undefined) {
    rows.push(statCell("95th", `${idPrefix}.p95`, stats.p95));
  }
  if (stats.std !== undefined) {
    rows.push(statCell("std", `${idPrefix}.std`, stats.std));
  }
  if (stats.job_share !== undefined) {
    rows.push(statCell("job share", `${idPrefix}.job_share`, stats.job_share, true));
  }
  return `<div class="stats-panel"><h3>${esc(title)}</h3>${rows.join("")}</div>`;
}

export function renderPmfChart(probs: number[], centroid: number[]): string {
  const n = probs.length;
  const width = 840;
  const height = 180;
  const barW = width / n;
  const peak = Math.max(...probs, ...centroid, 1e-12);
  const bars = probs
    .map((p, i) => {
      const h = (p / peak) * (height - 10);
      return (
        `<rect class="pmf-bar" data-series="pmf" data-bin="${i}" data-p="${String(p)}" ` +
        `x="${(i * barW).toFixed(2)}" y="${(height - h).toFixed(2)}" ` +
        `width="${Math.max(barW - 0.4, 0.6).toFixed(2)}" height="${h.toFixed(2)}">` +
        `<title>bin ${i}: ${String(p)}</title></rect>`
      );
    })
    .join("");
  const overlay = centroid
    .map((p, i) => {
      const y = height - (p / peak) * (height - 10);
      return (
        `<rect class="centroid-mark" data-series="centroid" data-bin="${i}" data-p="${String(p)}" ` +
        `x="${(i * barW).toFixed(2)}" y="${y.toFixed(2)}" width="${Math.max(barW - 0.4, 0.6).toFixed(2)}" ` +
        `height="1.4"><title>centroid bin ${i}: ${String(p)}</title></rect>`
      );
    })
    .join("");
  return (
    `<svg class="pmf-chart" viewBox="0 0 ${width} ${height}" preserveAspectRatio="none">` +
    `<g>${bars}</g><g>${overlay}</g></svg>`
  );
}

export function renderFeatureTable(features: Record<string, number>): string {
  const rows = Object.entries(features)
    .map(
      ([name, value]) =>
        `<tr><td class="feat-name">${esc(name)}</td>` +
        `<td class="feat-value" data-feature="${esc(name)}" data-value="${String(value)}">` +
        `${fmt(value)}</td></tr>`,
    )
    .join("");
  return `<details class="feature-table"><summary>features (${Object.keys(features).length})</summary><table><tbody>${rows}</tbody></table></details>`;
}

export function renderGroupView(payload: GroupDetailPayload): string {
  const membership = payload.membership;
  return (
    `<div class="group-view" data-group="${esc(payload.key)}">` +
    `<h2>${esc(payload.key)}</h2>` +
    `<p class="membership">assigned cluster ` +
    `<span class="cluster-badge" data-cluster="${membership.cluster_id}">C${membership.cluster_id}</span>` +
    ` from <span data-stat="n_samples" data-value="${String(payload.pmf.n_samples)}">${payload.pmf.n_samples}</span> samples` +
    ` (support <span data-stat="support" data-value="${String(payload.support)}">${payload.support}</span>)</p>` +
    renderPmfChart(payload.pmf.probs, payload.centroid) +
    `<div class="panels">` +
    renderStatsPanel(payload.stats, "group distribution", "group") +
    renderStatsPanel(payload.cluster_stats, `cluster C${membership.cluster_id}`, "cluster") +
    `</div>` +
    renderFeatureTable(payload.features) +
    `</div>`
  );
}

export function renderErrorBanner(message: string): string {
  return `<div class="error-banner" role="alert">${esc(message)}</div>`;
}

function arrow(before: number, after: number): string {
  if (after < before) return `<span class="delta down">&#9660;</span>`;
  if (after > before) return `<span class="delta up">&#9650;</span>`;
  return `<span class="delta flat">=</span>`;
}

function statDelta(label: string, name: string, before: number, after: number): string {
  return (
    `<div class="stat-delta">` +
    `<span class="stat-label">${esc(label)}</span>` +
    `<span data-stat="before.${esc(name)}" data-value="${String(before)}">${fmt(before)}</span>` +
    arrow(before, after) +
    `<span data-stat="after.${esc(name)}" data-value="${String(after)}">${fmt(after)}</span>` +
    `</div>`
  );
}

export function renderProbabilityBars(pred: Prediction, tag: string): string {
  const bars = pred.probabilities
    .map((p, i) => {
      const pct = (p * 100).toFixed(1);
      return (
        `<div class="prob-row"><span class="prob-label">C${i}</span>` +
        `<div class="prob-track"><div class="prob-fill${i === pred.cluster ? " argmax" : ""}" ` +
        `style="width:${pct}%"></div></div>` +
        `<span class="prob-value" data-stat="${tag}.p${i}" data-value="${String(p)}">${fmt(p)}</span></div>`
      );
    })
    .join("");
  return `<div class="prob-bars" data-tag="${esc(tag)}">${bars}</div>`;
}

export function renderWhatifResult(payload: WhatifPayload): string {
  const { before, after } = payload;
  const badge = payload.changed
    ? `<span class="transition-badge changed" data-before="${before.cluster}" data-after="${after.cluster}">` +
      `C${before.cluster} &#8594; C${after.cluster}</span>`
    : `<span class="transition-badge nochange" data-before="${before.cluster}" data-after="${after.cluster}">` +
      `no change (C${before.cluster})</span>`;
  return (
    `<div class="whatif-result">` +
    `<div class="badge-row">${badge}</div>` +
    `<div class="prob-pair"><div><h4>before</h4>${renderProbabilityBars(before, "before")}</div>` +
    `<div><h4>after</h4>${renderProbabilityBars(after, "after")}</div></div>` +
    `<div class="deltas">` +
    statDelta("outlier %", "outlier_pct", before.stats.outlier_pct, after.stats.outlier_pct) +
    statDelta("25-75th", "iqr_25_75", before.stats.iqr_25_75, after.stats.iqr_25_75) +
    statDelta("95th", "p95", before.stats.p95, after.stats.p95) +
    statDelta("std", "std", before.stats.std, after.stats.std) +
    `</div></div>`
  );
}

export function renderHistory(history: Exploration[]): string {
  if (history.length === 0) {
    return `<p class="history-empty">no explorations yet</p>`;
  }
  const items = history
    .map((e) => {
      const ops = e.intervention.ops.length;
      const b = e.response.before.cluster;
      const a = e.response.after.cluster;
      return (
        `<li class="history-item" data-seq="${e.seq}">` +
        `<span class="history-seq">#${e.seq}</span> ` +
        `<span class="history-group">${esc(e.groupKey)}</span> ` +
        `<span class="history-ops">${ops} op${ops === 1 ? "" : "s"}</span> ` +
        `<span class="history-move">C${b} &#8594; C${a}</span></li>`
      );
    })
    .join("");
  return `<ol class="history-list">${items}</ol>`;
}

export function renderGroupList(groups: GroupSummary[], selected: string | null): string {
  const items = groups
    .map(
      (g) =>
        `<li class="group-item${g.key === selected ? " selected" : ""}" data-key="${esc(g.key)}">` +
        `<span class="group-key">${esc(g.key)}</span>` +
        `<span class="group-cluster">C${g.cluster}</span>` +
        `<span class="group-support">${g.support}</span></li>`,
    )
    .join("");
  return `<ul class="group-list">${items}</ul>`;
}
