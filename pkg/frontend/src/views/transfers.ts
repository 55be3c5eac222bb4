/**
 * Transfers page: stream counts and exact byte progress per job, with a
 * throughput sparkline from the controller's recorded windows.
 */

import { esc, fig } from "../format.js";
import type { DatasetEntry, TransferJob } from "../types.js";

const SPARK_W = 120;
const SPARK_H = 24;

/** Inline SVG sparkline of (tick, rate) pairs; geometry only. */
export function sparkline(history: [number, number][]): string {
  if (history.length < 2) return "";
  const rates = history.map(([, r]) => r);
  const top = Math.max(...rates, 1);
  const step = SPARK_W / (history.length - 1);
  const points = history
    .map(([, r], i) => `${(i * step).toFixed(1)},${(SPARK_H - (r / top) * SPARK_H).toFixed(1)}`)
    .join(" ");
  return `<svg class="spark" width="${SPARK_W}" height="${SPARK_H}" viewBox="0 0 ${SPARK_W} ${SPARK_H}">
<polyline fill="none" points="${points}"/></svg>`;
}

function progress(job: TransferJob): string {
  const pct =
    job.total_bytes > 0 ? Math.min(100, (job.bytes_moved_float / job.total_bytes) * 100) : 0;
  return `<div class="bar"><div class="bar-used" style="width:${pct.toFixed(1)}%"></div></div>`;
}

export function renderTransfers(jobs: TransferJob[], datasets: DatasetEntry[]): string {
  const rows = jobs
    .map(
      (j) => `<tr>
<td>${fig(j.job_id)}</td><td>${fig(j.dataset_id)}</td>
<td>${fig(j.src_site)} → ${fig(j.dst_site)}</td>
<td><span class="badge ${j.state === "Done" ? "ok" : j.state === "Failed" ? "bad" : "busy"}" data-fig>${esc(j.state)}</span></td>
<td class="num">${fig(j.streams)}</td>
<td class="num">${fig(j.bytes_moved)} / ${fig(j.total_bytes)} ${progress(j)}</td>
<td>${sparkline(j.throughput_history)}</td>
<td class="actions">${
        j.state === "Done" || j.state === "Failed" || j.state === "Cancelled"
          ? ""
          : `<button class="danger" data-action="cancel-transfer" data-id="${esc(j.job_id)}">cancel</button>`
      }</td>
</tr>`,
    )
    .join("\n");
  const table = jobs.length
    ? `<table class="grid">
<thead><tr><th>job</th><th>dataset</th><th>route</th><th>state</th><th>streams</th><th>bytes</th><th>rate</th><th></th></tr></thead>
<tbody>${rows}</tbody></table>`
    : `<p class="empty">No transfers scheduled.</p>`;

  const datasetRows = datasets
    .map((d) => {
      const replicas = d.replicas
        .map((r) => `${fig(r.site_id)} (${fig(r.completeness)})`)
        .join(", ");
      return `<tr><td>${fig(d.dataset_id)}</td><td>${fig(d.space)}</td>
<td class="num">${fig(d.total_size)}</td><td>${replicas}</td></tr>`;
    })
    .join("\n");
  const datasetTable = datasets.length
    ? `<table class="grid">
<thead><tr><th>dataset</th><th>space</th><th>bytes</th><th>replicas</th></tr></thead>
<tbody>${datasetRows}</tbody></table>`
    : `<p class="empty">Namespace is empty.</p>`;

  return `<section class="panel"><h2>Transfers</h2>${table}
<h3>Datasets</h3>${datasetTable}
<form class="inline" data-form="transfer">
<input name="dataset" placeholder="dataset id" required>
<input name="src" placeholder="source site" required>
<input name="dst" placeholder="destination site" required>
<button type="submit">schedule transfer</button>
</form>
</section>`;
}
