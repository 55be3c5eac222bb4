/**
 * Cluster page: node capacity bars, frameworks with dominant shares, the
 * pending queue and managed services. Figures are verbatim; only the bar
 * geometry is computed locally.
 */

import { esc, fig, usedPercent, vec } from "../format.js";
import type { ClusterView, Service } from "../types.js";

function bar(free: string, total: string): string {
  const width = usedPercent(free, total).toFixed(1);
  return `<div class="bar"><div class="bar-used" style="width:${width}%"></div></div>`;
}

function nodeRows(view: ClusterView): string {
  return view.nodes
    .map(
      (n) => `<tr class="${n.alive ? "" : "dead"}">
<td>${fig(n.node_id)}</td><td>${fig(n.alive)}</td>
<td>${fig(n.free.cpu)} / ${fig(n.total.cpu)} ${bar(n.free.cpu, n.total.cpu)}</td>
<td>${fig(n.free.mem)} / ${fig(n.total.mem)} ${bar(n.free.mem, n.total.mem)}</td>
<td>${fig(n.free.disk)} / ${fig(n.total.disk)} ${bar(n.free.disk, n.total.disk)}</td>
<td class="num">${n.idle_since === null ? "—" : fig(n.idle_since)}</td>
</tr>`,
    )
    .join("\n");
}

function frameworkRows(view: ClusterView): string {
  return view.frameworks
    .map(
      (f) => `<tr><td>${fig(f.framework_id)}</td><td>${fig(f.kind)}</td>
<td>${vec(f.allocation)}</td>
<td class="num">${fig(f.dominant_share)}</td>
<td class="num">${fig(f.queue_length)}</td></tr>`,
    )
    .join("\n");
}

function queueRows(view: ClusterView): string {
  return view.queue
    .map(
      (q) => `<tr><td class="num">${fig(q.seq)}</td><td>${fig(q.framework_id)}</td>
<td>${vec(q.demand)}</td><td>${fig(q.unit_id)}</td>
<td class="num">${fig(q.enqueued_at)}</td></tr>`,
    )
    .join("\n");
}

function serviceRows(services: Service[]): string {
  return services
    .map((s) => {
      const states = s.instances
        .map((i) => `<span class="chip" data-fig>${esc(i.state)}</span>`)
        .join(" ");
      return `<tr><td>${fig(s.service_id)}</td><td class="num">${fig(s.replicas_target)}</td>
<td>${vec(s.demand)}</td><td>${states}</td><td class="mono">${fig(s.endpoint)}</td></tr>`;
    })
    .join("\n");
}

export function renderCluster(view: ClusterView): string {
  const queueBlock = view.queue.length
    ? `<table class="grid"><thead><tr><th>seq</th><th>framework</th><th>demand</th><th>unit</th><th>since</th></tr></thead>
<tbody>${queueRows(view)}</tbody></table>`
    : `<p class="empty">Queue is empty.</p>`;
  const servicesBlock = view.services.length
    ? `<table class="grid"><thead><tr><th>service</th><th>target</th><th>demand</th><th>instances</th><th>endpoint</th></tr></thead>
<tbody>${serviceRows(view.services)}</tbody></table>`
    : `<p class="empty">No managed services.</p>`;
  return `<section class="panel">
<h2>Cluster</h2>
<p>policy ${fig(view.policy)} · total ${vec(view.total)}</p>
<h3>Nodes</h3>
<table class="grid">
<thead><tr><th>node</th><th>alive</th><th>cpu</th><th>mem</th><th>disk</th><th>idle since</th></tr></thead>
<tbody>${nodeRows(view)}</tbody></table>
<h3>Frameworks</h3>
<table class="grid">
<thead><tr><th>framework</th><th>kind</th><th>allocation</th><th>dominant share</th><th>queued</th></tr></thead>
<tbody>${frameworkRows(view)}</tbody></table>
<h3>Pending queue</h3>${queueBlock}
<h3>Services</h3>${servicesBlock}
</section>`;
}
